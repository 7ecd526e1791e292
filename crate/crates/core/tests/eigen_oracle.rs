use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;

use qsvd_entropy::linalg::eigen_symmetric;
use qsvd_entropy::simcore::DensityMatrix;

fn sorted_desc(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = v.collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn symmetric(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(-1.0f64..1.0, n * n).prop_map(move |raw| {
        (0..n)
            .map(|i| (0..n).map(|j| raw[i.min(j) * n + i.max(j)]).collect())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn jacobi_agrees_with_nalgebra(m in (1usize..=8).prop_flat_map(symmetric)) {
        let n = m.len();
        let ours = eigen_symmetric(&m).unwrap();
        let theirs = SymmetricEigen::new(DMatrix::from_fn(n, n, |i, j| m[i][j]));
        let theirs = sorted_desc(theirs.eigenvalues.iter().copied());
        for (a, b) in ours.values.iter().zip(&theirs) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let back = ours.reconstruct();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((back[i][j] - m[i][j]).abs() < 1e-9);
            }
        }
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..n).map(|k| ours.vectors[a][k] * ours.vectors[b][k]).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn hermitian_spectrum_agrees_with_nalgebra(
        dim in 1usize..=4,
        raw in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16),
    ) {
        let h = DMatrix::from_fn(dim, dim, |i, j| {
            let (re, im) = raw[i.min(j) * 4 + i.max(j)];
            match i.cmp(&j) {
                std::cmp::Ordering::Equal => Complex64::new(re, 0.0),
                std::cmp::Ordering::Less => Complex64::new(re, im),
                std::cmp::Ordering::Greater => Complex64::new(re, -im),
            }
        });
        let entries: Vec<Complex64> = (0..dim * dim).map(|k| h[(k / dim, k % dim)]).collect();
        let ours = DensityMatrix::from_entries(dim, entries).unwrap().eigenvalues().unwrap();
        let theirs = sorted_desc(SymmetricEigen::new(h).eigenvalues.iter().copied());
        prop_assert_eq!(ours.len(), dim);
        for (a, b) in ours.iter().zip(&theirs) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
