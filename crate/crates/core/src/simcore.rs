//! Dense statevector simulator.
//!
//! Qubit 0 is the most significant bit of a basis index, so for a bipartite
//! state the first register's index is the row and the second register's
//! index is the column of the amplitude matrix (`index = row · 2^m + col`).

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

const NORM_TOL: f64 = 1e-10;
/// Upper bound on register size; the dense representation stops being sensible beyond it.
pub const MAX_QUBITS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    H,
    Cnot,
    Cz,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }

    pub fn is_two_qubit(self) -> bool {
        matches!(self, GateKind::Cnot | GateKind::Cz)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::H => "H",
            GateKind::Cnot => "CNOT",
            GateKind::Cz => "CZ",
        };
        f.write_str(s)
    }
}

/// One gate of a circuit. Serializes as `{kind, target, control?, angle?}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateInstruction {
    pub kind: GateKind,
    pub target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

impl GateInstruction {
    pub fn rx(target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Rx, target, angle)
    }

    pub fn ry(target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Ry, target, angle)
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Rz, target, angle)
    }

    pub fn h(target: usize) -> Self {
        Self {
            kind: GateKind::H,
            target,
            control: None,
            angle: None,
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cnot,
            target,
            control: Some(control),
            angle: None,
        }
    }

    pub fn cz(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cz,
            target,
            control: Some(control),
            angle: None,
        }
    }

    fn rotation(kind: GateKind, target: usize, angle: f64) -> Self {
        Self {
            kind,
            target,
            control: None,
            angle: Some(angle),
        }
    }

    fn validate(&self, n_qubits: usize) -> std::result::Result<(), String> {
        if self.target >= n_qubits {
            return Err(format!(
                "target qubit {} out of range for {n_qubits} qubits",
                self.target
            ));
        }
        match (self.kind.is_two_qubit(), self.control) {
            (true, Some(c)) if c >= n_qubits => {
                return Err(format!("control qubit {c} out of range for {n_qubits} qubits"))
            }
            (true, Some(c)) if c == self.target => {
                return Err(format!("control and target are both qubit {c}"))
            }
            (true, None) => return Err(format!("{} requires a control qubit", self.kind)),
            (false, Some(_)) => return Err(format!("{} takes no control qubit", self.kind)),
            _ => {}
        }
        match (self.kind.is_rotation(), self.angle) {
            (true, None) => Err(format!("{} requires an angle", self.kind)),
            (true, Some(a)) if !a.is_finite() => Err(format!("non-finite angle {a}")),
            (false, Some(_)) => Err(format!("{} takes no angle", self.kind)),
            _ => Ok(()),
        }
    }
}

/// Ordered gate list over a fixed number of qubits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateCircuit {
    pub n_qubits: usize,
    pub instructions: Vec<GateInstruction>,
}

impl GateCircuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            instructions: Vec::new(),
        }
    }

    pub fn with_instructions(n_qubits: usize, instructions: Vec<GateInstruction>) -> Result<Self> {
        let circuit = Self {
            n_qubits,
            instructions,
        };
        circuit.validate()?;
        Ok(circuit)
    }

    pub fn push(&mut self, instruction: GateInstruction) -> &mut Self {
        self.instructions.push(instruction);
        self
    }

    /// Checks every instruction, naming the first offending position.
    pub fn validate(&self) -> Result<()> {
        for (pos, ins) in self.instructions.iter().enumerate() {
            ins.validate(self.n_qubits)
                .map_err(|e| Error::Structural(format!("instruction {pos}: {e}")))?;
        }
        Ok(())
    }

    pub fn gate_count(&self) -> usize {
        self.instructions.len()
    }

    pub fn cnot_count(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| i.kind == GateKind::Cnot)
            .count()
    }

    /// Relocates this circuit onto qubits `offset..offset + n_qubits` of a wider register.
    pub fn embedded(&self, offset: usize, total_qubits: usize) -> Result<GateCircuit> {
        if offset + self.n_qubits > total_qubits {
            return Err(Error::Structural(format!(
                "cannot embed {} qubits at offset {offset} into {total_qubits}",
                self.n_qubits
            )));
        }
        let instructions = self
            .instructions
            .iter()
            .map(|i| GateInstruction {
                target: i.target + offset,
                control: i.control.map(|c| c + offset),
                ..*i
            })
            .collect();
        Ok(GateCircuit {
            n_qubits: total_qubits,
            instructions,
        })
    }

    /// Appends another circuit over the same register.
    pub fn append(&mut self, other: &GateCircuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::Structural(format!(
                "cannot append a {}-qubit circuit to a {}-qubit circuit",
                other.n_qubits, self.n_qubits
            )));
        }
        self.instructions.extend_from_slice(&other.instructions);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// As [`GateCircuit::to_json`] with a leading `"method"` field naming the producer.
    /// [`GateCircuit::from_json`] ignores the tag.
    pub fn to_tagged_json(&self, method: &str) -> Result<String> {
        #[derive(Serialize)]
        struct Tagged<'a> {
            method: &'a str,
            #[serde(flatten)]
            circuit: &'a GateCircuit,
        }
        Ok(serde_json::to_string_pretty(&Tagged {
            method,
            circuit: self,
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let circuit: GateCircuit = serde_json::from_str(s)?;
        circuit.validate()?;
        Ok(circuit)
    }
}

/// Pure state of `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if n_qubits > MAX_QUBITS {
        return Err(Error::Argument(format!(
            "{n_qubits} qubits exceeds the simulator limit of {MAX_QUBITS}"
        )));
    }
    Ok(())
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::Argument(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Wraps amplitudes, checking length is a power of two and the norm is 1.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::Shape(format!(
                "amplitude count {dim} is not a power of two"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_qubit_count(n_qubits)?;
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Argument("non-finite amplitude".into()));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Argument(format!(
                "state is not normalized: squared norm {norm}"
            )));
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::from_amplitudes(amplitudes.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Born-rule probabilities of the computational basis.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// True when every imaginary part is below `tol` in magnitude.
    pub fn is_real(&self, tol: f64) -> bool {
        self.amplitudes.iter().all(|a| a.im.abs() <= tol)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Structural(format!(
                "qubit count mismatch: {} vs {}",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Applies a circuit in place. The circuit is validated first so the
    /// state is never left half-updated.
    pub fn apply(&mut self, circuit: &GateCircuit) -> Result<()> {
        if circuit.n_qubits != self.n_qubits {
            return Err(Error::Structural(format!(
                "circuit acts on {} qubits but the state has {}",
                circuit.n_qubits, self.n_qubits
            )));
        }
        circuit.validate()?;
        for ins in &circuit.instructions {
            self.apply_instruction(ins);
        }
        Ok(())
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Applies one already-validated instruction.
    pub(crate) fn apply_instruction(&mut self, ins: &GateInstruction) {
        let t = self.mask(ins.target);
        match ins.kind {
            GateKind::Cnot => {
                let c = self.mask(ins.control.expect("validated"));
                for i in 0..self.amplitudes.len() {
                    if i & c != 0 && i & t == 0 {
                        self.amplitudes.swap(i, i | t);
                    }
                }
            }
            GateKind::Cz => {
                let c = self.mask(ins.control.expect("validated"));
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    if i & c != 0 && i & t != 0 {
                        *a = -*a;
                    }
                }
            }
            kind => {
                let m = single_qubit_matrix(kind, ins.angle.unwrap_or(0.0));
                for i in 0..self.amplitudes.len() {
                    if i & t == 0 {
                        let a0 = self.amplitudes[i];
                        let a1 = self.amplitudes[i | t];
                        self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                        self.amplitudes[i | t] = m[1][0] * a0 + m[1][1] * a1;
                    }
                }
            }
        }
    }

    /// Amplitudes as a `2^n_first × 2^(n − n_first)` matrix.
    fn bipartite_rows(&self, n_first: usize) -> Result<Vec<&[Complex64]>> {
        if n_first == 0 || n_first >= self.n_qubits {
            return Err(Error::Argument(format!(
                "first register must hold 1..{} qubits, got {n_first}",
                self.n_qubits
            )));
        }
        let cols = 1usize << (self.n_qubits - n_first);
        Ok(self.amplitudes.chunks(cols).collect())
    }
}

fn single_qubit_matrix(kind: GateKind, angle: f64) -> [[Complex64; 2]; 2] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let (cos, sin) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    match kind {
        GateKind::Rx => [[c(cos, 0.0), c(0.0, -sin)], [c(0.0, -sin), c(cos, 0.0)]],
        GateKind::Ry => [[c(cos, 0.0), c(-sin, 0.0)], [c(sin, 0.0), c(cos, 0.0)]],
        GateKind::Rz => [[c(cos, -sin), c(0.0, 0.0)], [c(0.0, 0.0), c(cos, sin)]],
        GateKind::H => [
            [c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)],
            [c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)],
        ],
        GateKind::Cnot | GateKind::Cz => unreachable!("two-qubit gate"),
    }
}

/// Returns `circuit · state`, leaving the input untouched.
pub fn apply_circuit(state: &StateVector, circuit: &GateCircuit) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply(circuit)?;
    Ok(out)
}

/// `|⟨a|b⟩|²`, clamped into `[0, 1]`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().clamp(0.0, 1.0))
}

/// `⟨Z_{q1} Z_{q2}⟩`.
pub fn expectation_zz(state: &StateVector, q1: usize, q2: usize) -> Result<f64> {
    let n = state.n_qubits;
    if q1 >= n || q2 >= n {
        return Err(Error::Structural(format!(
            "qubits ({q1}, {q2}) out of range for {n} qubits"
        )));
    }
    if q1 == q2 {
        return Err(Error::Structural(format!("ZZ needs distinct qubits, got {q1} twice")));
    }
    let (m1, m2) = (state.mask(q1), state.mask(q2));
    Ok(state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let aligned = (j & m1 == 0) == (j & m2 == 0);
            if aligned {
                a.norm_sqr()
            } else {
                -a.norm_sqr()
            }
        })
        .sum())
}

/// Draws `shots` computational-basis outcomes. Only observed indices appear.
pub fn sample_counts(state: &StateVector, shots: u64, seed: u64) -> Result<BTreeMap<usize, u64>> {
    if shots == 0 {
        return Err(Error::Argument("shots must be at least 1".into()));
    }
    let dist = WeightedIndex::new(state.probabilities())
        .map_err(|e| Error::Argument(format!("cannot sample from state: {e}")))?;
    let mut rng = rng::stream(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        *counts.entry(dist.sample(&mut rng)).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Complex Hermitian matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_entries(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Shape(format!(
                "{} entries do not form a {dim}×{dim} matrix",
                entries.len()
            )));
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Real part as nested rows.
    pub fn real_part(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j).re).collect())
            .collect()
    }

    /// Eigenvalues in descending order.
    ///
    /// A Hermitian `H = A + iB` is diagonalized through the real symmetric
    /// embedding `[[A, −B], [B, A]]`, whose spectrum is that of `H` with every
    /// eigenvalue doubled.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.dim;
        let mut big = vec![vec![0.0; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                // average with the conjugate transpose to absorb rounding asymmetry
                let h = 0.5 * (self.get(i, j) + self.get(j, i).conj());
                big[i][j] = h.re;
                big[i + n][j + n] = h.re;
                big[i][j + n] = -h.im;
                big[i + n][j] = h.im;
            }
        }
        let eig = linalg::eigen_symmetric(&big)?;
        Ok(eig.values.iter().step_by(2).copied().collect())
    }

    /// Frobenius norm of `self − other`.
    pub fn frobenius_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::Shape(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }
}

/// Reduced density matrix of the first `n_first` qubits (traces out the rest).
pub fn partial_trace_second(state: &StateVector, n_first: usize) -> Result<DensityMatrix> {
    let rows = state.bipartite_rows(n_first)?;
    let dim = rows.len();
    let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let v: Complex64 = rows[i].iter().zip(rows[j]).map(|(a, b)| a * b.conj()).sum();
            entries[i * dim + j] = v;
            entries[j * dim + i] = v.conj();
        }
    }
    DensityMatrix::from_entries(dim, entries)
}

/// Squared Schmidt coefficients across the cut after `n_first` qubits, descending.
pub fn schmidt_values(state: &StateVector, n_first: usize) -> Result<Vec<f64>> {
    let rho = partial_trace_second(state, n_first)?;
    Ok(rho.eigenvalues()?.into_iter().map(|x| x.max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn close(a: Complex64, re: f64, im: f64) -> bool {
        (a.re - re).abs() < 1e-12 && (a.im - im).abs() < 1e-12
    }

    fn bell() -> StateVector {
        StateVector::from_real(&[FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]).unwrap()
    }

    #[test]
    fn hadamard_on_zero() {
        let c = GateCircuit::with_instructions(1, vec![GateInstruction::h(0)]).unwrap();
        let out = apply_circuit(&StateVector::zero(1).unwrap(), &c).unwrap();
        assert!(close(out.amplitudes()[0], FRAC_1_SQRT_2, 0.0));
        assert!(close(out.amplitudes()[1], FRAC_1_SQRT_2, 0.0));
    }

    #[test]
    fn double_cnot_is_identity() {
        let c = GateCircuit::with_instructions(
            2,
            vec![GateInstruction::cnot(0, 1), GateInstruction::cnot(0, 1)],
        )
        .unwrap();
        let input = StateVector::zero(2).unwrap();
        assert_eq!(apply_circuit(&input, &c).unwrap(), input);
    }

    #[test]
    fn ry_half_pi() {
        let c = GateCircuit::with_instructions(1, vec![GateInstruction::ry(0, FRAC_PI_2)]).unwrap();
        let out = apply_circuit(&StateVector::zero(1).unwrap(), &c).unwrap();
        assert!(close(out.amplitudes()[0], FRAC_PI_4.cos(), 0.0));
        assert!(close(out.amplitudes()[1], FRAC_PI_4.sin(), 0.0));
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        let mut c = GateCircuit::new(2);
        c.push(GateInstruction::rx(0, std::f64::consts::PI));
        let out = apply_circuit(&StateVector::zero(2).unwrap(), &c).unwrap();
        // RX(π)|0⟩ = −i|1⟩ on qubit 0 → index 0b10
        assert!(close(out.amplitudes()[2], 0.0, -1.0));
    }

    #[test]
    fn out_of_range_names_position() {
        let c = GateCircuit {
            n_qubits: 2,
            instructions: vec![GateInstruction::h(0), GateInstruction::cnot(1, 2)],
        };
        let err = apply_circuit(&StateVector::zero(2).unwrap(), &c).unwrap_err();
        assert!(err.to_string().contains("instruction 1"), "{err}");
    }

    #[test]
    fn malformed_instructions_rejected() {
        let bad = [
            GateInstruction { control: None, ..GateInstruction::cnot(0, 1) },
            GateInstruction::cnot(1, 1),
            GateInstruction { angle: None, ..GateInstruction::ry(0, 1.0) },
            GateInstruction { angle: Some(1.0), ..GateInstruction::h(0) },
            GateInstruction::ry(0, f64::NAN),
        ];
        for ins in bad {
            assert!(GateCircuit::with_instructions(2, vec![ins]).is_err(), "{ins:?}");
        }
    }

    #[test]
    fn circuit_qubit_mismatch() {
        let c = GateCircuit::new(3);
        assert!(matches!(
            apply_circuit(&StateVector::zero(2).unwrap(), &c),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn fidelity_examples() {
        let zero = StateVector::zero(1).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        let plus = StateVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        assert_eq!(fidelity(&zero, &zero).unwrap(), 1.0);
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        assert!((fidelity(&zero, &plus).unwrap() - 0.5).abs() < 1e-15);
        assert!(fidelity(&zero, &StateVector::zero(2).unwrap()).is_err());
    }

    #[test]
    fn fidelity_ignores_global_phase() {
        let a = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let phase = Complex64::from_polar(1.0, 0.7);
        let b = StateVector::from_amplitudes(a.amplitudes().iter().map(|x| x * phase).collect())
            .unwrap();
        assert!((fidelity(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zz_examples() {
        assert_eq!(expectation_zz(&StateVector::zero(2).unwrap(), 0, 1).unwrap(), 1.0);
        assert_eq!(expectation_zz(&StateVector::basis(2, 1).unwrap(), 0, 1).unwrap(), -1.0);
        assert!((expectation_zz(&bell(), 0, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!(expectation_zz(&bell(), 1, 1).is_err());
        assert!(expectation_zz(&bell(), 0, 2).is_err());
    }

    #[test]
    fn sampling_examples() {
        let one = StateVector::basis(1, 1).unwrap();
        let counts = sample_counts(&one, 100, 3).unwrap();
        assert_eq!(counts, BTreeMap::from([(1, 100)]));
        let single = sample_counts(&bell(), 1, 9).unwrap();
        assert_eq!(single.values().sum::<u64>(), 1);
        assert!(matches!(sample_counts(&one, 0, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn sampling_binomial_within_five_sigma() {
        let plus = StateVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap();
        let shots = 100_000u64;
        let counts = sample_counts(&plus, shots, 42).unwrap();
        let zeros = *counts.get(&0).unwrap_or(&0) as f64;
        let sigma = (shots as f64 * 0.25).sqrt();
        assert!((zeros - 50_000.0).abs() < 5.0 * sigma, "{zeros}");
        assert_eq!(counts.values().sum::<u64>(), shots);
    }

    #[test]
    fn partial_trace_examples() {
        let rho = partial_trace_second(&StateVector::zero(2).unwrap(), 1).unwrap();
        assert!(close(rho.get(0, 0), 1.0, 0.0));
        assert!(close(rho.get(1, 1), 0.0, 0.0));
        let rho = partial_trace_second(&bell(), 1).unwrap();
        assert!(close(rho.get(0, 0), 0.5, 0.0));
        assert!(close(rho.get(0, 1), 0.0, 0.0));
        assert!(close(rho.get(1, 1), 0.5, 0.0));
        assert!(partial_trace_second(&bell(), 2).is_err());
        assert!(partial_trace_second(&bell(), 0).is_err());
    }

    #[test]
    fn schmidt_examples() {
        let product = schmidt_values(&StateVector::zero(2).unwrap(), 1).unwrap();
        assert!((product[0] - 1.0).abs() < 1e-12 && product[1].abs() < 1e-12);
        let ent = schmidt_values(&bell(), 1).unwrap();
        assert!((ent[0] - 0.5).abs() < 1e-12 && (ent[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn complex_reduced_state_eigenvalues() {
        // (|00⟩ + i|11⟩)/√2 has a diagonal but the embedding must still pair up
        let s = StateVector::from_amplitudes(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.8),
        ])
        .unwrap();
        let v = schmidt_values(&s, 1).unwrap();
        assert!((v[0] - 0.64).abs() < 1e-12 && (v[1] - 0.36).abs() < 1e-12);
    }

    #[test]
    fn embedding_shifts_indices() {
        let mut c = GateCircuit::new(2);
        c.push(GateInstruction::cnot(0, 1));
        let e = c.embedded(2, 4).unwrap();
        assert_eq!(e.instructions[0], GateInstruction::cnot(2, 3));
        assert!(c.embedded(3, 4).is_err());
    }

    #[test]
    fn json_round_trip_and_shape() {
        let c = GateCircuit::with_instructions(
            2,
            vec![GateInstruction::ry(0, 0.25), GateInstruction::cnot(0, 1)],
        )
        .unwrap();
        let json = c.to_json().unwrap();
        assert!(json.contains("\"kind\": \"RY\""));
        assert!(json.contains("\"kind\": \"CNOT\""));
        assert!(!json.contains("\"control\": null"));
        assert_eq!(GateCircuit::from_json(&json).unwrap(), c);
        assert_eq!(c.cnot_count(), 1);
        assert_eq!(c.gate_count(), 2);
        let tagged = c.to_tagged_json("aae").unwrap();
        assert!(tagged.contains("\"method\": \"aae\""));
        assert_eq!(GateCircuit::from_json(&tagged).unwrap(), c);
    }

    #[test]
    fn non_normalized_rejected() {
        assert!(StateVector::from_real(&[1.0, 1.0]).is_err());
        assert!(matches!(StateVector::from_real(&[1.0, 0.0, 0.0]), Err(Error::Shape(_))));
    }
}
