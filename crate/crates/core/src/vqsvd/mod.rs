//! Variational quantum SVD of a bipartite stock ⊗ time state.
//!
//! Local unitaries `U(θ)` on the stock register and `V(θ′)` on the time
//! register are trained so that `(U ⊗ V)|ψ⟩` only populates matched pairs
//! `|j⟩|j⟩`. The cost counts the expected Hamming distance between the two
//! registers' bit strings; at zero cost the matched-pair probabilities are the
//! squared Schmidt coefficients, and the stock-side Schmidt vectors are
//! `U(θ)†|j⟩`.

mod spsa;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::entropy_from_weights;
use crate::rng;
use crate::simcore::{
    partial_trace_second, sample_counts, DensityMatrix, GateCircuit, GateInstruction, StateVector,
};

pub use spsa::{spsa_minimize, SpsaConfig, SpsaOutcome};

/// Matched-pair mass below this means the optimization failed outright.
pub const MIN_EXTRACTED_MASS: f64 = 1e-6;

/// Layered RZ·RY + linear-CNOT ansatz shape for one register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_qubits_per_register: usize,
    pub layers: usize,
}

impl AnsatzSpec {
    pub fn new(n_qubits_per_register: usize, layers: usize) -> Result<Self> {
        let spec = Self {
            n_qubits_per_register,
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits_per_register == 0 || self.layers == 0 {
            return Err(Error::Argument(format!(
                "ansatz needs ≥ 1 qubit and ≥ 1 layer, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Parameters per register: one RZ and one RY per qubit per layer.
    pub fn param_count(&self) -> usize {
        self.layers * 2 * self.n_qubits_per_register
    }

    pub fn total_qubits(&self) -> usize {
        2 * self.n_qubits_per_register
    }
}

/// Builds the register-local ansatz circuit.
///
/// Each layer applies `RZ(θ)` then `RY(θ′)` on every qubit, followed by
/// `CNOT(q → q+1)` for `q = 0..n−1`.
pub fn build_ansatz(spec: &AnsatzSpec, params: &[f64]) -> Result<GateCircuit> {
    spec.validate()?;
    if params.len() != spec.param_count() {
        return Err(Error::Argument(format!(
            "ansatz expects {} parameters, got {}",
            spec.param_count(),
            params.len()
        )));
    }
    let n = spec.n_qubits_per_register;
    let mut circuit = GateCircuit::new(n);
    for layer in params.chunks(2 * n) {
        for q in 0..n {
            circuit.push(GateInstruction::rz(q, layer[2 * q]));
            circuit.push(GateInstruction::ry(q, layer[2 * q + 1]));
        }
        for q in 0..n.saturating_sub(1) {
            circuit.push(GateInstruction::cnot(q, q + 1));
        }
    }
    Ok(circuit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub theta_u: Vec<f64>,
    pub theta_v: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(spec: &AnsatzSpec) -> Self {
        Self {
            theta_u: vec![0.0; spec.param_count()],
            theta_v: vec![0.0; spec.param_count()],
        }
    }

    /// Splits `[θ_u, θ_v]`.
    pub fn from_flat(spec: &AnsatzSpec, flat: &[f64]) -> Result<Self> {
        let k = spec.param_count();
        if flat.len() != 2 * k {
            return Err(Error::Argument(format!(
                "expected {} parameters, got {}",
                2 * k,
                flat.len()
            )));
        }
        Ok(Self {
            theta_u: flat[..k].to_vec(),
            theta_v: flat[k..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.theta_u.iter().chain(&self.theta_v).copied().collect()
    }
}

/// How expectation values are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum CostMode {
    Exact,
    /// Estimate from `count` computational-basis samples drawn with `seed`.
    Shots { count: u64, seed: u64 },
}

/// The input state: either a preparation circuit from `|0…0⟩` or the state itself.
#[derive(Debug, Clone, PartialEq)]
pub enum Preparation {
    Circuit(GateCircuit),
    State(StateVector),
}

impl Preparation {
    pub fn n_qubits(&self) -> usize {
        match self {
            Preparation::Circuit(c) => c.n_qubits,
            Preparation::State(s) => s.n_qubits(),
        }
    }

    pub fn prepared_state(&self) -> Result<StateVector> {
        match self {
            Preparation::Circuit(c) => {
                let mut s = StateVector::zero(c.n_qubits)?;
                s.apply(c)?;
                Ok(s)
            }
            Preparation::State(s) => Ok(s.clone()),
        }
    }
}

/// Register unitaries for one parameter setting, embedded into the full width.
struct Transform {
    circuit: GateCircuit,
}

impl Transform {
    fn new(spec: &AnsatzSpec, params: &ParamVector) -> Result<Self> {
        let total = spec.total_qubits();
        let n = spec.n_qubits_per_register;
        let mut circuit = build_ansatz(spec, &params.theta_u)?.embedded(0, total)?;
        circuit.append(&build_ansatz(spec, &params.theta_v)?.embedded(n, total)?)?;
        Ok(Self { circuit })
    }

    fn apply(&self, state: &StateVector) -> Result<StateVector> {
        let mut out = state.clone();
        out.apply(&self.circuit)?;
        Ok(out)
    }
}

fn check_registers(n_qubits: usize, spec: &AnsatzSpec) -> Result<()> {
    spec.validate()?;
    if n_qubits != spec.total_qubits() {
        return Err(Error::Structural(format!(
            "state has {n_qubits} qubits but two {}-qubit registers were requested",
            spec.n_qubits_per_register
        )));
    }
    Ok(())
}

/// `(U ⊗ V)|ψ⟩`.
pub fn transformed_state(
    prepared: &StateVector,
    params: &ParamVector,
    spec: &AnsatzSpec,
) -> Result<StateVector> {
    check_registers(prepared.n_qubits(), spec)?;
    Transform::new(spec, params)?.apply(prepared)
}

/// Number of differing bits between the stock and time halves of basis index `j`.
fn register_hamming(j: usize, n_per_register: usize) -> u32 {
    let mask = (1usize << n_per_register) - 1;
    ((j >> n_per_register) ^ (j & mask)).count_ones()
}

/// `Σ_q (1 − ⟨Z_q Z_{q+n}⟩)/2`, i.e. the expected register Hamming distance.
pub fn hamming_cost(state: &StateVector, n_per_register: usize) -> f64 {
    state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(j, a)| a.norm_sqr() * register_hamming(j, n_per_register) as f64)
        .sum()
}

/// Sample-mean Hamming distance, which estimates every `⟨Z_q Z_{q+n}⟩` from one shot set.
pub fn hamming_cost_sampled(
    state: &StateVector,
    n_per_register: usize,
    shots: u64,
    seed: u64,
) -> Result<f64> {
    let counts = sample_counts(state, shots, seed)?;
    let total: f64 = counts
        .iter()
        .map(|(&j, &c)| c as f64 * register_hamming(j, n_per_register) as f64)
        .sum();
    Ok(total / shots as f64)
}

fn cost_of(state: &StateVector, spec: &AnsatzSpec, mode: CostMode) -> Result<f64> {
    match mode {
        CostMode::Exact => Ok(hamming_cost(state, spec.n_qubits_per_register)),
        CostMode::Shots { count, seed } => {
            hamming_cost_sampled(state, spec.n_qubits_per_register, count, seed)
        }
    }
}

/// The VQSVD cost on `(U ⊗ V)·prep·|0…0⟩`, in `[0, n]`.
pub fn svd_cost(
    prep: &Preparation,
    params: &ParamVector,
    spec: &AnsatzSpec,
    mode: CostMode,
) -> Result<f64> {
    check_registers(prep.n_qubits(), spec)?;
    let state = transformed_state(&prep.prepared_state()?, params, spec)?;
    cost_of(&state, spec, mode)
}

/// Dense matrix of a register circuit, `m[row][col] = ⟨row|U|col⟩`.
fn circuit_matrix(circuit: &GateCircuit) -> Result<Vec<Vec<Complex64>>> {
    let dim = 1usize << circuit.n_qubits;
    let mut m = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for col in 0..dim {
        let mut s = StateVector::basis(circuit.n_qubits, col)?;
        s.apply(circuit)?;
        for (row, a) in s.amplitudes().iter().enumerate() {
            m[row][col] = *a;
        }
    }
    Ok(m)
}

/// `Σ_j w_j U†|j⟩⟨j|U` given `u[row][col] = ⟨row|U|col⟩`.
pub fn reconstruct_correlation(weights: &[f64], u: &[Vec<Complex64>]) -> Result<DensityMatrix> {
    let dim = u.len();
    if weights.len() != dim {
        return Err(Error::Shape(format!(
            "{} weights for a {dim}-dimensional register",
            weights.len()
        )));
    }
    let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
    for (w, row) in weights.iter().zip(u) {
        for a in 0..dim {
            for b in 0..dim {
                entries[a * dim + b] += *w * row[a].conj() * row[b];
            }
        }
    }
    DensityMatrix::from_entries(dim, entries)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VqsvdResult {
    pub params: ParamVector,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub loss_trace: Vec<f64>,
    /// Matched-pair weights, renormalized and sorted descending.
    pub schmidt_weights: Vec<f64>,
    /// Nats.
    pub entropy: f64,
    /// Distance between the reconstruction and the prepared state's reduced density matrix.
    pub frobenius_error: f64,
    /// Probability outside the matched pairs before renormalization.
    pub leaked_mass: f64,
    /// `Σ_j w_j U†|j⟩⟨j|U` on the stock register.
    #[serde(skip)]
    pub reconstructed: DensityMatrix,
}

impl VqsvdResult {
    /// Frobenius distance from the reconstruction to an arbitrary real target, e.g. the ideal C.
    pub fn frobenius_error_against(&self, target: &[Vec<f64>]) -> Result<f64> {
        let dim = self.reconstructed.dim();
        if target.len() != dim || target.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape(format!("target is not {dim}×{dim}")));
        }
        let entries = target
            .iter()
            .flatten()
            .map(|&x| Complex64::new(x, 0.0))
            .collect();
        self.reconstructed
            .frobenius_distance(&DensityMatrix::from_entries(dim, entries)?)
    }
}

/// Draws starting angles uniformly in `[−π, π)`.
pub fn initial_params(spec: &AnsatzSpec, seed: u64) -> ParamVector {
    let mut stream = rng::derived_stream(seed, &[0x1a17]);
    let flat: Vec<f64> = (0..2 * spec.param_count())
        .map(|_| stream.random_range(-PI..PI))
        .collect();
    ParamVector::from_flat(spec, &flat).expect("length matches spec")
}

/// Optimizes the cost with SPSA and extracts Schmidt weights and entropy.
///
/// Starting angles come from `spsa.seed`; in shot mode every cost evaluation
/// draws its samples from a stream derived from the mode seed and the
/// evaluation index. Extraction always uses the exact final state.
pub fn run_vqsvd(
    prep: &Preparation,
    spec: &AnsatzSpec,
    spsa: &SpsaConfig,
    mode: CostMode,
) -> Result<VqsvdResult> {
    run_vqsvd_from(prep, spec, spsa, mode, initial_params(spec, spsa.seed))
}

/// As [`run_vqsvd`] but from explicit starting parameters.
pub fn run_vqsvd_from(
    prep: &Preparation,
    spec: &AnsatzSpec,
    spsa: &SpsaConfig,
    mode: CostMode,
    start: ParamVector,
) -> Result<VqsvdResult> {
    check_registers(prep.n_qubits(), spec)?;
    let prepared = prep.prepared_state()?;
    let x0 = start.to_flat();
    if x0.len() != 2 * spec.param_count() {
        return Err(Error::Argument("starting parameters do not match ansatz".into()));
    }

    let mut evaluation = 0u64;
    let mut failure: Option<Error> = None;
    let objective = |x: &[f64]| -> f64 {
        let eval_mode = match mode {
            CostMode::Exact => CostMode::Exact,
            CostMode::Shots { count, seed } => CostMode::Shots {
                count,
                seed: rng::derive_seed(seed, &[evaluation]),
            },
        };
        evaluation += 1;
        let result = ParamVector::from_flat(spec, x)
            .and_then(|p| transformed_state(&prepared, &p, spec))
            .and_then(|s| cost_of(&s, spec, eval_mode));
        match result {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let outcome = spsa_minimize(objective, &x0, spsa);
    if let Some(e) = failure {
        return Err(e);
    }
    let outcome = outcome?;

    let params = ParamVector::from_flat(spec, &outcome.x_best)?;
    let extraction = extract(&prepared, &params, spec)?;
    Ok(VqsvdResult {
        params,
        initial_loss: outcome.initial_value,
        final_loss: outcome.best_value,
        loss_trace: outcome.trace,
        schmidt_weights: extraction.sorted_weights,
        entropy: extraction.entropy,
        frobenius_error: extraction.frobenius_error,
        leaked_mass: extraction.leaked_mass,
        reconstructed: extraction.reconstructed,
    })
}

struct Extraction {
    sorted_weights: Vec<f64>,
    entropy: f64,
    frobenius_error: f64,
    leaked_mass: f64,
    reconstructed: DensityMatrix,
}

fn extract(prepared: &StateVector, params: &ParamVector, spec: &AnsatzSpec) -> Result<Extraction> {
    let n = spec.n_qubits_per_register;
    let dim = 1usize << n;
    let psi = transformed_state(prepared, params, spec)?;
    let matched: Vec<f64> = (0..dim)
        .map(|j| psi.amplitudes()[j * dim + j].norm_sqr())
        .collect();
    let mass: f64 = matched.iter().sum();
    if mass < MIN_EXTRACTED_MASS {
        return Err(Error::Degenerate(format!(
            "only {mass:e} probability on matched register pairs"
        )));
    }
    let weights: Vec<f64> = matched.iter().map(|p| p / mass).collect();

    let u = circuit_matrix(&build_ansatz(spec, &params.theta_u)?)?;
    let reconstructed = reconstruct_correlation(&weights, &u)?;
    let target = partial_trace_second(prepared, n)?;
    let frobenius_error = reconstructed.frobenius_distance(&target)?;

    let mut sorted_weights = weights;
    sorted_weights.sort_by(|a, b| b.total_cmp(a));
    Ok(Extraction {
        entropy: entropy_from_weights(&sorted_weights),
        sorted_weights,
        frobenius_error,
        leaked_mass: (1.0 - mass).max(0.0),
        reconstructed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::{apply_circuit, schmidt_values};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn spec2() -> AnsatzSpec {
        AnsatzSpec::new(2, 1).unwrap()
    }

    #[test]
    fn zero_params_leave_zero_state() {
        let c = build_ansatz(&AnsatzSpec::new(2, 1).unwrap(), &[0.0; 4]).unwrap();
        let s = apply_circuit(&StateVector::zero(2).unwrap(), &c).unwrap();
        assert!((s.amplitudes()[0].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn structure_counts() {
        assert_eq!(AnsatzSpec::new(2, 1).unwrap().param_count(), 4);
        let spec = AnsatzSpec::new(2, 3).unwrap();
        assert_eq!(spec.param_count(), 12);
        let c = build_ansatz(&spec, &[0.1; 12]).unwrap();
        assert_eq!(c.cnot_count(), 3);
        assert_eq!(c.gate_count(), 15);
        assert!(build_ansatz(&spec, &[0.1; 11]).is_err());
        assert!(AnsatzSpec::new(2, 0).is_err());
    }

    #[test]
    fn layer_gate_order() {
        let c = build_ansatz(&AnsatzSpec::new(2, 1).unwrap(), &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let expected = vec![
            GateInstruction::rz(0, 1.0),
            GateInstruction::ry(0, 2.0),
            GateInstruction::rz(1, 3.0),
            GateInstruction::ry(1, 4.0),
            GateInstruction::cnot(0, 1),
        ];
        assert_eq!(c.instructions, expected);
    }

    #[test]
    fn cost_examples() {
        let spec = spec2();
        let zeros = ParamVector::zeros(&spec);
        // (|00⟩|00⟩ + |11⟩|11⟩)/√2
        let mut amps = vec![0.0; 16];
        amps[0] = FRAC_1_SQRT_2;
        amps[15] = FRAC_1_SQRT_2;
        let diag = Preparation::State(StateVector::from_real(&amps).unwrap());
        assert_eq!(svd_cost(&diag, &zeros, &spec, CostMode::Exact).unwrap(), 0.0);
        // |01⟩|10⟩: both qubit pairs anti-aligned under the identity transform
        let anti_state = StateVector::basis(4, 0b0110).unwrap();
        assert_eq!(hamming_cost(&anti_state, 2), 2.0);
        // zero angles still run the CNOT chain, which maps the time register |10⟩ → |11⟩
        let anti = Preparation::State(anti_state);
        assert_eq!(svd_cost(&anti, &zeros, &spec, CostMode::Exact).unwrap(), 1.0);
        assert!(matches!(
            svd_cost(&anti, &zeros, &AnsatzSpec::new(1, 1).unwrap(), CostMode::Exact),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn cost_matches_zz_definition() {
        use crate::simcore::expectation_zz;
        let amps: Vec<f64> = (0..16).map(|i| ((i * 5 + 3) as f64).sin()).collect();
        let norm = amps.iter().map(|x| x * x).sum::<f64>().sqrt();
        let s = StateVector::from_real(&amps.iter().map(|x| x / norm).collect::<Vec<_>>()).unwrap();
        let by_zz: f64 = (0..2)
            .map(|q| (1.0 - expectation_zz(&s, q, q + 2).unwrap()) / 2.0)
            .sum();
        assert!((hamming_cost(&s, 2) - by_zz).abs() < 1e-14);
    }

    #[test]
    fn diagonal_state_needs_no_optimization() {
        let mut amps = vec![0.0; 16];
        amps[0] = 0.8;
        amps[5] = 0.6; // |01⟩|01⟩
        let state = StateVector::from_real(&amps).unwrap();
        let spec = spec2();
        let r = run_vqsvd_from(
            &Preparation::State(state),
            &spec,
            &SpsaConfig::with_iterations(0, 0),
            CostMode::Exact,
            ParamVector::zeros(&spec),
        )
        .unwrap();
        let oracle = -(0.64f64 * 0.64f64.ln() + 0.36 * 0.36f64.ln());
        assert!((r.entropy - oracle).abs() < 1e-9);
        assert!(r.frobenius_error < 1e-9);
        assert!(r.leaked_mass < 1e-12);
        assert!(r.loss_trace.is_empty());
    }

    #[test]
    fn degenerate_extraction() {
        // all mass on |00⟩|11⟩: no matched pair populated
        let prep = Preparation::State(StateVector::basis(4, 0b0011).unwrap());
        let spec = spec2();
        let err = run_vqsvd_from(
            &prep,
            &spec,
            &SpsaConfig::with_iterations(0, 0),
            CostMode::Exact,
            ParamVector::zeros(&spec),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn relabeling_pairs_keeps_reconstruction() {
        let spec = spec2();
        let u = circuit_matrix(&build_ansatz(&spec, &[0.3, -1.1, 0.7, 2.0]).unwrap()).unwrap();
        let w = [0.5, 0.3, 0.15, 0.05];
        let base = reconstruct_correlation(&w, &u).unwrap();
        let perm = [2, 0, 3, 1];
        let u_p: Vec<_> = perm.iter().map(|&i| u[i].clone()).collect();
        let w_p: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
        let permuted = reconstruct_correlation(&w_p, &u_p).unwrap();
        assert!(base.frobenius_distance(&permuted).unwrap() < 1e-12);
    }

    #[test]
    fn optimized_run_is_consistent() {
        let amps: Vec<f64> = (0..16).map(|i| ((i * 7 + 1) as f64).cos()).collect();
        let norm = amps.iter().map(|x| x * x).sum::<f64>().sqrt();
        let state = StateVector::from_real(&amps.iter().map(|x| x / norm).collect::<Vec<_>>())
            .unwrap();
        let spec = AnsatzSpec::new(2, 3).unwrap();
        let prep = Preparation::State(state.clone());
        let r = run_vqsvd(&prep, &spec, &SpsaConfig::with_iterations(300, 4), CostMode::Exact)
            .unwrap();
        assert!(r.final_loss <= r.initial_loss);
        assert!((r.schmidt_weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(r.entropy >= 0.0 && r.entropy <= 2.0 * std::f64::consts::LN_2 + 1e-12);
        let psi = transformed_state(&state, &r.params, &spec).unwrap();
        assert!((hamming_cost(&psi, 2) - r.final_loss).abs() < 1e-12);
        let _ = schmidt_values(&psi, 2).unwrap();
    }
}
