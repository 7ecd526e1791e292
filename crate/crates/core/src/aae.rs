//! Approximate amplitude encoding: a fixed RY + CNOT ladder trained so that
//! its output matches a real target in both the computational basis and the
//! Hadamard-rotated basis, the latter carrying the amplitude signs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::simcore::{fidelity, sample_counts, GateCircuit, GateInstruction, StateVector};
use crate::vqsvd::{spsa_minimize, SpsaConfig};

pub const DEFAULT_SIGMA_GRID: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// SPSA step gain. The MMD is quartic in the angles near an optimum, so the
/// VQSVD default of 0.2 stalls short of fidelity 0.999.
pub const SPSA_A0: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AaeConfig {
    pub layers: usize,
    pub iterations: usize,
    pub kernel_sigma_grid: Vec<f64>,
    pub seed: u64,
    /// Estimate both distributions from this many samples per evaluation.
    pub shots: Option<u64>,
    /// Include the Hadamard-basis term; disabling it leaves the signs unconstrained.
    pub hadamard_term: bool,
}

impl Default for AaeConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            iterations: 2000,
            kernel_sigma_grid: DEFAULT_SIGMA_GRID.to_vec(),
            seed: 0,
            shots: None,
            hadamard_term: true,
        }
    }
}

impl AaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Argument("AAE needs at least one layer".into()));
        }
        if self.kernel_sigma_grid.is_empty()
            || self.kernel_sigma_grid.iter().any(|s| !(s.is_finite() && *s > 0.0))
        {
            return Err(Error::Argument(format!(
                "kernel widths must be positive: {:?}",
                self.kernel_sigma_grid
            )));
        }
        if self.shots == Some(0) {
            return Err(Error::Argument("shots must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AaeResult {
    pub circuit: GateCircuit,
    pub achieved_fidelity: f64,
    pub loss_trace: Vec<f64>,
    pub final_loss: f64,
}

/// `K[j][k] = mean_σ exp(−(j−k)²/(2σ²))` over basis indices.
fn kernel_matrix(dim: usize, sigmas: &[f64]) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|j| {
            (0..dim)
                .map(|k| {
                    let d2 = ((j as f64) - (k as f64)).powi(2);
                    sigmas.iter().map(|s| (-d2 / (2.0 * s * s)).exp()).sum::<f64>()
                        / sigmas.len() as f64
                })
                .collect()
        })
        .collect()
}

fn quadratic_form(diff: &[f64], kernel: &[Vec<f64>]) -> f64 {
    diff.iter()
        .zip(kernel)
        .map(|(dj, row)| dj * row.iter().zip(diff).map(|(k, dk)| k * dk).sum::<f64>())
        .sum()
}

fn check_distribution(v: &[f64], name: &str) -> Result<()> {
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::Argument(format!("{name} has negative or non-finite entries")));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!("{name} sums to {total}")));
    }
    Ok(())
}

/// Squared maximum mean discrepancy `Σ_jk (q_j − p_j)(q_k − p_k) K(j,k)`.
pub fn mmd_cost(q: &[f64], p: &[f64], sigma_grid: &[f64]) -> Result<f64> {
    if q.len() != p.len() {
        return Err(Error::Argument(format!(
            "distributions have lengths {} and {}",
            q.len(),
            p.len()
        )));
    }
    if sigma_grid.is_empty() || sigma_grid.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Argument("kernel widths must be positive".into()));
    }
    check_distribution(q, "q")?;
    check_distribution(p, "p")?;
    let diff: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
    Ok(quadratic_form(&diff, &kernel_matrix(q.len(), sigma_grid)))
}

/// Outcome probabilities after a Hadamard on every qubit.
pub fn hadamard_probabilities(state: &StateVector) -> Vec<f64> {
    let mut rotated = state.clone();
    for q in 0..state.n_qubits() {
        rotated.apply_instruction(&GateInstruction::h(q));
    }
    rotated.probabilities()
}

pub fn param_count(n_qubits: usize, layers: usize) -> usize {
    n_qubits * (layers + 1)
}

/// RY on every qubit, then `layers` repetitions of a CNOT ladder followed by RY on every qubit.
pub fn build_ansatz(n_qubits: usize, layers: usize, params: &[f64]) -> Result<GateCircuit> {
    let expected = param_count(n_qubits, layers);
    if params.len() != expected {
        return Err(Error::Argument(format!(
            "{} parameters for an ansatz taking {expected}",
            params.len()
        )));
    }
    let mut circuit = GateCircuit::new(n_qubits);
    let mut angles = params.iter();
    for layer in 0..=layers {
        if layer > 0 {
            for q in 0..n_qubits.saturating_sub(1) {
                circuit.push(GateInstruction::cnot(q, q + 1));
            }
        }
        for q in 0..n_qubits {
            circuit.push(GateInstruction::ry(q, *angles.next().expect("counted")));
        }
    }
    Ok(circuit)
}

fn empirical(state: &StateVector, shots: u64, seed: u64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; state.dim()];
    for (j, c) in sample_counts(state, shots, seed)? {
        out[j] = c as f64 / shots as f64;
    }
    Ok(out)
}

/// Trains the ansatz on `target` with SPSA from angles drawn uniformly in `[−π, π)`.
pub fn train_aae(target: &StateVector, config: &AaeConfig) -> Result<AaeResult> {
    config.validate()?;
    if !target.is_real(1e-12) {
        return Err(Error::Argument("AAE targets must have real amplitudes".into()));
    }
    let norm = target.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Argument(format!("target not normalized: {norm}")));
    }
    let n = target.n_qubits();
    let layers = config.layers;
    let kernel = kernel_matrix(target.dim(), &config.kernel_sigma_grid);
    let p_z = target.probabilities();
    let p_x = hadamard_probabilities(target);

    let mut init = rng::derived_stream(config.seed, &[0xaae0]);
    let x0: Vec<f64> = (0..param_count(n, layers))
        .map(|_| init.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    let spsa = SpsaConfig {
        a0: SPSA_A0,
        ..SpsaConfig::with_iterations(config.iterations, rng::derive_seed(config.seed, &[0xaae1]))
    };

    let mut evaluation = 0u64;
    let mut failure: Option<Error> = None;
    let mut cost = |x: &[f64]| -> Result<f64> {
        let mut state = StateVector::zero(n)?;
        state.apply(&build_ansatz(n, layers, x)?)?;
        let seed = rng::derive_seed(config.seed, &[0xaae2, evaluation]);
        evaluation += 1;
        let (q_z, q_x) = match config.shots {
            None => (state.probabilities(), hadamard_probabilities(&state)),
            Some(shots) => {
                let mut rotated = state.clone();
                for q in 0..n {
                    rotated.apply_instruction(&GateInstruction::h(q));
                }
                (
                    empirical(&state, shots, rng::derive_seed(seed, &[0]))?,
                    empirical(&rotated, shots, rng::derive_seed(seed, &[1]))?,
                )
            }
        };
        let diff = |q: &[f64], p: &[f64]| -> Vec<f64> { q.iter().zip(p).map(|(a, b)| a - b).collect() };
        let mut total = quadratic_form(&diff(&q_z, &p_z), &kernel);
        if config.hadamard_term {
            total += quadratic_form(&diff(&q_x, &p_x), &kernel);
        }
        Ok(total)
    };
    let outcome = spsa_minimize(
        |x| match cost(x) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        &x0,
        &spsa,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let outcome = outcome?;

    let circuit = build_ansatz(n, layers, &outcome.x_best)?;
    let mut prepared = StateVector::zero(n)?;
    prepared.apply(&circuit)?;
    Ok(AaeResult {
        achieved_fidelity: fidelity(&prepared, target)?,
        circuit,
        loss_trace: outcome.trace,
        final_loss: outcome.best_value,
    })
}

impl AaeResult {
    pub fn to_json(&self) -> Result<String> {
        self.circuit.to_tagged_json("aae")
    }
}
