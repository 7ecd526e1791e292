//! Simultaneous perturbation stochastic approximation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Gain schedule and budget: `a_k = a0 / (k + 1 + A)^α`, `c_k = c0 / (k + 1)^γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsaConfig {
    pub a0: f64,
    pub c0: f64,
    pub decay_a: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        Self::with_iterations(2000, 0)
    }
}

impl SpsaConfig {
    /// Standard gains with the stability constant tied to the budget (`A = 0.1·iterations`).
    pub fn with_iterations(iterations: usize, seed: u64) -> Self {
        Self {
            a0: 0.2,
            c0: 0.15,
            decay_a: 0.1 * iterations as f64,
            alpha: 0.602,
            gamma: 0.101,
            iterations,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.a0 > 0.0
            && self.c0 > 0.0
            && self.decay_a >= 0.0
            && self.alpha > 0.0
            && self.gamma > 0.0
            && [self.a0, self.c0, self.decay_a, self.alpha, self.gamma]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid SPSA gains: {self:?}")))
        }
    }

    /// `(a_k, c_k)` for zero-based iteration `k`.
    pub fn gains(&self, k: usize) -> (f64, f64) {
        let k = k as f64;
        (
            self.a0 / (k + 1.0 + self.decay_a).powf(self.alpha),
            self.c0 / (k + 1.0).powf(self.gamma),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsaOutcome {
    /// Lowest-valued point among `x0` and every iterate.
    pub x_best: Vec<f64>,
    pub best_value: f64,
    pub initial_value: f64,
    /// Objective at each iterate after its update.
    pub trace: Vec<f64>,
}

fn checked(value: f64, iterate: usize) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Optimization {
            iterate,
            message: format!("objective returned {value}"),
        })
    }
}

/// Minimizes `objective` from `x0`.
///
/// Each iteration draws a Rademacher direction Δ, evaluates `f(x ± c_k Δ)`,
/// forms `g_i = (f₊ − f₋) / (2 c_k Δ_i)` and steps `x ← x − a_k g`. Three
/// objective calls per iteration (two probes and the new iterate).
pub fn spsa_minimize<F>(mut objective: F, x0: &[f64], config: &SpsaConfig) -> Result<SpsaOutcome>
where
    F: FnMut(&[f64]) -> f64,
{
    config.validate()?;
    let initial_value = checked(objective(x0), 0)?;
    let mut rng = rng::stream(config.seed);
    let mut x = x0.to_vec();
    let mut best = (x.clone(), initial_value);
    let mut trace = Vec::with_capacity(config.iterations);
    let mut plus = vec![0.0; x.len()];
    let mut minus = vec![0.0; x.len()];
    let mut delta = vec![0.0; x.len()];

    for k in 0..config.iterations {
        let (a_k, c_k) = config.gains(k);
        for d in delta.iter_mut() {
            *d = if rng.random::<bool>() { 1.0 } else { -1.0 };
        }
        for i in 0..x.len() {
            plus[i] = x[i] + c_k * delta[i];
            minus[i] = x[i] - c_k * delta[i];
        }
        let f_plus = checked(objective(&plus), k + 1)?;
        let f_minus = checked(objective(&minus), k + 1)?;
        let diff = (f_plus - f_minus) / (2.0 * c_k);
        for (xi, di) in x.iter_mut().zip(&delta) {
            *xi -= a_k * diff / di;
        }
        let value = checked(objective(&x), k + 1)?;
        trace.push(value);
        if value < best.1 {
            best = (x.clone(), value);
        }
    }

    Ok(SpsaOutcome {
        x_best: best.0,
        best_value: best.1,
        initial_value,
        trace,
    })
}
