//! Genetic-algorithm state preparation.
//!
//! A genome is a variable-length list of RY / RZ / CNOT genes read as a
//! circuit acting on `|0…0⟩`. Fitness is the raw fidelity with the target.
//! Each generation keeps its elites unchanged and fills the remaining slots by
//! tournament selection, single-point crossover with independent cut points
//! and mutation. Every `refine_every` generations the best genome gets an
//! SPSA pass over its angles.
//!
//! Each child slot draws from its own stream derived from
//! `(seed, generation, slot)`, so breeding and scoring can fan out over a
//! worker pool without changing the result.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::simcore::{fidelity, GateCircuit, GateInstruction, StateVector};
use crate::vqsvd::{spsa_minimize, SpsaConfig};

const TWO_PI: f64 = 2.0 * PI;
/// Stream tag for angle refinement, disjoint from child-slot indices.
const REFINE_TAG: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum Gene {
    Ry { target: usize, angle: f64 },
    Rz { target: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

impl Gene {
    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gene::Ry { angle, .. } | Gene::Rz { angle, .. } => Some(angle),
            Gene::Cnot { .. } => None,
        }
    }

    fn with_angle(self, new: f64) -> Gene {
        match self {
            Gene::Ry { target, .. } => Gene::Ry { target, angle: new },
            Gene::Rz { target, .. } => Gene::Rz { target, angle: new },
            g @ Gene::Cnot { .. } => g,
        }
    }

    fn to_instruction(self) -> GateInstruction {
        match self {
            Gene::Ry { target, angle } => GateInstruction::ry(target, angle),
            Gene::Rz { target, angle } => GateInstruction::rz(target, angle),
            Gene::Cnot { control, target } => GateInstruction::cnot(control, target),
        }
    }

    fn is_valid(&self, n_qubits: usize) -> bool {
        match *self {
            Gene::Ry { target, angle } | Gene::Rz { target, angle } => {
                target < n_qubits && angle.is_finite()
            }
            Gene::Cnot { control, target } => {
                control < n_qubits && target < n_qubits && control != target
            }
        }
    }

    /// A uniformly random gene; CNOT only when there are two or more qubits.
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Gene {
        let angle = wrap_angle(rng.random_range(-TWO_PI..TWO_PI));
        let target = rng.random_range(0..n_qubits);
        // weights RY : RZ : CNOT = 9 : 2 : 9
        let roll = rng.random_range(0..20u32);
        if n_qubits >= 2 && roll >= 11 {
            let control = rng.random_range(0..n_qubits - 1);
            let control = if control >= target { control + 1 } else { control };
            Gene::Cnot { control, target }
        } else if roll < 9 || (n_qubits < 2 && roll >= 11) {
            Gene::Ry { target, angle }
        } else {
            Gene::Rz { target, angle }
        }
    }
}

/// Maps an angle into `(−2π, 2π]`, one full period of the rotation gates.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * TWO_PI);
    if r > TWO_PI {
        r - 2.0 * TWO_PI
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub n_qubits: usize,
    pub genes: Vec<Gene>,
}

impl Genome {
    pub fn new(n_qubits: usize, genes: Vec<Gene>) -> Result<Self> {
        if let Some(pos) = genes.iter().position(|g| !g.is_valid(n_qubits)) {
            return Err(Error::Structural(format!(
                "gene {pos} ({:?}) invalid for {n_qubits} qubits",
                genes[pos]
            )));
        }
        Ok(Self { n_qubits, genes })
    }

    pub fn random<R: Rng + ?Sized>(n_qubits: usize, len: usize, rng: &mut R) -> Self {
        Self {
            n_qubits,
            genes: (0..len).map(|_| Gene::random(n_qubits, rng)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn to_circuit(&self) -> GateCircuit {
        GateCircuit {
            n_qubits: self.n_qubits,
            instructions: self.genes.iter().map(|g| g.to_instruction()).collect(),
        }
    }

    pub fn angles(&self) -> Vec<f64> {
        self.genes.iter().filter_map(Gene::angle).collect()
    }

    /// Replaces rotation angles in order; gate structure is untouched.
    pub fn with_angles(&self, angles: &[f64]) -> Genome {
        let mut it = angles.iter();
        let genes = self
            .genes
            .iter()
            .map(|g| match g.angle() {
                Some(_) => g.with_angle(*it.next().expect("one angle per rotation")),
                None => *g,
            })
            .collect();
        Genome {
            n_qubits: self.n_qubits,
            genes,
        }
    }
}

/// Per-operator mutation probabilities. Jitter and substitution apply per gene,
/// insertion and deletion once per genome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationRates {
    pub angle_jitter: f64,
    pub substitute: f64,
    pub insert: f64,
    pub delete: f64,
}

impl MutationRates {
    pub fn none() -> Self {
        Self {
            angle_jitter: 0.0,
            substitute: 0.0,
            insert: 0.0,
            delete: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub target_fidelity: f64,
    pub tournament_size: usize,
    pub elitism_count: usize,
    pub mutation_rates: MutationRates,
    pub angle_jitter_sigma: f64,
    pub max_genes: usize,
    /// Upper bound on genome length in the initial population.
    pub initial_max_genes: usize,
    pub crossover_rate: f64,
    /// Exact coordinate sweeps over every angle applied to each new child.
    pub angle_sweeps: usize,
    /// Refine the best genome's angles every this many generations (0 disables).
    pub refine_every: usize,
    /// How many of the top genomes are refined at each refinement step.
    pub refine_count: usize,
    pub refine_iterations: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 200,
            max_generations: 300,
            target_fidelity: 0.9,
            tournament_size: 3,
            elitism_count: 2,
            mutation_rates: MutationRates {
                angle_jitter: 0.3,
                substitute: 0.05,
                insert: 0.05,
                delete: 0.05,
            },
            angle_jitter_sigma: 0.1,
            max_genes: 40,
            initial_max_genes: 8,
            crossover_rate: 0.7,
            angle_sweeps: 2,
            refine_every: 10,
            refine_count: 1,
            refine_iterations: 100,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn with_target(target_fidelity: f64, seed: u64) -> Self {
        Self {
            target_fidelity,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = &self.mutation_rates;
        let probs = [
            rates.angle_jitter,
            rates.substitute,
            rates.insert,
            rates.delete,
            self.crossover_rate,
        ];
        let problem = if !(self.target_fidelity > 0.0 && self.target_fidelity <= 1.0) {
            Some(format!("target fidelity {} not in (0, 1]", self.target_fidelity))
        } else if self.tournament_size < 2 || self.population_size < self.tournament_size {
            Some(format!(
                "need population ({}) ≥ tournament ({}) ≥ 2",
                self.population_size, self.tournament_size
            ))
        } else if self.elitism_count >= self.population_size {
            Some(format!(
                "elitism {} must be below population {}",
                self.elitism_count, self.population_size
            ))
        } else if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            Some("probabilities must lie in [0, 1]".into())
        } else if !(self.angle_jitter_sigma >= 0.0 && self.angle_jitter_sigma.is_finite()) {
            Some(format!("invalid jitter sigma {}", self.angle_jitter_sigma))
        } else if self.max_genes == 0 || self.initial_max_genes == 0 {
            Some("genome length bounds must be ≥ 1".into())
        } else {
            None
        };
        match problem {
            Some(msg) => Err(Error::Argument(msg)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub circuit: GateCircuit,
    pub achieved_fidelity: f64,
    /// False when the generation budget ran out below the target.
    pub converged: bool,
    pub generations_used: usize,
    pub cnot_count: usize,
    pub total_gate_count: usize,
    /// Best fidelity after each generation, starting with generation 0.
    pub fitness_history: Vec<f64>,
    /// Objective evaluations spent, a machine-independent cost measure.
    pub fitness_evaluations: u64,
}

fn check_target(target: &StateVector) -> Result<()> {
    let norm = target.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Argument(format!("target not normalized: {norm}")));
    }
    if !target.is_real(1e-12) {
        return Err(Error::Argument("target amplitudes must be real".into()));
    }
    Ok(())
}

/// Fidelity of `genome · |0…0⟩` with `target`.
pub fn fitness(genome: &Genome, target: &StateVector) -> Result<f64> {
    if genome.n_qubits != target.n_qubits() {
        return Err(Error::Structural(format!(
            "genome has {} qubits, target {}",
            genome.n_qubits,
            target.n_qubits()
        )));
    }
    if let Some(pos) = genome.genes.iter().position(|g| !g.is_valid(genome.n_qubits)) {
        return Err(Error::Structural(format!("gene {pos} invalid")));
    }
    let mut state = StateVector::zero(genome.n_qubits)?;
    for gene in &genome.genes {
        state.apply_instruction(&gene.to_instruction());
    }
    fidelity(&state, target)
}

/// Applies every mutation operator with its configured probability.
pub fn mutate<R: Rng + ?Sized>(genome: &Genome, config: &GaConfig, rng: &mut R) -> Genome {
    let rates = &config.mutation_rates;
    let n = genome.n_qubits;
    let jitter = Normal::new(0.0, config.angle_jitter_sigma).expect("validated sigma");
    let mut genes: Vec<Gene> = genome
        .genes
        .iter()
        .map(|&g| {
            let g = match g.angle() {
                Some(a) if rng.random_bool(rates.angle_jitter) => {
                    g.with_angle(wrap_angle(a + jitter.sample(rng)))
                }
                _ => g,
            };
            if rng.random_bool(rates.substitute) {
                Gene::random(n, rng)
            } else {
                g
            }
        })
        .collect();
    if genes.len() < config.max_genes && rng.random_bool(rates.insert) {
        // inserted rotations start near the identity so growth is close to neutral
        let at = rng.random_range(0..=genes.len());
        let gene = Gene::random(n, rng);
        let gene = match gene.angle() {
            Some(_) => gene.with_angle(wrap_angle(jitter.sample(rng))),
            None => gene,
        };
        genes.insert(at, gene);
    }
    if genes.len() > 1 && rng.random_bool(rates.delete) {
        let at = rng.random_range(0..genes.len());
        genes.remove(at);
    }
    Genome { n_qubits: n, genes }
}

/// Single-point crossover at explicit cut points:
/// `(a[..cut_a] ++ b[cut_b..], b[..cut_b] ++ a[cut_a..])`, truncated to `max_genes`.
pub fn crossover_at(
    parent_a: &Genome,
    parent_b: &Genome,
    cut_a: usize,
    cut_b: usize,
    max_genes: usize,
) -> Result<(Genome, Genome)> {
    if parent_a.n_qubits != parent_b.n_qubits {
        return Err(Error::Structural(format!(
            "parents act on {} and {} qubits",
            parent_a.n_qubits, parent_b.n_qubits
        )));
    }
    if cut_a > parent_a.len() || cut_b > parent_b.len() {
        return Err(Error::Argument("cut point beyond genome end".into()));
    }
    let join = |head: &[Gene], tail: &[Gene]| {
        let mut genes: Vec<Gene> = head.iter().chain(tail).copied().collect();
        genes.truncate(max_genes.max(1));
        Genome {
            n_qubits: parent_a.n_qubits,
            genes,
        }
    };
    Ok((
        join(&parent_a.genes[..cut_a], &parent_b.genes[cut_b..]),
        join(&parent_b.genes[..cut_b], &parent_a.genes[cut_a..]),
    ))
}

/// Single-point crossover with independently drawn cut points.
///
/// Cuts that would leave a child empty are redrawn. Identical parents yield
/// two clones.
pub fn crossover<R: Rng + ?Sized>(
    parent_a: &Genome,
    parent_b: &Genome,
    max_genes: usize,
    rng: &mut R,
) -> Result<(Genome, Genome)> {
    if parent_a.n_qubits != parent_b.n_qubits {
        return Err(Error::Structural(format!(
            "parents act on {} and {} qubits",
            parent_a.n_qubits, parent_b.n_qubits
        )));
    }
    if parent_a == parent_b || parent_a.is_empty() || parent_b.is_empty() {
        return Ok((parent_a.clone(), parent_b.clone()));
    }
    let (la, lb) = (parent_a.len(), parent_b.len());
    loop {
        let cut_a = rng.random_range(0..=la);
        let cut_b = rng.random_range(0..=lb);
        let first_empty = cut_a == 0 && cut_b == lb;
        let second_empty = cut_b == 0 && cut_a == la;
        if !first_empty && !second_empty {
            return crossover_at(parent_a, parent_b, cut_a, cut_b, max_genes);
        }
    }
}

/// Maximizes fitness one angle at a time, in gene order, `sweeps` times.
///
/// With every other gate fixed, the overlap is `α cos(θ/2) + β sin(θ/2)` where
/// `α = ⟨φ|ψ⟩` and `β = ⟨φ|R(π)|ψ⟩` (`ψ` the state before the gate, `φ` the
/// target pulled back through the later gates). The fidelity is then a
/// quadratic form in `(cos θ/2, sin θ/2)` and its maximizer is closed-form,
/// so each sweep costs about two circuit simulations. Never lowers fitness.
pub fn sweep_angles(genome: &Genome, target: &StateVector, sweeps: usize) -> Result<Genome> {
    let start = fitness(genome, target)?;
    if sweeps == 0 || genome.genes.iter().all(|g| g.angle().is_none()) {
        return Ok(genome.clone());
    }
    let n = genome.n_qubits;
    let mut genes = genome.genes.clone();
    for _ in 0..sweeps {
        // pulled-back targets: pulled[k] = (gates k+1..)† |t⟩
        let mut pulled = vec![target.clone(); genes.len()];
        let mut phi = target.clone();
        for k in (0..genes.len()).rev() {
            pulled[k] = phi.clone();
            phi.apply_instruction(&inverse(genes[k]).to_instruction());
        }
        let mut psi = StateVector::zero(n)?;
        for k in 0..genes.len() {
            if genes[k].angle().is_some() {
                let alpha = pulled[k].inner(&psi)?;
                let mut flipped = psi.clone();
                flipped.apply_instruction(&genes[k].with_angle(PI).to_instruction());
                let beta = pulled[k].inner(&flipped)?;
                let a = alpha.norm_sqr();
                let d = beta.norm_sqr();
                let b = (alpha.conj() * beta).re;
                genes[k] = genes[k].with_angle(wrap_angle((2.0 * b).atan2(a - d)));
            }
            psi.apply_instruction(&genes[k].to_instruction());
        }
    }
    let candidate = Genome { n_qubits: n, genes };
    if fitness(&candidate, target)? > start {
        Ok(candidate)
    } else {
        Ok(genome.clone())
    }
}

fn inverse(gene: Gene) -> Gene {
    match gene.angle() {
        Some(a) => gene.with_angle(-a),
        None => gene,
    }
}

/// SPSA gains used for angle refinement; fidelity landscapes have O(1)
/// curvature so the step is larger than the VQSVD default.
pub fn refine_spsa_config(iterations: usize, seed: u64) -> SpsaConfig {
    SpsaConfig {
        a0: 0.6,
        c0: 0.1,
        ..SpsaConfig::with_iterations(iterations, seed)
    }
}

/// Tunes the rotation angles by SPSA to maximize fitness, never returning a
/// worse genome than the input.
pub fn refine_angles<R: Rng + ?Sized>(
    genome: &Genome,
    target: &StateVector,
    iterations: usize,
    rng: &mut R,
) -> Result<Genome> {
    let start_fitness = fitness(genome, target)?;
    let angles = genome.angles();
    if angles.is_empty() || iterations == 0 {
        return Ok(genome.clone());
    }
    let config = refine_spsa_config(iterations, rng.random());
    let objective = |x: &[f64]| {
        fitness(&genome.with_angles(x), target).map_or(f64::NAN, |f| 1.0 - f)
    };
    let outcome = spsa_minimize(objective, &angles, &config)?;
    let wrapped: Vec<f64> = outcome.x_best.iter().map(|&a| wrap_angle(a)).collect();
    let candidate = genome.with_angles(&wrapped);
    if fitness(&candidate, target)? > start_fitness {
        Ok(candidate)
    } else {
        Ok(genome.clone())
    }
}

fn tournament<'a, R: Rng + ?Sized>(
    population: &'a [Genome],
    scores: &[f64],
    size: usize,
    rng: &mut R,
) -> &'a Genome {
    let mut best = rng.random_range(0..population.len());
    for _ in 1..size {
        let pick = rng.random_range(0..population.len());
        if scores[pick] > scores[best] || (scores[pick] == scores[best] && pick < best) {
            best = pick;
        }
    }
    &population[best]
}

fn best_index(scores: &[f64]) -> usize {
    scores
        .iter()
        .enumerate()
        .fold(0, |best, (i, &s)| if s > scores[best] { i } else { best })
}

fn score_all(population: &[Genome], target: &StateVector) -> Result<Vec<f64>> {
    population.par_iter().map(|g| fitness(g, target)).collect()
}

/// Evolves a circuit preparing `target` from `|0…0⟩` to `config.target_fidelity`.
pub fn synthesize(target: &StateVector, config: &GaConfig) -> Result<SynthesisResult> {
    check_target(target)?;
    config.validate()?;
    let n = target.n_qubits();

    let empty = Genome {
        n_qubits: n,
        genes: Vec::new(),
    };
    let empty_fitness = fitness(&empty, target)?;
    if empty_fitness >= config.target_fidelity {
        return Ok(finish(&empty, empty_fitness, true, 0, vec![empty_fitness], 1));
    }

    let init_cap = config.initial_max_genes.min(config.max_genes);
    let mut population: Vec<Genome> = (0..config.population_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::derived_stream(config.seed, &[0, i as u64]);
            let len = rng.random_range(1..=init_cap);
            sweep_angles(&Genome::random(n, len, &mut rng), target, config.angle_sweeps)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut evaluations = 1u64;
    let mut history = Vec::new();

    let mut generation = 0;
    loop {
        let mut scores = score_all(&population, target)?;
        evaluations += population.len() as u64;

        let refine_now = config.refine_every > 0
            && config.refine_iterations > 0
            && generation > 0
            && generation % config.refine_every == 0;
        if refine_now {
            let mut order: Vec<usize> = (0..population.len()).collect();
            order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
            order.truncate(config.refine_count.min(population.len()));
            let refined = order
                .par_iter()
                .map(|&i| {
                    let mut rng = rng::derived_stream(
                        config.seed,
                        &[generation as u64, REFINE_TAG, i as u64],
                    );
                    let g = refine_angles(&population[i], target, config.refine_iterations, &mut rng)?;
                    let f = fitness(&g, target)?;
                    Ok((i, g, f))
                })
                .collect::<Result<Vec<_>>>()?;
            for (i, g, f) in refined {
                population[i] = g;
                scores[i] = f;
            }
            evaluations += order.len() as u64 * (3 * config.refine_iterations as u64 + 3);
        }

        let b = best_index(&scores);
        history.push(scores[b]);
        let reached = scores[b] >= config.target_fidelity;
        if reached || generation >= config.max_generations {
            return Ok(finish(&population[b], scores[b], reached, generation, history, evaluations));
        }

        generation += 1;
        population = next_generation(target, &population, &scores, config, generation)?;
    }
}

fn next_generation(
    target: &StateVector,
    population: &[Genome],
    scores: &[f64],
    config: &GaConfig,
    generation: usize,
) -> Result<Vec<Genome>> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    let elites = order[..config.elitism_count]
        .iter()
        .map(|&i| Ok(population[i].clone()));
    let children = (config.elitism_count..config.population_size)
        .into_par_iter()
        .map(|slot| {
            let mut rng: Stream = rng::derived_stream(config.seed, &[generation as u64, slot as u64]);
            let a = tournament(population, scores, config.tournament_size, &mut rng);
            let b = tournament(population, scores, config.tournament_size, &mut rng);
            let child = if rng.random_bool(config.crossover_rate) {
                crossover(a, b, config.max_genes, &mut rng)?.0
            } else {
                a.clone()
            };
            let child = mutate(&child, config, &mut rng);
            sweep_angles(&child, target, config.angle_sweeps)
        })
        .collect::<Vec<Result<Genome>>>();
    elites.chain(children).collect()
}

fn finish(
    genome: &Genome,
    achieved: f64,
    converged: bool,
    generations_used: usize,
    fitness_history: Vec<f64>,
    fitness_evaluations: u64,
) -> SynthesisResult {
    let circuit = genome.to_circuit();
    SynthesisResult {
        cnot_count: circuit.cnot_count(),
        total_gate_count: circuit.gate_count(),
        circuit,
        achieved_fidelity: achieved,
        converged,
        generations_used,
        fitness_history,
        fitness_evaluations,
    }
}
