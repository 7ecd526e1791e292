//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! each, and exits non-zero if any failed.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use num_complex::Complex64;
use rand::Rng;

use qsvd_entropy::aae::{train_aae, AaeConfig};
use qsvd_entropy::gasp::{synthesize, GaConfig};
use qsvd_entropy::harness::{
    enumerate_windows, run_plan, window_target, ExperimentPlan, Method, Window, DEFAULT_FIDELITIES,
};
use qsvd_entropy::linalg::eigen_symmetric;
use qsvd_entropy::marketdata::{
    build_return_panel, correlation_matrix, data_statevector, entropy_from_weights,
    svd_entropy_oracle, PriceSeries, PriceTable,
};
use qsvd_entropy::rng;
use qsvd_entropy::simcore::{schmidt_values, StateVector};
use qsvd_entropy::vqsvd::{svd_cost, AnsatzSpec, CostMode, ParamVector, Preparation, SpsaConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn bundled_windows() -> (PriceTable, Vec<Window>) {
    let table = PriceTable::bundled();
    let windows = enumerate_windows(&table, 5).expect("bundled prices give 8 windows");
    assert_eq!(windows.len(), 8);
    (table, windows)
}

fn within_budget(elapsed: Duration, budget: Duration) -> (bool, String) {
    (
        elapsed < budget,
        format!("{:.2}s of {:.0}s budget", elapsed.as_secs_f64(), budget.as_secs_f64()),
    )
}

fn trace_normalization() -> Outcome {
    let started = Instant::now();
    let (table, windows) = bundled_windows();
    let mut worst_trace: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    for w in &windows {
        let c = correlation_matrix(&build_return_panel(&table.series, &w.dates).unwrap());
        worst_trace = worst_trace.max((c.trace() - 1.0).abs());
        min_eig = min_eig.min(eigen_symmetric(&c.c).unwrap().values.into_iter().fold(f64::INFINITY, f64::min));
    }
    let (fast, timing) = within_budget(started.elapsed(), Duration::from_secs(1));
    outcome(
        worst_trace <= 1e-10 && min_eig >= -1e-9 && fast,
        format!("max |Tr C − 1| = {worst_trace:.1e}, min eigenvalue = {min_eig:.1e}, {timing}"),
    )
}

fn random_panel(stream: &mut rng::Stream) -> qsvd_entropy::marketdata::ReturnPanel {
    let dates: Vec<NaiveDate> = (1..=5).map(|m| NaiveDate::from_ymd_opt(2020, m, 1).unwrap()).collect();
    let series: Vec<PriceSeries> = (0..4)
        .map(|i| {
            let obs = dates.iter().map(|&d| (d, stream.random_range(5.0..150.0))).collect();
            PriceSeries::new(format!("R{i}"), obs).unwrap()
        })
        .collect();
    build_return_panel(&series, &dates).unwrap()
}

fn schmidt_equivalence() -> Outcome {
    let started = Instant::now();
    let (table, windows) = bundled_windows();
    let mut panels: Vec<_> = windows
        .iter()
        .map(|w| build_return_panel(&table.series, &w.dates).unwrap())
        .collect();
    let mut stream = rng::stream(2024);
    panels.extend((0..100).map(|_| random_panel(&mut stream)));
    let mut worst: f64 = 0.0;
    for p in &panels {
        let schmidt = schmidt_values(&data_statevector(p).unwrap(), 2).unwrap();
        let eig = eigen_symmetric(&correlation_matrix(p).c).unwrap().values;
        for (a, b) in schmidt.iter().zip(&eig) {
            worst = worst.max((a - b.max(0.0)).abs());
        }
    }
    let (fast, timing) = within_budget(started.elapsed(), Duration::from_secs(10));
    outcome(
        worst <= 1e-9 && fast,
        format!("{} panels, max elementwise gap {worst:.1e}, {timing}", panels.len()),
    )
}

fn oracle_sanity() -> Outcome {
    let dates: Vec<NaiveDate> = (1..=5).map(|m| NaiveDate::from_ymd_opt(2020, m, 1).unwrap()).collect();
    let prices = [10.0, 12.0, 9.0, 11.0, 13.0];
    let pair: Vec<PriceSeries> = [("A", 1.0), ("B", 3.5)]
        .iter()
        .map(|(s, k)| PriceSeries::new(*s, dates.iter().zip(prices).map(|(&d, p)| (d, p * k)).collect()).unwrap())
        .collect();
    let correlated = svd_entropy_oracle(&correlation_matrix(&build_return_panel(&pair, &dates).unwrap()))
        .unwrap()
        .entropy;
    let uniform = entropy_from_weights(&[0.25; 4]);
    outcome(
        correlated.abs() <= 1e-12 && (uniform - 4f64.ln()).abs() <= 1e-12,
        format!("correlated pair S = {correlated:.1e}, uniform S − ln 4 = {:.1e}", uniform - 4f64.ln()),
    )
}

fn gasp_convergence() -> Outcome {
    let started = Instant::now();
    let (table, windows) = bundled_windows();
    let mut lines = Vec::new();
    let mut pass = true;
    let mut gates = [0.0f64; 2];
    let mut runs = [0usize; 2];
    for w in &windows {
        let target = window_target(&table, w).unwrap().state;
        let mut successes = [0usize; 2];
        for (k, fidelity) in [0.90, 0.99].into_iter().enumerate() {
            for seed in 0..10 {
                let r = synthesize(&target, &GaConfig::with_target(fidelity, seed)).unwrap();
                assert!(r.generations_used <= 300);
                if r.converged && r.achieved_fidelity >= fidelity {
                    successes[k] += 1;
                }
                gates[k] += r.total_gate_count as f64;
                runs[k] += 1;
            }
        }
        pass &= successes[0] >= 9 && successes[1] >= 7;
        lines.push(format!("{} {}/10 {}/10", w.label, successes[0], successes[1]));
    }
    let (mean90, mean99) = (gates[0] / runs[0] as f64, gates[1] / runs[1] as f64);
    pass &= mean99 > mean90;
    outcome(
        pass,
        format!(
            "successes at 0.90/0.99: [{}]; mean gates {mean90:.1} → {mean99:.1}; {:.0}s",
            lines.join(", "),
            started.elapsed().as_secs_f64()
        ),
    )
}

fn exact_control(layers: usize) -> (bool, String) {
    let plan = ExperimentPlan {
        methods: vec![Method::Exact],
        seeds: (0..10).collect(),
        vqsvd_layers: layers,
        spsa: SpsaConfig::with_iterations(2000, 0),
        ..ExperimentPlan::default()
    };
    let (records, summary) = run_plan(&plan).unwrap();
    assert!(summary.skipped.is_empty());
    let mut pass = true;
    let mut counts = Vec::new();
    for w in 0..8 {
        let hits = records
            .iter()
            .filter(|r| r.window_index == w && (r.entropy_vqsvd - r.entropy_oracle).abs() <= 0.05)
            .count();
        pass &= hits >= 8;
        counts.push(format!("{}/10", hits));
    }
    (pass, format!("within 0.05 per window: [{}]", counts.join(" ")))
}

fn vqsvd_exact_control() -> Outcome {
    let started = Instant::now();
    let (pass, detail) = exact_control(1);
    let (_, deeper) = exact_control(3);
    outcome(
        pass,
        format!(
            "1 layer {detail}; for reference 3 layers {deeper}; {:.0}s",
            started.elapsed().as_secs_f64()
        ),
    )
}

struct Sweep {
    mse: Vec<f64>,
    frobenius: Vec<f64>,
}

fn fidelity_sweep() -> Sweep {
    let plan = ExperimentPlan {
        methods: vec![Method::Gasp],
        seeds: (0..5).collect(),
        ..ExperimentPlan::default()
    };
    let (_, summary) = run_plan(&plan).unwrap();
    assert!(summary.skipped.is_empty());
    let row = |f: f64| summary.row(Method::Gasp, Some(f)).expect("every fidelity ran");
    Sweep {
        mse: DEFAULT_FIDELITIES.iter().map(|&f| row(f).mse).collect(),
        frobenius: DEFAULT_FIDELITIES.iter().map(|&f| row(f).mean_frobenius_error).collect(),
    }
}

fn index_of(f: f64) -> usize {
    DEFAULT_FIDELITIES.iter().position(|&x| x == f).unwrap()
}

fn mse_trend(sweep: &Sweep) -> Outcome {
    let rises: Vec<String> = sweep
        .mse
        .windows(2)
        .zip(DEFAULT_FIDELITIES.windows(2))
        .filter(|(m, _)| m[1] > m[0] + 0.02)
        .map(|(m, f)| format!("{:.2}→{:.2} +{:.3}", f[0], f[1], m[1] - m[0]))
        .collect();
    let plateau = sweep.mse[index_of(0.99)] - sweep.mse[index_of(0.90)];
    let curve: Vec<String> = sweep.mse.iter().map(|m| format!("{m:.4}")).collect();
    outcome(
        rises.is_empty() && plateau >= -0.02,
        format!(
            "MSE over 0.70..0.99 = [{}]; rises beyond 0.02: [{}]; MSE(0.99) − MSE(0.90) = {plateau:.4}",
            curve.join(", "),
            rises.join(", ")
        ),
    )
}

fn frobenius_ordering(sweep: &Sweep) -> Outcome {
    let (at85, at99) = (sweep.frobenius[index_of(0.85)], sweep.frobenius[index_of(0.99)]);
    outcome(
        at99 <= at85,
        format!("mean Frobenius error 0.85: {at85:.4}, 0.99: {at99:.4}"),
    )
}

fn aae_sign() -> Outcome {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let target = StateVector::from_real(&[s, -s]).unwrap();
    let full: Vec<f64> = (0..10)
        .map(|seed| train_aae(&target, &AaeConfig { seed, ..AaeConfig::default() }).unwrap().achieved_fidelity)
        .collect();
    let ablated: Vec<f64> = (0..10)
        .map(|seed| {
            let config = AaeConfig {
                seed,
                hadamard_term: false,
                ..AaeConfig::default()
            };
            train_aae(&target, &config).unwrap().achieved_fidelity
        })
        .collect();
    let full_ok = full.iter().all(|&f| f >= 0.99);
    let unresolved = ablated.iter().filter(|&&f| f <= 0.6).count();
    let fmt = |v: &[f64]| v.iter().map(|f| format!("{f:.3}")).collect::<Vec<_>>().join(" ");
    outcome(
        full_ok && unresolved >= 5,
        format!(
            "with Hadamard term [{}]; ablated [{}] → {unresolved}/10 at ≤ 0.6",
            fmt(&full),
            fmt(&ablated)
        ),
    )
}

fn cli_runs_twice(args: &[&str], outputs: &[&Path]) -> Result<(), String> {
    let mut captured = Vec::new();
    for _ in 0..2 {
        let o = Command::new(env!("CARGO_BIN_EXE_qsvd-entropy"))
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("{args:?} exited with {:?}", o.status.code()));
        }
        let mut bytes = o.stdout;
        for p in outputs {
            bytes.extend(std::fs::read(p).map_err(|e| e.to_string())?);
        }
        captured.push(bytes);
    }
    if captured[0] == captured[1] {
        Ok(())
    } else {
        Err(format!("{args:?} differed between runs"))
    }
}

fn cli_determinism() -> Outcome {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let sweep_dir = dir.path().join("sweep");
    let sweep = sweep_dir.to_str().unwrap();
    let circuit = dir.path().join("c.json");
    let plot = dir.path().join("plot.json");
    let (records, summary) = (sweep_dir.join("records.csv"), sweep_dir.join("summary.json"));
    let cases: Vec<(Vec<&str>, Vec<&Path>)> = vec![
        (vec!["oracle"], vec![]),
        (vec!["oracle", "--format", "json"], vec![]),
        (
            vec!["sweep", "--method", "gasp,aae,exact", "--target-fidelity", "0.8,0.95",
                 "--window-index", "0,7", "--seeds", "3,4", "--iterations", "300", "--out", sweep],
            vec![&records, &summary],
        ),
        (vec!["report", "--records", sweep, "--format", "json", "--out", plot.to_str().unwrap()], vec![&plot]),
        (vec!["encode", "--method", "gasp", "--window-index", "3", "--out", circuit.to_str().unwrap()], vec![&circuit]),
        (vec!["encode", "--method", "aae", "--iterations", "500"], vec![]),
        (vec!["vqsvd", "--method", "gasp", "--target-fidelity", "0.95", "--seed", "9"], vec![]),
        (vec!["vqsvd", "--method", "exact", "--shots", "2000", "--iterations", "200", "--format", "csv"], vec![]),
    ];
    let failures: Vec<String> = cases
        .iter()
        .filter_map(|(args, outs)| cli_runs_twice(args, outs).err())
        .collect();
    outcome(
        failures.is_empty(),
        format!(
            "{} invocations, {} differing {:?}; {:.1}s",
            cases.len(),
            failures.len(),
            failures,
            started.elapsed().as_secs_f64()
        ),
    )
}

fn shot_consistency() -> Outcome {
    let started = Instant::now();
    let spec = AnsatzSpec::new(2, 1).unwrap();
    let mut stream = rng::stream(77);
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let raw: Vec<Complex64> = (0..16)
            .map(|_| Complex64::new(stream.random_range(-1.0..1.0), stream.random_range(-1.0..1.0)))
            .collect();
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let state = StateVector::from_amplitudes(raw.iter().map(|a| a / norm).collect()).unwrap();
        let flat: Vec<f64> = (0..2 * spec.param_count()).map(|_| stream.random_range(-3.2..3.2)).collect();
        let params = ParamVector::from_flat(&spec, &flat).unwrap();
        let prep = Preparation::State(state);
        let exact = svd_cost(&prep, &params, &spec, CostMode::Exact).unwrap();
        let shots = svd_cost(&prep, &params, &spec, CostMode::Shots { count: 100_000, seed: i }).unwrap();
        worst = worst.max((exact - shots).abs());
    }
    let (fast, timing) = within_budget(started.elapsed(), Duration::from_secs(60));
    outcome(
        worst <= 0.02 && fast,
        format!("50 states, max |shots − exact| = {worst:.4}, {timing}"),
    )
}

fn main() -> ExitCode {
    let mut failed = Vec::new();
    let mut report = |n: usize, name: &str, o: Outcome| {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {verdict} {name}: {}", o.detail);
        if !o.pass {
            failed.push(n);
        }
    };
    report(1, "trace normalization", trace_normalization());
    report(2, "Schmidt/eigenvalue equivalence", schmidt_equivalence());
    report(3, "oracle entropy sanity", oracle_sanity());
    report(4, "GASP convergence", gasp_convergence());
    report(5, "VQSVD exact-preparation control", vqsvd_exact_control());
    let sweep = fidelity_sweep();
    report(6, "MSE trend over target fidelity", mse_trend(&sweep));
    report(7, "Frobenius error ordering", frobenius_ordering(&sweep));
    report(8, "AAE sign discrimination", aae_sign());
    report(9, "CLI determinism", cli_determinism());
    report(10, "shot-mode consistency", shot_consistency());
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
