//! Sliding-window experiments: every window × method × fidelity × seed cell
//! runs preparation then VQSVD, and the records are aggregated into
//! per-fidelity error summaries and plot tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aae::{train_aae, AaeConfig};
use crate::error::{Error, Result};
use crate::gasp::{synthesize, GaConfig};
use crate::marketdata::{
    build_return_panel, correlation_matrix, data_statevector, svd_entropy_oracle, PriceTable,
};
use crate::rng::derive_seed;
use crate::simcore::{fidelity, GateCircuit, StateVector};
use crate::vqsvd::{run_vqsvd, AnsatzSpec, CostMode, Preparation, SpsaConfig, VqsvdResult};

pub const DEFAULT_FIDELITIES: [f64; 7] = [0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gasp,
    Aae,
    Exact,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gasp => "gasp",
            Method::Aae => "aae",
            Method::Exact => "exact",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Method::Gasp => 1,
            Method::Aae => 2,
            Method::Exact => 3,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gasp" => Ok(Method::Gasp),
            "aae" => Ok(Method::Aae),
            "exact" => Ok(Method::Exact),
            other => Err(Error::Argument(format!(
                "unknown method `{other}` (expected gasp, aae or exact)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    /// Price CSV; the bundled 2008-09 prices when absent.
    pub input_path: Option<PathBuf>,
    /// Price months per window, giving one fewer return period.
    pub window_length_months: usize,
    /// Restrict to these window indices (all windows when absent).
    pub windows: Option<Vec<usize>>,
    pub methods: Vec<Method>,
    pub gasp_target_fidelities: Vec<f64>,
    /// Replicate seeds; each cell's streams derive from the seed and the cell position.
    pub seeds: Vec<u64>,
    pub vqsvd_layers: usize,
    /// Gains and budget; the seed is replaced per cell.
    pub spsa: SpsaConfig,
    /// Target fidelity and seed are replaced per cell.
    pub gasp: GaConfig,
    /// Seed is replaced per cell.
    pub aae: AaeConfig,
    /// Sample the VQSVD cost with this many shots instead of exactly.
    pub shots: Option<u64>,
    /// Record wall-clock time; off by default so outputs are byte-reproducible.
    pub timing: bool,
    pub output_path: Option<PathBuf>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            input_path: None,
            window_length_months: 5,
            windows: None,
            methods: vec![Method::Gasp, Method::Aae, Method::Exact],
            gasp_target_fidelities: DEFAULT_FIDELITIES.to_vec(),
            seeds: vec![0],
            vqsvd_layers: 1,
            spsa: SpsaConfig::default(),
            gasp: GaConfig::default(),
            aae: AaeConfig::default(),
            shots: None,
            timing: false,
            output_path: None,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.window_length_months < 2 {
            return Err(Error::Argument(format!(
                "window length {} is below 2 months",
                self.window_length_months
            )));
        }
        if let Some(f) = self
            .gasp_target_fidelities
            .iter()
            .find(|f| !(**f > 0.0 && **f <= 1.0))
        {
            return Err(Error::Argument(format!("target fidelity {f} not in (0, 1]")));
        }
        if self.vqsvd_layers == 0 {
            return Err(Error::Argument("VQSVD needs at least one layer".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::Argument("shots must be positive".into()));
        }
        self.spsa.validate()?;
        self.gasp.validate()?;
        self.aae.validate()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(s)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load_prices(&self) -> Result<PriceTable> {
        match &self.input_path {
            Some(p) => PriceTable::from_csv_path(p),
            None => Ok(PriceTable::bundled()),
        }
    }

    /// `(method, fidelity index, fidelity)` in plan order; only GASP fans out over fidelities.
    fn method_cells(&self) -> Vec<(Method, usize, Option<f64>)> {
        let mut out = Vec::new();
        for &m in &self.methods {
            if m == Method::Gasp {
                for (i, &f) in self.gasp_target_fidelities.iter().enumerate() {
                    out.push((m, i, Some(f)));
                }
            } else {
                out.push((m, 0, None));
            }
        }
        out
    }
}

/// A run of consecutive months, labelled by its last month (e.g. "Aug 08").
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub index: usize,
    pub label: String,
    pub dates: Vec<NaiveDate>,
}

fn month_number(d: NaiveDate) -> i64 {
    use chrono::Datelike;
    d.year() as i64 * 12 + d.month0() as i64
}

/// Every run of `window_length` consecutive months, ordered by end month.
pub fn enumerate_windows(prices: &PriceTable, window_length: usize) -> Result<Vec<Window>> {
    if window_length < 2 {
        return Err(Error::Argument(format!("window length {window_length} is below 2")));
    }
    let dates = prices.dates();
    if let Some(pair) = dates
        .windows(2)
        .find(|p| month_number(p[1]) - month_number(p[0]) != 1)
    {
        return Err(Error::Data(format!(
            "prices are not monthly and gap-free: {} is followed by {}",
            pair[0], pair[1]
        )));
    }
    if dates.len() < window_length {
        return Err(Error::Argument(format!(
            "{} months of prices cannot fill a {window_length}-month window",
            dates.len()
        )));
    }
    Ok(dates
        .windows(window_length)
        .enumerate()
        .map(|(index, w)| Window {
            index,
            label: w[window_length - 1].format("%b %y").to_string(),
            dates: w.to_vec(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub window_index: usize,
    pub window_label: String,
    pub method: Method,
    pub target_fidelity: Option<f64>,
    pub seed: u64,
    pub achieved_fidelity: f64,
    /// GASP only: whether the target fidelity was reached.
    pub converged: Option<bool>,
    pub entropy_vqsvd: f64,
    pub entropy_oracle: f64,
    /// Reconstruction against the ideal correlation matrix.
    pub frobenius_error: f64,
    /// Reconstruction against the prepared state's reduced density matrix.
    pub frobenius_error_prepared: f64,
    pub leaked_mass: f64,
    pub vqsvd_final_loss: f64,
    pub cnot_count: usize,
    pub gate_count: usize,
    /// Seconds; zero unless timing was requested.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub window_index: usize,
    pub window_label: String,
    pub method: Method,
    pub target_fidelity: Option<f64>,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub target_fidelity: Option<f64>,
    pub count: usize,
    /// Mean of `(entropy_vqsvd − entropy_oracle)²` over windows and seeds.
    pub mse: f64,
    pub mean_frobenius_error: f64,
    pub mean_achieved_fidelity: f64,
    pub mean_gate_count: f64,
    pub mean_cnot_count: f64,
    pub mean_wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub plan: ExperimentPlan,
    pub rows: Vec<SummaryRow>,
    pub skipped: Vec<SkippedCell>,
}

impl SweepSummary {
    pub fn row(&self, method: Method, target_fidelity: Option<f64>) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.target_fidelity == target_fidelity)
    }
}

type CellKey = (Method, Option<f64>);

/// Groups records by `(method, fidelity)` in order of first appearance.
pub fn summarize(records: &[WindowRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<(CellKey, Vec<&WindowRecord>)> = Vec::new();
    for r in records {
        let key = (r.method, r.target_fidelity);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((method, target_fidelity), members)| {
            let n = members.len() as f64;
            let mean = |f: &dyn Fn(&WindowRecord) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / n;
            SummaryRow {
                method,
                target_fidelity,
                count: members.len(),
                mse: mean(&|r| (r.entropy_vqsvd - r.entropy_oracle).powi(2)),
                mean_frobenius_error: mean(&|r| r.frobenius_error),
                mean_achieved_fidelity: mean(&|r| r.achieved_fidelity),
                mean_gate_count: mean(&|r| r.gate_count as f64),
                mean_cnot_count: mean(&|r| r.cnot_count as f64),
                mean_wall_time: mean(&|r| r.wall_time),
            }
        })
        .collect()
}

/// Everything a window contributes independently of the method.
pub struct WindowTarget {
    pub state: StateVector,
    pub correlation: Vec<Vec<f64>>,
    pub entropy_oracle: f64,
    pub n_per_register: usize,
}

pub fn window_target(prices: &PriceTable, window: &Window) -> Result<WindowTarget> {
    let panel = build_return_panel(&prices.series, &window.dates)?;
    let c = correlation_matrix(&panel);
    let oracle = svd_entropy_oracle(&c)?;
    let state = data_statevector(&panel)?;
    let (n_stocks, n_periods) = (panel.n_stocks(), panel.n_periods());
    if n_stocks != n_periods {
        return Err(Error::Shape(format!(
            "VQSVD needs equal registers but the panel is {n_stocks} stocks × {n_periods} periods"
        )));
    }
    Ok(WindowTarget {
        state,
        correlation: c.c,
        entropy_oracle: oracle.entropy,
        n_per_register: n_stocks.trailing_zeros() as usize,
    })
}

/// A synthesized or direct preparation of the window state.
pub struct Prepared {
    pub preparation: Preparation,
    pub achieved_fidelity: f64,
    pub converged: Option<bool>,
}

impl Prepared {
    pub fn circuit(&self) -> Option<&GateCircuit> {
        match &self.preparation {
            Preparation::Circuit(c) => Some(c),
            Preparation::State(_) => None,
        }
    }
}

pub fn prepare(
    target: &StateVector,
    method: Method,
    target_fidelity: Option<f64>,
    gasp: &GaConfig,
    aae: &AaeConfig,
    seed: u64,
) -> Result<Prepared> {
    match method {
        Method::Exact => Ok(Prepared {
            preparation: Preparation::State(target.clone()),
            achieved_fidelity: fidelity(target, target)?,
            converged: None,
        }),
        Method::Gasp => {
            let config = GaConfig {
                target_fidelity: target_fidelity.unwrap_or(gasp.target_fidelity),
                seed,
                ..gasp.clone()
            };
            let r = synthesize(target, &config)?;
            Ok(Prepared {
                preparation: Preparation::Circuit(r.circuit),
                achieved_fidelity: r.achieved_fidelity,
                converged: Some(r.converged),
            })
        }
        Method::Aae => {
            let config = AaeConfig {
                seed,
                ..aae.clone()
            };
            let r = train_aae(target, &config)?;
            Ok(Prepared {
                preparation: Preparation::Circuit(r.circuit),
                achieved_fidelity: r.achieved_fidelity,
                converged: None,
            })
        }
    }
}

struct Cell<'a> {
    window: &'a Window,
    method: Method,
    fidelity_index: usize,
    target_fidelity: Option<f64>,
    seed: u64,
}

enum CellOutcome {
    Done(WindowRecord),
    Skipped(SkippedCell),
}

/// One cell's record plus the artifacts a sweep discards.
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub record: WindowRecord,
    pub vqsvd: VqsvdResult,
    pub circuit: Option<GateCircuit>,
}

/// Prepares one window with one method and runs VQSVD on it.
///
/// Streams derive from `seed`, the window index, the method and
/// `fidelity_index`, so a cell's result does not depend on which other cells
/// are in the plan.
pub fn run_single(
    plan: &ExperimentPlan,
    prices: &PriceTable,
    window: &Window,
    method: Method,
    fidelity_index: usize,
    target_fidelity: Option<f64>,
    seed: u64,
) -> Result<SingleRun> {
    let started = Instant::now();
    let cell_seed = derive_seed(
        seed,
        &[window.index as u64, method.tag(), fidelity_index as u64],
    );
    let target = window_target(prices, window)?;
    let prepared = prepare(
        &target.state,
        method,
        target_fidelity,
        &plan.gasp,
        &plan.aae,
        derive_seed(cell_seed, &[0]),
    )?;
    let spec = AnsatzSpec::new(target.n_per_register, plan.vqsvd_layers)?;
    let spsa = SpsaConfig {
        seed: derive_seed(cell_seed, &[1]),
        ..plan.spsa.clone()
    };
    let mode = match plan.shots {
        Some(count) => CostMode::Shots {
            count,
            seed: derive_seed(cell_seed, &[2]),
        },
        None => CostMode::Exact,
    };
    let result = run_vqsvd(&prepared.preparation, &spec, &spsa, mode)?;
    let (cnot_count, gate_count) = prepared
        .circuit()
        .map_or((0, 0), |c| (c.cnot_count(), c.gate_count()));
    let record = WindowRecord {
        window_index: window.index,
        window_label: window.label.clone(),
        method,
        target_fidelity,
        seed,
        achieved_fidelity: prepared.achieved_fidelity,
        converged: prepared.converged,
        entropy_vqsvd: result.entropy,
        entropy_oracle: target.entropy_oracle,
        frobenius_error: result.frobenius_error_against(&target.correlation)?,
        frobenius_error_prepared: result.frobenius_error,
        leaked_mass: result.leaked_mass,
        vqsvd_final_loss: result.final_loss,
        cnot_count,
        gate_count,
        wall_time: if plan.timing {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        },
    };
    Ok(SingleRun {
        record,
        circuit: prepared.circuit().cloned(),
        vqsvd: result,
    })
}

fn run_cell(plan: &ExperimentPlan, prices: &PriceTable, cell: &Cell) -> Result<CellOutcome> {
    let run = run_single(
        plan,
        prices,
        cell.window,
        cell.method,
        cell.fidelity_index,
        cell.target_fidelity,
        cell.seed,
    );
    match run {
        Ok(r) => Ok(CellOutcome::Done(r.record)),
        Err(e) if e.is_data_error() => Ok(CellOutcome::Skipped(SkippedCell {
            window_index: cell.window.index,
            window_label: cell.window.label.clone(),
            method: cell.method,
            target_fidelity: cell.target_fidelity,
            seed: cell.seed,
            reason: e.to_string(),
        })),
        Err(e) => Err(e),
    }
}

/// Runs every cell of the plan; data problems in a window skip its cells instead of failing.
pub fn run_plan(plan: &ExperimentPlan) -> Result<(Vec<WindowRecord>, SweepSummary)> {
    plan.validate()?;
    let prices = plan.load_prices()?;
    let mut windows = enumerate_windows(&prices, plan.window_length_months)?;
    if let Some(keep) = &plan.windows {
        if let Some(bad) = keep.iter().find(|&&i| i >= windows.len()) {
            return Err(Error::Argument(format!(
                "window index {bad} out of range (0..{})",
                windows.len()
            )));
        }
        windows.retain(|w| keep.contains(&w.index));
    }

    let method_cells = plan.method_cells();
    let cells: Vec<Cell> = windows
        .iter()
        .flat_map(|window| {
            method_cells.iter().flat_map(move |&(method, fidelity_index, target_fidelity)| {
                plan.seeds.iter().map(move |&seed| Cell {
                    window,
                    method,
                    fidelity_index,
                    target_fidelity,
                    seed,
                })
            })
        })
        .collect();

    // collect preserves cell order, which is already (window, method, fidelity, seed)
    let outcomes = cells
        .par_iter()
        .map(|cell| run_cell(plan, &prices, cell))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome {
            CellOutcome::Done(r) => records.push(r),
            CellOutcome::Skipped(s) => skipped.push(s),
        }
    }
    let summary = SweepSummary {
        plan: plan.clone(),
        rows: summarize(&records),
        skipped,
    };
    Ok((records, summary))
}

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub fn write_records<W: std::io::Write>(records: &[WindowRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(RECORD_HEADER)?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<records>", e))?;
    Ok(())
}

const RECORD_HEADER: [&str; 16] = [
    "window_index",
    "window_label",
    "method",
    "target_fidelity",
    "seed",
    "achieved_fidelity",
    "converged",
    "entropy_vqsvd",
    "entropy_oracle",
    "frobenius_error",
    "frobenius_error_prepared",
    "leaked_mass",
    "vqsvd_final_loss",
    "cnot_count",
    "gate_count",
    "wall_time",
];

pub fn read_records_from<R: std::io::Read>(input: R) -> Result<Vec<WindowRecord>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<WindowRecord>> {
    let path = path.as_ref();
    read_records_from(fs::File::open(path).map_err(|e| Error::io(path, e))?)
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<SweepSummary> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `records.csv` and `summary.json` into `dir`, creating it if needed.
pub fn emit_results(records: &[WindowRecord], summary: &SweepSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut csv_bytes = Vec::new();
    write_records(records, &mut csv_bytes)?;
    let records_path = dir.join(RECORDS_FILE);
    fs::write(&records_path, csv_bytes).map_err(|e| Error::io(&records_path, e))?;
    let summary_path = dir.join(SUMMARY_FILE);
    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    fs::write(&summary_path, json).map_err(|e| Error::io(&summary_path, e))?;
    Ok(())
}

/// Mean entropies per window (rows) for the oracle and each method/fidelity (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotTable {
    pub columns: Vec<String>,
    pub rows: Vec<PlotRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub window_label: String,
    /// Aligned with `columns`; `None` where a method has no record for the window.
    pub values: Vec<Option<f64>>,
}

pub fn series_name(method: Method, target_fidelity: Option<f64>) -> String {
    match target_fidelity {
        Some(f) => format!("{method}@{f:.2}"),
        None => method.to_string(),
    }
}

pub fn plot_table(records: &[WindowRecord]) -> PlotTable {
    let mut columns = vec!["oracle".to_string()];
    for row in summarize(records) {
        columns.push(series_name(row.method, row.target_fidelity));
    }
    // window -> (label, oracle entropy, series -> (sum, count))
    type SeriesSums = BTreeMap<String, (f64, usize)>;
    let mut windows: BTreeMap<usize, (String, f64, SeriesSums)> = BTreeMap::new();
    for r in records {
        let entry = windows
            .entry(r.window_index)
            .or_insert_with(|| (r.window_label.clone(), r.entropy_oracle, BTreeMap::new()));
        let acc = entry
            .2
            .entry(series_name(r.method, r.target_fidelity))
            .or_insert((0.0, 0));
        acc.0 += r.entropy_vqsvd;
        acc.1 += 1;
    }
    let rows = windows
        .into_values()
        .map(|(window_label, oracle, sums)| {
            let values = columns
                .iter()
                .map(|c| {
                    if c == "oracle" {
                        Some(oracle)
                    } else {
                        sums.get(c).map(|(s, n)| s / *n as f64)
                    }
                })
                .collect();
            PlotRow {
                window_label,
                values,
            }
        })
        .collect();
    PlotTable { columns, rows }
}

impl PlotTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(std::iter::once("window").chain(self.columns.iter().map(String::as_str)))?;
        for row in &self.rows {
            let cells = std::iter::once(row.window_label.clone()).chain(
                row.values
                    .iter()
                    .map(|v| v.map_or_else(String::new, |x| x.to_string())),
            );
            w.write_record(cells)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
