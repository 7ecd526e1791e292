use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qsvd_entropy::aae::AaeConfig;
use qsvd_entropy::gasp::GaConfig;
use qsvd_entropy::harness::{
    self, enumerate_windows, plot_table, prepare, read_records, run_plan, run_single,
    window_target, ExperimentPlan, Method, Window, WindowRecord,
};
use qsvd_entropy::marketdata::{
    build_return_panel, correlation_matrix, svd_entropy_oracle, PriceTable,
};
use qsvd_entropy::vqsvd::SpsaConfig;
use qsvd_entropy::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_CONVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(name = "qsvd-entropy", version, about = "SVD entropy of stock windows via simulated VQSVD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a price CSV and print what it contains.
    Ingest(IngestArgs),
    /// Classical entropy and spectrum for every window.
    Oracle(OracleArgs),
    /// Synthesize a preparation circuit for one window.
    Encode(EncodeArgs),
    /// Prepare one window and run VQSVD on it.
    Vqsvd(VqsvdArgs),
    /// Run a full sweep and write records.csv and summary.json.
    Sweep(SweepArgs),
    /// Turn sweep records into a per-window entropy table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct DataArgs {
    /// Price CSV (`date,symbol,open`); the bundled 2008-09 prices when omitted.
    #[arg(long)]
    prices: Option<PathBuf>,
    /// Window length in months of prices.
    #[arg(long, default_value_t = 5)]
    window: usize,
}

impl DataArgs {
    fn load(&self) -> qsvd_entropy::Result<PriceTable> {
        match &self.prices {
            Some(p) => PriceTable::from_csv_path(p),
            None => Ok(PriceTable::bundled()),
        }
    }

    fn window_at(&self, prices: &PriceTable, index: usize) -> qsvd_entropy::Result<Window> {
        let windows = enumerate_windows(prices, self.window)?;
        let count = windows.len();
        windows.into_iter().nth(index).ok_or_else(|| {
            Error::Argument(format!("window index {index} out of range (0..{count})"))
        })
    }
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    prices: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    window_index: usize,
    #[arg(long, default_value = "gasp")]
    method: Method,
    #[arg(long, default_value_t = 0.9)]
    target_fidelity: f64,
    /// GASP generation budget.
    #[arg(long, default_value_t = 300)]
    max_generations: usize,
    /// AAE layers.
    #[arg(long, default_value_t = 3)]
    layers: usize,
    /// AAE SPSA iterations.
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VqsvdArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    window_index: usize,
    #[arg(long, default_value = "exact")]
    method: Method,
    #[arg(long, default_value_t = 0.9)]
    target_fidelity: f64,
    /// GASP generation budget.
    #[arg(long, default_value_t = 300)]
    max_generations: usize,
    /// VQSVD ansatz layers.
    #[arg(long, default_value_t = 1)]
    layers: usize,
    /// Layers of the AAE preparation circuit.
    #[arg(long, default_value_t = 3)]
    aae_layers: usize,
    /// VQSVD SPSA iterations.
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Estimate the cost from this many shots per evaluation.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock time (breaks byte-for-byte reproducibility).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON experiment plan; the flags below override its fields.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    /// Comma-separated window indices to keep.
    #[arg(long, value_delimiter = ',')]
    window_index: Option<Vec<usize>>,
    /// Comma-separated subset of gasp, aae, exact.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<Method>>,
    /// Comma-separated GASP target fidelities.
    #[arg(long, value_delimiter = ',')]
    target_fidelity: Option<Vec<f64>>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    aae_layers: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Comma-separated replicate seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    shots: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// records.csv written by `sweep`, or the directory containing it.
    #[arg(long)]
    records: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Lib(Error),
    NotConverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult = std::result::Result<(), Failure>;

fn emit(out: Option<&Path>, text: &str) -> qsvd_entropy::Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> qsvd_entropy::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn ingest(args: &IngestArgs) -> CliResult {
    let table = PriceTable::from_csv_path(&args.prices)?;
    let dates = table.dates();
    let rows: usize = table.series.iter().map(|s| s.observations.len()).sum();
    #[derive(Serialize)]
    struct Summary<'a> {
        symbols: Vec<&'a str>,
        months: usize,
        first: String,
        last: String,
        rows: usize,
    }
    let summary = Summary {
        symbols: table.symbols(),
        months: dates.len(),
        first: dates.first().map(|d| d.to_string()).unwrap_or_default(),
        last: dates.last().map(|d| d.to_string()).unwrap_or_default(),
        rows,
    };
    let text = match args.format {
        Format::Json => to_json(&summary)?,
        Format::Csv => format!(
            "symbols,months,first,last,rows\n{},{},{},{},{}\n",
            summary.symbols.join(" "),
            summary.months,
            summary.first,
            summary.last,
            summary.rows
        ),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(())
}

#[derive(Serialize)]
struct OracleRow {
    window_index: usize,
    window_label: String,
    entropy: Option<f64>,
    eigenvalues: Vec<f64>,
    skipped: Option<String>,
}

fn oracle(args: &OracleArgs) -> CliResult {
    let prices = args.data.load()?;
    let mut rows = Vec::new();
    for w in enumerate_windows(&prices, args.data.window)? {
        let report = build_return_panel(&prices.series, &w.dates)
            .and_then(|p| svd_entropy_oracle(&correlation_matrix(&p)));
        rows.push(match report {
            Ok(r) => OracleRow {
                window_index: w.index,
                window_label: w.label,
                entropy: Some(r.entropy),
                eigenvalues: r.eigenvalues,
                skipped: None,
            },
            Err(e) if e.is_data_error() => OracleRow {
                window_index: w.index,
                window_label: w.label,
                entropy: None,
                eigenvalues: Vec::new(),
                skipped: Some(e.to_string()),
            },
            Err(e) => return Err(e.into()),
        });
    }
    let text = match args.format {
        Format::Json => to_json(&rows)?,
        Format::Csv => {
            let mut s = String::from("window_index,window_label,entropy,eigenvalues\n");
            for r in &rows {
                let ev: Vec<String> = r.eigenvalues.iter().map(f64::to_string).collect();
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    r.window_index,
                    r.window_label,
                    r.entropy.map_or_else(String::new, |e| e.to_string()),
                    ev.join(" ")
                ));
            }
            s
        }
    };
    emit(args.out.as_deref(), &text)?;
    Ok(())
}

fn encode(args: &EncodeArgs) -> CliResult {
    if args.method == Method::Exact {
        return Err(Error::Argument("encode needs a synthesis method (gasp or aae)".into()).into());
    }
    let prices = args.data.load()?;
    let window = args.data.window_at(&prices, args.window_index)?;
    let target = window_target(&prices, &window)?;
    let aae = AaeConfig {
        layers: args.layers,
        iterations: args.iterations,
        ..AaeConfig::default()
    };
    let prepared = prepare(
        &target.state,
        args.method,
        Some(args.target_fidelity),
        &GaConfig {
            max_generations: args.max_generations,
            ..GaConfig::default()
        },
        &aae,
        args.seed,
    )?;
    let circuit = prepared.circuit().expect("synthesis methods return a circuit");
    emit(
        args.out.as_deref(),
        &format!("{}\n", circuit.to_tagged_json(args.method.as_str())?),
    )?;
    eprintln!(
        "{} {}: fidelity {:.6}, {} gates, {} CNOTs",
        args.method,
        window.label,
        prepared.achieved_fidelity,
        circuit.gate_count(),
        circuit.cnot_count()
    );
    if prepared.converged == Some(false) {
        return Err(Failure::NotConverged(format!(
            "GASP stopped at fidelity {:.6} below target {}",
            prepared.achieved_fidelity, args.target_fidelity
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct VqsvdReport<'a> {
    config: &'a ExperimentPlan,
    record: &'a WindowRecord,
    schmidt_weights: &'a [f64],
    loss_trace: &'a [f64],
}

fn vqsvd(args: &VqsvdArgs) -> CliResult {
    let prices = args.data.load()?;
    let window = args.data.window_at(&prices, args.window_index)?;
    let target_fidelity = (args.method == Method::Gasp).then_some(args.target_fidelity);
    let plan = ExperimentPlan {
        input_path: args.data.prices.clone(),
        window_length_months: args.data.window,
        windows: Some(vec![args.window_index]),
        methods: vec![args.method],
        gasp_target_fidelities: target_fidelity.into_iter().collect(),
        seeds: vec![args.seed],
        vqsvd_layers: args.layers,
        spsa: SpsaConfig::with_iterations(args.iterations, 0),
        gasp: GaConfig {
            max_generations: args.max_generations,
            ..GaConfig::default()
        },
        aae: AaeConfig {
            layers: args.aae_layers,
            ..AaeConfig::default()
        },
        shots: args.shots,
        timing: args.timing,
        output_path: args.out.clone(),
    };
    plan.validate()?;
    let run = run_single(&plan, &prices, &window, args.method, 0, target_fidelity, args.seed)?;
    let text = match args.format {
        Format::Json => to_json(&VqsvdReport {
            config: &plan,
            record: &run.record,
            schmidt_weights: &run.vqsvd.schmidt_weights,
            loss_trace: &run.vqsvd.loss_trace,
        })?,
        Format::Csv => {
            let mut bytes = Vec::new();
            harness::write_records(std::slice::from_ref(&run.record), &mut bytes)?;
            String::from_utf8(bytes).expect("csv output is utf-8")
        }
    };
    emit(args.out.as_deref(), &text)?;
    eprintln!(
        "{} {}: entropy {:.6} (oracle {:.6})",
        args.method, window.label, run.record.entropy_vqsvd, run.record.entropy_oracle
    );
    if run.record.converged == Some(false) {
        return Err(Failure::NotConverged(format!(
            "GASP stopped at fidelity {:.6} below target {}",
            run.record.achieved_fidelity, args.target_fidelity
        )));
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> CliResult {
    let mut plan = match &args.plan {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            ExperimentPlan::from_json(&text)?
        }
        None => ExperimentPlan::default(),
    };
    if args.prices.is_some() {
        plan.input_path = args.prices.clone();
    }
    if let Some(w) = args.window {
        plan.window_length_months = w;
    }
    if let Some(w) = &args.window_index {
        plan.windows = Some(w.clone());
    }
    if let Some(m) = &args.method {
        plan.methods = m.clone();
    }
    if let Some(f) = &args.target_fidelity {
        plan.gasp_target_fidelities = f.clone();
    }
    if let Some(l) = args.layers {
        plan.vqsvd_layers = l;
    }
    if let Some(l) = args.aae_layers {
        plan.aae.layers = l;
    }
    if let Some(i) = args.iterations {
        plan.spsa = SpsaConfig::with_iterations(i, 0);
    }
    if let Some(s) = &args.seeds {
        plan.seeds = s.clone();
    }
    if args.shots.is_some() {
        plan.shots = args.shots;
    }
    plan.timing |= args.timing;
    plan.output_path = Some(args.out.clone());

    let (records, summary) = run_plan(&plan)?;
    harness::emit_results(&records, &summary, &args.out)?;
    for row in &summary.rows {
        eprintln!(
            "{:<10} n={:<3} mse={:.6} frobenius={:.6} gates={:.1}",
            harness::series_name(row.method, row.target_fidelity),
            row.count,
            row.mse,
            row.mean_frobenius_error,
            row.mean_gate_count
        );
    }
    for s in &summary.skipped {
        eprintln!("skipped {} {}: {}", s.window_label, s.method, s.reason);
    }
    Ok(())
}

fn report(args: &ReportArgs) -> CliResult {
    let path = if args.records.is_dir() {
        args.records.join(harness::RECORDS_FILE)
    } else {
        args.records.clone()
    };
    let table = plot_table(&read_records(&path)?);
    let text = match args.format {
        Format::Csv => table.to_csv()?,
        Format::Json => to_json(&table)?,
    };
    emit(args.out.as_deref(), &text)?;
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) | Error::Structural(_) => EXIT_USAGE,
        Error::Optimization { .. } => EXIT_CONVERGENCE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Oracle(a) => oracle(a),
        Command::Encode(a) => encode(a),
        Command::Vqsvd(a) => vqsvd(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONVERGENCE)
        }
    }
}
