//! Price ingestion, log returns, normalized return panels, the correlation
//! matrix and the classical SVD-entropy oracle.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::simcore::StateVector;

pub use crate::linalg::{eigen_symmetric, SymmetricEigen};

/// Eigenvalues at or below this are treated as exact zeros in the entropy sum.
pub const ENTROPY_EIGEN_FLOOR: f64 = 1e-12;

/// Monthly opening prices for XOM, WMT, PG and MSFT, Apr 2008 – Mar 2009.
pub const BUNDLED_CSV: &str = include_str!("../data/bundled_prices.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub symbol: String,
    pub observations: Vec<(NaiveDate, f64)>,
}

impl PriceSeries {
    /// Builds a series, requiring strictly increasing dates and positive prices.
    pub fn new(symbol: impl Into<String>, observations: Vec<(NaiveDate, f64)>) -> Result<Self> {
        let symbol = symbol.into();
        for w in observations.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Data(format!(
                    "{symbol}: dates not strictly increasing at {}",
                    w[1].0
                )));
            }
        }
        if let Some((d, p)) = observations.iter().find(|(_, p)| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::Data(format!("{symbol}: non-positive price {p} on {d}")));
        }
        Ok(Self {
            symbol,
            observations,
        })
    }

    pub fn price_on(&self, date: NaiveDate) -> Option<f64> {
        self.observations
            .binary_search_by_key(&date, |(d, _)| *d)
            .ok()
            .map(|i| self.observations[i].1)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.observations.iter().map(|(d, _)| *d)
    }
}

/// `r_t = ln s_{t+1} − ln s_t` for consecutive observations.
pub fn log_returns(series: &PriceSeries) -> Result<Vec<f64>> {
    if series.observations.len() < 2 {
        return Err(Error::Argument(format!(
            "{}: need at least 2 observations, got {}",
            series.symbol,
            series.observations.len()
        )));
    }
    if let Some((d, p)) = series.observations.iter().find(|(_, p)| p.is_nan() || *p <= 0.0) {
        return Err(Error::Data(format!(
            "{}: non-positive price {p} on {d}",
            series.symbol
        )));
    }
    Ok(series
        .observations
        .windows(2)
        .map(|w| w[1].1.ln() - w[0].1.ln())
        .collect())
}

/// All series from one price file, in first-appearance symbol order.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub series: Vec<PriceSeries>,
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    date: NaiveDate,
    symbol: String,
    open: f64,
}

impl PriceTable {
    /// Parses `date,symbol,open` CSV. Duplicate `(date, symbol)` rows are rejected.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["date", "symbol", "open"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Data(format!(
                "expected header `date,symbol,open`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }

        let mut order: Vec<String> = Vec::new();
        let mut rows: HashMap<String, Vec<(NaiveDate, f64)>> = HashMap::new();
        let mut seen = BTreeSet::new();
        for (line, record) in rdr.deserialize::<PriceRow>().enumerate() {
            let row = record.map_err(|e| Error::Data(format!("row {}: {e}", line + 2)))?;
            if !seen.insert((row.date, row.symbol.clone())) {
                return Err(Error::Data(format!(
                    "duplicate row for {} on {}",
                    row.symbol, row.date
                )));
            }
            if !rows.contains_key(&row.symbol) {
                order.push(row.symbol.clone());
            }
            rows.entry(row.symbol).or_default().push((row.date, row.open));
        }
        if order.is_empty() {
            return Err(Error::Data("price file contains no rows".into()));
        }

        let series = order
            .into_iter()
            .map(|symbol| {
                let mut obs = rows.remove(&symbol).unwrap_or_default();
                obs.sort_by_key(|(d, _)| *d);
                PriceSeries::new(symbol, obs)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { series })
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    /// The bundled Apr 2008 – Mar 2009 fixture.
    pub fn bundled() -> Self {
        Self::from_csv_reader(BUNDLED_CSV.as_bytes()).expect("bundled fixture parses")
    }

    pub fn symbols(&self) -> Vec<&str> {
        self.series.iter().map(|s| s.symbol.as_str()).collect()
    }

    /// Sorted union of all observation dates.
    pub fn dates(&self) -> Vec<NaiveDate> {
        self.series
            .iter()
            .flat_map(|s| s.dates())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Normalized return coefficients `a` (stocks × periods) and the raw log returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnPanel {
    pub symbols: Vec<String>,
    pub period_labels: Vec<String>,
    pub a: Vec<Vec<f64>>,
    pub raw_returns: Vec<Vec<f64>>,
}

impl ReturnPanel {
    pub fn n_stocks(&self) -> usize {
        self.a.len()
    }

    pub fn n_periods(&self) -> usize {
        self.a.first().map_or(0, Vec::len)
    }

    /// `Σ_n Σ_t a_nt²`, which is 1 for any valid panel.
    pub fn total_weight(&self) -> f64 {
        self.a.iter().flatten().map(|x| x * x).sum()
    }
}

fn mean_and_population_std(xs: &[f64]) -> (f64, f64) {
    let t = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / t;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / t;
    (mean, var.sqrt())
}

/// Builds the panel over `window` (T + 1 consecutive dates giving T returns).
///
/// `a_nt = (r_nt − ⟨r_n⟩) / (σ_n √(N_s T))` with the population standard
/// deviation, which makes `Σ a_nt² = 1` exactly.
pub fn build_return_panel(series_list: &[PriceSeries], window: &[NaiveDate]) -> Result<ReturnPanel> {
    if series_list.is_empty() {
        return Err(Error::Argument("no price series given".into()));
    }
    if window.len() < 2 {
        return Err(Error::Argument(format!(
            "window needs at least 2 dates, got {}",
            window.len()
        )));
    }
    let n_stocks = series_list.len();
    let n_periods = window.len() - 1;
    let scale = ((n_stocks * n_periods) as f64).sqrt();

    let mut a = Vec::with_capacity(n_stocks);
    let mut raw_returns = Vec::with_capacity(n_stocks);
    for series in series_list {
        let observations = window
            .iter()
            .map(|&d| {
                series.price_on(d).map(|p| (d, p)).ok_or_else(|| {
                    Error::Data(format!("{}: no price on {d}", series.symbol))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let returns = log_returns(&PriceSeries {
            symbol: series.symbol.clone(),
            observations,
        })?;
        let (mean, sigma) = mean_and_population_std(&returns);
        if sigma.is_nan() || sigma <= 1e-15 {
            return Err(Error::Degenerate(format!(
                "{}: zero return variance over {} – {}",
                series.symbol,
                window[0],
                window[n_periods]
            )));
        }
        a.push(returns.iter().map(|r| (r - mean) / (sigma * scale)).collect());
        raw_returns.push(returns);
    }

    Ok(ReturnPanel {
        symbols: series_list.iter().map(|s| s.symbol.clone()).collect(),
        period_labels: window[1..].iter().map(|d| d.format("%Y-%m").to_string()).collect(),
        a,
        raw_returns,
    })
}

/// `C = a·aᵀ`, trace-normalized and positive semidefinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub symbols: Vec<String>,
    pub c: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn trace(&self) -> f64 {
        self.c.iter().enumerate().map(|(i, row)| row[i]).sum()
    }

    pub fn eigen(&self) -> Result<SymmetricEigen> {
        eigen_symmetric(&self.c)
    }
}

pub fn correlation_matrix(panel: &ReturnPanel) -> CorrelationMatrix {
    let n = panel.n_stocks();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = panel.a[i].iter().zip(&panel.a[j]).map(|(x, y)| x * y).sum();
            c[i][j] = v;
            c[j][i] = v;
        }
    }
    CorrelationMatrix {
        symbols: panel.symbols.clone(),
        c,
    }
}

/// Places `a_nt` at basis index `n·T + t` (stock register on the high qubits).
pub fn data_statevector(panel: &ReturnPanel) -> Result<StateVector> {
    let (n_stocks, n_periods) = (panel.n_stocks(), panel.n_periods());
    if !n_stocks.is_power_of_two() || !n_periods.is_power_of_two() {
        return Err(Error::Shape(format!(
            "panel is {n_stocks} stocks × {n_periods} periods; both must be powers of two \
             (zero-padding is not applied)"
        )));
    }
    if panel.a.iter().any(|row| row.len() != n_periods) {
        return Err(Error::Shape("ragged return panel".into()));
    }
    StateVector::from_amplitudes(
        panel
            .a
            .iter()
            .flatten()
            .map(|&x| Complex64::new(x, 0.0))
            .collect(),
    )
}

/// Spectrum and entropy of a trace-one correlation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    /// Descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Nats.
    pub entropy: f64,
}

/// `−Σ λ ln λ` over `λ > 1e-12`, floored at zero (a lone `λ = 1 + ε` would give `−ε`).
pub fn entropy_from_weights(weights: &[f64]) -> f64 {
    let s = -weights
        .iter()
        .filter(|&&w| w > ENTROPY_EIGEN_FLOOR)
        .map(|&w| w * w.ln())
        .sum::<f64>();
    s.max(0.0)
}

pub fn svd_entropy_oracle(c: &CorrelationMatrix) -> Result<EntropyReport> {
    let eigenvalues: Vec<f64> = c.eigen()?.values.into_iter().map(|x| x.max(0.0)).collect();
    let entropy = entropy_from_weights(&eigenvalues);
    Ok(EntropyReport {
        eigenvalues,
        entropy,
    })
}

/// Frobenius distance between two real matrices of equal shape.
pub fn frobenius_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    linalg::frobenius_distance(a, b)
}
