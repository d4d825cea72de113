//! Price series ingestion, polynomial detrending, log returns and histograms.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    timestamps: Vec<f64>,
    prices: Vec<f64>,
    resolution: f64,
}

impl PriceSeries {
    /// Builds a series, taking the resolution as the median timestamp spacing.
    pub fn new(timestamps: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        if timestamps.len() != prices.len() {
            return Err(Error::InvalidInput(format!(
                "{} timestamps but {} prices",
                timestamps.len(),
                prices.len()
            )));
        }
        if prices.len() < 2 {
            return Err(Error::InvalidInput("a price series needs at least 2 points".into()));
        }
        if let Some(i) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidInput(format!("price at index {i} is not a positive number")));
        }
        if let Some(i) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!(
                "timestamps not strictly increasing at index {}",
                i + 1
            )));
        }
        let mut gaps: Vec<f64> = timestamps.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_by(f64::total_cmp);
        let resolution = gaps[gaps.len() / 2];
        Ok(PriceSeries { timestamps, prices, resolution })
    }

    /// Regular grid `t0 + i·resolution` from log prices.
    pub fn from_log_prices(t0: f64, resolution: f64, log_prices: &[f64]) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(Error::param("resolution", "must be > 0"));
        }
        let ts = (0..log_prices.len()).map(|i| t0 + i as f64 * resolution).collect();
        let mut s = Self::new(ts, log_prices.iter().map(|x| x.exp()).collect())?;
        s.resolution = resolution;
        Ok(s)
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn log_prices(&self) -> Vec<f64> {
        self.prices.iter().map(|p| p.ln()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// Treat the first row as a header when its designated columns are not numeric.
    #[default]
    Auto,
    Present,
    Absent,
}

/// Which CSV columns hold time and price (zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnSpec {
    pub time_col: usize,
    pub price_col: usize,
    pub header: HeaderMode,
    pub delimiter: u8,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        ColumnSpec { time_col: 0, price_col: 1, header: HeaderMode::Auto, delimiter: b',' }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowWarning {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IngestReport {
    pub rejected: Vec<RowWarning>,
    pub duplicates: Vec<RowWarning>,
}

impl IngestReport {
    pub fn warnings(&self) -> impl Iterator<Item = &RowWarning> {
        self.rejected.iter().chain(self.duplicates.iter())
    }
}

pub fn load_price_series(path: &Path, format: &ColumnSpec) -> Result<(PriceSeries, IngestReport)> {
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let mut text = String::new();
    File::open(path).and_then(|mut f| f.read_to_string(&mut text)).map_err(io_err)?;
    parse_price_csv(&text, format).map_err(|e| match e {
        Error::NoValidRows { .. } => Error::NoValidRows { path: path.to_path_buf() },
        other => other,
    })
}

/// Parses CSV text; `load_price_series` without the file access.
pub fn parse_price_csv(text: &str, format: &ColumnSpec) -> Result<(PriceSeries, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(format.delimiter)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());

    let mut report = IngestReport::default();
    let mut rows: Vec<(f64, f64, u64)> = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let time = rec.get(format.time_col).map(str::parse::<f64>);
        let price = rec.get(format.price_col).map(str::parse::<f64>);
        let is_first = std::mem::replace(&mut first, false);
        if is_first {
            let numeric = matches!(time, Some(Ok(_))) && matches!(price, Some(Ok(_)));
            match format.header {
                HeaderMode::Present => continue,
                HeaderMode::Auto if !numeric => continue,
                _ => {}
            }
        }
        if rec.iter().all(str::is_empty) {
            continue;
        }
        match (time, price) {
            (Some(Ok(t)), Some(Ok(p))) if t.is_finite() && p.is_finite() && p > 0.0 => {
                rows.push((t, p, line))
            }
            (Some(Ok(_)), Some(Ok(p))) => report.rejected.push(RowWarning {
                line,
                reason: format!("price {p} is not positive"),
            }),
            (None, _) | (_, None) => report.rejected.push(RowWarning { line, reason: "missing column".into() }),
            _ => report.rejected.push(RowWarning { line, reason: "unparseable number".into() }),
        }
    }
    if rows.is_empty() {
        return Err(Error::NoValidRows { path: "<input>".into() });
    }
    // Stable sort keeps the first occurrence of a timestamp in file order.
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut times = Vec::with_capacity(rows.len());
    let mut prices = Vec::with_capacity(rows.len());
    for (t, p, line) in rows {
        if times.last() == Some(&t) {
            report.duplicates.push(RowWarning { line, reason: format!("duplicate timestamp {t}, kept first") });
            continue;
        }
        times.push(t);
        prices.push(p);
    }
    Ok((PriceSeries::new(times, prices)?, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetrendResult {
    pub detrended: Vec<f64>,
    /// Coefficients in the original time units, lowest degree first.
    pub trend_coeffs: Vec<f64>,
    pub degree: usize,
    /// Condition number of the normal equations of the accepted fit.
    pub condition_number: f64,
}

pub const DEFAULT_COND_THRESHOLD: f64 = 1e8;
const MAX_DEGREE: usize = 30;

/// Removes the highest-degree polynomial trend from log S whose normal
/// equations (time mapped to [0, 1]) stay below `cond_threshold`.
pub fn detrend_logprice(series: &PriceSeries, cond_threshold: f64) -> Result<DetrendResult> {
    detrend(series.timestamps(), &series.log_prices(), cond_threshold)
}

pub fn detrend(times: &[f64], y: &[f64], cond_threshold: f64) -> Result<DetrendResult> {
    let n = y.len();
    if n < 3 || times.len() != n {
        return Err(Error::InvalidInput("detrending needs at least 3 matching points".into()));
    }
    if !(cond_threshold > 1.0) {
        return Err(Error::param("cond_threshold", "must be > 1"));
    }
    let t0 = times[0];
    let span = times[n - 1] - t0;
    if !(span > 0.0) {
        return Err(Error::Degenerate("constant time axis".into()));
    }
    let x: Vec<f64> = times.iter().map(|t| (t - t0) / span).collect();
    let rhs = DVector::from_column_slice(y);

    let mut best: Option<(usize, DVector<f64>, f64)> = None;
    for degree in 0..=MAX_DEGREE.min(n - 1) {
        let v = DMatrix::from_fn(n, degree + 1, |i, j| x[i].powi(j as i32));
        let svd = v.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let cond = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
        if cond >= cond_threshold {
            break;
        }
        let coef = svd
            .solve(&rhs, f64::EPSILON * smax)
            .map_err(|e| Error::Degenerate(format!("polynomial fit failed: {e}")))?;
        best = Some((degree, coef, cond));
    }
    let (degree, coef, condition_number) =
        best.ok_or_else(|| Error::Degenerate("even a constant fit exceeds the condition threshold".into()))?;

    let detrended = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| yi - coef.iter().rev().fold(0.0, |acc, c| acc * xi + c))
        .collect();
    Ok(DetrendResult {
        detrended,
        trend_coeffs: unscale_poly(coef.as_slice(), t0, span),
        degree,
        condition_number,
    })
}

// p(x) with x = (t − t0)/span, re-expanded in powers of t.
fn unscale_poly(c: &[f64], t0: f64, span: f64) -> Vec<f64> {
    // q(t) = Σ c_j ((t − t0)/span)^j; build by Horner on polynomials in t.
    let lin = [-t0 / span, 1.0 / span];
    let mut q = vec![0.0; c.len()];
    for &cj in c.iter().rev() {
        let mut next = vec![0.0; c.len()];
        for (i, qi) in q.iter().enumerate() {
            if *qi == 0.0 {
                continue;
            }
            next[i] += qi * lin[0];
            if i + 1 < next.len() {
                next[i + 1] += qi * lin[1];
            }
        }
        next[0] += cj;
        q = next;
    }
    q
}

/// Divides by the sample standard deviation; returns the scale used.
pub fn rescale(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let sd = sample_variance(x).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Degenerate("zero variance, cannot rescale".into()));
    }
    Ok((x.iter().map(|v| v / sd).collect(), sd))
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// r_i = log S_{i+lag} − log S_i.
pub fn log_returns(series: &PriceSeries, lag: usize) -> Result<Vec<f64>> {
    lagged_differences(&series.log_prices(), lag)
}

pub fn lagged_differences(x: &[f64], lag: usize) -> Result<Vec<f64>> {
    if lag == 0 {
        return Err(Error::param("lag", "must be ≥ 1"));
    }
    if lag >= x.len() {
        return Err(Error::param("lag", format!("{lag} is not below the series length {}", x.len())));
    }
    Ok(x[lag..].iter().zip(x).map(|(b, a)| b - a).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDensity {
    pub bin_centers: Vec<f64>,
    pub densities: Vec<f64>,
    pub bin_width: f64,
}

/// Equal-width histogram over `[min, max]` normalized to unit integral.
pub fn empirical_density(samples: &[f64], n_bins: usize) -> Result<EmpiricalDensity> {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Degenerate("need at least two distinct sample values".into()));
    }
    histogram_on_range(samples, lo, hi, n_bins)
}

/// Histogram on a fixed range; samples outside `[lo, hi]` are dropped and the
/// densities are normalized by the total sample count.
pub fn histogram_on_range(samples: &[f64], lo: f64, hi: f64, n_bins: usize) -> Result<EmpiricalDensity> {
    if !(hi > lo) {
        return Err(Error::param("range", "upper bound must exceed lower bound"));
    }
    if n_bins == 0 {
        return Err(Error::param("n_bins", "must be ≥ 1"));
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    for &s in samples {
        if s >= lo && s <= hi {
            let i = (((s - lo) / width) as usize).min(n_bins - 1);
            counts[i] += 1;
        }
    }
    let total = samples.len() as f64;
    Ok(EmpiricalDensity {
        bin_centers: (0..n_bins).map(|i| lo + (i as f64 + 0.5) * width).collect(),
        densities: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
        bin_width: width,
    })
}
