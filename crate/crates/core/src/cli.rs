//! Command-line front end. Every subcommand writes plot-ready CSV (or, for
//! `calibrate`, a params JSON document) preceded by `#` comment lines holding
//! the tool version and the fully resolved configuration.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::distribution::{evaluate_grid, return_pdf_quadrature, ReturnDistSpec};
use crate::fbm::FbmMethod;
use crate::pricing::{
    alpha_approx_warning, alpha_squared, black_scholes_call, black_scholes_put, fractional_call_closed_with,
    fractional_call_price_with, fractional_put_price_with, implied_vol_surface, implied_volatility, AlphaMode,
    AlphaParams, MForm, OptionSpec, PricingOptions, RISK_NEUTRAL_CAVEAT,
};
use crate::simulator::{simulate, SimulationConfig};
use crate::timeseries::{
    detrend_logprice, empirical_density, lagged_differences, load_price_series, rescale, ColumnSpec, HeaderMode,
    PriceSeries, DEFAULT_COND_THRESHOLD,
};
use crate::volatility::{
    calibrate_with, induced_volatility_strided, CalibrationOptions, VolatilityParams, CALIBRATION_LAGS,
    DEFAULT_SCALING_LAGS,
};

pub const OUT_DIR_ENV: &str = "FRACVOL_OUT_DIR";
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "fracvol", version, about = "Fractional-noise stochastic volatility toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a price CSV; emit time,price.
    Ingest(IngestArgs),
    /// Remove a polynomial trend from log prices.
    Detrend(DetrendArgs),
    /// Induced volatility from a sliding window of log-price increments.
    Vol(VolArgs),
    /// Fit (H, k, β) to a price series; emits params JSON.
    Calibrate(CalibrateArgs),
    /// Simulate price and volatility paths.
    Simulate(SimulateArgs),
    /// Return density on a grid by quadrature, series and tail asymptote.
    Dist(DistArgs),
    /// Empirical return density of a data set next to the model density.
    FitCompare(FitCompareArgs),
    /// Price one European option.
    Price(PriceArgs),
    /// Price and implied volatility over a maturity × moneyness grid.
    Smile(SmileArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum HeaderArg {
    Auto,
    Yes,
    No,
}

#[derive(Debug, Args, Serialize)]
struct InputArgs {
    /// Input CSV with time and price columns.
    #[arg(long = "in")]
    input: PathBuf,
    /// Zero-based time column.
    #[arg(long, default_value_t = 0)]
    time_col: usize,
    /// Zero-based price column.
    #[arg(long, default_value_t = 1)]
    price_col: usize,
    #[arg(long, value_enum, default_value_t = HeaderArg::Auto)]
    header: HeaderArg,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
}

#[derive(Debug, Args, Serialize)]
struct OutArg {
    /// Output file. Defaults to $FRACVOL_OUT_DIR/<subcommand>.<ext>, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ParamArgs {
    /// Preset name (nyse-daily) or path to a params JSON document.
    #[arg(long, default_value = "nyse-daily")]
    params: String,
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Scale δ of the fractional noise.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct IngestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args, Serialize)]
struct DetrendArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_COND_THRESHOLD)]
    cond_threshold: f64,
    /// Divide residuals by their sample standard deviation.
    #[arg(long)]
    rescale: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args, Serialize)]
struct VolArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Detrend log prices first.
    #[arg(long)]
    detrend: bool,
    /// Rescale (detrended) log prices to unit sample standard deviation.
    #[arg(long)]
    rescale: bool,
    #[arg(long, default_value_t = DEFAULT_COND_THRESHOLD)]
    cond_threshold: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args, Serialize)]
struct CalibrateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Comma-separated lags for the scaling fit. Defaults to 2,4,…,128, or 1,2,…,64 with --uncorrected.
    #[arg(long, value_delimiter = ',')]
    lags: Option<Vec<usize>>,
    /// Skip the estimator-noise corrections.
    #[arg(long)]
    uncorrected: bool,
    #[arg(long)]
    no_detrend: bool,
    #[arg(long)]
    no_rescale: bool,
    #[arg(long, default_value_t = DEFAULT_COND_THRESHOLD)]
    cond_threshold: f64,
    /// Also write the lag table lag,mean_abs,count to this CSV.
    #[arg(long)]
    table: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Number of time steps.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Step size; δ must be an integer multiple. Defaults to δ.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    s0: f64,
    #[arg(long, default_value = "circulant")]
    method: String,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args, Serialize)]
struct DistArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Return horizon Δ.
    #[arg(long, default_value_t = 1.0)]
    lag: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu: f64,
    /// Return grid lo:hi:n (inclusive endpoints).
    #[arg(long, default_value = "-0.1:0.1:401", allow_hyphen_values = true)]
    grid: String,
    /// Terms searched for the optimally truncated series.
    #[arg(long, default_value_t = 60)]
    series_terms: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args, Serialize)]
struct FitCompareArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Return lag in samples; the model horizon is lag × resolution.
    #[arg(long, default_value_t = 1)]
    lag: usize,
    #[arg(long, default_value_t = 100)]
    bins: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum AlphaArg {
    Exact,
    Approx,
}

impl From<AlphaArg> for AlphaMode {
    fn from(a: AlphaArg) -> Self {
        match a {
            AlphaArg::Exact => AlphaMode::Exact,
            AlphaArg::Approx => AlphaMode::Approx,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct PricingFlags {
    #[arg(long, default_value_t = 0.01)]
    sigma_t: f64,
    #[arg(long, default_value_t = 0.001, allow_hyphen_values = true)]
    rate: f64,
    #[arg(long, value_enum, default_value_t = AlphaArg::Approx)]
    alpha: AlphaArg,
    /// Relative tolerance between successive Gauss–Hermite rules.
    #[arg(long, default_value_t = 1e-8)]
    gh_tol: f64,
}

#[derive(Debug, Args, Serialize)]
struct PriceArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    pricing: PricingFlags,
    #[arg(long, default_value_t = 1.0)]
    spot: f64,
    #[arg(long, default_value_t = 1.0)]
    strike: f64,
    #[arg(long)]
    tau: f64,
    /// Price a put instead of a call (mixture form only).
    #[arg(long)]
    put: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args, Serialize)]
struct SmileArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    pricing: PricingFlags,
    /// Maturities lo:hi:n.
    #[arg(long, default_value = "5:100:20")]
    tau_grid: String,
    /// Moneyness S/K as lo:hi:n, strike fixed at 1.
    #[arg(long, default_value = "0.5:1.5:11")]
    moneyness_grid: String,
    #[command(flatten)]
    out: OutArg,
}

/// Evenly spaced grid from "lo:hi:n", endpoints included.
pub fn parse_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        bail!("grid `{s}` must look like lo:hi:n");
    };
    let lo: f64 = lo.trim().parse().with_context(|| format!("grid lower bound in `{s}`"))?;
    let hi: f64 = hi.trim().parse().with_context(|| format!("grid upper bound in `{s}`"))?;
    let n: usize = n.trim().parse().with_context(|| format!("grid size in `{s}`"))?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() {
        bail!("grid `{s}` needs finite bounds and n ≥ 1");
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    if !(hi > lo) {
        bail!("grid `{s}` needs hi > lo");
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { hi } else { lo + i as f64 * step }).collect())
}

impl ParamArgs {
    fn resolve(&self) -> anyhow::Result<VolatilityParams> {
        let base = match VolatilityParams::preset(&self.params) {
            Some(p) => p,
            None => {
                let text = fs::read_to_string(&self.params)
                    .with_context(|| format!("`{}` is neither a preset nor a readable params file", self.params))?;
                VolatilityParams::from_json(&text)?
            }
        };
        Ok(VolatilityParams::new(
            self.hurst.unwrap_or(base.hurst()),
            self.k.unwrap_or(base.k()),
            self.beta.unwrap_or(base.beta()),
            self.delta.unwrap_or(base.delta()),
        )?)
    }
}

impl InputArgs {
    fn load(&self, notes: &mut Vec<String>) -> anyhow::Result<PriceSeries> {
        if !self.delimiter.is_ascii() {
            bail!("delimiter must be a single ASCII character");
        }
        let spec = ColumnSpec {
            time_col: self.time_col,
            price_col: self.price_col,
            header: match self.header {
                HeaderArg::Auto => HeaderMode::Auto,
                HeaderArg::Yes => HeaderMode::Present,
                HeaderArg::No => HeaderMode::Absent,
            },
            delimiter: self.delimiter as u8,
        };
        let (series, report) = load_price_series(&self.input, &spec)?;
        for w in report.warnings() {
            notes.push(format!("warning: line {}: {}", w.line, w.reason));
        }
        Ok(series)
    }
}

/// Output document: comment header plus body, written in one go at the end.
struct Artifact {
    command: &'static str,
    ext: &'static str,
    config: serde_json::Value,
    notes: Vec<String>,
    body: Vec<u8>,
    commented: bool,
}

impl Artifact {
    fn new(command: &'static str, config: &impl Serialize) -> anyhow::Result<Self> {
        Ok(Artifact {
            command,
            ext: "csv",
            config: serde_json::to_value(config)?,
            notes: Vec::new(),
            body: Vec::new(),
            commented: true,
        })
    }

    fn csv<R: IntoIterator<Item = String>>(&mut self, header: &[&str], rows: impl IntoIterator<Item = R>) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        self.body = w.into_inner().map_err(|e| anyhow!("csv: {e}"))?;
        Ok(())
    }

    fn render(&self) -> Vec<u8> {
        let mut out = Vec::new();
        if self.commented {
            out.extend(format!("# fracvol {VERSION} {}\n", self.command).as_bytes());
            out.extend(format!("# config: {}\n", self.config).as_bytes());
            for n in &self.notes {
                out.extend(format!("# {n}\n").as_bytes());
            }
        }
        out.extend(&self.body);
        out
    }

    fn write(&self, out: &OutArg, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
        let target = out
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(|d| Path::new(&d).join(format!("{}.{}", self.command, self.ext))));
        let bytes = self.render();
        match target {
            Some(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                }
                fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
                if !self.commented {
                    for n in &self.notes {
                        writeln!(stderr, "{n}")?;
                    }
                }
            }
            None => stdout.write_all(&bytes)?,
        }
        Ok(())
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

/// Runs the tool on `argv` (program name first) and returns the exit status.
/// Failures print one JSON line `{"error": {"kind": …, "message": …}}` to `stderr`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            emit_error(stderr, "usage", &e.render().to_string());
            return 2;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let kind = e.downcast_ref::<crate::Error>().map_or("error", crate::Error::kind);
            emit_error(stderr, kind, &format!("{e:#}"));
            1
        }
    }
}

fn emit_error(stderr: &mut dyn Write, kind: &str, message: &str) {
    let line = serde_json::json!({ "error": { "kind": kind, "message": message.trim() } });
    let _ = writeln!(stderr, "{line}");
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    match cmd {
        Command::Ingest(a) => ingest(a, stdout, stderr),
        Command::Detrend(a) => detrend_cmd(a, stdout, stderr),
        Command::Vol(a) => vol(a, stdout, stderr),
        Command::Calibrate(a) => calibrate_cmd(a, stdout, stderr),
        Command::Simulate(a) => simulate_cmd(a, stdout, stderr),
        Command::Dist(a) => dist(a, stdout, stderr),
        Command::FitCompare(a) => fit_compare(a, stdout, stderr),
        Command::Price(a) => price(a, stdout, stderr),
        Command::Smile(a) => smile(a, stdout, stderr),
    }
}

fn ingest(a: IngestArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let mut art = Artifact::new("ingest", &a)?;
    let s = a.input.load(&mut art.notes)?;
    art.notes.push(format!("rows: {} resolution: {}", s.len(), s.resolution()));
    let rows = s.timestamps().iter().zip(s.prices()).map(|(t, p)| vec![num(*t), num(*p)]);
    art.csv(&["time", "price"], rows)?;
    art.write(&a.out, stdout, stderr)
}

fn detrend_cmd(a: DetrendArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let mut art = Artifact::new("detrend", &a)?;
    let s = a.input.load(&mut art.notes)?;
    let d = detrend_logprice(&s, a.cond_threshold)?;
    art.notes.push(format!(
        "degree: {} condition_number: {} trend_coeffs: {}",
        d.degree,
        d.condition_number,
        serde_json::to_string(&d.trend_coeffs)?
    ));
    let mut resid = d.detrended.clone();
    if a.rescale {
        let (r, sd) = rescale(&resid)?;
        art.notes.push(format!("rescale_sd: {sd}"));
        resid = r;
    }
    let lp = s.log_prices();
    let rows = (0..s.len()).map(|i| {
        vec![num(s.timestamps()[i]), num(lp[i]), num(lp[i] - d.detrended[i]), num(resid[i])]
    });
    art.csv(&["time", "log_price", "trend", "detrended"], rows)?;
    art.write(&a.out, stdout, stderr)
}

/// Log prices after optional detrending and rescaling, with the scale used.
fn prepare_logprice(
    s: &PriceSeries,
    detrend: bool,
    rescale_on: bool,
    cond: f64,
    notes: &mut Vec<String>,
) -> anyhow::Result<(Vec<f64>, f64)> {
    let mut lp = s.log_prices();
    if detrend {
        let d = detrend_logprice(s, cond)?;
        notes.push(format!("detrend_degree: {} condition_number: {}", d.degree, d.condition_number));
        lp = d.detrended;
    }
    let mut scale = 1.0;
    if rescale_on {
        let (r, sd) = rescale(&lp)?;
        notes.push(format!("rescale_sd: {sd}"));
        lp = r;
        scale = sd;
    }
    Ok((lp, scale))
}

fn vol(a: VolArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let mut art = Artifact::new("vol", &a)?;
    let s = a.input.load(&mut art.notes)?;
    let (lp, _) = prepare_logprice(&s, a.detrend, a.rescale, a.cond_threshold, &mut art.notes)?;
    let v = induced_volatility_strided(&lp, s.resolution(), a.window, a.stride)?;
    art.notes.push(format!("missing: {} (empty sigma fields)", v.missing()));
    let rows = v.timestamps.iter().zip(&v.sigma).map(|(t, sg)| vec![num(*t), sg.map_or(String::new(), num)]);
    art.csv(&["time", "sigma"], rows)?;
    art.write(&a.out, stdout, stderr)
}

fn calibrate_cmd(a: CalibrateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let mut art = Artifact::new("calibrate", &a)?;
    let s = a.input.load(&mut art.notes)?;
    let (lp, scale) = prepare_logprice(&s, !a.no_detrend, !a.no_rescale, a.cond_threshold, &mut art.notes)?;
    let mut opts = if a.uncorrected { CalibrationOptions::uncorrected(a.window) } else { CalibrationOptions { window: a.window, ..Default::default() } };
    opts.stride = a.stride;
    opts.lags = match &a.lags {
        Some(l) => l.clone(),
        None if a.uncorrected => DEFAULT_SCALING_LAGS.to_vec(),
        None => CALIBRATION_LAGS.to_vec(),
    };
    let report = calibrate_with(&lp, s.resolution(), &opts)?;
    // Rescaling divides σ by the scale; report β for the original prices.
    let params = report.params.with_beta(report.params.beta() + scale.ln())?;
    art.notes.push(format!(
        "raw_hurst: {} hurst_corrected: {} beta_hat: {} logvol_variance: {} missing: {} points: {}",
        report.raw_hurst, report.hurst_corrected, report.beta_hat, report.logvol_variance, report.missing, report.points
    ));
    if let Some(path) = &a.table {
        let mut t = Artifact::new("calibrate", &a)?;
        t.csv(
            &["lag", "mean_abs", "count"],
            report.scaling.table.iter().map(|r| vec![r.lag.to_string(), num(r.mean_abs), r.count.to_string()]),
        )?;
        fs::write(path, t.render()).with_context(|| format!("writing {}", path.display()))?;
    }
    art.ext = "json";
    art.commented = false;
    art.body = format!("{}\n", params.to_json()).into_bytes();
    art.write(&a.out, stdout, stderr)
}

fn simulate_cmd(a: SimulateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let params = a.params.resolve()?;
    let mut cfg = SimulationConfig::new(params, a.n, a.seed);
    cfg.dt = a.dt.unwrap_or(params.delta());
    cfg.mu = a.mu;
    cfg.s0 = a.s0;
    cfg.method = FbmMethod::from_str(&a.method)?;
    let mut art = Artifact::new("simulate", &cfg)?;
    let sim = simulate(&cfg)?;
    let p = &sim.prices;
    let rows = (0..p.len()).map(|i| {
        let sigma = sim.volatility.sigma.get(i).copied().flatten().map_or(String::new(), num);
        vec![num(p.timestamps()[i]), num(p.prices()[i]), sigma]
    });
    art.csv(&["time", "price", "sigma"], rows)?;
    art.write(&a.out, stdout, stderr)
}

fn dist(a: DistArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let params = a.params.resolve()?;
    let spec = ReturnDistSpec::new(params, a.lag, a.mu)?;
    let rs = parse_grid(&a.grid)?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        params: VolatilityParams,
        args: &'a DistArgs,
    }
    let mut art = Artifact::new("dist", &Resolved { params, args: &a })?;
    art.notes.push(format!(
        "r0: {} C: {} theta: {} second_moment: {} excess_kurtosis: {}",
        spec.r0,
        spec.c_const,
        params.theta(),
        spec.second_moment(),
        spec.excess_kurtosis()
    ));
    art.notes.push("pdf_series is the optimally truncated asymptotic series; pdf_asymptote is empty where λ ≤ 1".into());
    let rows = evaluate_grid(&rs, &spec, a.series_terms)?;
    art.csv(
        &["r", "pdf_quadrature", "pdf_series", "pdf_asymptote", "lambda"],
        rows.iter().map(|g| vec![num(g.r), num(g.pdf_quadrature), num(g.pdf_series), num(g.pdf_asymptote), num(g.lambda)]),
    )?;
    art.write(&a.out, stdout, stderr)
}

fn fit_compare(a: FitCompareArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let params = a.params.resolve()?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        params: VolatilityParams,
        args: &'a FitCompareArgs,
    }
    let mut art = Artifact::new("fit-compare", &Resolved { params, args: &a })?;
    let s = a.input.load(&mut art.notes)?;
    let returns = lagged_differences(&s.log_prices(), a.lag)?;
    let emp = empirical_density(&returns, a.bins)?;
    let horizon = a.lag as f64 * s.resolution();
    let spec = ReturnDistSpec::new(params, horizon, a.mu)?;
    art.notes.push(format!("returns: {} horizon: {horizon} bin_width: {}", returns.len(), emp.bin_width));
    use rayon::prelude::*;
    let model: Vec<f64> = emp
        .bin_centers
        .par_iter()
        .map(|&r| return_pdf_quadrature(r, &spec))
        .collect::<crate::Result<_>>()?;
    let rows = (0..emp.bin_centers.len()).map(|i| vec![num(emp.bin_centers[i]), num(emp.densities[i]), num(model[i])]);
    art.csv(&["bin_center", "empirical_density", "model_pdf"], rows)?;
    art.write(&a.out, stdout, stderr)
}

fn pricing_options(p: &PricingFlags) -> PricingOptions {
    PricingOptions { alpha_mode: p.alpha.into(), rel_tol: p.gh_tol, ..Default::default() }
}

fn price(a: PriceArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let params = a.params.resolve()?;
    let option = OptionSpec::new(a.spot, a.strike, a.pricing.rate, a.tau, a.pricing.sigma_t)?;
    let opts = pricing_options(&a.pricing);
    #[derive(Serialize)]
    struct Resolved<'a> {
        params: VolatilityParams,
        args: &'a PriceArgs,
    }
    let mut art = Artifact::new("price", &Resolved { params, args: &a })?;
    art.notes.push(format!("note: {RISK_NEUTRAL_CAVEAT}"));
    let ap = AlphaParams::new(&params, a.tau);
    let alpha2 = alpha_squared(&ap, opts.alpha_mode)?;
    if opts.alpha_mode == AlphaMode::Approx {
        if let Some(w) = alpha_approx_warning(&ap) {
            art.notes.push(format!("warning: {w}"));
        }
    }
    let (kind, bs, mixture, closed) = if a.put {
        (
            "put",
            black_scholes_put(&option),
            fractional_put_price_with(&option, &params, &opts)?,
            f64::NAN,
        )
    } else {
        (
            "call",
            black_scholes_call(&option),
            fractional_call_price_with(&option, &params, &opts)?,
            fractional_call_closed_with(&option, &params, opts.alpha_mode, MForm::Erfc)?,
        )
    };
    let iv = if a.put {
        // Parity maps the put to the call with the same implied volatility.
        let call = mixture + option.spot - option.discounted_strike();
        implied_volatility(call, &option).map(|v| v.sigma).unwrap_or(f64::NAN)
    } else {
        implied_volatility(mixture, &option).map(|v| v.sigma).unwrap_or(f64::NAN)
    };
    let row = vec![
        kind.to_string(),
        num(a.spot),
        num(a.strike),
        num(a.pricing.rate),
        num(a.tau),
        num(a.pricing.sigma_t),
        num(alpha2),
        num(mixture),
        num(closed),
        num(bs),
        num(iv),
    ];
    art.csv(
        &["kind", "spot", "strike", "rate", "tau", "sigma_t", "alpha2", "price", "price_closed", "bs_price", "implied_vol"],
        [row],
    )?;
    art.write(&a.out, stdout, stderr)
}

fn smile(a: SmileArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let params = a.params.resolve()?;
    let taus = parse_grid(&a.tau_grid)?;
    let ms = parse_grid(&a.moneyness_grid)?;
    let opts = pricing_options(&a.pricing);
    #[derive(Serialize)]
    struct Resolved<'a> {
        params: VolatilityParams,
        args: &'a SmileArgs,
    }
    let mut art = Artifact::new("smile", &Resolved { params, args: &a })?;
    art.notes.push(format!("note: {RISK_NEUTRAL_CAVEAT}"));
    if opts.alpha_mode == AlphaMode::Approx {
        if let Some(w) = taus.iter().find_map(|&t| alpha_approx_warning(&AlphaParams::new(&params, t))) {
            art.notes.push(format!("warning: {w}"));
        }
    }
    let cells = implied_vol_surface(&params, a.pricing.sigma_t, a.pricing.rate, &taus, &ms, &opts)?;
    art.csv(
        &["tau", "moneyness", "price", "implied_vol"],
        cells.iter().map(|c| vec![num(c.tau), num(c.moneyness), num(c.price), num(c.implied_vol)]),
    )?;
    art.write(&a.out, stdout, stderr)
}
