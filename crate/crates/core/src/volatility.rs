//! Induced volatility, integrated log-volatility, scaling exponents and calibration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use rand_distr::{Distribution, StandardNormal};

use crate::fbm::{check_hurst, FbmGenerator, FbmMethod};
use crate::rng::{RngSeed, Stream};
use crate::quad::{integrate, Tolerance};
use crate::special::{digamma, trigamma};
use crate::timeseries::sample_variance;

/// Model parameter set. Serializes as `{"hurst", "k", "beta", "delta"}`; θ is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct VolatilityParams {
    hurst: f64,
    k: f64,
    beta: f64,
    delta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    hurst: f64,
    k: f64,
    beta: f64,
    delta: f64,
}

impl TryFrom<RawParams> for VolatilityParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        VolatilityParams::new(r.hurst, r.k, r.beta, r.delta)
    }
}

impl From<VolatilityParams> for RawParams {
    fn from(p: VolatilityParams) -> Self {
        RawParams { hurst: p.hurst, k: p.k, beta: p.beta, delta: p.delta }
    }
}

impl VolatilityParams {
    pub fn new(hurst: f64, k: f64, beta: f64, delta: f64) -> Result<Self> {
        check_hurst(hurst)?;
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::param("k", format!("{k} must be ≥ 0")));
        }
        if !beta.is_finite() {
            return Err(Error::param("beta", "must be finite"));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::param("delta", format!("{delta} must be > 0")));
        }
        Ok(VolatilityParams { hurst, k, beta, delta })
    }

    /// The published NYSE daily fit (H=0.83, k=0.59, β=−5, δ=1). A reference
    /// point for reproducing the model curves, not a statement about current data.
    pub fn nyse_daily() -> Self {
        VolatilityParams { hurst: 0.83, k: 0.59, beta: -5.0, delta: 1.0 }
    }

    /// Named presets: `nyse-daily` (alias `nyse-preset`).
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "nyse-daily" | "nyse-preset" => Some(Self::nyse_daily()),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("params serialize")
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn theta(&self) -> f64 {
        self.beta.exp()
    }

    /// Variance of log σ at resolution δ: k²δ^{2H−2}.
    pub fn logvol_variance(&self) -> f64 {
        self.k * self.k * self.delta.powf(2.0 * self.hurst - 2.0)
    }

    /// C = 8k²δ^{2H−2}.
    pub fn c_const(&self) -> f64 {
        8.0 * self.logvol_variance()
    }

    pub fn with_k(self, k: f64) -> Result<Self> {
        Self::new(self.hurst, k, self.beta, self.delta)
    }
    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self::new(self.hurst, self.k, beta, self.delta)
    }
    pub fn with_delta(self, delta: f64) -> Result<Self> {
        Self::new(self.hurst, self.k, self.beta, delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolatilitySeries {
    pub timestamps: Vec<f64>,
    /// `None` marks a window whose variance was zero.
    pub sigma: Vec<Option<f64>>,
    /// Window length in points.
    pub window: usize,
    pub stride: usize,
}

impl VolatilitySeries {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn missing(&self) -> usize {
        self.sigma.iter().filter(|s| s.is_none()).count()
    }

    pub fn valid(&self) -> impl Iterator<Item = f64> + '_ {
        self.sigma.iter().flatten().copied()
    }
}

/// Trailing-window volatility: σ_t² is the mean squared log increment inside
/// the `window`-point window ending at t, per unit time. One point every `stride`.
pub fn induced_volatility_strided(
    logprice: &[f64],
    resolution: f64,
    window: usize,
    stride: usize,
) -> Result<VolatilitySeries> {
    if window < 2 {
        return Err(Error::param("window", "must be ≥ 2"));
    }
    if window > logprice.len() {
        return Err(Error::param("window", format!("{window} exceeds the series length {}", logprice.len())));
    }
    if stride == 0 {
        return Err(Error::param("stride", "must be ≥ 1"));
    }
    if !(resolution > 0.0) {
        return Err(Error::param("resolution", "must be > 0"));
    }
    let span = (window - 1) as f64 * resolution;
    let mut timestamps = Vec::new();
    let mut sigma = Vec::new();
    let mut end = window - 1;
    while end < logprice.len() {
        let w = &logprice[end + 1 - window..=end];
        let ss: f64 = w.windows(2).map(|p| (p[1] - p[0]) * (p[1] - p[0])).sum();
        timestamps.push(end as f64 * resolution);
        sigma.push(if ss > 0.0 { Some((ss / span).sqrt()) } else { None });
        end += stride;
    }
    Ok(VolatilitySeries { timestamps, sigma, window, stride })
}

pub fn induced_volatility(logprice: &[f64], resolution: f64, window: usize) -> Result<VolatilitySeries> {
    induced_volatility_strided(logprice, resolution, window, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogVolDecomposition {
    pub beta_hat: f64,
    pub residual: Vec<f64>,
    /// Step counts n = 1, 2, … of the non-missing points.
    pub times: Vec<f64>,
    pub skipped: usize,
}

/// Y_n = Σ_{j≤n} log σ_j = β̂·n + R(n), with β̂ fitted by least squares through the origin.
pub fn integrated_logvol(vol: &VolatilitySeries) -> Result<LogVolDecomposition> {
    let logs: Vec<f64> = vol.valid().map(f64::ln).collect();
    if logs.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "integrated log-volatility needs ≥ 3 non-missing points, got {}",
            logs.len()
        )));
    }
    let mut y = Vec::with_capacity(logs.len());
    let mut acc = 0.0;
    for l in &logs {
        acc += l;
        y.push(acc);
    }
    let times: Vec<f64> = (1..=y.len()).map(|n| n as f64).collect();
    let beta_hat = slope_through_origin(&times, &y);
    let residual = times.iter().zip(&y).map(|(t, y)| y - beta_hat * t).collect();
    Ok(LogVolDecomposition { beta_hat, residual, times, skipped: vol.missing() })
}

pub(crate) fn slope_through_origin(x: &[f64], y: &[f64]) -> f64 {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    sxy / sxx
}

/// Ordinary least-squares slope of y on x.
pub(crate) fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    /// mean |x(t+Δ) − x(t)|
    #[default]
    Increments,
    /// mean |(x(t+Δ) − x(t)) / x(t)|
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LagStat {
    pub lag: usize,
    pub mean_abs: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub hurst: f64,
    pub table: Vec<LagStat>,
}

pub const DEFAULT_SCALING_LAGS: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];
pub const CALIBRATION_LAGS: [usize; 7] = [2, 4, 8, 16, 32, 64, 128];

/// Structure-function exponent: least-squares slope of log m(Δ) on log Δ.
pub fn scaling_exponent(x: &[f64], lags: &[usize], mode: ScalingMode) -> Result<ScalingFit> {
    if lags.len() < 3 {
        return Err(Error::param("lags", "need at least 3 lags"));
    }
    let max_lag = *lags.iter().max().expect("non-empty");
    if lags.contains(&0) {
        return Err(Error::param("lags", "lags must be ≥ 1"));
    }
    if max_lag * 4 > x.len() {
        return Err(Error::param("lags", format!("largest lag {max_lag} exceeds a quarter of the length {}", x.len())));
    }
    let mut table = Vec::with_capacity(lags.len());
    for &lag in lags {
        let mut sum = 0.0;
        for (a, b) in x.iter().zip(&x[lag..]) {
            let d = (b - a).abs();
            sum += match mode {
                ScalingMode::Increments => d,
                ScalingMode::Relative => {
                    if *a == 0.0 {
                        return Err(Error::Degenerate("relative increment with x(t) = 0".into()));
                    }
                    d / a.abs()
                }
            };
        }
        let count = x.len() - lag;
        let mean_abs = sum / count as f64;
        if !(mean_abs > 0.0) {
            return Err(Error::Degenerate(format!("mean increment is zero at lag {lag}")));
        }
        table.push(LagStat { lag, mean_abs, count });
    }
    let lx: Vec<f64> = table.iter().map(|s| (s.lag as f64).ln()).collect();
    let ly: Vec<f64> = table.iter().map(|s| s.mean_abs.ln()).collect();
    Ok(ScalingFit { hurst: ols_slope(&lx, &ly), table })
}

/// Covariance of e_t = ½ log(χ²_ν/ν) and e_{t+L} when the two windows share
/// ν − L of their ν squared Gaussian terms.
pub fn log_chi2_autocovariance(nu: usize, lag: usize) -> Result<f64> {
    if nu == 0 {
        return Err(Error::param("nu", "must be ≥ 1"));
    }
    if lag >= nu {
        return Ok(0.0);
    }
    if lag == 0 {
        return Ok(0.25 * trigamma(nu as f64 / 2.0));
    }
    frullani_covariance(nu, lag)
}

fn frullani_covariance(nu: usize, lag: usize) -> Result<f64> {
    // Cov(log X, log Y) = ∫∫ Cov(e^{−sX}, e^{−tY}) ds dt /(s t), in x = log s, y = log t.
    let a = (nu - lag) as f64 / 2.0;
    let b = lag as f64 / 2.0;
    let lo = -38.0;
    let hi = 80.0 / nu as f64 + 5.0;
    let tol = Tolerance::new(1e-13, 1e-10);
    let inner = |x: f64| -> f64 {
        let s2 = 2.0 * x.exp();
        let ps = (1.0 + s2).ln();
        integrate(
            |y: f64| {
                let t2 = 2.0 * y.exp();
                let pt = (1.0 + t2).ln();
                let joint = (-b * (ps + pt) - a * (1.0 + s2 + t2).ln()).exp();
                let indep = (-(a + b) * (ps + pt)).exp();
                joint - indep
            },
            lo,
            hi,
            tol,
        )
        .map(|r| r.value)
        .unwrap_or(f64::NAN)
    };
    let r = integrate(inner, lo, hi, tol)?;
    if !r.value.is_finite() {
        return Err(Error::QuadratureNonConvergence { value: r.value, error: r.error, intervals: r.intervals });
    }
    Ok(0.25 * r.value)
}

/// Law of log σ̂ for one window under the compensated model with β = 0:
/// ½·log(mean_i e^{2√v·g_i} Z_i²) − v/2, g unit fGn over the ν window steps.
/// Mean and variance come from a fixed-seed sample shared across v, with the
/// exact v = 0 values as control variates.
struct WindowedLogVol {
    nu: usize,
    g: Vec<f64>,
    z2: Vec<f64>,
    mean0: f64,
    var0: f64,
}

const WINDOW_SAMPLES: usize = 1 << 15;

impl WindowedLogVol {
    fn new(nu: usize, hurst: f64) -> Result<Self> {
        let gen = FbmGenerator::new(nu, hurst, FbmMethod::Cholesky)?;
        let mut rng = RngSeed(0x5eed_1a7e).rng(Stream::Fbm);
        let mut g = Vec::with_capacity(WINDOW_SAMPLES * nu);
        let mut z2 = Vec::with_capacity(WINDOW_SAMPLES * nu);
        for _ in 0..WINDOW_SAMPLES {
            g.extend(gen.sample_noise(&mut rng));
            for _ in 0..nu {
                let z: f64 = StandardNormal.sample(&mut rng);
                z2.push(z * z);
            }
        }
        let nh = nu as f64 / 2.0;
        Ok(WindowedLogVol { nu, g, z2, mean0: 0.5 * (digamma(nh) - nh.ln()), var0: 0.25 * trigamma(nh) })
    }

    fn sample_moments(&self, v: f64) -> (f64, f64) {
        let a = 2.0 * v.sqrt();
        let n = WINDOW_SAMPLES as f64;
        let (mut s1, mut s2) = (0.0, 0.0);
        for (g, z2) in self.g.chunks_exact(self.nu).zip(self.z2.chunks_exact(self.nu)) {
            let m: f64 = g.iter().zip(z2).map(|(g, z)| (a * g).exp() * z).sum::<f64>() / self.nu as f64;
            let l = 0.5 * m.ln();
            s1 += l;
            s2 += l * l;
        }
        let mean = s1 / n;
        (mean, (s2 / n - mean * mean) * n / (n - 1.0))
    }

    /// (E, Var) of log σ̂ − β at log-variance v.
    fn moments(&self, v: f64) -> (f64, f64) {
        let (m, s) = self.sample_moments(v);
        let (m0, s0) = self.sample_moments(0.0);
        (m - m0 + self.mean0 - 0.5 * v, s - s0 + self.var0)
    }

    fn mean_offset(&self, v: f64) -> f64 {
        self.moments(v).0
    }

    /// Smallest v ≥ 0 with Var(v) − v·loss = observed; 0 when the observed
    /// variance is at or below pure estimator noise.
    fn solve_variance(&self, observed: f64, loss: f64) -> f64 {
        let f = |v: f64| self.moments(v).1 - v * loss - observed;
        if f(0.0) >= 0.0 {
            return 0.0;
        }
        let mut hi = observed.max(0.1);
        while f(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e3 {
                return hi;
            }
        }
        let mut lo = 0.0;
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-10 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub window: usize,
    pub stride: usize,
    pub lags: Vec<usize>,
    /// Subtract the estimator noise of the windowed σ̂ from the scaling fit,
    /// the variance and the mean. Off reproduces the bare pipeline.
    pub noise_correction: bool,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { window: 5, stride: 1, lags: CALIBRATION_LAGS.to_vec(), noise_correction: true }
    }
}

impl CalibrationOptions {
    /// No estimator corrections, lags {1, 2, …, 64}.
    pub fn uncorrected(window: usize) -> Self {
        CalibrationOptions { window, stride: 1, lags: DEFAULT_SCALING_LAGS.to_vec(), noise_correction: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub params: VolatilityParams,
    /// Slope of log m(Δ) before any noise correction.
    pub raw_hurst: f64,
    /// True when the noise-corrected fit was used for H.
    pub hurst_corrected: bool,
    pub scaling: ScalingFit,
    pub beta_hat: f64,
    /// Sample variance of log σ̂.
    pub logvol_variance: f64,
    pub missing: usize,
    pub points: usize,
}

/// Calibrates with default options except for `window` and `lags`.
pub fn calibrate(logprice: &[f64], resolution: f64, window: usize, lags: &[usize]) -> Result<VolatilityParams> {
    let opts = CalibrationOptions { window, lags: lags.to_vec(), ..Default::default() };
    Ok(calibrate_with(logprice, resolution, &opts)?.params)
}

pub fn calibrate_with(logprice: &[f64], resolution: f64, opts: &CalibrationOptions) -> Result<CalibrationReport> {
    let vol = induced_volatility_strided(logprice, resolution, opts.window, opts.stride)?;
    let dec = integrated_logvol(&vol)?;
    let scaling = scaling_exponent(&dec.residual, &opts.lags, ScalingMode::Increments)?;
    let raw_hurst = scaling.hurst;
    let logs: Vec<f64> = vol.valid().map(f64::ln).collect();
    let variance = sample_variance(&logs);
    let delta = resolution;
    let nu = opts.window - 1;

    let (hurst, corrected, k2, beta) = if opts.noise_correction {
        let gammas: Vec<f64> = (0..nu).map(|l| log_chi2_autocovariance(nu, l)).collect::<Result<_>>()?;
        let gamma = |l: usize| gammas.get(l * opts.stride).copied().unwrap_or(0.0);
        let mut ly = Vec::new();
        for s in &scaling.table {
            let noise: f64 = (1 - s.lag as isize..s.lag as isize)
                .map(|l| (s.lag - l.unsigned_abs()) as f64 * gamma(l.unsigned_abs()))
                .sum();
            let m2 = s.mean_abs * s.mean_abs - 2.0 / std::f64::consts::PI * noise;
            if m2 <= 0.0 {
                ly.clear();
                break;
            }
            ly.push(0.5 * m2.ln());
        }
        let (h, ok) = if ly.is_empty() {
            (raw_hurst, false)
        } else {
            let lx: Vec<f64> = scaling.table.iter().map(|s| (s.lag as f64).ln()).collect();
            match ols_slope(&lx, &ly) {
                // A corrected slope at or past 1 means the noise swamped the signal.
                h if h.is_finite() && h < 1.0 => (h, true),
                _ => (raw_hurst, false),
            }
        };
        let h = h.clamp(1e-6, 1.0);
        let scale = delta.powf(2.0 * h - 2.0);
        let model = WindowedLogVol::new(nu, h)?;
        // Subtracting the sample mean of a long-memory series loses about v·n^{2H−2}.
        let span = (logs.len() * opts.stride) as f64;
        let v = model.solve_variance(variance, span.powf(2.0 * h - 2.0));
        let beta = dec.beta_hat - model.mean_offset(v);
        (h, ok, v / scale, beta)
    } else {
        let h = raw_hurst.clamp(1e-6, 1.0);
        let scale = delta.powf(2.0 * h - 2.0);
        let k2 = variance / scale;
        (h, false, k2, dec.beta_hat + 0.5 * k2 * scale)
    };
    Ok(CalibrationReport {
        params: VolatilityParams::new(hurst, k2.sqrt(), beta, delta)?,
        raw_hurst,
        hurst_corrected: corrected,
        scaling,
        beta_hat: dec.beta_hat,
        logvol_variance: variance,
        missing: vol.missing(),
        points: logs.len(),
    })
}
