//! European call pricing under the fractional-volatility model.
//!
//! Prices assume risk-neutral valuation. That assumption is not accurate for
//! this model: the volatility driver is not a semimartingale, so the numbers
//! are an approximation to be labelled as such.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussHermite;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_with_points, Tolerance};
use crate::special::{erfc, norm_cdf, norm_pdf};
use crate::volatility::VolatilityParams;

pub const RISK_NEUTRAL_CAVEAT: &str =
    "prices assume risk-neutral valuation, which is only an approximation for fractional-noise volatility";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub spot: f64,
    pub strike: f64,
    pub rate: f64,
    /// Time to expiry T − t.
    pub tau: f64,
    pub sigma_t: f64,
}

impl OptionSpec {
    pub fn new(spot: f64, strike: f64, rate: f64, tau: f64, sigma_t: f64) -> Result<Self> {
        let o = OptionSpec { spot, strike, rate, tau, sigma_t };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("spot", self.spot), ("strike", self.strike), ("tau", self.tau), ("sigma_t", self.sigma_t)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be > 0")));
            }
        }
        if !self.rate.is_finite() {
            return Err(Error::param("rate", "must be finite"));
        }
        Ok(())
    }

    pub fn with_sigma(self, sigma_t: f64) -> Self {
        OptionSpec { sigma_t, ..self }
    }

    pub fn discounted_strike(&self) -> f64 {
        self.strike * (-self.rate * self.tau).exp()
    }

    /// (a, b) with a + b = d₁ and a − b = d₂.
    pub fn ab(&self) -> (f64, f64) {
        let st = self.tau.sqrt();
        let a = ((self.spot / self.strike).ln() / st + self.rate * st) / self.sigma_t;
        let b = 0.5 * self.sigma_t * st;
        (a, b)
    }
}

/// S·Φ(d₁) − Ke^{−rτ}·Φ(d₂).
pub fn black_scholes_call(option: &OptionSpec) -> f64 {
    let (a, b) = option.ab();
    option.spot * norm_cdf(a + b) - option.discounted_strike() * norm_cdf(a - b)
}

pub fn black_scholes_put(option: &OptionSpec) -> f64 {
    let (a, b) = option.ab();
    option.discounted_strike() * norm_cdf(b - a) - option.spot * norm_cdf(-a - b)
}

pub fn black_scholes_vega(option: &OptionSpec) -> f64 {
    let (a, b) = option.ab();
    option.spot * norm_pdf(a + b) * option.tau.sqrt()
}

/// N(a, b) = (1/√2π) ∫_{−1}^{∞} exp(−y²(a+b)²/2) dy by direct quadrature.
pub fn integral_n(a: f64, b: f64) -> Result<f64> {
    let c = a + b;
    if c == 0.0 {
        return Err(Error::Singular("N(a, b) diverges for a + b = 0".into()));
    }
    let c2 = c * c;
    let f = |y: f64| (-0.5 * y * y * c2).exp();
    let tol = Tolerance { abs: 0.0, rel: 1e-13, max_intervals: 2000 };
    // Finite part plus [0, ∞) mapped through y = s/(1 − s).
    let head = integrate(f, -1.0, 0.0, tol)?.value;
    let tail = integrate(|s: f64| if s >= 1.0 { 0.0 } else { f(s / (1.0 - s)) / ((1.0 - s) * (1.0 - s)) }, 0.0, 1.0, tol)?.value;
    Ok((head + tail) / (2.0 * PI).sqrt())
}

/// Call price in the form S(a+b)N(a,b) − Ke^{−rτ}(a−b)N(a,−b), with N by quadrature.
pub fn black_scholes_call_integral_form(option: &OptionSpec) -> Result<f64> {
    let (a, b) = option.ab();
    Ok(option.spot * (a + b) * integral_n(a, b)? - option.discounted_strike() * (a - b) * integral_n(a, -b)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaParams {
    pub k: f64,
    pub delta: f64,
    pub hurst: f64,
    pub tau: f64,
}

impl AlphaParams {
    pub fn new(params: &VolatilityParams, tau: f64) -> Self {
        AlphaParams { k: params.k(), delta: params.delta(), hurst: params.hurst(), tau }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    Exact,
    #[default]
    Approx,
}

impl std::str::FromStr for AlphaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(AlphaMode::Exact),
            "approx" => Ok(AlphaMode::Approx),
            _ => Err(Error::param("alpha_mode", format!("unknown mode `{s}`"))),
        }
    }
}

/// Variance α² of the mean log-volatility over [t, T] given log σ_t.
pub fn alpha_squared(p: &AlphaParams, mode: AlphaMode) -> Result<f64> {
    if !(p.tau > 0.0) {
        return Err(Error::param("tau", "must be > 0"));
    }
    if !(p.delta > 0.0) {
        return Err(Error::param("delta", "must be > 0"));
    }
    crate::fbm::check_hurst(p.hurst)?;
    if !(p.k >= 0.0) {
        return Err(Error::param("k", "must be ≥ 0"));
    }
    let (k, d, h, tau) = (p.k, p.delta, p.hurst, p.tau);
    match mode {
        AlphaMode::Exact => {
            if tau < d {
                return Err(Error::param("tau", format!("exact α² needs τ ≥ δ ({tau} < {d})")));
            }
            let h1 = 2.0 * h + 1.0;
            let h2 = 2.0 * h + 2.0;
            let i1 = 2.0 / (h1 * h2)
                * ((tau + d).powf(h2) + (tau - d).powf(h2) - 2.0 * tau.powf(h2) - 2.0 * d.powf(h2));
            let i2 = (2.0 * tau.powf(h1) - (tau + d).powf(h1) - (tau - d).powf(h1)) / h1;
            Ok(k * k / (d * d * tau) * (i1 / (2.0 * tau) + i2) + k * k * d.powf(2.0 * h - 2.0))
        }
        AlphaMode::Approx => {
            if tau < 2.0 * d {
                return Err(Error::param("tau", format!("approximate α² needs τ ≥ 2δ ({tau} < {})", 2.0 * d)));
            }
            Ok(k * k * d.powf(2.0 * h - 2.0) * (1.0 - (2.0 * h - 1.0) * (d / tau).powf(2.0 - 2.0 * h)))
        }
    }
}

/// Warning text when the approximation is used with τ < 10δ.
pub fn alpha_approx_warning(p: &AlphaParams) -> Option<String> {
    (p.tau < 10.0 * p.delta).then(|| {
        format!("approximate α² assumes δ ≪ τ; τ = {} is below 10δ = {}", p.tau, 10.0 * p.delta)
    })
}

/// α² from a midpoint double sum of the covariance of
/// X(s) = B(s) − B(0) − B(s−δ) + B(−δ), scaled by k²/(δ²τ²).
pub fn alpha_squared_riemann(p: &AlphaParams, n: usize) -> f64 {
    let (d, h, tau) = (p.delta, p.hurst, p.tau);
    let cov = |s: f64, t: f64| 0.5 * (s.abs().powf(2.0 * h) + t.abs().powf(2.0 * h) - (s - t).abs().powf(2.0 * h));
    let dx = tau / n as f64;
    let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dx).collect();
    let total: f64 = grid
        .par_iter()
        .map(|&s| {
            let ps = [(s, 1.0), (0.0, -1.0), (s - d, -1.0), (-d, 1.0)];
            grid.iter()
                .map(|&u| {
                    let pu = [(u, 1.0), (0.0, -1.0), (u - d, -1.0), (-d, 1.0)];
                    let mut c = 0.0;
                    for (x, wx) in ps {
                        for (y, wy) in pu {
                            c += wx * wy * cov(x, y);
                        }
                    }
                    c
                })
                .sum::<f64>()
        })
        .sum();
    p.k * p.k / (d * d * tau * tau) * total * dx * dx
}

/// Gaussian density of ξ = mean log-volatility given log σ_t.
pub fn mean_vol_density(xi: f64, log_sigma_t: f64, alpha2: f64) -> Result<f64> {
    if !(alpha2 > 0.0) {
        return Err(Error::param("alpha2", "must be > 0 (α → 0 is a point mass)"));
    }
    let z = xi - log_sigma_t;
    Ok((-0.5 * z * z / alpha2).exp() / (2.0 * PI * alpha2).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingOptions {
    pub alpha_mode: AlphaMode,
    pub initial_nodes: usize,
    pub max_nodes: usize,
    /// Stop doubling when successive Gauss–Hermite values differ by less than this (relative).
    pub rel_tol: f64,
}

impl Default for PricingOptions {
    fn default() -> Self {
        PricingOptions { alpha_mode: AlphaMode::Approx, initial_nodes: 64, max_nodes: 1024, rel_tol: 1e-8 }
    }
}

type Rule = Arc<Vec<(f64, f64)>>;

fn hermite_rule(n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(r) = cache.lock().expect("rule cache").get(&n) {
        return r.clone();
    }
    let rule = GaussHermite::new(NonZeroUsize::new(n).expect("n ≥ 1"));
    let pairs: Rule = Arc::new(rule.iter().map(|(x, w)| (*x, *w)).collect());
    cache.lock().expect("rule cache").insert(n, pairs.clone());
    pairs
}

/// E[f(ξ)] for ξ ~ N(m, α²) with Gauss–Hermite rules of doubling size.
/// `scale` sets an absolute floor on the tolerance: prices far below an ulp of
/// the spot or strike cannot converge relatively.
fn gauss_hermite_expectation<F: Fn(f64) -> f64>(
    f: F,
    m: f64,
    alpha: f64,
    scale: f64,
    opts: &PricingOptions,
) -> Result<f64> {
    let eval = |n: usize| {
        let s: f64 = hermite_rule(n).iter().map(|&(x, w)| w * f(m + std::f64::consts::SQRT_2 * alpha * x)).sum();
        s / PI.sqrt()
    };
    let mut n = opts.initial_nodes.max(1);
    let floor = 4.0 * f64::EPSILON * scale;
    let mut prev = eval(n);
    let mut diff = f64::NAN;
    while n * 2 <= opts.max_nodes {
        n *= 2;
        let cur = eval(n);
        diff = (cur - prev).abs();
        if diff <= opts.rel_tol * cur.abs() + floor {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureNonConvergence { value: prev, error: diff, intervals: n })
}

fn alpha_for(option: &OptionSpec, params: &VolatilityParams, mode: AlphaMode) -> Result<f64> {
    Ok(alpha_squared(&AlphaParams::new(params, option.tau), mode)?.sqrt())
}

/// Black–Scholes averaged over the conditional law of the mean log-volatility.
pub fn fractional_call_price(option: &OptionSpec, params: &VolatilityParams) -> Result<f64> {
    fractional_call_price_with(option, params, &PricingOptions::default())
}

pub fn fractional_call_price_with(option: &OptionSpec, params: &VolatilityParams, opts: &PricingOptions) -> Result<f64> {
    option.validate()?;
    if params.k() == 0.0 {
        return Ok(black_scholes_call(option));
    }
    let alpha = alpha_for(option, params, opts.alpha_mode)?;
    let scale = option.spot.max(option.discounted_strike());
    gauss_hermite_expectation(|xi| black_scholes_call(&option.with_sigma(xi.exp())), option.sigma_t.ln(), alpha, scale, opts)
}

pub fn fractional_put_price_with(option: &OptionSpec, params: &VolatilityParams, opts: &PricingOptions) -> Result<f64> {
    option.validate()?;
    if params.k() == 0.0 {
        return Ok(black_scholes_put(option));
    }
    let alpha = alpha_for(option, params, opts.alpha_mode)?;
    let scale = option.spot.max(option.discounted_strike());
    gauss_hermite_expectation(|xi| black_scholes_put(&option.with_sigma(xi.exp())), option.sigma_t.ln(), alpha, scale, opts)
}

pub fn fractional_put_price(option: &OptionSpec, params: &VolatilityParams) -> Result<f64> {
    fractional_put_price_with(option, params, &PricingOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MForm {
    DoubleIntegral,
    #[default]
    Erfc,
}

/// M(α, a, b). The erfc form is evaluated as a Cauchy principal value when
/// a·x + b/x changes sign; the double-integral form requires a, b ≥ 0.
pub fn m_function(alpha: f64, a: f64, b: f64, form: MForm) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", "must be > 0"));
    }
    if a == 0.0 && b == 0.0 {
        return Err(Error::InvalidInput("M(α, 0, 0): the y-integral diverges".into()));
    }
    match form {
        MForm::Erfc => m_erfc(alpha, a, b),
        MForm::DoubleIntegral => m_double(alpha, a, b),
    }
}

/// True when a·x + b/x changes sign on (0, ∞), so the erfc form is a principal value.
pub fn m_requires_principal_value(a: f64, b: f64) -> bool {
    a * b < 0.0
}

fn m_erfc(alpha: f64, a: f64, b: f64) -> Result<f64> {
    let pref = (2.0 / PI).sqrt() / (4.0 * alpha);
    // Numerator of the integrand in t = log x; the denominator is a + b·e^{−2t}.
    let g = |t: f64| {
        let w = (-0.5 * t * t / (alpha * alpha)).exp();
        if w == 0.0 {
            return 0.0;
        }
        w * erfc(-(a * t.exp() + b * (-t).exp()) * FRAC_1_SQRT_2)
    };
    let h = |t: f64| {
        let n = g(t);
        if n == 0.0 {
            0.0
        } else {
            n / (a + b * (-2.0 * t).exp())
        }
    };
    // When |a| ≪ |b| the integrand grows like e^{2t} until the Gaussian wins near t = 2α².
    let (lo, hi) = (-9.5 * alpha, 9.5 * alpha + 2.0 * alpha * alpha);
    let marks = [-3.0 * alpha, -alpha, 0.0, alpha, 3.0 * alpha, 2.0 * alpha * alpha];
    let tol = Tolerance { abs: 0.0, rel: 1e-13, max_intervals: 4000 };
    let piece = |x0: f64, x1: f64| -> Result<f64> {
        if x1 <= x0 {
            return Ok(0.0);
        }
        let pts: Vec<f64> = marks.iter().copied().filter(|&m| m > x0 && m < x1).collect();
        Ok(integrate_with_points(h, x0, x1, &pts, tol)?.value)
    };
    if !m_requires_principal_value(a, b) {
        return Ok(pref * piece(lo, hi)?);
    }
    let t0 = 0.5 * (-b / a).ln();
    let s = alpha.min(1.0);
    if t0 < lo - s || t0 > hi + s {
        // The Gaussian weight is negligible long before the pole.
        return Ok(pref * piece(lo, hi)?);
    }
    // Principal value by folding about the pole. With D(t0 ± u) written through
    // expm1, h(t0+u) + h(t0−u) = (g(t0+u)e^{2u} − g(t0−u)) / (a·expm1(2u)).
    let u_min = 1e-7 * s;
    let fold = |u: f64| {
        let u = u.max(u_min);
        (g(t0 + u) * (2.0 * u).exp() - g(t0 - u)) / (a * (2.0 * u).exp_m1())
    };
    let folded = integrate(fold, 0.0, s, tol)?.value;
    let left = piece(lo.min(t0 - s), t0 - s)?;
    let right = piece(t0 + s, hi.max(t0 + s))?;
    Ok(pref * (folded + left + right))
}

fn m_double(alpha: f64, a: f64, b: f64) -> Result<f64> {
    if a < 0.0 || b < 0.0 {
        return Err(Error::Singular(format!(
            "double-integral form needs a·x + b/x > 0 for all x; got a = {a}, b = {b}"
        )));
    }
    let (lo, hi) = (-9.5 * alpha, 9.5 * alpha + alpha * alpha);
    let tol = Tolerance { abs: 0.0, rel: 1e-11, max_intervals: 2000 };
    let mut err = None;
    let inner = |y: f64| {
        let y2 = y * y;
        integrate_with_points(
            |t: f64| {
                let c = a * t.exp() + b * (-t).exp();
                (t - 0.5 * t * t / (alpha * alpha) - 0.5 * y2 * c * c).exp()
            },
            lo,
            hi,
            &[-alpha, 0.0, alpha],
            tol,
        )
        .map(|r| r.value)
    };
    let mut f = |y: f64| match inner(y) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let head = integrate(&mut f, -1.0, 0.0, tol)?.value;
    let tail = integrate(|s: f64| if s >= 1.0 { 0.0 } else { f(s / (1.0 - s)) / ((1.0 - s) * (1.0 - s)) }, 0.0, 1.0, tol)?.value;
    if let Some(e) = err {
        return Err(e);
    }
    Ok((head + tail) / (2.0 * PI * alpha))
}

/// Closed-form price S[aM(α,a,b) + bM(α,b,a)] − Ke^{−rτ}[aM(α,a,−b) − bM(α,−b,a)].
pub fn fractional_call_closed(option: &OptionSpec, params: &VolatilityParams) -> Result<f64> {
    fractional_call_closed_with(option, params, AlphaMode::Approx, MForm::Erfc)
}

pub fn fractional_call_closed_with(
    option: &OptionSpec,
    params: &VolatilityParams,
    mode: AlphaMode,
    form: MForm,
) -> Result<f64> {
    option.validate()?;
    let alpha = alpha_for(option, params, mode)?;
    if alpha == 0.0 {
        return Ok(black_scholes_call(option));
    }
    let (a, b) = option.ab();
    let m = |x: f64, y: f64| m_function(alpha, x, y, form);
    let call_leg = a * m(a, b)? + b * m(b, a)?;
    let strike_leg = a * m(a, -b)? - b * m(-b, a)?;
    Ok(option.spot * call_leg - option.discounted_strike() * strike_leg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpliedVol {
    pub sigma: f64,
    pub iterations: usize,
    /// |BS(σ) − price| at return.
    pub price_error: f64,
}

const IV_LO: f64 = 1e-6;
const IV_HI: f64 = 10.0;
const IV_HI_CAP: f64 = 1e4;
const IV_MAX_ITER: usize = 300;

/// Black–Scholes volatility reproducing `price`; `option.sigma_t` is ignored.
pub fn implied_volatility(price: f64, option: &OptionSpec) -> Result<ImpliedVol> {
    let base = option.with_sigma(1.0);
    base.validate()?;
    let lower = (option.spot - option.discounted_strike()).max(0.0);
    if !(price > lower && price < option.spot) {
        return Err(Error::param(
            "price",
            format!("{price} is outside the no-arbitrage interval ({lower}, {})", option.spot),
        ));
    }
    let f = |s: f64| black_scholes_call(&base.with_sigma(s)) - price;
    let (mut lo, mut hi) = (IV_LO, IV_HI);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > IV_HI_CAP {
            return Err(Error::NoConvergence { iterations: 0, residual: f(hi) });
        }
    }
    if f(lo) > 0.0 {
        // Price below what σ = 1e−6 gives; bisect down towards zero.
        while f(lo) > 0.0 && lo > 1e-300 {
            hi = lo;
            lo *= 1e-3;
        }
    }
    let target = 1e-10 * option.spot;
    let mut s = 0.5 * (lo + hi);
    for it in 1..=IV_MAX_ITER {
        let v = f(s);
        if v.abs() < target && (hi - lo) < 1e-6 * s.max(1e-12) || v == 0.0 {
            return Ok(ImpliedVol { sigma: s, iterations: it, price_error: v.abs() });
        }
        if v > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let vega = black_scholes_vega(&base.with_sigma(s));
        let newton = s - v / vega;
        s = if vega > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi {
            let v = f(s);
            if v.abs() < target {
                return Ok(ImpliedVol { sigma: s, iterations: it, price_error: v.abs() });
            }
            return Err(Error::NoConvergence { iterations: it, residual: v });
        }
    }
    Err(Error::NoConvergence { iterations: IV_MAX_ITER, residual: f(s) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceCell {
    pub tau: f64,
    pub moneyness: f64,
    pub price: f64,
    pub implied_vol: f64,
}

/// Fractional prices and their implied volatilities over τ × S/K, strike 1.
pub fn implied_vol_surface(
    params: &VolatilityParams,
    sigma_t: f64,
    rate: f64,
    tau_grid: &[f64],
    moneyness_grid: &[f64],
    opts: &PricingOptions,
) -> Result<Vec<SurfaceCell>> {
    let cells: Vec<(f64, f64)> = tau_grid.iter().flat_map(|&t| moneyness_grid.iter().map(move |&m| (t, m))).collect();
    cells
        .par_iter()
        .map(|&(tau, moneyness)| {
            let option = OptionSpec::new(moneyness, 1.0, rate, tau, sigma_t)?;
            let price = fractional_call_price_with(&option, params, opts)?;
            let implied_vol = if params.k() == 0.0 { sigma_t } else { implied_volatility(price, &option)?.sigma };
            Ok(SurfaceCell { tau, moneyness, price, implied_vol })
        })
        .collect()
}
