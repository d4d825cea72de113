//! Return density of the model: quadrature, series and tail forms, plus the
//! component densities they are built from.
//!
//! With u = log x the density is
//! `P(r) = pref ∫ exp(u/2 − u²/C − λe^u) du`, `pref = 1/(4πθkδ^{H−1}√Δ)`,
//! `λ = (r − r₀)²/(2Δθ²)`, `C = 8k²δ^{2H−2}`, `r₀ = (μ − θ²/2)Δ`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_with_points, Tolerance};
use crate::special::{digamma, ln_gamma, zeta};
use crate::volatility::VolatilityParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnDistSpec {
    pub params: VolatilityParams,
    /// Δ
    pub lag: f64,
    pub mu: f64,
    pub r0: f64,
    pub c_const: f64,
}

impl ReturnDistSpec {
    pub fn new(params: VolatilityParams, lag: f64, mu: f64) -> Result<Self> {
        if !(lag > 0.0 && lag.is_finite()) {
            return Err(Error::param("lag", "must be > 0"));
        }
        if !mu.is_finite() {
            return Err(Error::param("mu", "must be finite"));
        }
        let theta = params.theta();
        Ok(ReturnDistSpec {
            params,
            lag,
            mu,
            r0: (mu - 0.5 * theta * theta) * lag,
            c_const: params.c_const(),
        })
    }

    pub fn lambda(&self, r: f64) -> f64 {
        let theta = self.params.theta();
        let d = r - self.r0;
        d * d / (2.0 * self.lag * theta * theta)
    }

    /// 1/(4πθkδ^{H−1}√Δ)
    pub fn prefactor(&self) -> f64 {
        let p = &self.params;
        1.0 / (4.0 * PI * p.theta() * p.k() * p.delta().powf(p.hurst() - 1.0) * self.lag.sqrt())
    }

    /// Closed form of P(r₀).
    pub fn peak(&self) -> f64 {
        let c = self.c_const;
        self.prefactor() * (PI * c).sqrt() * (c / 16.0).exp()
    }

    /// ∫(r − r₀)² P dr = Δθ²e^{C/4}.
    pub fn second_moment(&self) -> f64 {
        let t = self.params.theta();
        self.lag * t * t * (self.c_const / 4.0).exp()
    }

    /// Excess kurtosis 3(e^{C/2} − 1).
    pub fn excess_kurtosis(&self) -> f64 {
        3.0 * ((self.c_const / 2.0).exp() - 1.0)
    }

    fn require_k(&self) -> Result<()> {
        if self.params.k() > 0.0 {
            Ok(())
        } else {
            Err(Error::param("k", "must be > 0 for the mixture density (k = 0 is Gaussian)"))
        }
    }
}

/// Lognormal density of σ with log-mean β and log-variance k²δ^{2H−2}.
pub fn vol_marginal_density(sigma: f64, params: &VolatilityParams) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", "must be > 0"));
    }
    if params.k() == 0.0 {
        return Err(Error::param("k", "k = 0 is a point mass at θ"));
    }
    let s = params.k() * params.delta().powf(params.hurst() - 1.0);
    let z = (sigma.ln() - params.beta()) / s;
    Ok((-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * s * sigma))
}

/// Gaussian density of the log return given σ: mean (μ − σ²/2)Δ, variance σ²Δ.
pub fn conditional_return_density(r: f64, sigma: f64, spec: &ReturnDistSpec) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", "must be > 0"));
    }
    let mean = (spec.mu - 0.5 * sigma * sigma) * spec.lag;
    Ok(gaussian(r, mean, sigma * sigma * spec.lag))
}

fn gaussian(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / var).exp() / (2.0 * PI * var).sqrt()
}

/// Where each σ-component of the mixture is centered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixtureCenter {
    /// Every component at the spec's r₀ (the form the closed integral assumes).
    Common,
    /// Each component at its own (μ − σ²/2)Δ.
    PerSigma,
}

/// ∫ p_δ(σ) p_σ(r) dσ by direct quadrature over log σ.
pub fn mixture_density(r: f64, spec: &ReturnDistSpec, center: MixtureCenter) -> Result<f64> {
    spec.require_k()?;
    let p = &spec.params;
    let sd = p.logvol_variance().sqrt();
    let beta = p.beta();
    let lag = spec.lag;
    let f = |z: f64| {
        let y = beta + sd * z;
        let s2 = (2.0 * y).exp();
        let mean = match center {
            MixtureCenter::Common => spec.r0,
            MixtureCenter::PerSigma => (spec.mu - 0.5 * s2) * lag,
        };
        (-0.5 * z * z).exp() / (2.0 * PI).sqrt() * gaussian(r, mean, s2 * lag)
    };
    // Component most responsible for r: σ² ≈ (r − r₀)²/Δ, clipped to the lognormal bulk.
    let d = (r - spec.r0).abs();
    let zc = if d > 0.0 { (((d * d / lag).ln() * 0.5 - beta) / sd).clamp(-12.0, 12.0) } else { -12.0 };
    let pts = [zc - 1.0, zc, zc + 1.0];
    let res = integrate_with_points(f, -14.0, 14.0, &pts, Tolerance { abs: 0.0, rel: 1e-13, max_intervals: 4000 })?;
    Ok(res.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Relative tolerance on the u-integral.
    pub rel_tol: f64,
    /// Integration window: where the integrand has dropped by e^{-cutoff} from its peak.
    pub cutoff: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { rel_tol: 1e-12, cutoff: 45.0 }
    }
}

/// Maximizer of g(u) = u/2 − u²/C − λe^u (strictly concave).
fn g_argmax(lambda: f64, c: f64) -> f64 {
    let dg = |u: f64| 0.5 - 2.0 * u / c - lambda * u.exp();
    let mut hi = c / 4.0;
    if lambda == 0.0 {
        return hi;
    }
    let mut lo = hi.min(-lambda.ln()) - 1.0;
    while dg(lo) <= 0.0 {
        lo -= 2.0 * (hi - lo);
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..200 {
        let d = dg(u);
        if d == 0.0 {
            break;
        }
        if d > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let step = d / (-2.0 / c - lambda * u.exp());
        let next = u - step;
        u = if next >= lo && next <= hi { next } else { 0.5 * (lo + hi) };
        if step.abs() < 1e-15 * (1.0 + u.abs()) || hi - lo < 1e-15 * (1.0 + u.abs()) {
            break;
        }
    }
    u
}

/// ln P(r) by adaptive quadrature in u = log x.
pub fn return_log_pdf_quadrature(r: f64, spec: &ReturnDistSpec, opts: QuadratureOptions) -> Result<f64> {
    spec.require_k()?;
    let c = spec.c_const;
    let lambda = spec.lambda(r);
    let g = |u: f64| 0.5 * u - u * u / c - lambda * u.exp();
    let ustar = g_argmax(lambda, c);
    let gmax = g(ustar);
    let edge = |dir: f64| {
        let mut step = (c.sqrt()).max(1e-3);
        let mut far = ustar + dir * step;
        while gmax - g(far) < opts.cutoff {
            step *= 2.0;
            far = ustar + dir * step;
        }
        far
    };
    let (a, b) = (edge(-1.0), edge(1.0));
    let res = integrate_with_points(
        |u| (g(u) - gmax).exp(),
        a,
        b,
        &[ustar],
        Tolerance { abs: 0.0, rel: opts.rel_tol, max_intervals: 2000 },
    )?;
    Ok(spec.prefactor().ln() + gmax + res.value.ln())
}

pub fn return_pdf_quadrature(r: f64, spec: &ReturnDistSpec) -> Result<f64> {
    Ok(return_log_pdf_quadrature(r, spec, QuadratureOptions::default())?.exp())
}

/// Central moment ∫ (r − r₀)^order P(r) dr, integrated over x = |r − r₀| on a log scale.
pub fn central_moment(spec: &ReturnDistSpec, order: u32) -> Result<f64> {
    if order % 2 == 1 {
        return Ok(0.0);
    }
    spec.require_k()?;
    let scale = spec.params.theta() * spec.lag.sqrt();
    let sd = spec.params.logvol_variance().sqrt();
    let mut err = None;
    let f = |s: f64| {
        let x = scale * s.exp();
        match return_pdf_quadrature(spec.r0 + x, spec) {
            Ok(p) => 2.0 * p * x.powi(order as i32 + 1),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    // Mass lives where x ~ σ√Δ with log σ within a few sd of β; tails are exponentially small.
    let lo = -40.0;
    let hi = 14.0 * sd + 8.0;
    let res = integrate(f, lo, hi, Tolerance { abs: 0.0, rel: 1e-11, max_intervals: 2000 })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(res.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    /// Signed terms of the partial sum, n = 0, 1, …
    pub terms: Vec<f64>,
    /// Index of the first term whose magnitude is not below its predecessor.
    pub first_non_decreasing: Option<usize>,
    /// Index of the smallest-magnitude term among those computed.
    pub smallest_term: usize,
}

impl SeriesReport {
    pub fn diverging(&self) -> bool {
        self.first_non_decreasing.is_some()
    }
}

/// Taylor coefficients b_m of λ^{−z}Γ(z)/(λ^{−1/2}Γ(1/2)) about z = ½, m ≤ order.
fn gamma_power_coefficients(lambda: f64, order: usize) -> Vec<f64> {
    // log of the function: c1 ε + Σ_{j≥2} c_j ε^j
    let mut c = vec![0.0; order + 1];
    if order >= 1 {
        c[1] = digamma(0.5) - lambda.ln();
    }
    for (j, cj) in c.iter_mut().enumerate().skip(2) {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        *cj = sign * (2f64.powi(j as i32) - 1.0) * zeta(j as f64) / j as f64;
    }
    let mut b = vec![0.0; order + 1];
    b[0] = 1.0;
    for m in 1..=order {
        let s: f64 = (1..=m).map(|j| j as f64 * c[j] * b[m - j]).sum();
        b[m] = s / m as f64;
    }
    b
}

/// Partial sum of the expansion of e^{−u²/C} in the quadrature form, n_terms terms.
pub fn return_pdf_series(r: f64, spec: &ReturnDistSpec, n_terms: usize) -> Result<(f64, SeriesReport)> {
    spec.require_k()?;
    if n_terms == 0 {
        return Err(Error::param("n_terms", "must be ≥ 1"));
    }
    let lambda = spec.lambda(r);
    if !(lambda > 0.0) {
        return Err(Error::param("r", "the series needs λ > 0 (r ≠ r₀)"));
    }
    let c = spec.c_const;
    let b = gamma_power_coefficients(lambda, 2 * (n_terms - 1));
    let lead = spec.prefactor() * (PI / lambda).sqrt();
    let mut terms = Vec::with_capacity(n_terms);
    for n in 0..n_terms {
        let bn = b[2 * n];
        let mag = ln_gamma(2.0 * n as f64 + 1.0) - ln_gamma(n as f64 + 1.0) - n as f64 * c.ln() + bn.abs().ln();
        let sign = bn.signum() * if n % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(if bn == 0.0 { 0.0 } else { sign * lead * mag.exp() });
    }
    let first_non_decreasing = (1..terms.len()).find(|&i| terms[i].abs() >= terms[i - 1].abs());
    let smallest_term = (0..terms.len())
        .min_by(|&i, &j| terms[i].abs().total_cmp(&terms[j].abs()))
        .expect("non-empty");
    let value = terms.iter().sum();
    Ok((value, SeriesReport { terms, first_non_decreasing, smallest_term }))
}

/// Series summed up to and including its smallest term (optimal truncation of
/// an asymptotic series), searching at most `max_terms` terms.
pub fn return_pdf_series_truncated(r: f64, spec: &ReturnDistSpec, max_terms: usize) -> Result<(f64, SeriesReport)> {
    let (_, report) = return_pdf_series(r, spec, max_terms)?;
    let stop = report.first_non_decreasing.map_or(report.terms.len(), |i| i);
    let value = report.terms[..stop].iter().sum();
    Ok((value, report))
}

/// Large-return asymptote (1/√(Δλ)) e^{−(log λ)²/C}, for λ > 1.
pub fn tail_asymptote(r: f64, spec: &ReturnDistSpec) -> Result<f64> {
    spec.require_k()?;
    let lambda = spec.lambda(r);
    tail_asymptote_at(lambda, spec.lag, spec.c_const)
}

pub fn tail_asymptote_at(lambda: f64, lag: f64, c: f64) -> Result<f64> {
    if !(lambda > 1.0) {
        return Err(Error::param("lambda", format!("asymptote needs λ > 1, got {lambda}")));
    }
    let l = lambda.ln();
    Ok((-l * l / c).exp() / (lag * lambda).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub r: f64,
    pub pdf_quadrature: f64,
    pub pdf_series: f64,
    pub pdf_asymptote: f64,
    pub lambda: f64,
}

/// Evaluates every form at each r; unavailable forms are NaN.
pub fn evaluate_grid(rs: &[f64], spec: &ReturnDistSpec, series_terms: usize) -> Result<Vec<GridRow>> {
    use rayon::prelude::*;
    rs.par_iter()
        .map(|&r| {
            let lambda = spec.lambda(r);
            Ok(GridRow {
                r,
                pdf_quadrature: return_pdf_quadrature(r, spec)?,
                pdf_series: if lambda > 0.0 {
                    return_pdf_series_truncated(r, spec, series_terms)?.0
                } else {
                    f64::NAN
                },
                pdf_asymptote: tail_asymptote_at(lambda, spec.lag, spec.c_const).unwrap_or(f64::NAN),
                lambda,
            })
        })
        .collect()
}
