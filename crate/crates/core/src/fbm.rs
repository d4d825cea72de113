//! Exact fractional Brownian motion: Cholesky reference and circulant embedding.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha20Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{standard_normals, RngSeed, Stream};

pub const CHOLESKY_CAP: usize = 4096;
/// Largest circulant embedding tried before giving up.
pub const EMBEDDING_CAP: usize = 1 << 26;
const CLAMP_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FbmMethod {
    Cholesky,
    #[default]
    Circulant,
}

impl std::str::FromStr for FbmMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cholesky" => Ok(FbmMethod::Cholesky),
            "circulant" => Ok(FbmMethod::Circulant),
            _ => Err(Error::param("method", format!("unknown fBm method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbmPath {
    pub hurst: f64,
    pub dt: f64,
    /// values[i] = B_H(i·dt); values[0] = 0.
    pub values: Vec<f64>,
}

impl FbmPath {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| i as f64 * self.dt)
    }
}

pub(crate) fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("hurst", format!("{h} is outside (0, 1]")))
    }
}

/// E[B_H(s) B_H(t)].
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    let h2 = 2.0 * hurst;
    Ok(0.5 * (t.abs().powf(h2) + s.abs().powf(h2) - (t - s).abs().powf(h2)))
}

/// Autocovariance of unit-spacing fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(k: f64, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k.abs();
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// ψ(s,u): covariance of log σ at times s and u.
pub fn logvol_covariance(s: f64, u: f64, k: f64, delta: f64, hurst: f64) -> Result<f64> {
    check_hurst(hurst)?;
    if !(k >= 0.0) {
        return Err(Error::param("k", "must be ≥ 0"));
    }
    if !(delta > 0.0) {
        return Err(Error::param("delta", "must be > 0"));
    }
    let h2 = 2.0 * hurst;
    let d = s - u;
    Ok(k * k / (2.0 * delta * delta)
        * ((d + delta).abs().powf(h2) + (delta - d).abs().powf(h2) - 2.0 * d.abs().powf(h2)))
}

enum Factor {
    Cholesky(DMatrix<f64>),
    Circulant {
        /// sqrt(λ_j / N)
        scale: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
}

/// Precomputed factorization for repeated draws of `n` unit-spacing fGn values.
pub struct FbmGenerator {
    n: usize,
    hurst: f64,
    method: FbmMethod,
    factor: Factor,
    clamped: usize,
}

impl std::fmt::Debug for FbmGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmGenerator")
            .field("n", &self.n)
            .field("hurst", &self.hurst)
            .field("method", &self.method)
            .field("clamped", &self.clamped)
            .finish()
    }
}

impl FbmGenerator {
    pub fn new(n: usize, hurst: f64, method: FbmMethod) -> Result<Self> {
        check_hurst(hurst)?;
        if n == 0 {
            return Err(Error::param("n", "must be ≥ 1"));
        }
        let (factor, clamped) = match method {
            FbmMethod::Cholesky => (Self::cholesky(n, hurst)?, 0),
            FbmMethod::Circulant => Self::circulant(n, hurst)?,
        };
        Ok(FbmGenerator { n, hurst, method, factor, clamped })
    }

    fn cholesky(n: usize, hurst: f64) -> Result<Factor> {
        if n > CHOLESKY_CAP {
            return Err(Error::CholeskyTooLarge { requested: n, cap: CHOLESKY_CAP });
        }
        let acv: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k as f64, hurst)).collect();
        let cov = DMatrix::from_fn(n, n, |i, j| acv[i.abs_diff(j)]);
        if let Some(c) = cov.clone().cholesky() {
            return Ok(Factor::Cholesky(c.unpack()));
        }
        // H = 1 gives the rank-one all-ones matrix; its factor is the first column.
        let l = DMatrix::from_fn(n, n, |i, j| if j == 0 { cov[(i, 0)].sqrt() } else { 0.0 });
        if (&l * l.transpose() - &cov).amax() < 1e-10 {
            Ok(Factor::Cholesky(l))
        } else {
            Err(Error::Degenerate("fGn covariance is not positive definite".into()))
        }
    }

    fn circulant(n: usize, hurst: f64) -> Result<(Factor, usize)> {
        let mut m = n.next_power_of_two();
        let mut planner = FftPlanner::new();
        loop {
            let size = 2 * m;
            let mut row: Vec<Complex<f64>> = (0..size)
                .map(|j| {
                    let k = if j <= m { j } else { size - j };
                    Complex::new(fgn_autocovariance(k as f64, hurst), 0.0)
                })
                .collect();
            let fft = planner.plan_fft_forward(size);
            fft.process(&mut row);
            let lmax = row.iter().map(|c| c.re).fold(f64::MIN, f64::max);
            let lmin = row.iter().map(|c| c.re).fold(f64::MAX, f64::min);
            if lmin >= -CLAMP_RATIO * lmax {
                let clamped = row.iter().filter(|c| c.re < 0.0).count();
                let scale = row.iter().map(|c| (c.re.max(0.0) / size as f64).sqrt()).collect();
                return Ok((Factor::Circulant { scale, fft }, clamped));
            }
            if 2 * size > EMBEDDING_CAP {
                return Err(Error::EmbeddingNotDefinite { min_eigenvalue: lmin, size });
            }
            m *= 2;
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn method(&self) -> FbmMethod {
        self.method
    }

    /// Number of slightly negative circulant eigenvalues that were clamped to zero.
    pub fn clamped_eigenvalues(&self) -> usize {
        self.clamped
    }

    /// Draws `n` fGn values with unit spacing (variance 1 each).
    pub fn sample_noise(&self, rng: &mut ChaCha20Rng) -> Vec<f64> {
        match &self.factor {
            Factor::Cholesky(l) => {
                let z = DVector::from_vec(standard_normals(rng, self.n));
                (l * z).as_slice().to_vec()
            }
            Factor::Circulant { scale, fft } => {
                let z = standard_normals(rng, 2 * scale.len());
                let mut w: Vec<Complex<f64>> = scale
                    .iter()
                    .zip(z.chunks_exact(2))
                    .map(|(s, p)| Complex::new(s * p[0], s * p[1]))
                    .collect();
                fft.process(&mut w);
                w.iter().take(self.n).map(|c| c.re).collect()
            }
        }
    }

    /// Draws a path B_H(0), …, B_H(n·dt).
    pub fn sample_path(&self, dt: f64, rng: &mut ChaCha20Rng) -> Result<FbmPath> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", "must be > 0"));
        }
        let scale = dt.powf(self.hurst);
        let mut values = Vec::with_capacity(self.n + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for x in self.sample_noise(rng) {
            acc += scale * x;
            values.push(acc);
        }
        Ok(FbmPath { hurst: self.hurst, dt, values })
    }
}

/// One fBm path on the grid 0, dt, …, n·dt, drawn from the seed's fBm stream.
pub fn generate_fbm(n: usize, hurst: f64, dt: f64, seed: RngSeed, method: FbmMethod) -> Result<FbmPath> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "must be > 0"));
    }
    FbmGenerator::new(n, hurst, method)?.sample_path(dt, &mut seed.rng(Stream::Fbm))
}

/// Integer ratio `delta / dt`, if `delta` sits on the grid.
pub(crate) fn grid_multiple(delta: f64, dt: f64) -> Result<usize> {
    if !(delta > 0.0) {
        return Err(Error::param("delta", "must be > 0"));
    }
    let ratio = delta / dt;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::param("delta", format!("{delta} is not a positive multiple of dt = {dt}")));
    }
    Ok(m as usize)
}

/// B_H(t) − B_H(t − δ) for every grid point t ≥ δ.
pub fn fractional_noise(path: &FbmPath, delta: f64) -> Result<Vec<f64>> {
    let m = grid_multiple(delta, path.dt)?;
    if path.values.len() <= m {
        return Err(Error::param("delta", "exceeds the path span"));
    }
    Ok(path.values[m..].iter().zip(&path.values).map(|(b, a)| b - a).collect())
}
