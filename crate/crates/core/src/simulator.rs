//! Sample paths of the coupled price / fractional-volatility system.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{grid_multiple, FbmGenerator, FbmMethod};
use crate::rng::{RngSeed, Stream};
use crate::timeseries::PriceSeries;
use crate::volatility::{VolatilityParams, VolatilitySeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub params: VolatilityParams,
    pub mu: f64,
    pub s0: f64,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: RngSeed,
    #[serde(default)]
    pub method: FbmMethod,
}

impl SimulationConfig {
    pub fn new(params: VolatilityParams, n_steps: usize, seed: u64) -> Self {
        SimulationConfig {
            params,
            mu: 0.0,
            s0: 1.0,
            n_steps,
            dt: params.delta(),
            seed: RngSeed(seed),
            method: FbmMethod::Circulant,
        }
    }

    fn validate(&self) -> Result<usize> {
        if self.n_steps == 0 {
            return Err(Error::param("n_steps", "must be ≥ 1"));
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::param("s0", "must be > 0"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", "must be > 0"));
        }
        if !self.mu.is_finite() {
            return Err(Error::param("mu", "must be finite"));
        }
        grid_multiple(self.params.delta(), self.dt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub prices: PriceSeries,
    /// σ held over each step; `volatility.sigma[i]` applies on [i·dt, (i+1)·dt).
    pub volatility: VolatilitySeries,
}

/// Reusable simulator for many paths sharing everything but the seed.
#[derive(Debug)]
pub struct Simulator {
    params: VolatilityParams,
    mu: f64,
    s0: f64,
    n_steps: usize,
    dt: f64,
    /// δ / dt
    lag: usize,
    fbm: FbmGenerator,
}

impl Simulator {
    pub fn new(config: &SimulationConfig) -> Result<Self> {
        let lag = config.validate()?;
        // Warm-up of one δ so the first noise value B(0) − B(−δ) exists.
        let fbm = FbmGenerator::new(config.n_steps + lag, config.params.hurst(), config.method)?;
        Ok(Simulator {
            params: config.params,
            mu: config.mu,
            s0: config.s0,
            n_steps: config.n_steps,
            dt: config.dt,
            lag,
            fbm,
        })
    }

    /// σ at t = 0, dt, …, (n_steps − 1)·dt.
    pub fn volatility_path(&self, seed: RngSeed) -> Result<Vec<f64>> {
        let p = &self.params;
        let theta = p.theta();
        if p.k() == 0.0 {
            return Ok(vec![theta; self.n_steps]);
        }
        let path = self.fbm.sample_path(self.dt, &mut seed.rng(Stream::Fbm))?;
        let kd = p.k() / p.delta();
        let comp = 0.5 * kd * kd * p.delta().powf(2.0 * p.hurst());
        let b = &path.values;
        Ok((0..self.n_steps).map(|i| theta * (kd * (b[i + self.lag] - b[i]) - comp).exp()).collect())
    }

    /// Log prices at t = 0, dt, …, n_steps·dt driven by the given σ path.
    pub fn log_price_path(&self, sigma: &[f64], seed: RngSeed) -> Vec<f64> {
        let mut rng = seed.rng(Stream::PriceShock);
        let sq = self.dt.sqrt();
        let mut lp = Vec::with_capacity(sigma.len() + 1);
        let mut x = self.s0.ln();
        lp.push(x);
        for &s in sigma {
            let z: f64 = StandardNormal.sample(&mut rng);
            x += (self.mu - 0.5 * s * s) * self.dt + s * sq * z;
            lp.push(x);
        }
        lp
    }

    pub fn run(&self, seed: RngSeed) -> Result<Simulation> {
        let sigma = self.volatility_path(seed)?;
        let lp = self.log_price_path(&sigma, seed);
        let prices = PriceSeries::from_log_prices(0.0, self.dt, &lp)?;
        let volatility = VolatilitySeries {
            timestamps: (0..self.n_steps).map(|i| i as f64 * self.dt).collect(),
            sigma: sigma.into_iter().map(Some).collect(),
            window: 1,
            stride: 1,
        };
        Ok(Simulation { prices, volatility })
    }

    /// log(S_T / S_0) over the whole horizon for seeds `first_seed..first_seed + n_paths`.
    pub fn terminal_log_returns(&self, first_seed: u64, n_paths: usize) -> Result<Vec<f64>> {
        (0..n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let seed = RngSeed(first_seed.wrapping_add(i));
                let sigma = self.volatility_path(seed)?;
                let lp = self.log_price_path(&sigma, seed);
                Ok(lp[lp.len() - 1] - lp[0])
            })
            .collect()
    }
}

pub fn simulate(config: &SimulationConfig) -> Result<Simulation> {
    Simulator::new(config)?.run(config.seed)
}

pub fn simulate_volatility(config: &SimulationConfig) -> Result<VolatilitySeries> {
    Ok(simulate(config)?.volatility)
}

pub fn simulate_price(config: &SimulationConfig) -> Result<PriceSeries> {
    Ok(simulate(config)?.prices)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset() -> VolatilityParams {
        VolatilityParams::nyse_daily()
    }

    #[test]
    fn zero_k_gives_constant_theta() {
        let p = preset().with_k(0.0).unwrap();
        let v = simulate_volatility(&SimulationConfig::new(p, 500, 3)).unwrap();
        assert!(v.valid().all(|s| s == p.theta()));
    }

    #[test]
    fn zero_steps_rejected() {
        assert!(simulate(&SimulationConfig::new(preset(), 0, 1)).is_err());
    }

    #[test]
    fn off_grid_delta_rejected() {
        let mut c = SimulationConfig::new(preset(), 10, 1);
        c.dt = 0.3;
        assert!(simulate(&c).is_err());
    }

    #[test]
    fn deterministic() {
        let mut c = SimulationConfig::new(preset(), 1000, 42);
        c.dt = 0.25;
        c.mu = 0.001;
        let a = simulate(&c).unwrap();
        let b = simulate(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.prices.len(), 1001);
        assert_eq!(a.volatility.len(), 1000);
    }

    #[test]
    fn sigma_mean_and_logvariance_match_model() {
        // Independent single-step draws of σ(0).
        let p = preset();
        let sim = Simulator::new(&SimulationConfig::new(p, 1, 0)).unwrap();
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|i| sim.volatility_path(RngSeed(i)).unwrap()[0]).collect();
        let nf = n as f64;
        let mean = draws.iter().sum::<f64>() / nf;
        let sd = (draws.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
        assert!((mean - p.theta()).abs() < 4.0 * sd / nf.sqrt(), "{mean} vs {}", p.theta());

        let logs: Vec<f64> = draws.iter().map(|s| s.ln()).collect();
        let lm = logs.iter().sum::<f64>() / nf;
        let lv = logs.iter().map(|l| (l - lm).powi(2)).sum::<f64>() / (nf - 1.0);
        let want = p.logvol_variance();
        // Var of the sample variance of a Gaussian: 2σ⁴/(n−1).
        assert!((lv - want).abs() < 4.0 * want * (2.0 / (nf - 1.0)).sqrt(), "{lv} vs {want}");
    }
}
