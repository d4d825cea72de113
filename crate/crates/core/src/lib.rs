//! Fractional-noise stochastic volatility.
//!
//! Log-volatility is driven by fractional noise, `log σ_t = β + (k/δ)(B_H(t) − B_H(t−δ))`,
//! and prices follow `dS = μS dt + σS dB`. The crate reconstructs σ from
//! prices, calibrates (H, k, β), simulates the coupled system, evaluates the
//! implied return density, and prices European calls by mixing Black–Scholes
//! over the conditional law of the mean volatility.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod distribution;
pub mod error;
pub mod fbm;
pub mod pricing;
pub mod quad;
pub mod rng;
pub mod simulator;
pub mod special;
pub mod timeseries;
pub mod volatility;

pub use error::{Error, Result};
pub use fbm::{FbmMethod, FbmPath};
pub use rng::RngSeed;
pub use timeseries::PriceSeries;
pub use volatility::{VolatilityParams, VolatilitySeries};
