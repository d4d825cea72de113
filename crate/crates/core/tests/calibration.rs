use fracvol::simulator::{simulate, simulate_volatility, SimulationConfig};
use fracvol::volatility::{
    calibrate, calibrate_with, integrated_logvol, CalibrationOptions, CALIBRATION_LAGS,
};
use fracvol::VolatilityParams;
use rayon::prelude::*;

fn log_prices(params: VolatilityParams, seed: u64) -> Vec<f64> {
    simulate(&SimulationConfig::new(params, 1 << 14, seed)).unwrap().prices.log_prices()
}

/// Seeds where H, k and β all land inside (±0.05, ±15%, ±0.15).
fn round_trip_hits(hurst: f64, seeds: std::ops::Range<u64>) -> (usize, Vec<String>) {
    let truth = VolatilityParams::new(hurst, 0.59, -5.0, 1.0).unwrap();
    let results: Vec<(bool, String)> = seeds
        .into_par_iter()
        .map(|s| {
            let p = calibrate(&log_prices(truth, s), 1.0, 5, &CALIBRATION_LAGS).unwrap();
            let ok = (p.hurst() - hurst).abs() <= 0.05
                && ((p.k() - 0.59) / 0.59).abs() <= 0.15
                && (p.beta() + 5.0).abs() <= 0.15;
            (ok, format!("seed {s}: H={:.3} k={:.3} β={:.3}", p.hurst(), p.k(), p.beta()))
        })
        .collect();
    let hits = results.iter().filter(|r| r.0).count();
    (hits, results.into_iter().filter(|r| !r.0).map(|r| r.1).collect())
}

#[test]
fn round_trip_over_hurst_grid() {
    for hurst in [0.7, 0.8, 0.9] {
        let (hits, misses) = round_trip_hits(hurst, 500..510);
        assert!(hits >= 9, "H={hurst}: {hits}/10 within tolerance; misses {misses:?}");
    }
}

#[test]
fn hurst_estimate_has_small_bias() {
    for hurst in [0.7, 0.8, 0.9] {
        let truth = VolatilityParams::new(hurst, 0.59, -5.0, 1.0).unwrap();
        let hs: Vec<f64> = (700..720u64)
            .into_par_iter()
            .map(|s| calibrate(&log_prices(truth, s), 1.0, 5, &CALIBRATION_LAGS).unwrap().hurst())
            .collect();
        let m = hs.iter().sum::<f64>() / hs.len() as f64;
        assert!((m - hurst).abs() < 0.03, "H={hurst}: mean estimate {m}");
    }
}

#[test]
fn k_estimate_is_unbiased() {
    for (hurst, k) in [(0.7, 0.59), (0.83, 0.3), (0.9, 1.0)] {
        let truth = VolatilityParams::new(hurst, k, -5.0, 1.0).unwrap();
        let ks: Vec<f64> = (800..820u64)
            .into_par_iter()
            .map(|s| calibrate(&log_prices(truth, s), 1.0, 5, &CALIBRATION_LAGS).unwrap().k())
            .collect();
        let m = ks.iter().sum::<f64>() / ks.len() as f64;
        assert!(((m - k) / k).abs() < 0.05, "H={hurst} k={k}: mean estimate {m}");
    }
}

#[test]
fn constant_volatility_gives_small_k() {
    let truth = VolatilityParams::new(0.83, 0.0, -5.0, 1.0).unwrap();
    for s in 0..5 {
        let p = calibrate(&log_prices(truth, s), 1.0, 5, &CALIBRATION_LAGS).unwrap();
        assert!(p.k() < 0.05, "seed {s}: k={}", p.k());
        assert!((p.beta() + 5.0).abs() < 0.05, "seed {s}: β={}", p.beta());
    }
}

#[test]
fn integrated_logvol_recovers_mean_log_sigma() {
    // The simulated σ has E σ = θ, so log σ is centred at β − ½k²δ^{2H−2}.
    let params = VolatilityParams::new(0.8, 0.59, -5.0, 1.0).unwrap();
    let centre = -5.0 - 0.5 * params.logvol_variance();
    let vol = simulate_volatility(&SimulationConfig::new(params, 1 << 14, 31)).unwrap();
    let dec = integrated_logvol(&vol).unwrap();
    assert!((dec.beta_hat - centre).abs() < 0.1, "β̂ = {} vs {centre}", dec.beta_hat);
}

#[test]
fn uncorrected_pipeline_is_biased_low_in_hurst() {
    let truth = VolatilityParams::nyse_daily();
    let lp = log_prices(truth, 3);
    let raw = calibrate_with(&lp, 1.0, &CalibrationOptions::uncorrected(5)).unwrap();
    let corrected = calibrate_with(&lp, 1.0, &CalibrationOptions::default()).unwrap();
    assert!(!raw.hurst_corrected);
    assert!(raw.params.hurst() < corrected.params.hurst());
    assert!((corrected.params.hurst() - 0.83).abs() < 0.05);
}

#[test]
fn stride_thins_points() {
    let lp = log_prices(VolatilityParams::nyse_daily(), 4);
    let opts = CalibrationOptions { stride: 5, ..Default::default() };
    let r = calibrate_with(&lp, 1.0, &opts).unwrap();
    let full = calibrate_with(&lp, 1.0, &CalibrationOptions::default()).unwrap();
    assert!(r.points * 4 < full.points);
}
