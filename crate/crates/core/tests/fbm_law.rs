mod common;

use common::{ks_two_sample, mean, se, variance};
use fracvol::fbm::{fbm_covariance, fractional_noise, generate_fbm, FbmGenerator};
use fracvol::rng::Stream;
use fracvol::{FbmMethod, FbmPath, RngSeed};
use rayon::prelude::*;

fn paths(n: usize, hurst: f64, method: FbmMethod, count: u64) -> Vec<FbmPath> {
    let gen = FbmGenerator::new(n, hurst, method).unwrap();
    (0..count)
        .into_par_iter()
        .map(|s| gen.sample_path(1.0, &mut RngSeed(s).rng(Stream::Fbm)).unwrap())
        .collect()
}

#[test]
fn single_step_is_standard_normal() {
    for hurst in [0.3, 0.5, 0.8] {
        let x: Vec<f64> = (0..100_000u64)
            .into_par_iter()
            .map(|s| {
                let p = generate_fbm(1, hurst, 1.0, RngSeed(s), FbmMethod::Circulant).unwrap();
                assert_eq!(p.values[0], 0.0);
                p.values[1]
            })
            .collect();
        let m = mean(&x);
        let v = variance(&x);
        let sq: Vec<f64> = x.iter().map(|a| (a - m) * (a - m)).collect();
        assert!(m.abs() < 4.0 * se(&x), "H={hurst} mean {m}");
        assert!((v - 1.0).abs() < 4.0 * se(&sq), "H={hurst} variance {v}");
    }
}

#[test]
fn brownian_increments_have_no_lag_one_correlation() {
    let n = 1 << 14;
    let p = generate_fbm(n, 0.5, 1.0, RngSeed(2024), FbmMethod::Circulant).unwrap();
    let inc: Vec<f64> = p.values.windows(2).map(|w| w[1] - w[0]).collect();
    let m = mean(&inc);
    let num: f64 = inc.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    let den: f64 = inc.iter().map(|a| (a - m) * (a - m)).sum();
    let rho = num / den;
    assert!(rho.abs() < 4.0 / (n as f64).sqrt(), "rho {rho}");
}

#[test]
fn covariance_of_b1_b2_matches_law() {
    let target = fbm_covariance(1.0, 2.0, 0.8).unwrap();
    let ps = paths(1 << 12, 0.8, FbmMethod::Circulant, 10_000);
    let prod: Vec<f64> = ps.iter().map(|p| p.values[1] * p.values[2]).collect();
    let c = mean(&prod);
    assert!((c - target).abs() < 4.0 * se(&prod), "{c} vs {target} (se {})", se(&prod));
}

#[test]
fn fractional_noise_variance_is_delta_to_2h() {
    let ps = paths(64, 0.8, FbmMethod::Circulant, 10_000);
    let x: Vec<f64> = ps.iter().map(|p| fractional_noise(p, 1.0).unwrap()[17]).collect();
    let sq: Vec<f64> = x.iter().map(|a| a * a).collect();
    let v = mean(&sq);
    assert!((v - 1.0).abs() < 4.0 * se(&sq), "variance {v}");
}

#[test]
fn fractional_noise_edge_cases() {
    let p = FbmPath { hurst: 0.5, dt: 1.0, values: vec![0.0, 1.0, 3.0] };
    assert_eq!(fractional_noise(&p, 1.0).unwrap(), vec![1.0, 2.0]);
    assert_eq!(fractional_noise(&p, 2.0).unwrap(), vec![3.0]);
    assert!(fractional_noise(&p, 3.0).is_err());
    assert!(fractional_noise(&p, 1.5).is_err());
}

#[test]
fn cholesky_and_circulant_agree_in_law() {
    let n = 256;
    for hurst in [0.3, 0.8] {
        let a: Vec<f64> = paths(n, hurst, FbmMethod::Cholesky, 10_000).iter().map(|p| p.values[n]).collect();
        let b: Vec<f64> = (0..10_000u64)
            .into_par_iter()
            .map(|s| generate_fbm(n, hurst, 1.0, RngSeed(1_000_000 + s), FbmMethod::Circulant).unwrap().values[n])
            .collect();
        let p = ks_two_sample(&a, &b);
        assert!(p > 1e-3, "H={hurst} KS p-value {p}");
    }
}

#[test]
fn paths_are_bit_reproducible() {
    for method in [FbmMethod::Cholesky, FbmMethod::Circulant] {
        let a = generate_fbm(300, 0.7, 0.5, RngSeed(9), method).unwrap();
        let b = generate_fbm(300, 0.7, 0.5, RngSeed(9), method).unwrap();
        assert_eq!(a, b);
        let c = generate_fbm(300, 0.7, 0.5, RngSeed(10), method).unwrap();
        assert_ne!(a, c);
    }
}
