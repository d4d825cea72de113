//! Runs the twelve acceptance criteria and prints one PASS/FAIL line for each.
//! Exits nonzero if any criterion fails.

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use fracvol::distribution::{central_moment, mixture_density, return_pdf_quadrature, MixtureCenter, ReturnDistSpec};
use fracvol::fbm::{fbm_covariance, FbmGenerator};
use fracvol::pricing::{
    alpha_squared, alpha_squared_riemann, black_scholes_call, black_scholes_call_integral_form, fractional_call_closed,
    fractional_call_price, implied_volatility, AlphaMode, AlphaParams, OptionSpec,
};
use fracvol::quad::{integrate, Tolerance};
use fracvol::simulator::{SimulationConfig, Simulator};
use fracvol::volatility::{calibrate_with, CalibrationOptions};
use fracvol::{FbmMethod, RngSeed, VolatilityParams};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn fbm_exactness() -> Outcome {
    let n = 1 << 12;
    let paths = 10_000u64;
    let points = [1usize, 2, 4, 8];
    let mut worst: f64 = 0.0;
    for h in [0.5, 0.7, 0.8, 0.9] {
        let gen = FbmGenerator::new(n, h, FbmMethod::Circulant).unwrap();
        let samples: Vec<[f64; 4]> = (0..paths)
            .into_par_iter()
            .map(|i| {
                let p = gen.sample_path(1.0, &mut RngSeed(i).rng(fracvol::rng::Stream::Fbm)).unwrap();
                points.map(|t| p.values[t])
            })
            .collect();
        for a in 0..4 {
            for b in a..4 {
                let prods: Vec<f64> = samples.iter().map(|s| s[a] * s[b]).collect();
                let m = prods.iter().sum::<f64>() / paths as f64;
                let var = prods.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (paths as f64 - 1.0);
                let se = (var / paths as f64).sqrt();
                let want = fbm_covariance(points[a] as f64, points[b] as f64, h).unwrap();
                worst = worst.max((m - want).abs() / se);
            }
        }
    }
    (worst < 4.0, format!("largest deviation {worst:.2} standard errors over 40 entries"))
}

fn hurst_round_trip() -> Outcome {
    let truth = VolatilityParams::nyse_daily();
    let results: Vec<(f64, f64, f64)> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let cfg = SimulationConfig::new(truth, 1 << 14, 1000 + seed);
            let lp = fracvol::simulator::simulate(&cfg).unwrap().prices.log_prices();
            let p = calibrate_with(&lp, 1.0, &CalibrationOptions::default()).unwrap().params;
            (p.hurst(), p.k(), p.beta())
        })
        .collect();
    let ok = results
        .iter()
        .filter(|(h, k, b)| (h - 0.83).abs() <= 0.05 && (b + 5.0).abs() <= 0.15 && (k / 0.59 - 1.0).abs() <= 0.15)
        .count();
    let fail_h = results.iter().filter(|r| (r.0 - 0.83).abs() > 0.05).count();
    let fail_k = results.iter().filter(|r| (r.1 / 0.59 - 1.0).abs() > 0.15).count();
    let fail_b = results.iter().filter(|r| (r.2 + 5.0).abs() > 0.15).count();
    (ok >= 18, format!("{ok}/20 seeds within tolerance (misses: H {fail_h}, k {fail_k}, β {fail_b})"))
}

fn normalization_and_moments() -> Outcome {
    let mut worst_norm: f64 = 0.0;
    let mut worst_m2: f64 = 0.0;
    for h in [0.7, 0.83, 0.9] {
        for k in [0.3, 0.59, 1.0] {
            for lag in [1.0, 10.0] {
                let spec = ReturnDistSpec::new(VolatilityParams::new(h, k, -5.0, 1.0).unwrap(), lag, 0.0).unwrap();
                let norm = central_moment(&spec, 0).unwrap();
                let m2 = central_moment(&spec, 2).unwrap();
                worst_norm = worst_norm.max((norm - 1.0).abs());
                worst_m2 = worst_m2.max((m2 / spec.second_moment() - 1.0).abs());
            }
        }
    }
    (
        worst_norm <= 1e-6 && worst_m2 <= 1e-5,
        format!("max |∫P − 1| = {worst_norm:.1e}, max relative second-moment error = {worst_m2:.1e}"),
    )
}

fn nyse_spec() -> ReturnDistSpec {
    ReturnDistSpec::new(VolatilityParams::nyse_daily(), 1.0, 0.0).unwrap()
}

fn mixture_equivalence() -> Outcome {
    let spec = nyse_spec();
    let half = 10.0 * spec.params.theta();
    let worst = (0..100)
        .map(|i| {
            let r = spec.r0 - half + 2.0 * half * (i as f64 + 0.5) / 100.0;
            let q = return_pdf_quadrature(r, &spec).unwrap();
            let m = mixture_density(r, &spec, MixtureCenter::Common).unwrap();
            (q - m).abs() / m
        })
        .fold(0.0, f64::max);
    (worst <= 1e-8, format!("max relative difference {worst:.1e} over 100 points in r₀ ± 10θ"))
}

fn peak_value() -> Outcome {
    let spec = nyse_spec();
    let q = return_pdf_quadrature(spec.r0, &spec).unwrap();
    let rel = (q / spec.peak() - 1.0).abs();
    (rel <= 1e-8, format!("P(r₀) = {q:.12}, closed form {:.12}, relative difference {rel:.1e}", spec.peak()))
}

fn tail_law() -> Outcome {
    let spec = nyse_spec();
    let theta = spec.params.theta();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..=40 {
        let lambda = 10f64.powf(3.0 + 4.0 * i as f64 / 40.0);
        let r = spec.r0 + theta * (2.0 * spec.lag * lambda).sqrt();
        let lp = fracvol::distribution::return_log_pdf_quadrature(r, &spec, Default::default()).unwrap();
        xs.push(lambda.ln().powi(2));
        ys.push(lp);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let want = -1.0 / spec.c_const;
    let rel = (slope / want - 1.0).abs();
    (rel <= 0.10, format!("slope {slope:.5} vs −1/C = {want:.5} ({:.1}% off)", 100.0 * rel))
}

fn black_scholes_equivalence() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(20);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 1000 {
        let o = OptionSpec::new(
            rng.gen_range(0.5..2.0),
            rng.gen_range(0.5..2.0),
            rng.gen_range(0.0..0.1),
            rng.gen_range(0.05..5.0),
            rng.gen_range(0.05..1.0),
        )
        .unwrap();
        let (a, b) = o.ab();
        if !(a + b > 0.0 && a - b > 0.0) {
            continue;
        }
        n += 1;
        let integral = black_scholes_call_integral_form(&o).unwrap();
        worst = worst.max((integral - black_scholes_call(&o)).abs());
    }
    (worst <= 1e-8, format!("max |difference| {worst:.1e} over 1000 random inputs"))
}

fn alpha_validation() -> Outcome {
    let mut worst_exact: f64 = 0.0;
    let mut worst_approx: f64 = 0.0;
    for h in [0.7, 0.8, 0.9] {
        for tau in [2.0, 5.0, 20.0] {
            let p = AlphaParams { k: 1.0, delta: 1.0, hurst: h, tau };
            let exact = alpha_squared(&p, AlphaMode::Exact).unwrap();
            let brute = alpha_squared_riemann(&p, 2000);
            worst_exact = worst_exact.max((exact / brute - 1.0).abs());
        }
        for tau in [50.0, 100.0, 200.0, 1000.0] {
            let p = AlphaParams { k: 1.0, delta: 1.0, hurst: h, tau };
            let exact = alpha_squared(&p, AlphaMode::Exact).unwrap();
            let approx = alpha_squared(&p, AlphaMode::Approx).unwrap();
            worst_approx = worst_approx.max((approx / exact - 1.0).abs());
        }
    }
    (
        worst_exact <= 0.005 && worst_approx <= 0.02,
        format!("exact vs Riemann sum {:.3}%, approx vs exact (τ ≥ 50δ) {:.3}%", 100.0 * worst_exact, 100.0 * worst_approx),
    )
}

fn fig7(k: f64) -> VolatilityParams {
    VolatilityParams::new(0.8, k, 0.0, 1.0).unwrap()
}

fn fig7_grid() -> Vec<(f64, f64)> {
    let taus: Vec<f64> = (1..=20).map(|i| 5.0 * i as f64).collect();
    let ms: Vec<f64> = (0..=20).map(|i| 0.5 + 0.05 * i as f64).collect();
    taus.iter().flat_map(|&t| ms.iter().map(move |&m| (t, m))).collect()
}

fn pricing_equivalence() -> Outcome {
    let grid = fig7_grid();
    let mut detail = Vec::new();
    let mut ok = true;
    for k in [1.0, 2.0] {
        let p = fig7(k);
        let rels: Vec<(f64, f64, f64)> = grid
            .par_iter()
            .map(|&(tau, m)| {
                let o = OptionSpec::new(m, 1.0, 0.001, tau, 0.01).unwrap();
                let gh = fractional_call_price(&o, &p).unwrap();
                let closed = fractional_call_closed(&o, &p).unwrap();
                ((closed - gh).abs() / gh, tau, m)
            })
            .collect();
        let (worst, tau, m) = rels.iter().copied().fold((0.0, 0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
        ok &= worst <= 1e-4;
        detail.push(format!("k={k}: max relative gap {worst:.1e} (τ={tau}, S/K={m:.2})"));
    }
    let p = fig7(1e-3);
    let gaps: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&(tau, m)| {
            let o = OptionSpec::new(m, 1.0, 0.001, tau, 0.01).unwrap();
            let bs = black_scholes_call(&o);
            let gh = fractional_call_price(&o, &p).unwrap();
            let closed = fractional_call_closed(&o, &p).unwrap();
            ((gh - bs).abs(), (closed - bs).abs())
        })
        .collect();
    let worst_gh = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
    let worst_closed = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
    ok &= worst_gh <= 1e-4 && worst_closed <= 1e-4;
    detail.push(format!("k=1e-3: max |V − BS| {worst_gh:.1e} (quadrature), {worst_closed:.1e} (M-form)"));
    (ok, detail.join("; "))
}

fn smile() -> Outcome {
    let p = fig7(1.0);
    let excess = |tau: f64| {
        let iv = |m: f64| {
            let o = OptionSpec::new(m, 1.0, 0.001, tau, 0.01).unwrap();
            implied_volatility(fractional_call_price(&o, &p).unwrap(), &o).unwrap().sigma
        };
        iv(0.8) - iv(1.0)
    };
    let taus: Vec<f64> = (1..=20).map(|i| 5.0 * i as f64).collect();
    let ex: Vec<f64> = taus.par_iter().map(|&t| excess(t)).collect();
    let all_pos = ex.iter().all(|&e| e > 0.0);
    let first = ex[0];
    let last = ex[ex.len() - 1];
    (
        all_pos && first > last,
        format!("iv(0.8) − iv(1.0): {first:.5} at τ=5, {last:.5} at τ=100, positive at all 20 maturities: {all_pos}"),
    )
}

fn monte_carlo_consistency() -> Outcome {
    let p = VolatilityParams::nyse_daily();
    let n = 1_000_000usize;
    let sim = Simulator::new(&SimulationConfig::new(p, 1, 0)).unwrap();
    let returns = sim.terminal_log_returns(5_000_000, n).unwrap();
    // The simulator compensates σ so that E σ = θ; its log σ is centered at β − v/2.
    let v = p.logvol_variance();
    let model = ReturnDistSpec::new(p.with_beta(p.beta() - 0.5 * v).unwrap(), 1.0, 0.0).unwrap();
    let theta = p.theta();
    let (lo, hi) = (model.r0 - 4.0 * theta, model.r0 + 4.0 * theta);
    let bins = 80;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &r in &returns {
        if r >= lo && r < hi {
            counts[(((r - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let tol = Tolerance { abs: 0.0, rel: 1e-10, max_intervals: 200 };
    let worst = (0..bins)
        .into_par_iter()
        .map(|i| {
            let a = lo + i as f64 * width;
            let prob = integrate(|r| return_pdf_quadrature(r, &model).unwrap(), a, a + width, tol).unwrap().value;
            let se = (prob * (1.0 - prob) / n as f64).sqrt();
            (counts[i] as f64 / n as f64 - prob).abs() / se
        })
        .reduce(|| 0.0, f64::max);
    (worst <= 5.0, format!("largest bin deviation {worst:.2} standard errors over {bins} bins in r₀ ± 4θ"))
}

fn determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_fracvol");
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("p.json");
    std::fs::write(&params, r#"{"hurst":0.83,"k":0.59,"beta":-5.0,"delta":1.0}"#).unwrap();
    let sim = dir.path().join("sim.csv");
    let p = params.to_str().unwrap();
    let s = sim.to_str().unwrap();
    let runs: Vec<Vec<String>> = vec![
        vec!["simulate", "--params", p, "--n", "16384", "--seed", "7"],
        vec!["calibrate", "--in", s, "--window", "5"],
        vec!["vol", "--in", s, "--window", "5"],
        vec!["dist", "--params", "nyse-preset", "--grid", "-0.1:0.1:400"],
        vec!["fit-compare", "--in", s, "--params", p, "--bins", "50"],
        vec!["smile", "--hurst", "0.8", "--k", "1", "--beta", "0", "--tau-grid", "5:100:4", "--moneyness-grid", "0.8:1.2:5"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    let gen = Command::new(exe).args(["simulate", "--params", p, "--n", "16384", "--seed", "7", "--out", s]).status().unwrap();
    if !gen.success() {
        return (false, "simulate failed".into());
    }
    let mut mismatched = Vec::new();
    for args in &runs {
        let a = Command::new(exe).args(args).output().unwrap();
        let b = Command::new(exe).args(args).output().unwrap();
        if !a.status.success() || a.stdout.is_empty() || a.stdout != b.stdout {
            mismatched.push(args[0].clone());
        }
    }
    (
        mismatched.is_empty(),
        if mismatched.is_empty() {
            format!("{} subcommands byte-identical across repeated runs", runs.len())
        } else {
            format!("differing or failing: {}", mismatched.join(", "))
        },
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("fBm exactness", fbm_exactness),
        ("Hurst round trip", hurst_round_trip),
        ("distribution normalization and moments", normalization_and_moments),
        ("mixture equivalence", mixture_equivalence),
        ("peak value", peak_value),
        ("tail law", tail_law),
        ("Black–Scholes equivalence", black_scholes_equivalence),
        ("α² validation", alpha_validation),
        ("pricing equivalence and limits", pricing_equivalence),
        ("smile", smile),
        ("Monte Carlo consistency", monte_carlo_consistency),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = f();
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} criterion {:>2} {name}: {detail} [{:.1}s]", i + 1, start.elapsed().as_secs_f64());
        if !ok {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 12 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
