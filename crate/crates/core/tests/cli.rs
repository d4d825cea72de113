use std::path::Path;
use std::process::{Command, Output};

use fracvol::distribution::{return_pdf_quadrature, ReturnDistSpec};
use fracvol::quad::{integrate, Tolerance};
use fracvol::VolatilityParams;

fn fracvol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracvol")).args(args).env_remove("FRACVOL_OUT_DIR").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = fracvol(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// (column names, rows) of a CSV with `#` header lines.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let cols = lines.next().unwrap().split(',').map(str::to_owned).collect();
    (cols, lines.map(|l| l.split(',').map(str::to_owned).collect()).collect())
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let (cols, rows) = table(text);
    let i = cols.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name} in {cols:?}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

fn write_params(dir: &Path) -> String {
    let p = dir.join("p.json");
    std::fs::write(&p, VolatilityParams::nyse_daily().to_json()).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let params = write_params(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        ok(&["simulate", "--params", &params, "--n", "16384", "--seed", "7", "--out", out.to_str().unwrap()]);
    }
    let a = std::fs::read(a).unwrap();
    assert_eq!(a, std::fs::read(b).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# fracvol "));
    assert!(text.contains("\"seed\":7"), "header must record the resolved config");
    assert_eq!(table(&text).1.len(), 16385);
}

#[test]
fn calibrate_recovers_hurst_from_simulate_output() {
    let dir = tempfile::tempdir().unwrap();
    let params = write_params(dir.path());
    let path = dir.path().join("path.csv");
    ok(&["simulate", "--params", &params, "--n", "16384", "--seed", "7", "--out", path.to_str().unwrap()]);
    let json = ok(&["calibrate", "--in", path.to_str().unwrap(), "--window", "5"]);
    let fitted = VolatilityParams::from_json(&json).unwrap();
    assert!((fitted.hurst() - 0.83).abs() <= 0.05, "{json}");
    // The output feeds straight back into --params.
    let fitted_path = dir.path().join("fit.json");
    std::fs::write(&fitted_path, &json).unwrap();
    ok(&["dist", "--params", fitted_path.to_str().unwrap(), "--grid", "-0.01:0.01:5"]);
}

#[test]
fn dist_grid_integrates_to_one() {
    let text = ok(&["dist", "--params", "nyse-daily", "--delta", "1", "--grid", "-0.1:0.1:400"]);
    let r = column(&text, "r");
    let pdf = column(&text, "pdf_quadrature");
    assert_eq!(r.len(), 400);
    let total = trapezoid(&r, &pdf);
    assert!((total - 1.0).abs() <= 1e-5, "trapezoid integral {total}");
}

#[test]
fn dist_trapezoid_matches_quadrature_on_the_window() {
    let text = ok(&["dist", "--params", "nyse-daily", "--delta", "1", "--grid", "-0.1:0.1:400"]);
    let total = trapezoid(&column(&text, "r"), &column(&text, "pdf_quadrature"));
    let spec = ReturnDistSpec::new(VolatilityParams::nyse_daily(), 1.0, 0.0).unwrap();
    let exact = integrate(|r| return_pdf_quadrature(r, &spec).unwrap(), -0.1, 0.1, Tolerance::new(1e-13, 1e-12))
        .unwrap()
        .value;
    assert!((total - exact).abs() <= 1e-5, "{total} vs {exact}");
}

#[test]
fn dist_wide_grid_integrates_to_one() {
    let text = ok(&["dist", "--grid", "-1:1:20001"]);
    let total = trapezoid(&column(&text, "r"), &column(&text, "pdf_quadrature"));
    assert!((total - 1.0).abs() <= 1e-5, "{total}");
}

#[test]
fn fit_compare_grids_are_aligned() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.csv");
    ok(&["simulate", "--n", "4096", "--seed", "3", "--out", path.to_str().unwrap()]);
    let text = ok(&["fit-compare", "--in", path.to_str().unwrap(), "--bins", "50"]);
    let (cols, rows) = table(&text);
    assert_eq!(cols, ["bin_center", "empirical_density", "model_pdf"]);
    assert_eq!(rows.len(), 50);
    let centers: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(centers.windows(2).all(|w| w[1] > w[0]));
    let emp = column(&text, "empirical_density");
    let width = centers[1] - centers[0];
    assert!((emp.iter().sum::<f64>() * width - 1.0).abs() < 1e-9);
}

#[test]
fn out_dir_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fracvol"))
        .args(["simulate", "--n", "64", "--seed", "1"])
        .env("FRACVOL_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let written = std::fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    assert_eq!(table(&written).1.len(), 65);
}

#[test]
fn errors_are_machine_readable() {
    for (args, code) in [
        (&["bogus"][..], 2),
        (&["simulate", "--n", "10"][..], 2),
        (&["simulate", "--n", "10", "--seed", "1", "--hurst", "1.5"][..], 1),
        (&["ingest", "--in", "/nonexistent/prices.csv"][..], 1),
    ] {
        let out = fracvol(args);
        assert_eq!(out.status.code(), Some(code), "{args:?}");
        let line = String::from_utf8(out.stderr).unwrap();
        let last = line.lines().last().unwrap();
        let v: serde_json::Value = serde_json::from_str(last).unwrap_or_else(|_| panic!("{last}"));
        assert!(v["error"]["kind"].is_string() && v["error"]["message"].is_string(), "{last}");
    }
}

#[test]
fn ingest_sorts_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    std::fs::write(&input, "t,p\n2,101.5\n0,100\n1,100.5\n1,99\n").unwrap();
    let text = ok(&["ingest", "--in", input.to_str().unwrap()]);
    assert_eq!(column(&text, "time"), [0.0, 1.0, 2.0]);
    assert_eq!(column(&text, "price"), [100.0, 100.5, 101.5]);
}

#[test]
fn price_header_carries_the_caveat() {
    let text = ok(&["price", "--spot", "1", "--strike", "1", "--rate", "0.001", "--tau", "50", "--sigma-t", "0.01", "--k", "1", "--hurst", "0.8", "--beta", "0"]);
    assert!(text.lines().any(|l| l.starts_with('#') && l.to_lowercase().contains("risk")));
    let p = column(&text, "price")[0];
    assert!((p - 0.0746437511262).abs() < 1e-9, "{p}");
}
