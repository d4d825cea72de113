//! C interface to `fracvol`.
//!
//! Every fallible function returns a [`FracvolStatus`]; on failure the message
//! is available from [`fracvol_last_error`] on the same thread. Objects are
//! opaque handles created by `*_new` functions and released by `*_free`.
//! Output buffers are caller-allocated with their capacity passed alongside.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fracvol::distribution::{return_pdf_quadrature, ReturnDistSpec};
use fracvol::pricing::{
    alpha_squared, fractional_call_closed_with, fractional_call_price_with, implied_volatility, AlphaMode, AlphaParams,
    MForm, OptionSpec, PricingOptions,
};
use fracvol::simulator::{SimulationConfig, Simulator};
use fracvol::{FbmMethod, RngSeed, VolatilityParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracvolStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracvolFbmMethod {
    Cholesky = 0,
    Circulant = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracvolAlphaMode {
    Exact = 0,
    Approx = 1,
}

/// Model parameters (H, k, β, δ).
pub struct FracvolParams {
    inner: VolatilityParams,
}

/// Simulator with fixed configuration; each run takes its own seed.
pub struct FracvolSimulator {
    inner: Simulator,
    n_steps: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &fracvol::Error) -> FracvolStatus {
    use fracvol::Error::*;
    match e {
        InvalidParameter { .. } | InvalidInput(_) | Json(_) | CholeskyTooLarge { .. } => FracvolStatus::InvalidArgument,
        Io { .. } | NoValidRows { .. } => FracvolStatus::Io,
        _ => FracvolStatus::Numerical,
    }
}

enum Fail {
    Null(&'static str),
    Small { needed: usize, got: usize },
    Lib(fracvol::Error),
}

impl From<fracvol::Error> for Fail {
    fn from(e: fracvol::Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FracvolStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FracvolStatus::Ok,
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            FracvolStatus::NullPointer
        }
        Ok(Err(Fail::Small { needed, got })) => {
            set_error(format!("output buffer holds {got} values, {needed} needed"));
            FracvolStatus::BufferTooSmall
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            FracvolStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn out_slice<'a>(p: *mut f64, cap: usize, needed: usize, name: &'static str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    if cap < needed {
        return Err(Fail::Small { needed, got: cap });
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn in_slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(p: *mut T, v: T, name: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    p.write(v);
    Ok(())
}

/// Message of the last failure on this thread, or NULL. Valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn fracvol_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fracvol_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn fracvol_params_new(
    hurst: f64,
    k: f64,
    beta: f64,
    delta: f64,
    out: *mut *mut FracvolParams,
) -> FracvolStatus {
    guard(|| {
        let inner = VolatilityParams::new(hurst, k, beta, delta)?;
        write_out(out, Box::into_raw(Box::new(FracvolParams { inner })), "out")
    })
}

/// Named preset, e.g. "nyse-daily".
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn fracvol_params_preset(name: *const c_char, out: *mut *mut FracvolParams) -> FracvolStatus {
    guard(|| {
        if name.is_null() {
            return Err(Fail::Null("name"));
        }
        let name = CStr::from_ptr(name).to_string_lossy();
        let inner = VolatilityParams::preset(&name)
            .ok_or_else(|| fracvol::Error::InvalidInput(format!("unknown preset `{name}`")))?;
        write_out(out, Box::into_raw(Box::new(FracvolParams { inner })), "out")
    })
}

/// Parses {"hurst", "k", "beta", "delta"}.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn fracvol_params_from_json(json: *const c_char, out: *mut *mut FracvolParams) -> FracvolStatus {
    guard(|| {
        if json.is_null() {
            return Err(Fail::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| fracvol::Error::InvalidInput("json is not UTF-8".into()))?;
        let inner = VolatilityParams::from_json(text)?;
        write_out(out, Box::into_raw(Box::new(FracvolParams { inner })), "out")
    })
}

/// # Safety
/// `params` must be a valid handle; any output pointer may be NULL to skip it.
#[no_mangle]
pub unsafe extern "C" fn fracvol_params_get(
    params: *const FracvolParams,
    hurst: *mut f64,
    k: *mut f64,
    beta: *mut f64,
    delta: *mut f64,
) -> FracvolStatus {
    guard(|| {
        let p = deref(params, "params")?.inner;
        for (dst, v) in [(hurst, p.hurst()), (k, p.k()), (beta, p.beta()), (delta, p.delta())] {
            if !dst.is_null() {
                dst.write(v);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `params` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fracvol_params_free(params: *mut FracvolParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Fractional Brownian motion at t = 0, dt, …, n·dt; writes n + 1 values.
///
/// # Safety
/// `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn fracvol_fbm_generate(
    n: usize,
    hurst: f64,
    dt: f64,
    seed: u64,
    method: FracvolFbmMethod,
    out: *mut f64,
    capacity: usize,
) -> FracvolStatus {
    guard(|| {
        let dst = out_slice(out, capacity, n + 1, "out")?;
        let m = match method {
            FracvolFbmMethod::Cholesky => FbmMethod::Cholesky,
            FracvolFbmMethod::Circulant => FbmMethod::Circulant,
        };
        let path = fracvol::fbm::generate_fbm(n, hurst, dt, RngSeed(seed), m)?;
        dst.copy_from_slice(&path.values);
        Ok(())
    })
}

/// # Safety
/// `params` must be a valid handle; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn fracvol_simulator_new(
    params: *const FracvolParams,
    n_steps: usize,
    dt: f64,
    mu: f64,
    s0: f64,
    out: *mut *mut FracvolSimulator,
) -> FracvolStatus {
    guard(|| {
        let p = deref(params, "params")?.inner;
        let mut cfg = SimulationConfig::new(p, n_steps, 0);
        cfg.dt = dt;
        cfg.mu = mu;
        cfg.s0 = s0;
        let inner = Simulator::new(&cfg)?;
        write_out(out, Box::into_raw(Box::new(FracvolSimulator { inner, n_steps })), "out")
    })
}

/// One path: n_steps + 1 prices and n_steps volatilities.
///
/// # Safety
/// `sim` must be a valid handle; buffers must hold their stated capacities.
#[no_mangle]
pub unsafe extern "C" fn fracvol_simulator_run(
    sim: *const FracvolSimulator,
    seed: u64,
    prices: *mut f64,
    prices_capacity: usize,
    sigma: *mut f64,
    sigma_capacity: usize,
) -> FracvolStatus {
    guard(|| {
        let s = deref(sim, "sim")?;
        let pr = out_slice(prices, prices_capacity, s.n_steps + 1, "prices")?;
        let sg = out_slice(sigma, sigma_capacity, s.n_steps, "sigma")?;
        let run = s.inner.run(RngSeed(seed))?;
        pr.copy_from_slice(run.prices.prices());
        for (d, v) in sg.iter_mut().zip(&run.volatility.sigma) {
            *d = v.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fracvol_simulator_free(sim: *mut FracvolSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Calibrates (H, k, β) from log prices sampled every `resolution`.
///
/// # Safety
/// `log_prices` must hold `len` doubles; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn fracvol_calibrate(
    log_prices: *const f64,
    len: usize,
    resolution: f64,
    window: usize,
    out: *mut *mut FracvolParams,
) -> FracvolStatus {
    guard(|| {
        let lp = in_slice(log_prices, len, "log_prices")?;
        let opts = fracvol::volatility::CalibrationOptions { window, ..Default::default() };
        let inner = fracvol::volatility::calibrate_with(lp, resolution, &opts)?.params;
        write_out(out, Box::into_raw(Box::new(FracvolParams { inner })), "out")
    })
}

/// Return density at each r for horizon `lag`.
///
/// # Safety
/// `params` must be a valid handle; `r` holds `len` doubles, `out` `capacity`.
#[no_mangle]
pub unsafe extern "C" fn fracvol_return_pdf(
    params: *const FracvolParams,
    lag: f64,
    mu: f64,
    r: *const f64,
    len: usize,
    out: *mut f64,
    capacity: usize,
) -> FracvolStatus {
    guard(|| {
        let p = deref(params, "params")?.inner;
        let rs = in_slice(r, len, "r")?;
        let dst = out_slice(out, capacity, len, "out")?;
        let spec = ReturnDistSpec::new(p, lag, mu)?;
        for (d, &x) in dst.iter_mut().zip(rs) {
            *d = return_pdf_quadrature(x, &spec)?;
        }
        Ok(())
    })
}

/// # Safety
/// `params` must be a valid handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fracvol_alpha_squared(
    params: *const FracvolParams,
    tau: f64,
    mode: FracvolAlphaMode,
    out: *mut f64,
) -> FracvolStatus {
    guard(|| {
        let p = deref(params, "params")?.inner;
        let v = alpha_squared(&AlphaParams::new(&p, tau), alpha_mode(mode))?;
        write_out(out, v, "out")
    })
}

fn alpha_mode(m: FracvolAlphaMode) -> AlphaMode {
    match m {
        FracvolAlphaMode::Exact => AlphaMode::Exact,
        FracvolAlphaMode::Approx => AlphaMode::Approx,
    }
}

/// European call by mixing Black–Scholes over the mean-volatility law.
/// `closed_form` selects the M-function expression instead of Gauss–Hermite.
///
/// # Safety
/// `params` must be a valid handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fracvol_call_price(
    params: *const FracvolParams,
    spot: f64,
    strike: f64,
    rate: f64,
    tau: f64,
    sigma_t: f64,
    mode: FracvolAlphaMode,
    closed_form: bool,
    out: *mut f64,
) -> FracvolStatus {
    guard(|| {
        let p = deref(params, "params")?.inner;
        let o = OptionSpec::new(spot, strike, rate, tau, sigma_t)?;
        let m = alpha_mode(mode);
        let v = if closed_form {
            fractional_call_closed_with(&o, &p, m, MForm::Erfc)?
        } else {
            fractional_call_price_with(&o, &p, &PricingOptions { alpha_mode: m, ..Default::default() })?
        };
        write_out(out, v, "out")
    })
}

/// Black–Scholes volatility reproducing a call price.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fracvol_implied_vol(
    price: f64,
    spot: f64,
    strike: f64,
    rate: f64,
    tau: f64,
    out: *mut f64,
) -> FracvolStatus {
    guard(|| {
        let o = OptionSpec::new(spot, strike, rate, tau, 1.0)?;
        write_out(out, implied_volatility(price, &o)?.sigma, "out")
    })
}
