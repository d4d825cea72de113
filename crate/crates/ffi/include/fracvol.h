#ifndef FRACVOL_H
#define FRACVOL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FracvolAlphaMode {
  FRACVOL_ALPHA_MODE_EXACT = 0,
  FRACVOL_ALPHA_MODE_APPROX = 1,
} FracvolAlphaMode;

typedef enum FracvolFbmMethod {
  FRACVOL_FBM_METHOD_CHOLESKY = 0,
  FRACVOL_FBM_METHOD_CIRCULANT = 1,
} FracvolFbmMethod;

typedef enum FracvolStatus {
  FRACVOL_STATUS_OK = 0,
  FRACVOL_STATUS_NULL_POINTER = 1,
  FRACVOL_STATUS_INVALID_ARGUMENT = 2,
  FRACVOL_STATUS_BUFFER_TOO_SMALL = 3,
  FRACVOL_STATUS_NUMERICAL = 4,
  FRACVOL_STATUS_IO = 5,
  FRACVOL_STATUS_PANIC = 6,
} FracvolStatus;

// Model parameters (H, k, β, δ).
typedef struct FracvolParams FracvolParams;

// Simulator with fixed configuration; each run takes its own seed.
typedef struct FracvolSimulator FracvolSimulator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. Valid until the next failing call on this thread.
const char *fracvol_last_error(void);

// Library version as a static NUL-terminated string.
const char *fracvol_version(void);

// # Safety
// `out` must be a valid pointer to a handle slot.
enum FracvolStatus fracvol_params_new(double hurst,
                                      double k,
                                      double beta,
                                      double delta,
                                      struct FracvolParams **out);

// Named preset, e.g. "nyse-daily".
//
// # Safety
// `name` must be a NUL-terminated string; `out` a valid handle slot.
enum FracvolStatus fracvol_params_preset(const char *name, struct FracvolParams **out);

// Parses {"hurst", "k", "beta", "delta"}.
//
// # Safety
// `json` must be a NUL-terminated string; `out` a valid handle slot.
enum FracvolStatus fracvol_params_from_json(const char *json, struct FracvolParams **out);

// # Safety
// `params` must be a valid handle; any output pointer may be NULL to skip it.
enum FracvolStatus fracvol_params_get(const struct FracvolParams *params,
                                      double *hurst,
                                      double *k,
                                      double *beta,
                                      double *delta);

// # Safety
// `params` must come from this library and not be used afterwards. NULL is ignored.
void fracvol_params_free(struct FracvolParams *params);

// Fractional Brownian motion at t = 0, dt, …, n·dt; writes n + 1 values.
//
// # Safety
// `out` must hold `capacity` doubles.
enum FracvolStatus fracvol_fbm_generate(size_t n,
                                        double hurst,
                                        double dt,
                                        uint64_t seed,
                                        enum FracvolFbmMethod method,
                                        double *out,
                                        size_t capacity);

// # Safety
// `params` must be a valid handle; `out` a valid handle slot.
enum FracvolStatus fracvol_simulator_new(const struct FracvolParams *params,
                                         size_t n_steps,
                                         double dt,
                                         double mu,
                                         double s0,
                                         struct FracvolSimulator **out);

// One path: n_steps + 1 prices and n_steps volatilities.
//
// # Safety
// `sim` must be a valid handle; buffers must hold their stated capacities.
enum FracvolStatus fracvol_simulator_run(const struct FracvolSimulator *sim,
                                         uint64_t seed,
                                         double *prices,
                                         size_t prices_capacity,
                                         double *sigma,
                                         size_t sigma_capacity);

// # Safety
// `sim` must come from this library and not be used afterwards. NULL is ignored.
void fracvol_simulator_free(struct FracvolSimulator *sim);

// Calibrates (H, k, β) from log prices sampled every `resolution`.
//
// # Safety
// `log_prices` must hold `len` doubles; `out` a valid handle slot.
enum FracvolStatus fracvol_calibrate(const double *log_prices,
                                     size_t len,
                                     double resolution,
                                     size_t window,
                                     struct FracvolParams **out);

// Return density at each r for horizon `lag`.
//
// # Safety
// `params` must be a valid handle; `r` holds `len` doubles, `out` `capacity`.
enum FracvolStatus fracvol_return_pdf(const struct FracvolParams *params,
                                      double lag,
                                      double mu,
                                      const double *r,
                                      size_t len,
                                      double *out,
                                      size_t capacity);

// # Safety
// `params` must be a valid handle; `out` a valid pointer.
enum FracvolStatus fracvol_alpha_squared(const struct FracvolParams *params,
                                         double tau,
                                         enum FracvolAlphaMode mode,
                                         double *out);

// European call by mixing Black–Scholes over the mean-volatility law.
// `closed_form` selects the M-function expression instead of Gauss–Hermite.
//
// # Safety
// `params` must be a valid handle; `out` a valid pointer.
enum FracvolStatus fracvol_call_price(const struct FracvolParams *params,
                                      double spot,
                                      double strike,
                                      double rate,
                                      double tau,
                                      double sigma_t,
                                      enum FracvolAlphaMode mode,
                                      bool closed_form,
                                      double *out);

// Black–Scholes volatility reproducing a call price.
//
// # Safety
// `out` must be a valid pointer.
enum FracvolStatus fracvol_implied_vol(double price,
                                       double spot,
                                       double strike,
                                       double rate,
                                       double tau,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACVOL_H */
