#ifndef PCR_H
#define PCR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PcrStatus {
  PCR_STATUS_OK = 0,
  // Invalid input, schema or file problem.
  PCR_STATUS_CONFIG = 2,
  // Resonance, hybridization or integration failure.
  PCR_STATUS_NUMERIC = 3,
  PCR_STATUS_NON_CONVERGENCE = 4,
  PCR_STATUS_NULL_POINTER = 10,
  PCR_STATUS_INVALID_UTF8 = 11,
  PCR_STATUS_PANIC = 12,
} PcrStatus;

// Opaque set of Pauli coefficients extracted at one parameter point.
typedef struct PcrCoefficients PcrCoefficients;

// Opaque device description with its resolved unit cells.
typedef struct PcrDevice PcrDevice;

typedef struct PcrOptimizeResult {
  // C12 [GHz], C23 [GHz], A1, A2, A3.
  double params[5];
  double initial_cost;
  double final_cost;
  // Largest wanted-relation residual [Hz].
  double max_residual_hz;
  size_t iterations;
  bool converged;
} PcrOptimizeResult;

typedef struct PcrSimulation {
  double fidelity;
  // Whole schedule [s].
  double duration_s;
  // Pulse plateau [s].
  double flat_top_s;
} PcrSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into this library from the same thread.
const char *pcr_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *pcr_version(void);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum PcrStatus pcr_device_load(const char *path, struct PcrDevice **out);

// Loads the shipped synthetic device.
//
// # Safety
// `out` must be a valid pointer.
enum PcrStatus pcr_device_synthetic(struct PcrDevice **out);

// # Safety
// `device` must come from a `pcr_device_*` constructor or be NULL.
void pcr_device_free(struct PcrDevice *device);

// Number of unit cells, 0 for NULL.
//
// # Safety
// `device` must be a live handle or NULL.
size_t pcr_device_cell_count(const struct PcrDevice *device);

// Qubit frequencies (Q1, Q2, Q3) of a 1-based cell [Hz].
//
// # Safety
// `device` must be a live handle and `out` point to three doubles.
enum PcrStatus pcr_device_cell_frequencies(const struct PcrDevice *device,
                                           size_t cell,
                                           double *out);

// Extracts the 64 Pauli coefficients of a cell at `params` (C12 GHz, C23 GHz,
// A1, A2, A3) with reference amplitude `omega_hz`.
//
// # Safety
// `device` must be a live handle, `params` point to five doubles and `out` be valid.
enum PcrStatus pcr_coefficients_extract(const struct PcrDevice *device,
                                        size_t cell,
                                        const double *params,
                                        double omega_hz,
                                        size_t cutoff,
                                        struct PcrCoefficients **out);

// α of a Pauli word such as "ZZX" [Hz].
//
// # Safety
// `coeffs` must be a live handle, `word` NUL-terminated and `out_hz` valid.
enum PcrStatus pcr_coefficients_get(const struct PcrCoefficients *coeffs,
                                    const char *word,
                                    double *out_hz);

// # Safety
// `coeffs` must come from [`pcr_coefficients_extract`] or be NULL.
void pcr_coefficients_free(struct PcrCoefficients *coeffs);

// Seeds and optimizes one cell for `target` ("GHZ", "iToffoli", "CCNOT", "CZZ").
// A run that stops at the iteration cap still fills `out` and returns
// `PCR_STATUS_NON_CONVERGENCE`.
//
// # Safety
// `device` must be a live handle, `target` NUL-terminated and `out` valid.
enum PcrStatus pcr_optimize(const struct PcrDevice *device,
                            size_t cell,
                            const char *target,
                            double omega_hz,
                            struct PcrOptimizeResult *out);

// Runs the target's pulse protocol on the effective model at `drive_hz`.
// `t1_s` = `t2_s` = 0 selects a noiseless run; otherwise they apply to all three qubits.
//
// # Safety
// `coeffs` must be a live handle, `target` NUL-terminated and `out` valid.
enum PcrStatus pcr_simulate(const struct PcrCoefficients *coeffs,
                            const char *target,
                            double drive_hz,
                            double t1_s,
                            double t2_s,
                            struct PcrSimulation *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCR_H */
