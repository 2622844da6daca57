//! C ABI over pcr-core.
//!
//! Every fallible call returns a [`PcrStatus`]; on failure the message is
//! available from [`pcr_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use pcr_core::circuit::cell_basis;
use pcr_core::cli_io::campaign::cell_bounds;
use pcr_core::cli_io::{synthetic_device, Device};
use pcr_core::dynamics::{run_protocol, NoiseModel, ProtocolOptions};
use pcr_core::error::PcrError;
use pcr_core::gates::{GateTarget, TargetKind};
use pcr_core::optimizer::{evaluate_point, max_residual, optimize_cell, CellParams, OptimizeSettings};
use pcr_core::pauli::{PauliCoefficients, PauliWord};
use pcr_core::perturbative::{seed_parameters, SeedTable};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcrStatus {
    Ok = 0,
    /// Invalid input, schema or file problem.
    Config = 2,
    /// Resonance, hybridization or integration failure.
    Numeric = 3,
    NonConvergence = 4,
    NullPointer = 10,
    InvalidUtf8 = 11,
    Panic = 12,
}

/// Opaque device description with its resolved unit cells.
pub struct PcrDevice {
    inner: Device,
}

/// Opaque set of Pauli coefficients extracted at one parameter point.
pub struct PcrCoefficients {
    inner: PauliCoefficients,
    reference_amplitude: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PcrOptimizeResult {
    /// C12 [GHz], C23 [GHz], A1, A2, A3.
    pub params: [f64; 5],
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Largest wanted-relation residual [Hz].
    pub max_residual_hz: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PcrSimulation {
    pub fidelity: f64,
    /// Whole schedule [s].
    pub duration_s: f64,
    /// Pulse plateau [s].
    pub flat_top_s: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &PcrError) -> PcrStatus {
    match e.exit_code() {
        3 => PcrStatus::Numeric,
        4 => PcrStatus::NonConvergence,
        _ => PcrStatus::Config,
    }
}

struct Failure(PcrStatus, String);

impl From<PcrError> for Failure {
    fn from(e: PcrError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PcrStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus last-error message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PcrStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PcrStatus::Ok,
        Ok(Err(Failure(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            PcrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(PcrStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn target_arg(p: *const c_char) -> Result<GateTarget, Failure> {
    let kind: TargetKind = str_arg(p, "target")?.parse()?;
    Ok(GateTarget::new(kind))
}

fn settings(omega_hz: f64, cutoff: usize) -> Result<OptimizeSettings, Failure> {
    if !(omega_hz > 0.0) || cutoff < 2 {
        return Err(Failure(PcrStatus::Config, "need omega_hz > 0 and cutoff >= 2".into()));
    }
    Ok(OptimizeSettings {
        reference_amplitude: omega_hz,
        cutoff,
        ..Default::default()
    })
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn pcr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pcr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pcr_device_load(path: *const c_char, out: *mut *mut PcrDevice) -> PcrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = str_arg(path, "path")?;
        let inner = Device::load(Path::new(p))?;
        *out = Box::into_raw(Box::new(PcrDevice { inner }));
        Ok(())
    })
}

/// Loads the shipped synthetic device.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pcr_device_synthetic(out: *mut *mut PcrDevice) -> PcrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(PcrDevice {
            inner: synthetic_device()?,
        }));
        Ok(())
    })
}

/// # Safety
/// `device` must come from a `pcr_device_*` constructor or be NULL.
#[no_mangle]
pub unsafe extern "C" fn pcr_device_free(device: *mut PcrDevice) {
    if !device.is_null() {
        drop(Box::from_raw(device));
    }
}

/// Number of unit cells, 0 for NULL.
///
/// # Safety
/// `device` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn pcr_device_cell_count(device: *const PcrDevice) -> usize {
    device.as_ref().map_or(0, |d| d.inner.cells.len())
}

/// Qubit frequencies (Q1, Q2, Q3) of a 1-based cell [Hz].
///
/// # Safety
/// `device` must be a live handle and `out` point to three doubles.
#[no_mangle]
pub unsafe extern "C" fn pcr_device_cell_frequencies(
    device: *const PcrDevice,
    cell: usize,
    out: *mut f64,
) -> PcrStatus {
    guard(|| {
        let d = device.as_ref().ok_or_else(|| null("device"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let f = d.inner.cell(cell)?.spec.qubit_freqs;
        std::ptr::copy_nonoverlapping(f.as_ptr(), out, 3);
        Ok(())
    })
}

/// Extracts the 64 Pauli coefficients of a cell at `params` (C12 GHz, C23 GHz,
/// A1, A2, A3) with reference amplitude `omega_hz`.
///
/// # Safety
/// `device` must be a live handle, `params` point to five doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn pcr_coefficients_extract(
    device: *const PcrDevice,
    cell: usize,
    params: *const f64,
    omega_hz: f64,
    cutoff: usize,
    out: *mut *mut PcrCoefficients,
) -> PcrStatus {
    guard(|| {
        let d = device.as_ref().ok_or_else(|| null("device"))?;
        if params.is_null() {
            return Err(null("params"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let p = CellParams::from_slice(std::slice::from_raw_parts(params, 5));
        let s = settings(omega_hz, cutoff)?;
        let basis = cell_basis(cutoff)?;
        let ev = evaluate_point(&d.inner.cell(cell)?.spec, &p, &s, &basis)?;
        *out = Box::into_raw(Box::new(PcrCoefficients {
            inner: ev.coefficients,
            reference_amplitude: omega_hz,
        }));
        Ok(())
    })
}

/// α of a Pauli word such as "ZZX" [Hz].
///
/// # Safety
/// `coeffs` must be a live handle, `word` NUL-terminated and `out_hz` valid.
#[no_mangle]
pub unsafe extern "C" fn pcr_coefficients_get(
    coeffs: *const PcrCoefficients,
    word: *const c_char,
    out_hz: *mut f64,
) -> PcrStatus {
    guard(|| {
        let c = coeffs.as_ref().ok_or_else(|| null("coeffs"))?;
        if out_hz.is_null() {
            return Err(null("out_hz"));
        }
        let w: PauliWord = str_arg(word, "word")?.parse()?;
        *out_hz = c.inner.get(w);
        Ok(())
    })
}

/// # Safety
/// `coeffs` must come from [`pcr_coefficients_extract`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn pcr_coefficients_free(coeffs: *mut PcrCoefficients) {
    if !coeffs.is_null() {
        drop(Box::from_raw(coeffs));
    }
}

/// Seeds and optimizes one cell for `target` ("GHZ", "iToffoli", "CCNOT", "CZZ").
/// A run that stops at the iteration cap still fills `out` and returns
/// `PCR_STATUS_NON_CONVERGENCE`.
///
/// # Safety
/// `device` must be a live handle, `target` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pcr_optimize(
    device: *const PcrDevice,
    cell: usize,
    target: *const c_char,
    omega_hz: f64,
    out: *mut PcrOptimizeResult,
) -> PcrStatus {
    guard(|| {
        let d = device.as_ref().ok_or_else(|| null("device"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = target_arg(target)?;
        let s = settings(omega_hz, 4)?;
        let c = d.inner.cell(cell)?;
        let bounds = cell_bounds(c);
        let seed = seed_parameters(&t, &c.spec, &bounds, cell, &SeedTable::curated(), omega_hz)?;
        let opt = optimize_cell(&c.spec, &t, &seed, &bounds, &s, None)?;
        *out = PcrOptimizeResult {
            params: opt.params.0,
            initial_cost: opt.trace.initial_cost,
            final_cost: opt.breakdown.total,
            max_residual_hz: max_residual(&t, &opt.coefficients),
            iterations: opt.trace.iterations.len(),
            converged: opt.trace.converged,
        };
        if !opt.trace.converged {
            return Err(PcrError::NonConvergence {
                iterations: s.powell.max_iter,
            }
            .into());
        }
        Ok(())
    })
}

/// Runs the target's pulse protocol on the effective model at `drive_hz`.
/// `t1_s` = `t2_s` = 0 selects a noiseless run; otherwise they apply to all three qubits.
///
/// # Safety
/// `coeffs` must be a live handle, `target` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pcr_simulate(
    coeffs: *const PcrCoefficients,
    target: *const c_char,
    drive_hz: f64,
    t1_s: f64,
    t2_s: f64,
    out: *mut PcrSimulation,
) -> PcrStatus {
    guard(|| {
        let c = coeffs.as_ref().ok_or_else(|| null("coeffs"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = target_arg(target)?;
        let noise = if t1_s == 0.0 && t2_s == 0.0 {
            NoiseModel::none()
        } else {
            let n = NoiseModel::uniform(t1_s, t2_s);
            n.validate()?;
            n
        };
        let options = ProtocolOptions {
            noise,
            ..Default::default()
        };
        let r = run_protocol(&t, &c.inner, c.reference_amplitude, drive_hz, &options)?;
        *out = PcrSimulation {
            fidelity: r.fidelity,
            duration_s: r.duration,
            flat_top_s: r.flat_top,
        };
        Ok(())
    })
}
