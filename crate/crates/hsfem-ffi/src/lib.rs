//! C ABI for the hsfem solver.
//!
//! Conventions: handle-producing calls return a status code and write the
//! handle through an out-pointer; every handle has a matching `_free`;
//! buffers are caller-allocated with an explicit length; on any non-OK
//! status a thread-local message is readable via [`hsfem_last_error_message`]
//! until the next failing call on the same thread.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hsfem::config::{config_from_pairs, is_known_key, parse_pairs, RunConfig};
use hsfem::error::Error;
use hsfem::stepper::RunOutcome;

/// Status codes mirroring the solver's error taxonomy (and the CLI's exit
/// codes for config/solver/invariant failures).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsfemStatus {
    Ok = 0,
    InvalidArgument = 1,
    ConfigError = 2,
    SolverFailure = 3,
    InvariantViolation = 4,
    IoError = 5,
    DomainError = 6,
    UnsupportedMesh = 7,
    EvaluationError = 8,
    NullPointer = 9,
    Panic = 10,
}

/// Opaque configuration handle: a key/value set resolved and validated when
/// a run starts.
pub struct HsfemConfig {
    pairs: BTreeMap<String, String>,
}

/// Opaque result handle of one completed run.
pub struct HsfemOutcome {
    outcome: RunOutcome,
}

/// One per-step diagnostics record.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HsfemRecord {
    pub t: f64,
    pub min_n: f64,
    pub max_n: f64,
    pub min_dtn: f64,
    pub mass: f64,
    pub mass_balance_residual: f64,
    pub energy_lhs: f64,
    pub energy_rhs: f64,
    pub grad_p: f64,
    pub complementarity: f64,
    /// NaN on all but the first record.
    pub h4_min: f64,
    pub snaps: u64,
}

/// Mesh certificate report.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HsfemMeshReport {
    pub nodes: u64,
    pub elements: u64,
    pub all_right_angled: bool,
    pub all_nonobtuse: bool,
    pub max_angle: f64,
    pub h_diameter: f64,
    pub h_leg: f64,
    pub stiffness_max_offdiag: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(e: &Error) -> HsfemStatus {
    match e {
        Error::InvalidArgument(_) => HsfemStatus::InvalidArgument,
        Error::Geometry(_) => HsfemStatus::InvalidArgument,
        Error::Domain(_) => HsfemStatus::DomainError,
        Error::UnsupportedMesh(_) => HsfemStatus::UnsupportedMesh,
        Error::Evaluation(_) => HsfemStatus::EvaluationError,
        Error::Config(_) => HsfemStatus::ConfigError,
        Error::SolverDiverged { .. } => HsfemStatus::SolverFailure,
        Error::InvariantViolation { .. } => HsfemStatus::InvariantViolation,
        Error::Io { .. } => HsfemStatus::IoError,
    }
}

fn fail(e: &Error) -> HsfemStatus {
    set_error(&e.to_string());
    status_of(e)
}

fn guard(body: impl FnOnce() -> HsfemStatus) -> HsfemStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            HsfemStatus::Panic
        }
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

/// Message describing the most recent failure on this thread. Valid until
/// the next failing call; never null.
#[no_mangle]
pub extern "C" fn hsfem_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Crate version as a static string.
#[no_mangle]
pub extern "C" fn hsfem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create an empty configuration. Populate it with [`hsfem_config_set`];
/// required keys are k, nu, P_max, tau, nx, ny, alpha.
#[no_mangle]
pub extern "C" fn hsfem_config_new() -> *mut HsfemConfig {
    Box::into_raw(Box::new(HsfemConfig {
        pairs: BTreeMap::new(),
    }))
}

/// Load a `key = value` configuration file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hsfem_config_load(
    path: *const c_char,
    out: *mut *mut HsfemConfig,
) -> HsfemStatus {
    guard(|| {
        let (Some(path), false) = (cstr(path), out.is_null()) else {
            set_error("null or non-UTF8 argument");
            return HsfemStatus::NullPointer;
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                set_error(&format!("cannot read {path}: {e}"));
                return HsfemStatus::IoError;
            }
        };
        match parse_pairs(&text) {
            Ok(pairs) => {
                *out = Box::into_raw(Box::new(HsfemConfig { pairs }));
                HsfemStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Set one configuration key (overwrites a previous value). Unknown keys are
/// rejected; values are validated when the configuration is used.
///
/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hsfem_config_set(
    cfg: *mut HsfemConfig,
    key: *const c_char,
    value: *const c_char,
) -> HsfemStatus {
    guard(|| {
        let (Some(cfg), Some(key), Some(value)) =
            (cfg.as_mut(), cstr(key), cstr(value))
        else {
            set_error("null or non-UTF8 argument");
            return HsfemStatus::NullPointer;
        };
        if !is_known_key(key) {
            set_error(&format!("unknown key `{key}`"));
            return HsfemStatus::ConfigError;
        }
        cfg.pairs.insert(key.to_string(), value.to_string());
        HsfemStatus::Ok
    })
}

/// # Safety
/// `cfg` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hsfem_config_free(cfg: *mut HsfemConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

fn resolve(cfg: &HsfemConfig) -> Result<RunConfig, Error> {
    config_from_pairs(&cfg.pairs, |key| {
        std::env::var(format!("HSFEM_{}", key.to_uppercase())).ok()
    })
}

/// Integrate the configuration to t_final. On success the outcome handle
/// owns the mesh, the final state and the per-step diagnostics records.
///
/// # Safety
/// `cfg` must be a live configuration handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hsfem_run(
    cfg: *const HsfemConfig,
    out: *mut *mut HsfemOutcome,
) -> HsfemStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            set_error("null argument");
            return HsfemStatus::NullPointer;
        };
        let run_cfg = match resolve(cfg) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        match hsfem::stepper::run(&run_cfg) {
            Ok(outcome) => {
                if let Some(abort) = &outcome.abort {
                    let status = status_of(&abort.error);
                    set_error(&format!("aborted at step {}: {}", abort.step, abort.error));
                    return status;
                }
                *out = Box::into_raw(Box::new(HsfemOutcome { outcome }));
                HsfemStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `outcome` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hsfem_outcome_free(outcome: *mut HsfemOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// # Safety
/// `outcome` must be a live outcome handle.
#[no_mangle]
pub unsafe extern "C" fn hsfem_outcome_num_nodes(outcome: *const HsfemOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.outcome.mesh.num_nodes())
}

/// Number of completed steps (records = steps + 1).
///
/// # Safety
/// `outcome` must be a live outcome handle.
#[no_mangle]
pub unsafe extern "C" fn hsfem_outcome_num_steps(outcome: *const HsfemOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.outcome.final_state.step)
}

/// # Safety
/// `outcome` must be a live outcome handle.
#[no_mangle]
pub unsafe extern "C" fn hsfem_outcome_final_time(outcome: *const HsfemOutcome) -> f64 {
    outcome.as_ref().map_or(f64::NAN, |o| o.outcome.final_state.t)
}

/// Minimum entry of the initial residual vector (the measured monotonicity
/// precondition).
///
/// # Safety
/// `outcome` must be a live outcome handle.
#[no_mangle]
pub unsafe extern "C" fn hsfem_outcome_h4_min(outcome: *const HsfemOutcome) -> f64 {
    outcome.as_ref().map_or(f64::NAN, |o| o.outcome.h4_min)
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> HsfemStatus {
    if buf.is_null() {
        set_error("null buffer");
        return HsfemStatus::NullPointer;
    }
    if len != src.len() {
        set_error(&format!("buffer length {len} does not match {}", src.len()));
        return HsfemStatus::InvalidArgument;
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), buf, len);
    HsfemStatus::Ok
}

/// Copy the final nodal density into `buf` (length must equal the node
/// count).
///
/// # Safety
/// `outcome` must be live; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hsfem_outcome_density(
    outcome: *const HsfemOutcome,
    buf: *mut f64,
    len: usize,
) -> HsfemStatus {
    guard(|| {
        let Some(o) = outcome.as_ref() else {
            set_error("null outcome");
            return HsfemStatus::NullPointer;
        };
        copy_out(o.outcome.final_state.n.values(), buf, len)
    })
}

/// Copy the final nodal pressure into `buf`.
///
/// # Safety
/// As [`hsfem_outcome_density`].
#[no_mangle]
pub unsafe extern "C" fn hsfem_outcome_pressure(
    outcome: *const HsfemOutcome,
    buf: *mut f64,
    len: usize,
) -> HsfemStatus {
    guard(|| {
        let Some(o) = outcome.as_ref() else {
            set_error("null outcome");
            return HsfemStatus::NullPointer;
        };
        copy_out(o.outcome.final_state.p.values(), buf, len)
    })
}

/// Copy node coordinates into two buffers of node-count length.
///
/// # Safety
/// `outcome` must be live; both buffers must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hsfem_outcome_node_coords(
    outcome: *const HsfemOutcome,
    x: *mut f64,
    y: *mut f64,
    len: usize,
) -> HsfemStatus {
    guard(|| {
        let Some(o) = outcome.as_ref() else {
            set_error("null outcome");
            return HsfemStatus::NullPointer;
        };
        let nodes = o.outcome.mesh.nodes();
        if x.is_null() || y.is_null() {
            set_error("null buffer");
            return HsfemStatus::NullPointer;
        }
        if len != nodes.len() {
            set_error(&format!("buffer length {len} does not match {}", nodes.len()));
            return HsfemStatus::InvalidArgument;
        }
        for (i, p) in nodes.iter().enumerate() {
            *x.add(i) = p[0];
            *y.add(i) = p[1];
        }
        HsfemStatus::Ok
    })
}

/// # Safety
/// `outcome` must be a live outcome handle.
#[no_mangle]
pub unsafe extern "C" fn hsfem_outcome_num_records(outcome: *const HsfemOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.outcome.records.len())
}

/// Fetch record `index` (0 is the initial state).
///
/// # Safety
/// `outcome` must be live and `record` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hsfem_outcome_record(
    outcome: *const HsfemOutcome,
    index: usize,
    record: *mut HsfemRecord,
) -> HsfemStatus {
    guard(|| {
        let (Some(o), false) = (outcome.as_ref(), record.is_null()) else {
            set_error("null argument");
            return HsfemStatus::NullPointer;
        };
        let Some(r) = o.outcome.records.get(index) else {
            set_error(&format!(
                "record index {index} out of range ({} records)",
                o.outcome.records.len()
            ));
            return HsfemStatus::InvalidArgument;
        };
        *record = HsfemRecord {
            t: r.t,
            min_n: r.min_n,
            max_n: r.max_n,
            min_dtn: r.min_dtn,
            mass: r.mass,
            mass_balance_residual: r.mass_balance_residual,
            energy_lhs: r.energy_lhs,
            energy_rhs: r.energy_rhs,
            grad_p: r.grad_p_norm,
            complementarity: r.complementarity,
            h4_min: r.h4_min.unwrap_or(f64::NAN),
            snaps: r.snaps as u64,
        };
        HsfemStatus::Ok
    })
}

/// Build the configured mesh and report its angle classification and the
/// stiffness off-diagonal certificate.
///
/// # Safety
/// `cfg` must be a live configuration handle and `report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hsfem_check_mesh(
    cfg: *const HsfemConfig,
    report: *mut HsfemMeshReport,
) -> HsfemStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), report.is_null()) else {
            set_error("null argument");
            return HsfemStatus::NullPointer;
        };
        let run_cfg = match resolve(cfg) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        let mesh = match hsfem::mesh::Mesh::build_rect(
            run_cfg.mesh.x0,
            run_cfg.mesh.x1,
            run_cfg.mesh.y0,
            run_cfg.mesh.y1,
            run_cfg.mesh.nx,
            run_cfg.mesh.ny,
            hsfem::mesh::Diagonal::SwNe,
        ) {
            Ok(m) => m,
            Err(e) => return fail(&e),
        };
        let angles = mesh.angle_report();
        let sign = hsfem::assembly::offdiag_sign_check(&hsfem::assembly::stiffness(&mesh));
        *report = HsfemMeshReport {
            nodes: mesh.num_nodes() as u64,
            elements: mesh.num_elements() as u64,
            all_right_angled: angles.all_right_angled,
            all_nonobtuse: angles.all_nonobtuse,
            max_angle: angles.max_angle,
            h_diameter: mesh.h_diameter(),
            h_leg: mesh.h_leg().unwrap_or(f64::NAN),
            stiffness_max_offdiag: sign.max_offdiag,
        };
        HsfemStatus::Ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn key(cfg: *mut HsfemConfig, k: &str, v: &str) {
        let k = CString::new(k).unwrap();
        let v = CString::new(v).unwrap();
        let status = unsafe { hsfem_config_set(cfg, k.as_ptr(), v.as_ptr()) };
        assert_eq!(status, HsfemStatus::Ok);
    }

    fn small_config() -> *mut HsfemConfig {
        let cfg = hsfem_config_new();
        for (k, v) in [
            ("k", "100"),
            ("nu", "0.5"),
            ("P_max", "1"),
            ("tau", "1e-4"),
            ("nx", "8"),
            ("ny", "8"),
            ("alpha", "1"),
            ("t_final", "1e-3"),
        ] {
            key(cfg, k, v);
        }
        cfg
    }

    #[test]
    fn run_via_the_c_abi() {
        let cfg = small_config();
        let mut out: *mut HsfemOutcome = std::ptr::null_mut();
        let status = unsafe { hsfem_run(cfg, &mut out) };
        assert_eq!(status, HsfemStatus::Ok);
        assert!(!out.is_null());

        let nodes = unsafe { hsfem_outcome_num_nodes(out) };
        assert_eq!(nodes, 81);
        assert_eq!(unsafe { hsfem_outcome_num_steps(out) }, 10);
        let t = unsafe { hsfem_outcome_final_time(out) };
        assert!((t - 1e-3).abs() < 1e-12);

        let mut density = vec![0.0; nodes];
        let status = unsafe { hsfem_outcome_density(out, density.as_mut_ptr(), nodes) };
        assert_eq!(status, HsfemStatus::Ok);
        assert!(density.iter().all(|v| *v >= 0.0 && v.is_finite()));
        // wrong buffer length is rejected
        let status = unsafe { hsfem_outcome_density(out, density.as_mut_ptr(), nodes - 1) };
        assert_eq!(status, HsfemStatus::InvalidArgument);

        let mut record = std::mem::MaybeUninit::<HsfemRecord>::uninit();
        let status = unsafe { hsfem_outcome_record(out, 0, record.as_mut_ptr()) };
        assert_eq!(status, HsfemStatus::Ok);
        let record = unsafe { record.assume_init() };
        assert_eq!(record.t, 0.0);
        assert!(!record.h4_min.is_nan());

        let n_rec = unsafe { hsfem_outcome_num_records(out) };
        assert_eq!(n_rec, 11);

        unsafe {
            hsfem_outcome_free(out);
            hsfem_config_free(cfg);
        }
    }

    #[test]
    fn config_errors_surface_with_messages() {
        let cfg = hsfem_config_new();
        let k = CString::new("bogus").unwrap();
        let v = CString::new("1").unwrap();
        let status = unsafe { hsfem_config_set(cfg, k.as_ptr(), v.as_ptr()) };
        assert_eq!(status, HsfemStatus::ConfigError);
        let msg = unsafe { CStr::from_ptr(hsfem_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("bogus"));

        // incomplete configuration: required keys reported at run time
        let mut out: *mut HsfemOutcome = std::ptr::null_mut();
        let status = unsafe { hsfem_run(cfg, &mut out) };
        assert_eq!(status, HsfemStatus::ConfigError);
        let msg = unsafe { CStr::from_ptr(hsfem_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("missing required key"));
        unsafe { hsfem_config_free(cfg) };
    }

    #[test]
    fn mesh_report_via_the_c_abi() {
        let cfg = small_config();
        let mut report = std::mem::MaybeUninit::<HsfemMeshReport>::uninit();
        let status = unsafe { hsfem_check_mesh(cfg, report.as_mut_ptr()) };
        assert_eq!(status, HsfemStatus::Ok);
        let report = unsafe { report.assume_init() };
        assert_eq!(report.nodes, 81);
        assert_eq!(report.elements, 128);
        assert!(report.all_right_angled && report.all_nonobtuse);
        assert!(report.stiffness_max_offdiag <= 0.0);
        unsafe { hsfem_config_free(cfg) };
    }

    #[test]
    fn null_pointers_do_not_crash() {
        let status = unsafe { hsfem_config_load(std::ptr::null(), std::ptr::null_mut()) };
        assert_eq!(status, HsfemStatus::NullPointer);
        unsafe {
            assert_eq!(hsfem_outcome_num_nodes(std::ptr::null()), 0);
            assert!(hsfem_outcome_final_time(std::ptr::null()).is_nan());
            hsfem_outcome_free(std::ptr::null_mut());
            hsfem_config_free(std::ptr::null_mut());
        }
        assert!(!hsfem_version().is_null());
    }
}
