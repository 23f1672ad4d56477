//! C interface to `paraboloid-lab`.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `*_free` function. Every fallible call returns a
//! [`PlabStatus`]; the message for the most recent failure on the calling
//! thread is available from [`plab_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use paraboloid_lab::cli::{self, ExperimentReport, Params};
use paraboloid_lab::extension::{extend, Freq};
use paraboloid_lab::grid::Cube;
use paraboloid_lab::wavelet::{smooth_wavelet, standard_smooth_family, SmoothFamily};
use paraboloid_lab::LabError;

/// Result of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    UnknownExperiment = 4,
    InvalidArgument = 5,
    Numerical = 6,
    Io = 7,
    Panic = 8,
}

impl From<&LabError> for PlabStatus {
    fn from(e: &LabError) -> Self {
        match e {
            LabError::Config(_) => PlabStatus::Config,
            LabError::UnknownExperiment(_) => PlabStatus::UnknownExperiment,
            LabError::InvalidArgument(_) | LabError::DimensionMismatch { .. } | LabError::IndexMismatch(_) => {
                PlabStatus::InvalidArgument
            }
            LabError::IllConditioned { .. }
            | LabError::Quadrature { .. }
            | LabError::Budget(_)
            | LabError::NeumannDivergence { .. } => PlabStatus::Numerical,
            LabError::Io(_) => PlabStatus::Io,
        }
    }
}

/// Experiment parameters.
pub struct PlabParams(Params);

/// Finished experiment report.
pub struct PlabReport(ExperimentReport);

/// Smooth wavelet family.
pub struct PlabFamily(Arc<SmoothFamily>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(e: LabError) -> PlabStatus {
    set_error(e.to_string());
    PlabStatus::from(&e)
}

/// Run `f`, turning panics into [`PlabStatus::Panic`].
fn guard(f: impl FnOnce() -> PlabStatus) -> PlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            PlabStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, PlabStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(PlabStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        PlabStatus::InvalidUtf8
    })
}

macro_rules! ok_or_return {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!("null pointer: ", stringify!($p)));
            return PlabStatus::NullPointer;
        })+
    };
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn plab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn plab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Parameters

/// Default parameters.
#[no_mangle]
pub extern "C" fn plab_params_default() -> *mut PlabParams {
    Box::into_raw(Box::new(PlabParams(Params::default())))
}

/// Parse TOML parameters into `*out`.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn plab_params_from_toml(toml: *const c_char, out: *mut *mut PlabParams) -> PlabStatus {
    guard(|| {
        non_null!(out);
        let text = ok_or_return!(read_str(toml));
        match Params::from_toml(text, &[]) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(PlabParams(p)));
                PlabStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Apply one `key=value` override, as `--set` does on the command line.
///
/// # Safety
/// `params` must be a live handle and `item` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn plab_params_set(params: *mut PlabParams, item: *const c_char) -> PlabStatus {
    guard(|| {
        non_null!(params);
        let item = ok_or_return!(read_str(item));
        let p = &mut (*params).0;
        let merged = p.to_toml().and_then(|t| Params::from_toml(&t, &[item.to_string()]));
        match merged {
            Ok(n) => {
                *p = n;
                PlabStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Check the parameters for `experiment` (may be null for the generic rules).
///
/// # Safety
/// `params` must be a live handle; `experiment` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn plab_params_validate(params: *const PlabParams, experiment: *const c_char) -> PlabStatus {
    guard(|| {
        non_null!(params);
        let exp = if experiment.is_null() { None } else { Some(ok_or_return!(read_str(experiment))) };
        match (*params).0.resolved().validate(exp) {
            Ok(()) => PlabStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `params` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plab_params_free(params: *mut PlabParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

// ---------------------------------------------------------------------------
// Experiments

/// Number of available experiments.
#[no_mangle]
pub extern "C" fn plab_experiment_count() -> usize {
    cli::EXPERIMENTS.len()
}

/// Name of experiment `i` as a new string, or null when out of range.
#[no_mangle]
pub extern "C" fn plab_experiment_name(i: usize) -> *mut c_char {
    cli::EXPERIMENTS.get(i).map_or(ptr::null_mut(), |(n, _)| CString::new(*n).map_or(ptr::null_mut(), CString::into_raw))
}

/// Run an experiment in memory and store the report in `*out`.
///
/// # Safety
/// `experiment` must be NUL-terminated, `params` a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn plab_run(experiment: *const c_char, params: *const PlabParams, out: *mut *mut PlabReport) -> PlabStatus {
    guard(|| {
        non_null!(params, out);
        let name = ok_or_return!(read_str(experiment));
        match cli::run_report(name, &(*params).0) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(PlabReport(r)));
                PlabStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// 1 when every gating check passed, 0 otherwise (also for null).
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn plab_report_passed(report: *const PlabReport) -> i32 {
    if report.is_null() {
        return 0;
    }
    i32::from((*report).0.passed)
}

/// Number of data rows.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn plab_report_row_count(report: *const PlabReport) -> usize {
    if report.is_null() {
        return 0;
    }
    (*report).0.rows.len()
}

/// The report as JSON; release with [`plab_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn plab_report_json(report: *const PlabReport, out: *mut *mut c_char) -> PlabStatus {
    guard(|| {
        non_null!(report, out);
        match (*report).0.to_json() {
            Ok(s) => match CString::new(s) {
                Ok(c) => {
                    *out = c.into_raw();
                    PlabStatus::Ok
                }
                Err(_) => fail(LabError::Io("report JSON contains a NUL byte".into())),
            },
            Err(e) => fail(e),
        }
    })
}

/// Write the rows as CSV to `path`.
///
/// # Safety
/// `report` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn plab_report_write_csv(report: *const PlabReport, path: *const c_char) -> PlabStatus {
    guard(|| {
        non_null!(report);
        let path = ok_or_return!(read_str(path));
        let res = std::fs::File::create(path).map_err(LabError::from).and_then(|f| (*report).0.write_csv(f));
        match res {
            Ok(()) => PlabStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plab_report_free(report: *mut PlabReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

// ---------------------------------------------------------------------------
// Wavelets

/// Build the smooth Alpert family for spatial dimension `dim`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn plab_family_new(dim: usize, kappa: usize, eta: f64, out: *mut *mut PlabFamily) -> PlabStatus {
    guard(|| {
        non_null!(out);
        match standard_smooth_family(dim, kappa, eta) {
            Ok(f) => {
                *out = Box::into_raw(Box::new(PlabFamily(f)));
                PlabStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of members in the family.
///
/// # Safety
/// `family` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn plab_family_len(family: *const PlabFamily) -> usize {
    if family.is_null() {
        return 0;
    }
    (*family).0.len()
}

/// Extension `E h(ξ', ξ_d)` of member `a` on the cube with the given centre
/// (length `dim`) and side. `xi` has length `dim`.
///
/// # Safety
/// `family` must be a live handle, `center` and `xi` must point to `dim`
/// values and `re`, `im` must be valid.
#[no_mangle]
pub unsafe extern "C" fn plab_wavelet_extend(
    family: *const PlabFamily,
    a: usize,
    center: *const f64,
    side: f64,
    xi: *const f64,
    xi_d: f64,
    re: *mut f64,
    im: *mut f64,
) -> PlabStatus {
    guard(|| {
        non_null!(family, center, xi, re, im);
        let fam = &(*family).0;
        let dim = fam.dim();
        let c = std::slice::from_raw_parts(center, dim).to_vec();
        let x = std::slice::from_raw_parts(xi, dim).to_vec();
        let res = Cube::new(c, side)
            .and_then(|cube| smooth_wavelet(fam, a, cube))
            .and_then(|w| extend(&w, &Freq::new(x, xi_d), &Default::default()));
        match res {
            Ok(v) => {
                *re = v.re;
                *im = v.im;
                PlabStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `family` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plab_family_free(family: *mut PlabFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn last_error() -> String {
        unsafe { CStr::from_ptr(plab_last_error()).to_string_lossy().into_owned() }
    }

    #[test]
    fn run_dft_through_handles() {
        unsafe {
            let p = plab_params_default();
            assert_eq!(plab_params_set(p, c("seed=7").as_ptr()), PlabStatus::Ok);
            let mut r = ptr::null_mut();
            assert_eq!(plab_run(c("dft").as_ptr(), p, &mut r), PlabStatus::Ok);
            assert_eq!(plab_report_passed(r), 1);
            assert!(plab_report_row_count(r) > 0);
            let mut json = ptr::null_mut();
            assert_eq!(plab_report_json(r, &mut json), PlabStatus::Ok);
            let text = CStr::from_ptr(json).to_str().unwrap().to_string();
            assert_eq!(ExperimentReport::from_json(&text).unwrap(), (*r).0);
            let dir = tempfile::tempdir().unwrap();
            let path = c(dir.path().join("rows.csv").to_str().unwrap());
            assert_eq!(plab_report_write_csv(r, path.as_ptr()), PlabStatus::Ok);
            plab_string_free(json);
            plab_report_free(r);
            plab_params_free(p);
        }
    }

    #[test]
    fn errors_map_to_codes() {
        unsafe {
            let p = plab_params_default();
            let mut r = ptr::null_mut();
            assert_eq!(plab_run(c("nope").as_ptr(), p, &mut r), PlabStatus::UnknownExperiment);
            assert!(last_error().contains("nope"));
            assert_eq!(plab_params_set(p, c("warp=9").as_ptr()), PlabStatus::Config);
            assert_eq!(plab_params_set(p, c("q=1.5").as_ptr()), PlabStatus::Ok);
            assert_eq!(plab_params_validate(p, ptr::null()), PlabStatus::Config);
            assert!(last_error().contains("q must"));
            assert_eq!(plab_run(ptr::null(), p, &mut r), PlabStatus::NullPointer);
            let mut q = ptr::null_mut();
            assert_eq!(plab_params_from_toml(c("d = [").as_ptr(), &mut q), PlabStatus::Config);
            plab_params_free(p);
        }
    }

    #[test]
    fn experiment_names_are_listed() {
        let n = plab_experiment_count();
        assert_eq!(n, 13);
        let first = plab_experiment_name(0);
        unsafe {
            assert_eq!(CStr::from_ptr(first).to_str().unwrap(), "moments");
            plab_string_free(first);
        }
        assert!(plab_experiment_name(n).is_null());
    }

    #[test]
    fn wavelet_extension_at_zero_vanishes() {
        unsafe {
            let mut f = ptr::null_mut();
            assert_eq!(plab_family_new(1, 3, 1.0 / 64.0, &mut f), PlabStatus::Ok);
            assert_eq!(plab_family_len(f), 3);
            let (mut re, mut im) = (1.0, 1.0);
            let centre = [0.25];
            assert_eq!(plab_wavelet_extend(f, 1, centre.as_ptr(), 0.125, [0.0].as_ptr(), 0.0, &mut re, &mut im), PlabStatus::Ok);
            assert!(re.abs() < 1e-9 && im.abs() < 1e-9);
            assert_eq!(plab_wavelet_extend(f, 9, centre.as_ptr(), 0.125, [0.0].as_ptr(), 0.0, &mut re, &mut im), PlabStatus::InvalidArgument);
            plab_family_free(f);
        }
    }
}
