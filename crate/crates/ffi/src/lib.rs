//! C ABI for `endocheck`.
//!
//! Conventions:
//!
//! * Every fallible function returns an [`EcStatus`]; `EC_STATUS_OK` is 0.
//!   On failure, [`ec_last_error_message`] describes the error until the
//!   next failing call on the same thread.
//! * Datasets and reports are opaque handles created by `ec_*_new`/`ec_run_tests`
//!   style functions and released by the matching `*_free` function.
//! * Matrices are passed as row-major `double` arrays.
//! * Strings returned through `char **` are owned by the caller and must be
//!   released with [`ec_string_free`].
//! * Panics never cross the boundary; they surface as `EC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use endocheck::data::{load_csv, ColumnRoles, Dataset};
use endocheck::endogeneity::{self, run_all_tests, verify_identities, Statistic, TestReport};
use endocheck::linalg::{Matrix, Vector};
use endocheck::simulation::SimulationSpec;
use endocheck::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    RankDeficient = 3,
    NotPositiveDefinite = 4,
    DegenerateVariance = 5,
    Io = 6,
    Parse = 7,
    ConfigInvalid = 8,
    Panic = 9,
}

/// Selects one of the four statistics.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcStatistic {
    Th1 = 0,
    Th2 = 1,
    Th3 = 2,
    Cf = 3,
}

impl From<EcStatistic> for Statistic {
    fn from(s: EcStatistic) -> Self {
        match s {
            EcStatistic::Th1 => Statistic::TH1,
            EcStatistic::Th2 => Statistic::TH2,
            EcStatistic::Th3 => Statistic::TH3,
            EcStatistic::Cf => Statistic::TCf,
        }
    }
}

/// Opaque dataset handle.
pub struct EcDataset(Dataset);

/// Opaque test-report handle.
pub struct EcTestReport(TestReport);

/// Relative discrepancies of the exact finite-sample identities.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EcIdentityReport {
    pub lemma1_theta_gap: f64,
    pub lemma1_rho_gap: f64,
    pub lemma1_tcf_gap: f64,
    pub lemma2_gap_ols: f64,
    pub lemma2_gap_2sls: f64,
    pub pl41_gap: f64,
    pub pl32_gap: f64,
    pub max_gap: f64,
    /// `[t_H1, t_H2, t_H3, t_CF]`.
    pub statistics: [f64; 4],
    pub h_n: f64,
    pub tol: f64,
    pub ordering_ok: bool,
    pub strict_required: bool,
    /// All gaps below `tol` and the ordering holds.
    pub passes: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(EcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::RankDeficient { .. } => EcStatus::RankDeficient,
            Error::NotPositiveDefinite => EcStatus::NotPositiveDefinite,
            Error::DegenerateVariance(_) => EcStatus::DegenerateVariance,
            Error::Io { .. } => EcStatus::Io,
            Error::NonNumericCell { .. } | Error::EmptyFile | Error::Csv(_) | Error::Json(_) => EcStatus::Parse,
            Error::ConfigInvalid(_) => EcStatus::ConfigInvalid,
            Error::NotSymmetric
            | Error::DimensionMismatch(_)
            | Error::NonFinite(_)
            | Error::InvalidDataset(_)
            | Error::MissingColumn(_)
            | Error::RoleConflict(_) => EcStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(EcStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(EcStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> EcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EcStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            EcStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

/// Comma-separated names; a null pointer or empty string means none.
unsafe fn list_arg(p: *const c_char, what: &str) -> Result<Vec<String>, Failure> {
    if p.is_null() {
        return Ok(Vec::new());
    }
    Ok(str_arg(p, what)?
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty() && *s != "none")
        .map(String::from)
        .collect())
}

unsafe fn matrix_arg(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<Matrix, Failure> {
    if cols == 0 {
        return Ok(Matrix::zeros(rows, 0));
    }
    if p.is_null() {
        return Err(null(what));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| invalid(format!("{what}: size overflows")))?;
    Ok(Matrix::from_row_slice(rows, cols, std::slice::from_raw_parts(p, len)))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| invalid("output contains an interior NUL byte"))
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn ec_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a dataset from row-major arrays: `y2` (n), `y1` (n × d_y1),
/// `z1` (n × d_z1, may be null when d_z1 = 0) and `z2` (n × d_z2).
///
/// # Safety
/// Each non-null array must hold the stated number of doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ec_dataset_new(
    n: usize,
    y2: *const f64,
    y1: *const f64,
    d_y1: usize,
    z1: *const f64,
    d_z1: usize,
    z2: *const f64,
    d_z2: usize,
    out: *mut *mut EcDataset,
) -> EcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if y2.is_null() {
            return Err(null("y2"));
        }
        let y2 = Vector::from_column_slice(std::slice::from_raw_parts(y2, n));
        let ds = Dataset::new(
            y2,
            matrix_arg(y1, n, d_y1, "y1")?,
            matrix_arg(z1, n, d_z1, "z1")?,
            matrix_arg(z2, n, d_z2, "z2")?,
        )?;
        write_out(out, Box::into_raw(Box::new(EcDataset(ds))))
    })
}

/// Loads a CSV file. `endog`, `exog` and `iv` are comma-separated column
/// names; `exog` may be null, empty or `"none"`.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ec_dataset_load_csv(
    path: *const c_char,
    outcome: *const c_char,
    endog: *const c_char,
    exog: *const c_char,
    iv: *const c_char,
    add_intercept: bool,
    out: *mut *mut EcDataset,
) -> EcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut roles = ColumnRoles::new(str_arg(outcome, "outcome")?)
            .endogenous(list_arg(endog, "endog")?)
            .exogenous(list_arg(exog, "exog")?)
            .instruments(list_arg(iv, "iv")?);
        roles.add_intercept = add_intercept;
        let ds = load_csv(str_arg(path, "path")?, &roles)?;
        write_out(out, Box::into_raw(Box::new(EcDataset(ds))))
    })
}

/// Writes the sample size and block widths. Any output pointer may be null.
///
/// # Safety
/// `ds` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ec_dataset_dims(
    ds: *const EcDataset,
    n: *mut usize,
    d_y1: *mut usize,
    d_z1: *mut usize,
    d_z2: *mut usize,
) -> EcStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.0;
        for (p, v) in [(n, ds.n()), (d_y1, ds.d_y1()), (d_z1, ds.d_z1()), (d_z2, ds.d_z2())] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ec_dataset_free(ds: *mut EcDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Runs all four tests at the `n_alphas` significance levels in `alphas`.
///
/// # Safety
/// `ds` must be a live handle, `alphas` must hold `n_alphas` doubles (or be
/// null when `n_alphas` is 0), and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ec_run_tests(
    ds: *const EcDataset,
    alphas: *const f64,
    n_alphas: usize,
    out: *mut *mut EcTestReport,
) -> EcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ds = &handle(ds, "dataset")?.0;
        let alphas = if n_alphas == 0 {
            &[][..]
        } else if alphas.is_null() {
            return Err(null("alphas"));
        } else {
            std::slice::from_raw_parts(alphas, n_alphas)
        };
        let report = run_all_tests(ds, alphas)?;
        write_out(out, Box::into_raw(Box::new(EcTestReport(report))))
    })
}

/// # Safety
/// `report` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn ec_report_statistic(
    report: *const EcTestReport,
    which: EcStatistic,
    value: *mut f64,
) -> EcStatus {
    guard(|| write_out(value, handle(report, "report")?.0.statistic(which.into())))
}

/// `1 − F_χ²(df)(t)` for the chosen statistic.
///
/// # Safety
/// `report` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn ec_report_p_value(
    report: *const EcTestReport,
    which: EcStatistic,
    value: *mut f64,
) -> EcStatus {
    guard(|| write_out(value, handle(report, "report")?.0.p_value(which.into())))
}

/// # Safety
/// `report` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn ec_report_h_n(report: *const EcTestReport, value: *mut f64) -> EcStatus {
    guard(|| write_out(value, handle(report, "report")?.0.h_n))
}

/// Degrees of freedom of the reference `χ²` distribution (= d_y1).
///
/// # Safety
/// `report` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn ec_report_df(report: *const EcTestReport, value: *mut usize) -> EcStatus {
    guard(|| write_out(value, handle(report, "report")?.0.df))
}

/// Whether the chosen statistic rejects at the `alpha_index`-th level passed
/// to [`ec_run_tests`].
///
/// # Safety
/// `report` must be a live handle and `rejects` writable.
#[no_mangle]
pub unsafe extern "C" fn ec_report_rejects(
    report: *const EcTestReport,
    alpha_index: usize,
    which: EcStatistic,
    rejects: *mut bool,
) -> EcStatus {
    guard(|| {
        let report = &handle(report, "report")?.0;
        let d = report
            .decisions
            .get(alpha_index)
            .ok_or_else(|| invalid(format!("alpha index {alpha_index} out of range")))?;
        write_out(rejects, d.rejects(which.into()))
    })
}

/// The whole report as JSON. Release the string with [`ec_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ec_report_to_json(report: *const EcTestReport, out: *mut *mut c_char) -> EcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string(&handle(report, "report")?.0).map_err(Error::from)?;
        write_out(out, into_c_string(json)?)
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ec_report_free(report: *mut EcTestReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Checks the exact finite-sample identities and fills `out`.
///
/// # Safety
/// `ds` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ec_verify_identities(
    ds: *const EcDataset,
    tol: f64,
    out: *mut EcIdentityReport,
) -> EcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // Negated so that NaN is rejected too.
        if !(tol > 0.0) {
            return Err(invalid("tol must be positive"));
        }
        let r = verify_identities(&handle(ds, "dataset")?.0, tol)?;
        write_out(
            out,
            EcIdentityReport {
                lemma1_theta_gap: r.lemma1_theta_gap,
                lemma1_rho_gap: r.lemma1_rho_gap,
                lemma1_tcf_gap: r.lemma1_tcf_gap,
                lemma2_gap_ols: r.lemma2_gap_ols,
                lemma2_gap_2sls: r.lemma2_gap_2sls,
                pl41_gap: r.pl41_gap,
                pl32_gap: r.pl32_gap,
                max_gap: r.max_gap(),
                statistics: r.statistics,
                h_n: r.h_n,
                tol: r.tol,
                ordering_ok: r.ordering_ok,
                strict_required: r.strict_required,
                passes: r.passes(),
            },
        )
    })
}

/// `P(χ²(df) ≤ x)`; NaN when `df` is 0.
#[no_mangle]
pub extern "C" fn ec_chi2_cdf(df: usize, x: f64) -> f64 {
    if df == 0 {
        return f64::NAN;
    }
    endogeneity::chi2_cdf(df, x)
}

/// Inverse of [`ec_chi2_cdf`]; NaN when `df` is 0.
#[no_mangle]
pub extern "C" fn ec_chi2_quantile(df: usize, p: f64) -> f64 {
    if df == 0 {
        return f64::NAN;
    }
    endogeneity::chi2_quantile(df, p)
}

/// Runs a Monte Carlo study described by a JSON document (the format read by
/// `endocheck simulate --config`) and returns the result JSON.
///
/// # Safety
/// `config_json` must be NUL-terminated and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn ec_simulate_json(config_json: *const c_char, out_json: *mut *mut c_char) -> EcStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let spec = SimulationSpec::from_json(str_arg(config_json, "config_json")?)?;
        let json = spec.run()?.to_json()?;
        write_out(out_json, into_c_string(json)?)
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ec_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
