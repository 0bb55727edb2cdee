//! C ABI surface for the mlpit toolkit.
//!
//! Conventions:
//! - Every fallible call returns an [`MlpStatus`]; results travel through out
//!   pointers that are written only on `Ok`.
//! - Handles (`MlpDataset`, `MlpReport`) are opaque; free them with their
//!   `_free` function exactly once. Passing NULL to a `_free` is a no-op.
//! - Strings returned through `char **` out parameters are NUL-terminated,
//!   owned by the caller, and must be released with [`mlp_string_free`].
//! - On any non-Ok status a human-readable description is kept in
//!   thread-local storage; fetch it with [`mlp_last_error_message`].
//! - Panics never cross the boundary; they are caught and reported as
//!   [`MlpStatus::Internal`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mlpit_core::dataset::{load_dataset, write_dataset, Dataset};
use mlpit_core::dsl::{
    lint, parse_scenario, parse_spec, render_diagnostics, LintConfig, ScenarioArms, Severity,
};
use mlpit_core::engine::execute;
use mlpit_core::lab::{
    generate, run_batch_probe, run_pair, BatchReport, PairedReport, Scenario, ScenarioKind,
};
use mlpit_core::split::audit_trace;

/// Result code for every fallible call in this API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlpStatus {
    /// The call succeeded; out parameters are valid.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The file could not be read or written.
    Io = 3,
    /// The pipeline or scenario source failed to parse or validate.
    Parse = 4,
    /// The dataset or generator input was rejected.
    Data = 5,
    /// Execution failed after parsing succeeded.
    Run = 6,
    /// The handle does not carry the requested quantity.
    NotApplicable = 7,
    /// A panic was caught at the boundary; state may be incomplete.
    Internal = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn fail(status: MlpStatus, message: impl Into<String>) -> MlpStatus {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(CString::new(text).expect("NULs stripped above"));
    });
    status
}

fn ok() -> MlpStatus {
    LAST_ERROR.with(|slot| slot.borrow_mut().take());
    MlpStatus::Ok
}

/// Copy the description of the most recent failure on this thread into
/// `buffer` (NUL-terminated, truncated to `capacity` bytes) and return the
/// full message length in bytes, excluding the NUL. Returns 0 when the last
/// call on this thread succeeded. `buffer` may be NULL to query the length.
#[no_mangle]
pub extern "C" fn mlp_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let borrow = slot.borrow();
        let Some(message) = borrow.as_ref() else { return 0 };
        let bytes = message.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let copy = bytes.len().min(capacity - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buffer, copy);
                *buffer.add(copy) = 0;
            }
        }
        bytes.len()
    })
}

/// Toolkit version as a static NUL-terminated string; never freed.
#[no_mangle]
pub extern "C" fn mlp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned through a `char **` out parameter.
#[no_mangle]
pub unsafe extern "C" fn mlp_string_free(string: *mut c_char) {
    if !string.is_null() {
        drop(CString::from_raw(string));
    }
}

fn to_c_string(text: String) -> *mut c_char {
    CString::new(text.replace('\0', " ")).expect("NULs stripped above").into_raw()
}

unsafe fn required_str<'a>(
    pointer: *const c_char,
    name: &str,
) -> Result<&'a str, MlpStatus> {
    if pointer.is_null() {
        return Err(fail(MlpStatus::NullArgument, format!("null argument: {name}")));
    }
    CStr::from_ptr(pointer)
        .to_str()
        .map_err(|_| fail(MlpStatus::InvalidUtf8, format!("argument {name} is not valid UTF-8")))
}

fn guarded(body: impl FnOnce() -> MlpStatus) -> MlpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(MlpStatus::Internal, "internal panic caught at the C boundary"),
    }
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

/// Opaque dataset handle.
pub struct MlpDataset {
    inner: Dataset,
}

/// Load a dataset from its CSV form. On success `*out` owns the handle.
///
/// # Safety
/// `path` must point to a NUL-terminated string; `out` must be a valid
/// pointer to write one pointer through.
#[no_mangle]
pub unsafe extern "C" fn mlp_dataset_load(
    path: *const c_char,
    out: *mut *mut MlpDataset,
) -> MlpStatus {
    guarded(|| {
        if out.is_null() {
            return fail(MlpStatus::NullArgument, "null argument: out");
        }
        let path = match required_str(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match load_dataset(Path::new(path)) {
            Ok(dataset) => {
                *out = Box::into_raw(Box::new(MlpDataset { inner: dataset }));
                ok()
            }
            Err(e) => fail(MlpStatus::Data, e.to_string()),
        }
    })
}

fn parse_knobs(text: &str) -> Result<BTreeMap<String, f64>, String> {
    let mut knobs = BTreeMap::new();
    for part in text.split([',', ' ']).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("knob '{part}' is not KEY=VALUE"))?;
        let value: f64 =
            value.parse().map_err(|_| format!("knob '{key}' has non-numeric value '{value}'"))?;
        knobs.insert(key.to_string(), value);
    }
    Ok(knobs)
}

/// Generate a synthetic scenario dataset. `kind` is one of `oversample`,
/// `featsel`, `patient`, `augment`, `batch`. `knobs` is a comma- or
/// space-separated `KEY=VALUE` list, or NULL for defaults. When the kind
/// produces a companion external set and `out_external` is non-NULL it is
/// written there (NULL otherwise).
///
/// # Safety
/// `kind` must be NUL-terminated, `knobs` NUL-terminated or NULL, `out`
/// valid; `out_external` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn mlp_dataset_generate(
    kind: *const c_char,
    knobs: *const c_char,
    seed: u64,
    out: *mut *mut MlpDataset,
    out_external: *mut *mut MlpDataset,
) -> MlpStatus {
    guarded(|| {
        if out.is_null() {
            return fail(MlpStatus::NullArgument, "null argument: out");
        }
        let kind_name = match required_str(kind, "kind") {
            Ok(k) => k,
            Err(status) => return status,
        };
        let Some(kind) = ScenarioKind::from_name(kind_name) else {
            return fail(MlpStatus::Data, format!("unknown scenario kind '{kind_name}'"));
        };
        let knob_map = if knobs.is_null() {
            BTreeMap::new()
        } else {
            match required_str(knobs, "knobs").map(parse_knobs) {
                Ok(Ok(map)) => map,
                Ok(Err(message)) => return fail(MlpStatus::Data, message),
                Err(status) => return status,
            }
        };
        match generate(kind, &knob_map, seed) {
            Ok(output) => {
                *out = Box::into_raw(Box::new(MlpDataset { inner: output.dataset }));
                if !out_external.is_null() {
                    *out_external = match output.external {
                        Some(external) => {
                            Box::into_raw(Box::new(MlpDataset { inner: external }))
                        }
                        None => std::ptr::null_mut(),
                    };
                }
                ok()
            }
            Err(e) => fail(MlpStatus::Data, e.to_string()),
        }
    })
}

/// Number of samples; 0 for NULL.
#[no_mangle]
pub extern "C" fn mlp_dataset_n_samples(dataset: *const MlpDataset) -> usize {
    if dataset.is_null() {
        return 0;
    }
    unsafe { (*dataset).inner.samples.len() }
}

/// Number of feature columns; 0 for NULL.
#[no_mangle]
pub extern "C" fn mlp_dataset_n_features(dataset: *const MlpDataset) -> usize {
    if dataset.is_null() {
        return 0;
    }
    unsafe { (*dataset).inner.feature_names.len() }
}

/// Write the dataset in its CSV form.
///
/// # Safety
/// `dataset` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mlp_dataset_write(
    dataset: *const MlpDataset,
    path: *const c_char,
) -> MlpStatus {
    guarded(|| {
        if dataset.is_null() {
            return fail(MlpStatus::NullArgument, "null argument: dataset");
        }
        let path = match required_str(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match write_dataset(&(*dataset).inner, Path::new(path)) {
            Ok(()) => ok(),
            Err(e) => fail(MlpStatus::Io, e.to_string()),
        }
    })
}

/// Release a dataset handle. NULL is a no-op.
///
/// # Safety
/// `dataset` must be NULL or a handle this library returned, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlp_dataset_free(dataset: *mut MlpDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

// ---------------------------------------------------------------------------
// Linting and execution
// ---------------------------------------------------------------------------

/// Lint pipeline source text. `*out_rendered` receives the diagnostics in
/// `label:line:col: severity CODE message` form (empty string when clean) and
/// `*out_errors` the number of error-severity findings; either may be NULL
/// when not wanted.
///
/// # Safety
/// `label` and `source` must be NUL-terminated; non-NULL out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn mlp_lint_source(
    label: *const c_char,
    source: *const c_char,
    out_rendered: *mut *mut c_char,
    out_errors: *mut u32,
) -> MlpStatus {
    guarded(|| {
        let label = match required_str(label, "label") {
            Ok(l) => l,
            Err(status) => return status,
        };
        let source = match required_str(source, "source") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let spec = match parse_spec(source) {
            Ok(spec) => spec,
            Err(e) => return fail(MlpStatus::Parse, e.to_string()),
        };
        let diagnostics = lint(&spec, None, &LintConfig::default());
        let errors =
            diagnostics.iter().filter(|d| d.severity == Severity::Error).count() as u32;
        if !out_rendered.is_null() {
            *out_rendered = to_c_string(render_diagnostics(label, &diagnostics));
        }
        if !out_errors.is_null() {
            *out_errors = errors;
        }
        ok()
    })
}

/// Execute pipeline source against a dataset. `*out_summary` (optional)
/// receives one line per evaluation, baseline, and external record plus the
/// audit verdict; `*out_violations` (optional) the audit violation count.
/// `external` may be NULL when the pipeline has no `external_eval`.
///
/// # Safety
/// `source` must be NUL-terminated; `dataset` (and `external` when non-NULL)
/// must be live handles; non-NULL out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn mlp_exec_source(
    source: *const c_char,
    dataset: *const MlpDataset,
    seed: u64,
    external: *const MlpDataset,
    out_summary: *mut *mut c_char,
    out_violations: *mut u32,
) -> MlpStatus {
    guarded(|| {
        let source = match required_str(source, "source") {
            Ok(s) => s,
            Err(status) => return status,
        };
        if dataset.is_null() {
            return fail(MlpStatus::NullArgument, "null argument: dataset");
        }
        let spec = match parse_spec(source) {
            Ok(spec) => spec,
            Err(e) => return fail(MlpStatus::Parse, e.to_string()),
        };
        let external_ref = if external.is_null() { None } else { Some(&(*external).inner) };
        let (trace, outcome) = match execute(&spec, &(*dataset).inner, seed, external_ref) {
            Ok(pair) => pair,
            Err(e) => return fail(MlpStatus::Run, e.to_string()),
        };
        let audit = audit_trace(&trace);
        if !out_summary.is_null() {
            let mut text = String::new();
            for (i, record) in outcome.evaluations.iter().enumerate() {
                text.push_str(&format!(
                    "evaluation {} (n={}): accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4}\n",
                    i + 1,
                    record.n,
                    record.metrics.accuracy,
                    record.metrics.precision,
                    record.metrics.recall,
                    record.metrics.f1
                ));
            }
            for (i, record) in outcome.baselines.iter().enumerate() {
                text.push_str(&format!(
                    "baseline {} (n={}): accuracy {:.4} f1 {:.4}\n",
                    i + 1,
                    record.n,
                    record.metrics.accuracy,
                    record.metrics.f1
                ));
            }
            for (i, record) in outcome.externals.iter().enumerate() {
                text.push_str(&format!(
                    "external {} (n={}): accuracy {:.4} f1 {:.4}\n",
                    i + 1,
                    record.n,
                    record.metrics.accuracy,
                    record.metrics.f1
                ));
            }
            if audit.violations.is_empty() {
                text.push_str("audit: clean\n");
            } else {
                text.push_str(&format!("audit: {} violation(s)\n", audit.violations.len()));
                for violation in &audit.violations {
                    text.push_str(&format!(
                        "  {}: {}\n",
                        violation.kind.name(),
                        violation.detail
                    ));
                }
            }
            *out_summary = to_c_string(text);
        }
        if !out_violations.is_null() {
            *out_violations = audit.violations.len() as u32;
        }
        ok()
    })
}

// ---------------------------------------------------------------------------
// Scenario reports
// ---------------------------------------------------------------------------

enum ReportInner {
    Paired(PairedReport),
    Batch(BatchReport),
}

/// Opaque scenario-report handle; paired or batch depending on the scenario.
pub struct MlpReport {
    inner: ReportInner,
}

/// Parse and run scenario source text. Paired scenarios run both arms;
/// `batch` scenarios run the merge probe. `reps_override` replaces the
/// scenario's repetition count when non-zero.
///
/// # Safety
/// `source` must be NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mlp_run_scenario_source(
    source: *const c_char,
    reps_override: u32,
    out: *mut *mut MlpReport,
) -> MlpStatus {
    guarded(|| {
        if out.is_null() {
            return fail(MlpStatus::NullArgument, "null argument: out");
        }
        let source = match required_str(source, "source") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let ast = match parse_scenario(source) {
            Ok(ast) => ast,
            Err(e) => return fail(MlpStatus::Parse, e.to_string()),
        };
        let mut scenario = match Scenario::from_ast(&ast) {
            Ok(scenario) => scenario,
            Err(e) => return fail(MlpStatus::Parse, e.to_string()),
        };
        if reps_override > 0 {
            scenario.reps = reps_override as usize;
        }
        let inner = match &scenario.arms {
            ScenarioArms::Pair { .. } => match run_pair(&scenario) {
                Ok(report) => ReportInner::Paired(report),
                Err(e) => return fail(MlpStatus::Run, e.to_string()),
            },
            ScenarioArms::Single { .. } => match run_batch_probe(&scenario) {
                Ok(report) => ReportInner::Batch(report),
                Err(e) => return fail(MlpStatus::Run, e.to_string()),
            },
        };
        *out = Box::into_raw(Box::new(MlpReport { inner }));
        ok()
    })
}

/// 0 for a paired report, 1 for a batch report, -1 for NULL.
#[no_mangle]
pub extern "C" fn mlp_report_kind(report: *const MlpReport) -> i32 {
    if report.is_null() {
        return -1;
    }
    match unsafe { &(*report).inner } {
        ReportInner::Paired(_) => 0,
        ReportInner::Batch(_) => 1,
    }
}

/// Human-readable report table.
///
/// # Safety
/// `report` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mlp_report_text(
    report: *const MlpReport,
    out: *mut *mut c_char,
) -> MlpStatus {
    guarded(|| {
        if report.is_null() || out.is_null() {
            return fail(MlpStatus::NullArgument, "null argument: report or out");
        }
        let text = match &(*report).inner {
            ReportInner::Paired(r) => r.to_text(),
            ReportInner::Batch(r) => r.to_text(),
        };
        *out = to_c_string(text);
        ok()
    })
}

/// Per-repetition rows in delimited form.
///
/// # Safety
/// `report` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mlp_report_csv(
    report: *const MlpReport,
    out: *mut *mut c_char,
) -> MlpStatus {
    guarded(|| {
        if report.is_null() || out.is_null() {
            return fail(MlpStatus::NullArgument, "null argument: report or out");
        }
        let text = match &(*report).inner {
            ReportInner::Paired(r) => r.to_csv(),
            ReportInner::Batch(r) => r.to_csv(),
        };
        *out = to_c_string(text);
        ok()
    })
}

/// Mean-F1 gap (incorrect minus correct) of a paired report.
///
/// # Safety
/// `report` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mlp_report_f1_gap(
    report: *const MlpReport,
    out: *mut f64,
) -> MlpStatus {
    guarded(|| {
        if report.is_null() || out.is_null() {
            return fail(MlpStatus::NullArgument, "null argument: report or out");
        }
        match &(*report).inner {
            ReportInner::Paired(r) => {
                *out = r.f1_gap;
                ok()
            }
            ReportInner::Batch(_) => {
                fail(MlpStatus::NotApplicable, "batch reports have no paired F1 gap")
            }
        }
    })
}

/// Rank-sum p-value of a paired report's F1 comparison.
///
/// # Safety
/// `report` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mlp_report_p_value(
    report: *const MlpReport,
    out: *mut f64,
) -> MlpStatus {
    guarded(|| {
        if report.is_null() || out.is_null() {
            return fail(MlpStatus::NullArgument, "null argument: report or out");
        }
        match &(*report).inner {
            ReportInner::Paired(r) => match &r.ranksum {
                Some(ranksum) => {
                    *out = ranksum.p_value;
                    ok()
                }
                None => fail(
                    MlpStatus::NotApplicable,
                    "no repetition completed on both arms; no comparison was made",
                ),
            },
            ReportInner::Batch(_) => {
                fail(MlpStatus::NotApplicable, "batch reports have no paired comparison")
            }
        }
    })
}

/// Release a report handle. NULL is a no-op.
///
/// # Safety
/// `report` must be NULL or a handle this library returned, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mlp_report_free(report: *mut MlpReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
