//! C ABI for the burstfuse pipeline: opaque handles, status codes, and a
//! thread-local last-error message. Every function is panic-safe; pointers
//! returned through out-parameters are owned by the caller and released with
//! the matching `bf_*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use burstfuse::config::PipelineConfig;
use burstfuse::extract::extract_bursts;
use burstfuse::fusion::{fuse, select_base, write_column_manifest, write_fused_csv, FuseOptions};
use burstfuse::matchset::MatchSet;
use burstfuse::model::ExecutionDataset;
use burstfuse::pcf::{parse_pcf, PcfDictionary};
use burstfuse::pipeline::{match_executions, MatchOptions};
use burstfuse::prv::parse_prv;
use burstfuse::synth::{generate_suite, SynthConfig};
use burstfuse::table::{read_burst_csv, write_burst_csv};
use burstfuse::validation::{validate, ValidationOptions};

/// Status code of every fallible call. `BF_STATUS_OK` is zero; anything else
/// leaves a description in `bf_last_error_message`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfStatus {
    Ok = 0,
    InvalidArgument = 1,
    Io = 2,
    Parse = 3,
    Unsupported = 4,
    Integrity = 5,
    Internal = 6,
}

/// One execution's burst dataset (opaque).
pub struct BfDataset {
    inner: ExecutionDataset,
}

/// A cross-execution match set (opaque).
pub struct BfMatchSet {
    inner: MatchSet,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").expect("empty"));
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &burstfuse::Error) -> BfStatus {
    use burstfuse::Error::*;
    match err {
        Io { .. } => BfStatus::Io,
        Parse { .. } | NonMonotonic { .. } | MissingColumn(_) | Json(_) => BfStatus::Parse,
        HybridTrace { .. } => BfStatus::Unsupported,
        GroupIntegrity(_) | Invalid(_) | DuplicateBurst { .. } | IdCollision(_) => {
            BfStatus::Integrity
        }
        _ => BfStatus::InvalidArgument,
    }
}

fn fail(err: burstfuse::Error) -> BfStatus {
    let status = status_of(&err);
    set_error(&err.to_string());
    status
}

/// Runs a closure with panics converted to `BF_STATUS_INTERNAL`.
fn guarded(body: impl FnOnce() -> BfStatus) -> BfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            BfStatus::Internal
        }
    }
}

/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn opt_str<'a>(ptr: *const c_char) -> Result<Option<&'a str>, BfStatus> {
    if ptr.is_null() {
        return Ok(None);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Some(s)),
        Err(_) => {
            set_error("string argument is not valid UTF-8");
            Err(BfStatus::InvalidArgument)
        }
    }
}

unsafe fn req_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, BfStatus> {
    match opt_str(ptr)? {
        Some(s) => Ok(s),
        None => {
            set_error(&format!("{what} must not be null"));
            Err(BfStatus::InvalidArgument)
        }
    }
}

fn read_path(path: &str) -> Result<String, BfStatus> {
    std::fs::read_to_string(path).map_err(|e| fail(burstfuse::Error::io(PathBuf::from(path), e)))
}

fn write_path(path: &str, text: &str) -> Result<(), BfStatus> {
    if let Some(parent) = Path::new(path).parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| fail(burstfuse::Error::io(parent, e)))?;
        }
    }
    std::fs::write(path, text).map_err(|e| fail(burstfuse::Error::io(PathBuf::from(path), e)))
}

fn parse_config(json: Option<&str>) -> Result<PipelineConfig, BfStatus> {
    let cfg = match json {
        None => PipelineConfig::default(),
        Some(text) => serde_json::from_str(text).map_err(|e| fail(burstfuse::Error::Json(e)))?,
    };
    cfg.validate().map_err(fail)?;
    Ok(cfg)
}

/// # Safety
/// `handles` must point to `count` valid dataset handles.
unsafe fn collect_datasets<'a>(
    handles: *const *const BfDataset,
    count: usize,
) -> Result<Vec<&'a ExecutionDataset>, BfStatus> {
    if handles.is_null() {
        set_error("datasets must not be null");
        return Err(BfStatus::InvalidArgument);
    }
    let slice = std::slice::from_raw_parts(handles, count);
    let mut out = Vec::with_capacity(count);
    for (i, &h) in slice.iter().enumerate() {
        if h.is_null() {
            set_error(&format!("dataset {i} is null"));
            return Err(BfStatus::InvalidArgument);
        }
        out.push(&(*h).inner);
    }
    Ok(out)
}

/// Crate version as a static string.
#[no_mangle]
pub extern "C" fn bf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Description of the last error on this thread; valid until the next
/// failing call.
#[no_mangle]
pub extern "C" fn bf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from a `bf_*` call and not have been freed before.
#[no_mangle]
pub unsafe extern "C" fn bf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a dataset by parsing a `.prv` trace (plus companion `.pcf` when
/// given) and extracting its compute bursts.
///
/// # Safety
/// String arguments must be null or valid NUL-terminated strings; `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bf_dataset_from_prv(
    prv_path: *const c_char,
    pcf_path: *const c_char,
    exec_id: *const c_char,
    counter_set: *const c_char,
    config_json: *const c_char,
    out: *mut *mut BfDataset,
) -> BfStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out must not be null");
            return BfStatus::InvalidArgument;
        }
        let body = || -> Result<*mut BfDataset, BfStatus> {
            let prv = req_str(prv_path, "prv_path")?;
            let exec_id = req_str(exec_id, "exec_id")?;
            let counter_set = opt_str(counter_set)?.unwrap_or("");
            let cfg = parse_config(opt_str(config_json)?)?;
            let trace = parse_prv(&read_path(prv)?).map_err(fail)?;
            let dict = match opt_str(pcf_path)? {
                Some(p) => parse_pcf(&read_path(p)?).map_err(fail)?,
                None => PcfDictionary::default(),
            };
            let (dataset, _) =
                extract_bursts(&trace, &dict, exec_id, counter_set, &cfg.extract_options())
                    .map_err(fail)?;
            Ok(Box::into_raw(Box::new(BfDataset { inner: dataset })))
        };
        match body() {
            Ok(handle) => {
                *out = handle;
                BfStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Loads a dataset from a burst CSV.
///
/// # Safety
/// See `bf_dataset_from_prv`.
#[no_mangle]
pub unsafe extern "C" fn bf_dataset_from_csv(
    csv_path: *const c_char,
    config_json: *const c_char,
    out: *mut *mut BfDataset,
) -> BfStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out must not be null");
            return BfStatus::InvalidArgument;
        }
        let body = || -> Result<*mut BfDataset, BfStatus> {
            let path = req_str(csv_path, "csv_path")?;
            let cfg = parse_config(opt_str(config_json)?)?;
            let dataset = read_burst_csv(&read_path(path)?, &cfg.classifier()).map_err(fail)?;
            Ok(Box::into_raw(Box::new(BfDataset { inner: dataset })))
        };
        match body() {
            Ok(handle) => {
                *out = handle;
                BfStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Writes a dataset as a burst CSV.
///
/// # Safety
/// `dataset` must be a live handle; `csv_path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn bf_dataset_write_csv(
    dataset: *const BfDataset,
    csv_path: *const c_char,
) -> BfStatus {
    guarded(|| {
        if dataset.is_null() {
            set_error("dataset must not be null");
            return BfStatus::InvalidArgument;
        }
        let body = || -> Result<(), BfStatus> {
            let path = req_str(csv_path, "csv_path")?;
            let text = write_burst_csv(&(*dataset).inner).map_err(fail)?;
            write_path(path, &text)
        };
        match body() {
            Ok(()) => BfStatus::Ok,
            Err(status) => status,
        }
    })
}

/// Number of ranks in the dataset; 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bf_dataset_rank_count(dataset: *const BfDataset) -> u32 {
    if dataset.is_null() {
        return 0;
    }
    (*dataset).inner.rank_count() as u32
}

/// Number of compute bursts in the dataset; 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bf_dataset_burst_count(dataset: *const BfDataset) -> u64 {
    if dataset.is_null() {
        return 0;
    }
    (*dataset).inner.total_bursts() as u64
}

/// # Safety
/// `dataset` must be null or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn bf_dataset_free(dataset: *mut BfDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Runs two-stage matching over `count` datasets.
///
/// # Safety
/// `datasets` must point to `count` live handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn bf_match(
    datasets: *const *const BfDataset,
    count: usize,
    config_json: *const c_char,
    out: *mut *mut BfMatchSet,
) -> BfStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out must not be null");
            return BfStatus::InvalidArgument;
        }
        let body = || -> Result<*mut BfMatchSet, BfStatus> {
            let cfg = parse_config(opt_str(config_json)?)?;
            let mut owned: Vec<ExecutionDataset> = collect_datasets(datasets, count)?
                .into_iter()
                .cloned()
                .collect();
            let set = match_executions(
                &mut owned,
                &MatchOptions {
                    weights: cfg.weights,
                    parallel: true,
                },
            )
            .map_err(fail)?;
            Ok(Box::into_raw(Box::new(BfMatchSet { inner: set })))
        };
        match body() {
            Ok(handle) => {
                *out = handle;
                BfStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Serializes a match set; free the result with `bf_string_free`.
///
/// # Safety
/// `match_set` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bf_match_set_to_json(match_set: *const BfMatchSet) -> *mut c_char {
    if match_set.is_null() {
        return ptr::null_mut();
    }
    let json = (*match_set).inner.to_json();
    CString::new(json)
        .map(|s| s.into_raw())
        .unwrap_or(ptr::null_mut())
}

/// Parses a match-set JSON document.
///
/// # Safety
/// `json` must be a valid string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bf_match_set_from_json(
    json: *const c_char,
    out: *mut *mut BfMatchSet,
) -> BfStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out must not be null");
            return BfStatus::InvalidArgument;
        }
        let body = || -> Result<*mut BfMatchSet, BfStatus> {
            let text = req_str(json, "json")?;
            let set = MatchSet::from_json(text).map_err(fail)?;
            Ok(Box::into_raw(Box::new(BfMatchSet { inner: set })))
        };
        match body() {
            Ok(handle) => {
                *out = handle;
                BfStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Number of match groups; 0 for a null handle.
///
/// # Safety
/// `match_set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bf_match_set_group_count(match_set: *const BfMatchSet) -> u64 {
    if match_set.is_null() {
        return 0;
    }
    (*match_set).inner.groups.len() as u64
}

/// # Safety
/// `match_set` must be null or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn bf_match_set_free(match_set: *mut BfMatchSet) {
    if !match_set.is_null() {
        drop(Box::from_raw(match_set));
    }
}

/// Fuses the executions over the match set and writes the merged CSV plus
/// its column manifest (`<csv>.manifest.json` when `manifest_path` is null).
/// The base execution is chosen by lowest unmatched rate.
///
/// # Safety
/// Handles and strings as above.
#[no_mangle]
pub unsafe extern "C" fn bf_fuse_to_csv(
    datasets: *const *const BfDataset,
    count: usize,
    match_set: *const BfMatchSet,
    config_json: *const c_char,
    csv_path: *const c_char,
    manifest_path: *const c_char,
) -> BfStatus {
    guarded(|| {
        if match_set.is_null() {
            set_error("match_set must not be null");
            return BfStatus::InvalidArgument;
        }
        let body = || -> Result<(), BfStatus> {
            let cfg = parse_config(opt_str(config_json)?)?;
            let borrowed = collect_datasets(datasets, count)?;
            let owned: Vec<ExecutionDataset> = borrowed.into_iter().cloned().collect();
            let set = &(*match_set).inner;
            let base = select_base(&owned, set).map_err(fail)?;
            let fused = fuse(
                &owned,
                set,
                &base,
                &FuseOptions {
                    prefix_scheme: cfg.prefix_scheme.clone(),
                },
            )
            .map_err(fail)?;
            let csv = req_str(csv_path, "csv_path")?;
            write_path(csv, &write_fused_csv(&fused))?;
            let manifest = match opt_str(manifest_path)? {
                Some(p) => p.to_string(),
                None => format!("{csv}.manifest.json"),
            };
            write_path(&manifest, &write_column_manifest(&fused))
        };
        match body() {
            Ok(()) => BfStatus::Ok,
            Err(status) => status,
        }
    })
}

/// Validates executions with identical counter sets against the match set;
/// returns the report JSON through `out_json` (free with `bf_string_free`).
///
/// # Safety
/// Handles and strings as above.
#[no_mangle]
pub unsafe extern "C" fn bf_validate_to_json(
    datasets: *const *const BfDataset,
    count: usize,
    match_set: *const BfMatchSet,
    config_json: *const c_char,
    out_json: *mut *mut c_char,
) -> BfStatus {
    guarded(|| {
        if match_set.is_null() || out_json.is_null() {
            set_error("match_set and out_json must not be null");
            return BfStatus::InvalidArgument;
        }
        let body = || -> Result<*mut c_char, BfStatus> {
            let cfg = parse_config(opt_str(config_json)?)?;
            let borrowed = collect_datasets(datasets, count)?;
            let owned: Vec<ExecutionDataset> = borrowed.into_iter().cloned().collect();
            let outcome = validate(
                &owned,
                &(*match_set).inner,
                &ValidationOptions {
                    fence: cfg.fence,
                    acceptance_cutoff: cfg.acceptance_cutoff,
                },
            )
            .map_err(fail)?;
            let json = serde_json::to_string_pretty(&outcome.report)
                .map_err(|e| fail(burstfuse::Error::Json(e)))?;
            CString::new(json).map(|s| s.into_raw()).map_err(|_| {
                set_error("report contains interior NUL");
                BfStatus::Internal
            })
        };
        match body() {
            Ok(s) => {
                *out_json = s;
                BfStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Generates a synthetic suite from a generator config (JSON text) and
/// writes `runN.prv`/`runN.pcf` plus `truth.json` into `outdir`.
///
/// # Safety
/// Strings as above.
#[no_mangle]
pub unsafe extern "C" fn bf_synth_generate(
    config_json: *const c_char,
    outdir: *const c_char,
) -> BfStatus {
    guarded(|| {
        let body = || -> Result<(), BfStatus> {
            let text = req_str(config_json, "config_json")?;
            let dir = req_str(outdir, "outdir")?;
            let cfg = SynthConfig::from_json(text).map_err(fail)?;
            let suite = generate_suite(&cfg).map_err(fail)?;
            for (i, dataset) in suite.executions.iter().enumerate() {
                let (prv, pcf) = suite.emit_as_prv(i).map_err(fail)?;
                write_path(&format!("{dir}/{}.prv", dataset.exec_id), &prv)?;
                write_path(&format!("{dir}/{}.pcf", dataset.exec_id), &pcf)?;
            }
            write_path(
                &format!("{dir}/truth.json"),
                &suite.truth_match_set().to_json(),
            )
        };
        match body() {
            Ok(()) => BfStatus::Ok,
            Err(status) => status,
        }
    })
}
