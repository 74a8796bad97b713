//! C ABI over the metaharm crosswalk engine.
//!
//! Every fallible function returns an [`MhStatus`]. On failure a message is
//! available from [`mh_last_error`] on the calling thread until its next call
//! into this library. Handles are opaque; release them with the matching
//! `_free` function. Strings handed out by `mh_result_*` accessors borrow from
//! the results handle and stay valid until it is freed.
//!
//! An engine may be shared between threads for `mh_crosswalk*` calls as long
//! as no thread calls `mh_engine_load_decisions` on it at the same time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use metaharm::crosswalk::{crosswalk_schema, train_classifier, Classifier, Mode, Strategy};
use metaharm::embedding::{load_model, EmbeddingModel};
use metaharm::ingest::{load_standard_schema, refine_schema, Format};
use metaharm::review::read_decision_log;
use metaharm::{ColumnMeta, Confidence, CrosswalkResult, Error, Method, SourceSchema, StandardSchema};

#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MhStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Model = 5,
    InvalidArgument = 6,
    IndexOutOfRange = 7,
    Data = 8,
    Panic = 9,
}

#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MhMode {
    Levenshtein = 0,
    Embedding = 1,
    Hybrid = 2,
}

#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MhMethod {
    None = 0,
    Levenshtein = 1,
    Embedding = 2,
    Classifier = 3,
}

#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MhConfidence {
    Unmatched = 0,
    Weak = 1,
    Qualified = 2,
}

/// Matcher settings for [`mh_crosswalk`]. Start from [`mh_strategy_default`].
/// `mode` holds an [`MhMode`] value; anything else is rejected.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MhStrategy {
    pub mode: i32,
    pub threshold: u32,
    pub k: u32,
    pub strict: bool,
}

/// A loaded standard schema, optional embedding model and optional classifier.
pub struct MhEngine {
    schema: StandardSchema,
    model: Option<EmbeddingModel>,
    classifier: Option<Classifier>,
}

struct ResultStrings {
    source: CString,
    entry_id: Option<CString>,
    path: CString,
    alternates: Vec<CString>,
}

/// Crosswalk results for one call.
pub struct MhResults {
    results: Vec<CrosswalkResult>,
    strings: Vec<ResultStrings>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(MhStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => MhStatus::Io,
            Error::Parse { .. }
            | Error::EmptyFile(_)
            | Error::MissingNameColumn
            | Error::NoColumns
            | Error::InvalidPath(_)
            | Error::Json(_) => MhStatus::Parse,
            Error::ModelFormat(_) | Error::EmptyCorpus | Error::NothingToContrast(_) => {
                MhStatus::Model
            }
            Error::InvalidStrategy(_)
            | Error::InvalidHyperparams(_)
            | Error::InvalidPerturbation(_) => MhStatus::InvalidArgument,
            _ => MhStatus::Data,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MhStatus::NullArgument, format!("{what} is null"))
}

/// Runs `f`, converting failures and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MhStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MhStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(&message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("internal panic: {message}"));
            MhStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(MhStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn cstring(s: &str) -> CString {
    CString::new(s.replace('\0', " ")).unwrap_or_default()
}

fn strategy_of(s: &MhStrategy) -> Result<Strategy, Fail> {
    let mode = match s.mode {
        m if m == MhMode::Levenshtein as i32 => Mode::Levenshtein,
        m if m == MhMode::Embedding as i32 => Mode::Embedding,
        m if m == MhMode::Hybrid as i32 => Mode::Hybrid,
        m => return Err(Fail(MhStatus::InvalidArgument, format!("unknown mode {m}"))),
    };
    Ok(Strategy {
        mode,
        threshold: s.threshold,
        k: s.k as usize,
        strict: s.strict,
        ..Strategy::default()
    })
}

fn run(engine: &MhEngine, source: &SourceSchema, strategy: &Strategy) -> Result<Vec<CrosswalkResult>, Fail> {
    Ok(crosswalk_schema(
        source,
        &engine.schema,
        engine.model.as_ref(),
        engine.classifier.as_ref(),
        strategy,
    )?)
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn mh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Levenshtein mode, threshold 70, k 5, not strict.
#[no_mangle]
pub extern "C" fn mh_strategy_default() -> MhStrategy {
    let d = Strategy::default();
    MhStrategy {
        mode: MhMode::Levenshtein as i32,
        threshold: d.threshold,
        k: d.k as u32,
        strict: d.strict,
    }
}

/// Loads and refines a standard schema (CSV, or JSON by `.json` extension)
/// and, when `model_path` is not null, an embedding model.
///
/// # Safety
/// Path arguments are null or NUL-terminated strings; `out` is a valid
/// pointer to write the new handle to.
#[no_mangle]
pub unsafe extern "C" fn mh_engine_load(
    std_path: *const c_char,
    model_path: *const c_char,
    out: *mut *mut MhEngine,
) -> MhStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let std_path = Path::new(str_arg(std_path, "std_path")?);
        let schema = refine_schema(&load_standard_schema(std_path, Format::from_path(std_path))?);
        let model = if model_path.is_null() {
            None
        } else {
            Some(load_model(Path::new(str_arg(model_path, "model_path")?))?)
        };
        *out = Box::into_raw(Box::new(MhEngine {
            schema,
            model,
            classifier: None,
        }));
        Ok(())
    })
}

/// Trains the feedback classifier from a decision log and attaches it.
///
/// # Safety
/// `engine` comes from [`mh_engine_load`]; `log_path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mh_engine_load_decisions(
    engine: *mut MhEngine,
    log_path: *const c_char,
) -> MhStatus {
    guard(|| {
        let engine = engine.as_mut().ok_or_else(|| null("engine"))?;
        let records = read_decision_log(Path::new(str_arg(log_path, "log_path")?))?;
        engine.classifier = Some(train_classifier(&records, &engine.schema)?);
        Ok(())
    })
}

/// # Safety
/// `engine` is null or comes from [`mh_engine_load`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mh_engine_free(engine: *mut MhEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// # Safety
/// `engine` comes from [`mh_engine_load`]; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_engine_entry_count(engine: *const MhEngine, out: *mut usize) -> MhStatus {
    guard(|| {
        let engine = engine.as_ref().ok_or_else(|| null("engine"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = engine.schema.len();
        Ok(())
    })
}

/// Crosswalks `n` column names. `strategy` may be null for the defaults.
///
/// # Safety
/// `names` points to `n` NUL-terminated strings; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_crosswalk(
    engine: *const MhEngine,
    names: *const *const c_char,
    n: usize,
    strategy: *const MhStrategy,
    out: *mut *mut MhResults,
) -> MhStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let engine = engine.as_ref().ok_or_else(|| null("engine"))?;
        if names.is_null() && n > 0 {
            return Err(null("names"));
        }
        let columns = (0..n)
            .map(|i| str_arg(*names.add(i), "names[i]").map(ColumnMeta::named))
            .collect::<Result<Vec<_>, _>>()?;
        let strategy = match strategy.as_ref() {
            Some(s) => strategy_of(s)?,
            None => Strategy::default(),
        };
        let source = SourceSchema {
            dataset_id: "ffi".into(),
            columns,
        };
        let results = run(engine, &source, &strategy)?;
        let strings = results
            .iter()
            .map(|r| ResultStrings {
                source: cstring(&r.source_column),
                entry_id: r.matched_entry_id.as_ref().map(|id| cstring(id.as_str())),
                path: cstring(&r.predicted_path.joined()),
                alternates: r.alternates.iter().map(|a| cstring(a.entry_id.as_str())).collect(),
            })
            .collect();
        *out = Box::into_raw(Box::new(MhResults { results, strings }));
        Ok(())
    })
}

/// Crosswalks a source schema given as JSON (`{"dataset_id", "columns":
/// [{"name", ...}]}`). `strategy_json` is null or a strategy object. On
/// success `*out_json` holds a JSON array of results; free it with
/// [`mh_string_free`].
///
/// # Safety
/// String arguments are null or NUL-terminated; `out_json` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_crosswalk_json(
    engine: *const MhEngine,
    source_json: *const c_char,
    strategy_json: *const c_char,
    out_json: *mut *mut c_char,
) -> MhStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        *out_json = ptr::null_mut();
        let engine = engine.as_ref().ok_or_else(|| null("engine"))?;
        let source: SourceSchema = serde_json::from_str(str_arg(source_json, "source_json")?)
            .map_err(|e| Fail(MhStatus::Parse, format!("source_json: {e}")))?;
        let strategy: Strategy = if strategy_json.is_null() {
            Strategy::default()
        } else {
            serde_json::from_str(str_arg(strategy_json, "strategy_json")?)
                .map_err(|e| Fail(MhStatus::Parse, format!("strategy_json: {e}")))?
        };
        let results = run(engine, &source, &strategy)?;
        let json = serde_json::to_string(&results).map_err(|e| Fail(MhStatus::Data, e.to_string()))?;
        *out_json = cstring(&json).into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` is null or a string returned by [`mh_crosswalk_json`].
#[no_mangle]
pub unsafe extern "C" fn mh_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `results` is null or comes from [`mh_crosswalk`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mh_results_free(results: *mut MhResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}

/// # Safety
/// `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_results_len(results: *const MhResults, out: *mut usize) -> MhStatus {
    guard(|| {
        let results = results.as_ref().ok_or_else(|| null("results"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = results.results.len();
        Ok(())
    })
}

unsafe fn item<'a>(results: *const MhResults, i: usize) -> Result<(&'a CrosswalkResult, &'a ResultStrings), Fail> {
    let results = results.as_ref().ok_or_else(|| null("results"))?;
    match (results.results.get(i), results.strings.get(i)) {
        (Some(r), Some(s)) => Ok((r, s)),
        _ => Err(Fail(
            MhStatus::IndexOutOfRange,
            format!("index {i} out of range for {} results", results.results.len()),
        )),
    }
}

/// Source column name of result `i`.
///
/// # Safety
/// `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_result_source(
    results: *const MhResults,
    i: usize,
    out: *mut *const c_char,
) -> MhStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = item(results, i)?.1.source.as_ptr();
        Ok(())
    })
}

/// Matched entry id of result `i`; writes null when the column is unmatched.
///
/// # Safety
/// `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_result_entry_id(
    results: *const MhResults,
    i: usize,
    out: *mut *const c_char,
) -> MhStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = item(results, i)?
            .1
            .entry_id
            .as_ref()
            .map_or(ptr::null(), |s| s.as_ptr());
        Ok(())
    })
}

/// Predicted tier path of result `i`, tiers joined by `|`; empty when unmatched.
///
/// # Safety
/// `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_result_path(
    results: *const MhResults,
    i: usize,
    out: *mut *const c_char,
) -> MhStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = item(results, i)?.1.path.as_ptr();
        Ok(())
    })
}

/// # Safety
/// `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_result_score(results: *const MhResults, i: usize, out: *mut f64) -> MhStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = item(results, i)?.0.score;
        Ok(())
    })
}

/// # Safety
/// `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_result_method(
    results: *const MhResults,
    i: usize,
    out: *mut MhMethod,
) -> MhStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = match item(results, i)?.0.method {
            Method::None => MhMethod::None,
            Method::Levenshtein => MhMethod::Levenshtein,
            Method::Embedding => MhMethod::Embedding,
            Method::Classifier => MhMethod::Classifier,
        };
        Ok(())
    })
}

/// # Safety
/// `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_result_confidence(
    results: *const MhResults,
    i: usize,
    out: *mut MhConfidence,
) -> MhStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = match item(results, i)?.0.confidence {
            Confidence::Unmatched => MhConfidence::Unmatched,
            Confidence::Weak => MhConfidence::Weak,
            Confidence::Qualified => MhConfidence::Qualified,
        };
        Ok(())
    })
}

/// Number of alternates of result `i`.
///
/// # Safety
/// `results` comes from [`mh_crosswalk`]; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_result_alternate_count(
    results: *const MhResults,
    i: usize,
    out: *mut usize,
) -> MhStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = item(results, i)?.0.alternates.len();
        Ok(())
    })
}

/// Alternate `j` of result `i`: its entry id and score.
///
/// # Safety
/// `results` comes from [`mh_crosswalk`]; `entry_id` and `score` are valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mh_result_alternate(
    results: *const MhResults,
    i: usize,
    j: usize,
    entry_id: *mut *const c_char,
    score: *mut f64,
) -> MhStatus {
    guard(|| {
        let entry_id = entry_id.as_mut().ok_or_else(|| null("entry_id"))?;
        let score = score.as_mut().ok_or_else(|| null("score"))?;
        let (r, s) = item(results, i)?;
        let (Some(alt), Some(id)) = (r.alternates.get(j), s.alternates.get(j)) else {
            return Err(Fail(
                MhStatus::IndexOutOfRange,
                format!("alternate {j} out of range for {}", r.alternates.len()),
            ));
        };
        *entry_id = id.as_ptr();
        *score = alt.score;
        Ok(())
    })
}
