//! C ABI over `hyperkg-core`.
//!
//! Every entry point returns an [`HkgStatus`]. On failure the message is
//! kept per thread and fetched with [`hkg_last_error`]. Objects cross the
//! boundary as opaque handles ([`HkgEngine`], [`HkgLibrary`]); graphs and
//! reports cross as JSON strings. Strings returned through `out` pointers
//! are owned by the caller and released with [`hkg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hyperkg_core::config::RunConfig;
use hyperkg_core::evaluator::{build_report, evaluate_graphs, verify_facts};
use hyperkg_core::gateway::{parse_library_ops, Gateway};
use hyperkg_core::model::{from_json, to_json};
use hyperkg_core::pipeline::Pipeline;
use hyperkg_core::prompts::PromptSet;
use hyperkg_core::skills::{apply_library_ops, SkillLibrary};
use hyperkg_core::trainer::{load_manifest, run_learning_round};
use hyperkg_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HkgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Config = 4,
    Parse = 5,
    Validation = 6,
    Gateway = 7,
    FixtureMiss = 8,
    Extraction = 9,
    UnknownSkill = 10,
    Training = 11,
    Evaluation = 12,
    Io = 13,
    Panic = 99,
}

impl From<&Error> for HkgStatus {
    fn from(e: &Error) -> Self {
        if e.fixture_miss_key().is_some() {
            return HkgStatus::FixtureMiss;
        }
        match e {
            Error::InvalidInput(_) => HkgStatus::InvalidInput,
            Error::Config(_) => HkgStatus::Config,
            Error::Parse { .. } => HkgStatus::Parse,
            Error::Validation(_) => HkgStatus::Validation,
            Error::Gateway(_) | Error::Transport(_) => HkgStatus::Gateway,
            Error::FixtureMiss { .. } => HkgStatus::FixtureMiss,
            Error::Extraction(_) | Error::Chunk { .. } => HkgStatus::Extraction,
            Error::UnknownSkill { .. } => HkgStatus::UnknownSkill,
            Error::Rollout { .. } | Error::Reflection(_) => HkgStatus::Training,
            Error::Matching(_) | Error::Verification(_) | Error::Retrieval(_) => HkgStatus::Evaluation,
            Error::Io { .. } => HkgStatus::Io,
        }
    }
}

/// Configured gateway, prompts and pipeline settings.
pub struct HkgEngine {
    config: RunConfig,
    gateway: Gateway,
    prompts: PromptSet,
}

impl HkgEngine {
    fn new(config: RunConfig) -> Result<Self, Error> {
        config.validate()?;
        Ok(HkgEngine {
            gateway: Gateway::from_config(&config.effective_gateway())?,
            prompts: PromptSet::from_config(&config.prompts)?,
            config,
        })
    }

    fn pipeline(&self) -> Pipeline<'_> {
        Pipeline {
            gateway: &self.gateway,
            prompts: &self.prompts,
            chunking: &self.config.chunking,
            extraction: &self.config.extraction,
            dedup: &self.config.dedup,
        }
    }
}

/// A skill library.
pub struct HkgLibrary(SkillLibrary);

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

enum Failure {
    Status(HkgStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn run(f: impl FnOnce() -> Result<(), Failure>) -> HkgStatus {
    let (status, message) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => (HkgStatus::Ok, None),
        Ok(Err(Failure::Status(s, m))) => (s, Some(m)),
        Ok(Err(Failure::Core(e))) => (HkgStatus::from(&e), Some(e.to_string())),
        Err(_) => (HkgStatus::Panic, Some("internal panic".to_string())),
    };
    LAST_ERROR.with(|l| *l.borrow_mut() = message);
    status
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Status(HkgStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(HkgStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn out_ptr<T>(out: *mut T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        Err(Failure::Status(HkgStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::Status(HkgStatus::NullPointer, format!("{what} is null")))
}

fn c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::Status(HkgStatus::InvalidInput, "output contains a NUL byte".into()))
}

fn to_pretty<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn hkg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The last error message on this thread, or NULL. Free with
/// `hkg_string_free`.
#[no_mangle]
pub extern "C" fn hkg_last_error() -> *mut c_char {
    LAST_ERROR.with(|l| {
        l.borrow()
            .as_ref()
            .and_then(|m| CString::new(m.replace('\0', " ")).ok())
            .map_or(ptr::null_mut(), CString::into_raw)
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn hkg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Build an engine from a TOML or JSON config file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hkg_engine_from_file(path: *const c_char, out: *mut *mut HkgEngine) -> HkgStatus {
    run(|| {
        out_ptr(out, "out")?;
        let cfg = RunConfig::load(text(path, "path")?)?;
        *out = Box::into_raw(Box::new(HkgEngine::new(cfg)?));
        Ok(())
    })
}

/// Build an engine from TOML text. Relative paths resolve against
/// `base_dir`, or the working directory when it is NULL.
///
/// # Safety
/// String arguments must be NUL-terminated (`base_dir` may be NULL);
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hkg_engine_from_toml(
    toml: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut HkgEngine,
) -> HkgStatus {
    run(|| {
        out_ptr(out, "out")?;
        let mut cfg = RunConfig::from_toml(text(toml, "toml")?)?;
        if !base_dir.is_null() {
            cfg.resolve_relative(Path::new(text(base_dir, "base_dir")?));
        }
        *out = Box::into_raw(Box::new(HkgEngine::new(cfg)?));
        Ok(())
    })
}

/// # Safety
/// `engine` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn hkg_engine_free(engine: *mut HkgEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Backend calls issued so far, retries included.
///
/// # Safety
/// `engine` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hkg_engine_request_count(engine: *const HkgEngine) -> u64 {
    engine.as_ref().map_or(0, |e| e.gateway.request_count())
}

/// Extract and consolidate a hypergraph; writes its JSON to `out_graph`.
/// `library` may be NULL.
///
/// # Safety
/// Handles must be live; strings NUL-terminated; `out_graph` valid.
#[no_mangle]
pub unsafe extern "C" fn hkg_extract(
    engine: *const HkgEngine,
    source_id: *const c_char,
    document: *const c_char,
    library: *const HkgLibrary,
    out_graph: *mut *mut c_char,
) -> HkgStatus {
    run(|| {
        out_ptr(out_graph, "out_graph")?;
        let engine = handle(engine, "engine")?;
        let empty = SkillLibrary::new();
        let lib = library.as_ref().map_or(&empty, |l| &l.0);
        let graph = engine
            .pipeline()
            .run_default(text(source_id, "source_id")?, text(document, "document")?, lib)?
            .graph;
        *out_graph = c_string(to_json(&graph))?;
        Ok(())
    })
}

/// Score one predicted graph against a gold graph (both JSON) at the given
/// thresholds; writes the report JSON to `out_report`.
///
/// # Safety
/// `thresholds` must point to `n_thresholds` doubles.
#[no_mangle]
pub unsafe extern "C" fn hkg_evaluate(
    engine: *const HkgEngine,
    pred_json: *const c_char,
    gold_json: *const c_char,
    thresholds: *const f64,
    n_thresholds: usize,
    out_report: *mut *mut c_char,
) -> HkgStatus {
    run(|| {
        out_ptr(out_report, "out_report")?;
        let engine = handle(engine, "engine")?;
        if thresholds.is_null() || n_thresholds == 0 {
            return Err(Failure::Status(HkgStatus::InvalidInput, "no thresholds".into()));
        }
        let mut ts = std::slice::from_raw_parts(thresholds, n_thresholds).to_vec();
        ts.sort_by(f64::total_cmp);
        let pred = from_json(text(pred_json, "pred_json")?)?;
        let gold = from_json(text(gold_json, "gold_json")?)?;
        let scored = evaluate_graphs(&pred, &gold, &engine.gateway)?;
        let report = build_report(
            &[(gold.source_id().to_string(), scored)],
            &ts,
            engine.gateway.embedding_model_id(),
        )?;
        *out_report = c_string(to_pretty(&report))?;
        Ok(())
    })
}

/// Judge each non-empty line of `facts` against the graph; writes the
/// report JSON to `out_report`.
///
/// # Safety
/// Handles must be live; strings NUL-terminated; `out_report` valid.
#[no_mangle]
pub unsafe extern "C" fn hkg_factcheck(
    engine: *const HkgEngine,
    graph_json: *const c_char,
    facts: *const c_char,
    out_report: *mut *mut c_char,
) -> HkgStatus {
    run(|| {
        out_ptr(out_report, "out_report")?;
        let engine = handle(engine, "engine")?;
        let graph = from_json(text(graph_json, "graph_json")?)?;
        let facts: Vec<&str> = text(facts, "facts")?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let report = verify_facts(&facts, &graph, &engine.gateway, &engine.prompts, &engine.config.factcheck)?;
        *out_report = c_string(to_pretty(&report))?;
        Ok(())
    })
}

/// Run one learning round over a manifest. Writes the updated library to
/// `out_library` and, when `out_report` is not NULL, the round report.
///
/// # Safety
/// Handles must be live; strings NUL-terminated; `out_library` valid.
#[no_mangle]
pub unsafe extern "C" fn hkg_learn_round(
    engine: *const HkgEngine,
    manifest_path: *const c_char,
    library: *const HkgLibrary,
    out_library: *mut *mut HkgLibrary,
    out_report: *mut *mut c_char,
) -> HkgStatus {
    run(|| {
        out_ptr(out_library, "out_library")?;
        let engine = handle(engine, "engine")?;
        let lib = handle(library, "library")?;
        let docs = load_manifest(text(manifest_path, "manifest_path")?)?;
        let (next, report) = run_learning_round(&docs, &lib.0, &engine.pipeline(), &engine.config.rollout)?;
        if !out_report.is_null() {
            *out_report = c_string(to_pretty(&report))?;
        }
        *out_library = Box::into_raw(Box::new(HkgLibrary(next)));
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hkg_library_new(out: *mut *mut HkgLibrary) -> HkgStatus {
    run(|| {
        out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(HkgLibrary(SkillLibrary::new())));
        Ok(())
    })
}

/// Load a library file; a missing file yields an empty library.
///
/// # Safety
/// `path` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hkg_library_load(path: *const c_char, out: *mut *mut HkgLibrary) -> HkgStatus {
    run(|| {
        out_ptr(out, "out")?;
        let lib = SkillLibrary::load(text(path, "path")?)?;
        *out = Box::into_raw(Box::new(HkgLibrary(lib)));
        Ok(())
    })
}

/// # Safety
/// `json` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hkg_library_from_json(json: *const c_char, out: *mut *mut HkgLibrary) -> HkgStatus {
    run(|| {
        out_ptr(out, "out")?;
        let lib = SkillLibrary::from_json(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(HkgLibrary(lib)));
        Ok(())
    })
}

/// # Safety
/// `library` live; `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn hkg_library_to_json(library: *const HkgLibrary, out_json: *mut *mut c_char) -> HkgStatus {
    run(|| {
        out_ptr(out_json, "out_json")?;
        *out_json = c_string(handle(library, "library")?.0.to_json())?;
        Ok(())
    })
}

/// Write the library atomically.
///
/// # Safety
/// `library` live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hkg_library_save(library: *const HkgLibrary, path: *const c_char) -> HkgStatus {
    run(|| {
        handle(library, "library")?.0.save_atomic(text(path, "path")?)?;
        Ok(())
    })
}

/// Number of skills; 0 for NULL.
///
/// # Safety
/// `library` must be NULL or live.
#[no_mangle]
pub unsafe extern "C" fn hkg_library_len(library: *const HkgLibrary) -> usize {
    library.as_ref().map_or(0, |l| l.0.len())
}

/// Round counter; 0 for NULL.
///
/// # Safety
/// `library` must be NULL or live.
#[no_mangle]
pub unsafe extern "C" fn hkg_library_round(library: *const HkgLibrary) -> u32 {
    library.as_ref().map_or(0, |l| l.0.round())
}

/// Apply a JSON array of ADD/MERGE/SKIP/DELETE operations, all or nothing.
/// The input library is left unchanged; the result goes to `out`.
///
/// # Safety
/// `library` live; `ops_json` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hkg_library_apply_ops(
    library: *const HkgLibrary,
    ops_json: *const c_char,
    out: *mut *mut HkgLibrary,
) -> HkgStatus {
    run(|| {
        out_ptr(out, "out")?;
        let lib = handle(library, "library")?;
        let ops = parse_library_ops(text(ops_json, "ops_json")?)?;
        *out = Box::into_raw(Box::new(HkgLibrary(apply_library_ops(&lib.0, &ops)?)));
        Ok(())
    })
}

/// # Safety
/// `library` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn hkg_library_free(library: *mut HkgLibrary) {
    if !library.is_null() {
        drop(Box::from_raw(library));
    }
}
