//! C ABI for the prospect pipeline.
//!
//! Conventions: fallible calls return a [`ProspectStatus`] and write their
//! result through an out pointer; the last error message per thread is
//! available via [`prospect_last_error`]. Objects returned through out
//! pointers are owned by the caller and must be released with the matching
//! `*_free` function. Strings are NUL-terminated UTF-8 released with
//! [`prospect_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use prospect::corpus::Corpus;
use prospect::embed::{EmbedderConfig, DEFAULT_BATCH_SIZE, DEFAULT_DIM, DEFAULT_SEED};
use prospect::prospect::{KeywordSet, ProspectHit};
use prospect::report::TableFormat;
use prospect::segment::{default_stopwords, SegmentMode, StopwordList};
use prospect::topics::{FitParams, TopicModel, DEFAULT_MERGE_THRESHOLD};
use prospect::Error;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProspectStatus {
    Ok = 0,
    /// A required pointer argument was NULL or a string was not UTF-8.
    InvalidArgument = 1,
    IoError = 2,
    ParseError = 3,
    SchemaError = 4,
    ContractError = 5,
    TransportError = 6,
    ValidationError = 7,
    NoTopics = 8,
    /// A panic was caught at the boundary; see prospect_last_error().
    InternalError = 9,
}

/// Opaque handle to a loaded corpus.
pub struct ProspectCorpus(Corpus);

/// Opaque handle to a fitted topic model.
pub struct ProspectModel(TopicModel);

/// Opaque handle to query results.
pub struct ProspectHits(Vec<ProspectHit>);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProspectMode {
    Utterances = 0,
    FilteredClauses = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProspectEmbedder {
    Lexical = 0,
    Service = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProspectTableFormat {
    Markdown = 0,
    Csv = 1,
}

/// Everything `prospect_model_build` needs beyond the corpus itself.
/// Obtain a defaulted value from `prospect_build_options_default` and
/// override fields as needed.
#[repr(C)]
pub struct ProspectBuildOptions {
    pub mode: ProspectMode,
    pub embedder: ProspectEmbedder,
    /// Lexical embedding dimensionality.
    pub dim: u32,
    pub seed: u64,
    pub n_components: u32,
    pub min_cluster_size: u32,
    pub min_samples: u32,
    pub merge_threshold: f64,
    /// Required for the service embedder; ignored otherwise. May be NULL.
    pub service_url: *const c_char,
    /// Optional stopword list file; NULL selects the built-in list.
    pub stopwords_path: *const c_char,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<Vec<u8>>) {
    let stored =
        CString::new(message).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(stored));
}

fn status_for(error: &Error) -> ProspectStatus {
    match error {
        Error::Io { .. } | Error::MissingFile(_) => ProspectStatus::IoError,
        Error::Parse { .. } => ProspectStatus::ParseError,
        Error::Schema { .. } => ProspectStatus::SchemaError,
        Error::EmptyCorpus | Error::Contract(_) => ProspectStatus::ContractError,
        Error::Transport { .. } | Error::Protocol(_) => ProspectStatus::TransportError,
        Error::Validation(_) | Error::VersionMismatch { .. } => ProspectStatus::ValidationError,
        Error::NoTopics | Error::UnknownTopic(_) => ProspectStatus::NoTopics,
        Error::Stage { source, .. } => status_for(source),
    }
}

fn fail(error: Error) -> ProspectStatus {
    let status = status_for(&error);
    set_last_error(error.to_string());
    status
}

/// Run `body` with panics caught at the boundary.
fn guarded(body: impl FnOnce() -> ProspectStatus + std::panic::UnwindSafe) -> ProspectStatus {
    match std::panic::catch_unwind(body) {
        Ok(status) => status,
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(message);
            ProspectStatus::InternalError
        }
    }
}

/// # Safety
/// `ptr` must be NULL or a valid NUL-terminated string.
unsafe fn required_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, ProspectStatus> {
    if ptr.is_null() {
        set_last_error(format!("{name} must not be NULL"));
        return Err(ProspectStatus::InvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error(format!("{name} is not valid UTF-8"));
        ProspectStatus::InvalidArgument
    })
}

fn required_out<T>(ptr: *mut T, name: &str) -> Result<(), ProspectStatus> {
    if ptr.is_null() {
        set_last_error(format!("{name} must not be NULL"));
        return Err(ProspectStatus::InvalidArgument);
    }
    Ok(())
}

/// Message describing the most recent error on this thread, or NULL.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn prospect_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|message| message.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

unsafe fn load_corpus(
    path: *const c_char,
    out: *mut *mut ProspectCorpus,
    loader: impl Fn(&Path) -> prospect::Result<Corpus> + std::panic::UnwindSafe,
) -> ProspectStatus {
    guarded(move || {
        let path = match required_str(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        if let Err(status) = required_out(out, "out") {
            return status;
        }
        match loader(Path::new(path)) {
            Ok(corpus) => {
                *out = Box::into_raw(Box::new(ProspectCorpus(corpus)));
                ProspectStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Load an SGD-shaped corpus from a JSON file or a directory of them.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn prospect_corpus_load_sgd(
    path: *const c_char,
    out: *mut *mut ProspectCorpus,
) -> ProspectStatus {
    load_corpus(path, out, prospect::corpus::load_sgd)
}

/// Load a MultiWOZ-shaped corpus from a JSON file.
///
/// # Safety
/// See `prospect_corpus_load_sgd`.
#[no_mangle]
pub unsafe extern "C" fn prospect_corpus_load_multiwoz(
    path: *const c_char,
    out: *mut *mut ProspectCorpus,
) -> ProspectStatus {
    load_corpus(path, out, prospect::corpus::load_multiwoz)
}

/// Load a normalized JSON-lines corpus written by
/// `prospect_corpus_write_normalized` (or the CLI's `ingest`).
///
/// # Safety
/// See `prospect_corpus_load_sgd`.
#[no_mangle]
pub unsafe extern "C" fn prospect_corpus_read_normalized(
    path: *const c_char,
    out: *mut *mut ProspectCorpus,
) -> ProspectStatus {
    load_corpus(path, out, prospect::corpus::read_normalized)
}

/// Write a corpus as normalized JSON-lines.
///
/// # Safety
/// `corpus` must be a live handle; `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn prospect_corpus_write_normalized(
    corpus: *const ProspectCorpus,
    path: *const c_char,
) -> ProspectStatus {
    guarded(move || {
        if corpus.is_null() {
            set_last_error("corpus must not be NULL");
            return ProspectStatus::InvalidArgument;
        }
        let path = match required_str(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match prospect::corpus::write_normalized(&(*corpus).0, Path::new(path)) {
            Ok(()) => ProspectStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Number of dialogues in the corpus; 0 for a NULL handle.
///
/// # Safety
/// `corpus` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prospect_corpus_dialogue_count(corpus: *const ProspectCorpus) -> usize {
    if corpus.is_null() {
        return 0;
    }
    (*corpus).0.dialogue_count()
}

/// # Safety
/// `corpus` must be NULL or an owned handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn prospect_corpus_free(corpus: *mut ProspectCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Defaults matching the CLI: utterance mode, lexical embedder, dim 64,
/// 5 components, min cluster size 10, min samples 5, merge threshold 0.915.
#[no_mangle]
pub extern "C" fn prospect_build_options_default() -> ProspectBuildOptions {
    ProspectBuildOptions {
        mode: ProspectMode::Utterances,
        embedder: ProspectEmbedder::Lexical,
        dim: DEFAULT_DIM as u32,
        seed: DEFAULT_SEED,
        n_components: 5,
        min_cluster_size: 10,
        min_samples: 5,
        merge_threshold: DEFAULT_MERGE_THRESHOLD,
        service_url: std::ptr::null(),
        stopwords_path: std::ptr::null(),
    }
}

/// Segment the corpus and fit the topic model.
///
/// # Safety
/// `corpus` and `options` must be live pointers; `out` valid for writes;
/// strings inside `options` NULL or valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn prospect_model_build(
    corpus: *const ProspectCorpus,
    options: *const ProspectBuildOptions,
    out: *mut *mut ProspectModel,
) -> ProspectStatus {
    guarded(move || {
        if corpus.is_null() || options.is_null() {
            set_last_error("corpus and options must not be NULL");
            return ProspectStatus::InvalidArgument;
        }
        if let Err(status) = required_out(out, "out") {
            return status;
        }
        let options = &*options;

        let embedder = match options.embedder {
            ProspectEmbedder::Lexical => {
                EmbedderConfig::lexical(options.dim as usize, options.seed)
            }
            ProspectEmbedder::Service => {
                let url = match required_str(options.service_url, "service_url") {
                    Ok(u) => u,
                    Err(status) => return status,
                };
                let mut cfg = EmbedderConfig::service(url, DEFAULT_BATCH_SIZE);
                cfg.seed = options.seed;
                cfg
            }
        };

        let stopwords: StopwordList = if options.stopwords_path.is_null() {
            default_stopwords().clone()
        } else {
            let path = match required_str(options.stopwords_path, "stopwords_path") {
                Ok(p) => p,
                Err(status) => return status,
            };
            match StopwordList::from_file(Path::new(path)) {
                Ok(list) => list,
                Err(e) => return fail(e),
            }
        };

        let mode = match options.mode {
            ProspectMode::Utterances => SegmentMode::Utterances,
            ProspectMode::FilteredClauses => SegmentMode::FilteredClauses,
        };
        let params = FitParams {
            n_components: options.n_components as usize,
            min_cluster_size: options.min_cluster_size as usize,
            min_samples: options.min_samples as usize,
            merge_threshold: options.merge_threshold,
            seed: options.seed,
        };

        let documents =
            match prospect::segment::build_documents(&(*corpus).0, mode, &embedder, &stopwords) {
                Ok(docs) => docs,
                Err(e) => return fail(e),
            };
        match prospect::topics::fit(documents, &embedder, &params) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(ProspectModel(model)));
                ProspectStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Write the model artifact directory.
///
/// # Safety
/// `model` must be a live handle; `dir` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn prospect_model_save(
    model: *const ProspectModel,
    dir: *const c_char,
) -> ProspectStatus {
    guarded(move || {
        if model.is_null() {
            set_last_error("model must not be NULL");
            return ProspectStatus::InvalidArgument;
        }
        let dir = match required_str(dir, "dir") {
            Ok(d) => d,
            Err(status) => return status,
        };
        match prospect::report::export_model(&(*model).0, Path::new(dir)) {
            Ok(()) => ProspectStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Load a model artifact directory; all invariants are re-validated.
///
/// # Safety
/// `dir` must be a valid NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn prospect_model_load(
    dir: *const c_char,
    out: *mut *mut ProspectModel,
) -> ProspectStatus {
    guarded(move || {
        let dir = match required_str(dir, "dir") {
            Ok(d) => d,
            Err(status) => return status,
        };
        if let Err(status) = required_out(out, "out") {
            return status;
        }
        match prospect::report::import_model(Path::new(dir)) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(ProspectModel(model)));
                ProspectStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of topics; 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prospect_model_topic_count(model: *const ProspectModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).0.num_topics()
}

/// Number of documents; 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prospect_model_document_count(model: *const ProspectModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).0.documents.len()
}

/// # Safety
/// `model` must be NULL or an owned handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn prospect_model_free(model: *mut ProspectModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// ---------------------------------------------------------------------------
// Query and hits
// ---------------------------------------------------------------------------

/// Retrieve the `top_k` most similar topics per keyword. `keywords` is a
/// semicolon-separated list; NULL selects the built-in five phrases.
///
/// # Safety
/// `model` must be a live handle; `keywords` NULL or a valid string; `out`
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn prospect_query(
    model: *const ProspectModel,
    keywords: *const c_char,
    top_k: u32,
    out: *mut *mut ProspectHits,
) -> ProspectStatus {
    guarded(move || {
        if model.is_null() {
            set_last_error("model must not be NULL");
            return ProspectStatus::InvalidArgument;
        }
        if let Err(status) = required_out(out, "out") {
            return status;
        }
        let keyword_set = if keywords.is_null() {
            KeywordSet::default()
        } else {
            let raw = match required_str(keywords, "keywords") {
                Ok(r) => r,
                Err(status) => return status,
            };
            match KeywordSet::parse(raw) {
                Ok(set) => set,
                Err(e) => return fail(e),
            }
        };
        let model = &(*model).0;
        match prospect::prospect::query(model, &keyword_set, &model.embedder, top_k as usize) {
            Ok(hits) => {
                *out = Box::into_raw(Box::new(ProspectHits(hits)));
                ProspectStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of hits; 0 for a NULL handle.
///
/// # Safety
/// `hits` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prospect_hits_len(hits: *const ProspectHits) -> usize {
    if hits.is_null() {
        return 0;
    }
    (*hits).0.len()
}

/// Serialize hits to a JSON string (caller frees with
/// `prospect_string_free`).
///
/// # Safety
/// `hits` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn prospect_hits_to_json(
    hits: *const ProspectHits,
    out: *mut *mut c_char,
) -> ProspectStatus {
    guarded(move || {
        if hits.is_null() {
            set_last_error("hits must not be NULL");
            return ProspectStatus::InvalidArgument;
        }
        if let Err(status) = required_out(out, "out") {
            return status;
        }
        match serde_json_string(&(*hits).0) {
            Ok(json) => {
                *out = json.into_raw();
                ProspectStatus::Ok
            }
            Err(status) => status,
        }
    })
}

fn serde_json_string(hits: &[ProspectHit]) -> Result<CString, ProspectStatus> {
    let json = match prospect::prospect::hits_to_json(hits) {
        Ok(j) => j,
        Err(e) => return Err(fail(e)),
    };
    CString::new(json).map_err(|_| {
        set_last_error("hits JSON contained a NUL byte");
        ProspectStatus::InternalError
    })
}

/// Render hits as a Markdown or RFC-4180 CSV table (caller frees with
/// `prospect_string_free`).
///
/// # Safety
/// `hits` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn prospect_hits_table(
    hits: *const ProspectHits,
    format: ProspectTableFormat,
    out: *mut *mut c_char,
) -> ProspectStatus {
    guarded(move || {
        if hits.is_null() {
            set_last_error("hits must not be NULL");
            return ProspectStatus::InvalidArgument;
        }
        if let Err(status) = required_out(out, "out") {
            return status;
        }
        let table = prospect::report::render_table(
            &(*hits).0,
            match format {
                ProspectTableFormat::Markdown => TableFormat::Markdown,
                ProspectTableFormat::Csv => TableFormat::Csv,
            },
        );
        match CString::new(table) {
            Ok(s) => {
                *out = s.into_raw();
                ProspectStatus::Ok
            }
            Err(_) => {
                set_last_error("table contained a NUL byte");
                ProspectStatus::InternalError
            }
        }
    })
}

/// # Safety
/// `hits` must be NULL or an owned handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn prospect_hits_free(hits: *mut ProspectHits) {
    if !hits.is_null() {
        drop(Box::from_raw(hits));
    }
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn prospect_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
