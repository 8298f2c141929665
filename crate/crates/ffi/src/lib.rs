//! C ABI for rbmtkit.
//!
//! Conventions:
//!
//! - Every fallible function returns an [`RbmtStatus`]; results go through
//!   out-pointers. On failure the out-pointer is left untouched and
//!   [`rbmt_last_error`] describes the problem.
//! - Strings are NUL-terminated UTF-8. Strings returned through `char **`
//!   are owned by the caller and must be released with [`rbmt_string_free`].
//! - Handles (`RbmtLexicon`, `RbmtBpeModel`, `RbmtPhraseTable`) are opaque
//!   and released with their matching `*_free` function. Handles are
//!   immutable after construction and may be shared across threads.
//! - A separator of `0` selects the default feature separator (U+FFE8).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use rbmtkit::annotate;
use rbmtkit::corpus::{self, DEFAULT_SEPARATOR};
use rbmtkit::entity::PhraseTable;
use rbmtkit::lexicon::{self, AmbiguityIndex};
use rbmtkit::metrics::{self, BleuOptions, ChrfOptions, Smoothing, TerOptions};
use rbmtkit::subword::{self, BpeModel, MarkerMode};
use rbmtkit::Sentence;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbmtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    InvalidInput = 4,
    Panic = 5,
}

/// Values accepted by `marker` parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbmtMarker {
    Suffix = 0,
    Prefix = 1,
}

/// Values accepted by `smoothing` parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbmtSmoothing {
    None = 0,
    AddOne = 1,
}

/// Lexicon ambiguity index.
pub struct RbmtLexicon {
    index: AmbiguityIndex,
}

/// Learned or loaded BPE merge list.
pub struct RbmtBpeModel {
    model: BpeModel,
}

/// Word translation counts.
pub struct RbmtPhraseTable {
    table: PhraseTable,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: RbmtStatus,
    message: String,
}

impl Failure {
    fn new(status: RbmtStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }

    fn input(e: impl std::fmt::Display) -> Self {
        Failure::new(RbmtStatus::InvalidInput, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RbmtStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RbmtStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_last_error("internal panic");
            RbmtStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string that outlives `'a`.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(RbmtStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(RbmtStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

/// # Safety
/// `p` must be null or a valid pointer to a `T` that outlives `'a`.
unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(RbmtStatus::NullPointer, format!("{name} is null")))
}

fn check_out<T>(p: *mut T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::new(RbmtStatus::NullPointer, "out is null"));
    }
    Ok(())
}

fn separator(code: u32) -> Result<char, Failure> {
    if code == 0 {
        return Ok(DEFAULT_SEPARATOR);
    }
    char::from_u32(code)
        .filter(|c| !c.is_whitespace())
        .ok_or_else(|| Failure::new(RbmtStatus::InvalidArgument, format!("invalid separator U+{code:04X}")))
}

fn marker(code: u32) -> Result<MarkerMode, Failure> {
    match code {
        c if c == RbmtMarker::Suffix as u32 => Ok(MarkerMode::Suffix),
        c if c == RbmtMarker::Prefix as u32 => Ok(MarkerMode::Prefix),
        other => Err(Failure::new(
            RbmtStatus::InvalidArgument,
            format!("invalid marker {other}"),
        )),
    }
}

fn c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(RbmtStatus::InvalidInput, "result contains a NUL byte"))
}

/// # Safety
/// `out` must be valid for writes.
unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    *out = c_string(s)?;
    Ok(())
}

/// # Safety
/// `out` must be valid for writes.
unsafe fn write_handle<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

fn render(sentence: &Sentence, sep: char) -> Result<String, Failure> {
    corpus::render_token_line(sentence, sep).map_err(Failure::input)
}

fn parse(line: &str, sep: char) -> Result<Sentence, Failure> {
    corpus::parse_token_line(line, sep).map_err(Failure::input)
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn rbmt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rbmt_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rbmt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses an s-expression lexicon into an ambiguity index.
///
/// # Safety
/// `text` must be a valid C string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbmt_lexicon_parse(text: *const c_char, out: *mut *mut RbmtLexicon) -> RbmtStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        check_out(out)?;
        let entries = lexicon::parse_lexicon(text).map_err(Failure::input)?;
        write_handle(
            out,
            RbmtLexicon {
                index: lexicon::build_ambiguity_index(entries),
            },
        );
        Ok(())
    })
}

/// Number of distinct surfaces in the index; 0 for NULL.
///
/// # Safety
/// `lexicon` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rbmt_lexicon_len(lexicon: *const RbmtLexicon) -> usize {
    lexicon.as_ref().map_or(0, |l| l.index.len())
}

/// # Safety
/// `lexicon` must be NULL or a handle from [`rbmt_lexicon_parse`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rbmt_lexicon_free(lexicon: *mut RbmtLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

/// Appends CAT and CL ambiguity-class features to every token of a line.
///
/// # Safety
/// Pointers must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbmt_annotate_catcl(
    lexicon: *const RbmtLexicon,
    line: *const c_char,
    separator_code: u32,
    out: *mut *mut c_char,
) -> RbmtStatus {
    guard(|| {
        let lexicon = ref_arg(lexicon, "lexicon")?;
        let line = str_arg(line, "line")?;
        check_out(out)?;
        let sep = separator(separator_code)?;
        let annotated = annotate::annotate_catcl(&parse(line, sep)?, &lexicon.index);
        write_string(out, render(&annotated, sep)?)
    })
}

/// Linearizes one bracketed parse tree with the default bracketed labels.
///
/// # Safety
/// `tree` must be a valid C string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbmt_linearize_tree(
    tree: *const c_char,
    separator_code: u32,
    out: *mut *mut c_char,
) -> RbmtStatus {
    guard(|| {
        let tree = str_arg(tree, "tree")?;
        check_out(out)?;
        let sep = separator(separator_code)?;
        let parsed = annotate::parse_bracketed_tree(tree).map_err(Failure::input)?;
        let line = annotate::linearize_tree(&parsed, &annotate::default_bracketed_labels());
        write_string(out, render(&line, sep)?)
    })
}

/// Learns BPE merges from newline-separated, space-tokenized text.
///
/// # Safety
/// `text` must be a valid C string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbmt_bpe_learn(
    text: *const c_char,
    max_merges: usize,
    min_frequency: u64,
    marker_code: u32,
    out: *mut *mut RbmtBpeModel,
) -> RbmtStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        check_out(out)?;
        let marker = marker(marker_code)?;
        let sentences: Vec<Sentence> = text.lines().map(Sentence::from_words).collect();
        let model = subword::bpe_learn(sentences.iter(), max_merges, min_frequency).with_marker(marker);
        write_handle(out, RbmtBpeModel { model });
        Ok(())
    })
}

/// Loads a BPE model from its text form.
///
/// # Safety
/// `text` must be a valid C string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbmt_bpe_model_parse(text: *const c_char, out: *mut *mut RbmtBpeModel) -> RbmtStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        check_out(out)?;
        let model = BpeModel::from_text(text).map_err(Failure::input)?;
        write_handle(out, RbmtBpeModel { model });
        Ok(())
    })
}

/// Serializes a BPE model to its text form.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbmt_bpe_model_to_text(model: *const RbmtBpeModel, out: *mut *mut c_char) -> RbmtStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        check_out(out)?;
        write_string(out, model.model.to_text())
    })
}

/// Number of merges; 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rbmt_bpe_model_len(model: *const RbmtBpeModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.len())
}

/// # Safety
/// `model` must be NULL or a BPE handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rbmt_bpe_model_free(model: *mut RbmtBpeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Segments every surface of a token line; features are copied to each piece.
///
/// # Safety
/// Pointers must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbmt_bpe_apply(
    model: *const RbmtBpeModel,
    line: *const c_char,
    separator_code: u32,
    out: *mut *mut c_char,
) -> RbmtStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let line = str_arg(line, "line")?;
        check_out(out)?;
        let sep = separator(separator_code)?;
        let segmented = subword::bpe_apply(&parse(line, sep)?, &model.model);
        write_string(out, render(&segmented, sep)?)
    })
}

/// Rejoins BPE pieces of a token line.
///
/// # Safety
/// `line` must be a valid C string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbmt_bpe_undo(
    line: *const c_char,
    separator_code: u32,
    marker_code: u32,
    out: *mut *mut c_char,
) -> RbmtStatus {
    guard(|| {
        let line = str_arg(line, "line")?;
        check_out(out)?;
        let sep = separator(separator_code)?;
        let undone = subword::bpe_undo(&parse(line, sep)?, marker(marker_code)?);
        write_string(out, render(&undone.sentence, sep)?)
    })
}

/// Loads a phrase table from `src<TAB>tgt<TAB>count` lines.
///
/// # Safety
/// `tsv` must be a valid C string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbmt_phrase_table_parse(tsv: *const c_char, out: *mut *mut RbmtPhraseTable) -> RbmtStatus {
    guard(|| {
        let tsv = str_arg(tsv, "tsv")?;
        check_out(out)?;
        let table = PhraseTable::from_tsv(tsv).map_err(Failure::input)?;
        write_handle(out, RbmtPhraseTable { table });
        Ok(())
    })
}

/// Most frequent translation of `source`. Writes NULL to `out` when the
/// word is not in the table.
///
/// # Safety
/// Pointers must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbmt_phrase_table_lookup(
    table: *const RbmtPhraseTable,
    source: *const c_char,
    out: *mut *mut c_char,
) -> RbmtStatus {
    guard(|| {
        let table = ref_arg(table, "table")?;
        let source = str_arg(source, "source")?;
        check_out(out)?;
        match table.table.lookup(source) {
            Some(t) => write_string(out, t.to_string()),
            None => {
                *out = ptr::null_mut();
                Ok(())
            }
        }
    })
}

/// # Safety
/// `table` must be NULL or a handle from [`rbmt_phrase_table_parse`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rbmt_phrase_table_free(table: *mut RbmtPhraseTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// # Safety
/// Both strings must be valid C strings.
unsafe fn sentence_pair(hyp: *const c_char, reference: *const c_char) -> Result<(Sentence, Sentence), Failure> {
    Ok((
        Sentence::from_words(str_arg(hyp, "hyp")?),
        Sentence::from_words(str_arg(reference, "reference")?),
    ))
}

/// Sentence BLEU on [0, 100] over space-tokenized text.
///
/// # Safety
/// Strings must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbmt_sentence_bleu(
    hyp: *const c_char,
    reference: *const c_char,
    smoothing_code: u32,
    out: *mut f64,
) -> RbmtStatus {
    guard(|| {
        let (h, r) = sentence_pair(hyp, reference)?;
        check_out(out)?;
        let smoothing = match smoothing_code {
            c if c == RbmtSmoothing::None as u32 => Smoothing::None,
            c if c == RbmtSmoothing::AddOne as u32 => Smoothing::AddOne,
            other => {
                return Err(Failure::new(
                    RbmtStatus::InvalidArgument,
                    format!("invalid smoothing {other}"),
                ));
            }
        };
        let options = BleuOptions {
            smoothing,
            ..BleuOptions::default()
        };
        *out = metrics::sentence_bleu(&h, &r, options);
        Ok(())
    })
}

/// Sentence TER with greedy block shifts. Fails on an empty reference.
///
/// # Safety
/// Strings must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbmt_sentence_ter(hyp: *const c_char, reference: *const c_char, out: *mut f64) -> RbmtStatus {
    guard(|| {
        let (h, r) = sentence_pair(hyp, reference)?;
        check_out(out)?;
        *out = metrics::ter(&h, &r, TerOptions::default()).map_err(Failure::input)?;
        Ok(())
    })
}

/// Sentence chrF3 on [0, 100].
///
/// # Safety
/// Strings must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rbmt_sentence_chrf(hyp: *const c_char, reference: *const c_char, out: *mut f64) -> RbmtStatus {
    guard(|| {
        let (h, r) = sentence_pair(hyp, reference)?;
        check_out(out)?;
        *out = metrics::chrf(&h, &r, ChrfOptions::default());
        Ok(())
    })
}
