//! C ABI over `ccqa-core`.
//!
//! Every fallible function returns a [`CcqaStatus`]; on failure the message
//! is available from [`ccqa_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings returned
//! to the caller are released with [`ccqa_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ccqa_core::lm::{generate, sequence_score, Aggregation, Checkpoint, GenerateConfig};
use ccqa_core::metrics::{chrf, kendall_tau_b, rouge2, sentence_bleu4};
use ccqa_core::ranking::{listwise_nll, plackett_luce_prob};
use ccqa_core::retrieval::BankIndex;
use ccqa_core::scoring::{bias_scores_from_votes, content_score_from_raw, vote_scores_from_votes, ContentMode};
use ccqa_core::tokenize::{detokenize, tokenize};
use ccqa_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcqaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Domain = 5,
    Contract = 6,
    Config = 7,
    DigestMismatch = 8,
    Diverged = 9,
    Ingest = 10,
    Panic = 11,
}

/// Sequence-score reduction.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcqaAggregation {
    MeanLogProb = 0,
    SumLogProb = 1,
}

/// Content-score folding mode.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcqaContentMode {
    GeometricMean = 0,
    ExactProduct = 1,
}

/// Trained language model plus its vocabulary.
pub struct CcqaModel {
    inner: Checkpoint,
}

/// BM25 index over a question bank.
pub struct CcqaIndex {
    inner: BankIndex,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(CcqaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io(_) => CcqaStatus::Io,
            Error::Ingest(_) => CcqaStatus::Ingest,
            Error::Parse(_) => CcqaStatus::Parse,
            Error::Domain(_) => CcqaStatus::Domain,
            Error::Contract(_) => CcqaStatus::Contract,
            Error::Config(_) => CcqaStatus::Config,
            Error::DigestMismatch { .. } => CcqaStatus::DigestMismatch,
            Error::Diverged { .. } => CcqaStatus::Diverged,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: CcqaStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CcqaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CcqaStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CcqaStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(CcqaStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(CcqaStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(CcqaStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(CcqaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_slice<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return fail(CcqaStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ccqa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ccqa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ccqa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Bias scores for a pool of `n` answers. `has_accepted = false` means the
/// pool has no accepted answer.
///
/// # Safety
/// `votes` must point to `n` values and `out_scores` to room for `n` values.
#[no_mangle]
pub unsafe extern "C" fn ccqa_bias_scores(
    votes: *const i64,
    n: usize,
    has_accepted: bool,
    accepted_votes: i64,
    out_scores: *mut f64,
) -> CcqaStatus {
    guard(|| {
        let v = slice(votes, n, "votes")?;
        let dst = out_slice(out_scores, n, "out_scores")?;
        dst.copy_from_slice(&bias_scores_from_votes(v, has_accepted.then_some(accepted_votes)));
        Ok(())
    })
}

/// Min-max vote scores for a pool of `n` answers.
///
/// # Safety
/// `votes` must point to `n` values and `out_scores` to room for `n` values.
#[no_mangle]
pub unsafe extern "C" fn ccqa_vote_scores(votes: *const i64, n: usize, out_scores: *mut f64) -> CcqaStatus {
    guard(|| {
        let v = slice(votes, n, "votes")?;
        let dst = out_slice(out_scores, n, "out_scores")?;
        dst.copy_from_slice(&vote_scores_from_votes(v));
        Ok(())
    })
}

/// Folds `n` raw per-token scores into a content score.
///
/// # Safety
/// `raw` must point to `n` values; `out_score` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ccqa_content_score(
    raw: *const f64,
    n: usize,
    mode: CcqaContentMode,
    out_score: *mut f64,
) -> CcqaStatus {
    guard(|| {
        let r = slice(raw, n, "raw")?;
        let mode = match mode {
            CcqaContentMode::GeometricMean => ContentMode::GeometricMean,
            CcqaContentMode::ExactProduct => ContentMode::ExactProduct,
        };
        *out(out_score, "out_score")? = content_score_from_raw(r, mode)?;
        Ok(())
    })
}

/// Listwise loss of `n` scores given best-first. `out_grad` may be null;
/// otherwise it receives `n` partial derivatives.
///
/// # Safety
/// `scores` must point to `n` values, `out_loss` must be valid for writes and
/// `out_grad` must be null or have room for `n` values.
#[no_mangle]
pub unsafe extern "C" fn ccqa_listwise_loss(
    scores: *const f64,
    n: usize,
    out_loss: *mut f64,
    out_grad: *mut f64,
) -> CcqaStatus {
    guard(|| {
        let s = slice(scores, n, "scores")?;
        let (loss, grad) = listwise_nll(s)?;
        *out(out_loss, "out_loss")? = loss;
        if !out_grad.is_null() {
            out_slice(out_grad, n, "out_grad")?.copy_from_slice(&grad);
        }
        Ok(())
    })
}

/// Probability of the given best-first order under the Plackett-Luce model.
///
/// # Safety
/// `scores` must point to `n` values; `out_prob` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ccqa_order_probability(scores: *const f64, n: usize, out_prob: *mut f64) -> CcqaStatus {
    guard(|| {
        let s = slice(scores, n, "scores")?;
        *out(out_prob, "out_prob")? = plackett_luce_prob(s)?.prob;
        Ok(())
    })
}

/// Sentence BLEU-4 of `hypothesis` against `reference`, in [0, 1].
///
/// # Safety
/// Both strings must be valid NUL-terminated UTF-8; `out_score` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ccqa_bleu4(
    reference: *const c_char,
    hypothesis: *const c_char,
    out_score: *mut f64,
) -> CcqaStatus {
    guard(|| {
        let r = tokenize(text(reference, "reference")?);
        let h = tokenize(text(hypothesis, "hypothesis")?);
        *out(out_score, "out_score")? = sentence_bleu4(&r, &h);
        Ok(())
    })
}

/// ROUGE-2 precision, recall and F1.
///
/// # Safety
/// Both strings must be valid NUL-terminated UTF-8; the three outputs must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ccqa_rouge2(
    reference: *const c_char,
    hypothesis: *const c_char,
    out_precision: *mut f64,
    out_recall: *mut f64,
    out_f1: *mut f64,
) -> CcqaStatus {
    guard(|| {
        let r = tokenize(text(reference, "reference")?);
        let h = tokenize(text(hypothesis, "hypothesis")?);
        let prf = rouge2(&r, &h);
        *out(out_precision, "out_precision")? = prf.precision;
        *out(out_recall, "out_recall")? = prf.recall;
        *out(out_f1, "out_f1")? = prf.f1;
        Ok(())
    })
}

/// Character n-gram F-score, in [0, 100].
///
/// # Safety
/// Both strings must be valid NUL-terminated UTF-8; `out_score` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ccqa_chrf(
    reference: *const c_char,
    hypothesis: *const c_char,
    out_score: *mut f64,
) -> CcqaStatus {
    guard(|| {
        let r = text(reference, "reference")?;
        let h = text(hypothesis, "hypothesis")?;
        *out(out_score, "out_score")? = chrf(r, h);
        Ok(())
    })
}

/// Kendall tau-b of two length-`n` samples. `out_defined` is set to false
/// (and `out_tau` to 0) when either sample is constant.
///
/// # Safety
/// `x` and `y` must point to `n` values; both outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ccqa_kendall_tau_b(
    x: *const f64,
    y: *const f64,
    n: usize,
    out_tau: *mut f64,
    out_defined: *mut bool,
) -> CcqaStatus {
    guard(|| {
        let tau = kendall_tau_b(slice(x, n, "x")?, slice(y, n, "y")?)?;
        *out(out_tau, "out_tau")? = tau.unwrap_or(0.0);
        *out(out_defined, "out_defined")? = tau.is_some();
        Ok(())
    })
}

/// Loads a model checkpoint.
///
/// # Safety
/// `path` must be valid NUL-terminated UTF-8; `out_model` must be valid for
/// writes. On success the caller owns `*out_model`.
#[no_mangle]
pub unsafe extern "C" fn ccqa_model_load(path: *const c_char, out_model: *mut *mut CcqaModel) -> CcqaStatus {
    guard(|| {
        let p = text(path, "path")?;
        let slot = out(out_model, "out_model")?;
        let inner = Checkpoint::load(Path::new(p))?;
        *slot = Box::into_raw(Box::new(CcqaModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`ccqa_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ccqa_model_free(model: *mut CcqaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Vocabulary size of a loaded model, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccqa_model_vocab_size(model: *const CcqaModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.vocab.len())
}

/// Aggregated log-probability of `answer` as a continuation of `prompt`.
///
/// # Safety
/// `model` must be a live handle, both strings valid NUL-terminated UTF-8 and
/// `out_score` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ccqa_model_score(
    model: *const CcqaModel,
    prompt: *const c_char,
    answer: *const c_char,
    aggregation: CcqaAggregation,
    out_score: *mut f64,
) -> CcqaStatus {
    guard(|| {
        let m = &model
            .as_ref()
            .ok_or_else(|| Failure(CcqaStatus::NullPointer, "model is null".into()))?
            .inner;
        let prompt = m.vocab.encode(&tokenize(text(prompt, "prompt")?));
        let answer = m.vocab.encode(&tokenize(text(answer, "answer")?));
        let mode = match aggregation {
            CcqaAggregation::MeanLogProb => Aggregation::MeanLogProb,
            CcqaAggregation::SumLogProb => Aggregation::SumLogProb,
        };
        *out(out_score, "out_score")? = sequence_score(&m.params, &prompt, &answer, mode)?.aggregate;
        Ok(())
    })
}

/// Samples a continuation of `prompt`. The result is written to `*out_text`
/// and must be released with [`ccqa_string_free`].
///
/// # Safety
/// `model` must be a live handle, `prompt` valid NUL-terminated UTF-8 and
/// `out_text` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ccqa_model_generate(
    model: *const CcqaModel,
    prompt: *const c_char,
    max_len: usize,
    temperature: f64,
    top_p: f64,
    seed: u64,
    out_text: *mut *mut c_char,
) -> CcqaStatus {
    guard(|| {
        let m = &model
            .as_ref()
            .ok_or_else(|| Failure(CcqaStatus::NullPointer, "model is null".into()))?
            .inner;
        let slot = out(out_text, "out_text")?;
        let ids = m.vocab.encode(&tokenize(text(prompt, "prompt")?));
        let cfg = GenerateConfig {
            max_len,
            temperature,
            top_p,
            seed,
        };
        let gen = generate(&m.params, &ids, &cfg)?;
        *slot = into_c_string(detokenize(&m.vocab.decode(&gen)));
        Ok(())
    })
}

/// Loads a retrieval index written by `ccqa retrieve-index`.
///
/// # Safety
/// `path` must be valid NUL-terminated UTF-8; `out_index` must be valid for
/// writes. On success the caller owns `*out_index`.
#[no_mangle]
pub unsafe extern "C" fn ccqa_index_load(path: *const c_char, out_index: *mut *mut CcqaIndex) -> CcqaStatus {
    guard(|| {
        let p = text(path, "path")?;
        let slot = out(out_index, "out_index")?;
        let inner = BankIndex::load(Path::new(p))?;
        *slot = Box::into_raw(Box::new(CcqaIndex { inner }));
        Ok(())
    })
}

/// # Safety
/// `index` must be null or a handle from [`ccqa_index_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ccqa_index_free(index: *mut CcqaIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Number of indexed documents, or 0 for a null handle.
///
/// # Safety
/// `index` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccqa_index_len(index: *const CcqaIndex) -> usize {
    index.as_ref().map_or(0, |i| i.inner.len())
}

/// Top-`k` BM25 hits for `query`, best first. When `has_exclude` is true the
/// question `exclude_id` is never returned. Writes up to `k` hits into the
/// two output arrays and the hit count into `*out_count`.
///
/// # Safety
/// `index` must be a live handle, `query` valid NUL-terminated UTF-8, the two
/// arrays must have room for `k` values and `out_count` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn ccqa_index_search(
    index: *const CcqaIndex,
    query: *const c_char,
    k: usize,
    has_exclude: bool,
    exclude_id: u64,
    out_ids: *mut u64,
    out_scores: *mut f64,
    out_count: *mut usize,
) -> CcqaStatus {
    guard(|| {
        let idx = &index
            .as_ref()
            .ok_or_else(|| Failure(CcqaStatus::NullPointer, "index is null".into()))?
            .inner;
        let q = text(query, "query")?;
        let hits = idx.retrieve(q, k, has_exclude.then_some(exclude_id))?;
        let ids = out_slice(out_ids, k, "out_ids")?;
        let scores = out_slice(out_scores, k, "out_scores")?;
        let count = out(out_count, "out_count")?;
        for (i, h) in hits.iter().enumerate() {
            ids[i] = h.question_id;
            scores[i] = h.score;
        }
        *count = hits.len();
        Ok(())
    })
}
