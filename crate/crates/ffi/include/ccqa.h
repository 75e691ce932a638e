#ifndef CCQA_H
#define CCQA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CcqaStatus {
  CCQA_STATUS_OK = 0,
  CCQA_STATUS_NULL_POINTER = 1,
  CCQA_STATUS_INVALID_UTF8 = 2,
  CCQA_STATUS_IO = 3,
  CCQA_STATUS_PARSE = 4,
  CCQA_STATUS_DOMAIN = 5,
  CCQA_STATUS_CONTRACT = 6,
  CCQA_STATUS_CONFIG = 7,
  CCQA_STATUS_DIGEST_MISMATCH = 8,
  CCQA_STATUS_DIVERGED = 9,
  CCQA_STATUS_INGEST = 10,
  CCQA_STATUS_PANIC = 11,
} CcqaStatus;

// Content-score folding mode.
typedef enum CcqaContentMode {
  CCQA_CONTENT_MODE_GEOMETRIC_MEAN = 0,
  CCQA_CONTENT_MODE_EXACT_PRODUCT = 1,
} CcqaContentMode;

// Sequence-score reduction.
typedef enum CcqaAggregation {
  CCQA_AGGREGATION_MEAN_LOG_PROB = 0,
  CCQA_AGGREGATION_SUM_LOG_PROB = 1,
} CcqaAggregation;

// BM25 index over a question bank.
typedef struct CcqaIndex CcqaIndex;

// Trained language model plus its vocabulary.
typedef struct CcqaModel CcqaModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *ccqa_last_error(void);

// Library version as a static NUL-terminated string.
const char *ccqa_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a pointer returned by this library and not yet freed.
void ccqa_string_free(char *s);

// Bias scores for a pool of `n` answers. `has_accepted = false` means the
// pool has no accepted answer.
//
// # Safety
// `votes` must point to `n` values and `out_scores` to room for `n` values.
enum CcqaStatus ccqa_bias_scores(const int64_t *votes,
                                 size_t n,
                                 bool has_accepted,
                                 int64_t accepted_votes,
                                 double *out_scores);

// Min-max vote scores for a pool of `n` answers.
//
// # Safety
// `votes` must point to `n` values and `out_scores` to room for `n` values.
enum CcqaStatus ccqa_vote_scores(const int64_t *votes, size_t n, double *out_scores);

// Folds `n` raw per-token scores into a content score.
//
// # Safety
// `raw` must point to `n` values; `out_score` must be valid for writes.
enum CcqaStatus ccqa_content_score(const double *raw,
                                   size_t n,
                                   enum CcqaContentMode mode,
                                   double *out_score);

// Listwise loss of `n` scores given best-first. `out_grad` may be null;
// otherwise it receives `n` partial derivatives.
//
// # Safety
// `scores` must point to `n` values, `out_loss` must be valid for writes and
// `out_grad` must be null or have room for `n` values.
enum CcqaStatus ccqa_listwise_loss(const double *scores,
                                   size_t n,
                                   double *out_loss,
                                   double *out_grad);

// Probability of the given best-first order under the Plackett-Luce model.
//
// # Safety
// `scores` must point to `n` values; `out_prob` must be valid for writes.
enum CcqaStatus ccqa_order_probability(const double *scores, size_t n, double *out_prob);

// Sentence BLEU-4 of `hypothesis` against `reference`, in [0, 1].
//
// # Safety
// Both strings must be valid NUL-terminated UTF-8; `out_score` must be
// valid for writes.
enum CcqaStatus ccqa_bleu4(const char *reference, const char *hypothesis, double *out_score);

// ROUGE-2 precision, recall and F1.
//
// # Safety
// Both strings must be valid NUL-terminated UTF-8; the three outputs must be
// valid for writes.
enum CcqaStatus ccqa_rouge2(const char *reference,
                            const char *hypothesis,
                            double *out_precision,
                            double *out_recall,
                            double *out_f1);

// Character n-gram F-score, in [0, 100].
//
// # Safety
// Both strings must be valid NUL-terminated UTF-8; `out_score` must be
// valid for writes.
enum CcqaStatus ccqa_chrf(const char *reference, const char *hypothesis, double *out_score);

// Kendall tau-b of two length-`n` samples. `out_defined` is set to false
// (and `out_tau` to 0) when either sample is constant.
//
// # Safety
// `x` and `y` must point to `n` values; both outputs must be valid for writes.
enum CcqaStatus ccqa_kendall_tau_b(const double *x,
                                   const double *y,
                                   size_t n,
                                   double *out_tau,
                                   bool *out_defined);

// Loads a model checkpoint.
//
// # Safety
// `path` must be valid NUL-terminated UTF-8; `out_model` must be valid for
// writes. On success the caller owns `*out_model`.
enum CcqaStatus ccqa_model_load(const char *path, struct CcqaModel **out_model);

// # Safety
// `model` must be null or a handle from [`ccqa_model_load`] not yet freed.
void ccqa_model_free(struct CcqaModel *model);

// Vocabulary size of a loaded model, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t ccqa_model_vocab_size(const struct CcqaModel *model);

// Aggregated log-probability of `answer` as a continuation of `prompt`.
//
// # Safety
// `model` must be a live handle, both strings valid NUL-terminated UTF-8 and
// `out_score` valid for writes.
enum CcqaStatus ccqa_model_score(const struct CcqaModel *model,
                                 const char *prompt,
                                 const char *answer,
                                 enum CcqaAggregation aggregation,
                                 double *out_score);

// Samples a continuation of `prompt`. The result is written to `*out_text`
// and must be released with [`ccqa_string_free`].
//
// # Safety
// `model` must be a live handle, `prompt` valid NUL-terminated UTF-8 and
// `out_text` valid for writes.
enum CcqaStatus ccqa_model_generate(const struct CcqaModel *model,
                                    const char *prompt,
                                    size_t max_len,
                                    double temperature,
                                    double top_p,
                                    uint64_t seed,
                                    char **out_text);

// Loads a retrieval index written by `ccqa retrieve-index`.
//
// # Safety
// `path` must be valid NUL-terminated UTF-8; `out_index` must be valid for
// writes. On success the caller owns `*out_index`.
enum CcqaStatus ccqa_index_load(const char *path, struct CcqaIndex **out_index);

// # Safety
// `index` must be null or a handle from [`ccqa_index_load`] not yet freed.
void ccqa_index_free(struct CcqaIndex *index);

// Number of indexed documents, or 0 for a null handle.
//
// # Safety
// `index` must be null or a live handle.
size_t ccqa_index_len(const struct CcqaIndex *index);

// Top-`k` BM25 hits for `query`, best first. When `has_exclude` is true the
// question `exclude_id` is never returned. Writes up to `k` hits into the
// two output arrays and the hit count into `*out_count`.
//
// # Safety
// `index` must be a live handle, `query` valid NUL-terminated UTF-8, the two
// arrays must have room for `k` values and `out_count` must be valid for
// writes.
enum CcqaStatus ccqa_index_search(const struct CcqaIndex *index,
                                  const char *query,
                                  size_t k,
                                  bool has_exclude,
                                  uint64_t exclude_id,
                                  uint64_t *out_ids,
                                  double *out_scores,
                                  size_t *out_count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CCQA_H */
