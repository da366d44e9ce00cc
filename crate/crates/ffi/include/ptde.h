#ifndef PTDE_H
#define PTDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum PtdeStatus {
  PTDE_STATUS_OK = 0,
  PTDE_STATUS_INVALID_ARGUMENT = 1,
  PTDE_STATUS_NULL_POINTER = 2,
  PTDE_STATUS_IO = 3,
  PTDE_STATUS_DIMENSION_MISMATCH = 4,
  PTDE_STATUS_CORRUPT_DATA = 5,
  PTDE_STATUS_UNSUPPORTED_VERSION = 6,
  PTDE_STATUS_EMPTY_INPUT = 7,
  PTDE_STATUS_DEGENERATE_LABELS = 8,
  PTDE_STATUS_INSUFFICIENT_DATA = 9,
  PTDE_STATUS_NON_FINITE_VALUE = 10,
  PTDE_STATUS_TRAINING_DIVERGED = 11,
  PTDE_STATUS_INTERNAL = 99,
} PtdeStatus;

// Feature fusion applied when loading a dataset.
typedef enum PtdeFusion {
  PTDE_FUSION_GLOBAL = 0,
  PTDE_FUSION_GLOBAL_LOCAL = 1,
} PtdeFusion;

// Segment embeddings of one manifest, loaded under one fusion mode.
typedef struct PtdeDataset PtdeDataset;

// Trained or freshly initialised scoring head.
typedef struct PtdeHead PtdeHead;

// Training hyperparameters. Obtain defaults from [`ptde_train_config_default`].
typedef struct PtdeTrainConfig {
  double learning_rate;
  uint64_t epochs;
  uint64_t pairs_per_epoch;
  double lambda1;
  double lambda2;
  uint64_t seed;
  double adagrad_epsilon;
} PtdeTrainConfig;

// Loss terms for one (positive, negative) bag pair.
typedef struct PtdeLossBreakdown {
  double hinge;
  double smoothness;
  double sparsity;
  double total;
} PtdeLossBreakdown;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *ptde_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ptde_version(void);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void ptde_string_free(char *s);

struct PtdeTrainConfig ptde_train_config_default(void);

// Creates a head with the default widths and seeded Glorot-uniform weights.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle pointer.
enum PtdeStatus ptde_head_init(size_t input_dim, uint64_t seed, struct PtdeHead **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum PtdeStatus ptde_head_load(const char *path, struct PtdeHead **out);

// # Safety
// `head` must be a live handle; `path` must be a NUL-terminated string.
enum PtdeStatus ptde_head_save(const struct PtdeHead *head, const char *path);

// Input dimension of the head, or 0 when `head` is null.
//
// # Safety
// `head` must be null or a live handle.
size_t ptde_head_input_dim(const struct PtdeHead *head);

// Fusion mode recorded with the head.
//
// # Safety
// `head` must be a live handle; `out` must be writable.
enum PtdeStatus ptde_head_fusion(const struct PtdeHead *head, enum PtdeFusion *out);

// Scores `n_segments` embeddings stored row-major in `embeddings`
// (`n_segments * dim` values) into `out_scores`.
//
// # Safety
// `embeddings` must hold `n_segments * dim` values and `out_scores`
// `n_segments` writable values.
enum PtdeStatus ptde_head_score(const struct PtdeHead *head,
                                const double *embeddings,
                                size_t n_segments,
                                size_t dim,
                                double *out_scores);

// # Safety
// `head` must be null or a handle not yet freed.
void ptde_head_free(struct PtdeHead *head);

// Loads the train and test splits of a manifest.
//
// # Safety
// `manifest_path` must be a NUL-terminated string; `out` must be writable.
enum PtdeStatus ptde_dataset_open(const char *manifest_path,
                                  uint32_t fusion,
                                  struct PtdeDataset **out);

// Number of videos in the train (`split == 0`) or test (`split == 1`) split.
//
// # Safety
// `dataset` must be null or a live handle.
size_t ptde_dataset_len(const struct PtdeDataset *dataset, uint32_t split);

// # Safety
// `dataset` must be null or a handle not yet freed.
void ptde_dataset_free(struct PtdeDataset *dataset);

// Trains a new head on the dataset's train split. When `history_out` is
// non-null it receives up to `history_capacity` per-epoch objective values;
// `history_len` (optional) receives the number written.
//
// # Safety
// `dataset` must be a live handle, `config` readable, `out` writable, and
// `history_out` null or valid for `history_capacity` writes.
enum PtdeStatus ptde_train(const struct PtdeDataset *dataset,
                           const struct PtdeTrainConfig *config,
                           struct PtdeHead **out,
                           double *history_out,
                           size_t history_capacity,
                           size_t *history_len);

// Evaluates `head` on the dataset's test split and returns the report as a
// JSON string (free with [`ptde_string_free`]). A negative or NaN
// `threshold` selects the default.
//
// # Safety
// Handles must be live; `out_json` must be writable.
enum PtdeStatus ptde_eval_json(const struct PtdeHead *head,
                               const struct PtdeDataset *dataset,
                               double threshold,
                               char **out_json);

// Area under the ROC curve; `labels` holds 0 (normal) or 1 (theft).
//
// # Safety
// `scores` and `labels` must hold `n` values; `out_auc` must be writable.
enum PtdeStatus ptde_auc(const double *scores, const uint8_t *labels, size_t n, double *out_auc);

// Ranking loss of one positive/negative bag pair of segment scores.
//
// # Safety
// `pos` and `neg` must hold `n_pos` and `n_neg` values; `out` must be writable.
enum PtdeStatus ptde_mil_ranking_loss(const double *pos,
                                      size_t n_pos,
                                      const double *neg,
                                      size_t n_neg,
                                      double lambda1,
                                      double lambda2,
                                      struct PtdeLossBreakdown *out);

// Writes a synthetic dataset with default shape and the given seed, feature
// dimension and separation into `out_dir`.
//
// # Safety
// `out_dir` must be a NUL-terminated string.
enum PtdeStatus ptde_synth(const char *out_dir,
                           uint64_t seed,
                           size_t feature_dim,
                           double separation);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PTDE_H */
