/* C interface to the selgap selective-classification evaluation library. */

#ifndef SELGAP_H
#define SELGAP_H

/* Generated by cbindgen from the selgap-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Score function selector for evaluation and decomposition.
 */
typedef enum SelgapScoreKind {
  /**
   * Maximum softmax probability.
   */
  SELGAP_SCORE_MSP = 0,
  /**
   * 1 - SEP (numerically equal to MSP, the loss-prediction baseline).
   */
  SELGAP_SCORE_NEG_SELF_ENTROPY = 1,
  /**
   * The true correctness posterior; needs an oracle.
   */
  SELGAP_SCORE_ORACLE_ETA_H = 2,
} SelgapScoreKind;

/**
 * The affine benchmark shifts.
 */
typedef enum SelgapShiftKind {
  SELGAP_SHIFT_IDENTITY = 0,
  SELGAP_SHIFT_SHEAR = 1,
  SELGAP_SHIFT_ROTATION = 2,
  SELGAP_SHIFT_TRANSLATION = 3,
} SelgapShiftKind;

/**
 * Status codes returned by every fallible call.
 */
typedef enum SelgapStatus {
  SELGAP_OK = 0,
  SELGAP_NULL_POINTER = 1,
  SELGAP_INVALID_ARGUMENT = 2,
  SELGAP_RUNTIME_ERROR = 3,
  SELGAP_UTF8_ERROR = 4,
  SELGAP_PANIC = 5,
} SelgapStatus;

/**
 * A fitted score-level calibrator (isotonic or histogram).
 */
typedef struct SelgapCalibrator SelgapCalibrator;

/**
 * Labeled feature rows with optional ground-truth posteriors.
 */
typedef struct SelgapDataset SelgapDataset;

/**
 * Per-coverage decomposition rows with bound verdicts.
 */
typedef struct SelgapDecomposition SelgapDecomposition;

/**
 * Accuracy-coverage curve plus its gap to the perfect-ordering frontier.
 */
typedef struct SelgapEvaluation SelgapEvaluation;

/**
 * A trained classifier.
 */
typedef struct SelgapModel SelgapModel;

/**
 * Ground-truth class posterior for a synthetic distribution.
 */
typedef struct SelgapOracle SelgapOracle;

/**
 * One decomposition row.
 */
typedef struct SelgapDecompositionRow {
  double coverage;
  double gap;
  double eps_bayes;
  double eps_approx;
  double eps_rank;
  double d_rank;
  double eps_stat;
  double bound_rhs;
  bool holds;
} SelgapDecompositionRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *selgap_last_error(void);

/**
 * Draw `n` two-moons samples with the given jitter.
 *
 * # Safety
 * `out` must be a valid pointer; the handle must be released with
 * [`selgap_dataset_free`].
 */
enum SelgapStatus selgap_dataset_two_moons(double noise_sigma,
                                           uintptr_t n,
                                           uint64_t seed,
                                           struct SelgapDataset **out);

/**
 * Draw `n` samples from a binary 2-D Gaussian mixture (shared covariance,
 * row-major 2x2). The true posterior is attached to every row.
 *
 * # Safety
 * `mean0`/`mean1` point to 2 doubles, `covariance` to 4; `out` as above.
 */
enum SelgapStatus selgap_dataset_gaussian_binary(const double *mean0,
                                                 const double *mean1,
                                                 const double *covariance,
                                                 double class_prior,
                                                 uintptr_t n,
                                                 uint64_t seed,
                                                 struct SelgapDataset **out);

/**
 * Read a dataset from the documented CSV layout
 * (`x0,..,label[,eta0,..]`).
 *
 * # Safety
 * `path` is a NUL-terminated UTF-8 string; `out` as above.
 */
enum SelgapStatus selgap_dataset_read_csv(const char *path, struct SelgapDataset **out);

/**
 * # Safety
 * `dataset` must be a live handle; `path` a NUL-terminated string.
 */
enum SelgapStatus selgap_dataset_write_csv(const struct SelgapDataset *dataset, const char *path);

/**
 * Sample count (0 for a null handle).
 *
 * # Safety
 * `dataset` must be a live handle or null.
 */
uintptr_t selgap_dataset_len(const struct SelgapDataset *dataset);

/**
 * Feature dimension (0 for a null handle).
 *
 * # Safety
 * `dataset` must be a live handle or null.
 */
uintptr_t selgap_dataset_dim(const struct SelgapDataset *dataset);

/**
 * Class count (0 for a null handle).
 *
 * # Safety
 * `dataset` must be a live handle or null.
 */
uintptr_t selgap_dataset_num_classes(const struct SelgapDataset *dataset);

/**
 * Apply one of the standard shifts to every feature row (labels kept, any
 * stored posterior dropped).
 *
 * # Safety
 * `dataset` must be a live handle; `out` as above.
 */
enum SelgapStatus selgap_dataset_shift(const struct SelgapDataset *dataset,
                                       enum SelgapShiftKind kind,
                                       struct SelgapDataset **out);

/**
 * Unbiased RBF-kernel MMD between the feature distributions of two
 * datasets. `bandwidth <= 0` selects the median-distance heuristic.
 *
 * # Safety
 * `a`, `b` must be live handles; `out` a valid pointer.
 */
enum SelgapStatus selgap_mmd_rbf(const struct SelgapDataset *a,
                                 const struct SelgapDataset *b,
                                 double bandwidth,
                                 double *out);

/**
 * # Safety
 * `dataset` must come from this library and not be freed twice.
 */
void selgap_dataset_free(struct SelgapDataset *dataset);

/**
 * Analytic oracle for the binary Gaussian mixture.
 *
 * # Safety
 * Pointer contracts as in [`selgap_dataset_gaussian_binary`].
 */
enum SelgapStatus selgap_oracle_gaussian_binary(const double *mean0,
                                                const double *mean1,
                                                const double *covariance,
                                                double class_prior,
                                                struct SelgapOracle **out);

/**
 * Grid-estimated two-moons oracle: kernel averages over `mc_samples`
 * noiseless arc points, tabulated on an `n_grid` x `n_grid` grid covering
 * the dataset's bounding box. Needs `noise_sigma > 0`.
 *
 * # Safety
 * `data` must be a live handle; `out` as above.
 */
enum SelgapStatus selgap_oracle_two_moons(const struct SelgapDataset *data,
                                          double noise_sigma,
                                          uintptr_t n_grid,
                                          uintptr_t mc_samples,
                                          uint64_t seed,
                                          struct SelgapOracle **out);

/**
 * Class posterior at a feature vector; `posterior_out` receives
 * `num_classes` probabilities.
 *
 * # Safety
 * `x` points to `dim` doubles, `posterior_out` to `posterior_len` doubles.
 */
enum SelgapStatus selgap_oracle_posterior(const struct SelgapOracle *oracle,
                                          const double *x,
                                          uintptr_t dim,
                                          double *posterior_out,
                                          uintptr_t posterior_len);

/**
 * # Safety
 * `oracle` must come from this library and not be freed twice.
 */
void selgap_oracle_free(struct SelgapOracle *oracle);

/**
 * Train a classifier with minibatch SGD (momentum + weight decay) on mean
 * cross-entropy. `hidden_len == 0` trains multinomial logistic regression;
 * otherwise `hidden` lists the ReLU layer widths. Deterministic in `seed`.
 *
 * # Safety
 * `train_data` must be a live handle; `hidden` points to `hidden_len`
 * entries (may be null when `hidden_len == 0`); `out` as above.
 */
enum SelgapStatus selgap_train_model(const struct SelgapDataset *train_data,
                                     const uintptr_t *hidden,
                                     uintptr_t hidden_len,
                                     uintptr_t num_classes,
                                     double learning_rate,
                                     uintptr_t epochs,
                                     uintptr_t batch_size,
                                     double weight_decay,
                                     double momentum,
                                     uint64_t seed,
                                     struct SelgapModel **out);

/**
 * Load a model from the versioned text format.
 *
 * # Safety
 * `path` is a NUL-terminated UTF-8 string; `out` as above.
 */
enum SelgapStatus selgap_model_read(const char *path, struct SelgapModel **out);

/**
 * # Safety
 * `model` must be a live handle; `path` a NUL-terminated string.
 */
enum SelgapStatus selgap_model_write(const struct SelgapModel *model, const char *path);

/**
 * Softmax class probabilities at one input.
 *
 * # Safety
 * `x` points to `dim` doubles, `proba_out` to `proba_len` doubles.
 */
enum SelgapStatus selgap_model_predict_proba(const struct SelgapModel *model,
                                             const double *x,
                                             uintptr_t dim,
                                             double *proba_out,
                                             uintptr_t proba_len);

/**
 * Plain accuracy of the model on a dataset.
 *
 * # Safety
 * `model` and `data` must be live handles; `out` a valid pointer.
 */
enum SelgapStatus selgap_model_accuracy(const struct SelgapModel *model,
                                        const struct SelgapDataset *data,
                                        double *out);

/**
 * # Safety
 * `model` must come from this library and not be freed twice.
 */
void selgap_model_free(struct SelgapModel *model);

/**
 * Score a dataset with the model and build the empirical accuracy-coverage
 * curve and its gap curve. `oracle` may be null unless the score kind
 * requires it.
 *
 * # Safety
 * `model` and `data` must be live handles; `oracle` live or null; `out` as
 * above.
 */
enum SelgapStatus selgap_evaluate(const struct SelgapModel *model,
                                  const struct SelgapDataset *data,
                                  enum SelgapScoreKind score,
                                  const struct SelgapOracle *oracle,
                                  struct SelgapEvaluation **out);

/**
 * Full-coverage accuracy (NaN for a null handle).
 *
 * # Safety
 * `eval` must be a live handle or null.
 */
double selgap_evaluation_a_full(const struct SelgapEvaluation *eval);

/**
 * Area under the risk-coverage curve (NaN for a null handle).
 *
 * # Safety
 * `eval` must be a live handle or null.
 */
double selgap_evaluation_aurc(const struct SelgapEvaluation *eval);

/**
 * Area between the curve and the oracle frontier (NaN for a null handle).
 *
 * # Safety
 * `eval` must be a live handle or null.
 */
double selgap_evaluation_e_aurc(const struct SelgapEvaluation *eval);

/**
 * Number of curve points (the sample count).
 *
 * # Safety
 * `eval` must be a live handle or null.
 */
uintptr_t selgap_evaluation_len(const struct SelgapEvaluation *eval);

/**
 * Read curve point `index` (coverage, realized accuracy, oracle accuracy,
 * gap). Null output pointers are skipped.
 *
 * # Safety
 * `eval` must be a live handle; out-pointers valid or null.
 */
enum SelgapStatus selgap_evaluation_point(const struct SelgapEvaluation *eval,
                                          uintptr_t index,
                                          double *coverage,
                                          double *accuracy,
                                          double *oracle_accuracy,
                                          double *gap);

/**
 * Write `coverage,accuracy,threshold` rows (with the `aurc` footer).
 *
 * # Safety
 * `eval` must be a live handle; `path` a NUL-terminated string.
 */
enum SelgapStatus selgap_evaluation_write_curve_csv(const struct SelgapEvaluation *eval,
                                                    const char *path);

/**
 * Write `coverage,oracle,realized,gap` rows (with the `e_aurc` footer).
 *
 * # Safety
 * `eval` must be a live handle; `path` a NUL-terminated string.
 */
enum SelgapStatus selgap_evaluation_write_gap_csv(const struct SelgapEvaluation *eval,
                                                  const char *path);

/**
 * # Safety
 * `eval` must come from this library and not be freed twice.
 */
void selgap_evaluation_free(struct SelgapEvaluation *eval);

/**
 * Decompose the selective-classification gap of (model, score) on
 * oracle-equipped data over a coverage grid in (0, 1].
 *
 * # Safety
 * Handles must be live; `coverage_grid` points to `grid_len` doubles;
 * `out` as above.
 */
enum SelgapStatus selgap_decompose(const struct SelgapModel *model,
                                   const struct SelgapDataset *data,
                                   const struct SelgapOracle *oracle,
                                   enum SelgapScoreKind score,
                                   const double *coverage_grid,
                                   uintptr_t grid_len,
                                   double delta,
                                   struct SelgapDecomposition **out);

/**
 * Number of rows.
 *
 * # Safety
 * `dec` must be a live handle or null.
 */
uintptr_t selgap_decomposition_len(const struct SelgapDecomposition *dec);

/**
 * Copy row `index` into `row_out`.
 *
 * # Safety
 * `dec` must be a live handle; `row_out` a valid pointer.
 */
enum SelgapStatus selgap_decomposition_row(const struct SelgapDecomposition *dec,
                                           uintptr_t index,
                                           struct SelgapDecompositionRow *row_out);

/**
 * Fraction of rows whose bound verdict is true (NaN for a null handle).
 *
 * # Safety
 * `dec` must be a live handle or null.
 */
double selgap_decomposition_holds_fraction(const struct SelgapDecomposition *dec);

/**
 * Write the documented decomposition CSV.
 *
 * # Safety
 * `dec` must be a live handle; `path` a NUL-terminated string.
 */
enum SelgapStatus selgap_decomposition_write_csv(const struct SelgapDecomposition *dec,
                                                 const char *path);

/**
 * # Safety
 * `dec` must come from this library and not be freed twice.
 */
void selgap_decomposition_free(struct SelgapDecomposition *dec);

/**
 * Perfect-ordering bound at coverage `c` for full-coverage accuracy
 * `a_full`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SelgapStatus selgap_oracle_bound(double a_full, double c, double *out);

/**
 * Finite-sample slack 3 sqrt(log(6/delta) / (2n)).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SelgapStatus selgap_stat_slack(uintptr_t n, double delta, double *out);

/**
 * Fit the softmax temperature on row-major `n x k` validation logits by
 * golden-section search on the mean negative log-likelihood.
 * `t_lo`/`t_hi <= 0` selects the default range.
 *
 * # Safety
 * `logits` points to `n * k` doubles, `labels` to `n` entries; out-pointers
 * valid or null (skipped).
 */
enum SelgapStatus selgap_fit_temperature(const double *logits,
                                         uintptr_t n,
                                         uintptr_t k,
                                         const uintptr_t *labels,
                                         double t_lo,
                                         double t_hi,
                                         double *t_out,
                                         bool *clamped_out,
                                         bool *degenerate_out);

/**
 * Max tempered-softmax probability of one logit vector at temperature `t`.
 *
 * # Safety
 * `logits` points to `k` doubles; `out` valid.
 */
enum SelgapStatus selgap_tempered_msp(const double *logits, uintptr_t k, double t, double *out);

/**
 * Expected calibration error over `n_bins` equal-width right-closed bins.
 * `correct` holds 0/1 bytes.
 *
 * # Safety
 * `confidences` and `correct` point to `n` entries; `out` valid.
 */
enum SelgapStatus selgap_ece(const double *confidences,
                             const uint8_t *correct,
                             uintptr_t n,
                             uintptr_t n_bins,
                             double *out);

/**
 * Pool-adjacent-violators fit of correctness against scores.
 *
 * # Safety
 * `scores` and `correct` point to `n` entries; `out` as above.
 */
enum SelgapStatus selgap_fit_isotonic(const double *scores,
                                      const uint8_t *correct,
                                      uintptr_t n,
                                      struct SelgapCalibrator **out);

/**
 * Equal-width histogram-binning fit of correctness against scores.
 *
 * # Safety
 * As in [`selgap_fit_isotonic`].
 */
enum SelgapStatus selgap_fit_histogram(const double *scores,
                                       const uint8_t *correct,
                                       uintptr_t n,
                                       uintptr_t n_bins,
                                       struct SelgapCalibrator **out);

/**
 * Apply a fitted score-level calibrator to one score.
 *
 * # Safety
 * `cal` must be a live handle; `out` valid.
 */
enum SelgapStatus selgap_calibrator_apply(const struct SelgapCalibrator *cal,
                                          double score,
                                          double *out);

/**
 * # Safety
 * `cal` must come from this library and not be freed twice.
 */
void selgap_calibrator_free(struct SelgapCalibrator *cal);

/**
 * Self-entropy predictor 1 - max_j p_j of one probability vector.
 *
 * # Safety
 * `probabilities` points to `k` doubles; `out` valid.
 */
enum SelgapStatus selgap_sep(const double *probabilities, uintptr_t k, double *out);

/**
 * Squared-error advantage of a loss predictor over a baseline on 0/1
 * losses.
 *
 * # Safety
 * All arrays point to `n` doubles; `out` valid.
 */
enum SelgapStatus selgap_advantage(const double *lp_values,
                                   const double *sep_values,
                                   const double *losses,
                                   uintptr_t n,
                                   double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SELGAP_H */
