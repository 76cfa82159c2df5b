//! C ABI for the selective-classification evaluation library.
//!
//! Conventions: every constructor returns a status code and writes an opaque
//! handle through an out-pointer; handles are freed with the matching
//! `*_free` function; on any non-OK status a thread-local message is
//! available from [`selgap_last_error`]. No call unwinds across the
//! boundary.

use selgap::calibration::{ece, fit_histogram, fit_isotonic, fit_temperature, tempered_msp, Calibrator};
use selgap::curves::{aurc, empirical_curve, gap_curve, oracle_bound, stat_slack, CoverageCurve, GapCurve};
use selgap::decomposition::{decompose, GapDecomposition};
use selgap::losspred::{advantage, sep};
use selgap::models::{dataset_accuracy, train, ModelSpec, TrainConfig, TrainedModel};
use selgap::scoring::{Predictor, ScoreFunction, SelectivePair};
use selgap::synthdata::{
    apply_shift, estimate_posterior_grid, mmd_rbf, sample_gaussian_task, sample_two_moons,
    Bandwidth, GaussianMixtureTask, LabeledDataset, PosteriorOracle, ShiftTransform, TwoMoonsTask,
};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelgapStatus {
    SelgapOk = 0,
    SelgapNullPointer = 1,
    SelgapInvalidArgument = 2,
    SelgapRuntimeError = 3,
    SelgapUtf8Error = 4,
    SelgapPanic = 5,
}

use SelgapStatus::*;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(err: &selgap::Error) -> SelgapStatus {
    set_error(&err.to_string());
    match err {
        selgap::Error::InvalidParameter { .. }
        | selgap::Error::DimensionMismatch { .. }
        | selgap::Error::EmptySelection(_)
        | selgap::Error::Config(_) => SelgapInvalidArgument,
        _ => SelgapRuntimeError,
    }
}

fn null_arg(name: &str) -> SelgapStatus {
    set_error(&format!("null pointer: {name}"));
    SelgapNullPointer
}

fn boundary(f: impl FnOnce() -> SelgapStatus) -> SelgapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            SelgapPanic
        }
    }
}

unsafe fn path_from(ptr: *const c_char) -> Result<PathBuf, SelgapStatus> {
    if ptr.is_null() {
        return Err(null_arg("path"));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(SelgapUtf8Error)
        }
    }
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> SelgapStatus {
    if out.is_null() {
        return null_arg("out");
    }
    *out = Box::into_raw(Box::new(value));
    SelgapOk
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn selgap_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

/// Labeled feature rows with optional ground-truth posteriors.
pub struct SelgapDataset(LabeledDataset);

/// Draw `n` two-moons samples with the given jitter.
///
/// # Safety
/// `out` must be a valid pointer; the handle must be released with
/// [`selgap_dataset_free`].
#[no_mangle]
pub unsafe extern "C" fn selgap_dataset_two_moons(
    noise_sigma: f64,
    n: usize,
    seed: u64,
    out: *mut *mut SelgapDataset,
) -> SelgapStatus {
    boundary(|| {
        let task = match TwoMoonsTask::new(noise_sigma, 64) {
            Ok(t) => t,
            Err(e) => return fail(&e),
        };
        match sample_two_moons(&task, n, seed) {
            Ok(data) => emit(out, SelgapDataset(data)),
            Err(e) => fail(&e),
        }
    })
}

unsafe fn gaussian_binary_task(
    mean0: *const f64,
    mean1: *const f64,
    covariance: *const f64,
    class_prior: f64,
) -> Result<GaussianMixtureTask, SelgapStatus> {
    if mean0.is_null() || mean1.is_null() || covariance.is_null() {
        return Err(null_arg("means/covariance"));
    }
    let m0 = [*mean0, *mean0.add(1)];
    let m1 = [*mean1, *mean1.add(1)];
    let cov = [[*covariance, *covariance.add(1)], [*covariance.add(2), *covariance.add(3)]];
    GaussianMixtureTask::binary(m0, m1, cov, class_prior).map_err(|e| fail(&e))
}

/// Draw `n` samples from a binary 2-D Gaussian mixture (shared covariance,
/// row-major 2x2). The true posterior is attached to every row.
///
/// # Safety
/// `mean0`/`mean1` point to 2 doubles, `covariance` to 4; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn selgap_dataset_gaussian_binary(
    mean0: *const f64,
    mean1: *const f64,
    covariance: *const f64,
    class_prior: f64,
    n: usize,
    seed: u64,
    out: *mut *mut SelgapDataset,
) -> SelgapStatus {
    boundary(|| {
        let task = match gaussian_binary_task(mean0, mean1, covariance, class_prior) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match sample_gaussian_task(&task, n, seed) {
            Ok(data) => emit(out, SelgapDataset(data)),
            Err(e) => fail(&e),
        }
    })
}

/// Read a dataset from the documented CSV layout
/// (`x0,..,label[,eta0,..]`).
///
/// # Safety
/// `path` is a NUL-terminated UTF-8 string; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn selgap_dataset_read_csv(
    path: *const c_char,
    out: *mut *mut SelgapDataset,
) -> SelgapStatus {
    boundary(|| {
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match LabeledDataset::read_csv(&path) {
            Ok(data) => emit(out, SelgapDataset(data)),
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `dataset` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn selgap_dataset_write_csv(
    dataset: *const SelgapDataset,
    path: *const c_char,
) -> SelgapStatus {
    boundary(|| {
        let Some(ds) = dataset.as_ref() else { return null_arg("dataset") };
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match ds.0.write_csv(&path) {
            Ok(()) => SelgapOk,
            Err(e) => fail(&e),
        }
    })
}

/// Sample count (0 for a null handle).
///
/// # Safety
/// `dataset` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn selgap_dataset_len(dataset: *const SelgapDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.len())
}

/// Feature dimension (0 for a null handle).
///
/// # Safety
/// `dataset` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn selgap_dataset_dim(dataset: *const SelgapDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.dim())
}

/// Class count (0 for a null handle).
///
/// # Safety
/// `dataset` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn selgap_dataset_num_classes(dataset: *const SelgapDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.num_classes())
}

/// The affine benchmark shifts.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelgapShiftKind {
    SelgapShiftIdentity = 0,
    SelgapShiftShear = 1,
    SelgapShiftRotation = 2,
    SelgapShiftTranslation = 3,
}

/// Apply one of the standard shifts to every feature row (labels kept, any
/// stored posterior dropped).
///
/// # Safety
/// `dataset` must be a live handle; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn selgap_dataset_shift(
    dataset: *const SelgapDataset,
    kind: SelgapShiftKind,
    out: *mut *mut SelgapDataset,
) -> SelgapStatus {
    boundary(|| {
        let Some(ds) = dataset.as_ref() else { return null_arg("dataset") };
        let shift = match kind {
            SelgapShiftKind::SelgapShiftIdentity => ShiftTransform::Identity,
            SelgapShiftKind::SelgapShiftShear => ShiftTransform::standard_shear(),
            SelgapShiftKind::SelgapShiftRotation => ShiftTransform::standard_rotation(),
            SelgapShiftKind::SelgapShiftTranslation => ShiftTransform::standard_translation(),
        };
        match apply_shift(&ds.0, &shift) {
            Ok(data) => emit(out, SelgapDataset(data)),
            Err(e) => fail(&e),
        }
    })
}

/// Unbiased RBF-kernel MMD between the feature distributions of two
/// datasets. `bandwidth <= 0` selects the median-distance heuristic.
///
/// # Safety
/// `a`, `b` must be live handles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn selgap_mmd_rbf(
    a: *const SelgapDataset,
    b: *const SelgapDataset,
    bandwidth: f64,
    out: *mut f64,
) -> SelgapStatus {
    boundary(|| {
        let (Some(a), Some(b)) = (a.as_ref(), b.as_ref()) else {
            return null_arg("dataset");
        };
        if out.is_null() {
            return null_arg("out");
        }
        let bw = if bandwidth > 0.0 { Bandwidth::Fixed(bandwidth) } else { Bandwidth::Auto };
        match mmd_rbf(&a.0, &b.0, bw) {
            Ok(v) => {
                *out = v;
                SelgapOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `dataset` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn selgap_dataset_free(dataset: *mut SelgapDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

// ---------------------------------------------------------------------------
// Posterior oracles
// ---------------------------------------------------------------------------

/// Ground-truth class posterior for a synthetic distribution.
pub struct SelgapOracle(PosteriorOracle);

/// Analytic oracle for the binary Gaussian mixture.
///
/// # Safety
/// Pointer contracts as in [`selgap_dataset_gaussian_binary`].
#[no_mangle]
pub unsafe extern "C" fn selgap_oracle_gaussian_binary(
    mean0: *const f64,
    mean1: *const f64,
    covariance: *const f64,
    class_prior: f64,
    out: *mut *mut SelgapOracle,
) -> SelgapStatus {
    boundary(|| {
        let task = match gaussian_binary_task(mean0, mean1, covariance, class_prior) {
            Ok(t) => t,
            Err(s) => return s,
        };
        emit(out, SelgapOracle(PosteriorOracle::Gaussian(task)))
    })
}

/// Grid-estimated two-moons oracle: kernel averages over `mc_samples`
/// noiseless arc points, tabulated on an `n_grid` x `n_grid` grid covering
/// the dataset's bounding box. Needs `noise_sigma > 0`.
///
/// # Safety
/// `data` must be a live handle; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn selgap_oracle_two_moons(
    data: *const SelgapDataset,
    noise_sigma: f64,
    n_grid: usize,
    mc_samples: usize,
    seed: u64,
    out: *mut *mut SelgapOracle,
) -> SelgapStatus {
    boundary(|| {
        let Some(ds) = data.as_ref() else { return null_arg("data") };
        let task = match TwoMoonsTask::new(noise_sigma, n_grid) {
            Ok(t) => t,
            Err(e) => return fail(&e),
        };
        match estimate_posterior_grid(&ds.0, &task, mc_samples, seed) {
            Ok(oracle) => emit(out, SelgapOracle(oracle)),
            Err(e) => fail(&e),
        }
    })
}

/// Class posterior at a feature vector; `posterior_out` receives
/// `num_classes` probabilities.
///
/// # Safety
/// `x` points to `dim` doubles, `posterior_out` to `posterior_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn selgap_oracle_posterior(
    oracle: *const SelgapOracle,
    x: *const f64,
    dim: usize,
    posterior_out: *mut f64,
    posterior_len: usize,
) -> SelgapStatus {
    boundary(|| {
        let Some(orc) = oracle.as_ref() else { return null_arg("oracle") };
        if x.is_null() || posterior_out.is_null() {
            return null_arg("x/posterior_out");
        }
        let xs = std::slice::from_raw_parts(x, dim);
        match orc.0.posterior(xs) {
            Ok(eta) => {
                if eta.len() != posterior_len {
                    set_error(&format!("posterior has {} classes, buffer holds {posterior_len}", eta.len()));
                    return SelgapInvalidArgument;
                }
                std::ptr::copy_nonoverlapping(eta.as_ptr(), posterior_out, eta.len());
                SelgapOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `oracle` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn selgap_oracle_free(oracle: *mut SelgapOracle) {
    if !oracle.is_null() {
        drop(Box::from_raw(oracle));
    }
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// A trained classifier.
pub struct SelgapModel(TrainedModel);

/// Train a classifier with minibatch SGD (momentum + weight decay) on mean
/// cross-entropy. `hidden_len == 0` trains multinomial logistic regression;
/// otherwise `hidden` lists the ReLU layer widths. Deterministic in `seed`.
///
/// # Safety
/// `train_data` must be a live handle; `hidden` points to `hidden_len`
/// entries (may be null when `hidden_len == 0`); `out` as above.
#[no_mangle]
pub unsafe extern "C" fn selgap_train_model(
    train_data: *const SelgapDataset,
    hidden: *const usize,
    hidden_len: usize,
    num_classes: usize,
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    weight_decay: f64,
    momentum: f64,
    seed: u64,
    out: *mut *mut SelgapModel,
) -> SelgapStatus {
    boundary(|| {
        let Some(ds) = train_data.as_ref() else { return null_arg("train_data") };
        let hidden_sizes: Vec<usize> = if hidden_len == 0 {
            vec![]
        } else {
            if hidden.is_null() {
                return null_arg("hidden");
            }
            std::slice::from_raw_parts(hidden, hidden_len).to_vec()
        };
        let spec = if hidden_sizes.is_empty() {
            ModelSpec::logistic(ds.0.dim(), num_classes)
        } else {
            ModelSpec::mlp(ds.0.dim(), hidden_sizes, num_classes)
        };
        let spec = match spec {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        let config = TrainConfig { learning_rate, epochs, batch_size, weight_decay, momentum, seed };
        match train(&spec, &config, &ds.0) {
            Ok(model) => emit(out, SelgapModel(model)),
            Err(e) => fail(&e),
        }
    })
}

/// Load a model from the versioned text format.
///
/// # Safety
/// `path` is a NUL-terminated UTF-8 string; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn selgap_model_read(
    path: *const c_char,
    out: *mut *mut SelgapModel,
) -> SelgapStatus {
    boundary(|| {
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match TrainedModel::read(&path) {
            Ok(model) => emit(out, SelgapModel(model)),
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn selgap_model_write(
    model: *const SelgapModel,
    path: *const c_char,
) -> SelgapStatus {
    boundary(|| {
        let Some(m) = model.as_ref() else { return null_arg("model") };
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match m.0.write(&path) {
            Ok(()) => SelgapOk,
            Err(e) => fail(&e),
        }
    })
}

/// Softmax class probabilities at one input.
///
/// # Safety
/// `x` points to `dim` doubles, `proba_out` to `proba_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn selgap_model_predict_proba(
    model: *const SelgapModel,
    x: *const f64,
    dim: usize,
    proba_out: *mut f64,
    proba_len: usize,
) -> SelgapStatus {
    boundary(|| {
        let Some(m) = model.as_ref() else { return null_arg("model") };
        if x.is_null() || proba_out.is_null() {
            return null_arg("x/proba_out");
        }
        let xs = std::slice::from_raw_parts(x, dim);
        match m.0.predict_proba(xs) {
            Ok(p) => {
                if p.len() != proba_len {
                    set_error(&format!("model has {} classes, buffer holds {proba_len}", p.len()));
                    return SelgapInvalidArgument;
                }
                std::ptr::copy_nonoverlapping(p.as_ptr(), proba_out, p.len());
                SelgapOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Plain accuracy of the model on a dataset.
///
/// # Safety
/// `model` and `data` must be live handles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn selgap_model_accuracy(
    model: *const SelgapModel,
    data: *const SelgapDataset,
    out: *mut f64,
) -> SelgapStatus {
    boundary(|| {
        let (Some(m), Some(d)) = (model.as_ref(), data.as_ref()) else {
            return null_arg("model/data");
        };
        if out.is_null() {
            return null_arg("out");
        }
        match dataset_accuracy(&m.0, &d.0) {
            Ok(a) => {
                *out = a;
                SelgapOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `model` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn selgap_model_free(model: *mut SelgapModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// ---------------------------------------------------------------------------
// Selective evaluation
// ---------------------------------------------------------------------------

/// Score function selector for evaluation and decomposition.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelgapScoreKind {
    /// Maximum softmax probability.
    SelgapScoreMsp = 0,
    /// 1 - SEP (numerically equal to MSP, the loss-prediction baseline).
    SelgapScoreNegSelfEntropy = 1,
    /// The true correctness posterior; needs an oracle.
    SelgapScoreOracleEtaH = 2,
}

/// Accuracy-coverage curve plus its gap to the perfect-ordering frontier.
pub struct SelgapEvaluation {
    curve: CoverageCurve,
    gap: GapCurve,
}

fn build_pair(
    model: &TrainedModel,
    kind: SelgapScoreKind,
    oracle: Option<&PosteriorOracle>,
) -> Result<SelectivePair, selgap::Error> {
    let score = match kind {
        SelgapScoreKind::SelgapScoreMsp => ScoreFunction::Msp,
        SelgapScoreKind::SelgapScoreNegSelfEntropy => ScoreFunction::NegSelfEntropy,
        SelgapScoreKind::SelgapScoreOracleEtaH => {
            let oracle = oracle.ok_or_else(|| {
                selgap::Error::MissingOracle("oracle_eta_h scoring needs an oracle handle".into())
            })?;
            ScoreFunction::OracleEtaH(oracle.clone())
        }
    };
    SelectivePair::new(Predictor::Single(model.clone()), score)
}

/// Score a dataset with the model and build the empirical accuracy-coverage
/// curve and its gap curve. `oracle` may be null unless the score kind
/// requires it.
///
/// # Safety
/// `model` and `data` must be live handles; `oracle` live or null; `out` as
/// above.
#[no_mangle]
pub unsafe extern "C" fn selgap_evaluate(
    model: *const SelgapModel,
    data: *const SelgapDataset,
    score: SelgapScoreKind,
    oracle: *const SelgapOracle,
    out: *mut *mut SelgapEvaluation,
) -> SelgapStatus {
    boundary(|| {
        let (Some(m), Some(d)) = (model.as_ref(), data.as_ref()) else {
            return null_arg("model/data");
        };
        let pair = match build_pair(&m.0, score, oracle.as_ref().map(|o| &o.0)) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        let scored = match pair.score_dataset(&d.0) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        };
        let curve = match empirical_curve(&scored) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        };
        let gap = gap_curve(&curve);
        emit(out, SelgapEvaluation { curve, gap })
    })
}

/// Full-coverage accuracy (NaN for a null handle).
///
/// # Safety
/// `eval` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn selgap_evaluation_a_full(eval: *const SelgapEvaluation) -> f64 {
    eval.as_ref().map_or(f64::NAN, |e| e.curve.a_full())
}

/// Area under the risk-coverage curve (NaN for a null handle).
///
/// # Safety
/// `eval` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn selgap_evaluation_aurc(eval: *const SelgapEvaluation) -> f64 {
    eval.as_ref().map_or(f64::NAN, |e| aurc(&e.curve))
}

/// Area between the curve and the oracle frontier (NaN for a null handle).
///
/// # Safety
/// `eval` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn selgap_evaluation_e_aurc(eval: *const SelgapEvaluation) -> f64 {
    eval.as_ref().map_or(f64::NAN, |e| e.gap.e_aurc())
}

/// Number of curve points (the sample count).
///
/// # Safety
/// `eval` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn selgap_evaluation_len(eval: *const SelgapEvaluation) -> usize {
    eval.as_ref().map_or(0, |e| e.curve.points().len())
}

/// Read curve point `index` (coverage, realized accuracy, oracle accuracy,
/// gap). Null output pointers are skipped.
///
/// # Safety
/// `eval` must be a live handle; out-pointers valid or null.
#[no_mangle]
pub unsafe extern "C" fn selgap_evaluation_point(
    eval: *const SelgapEvaluation,
    index: usize,
    coverage: *mut f64,
    accuracy: *mut f64,
    oracle_accuracy: *mut f64,
    gap: *mut f64,
) -> SelgapStatus {
    boundary(|| {
        let Some(e) = eval.as_ref() else { return null_arg("eval") };
        if index >= e.curve.points().len() {
            set_error(&format!("point {index} out of range ({})", e.curve.points().len()));
            return SelgapInvalidArgument;
        }
        let p = e.curve.points()[index];
        let g = e.gap.points()[index];
        if !coverage.is_null() {
            *coverage = p.coverage;
        }
        if !accuracy.is_null() {
            *accuracy = p.accuracy;
        }
        if !oracle_accuracy.is_null() {
            *oracle_accuracy = g.oracle_acc;
        }
        if !gap.is_null() {
            *gap = g.gap;
        }
        SelgapOk
    })
}

/// Write `coverage,accuracy,threshold` rows (with the `aurc` footer).
///
/// # Safety
/// `eval` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn selgap_evaluation_write_curve_csv(
    eval: *const SelgapEvaluation,
    path: *const c_char,
) -> SelgapStatus {
    boundary(|| {
        let Some(e) = eval.as_ref() else { return null_arg("eval") };
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match e.curve.write_csv(&path) {
            Ok(()) => SelgapOk,
            Err(err) => fail(&err),
        }
    })
}

/// Write `coverage,oracle,realized,gap` rows (with the `e_aurc` footer).
///
/// # Safety
/// `eval` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn selgap_evaluation_write_gap_csv(
    eval: *const SelgapEvaluation,
    path: *const c_char,
) -> SelgapStatus {
    boundary(|| {
        let Some(e) = eval.as_ref() else { return null_arg("eval") };
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match e.gap.write_csv(&path) {
            Ok(()) => SelgapOk,
            Err(err) => fail(&err),
        }
    })
}

/// # Safety
/// `eval` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn selgap_evaluation_free(eval: *mut SelgapEvaluation) {
    if !eval.is_null() {
        drop(Box::from_raw(eval));
    }
}

// ---------------------------------------------------------------------------
// Gap decomposition
// ---------------------------------------------------------------------------

/// Per-coverage decomposition rows with bound verdicts.
pub struct SelgapDecomposition(GapDecomposition);

/// One decomposition row.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelgapDecompositionRow {
    pub coverage: f64,
    pub gap: f64,
    pub eps_bayes: f64,
    pub eps_approx: f64,
    pub eps_rank: f64,
    pub d_rank: f64,
    pub eps_stat: f64,
    pub bound_rhs: f64,
    pub holds: bool,
}

/// Decompose the selective-classification gap of (model, score) on
/// oracle-equipped data over a coverage grid in (0, 1].
///
/// # Safety
/// Handles must be live; `coverage_grid` points to `grid_len` doubles;
/// `out` as above.
#[no_mangle]
pub unsafe extern "C" fn selgap_decompose(
    model: *const SelgapModel,
    data: *const SelgapDataset,
    oracle: *const SelgapOracle,
    score: SelgapScoreKind,
    coverage_grid: *const f64,
    grid_len: usize,
    delta: f64,
    out: *mut *mut SelgapDecomposition,
) -> SelgapStatus {
    boundary(|| {
        let (Some(m), Some(d), Some(orc)) = (model.as_ref(), data.as_ref(), oracle.as_ref()) else {
            return null_arg("model/data/oracle");
        };
        if coverage_grid.is_null() {
            return null_arg("coverage_grid");
        }
        let grid = std::slice::from_raw_parts(coverage_grid, grid_len);
        let pair = match build_pair(&m.0, score, Some(&orc.0)) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        match decompose(&d.0, &orc.0, &pair, grid, delta) {
            Ok(dec) => emit(out, SelgapDecomposition(dec)),
            Err(e) => fail(&e),
        }
    })
}

/// Number of rows.
///
/// # Safety
/// `dec` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn selgap_decomposition_len(dec: *const SelgapDecomposition) -> usize {
    dec.as_ref().map_or(0, |d| d.0.rows().len())
}

/// Copy row `index` into `row_out`.
///
/// # Safety
/// `dec` must be a live handle; `row_out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn selgap_decomposition_row(
    dec: *const SelgapDecomposition,
    index: usize,
    row_out: *mut SelgapDecompositionRow,
) -> SelgapStatus {
    boundary(|| {
        let Some(d) = dec.as_ref() else { return null_arg("dec") };
        if row_out.is_null() {
            return null_arg("row_out");
        }
        let Some(r) = d.0.rows().get(index) else {
            set_error(&format!("row {index} out of range ({})", d.0.rows().len()));
            return SelgapInvalidArgument;
        };
        *row_out = SelgapDecompositionRow {
            coverage: r.coverage,
            gap: r.gap,
            eps_bayes: r.eps_bayes,
            eps_approx: r.eps_approx,
            eps_rank: r.eps_rank,
            d_rank: r.d_rank,
            eps_stat: r.stat_slack,
            bound_rhs: r.bound_rhs,
            holds: r.holds,
        };
        SelgapOk
    })
}

/// Fraction of rows whose bound verdict is true (NaN for a null handle).
///
/// # Safety
/// `dec` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn selgap_decomposition_holds_fraction(
    dec: *const SelgapDecomposition,
) -> f64 {
    dec.as_ref().map_or(f64::NAN, |d| d.0.holds_fraction())
}

/// Write the documented decomposition CSV.
///
/// # Safety
/// `dec` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn selgap_decomposition_write_csv(
    dec: *const SelgapDecomposition,
    path: *const c_char,
) -> SelgapStatus {
    boundary(|| {
        let Some(d) = dec.as_ref() else { return null_arg("dec") };
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match d.0.write_csv(&path) {
            Ok(()) => SelgapOk,
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `dec` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn selgap_decomposition_free(dec: *mut SelgapDecomposition) {
    if !dec.is_null() {
        drop(Box::from_raw(dec));
    }
}

// ---------------------------------------------------------------------------
// Scalar helpers: oracle bound, statistical slack, calibration, advantage
// ---------------------------------------------------------------------------

/// Perfect-ordering bound at coverage `c` for full-coverage accuracy
/// `a_full`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn selgap_oracle_bound(a_full: f64, c: f64, out: *mut f64) -> SelgapStatus {
    boundary(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match oracle_bound(a_full, c) {
            Ok(v) => {
                *out = v;
                SelgapOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Finite-sample slack 3 sqrt(log(6/delta) / (2n)).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn selgap_stat_slack(n: usize, delta: f64, out: *mut f64) -> SelgapStatus {
    boundary(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match stat_slack(n, delta) {
            Ok(v) => {
                *out = v;
                SelgapOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Fit the softmax temperature on row-major `n x k` validation logits by
/// golden-section search on the mean negative log-likelihood.
/// `t_lo`/`t_hi <= 0` selects the default range.
///
/// # Safety
/// `logits` points to `n * k` doubles, `labels` to `n` entries; out-pointers
/// valid or null (skipped).
#[no_mangle]
pub unsafe extern "C" fn selgap_fit_temperature(
    logits: *const f64,
    n: usize,
    k: usize,
    labels: *const usize,
    t_lo: f64,
    t_hi: f64,
    t_out: *mut f64,
    clamped_out: *mut bool,
    degenerate_out: *mut bool,
) -> SelgapStatus {
    boundary(|| {
        if logits.is_null() || labels.is_null() || t_out.is_null() {
            return null_arg("logits/labels/t_out");
        }
        let flat = std::slice::from_raw_parts(logits, n * k);
        let rows: Vec<Vec<f64>> = flat.chunks(k).map(<[f64]>::to_vec).collect();
        let labels = std::slice::from_raw_parts(labels, n);
        let range = if t_lo > 0.0 && t_hi > t_lo { Some((t_lo, t_hi)) } else { None };
        match fit_temperature(&rows, labels, range) {
            Ok(fit) => {
                *t_out = fit.t;
                if !clamped_out.is_null() {
                    *clamped_out = fit.clamped;
                }
                if !degenerate_out.is_null() {
                    *degenerate_out = fit.degenerate;
                }
                SelgapOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Max tempered-softmax probability of one logit vector at temperature `t`.
///
/// # Safety
/// `logits` points to `k` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn selgap_tempered_msp(
    logits: *const f64,
    k: usize,
    t: f64,
    out: *mut f64,
) -> SelgapStatus {
    boundary(|| {
        if logits.is_null() || out.is_null() {
            return null_arg("logits/out");
        }
        let z = std::slice::from_raw_parts(logits, k);
        match tempered_msp(z, t) {
            Ok(v) => {
                *out = v;
                SelgapOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Expected calibration error over `n_bins` equal-width right-closed bins.
/// `correct` holds 0/1 bytes.
///
/// # Safety
/// `confidences` and `correct` point to `n` entries; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn selgap_ece(
    confidences: *const f64,
    correct: *const u8,
    n: usize,
    n_bins: usize,
    out: *mut f64,
) -> SelgapStatus {
    boundary(|| {
        if confidences.is_null() || correct.is_null() || out.is_null() {
            return null_arg("confidences/correct/out");
        }
        let conf = std::slice::from_raw_parts(confidences, n);
        let corr: Vec<bool> = std::slice::from_raw_parts(correct, n).iter().map(|&b| b != 0).collect();
        match ece(conf, &corr, n_bins) {
            Ok(rep) => {
                *out = rep.ece;
                SelgapOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// A fitted score-level calibrator (isotonic or histogram).
pub struct SelgapCalibrator(Calibrator);

/// Pool-adjacent-violators fit of correctness against scores.
///
/// # Safety
/// `scores` and `correct` point to `n` entries; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn selgap_fit_isotonic(
    scores: *const f64,
    correct: *const u8,
    n: usize,
    out: *mut *mut SelgapCalibrator,
) -> SelgapStatus {
    boundary(|| {
        if scores.is_null() || correct.is_null() {
            return null_arg("scores/correct");
        }
        let s = std::slice::from_raw_parts(scores, n);
        let c: Vec<bool> = std::slice::from_raw_parts(correct, n).iter().map(|&b| b != 0).collect();
        match fit_isotonic(s, &c) {
            Ok(map) => emit(out, SelgapCalibrator(Calibrator::Isotonic(map))),
            Err(e) => fail(&e),
        }
    })
}

/// Equal-width histogram-binning fit of correctness against scores.
///
/// # Safety
/// As in [`selgap_fit_isotonic`].
#[no_mangle]
pub unsafe extern "C" fn selgap_fit_histogram(
    scores: *const f64,
    correct: *const u8,
    n: usize,
    n_bins: usize,
    out: *mut *mut SelgapCalibrator,
) -> SelgapStatus {
    boundary(|| {
        if scores.is_null() || correct.is_null() {
            return null_arg("scores/correct");
        }
        let s = std::slice::from_raw_parts(scores, n);
        let c: Vec<bool> = std::slice::from_raw_parts(correct, n).iter().map(|&b| b != 0).collect();
        match fit_histogram(s, &c, n_bins) {
            Ok(map) => emit(out, SelgapCalibrator(Calibrator::Histogram(map))),
            Err(e) => fail(&e),
        }
    })
}

/// Apply a fitted score-level calibrator to one score.
///
/// # Safety
/// `cal` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn selgap_calibrator_apply(
    cal: *const SelgapCalibrator,
    score: f64,
    out: *mut f64,
) -> SelgapStatus {
    boundary(|| {
        let Some(c) = cal.as_ref() else { return null_arg("cal") };
        if out.is_null() {
            return null_arg("out");
        }
        match c.0.apply_score(score) {
            Ok(v) => {
                *out = v;
                SelgapOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// # Safety
/// `cal` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn selgap_calibrator_free(cal: *mut SelgapCalibrator) {
    if !cal.is_null() {
        drop(Box::from_raw(cal));
    }
}

/// Self-entropy predictor 1 - max_j p_j of one probability vector.
///
/// # Safety
/// `probabilities` points to `k` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn selgap_sep(
    probabilities: *const f64,
    k: usize,
    out: *mut f64,
) -> SelgapStatus {
    boundary(|| {
        if probabilities.is_null() || out.is_null() {
            return null_arg("probabilities/out");
        }
        let p = std::slice::from_raw_parts(probabilities, k);
        match sep(p) {
            Ok(v) => {
                *out = v;
                SelgapOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Squared-error advantage of a loss predictor over a baseline on 0/1
/// losses.
///
/// # Safety
/// All arrays point to `n` doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn selgap_advantage(
    lp_values: *const f64,
    sep_values: *const f64,
    losses: *const f64,
    n: usize,
    out: *mut f64,
) -> SelgapStatus {
    boundary(|| {
        if lp_values.is_null() || sep_values.is_null() || losses.is_null() || out.is_null() {
            return null_arg("lp_values/sep_values/losses/out");
        }
        let lp = std::slice::from_raw_parts(lp_values, n);
        let sp = std::slice::from_raw_parts(sep_values, n);
        let ls = std::slice::from_raw_parts(losses, n);
        match advantage(lp, sp, ls) {
            Ok(v) => {
                *out = v;
                SelgapOk
            }
            Err(e) => fail(&e),
        }
    })
}
