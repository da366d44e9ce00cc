//! C ABI over `ptde`.
//!
//! Conventions:
//! - every fallible call returns a [`PtdeStatus`]; on failure the message is
//!   available from [`ptde_last_error_message`] on the same thread;
//! - handles are opaque and owned by the caller, released with the matching
//!   `*_free` function (null is accepted and ignored);
//! - strings are NUL-terminated UTF-8; strings returned by the library are
//!   released with [`ptde_string_free`];
//! - panics never cross the boundary; they surface as `PTDE_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ptde::metrics::{score_bags, DEFAULT_THRESHOLD};
use ptde::{Error, FusionMode, ScoringHead, Split, TrainConfig, VideoBag};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtdeStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Io = 3,
    DimensionMismatch = 4,
    CorruptData = 5,
    UnsupportedVersion = 6,
    EmptyInput = 7,
    DegenerateLabels = 8,
    InsufficientData = 9,
    NonFiniteValue = 10,
    TrainingDiverged = 11,
    Internal = 99,
}

/// Feature fusion applied when loading a dataset.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtdeFusion {
    Global = 0,
    GlobalLocal = 1,
}

impl From<PtdeFusion> for FusionMode {
    fn from(f: PtdeFusion) -> Self {
        match f {
            PtdeFusion::Global => FusionMode::GlobalOnly,
            PtdeFusion::GlobalLocal => FusionMode::GlobalLocalConcat,
        }
    }
}

impl From<FusionMode> for PtdeFusion {
    fn from(f: FusionMode) -> Self {
        match f {
            FusionMode::GlobalOnly => PtdeFusion::Global,
            FusionMode::GlobalLocalConcat => PtdeFusion::GlobalLocal,
        }
    }
}

/// Training hyperparameters. Obtain defaults from [`ptde_train_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PtdeTrainConfig {
    pub learning_rate: f64,
    pub epochs: u64,
    pub pairs_per_epoch: u64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub seed: u64,
    pub adagrad_epsilon: f64,
}

impl PtdeTrainConfig {
    fn to_core(self, fusion_mode: FusionMode) -> Result<TrainConfig, Error> {
        let usize_of = |v: u64, name: &str| {
            usize::try_from(v).map_err(|_| Error::InvalidConfig(format!("{name} out of range")))
        };
        Ok(TrainConfig {
            learning_rate: self.learning_rate,
            epochs: usize_of(self.epochs, "epochs")?,
            pairs_per_epoch: usize_of(self.pairs_per_epoch, "pairs_per_epoch")?,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            seed: self.seed,
            adagrad_epsilon: self.adagrad_epsilon,
            fusion_mode,
        })
    }
}

/// Loss terms for one (positive, negative) bag pair.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PtdeLossBreakdown {
    pub hinge: f64,
    pub smoothness: f64,
    pub sparsity: f64,
    pub total: f64,
}

/// Trained or freshly initialised scoring head.
pub struct PtdeHead {
    head: ScoringHead,
    config: TrainConfig,
}

/// Segment embeddings of one manifest, loaded under one fusion mode.
pub struct PtdeDataset {
    fusion: FusionMode,
    train: Vec<VideoBag>,
    test: Vec<VideoBag>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PtdeStatus {
    match e {
        Error::Io { .. } | Error::MissingFeatureFile(_) => PtdeStatus::Io,
        Error::DimensionMismatch { .. }
        | Error::InconsistentDimension { .. }
        | Error::ShapeMismatch
        | Error::LengthMismatch { .. } => PtdeStatus::DimensionMismatch,
        Error::CorruptFeatureFile { .. }
        | Error::CorruptCheckpoint(_)
        | Error::MalformedPoseFile(_)
        | Error::ManifestSyntax { .. } => PtdeStatus::CorruptData,
        Error::UnsupportedVersion { .. } => PtdeStatus::UnsupportedVersion,
        Error::EmptyVideo { .. } | Error::EmptySegment | Error::EmptyBag | Error::EmptyBatch => {
            PtdeStatus::EmptyInput
        }
        Error::DegenerateLabels => PtdeStatus::DegenerateLabels,
        Error::InsufficientData { .. } => PtdeStatus::InsufficientData,
        Error::NonFiniteInput => PtdeStatus::NonFiniteValue,
        Error::NonFiniteLoss { .. } => PtdeStatus::TrainingDiverged,
        _ => PtdeStatus::InvalidArgument,
    }
}

fn guard<F>(f: F) -> PtdeStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PtdeStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".to_owned());
            PtdeStatus::Internal
        }
    }
}

struct Failure(PtdeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(PtdeStatus::NullPointer, format!("{name} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PtdeStatus::InvalidArgument, msg.into())
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{name} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

fn fusion_arg(raw: u32) -> Result<FusionMode, Failure> {
    match raw {
        0 => Ok(FusionMode::GlobalOnly),
        1 => Ok(FusionMode::GlobalLocalConcat),
        other => Err(invalid(format!("unknown fusion mode {other}"))),
    }
}

/// Message of the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ptde_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ptde_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ptde_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn ptde_train_config_default() -> PtdeTrainConfig {
    let d = TrainConfig::default();
    PtdeTrainConfig {
        learning_rate: d.learning_rate,
        epochs: d.epochs as u64,
        pairs_per_epoch: d.pairs_per_epoch as u64,
        lambda1: d.lambda1,
        lambda2: d.lambda2,
        seed: d.seed,
        adagrad_epsilon: d.adagrad_epsilon,
    }
}

/// Creates a head with the default widths and seeded Glorot-uniform weights.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn ptde_head_init(
    input_dim: usize,
    seed: u64,
    out: *mut *mut PtdeHead,
) -> PtdeStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let head = ptde::init_head(input_dim, seed)?;
        let config = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        *out = Box::into_raw(Box::new(PtdeHead { head, config }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ptde_head_load(
    path: *const c_char,
    out: *mut *mut PtdeHead,
) -> PtdeStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let (head, config) = ptde::load_checkpoint(&path)?;
        *out = Box::into_raw(Box::new(PtdeHead { head, config }));
        Ok(())
    })
}

/// # Safety
/// `head` must be a live handle; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ptde_head_save(head: *const PtdeHead, path: *const c_char) -> PtdeStatus {
    guard(|| {
        let h = head.as_ref().ok_or_else(|| null("head"))?;
        let path = path_arg(path, "path")?;
        ptde::save_checkpoint(&h.head, &h.config, &path)?;
        Ok(())
    })
}

/// Input dimension of the head, or 0 when `head` is null.
///
/// # Safety
/// `head` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ptde_head_input_dim(head: *const PtdeHead) -> usize {
    head.as_ref().map_or(0, |h| h.head.input_dim())
}

/// Fusion mode recorded with the head.
///
/// # Safety
/// `head` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ptde_head_fusion(
    head: *const PtdeHead,
    out: *mut PtdeFusion,
) -> PtdeStatus {
    guard(|| {
        let h = head.as_ref().ok_or_else(|| null("head"))?;
        *out_arg(out, "out")? = h.config.fusion_mode.into();
        Ok(())
    })
}

/// Scores `n_segments` embeddings stored row-major in `embeddings`
/// (`n_segments * dim` values) into `out_scores`.
///
/// # Safety
/// `embeddings` must hold `n_segments * dim` values and `out_scores`
/// `n_segments` writable values.
#[no_mangle]
pub unsafe extern "C" fn ptde_head_score(
    head: *const PtdeHead,
    embeddings: *const f64,
    n_segments: usize,
    dim: usize,
    out_scores: *mut f64,
) -> PtdeStatus {
    guard(|| {
        let h = head.as_ref().ok_or_else(|| null("head"))?;
        if dim != h.head.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: h.head.input_dim(),
                found: dim,
            }
            .into());
        }
        let total = n_segments
            .checked_mul(dim)
            .ok_or_else(|| invalid("n_segments * dim overflows"))?;
        let data = slice_arg(embeddings, total, "embeddings")?;
        if n_segments > 0 && out_scores.is_null() {
            return Err(null("out_scores"));
        }
        let rows: Vec<&[f64]> = data.chunks_exact(dim.max(1)).take(n_segments).collect();
        let scores = h.head.score_segments(&rows)?;
        if !scores.is_empty() {
            std::slice::from_raw_parts_mut(out_scores, scores.len()).copy_from_slice(&scores);
        }
        Ok(())
    })
}

/// # Safety
/// `head` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ptde_head_free(head: *mut PtdeHead) {
    if !head.is_null() {
        drop(Box::from_raw(head));
    }
}

/// Loads the train and test splits of a manifest.
///
/// # Safety
/// `manifest_path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ptde_dataset_open(
    manifest_path: *const c_char,
    fusion: u32,
    out: *mut *mut PtdeDataset,
) -> PtdeStatus {
    guard(|| {
        let path = path_arg(manifest_path, "manifest_path")?;
        let out = out_arg(out, "out")?;
        let fusion = fusion_arg(fusion)?;
        let manifest = ptde::load_manifest(&path)?;
        let train = ptde::load_split(&manifest, Split::Train, fusion)?;
        let test = ptde::load_split(&manifest, Split::Test, fusion)?;
        *out = Box::into_raw(Box::new(PtdeDataset {
            fusion,
            train,
            test,
        }));
        Ok(())
    })
}

/// Number of videos in the train (`split == 0`) or test (`split == 1`) split.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ptde_dataset_len(dataset: *const PtdeDataset, split: u32) -> usize {
    match (dataset.as_ref(), split) {
        (Some(d), 0) => d.train.len(),
        (Some(d), 1) => d.test.len(),
        _ => 0,
    }
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ptde_dataset_free(dataset: *mut PtdeDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Trains a new head on the dataset's train split. When `history_out` is
/// non-null it receives up to `history_capacity` per-epoch objective values;
/// `history_len` (optional) receives the number written.
///
/// # Safety
/// `dataset` must be a live handle, `config` readable, `out` writable, and
/// `history_out` null or valid for `history_capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn ptde_train(
    dataset: *const PtdeDataset,
    config: *const PtdeTrainConfig,
    out: *mut *mut PtdeHead,
    history_out: *mut f64,
    history_capacity: usize,
    history_len: *mut usize,
) -> PtdeStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let out = out_arg(out, "out")?;
        let config = c.to_core(d.fusion)?;
        let run = ptde::train(&d.train, &config)?;
        let written = if history_out.is_null() {
            0
        } else {
            let n = run.history.len().min(history_capacity);
            let dst = std::slice::from_raw_parts_mut(history_out, n);
            for (slot, rec) in dst.iter_mut().zip(&run.history) {
                *slot = rec.total;
            }
            n
        };
        if let Some(len) = history_len.as_mut() {
            *len = written;
        }
        *out = Box::into_raw(Box::new(PtdeHead {
            head: run.head,
            config: run.config,
        }));
        Ok(())
    })
}

/// Evaluates `head` on the dataset's test split and returns the report as a
/// JSON string (free with [`ptde_string_free`]). A negative or NaN
/// `threshold` selects the default.
///
/// # Safety
/// Handles must be live; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ptde_eval_json(
    head: *const PtdeHead,
    dataset: *const PtdeDataset,
    threshold: f64,
    out_json: *mut *mut c_char,
) -> PtdeStatus {
    guard(|| {
        let h = head.as_ref().ok_or_else(|| null("head"))?;
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out_arg(out_json, "out_json")?;
        let threshold = if threshold >= 0.0 {
            threshold
        } else {
            DEFAULT_THRESHOLD
        };
        let scored = score_bags(&h.head, &d.test)?;
        let report = ptde::per_category_eval(&scored, threshold)?;
        let json = serde_json::to_string(&report)
            .map_err(|e| Failure(PtdeStatus::Internal, e.to_string()))?;
        *out = CString::new(json)
            .map_err(|e| Failure(PtdeStatus::Internal, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Area under the ROC curve; `labels` holds 0 (normal) or 1 (theft).
///
/// # Safety
/// `scores` and `labels` must hold `n` values; `out_auc` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ptde_auc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out_auc: *mut f64,
) -> PtdeStatus {
    guard(|| {
        let s = slice_arg(scores, n, "scores")?;
        let l = slice_arg(labels, n, "labels")?;
        let out = out_arg(out_auc, "out_auc")?;
        let labels = l
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(invalid(format!("label {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        *out = ptde::auc(s, &labels)?;
        Ok(())
    })
}

/// Ranking loss of one positive/negative bag pair of segment scores.
///
/// # Safety
/// `pos` and `neg` must hold `n_pos` and `n_neg` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ptde_mil_ranking_loss(
    pos: *const f64,
    n_pos: usize,
    neg: *const f64,
    n_neg: usize,
    lambda1: f64,
    lambda2: f64,
    out: *mut PtdeLossBreakdown,
) -> PtdeStatus {
    guard(|| {
        let p = slice_arg(pos, n_pos, "pos")?;
        let n = slice_arg(neg, n_neg, "neg")?;
        let out = out_arg(out, "out")?;
        let b = ptde::mil_ranking_loss(p, n, lambda1, lambda2)?;
        *out = PtdeLossBreakdown {
            hinge: b.hinge,
            smoothness: b.smoothness,
            sparsity: b.sparsity,
            total: b.total,
        };
        Ok(())
    })
}

/// Writes a synthetic dataset with default shape and the given seed, feature
/// dimension and separation into `out_dir`.
///
/// # Safety
/// `out_dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ptde_synth(
    out_dir: *const c_char,
    seed: u64,
    feature_dim: usize,
    separation: f64,
) -> PtdeStatus {
    guard(|| {
        let dir = path_arg(out_dir, "out_dir")?;
        let spec = ptde::SynthSpec {
            seed,
            feature_dim,
            separation,
            ..ptde::SynthSpec::default()
        };
        ptde::generate_synthetic(&spec, &dir)?;
        Ok(())
    })
}
