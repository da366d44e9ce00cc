//! Weakly-supervised package-theft scoring.
//!
//! Videos arrive as per-clip appearance embeddings (PTDF files) and optional
//! per-frame pose keypoints. They are cut into fixed-length segments, each
//! segment becomes one embedding, and a small feedforward head is trained with
//! a multiple-instance ranking loss so that theft segments score highest.
//!
//! Pipeline: [`dataset::load_manifest`] → [`dataset::load_split`] →
//! [`trainer::train`] → [`metrics::score_bags`] → [`metrics::per_category_eval`].

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod fusion;
pub mod head;
pub mod loss;
pub mod metrics;
pub mod pose;
pub mod segmenting;
pub mod synth;
pub mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use dataset::{load_manifest, load_split, load_video_bag, Category, Manifest, Split, VideoBag};
pub use error::{Error, Result};
pub use fusion::{fuse, FusionMode};
pub use head::{backprop, init_head, HeadGradients, ScoringHead};
pub use loss::{batch_objective, mil_ranking_loss, ranking_satisfied, LossBreakdown};
pub use metrics::{apply_threshold, auc, per_category_eval, roc_curve, EvalReport, RocCurve};
pub use segmenting::{
    aggregate_segment, l2_normalize, plan_segments, SegmentEmbedding, SegmentPlan,
};
pub use synth::{generate_synthetic, SynthSpec};
pub use trainer::{adagrad_step, train, AdagradState, TrainConfig, TrainRun};
