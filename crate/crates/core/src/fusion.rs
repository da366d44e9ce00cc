//! Global (appearance) and local (pose) embedding fusion by concatenation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{PoseSegmentFeature, POSE_FEATURE_DIM};
use crate::segmenting::SegmentEmbedding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum FusionMode {
    /// Appearance embedding only.
    #[default]
    #[serde(rename = "global")]
    GlobalOnly,
    /// Appearance embedding followed by the 54 pose entries.
    #[serde(rename = "global-local")]
    GlobalLocalConcat,
}

impl FusionMode {
    pub fn output_dim(self, appearance_dim: usize) -> usize {
        match self {
            FusionMode::GlobalOnly => appearance_dim,
            FusionMode::GlobalLocalConcat => appearance_dim + POSE_FEATURE_DIM,
        }
    }

    pub fn requires_pose(self) -> bool {
        self == FusionMode::GlobalLocalConcat
    }

    /// Stable tag used in checkpoint headers.
    pub fn tag(self) -> u8 {
        match self {
            FusionMode::GlobalOnly => 0,
            FusionMode::GlobalLocalConcat => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(FusionMode::GlobalOnly),
            1 => Some(FusionMode::GlobalLocalConcat),
            _ => None,
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::GlobalOnly => "global",
            FusionMode::GlobalLocalConcat => "global-local",
        })
    }
}

impl FromStr for FusionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global" => Ok(FusionMode::GlobalOnly),
            "global-local" => Ok(FusionMode::GlobalLocalConcat),
            other => Err(format!(
                "unknown fusion mode {other:?} (expected global or global-local)"
            )),
        }
    }
}

/// Fuses one segment's appearance embedding (of dataset dimension
/// `appearance_dim`) with its pose feature according to `mode`.
pub fn fuse(
    appearance: &SegmentEmbedding,
    pose: Option<&PoseSegmentFeature>,
    mode: FusionMode,
    appearance_dim: usize,
) -> Result<SegmentEmbedding> {
    if appearance.dim() != appearance_dim {
        return Err(Error::DimensionMismatch {
            expected: appearance_dim,
            found: appearance.dim(),
        });
    }
    match (mode, pose) {
        (FusionMode::GlobalOnly, None) => Ok(appearance.clone()),
        (FusionMode::GlobalOnly, Some(_)) => Err(Error::UnexpectedPose),
        (FusionMode::GlobalLocalConcat, None) => Err(Error::MissingPose),
        (FusionMode::GlobalLocalConcat, Some(pose)) => {
            let mut values = Vec::with_capacity(mode.output_dim(appearance_dim));
            values.extend_from_slice(&appearance.values);
            values.extend_from_slice(&pose.values);
            Ok(SegmentEmbedding::new(values, appearance.segment_index))
        }
    }
}
