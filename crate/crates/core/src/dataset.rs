//! Manifest-driven dataset loading.
//!
//! A manifest is a JSON document listing videos, their split and category,
//! and the files produced by the external extractors:
//!
//! * appearance features, one PTDF file per video (see [`write_features`]);
//! * optional pose keypoints, one JSON document per video (see [`crate::pose`]).
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{fuse, FusionMode};
use crate::pose::{pool_pose, pose_feature, read_pose_file};
use crate::segmenting::{
    aggregate_segment, plan_segments, ClipFeature, SegmentEmbedding, CLIP_LENGTH,
};

pub const FEATURE_MAGIC: [u8; 4] = *b"PTDF";
pub const FEATURE_VERSION: u32 = 1;
const FEATURE_HEADER_LEN: usize = 16;

pub const DEFAULT_IMAGE_WIDTH: u32 = 320;
pub const DEFAULT_IMAGE_HEIGHT: u32 = 240;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    PackageTheft,
    Pickup,
    Delivery,
    Irrelevant,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::PackageTheft,
        Category::Pickup,
        Category::Delivery,
        Category::Irrelevant,
    ];
    pub const NORMAL: [Category; 3] = [Category::Delivery, Category::Pickup, Category::Irrelevant];

    pub fn is_theft(self) -> bool {
        self == Category::PackageTheft
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::PackageTheft => "PackageTheft",
            Category::Pickup => "Pickup",
            Category::Delivery => "Delivery",
            Category::Irrelevant => "Irrelevant",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::BadCategory(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub id: String,
    pub split: Split,
    pub category: Category,
    /// PTDF appearance feature file.
    pub features: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<PathBuf>,
    /// Video length in frames; defaults to clip count x 16.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,
    /// Per-segment theft ground truth (0 or 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub feature_dim: usize,
    #[serde(default = "default_clip_length")]
    pub clip_length: usize,
    pub segment_length: usize,
    #[serde(default = "default_width")]
    pub image_width: u32,
    #[serde(default = "default_height")]
    pub image_height: u32,
    pub videos: Vec<VideoRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_clip_length() -> usize {
    CLIP_LENGTH
}

fn default_width() -> u32 {
    DEFAULT_IMAGE_WIDTH
}

fn default_height() -> u32 {
    DEFAULT_IMAGE_HEIGHT
}

/// Same layout as [`Manifest`] with the category kept as text, so an unknown
/// category surfaces as `BadCategory` rather than a generic syntax error.
#[derive(Deserialize)]
struct RawRecord {
    id: String,
    split: Split,
    category: String,
    features: PathBuf,
    #[serde(default)]
    pose: Option<PathBuf>,
    #[serde(default)]
    frames: Option<usize>,
    #[serde(default)]
    annotations: Option<Vec<u8>>,
}

#[derive(Deserialize)]
struct RawManifest {
    name: String,
    feature_dim: usize,
    #[serde(default = "default_clip_length")]
    clip_length: usize,
    segment_length: usize,
    #[serde(default = "default_width")]
    image_width: u32,
    #[serde(default = "default_height")]
    image_height: u32,
    videos: Vec<RawRecord>,
    #[serde(default)]
    metadata: Option<serde_json::Value>,
}

impl Manifest {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn record(&self, id: &str) -> Result<&VideoRecord> {
        self.videos
            .iter()
            .find(|v| v.id == id)
            .ok_or_else(|| Error::UnknownVideo(id.to_owned()))
    }

    pub fn videos_in(&self, split: Split) -> impl Iterator<Item = &VideoRecord> {
        self.videos.iter().filter(move |v| v.split == split)
    }

    pub fn clips_per_segment(&self) -> usize {
        self.segment_length / self.clip_length
    }

    /// Counts per category for one split, in [`Category::ALL`] order.
    pub fn category_counts(&self, split: Split) -> [usize; 4] {
        let mut counts = [0; 4];
        for v in self.videos_in(split) {
            counts[Category::ALL.iter().position(|c| *c == v.category).unwrap()] += 1;
        }
        counts
    }

    /// Writes the manifest as pretty JSON. Paths are written as stored.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn validate(&self, path: &Path) -> Result<()> {
        let syntax = |message: String| Error::ManifestSyntax {
            path: path.to_path_buf(),
            message,
        };
        if self.feature_dim == 0 {
            return Err(syntax("feature_dim must be positive".into()));
        }
        if self.clip_length != CLIP_LENGTH {
            return Err(syntax(format!(
                "clip_length must be {CLIP_LENGTH}, found {}",
                self.clip_length
            )));
        }
        if self.segment_length == 0 || !self.segment_length.is_multiple_of(CLIP_LENGTH) {
            return Err(syntax(format!(
                "segment_length {} is not a positive multiple of {CLIP_LENGTH}",
                self.segment_length
            )));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(syntax("image dimensions must be positive".into()));
        }
        let mut seen = HashSet::new();
        for v in &self.videos {
            if !seen.insert(v.id.as_str()) {
                return Err(syntax(format!("duplicate video id {:?}", v.id)));
            }
            if let Some(a) = &v.annotations {
                if a.iter().any(|&x| x > 1) {
                    return Err(syntax(format!(
                        "video {:?}: annotations must be 0 or 1",
                        v.id
                    )));
                }
            }
            let features = self.resolve(&v.features);
            if !features.is_file() {
                return Err(Error::MissingFeatureFile(features));
            }
            let header = read_feature_header(&features)?;
            if header.dim != self.feature_dim {
                return Err(Error::InconsistentDimension {
                    path: features,
                    expected: self.feature_dim,
                    found: header.dim,
                });
            }
            if let Some(pose) = &v.pose {
                let pose = self.resolve(pose);
                if !pose.is_file() {
                    return Err(Error::MissingFeatureFile(pose));
                }
            }
        }
        Ok(())
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    if !path.is_file() {
        return Err(Error::MissingFeatureFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: RawManifest = serde_json::from_str(&text).map_err(|e| Error::ManifestSyntax {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let videos = raw
        .videos
        .into_iter()
        .map(|r| {
            Ok(VideoRecord {
                category: r.category.parse()?,
                id: r.id,
                split: r.split,
                features: r.features,
                pose: r.pose,
                frames: r.frames,
                annotations: r.annotations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        name: raw.name,
        feature_dim: raw.feature_dim,
        clip_length: raw.clip_length,
        segment_length: raw.segment_length,
        image_width: raw.image_width,
        image_height: raw.image_height,
        videos,
        metadata: raw.metadata,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    manifest.validate(path)?;
    Ok(manifest)
}

/// One video as a multiple-instance bag of segment embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoBag {
    pub id: String,
    pub category: Category,
    pub segments: Vec<SegmentEmbedding>,
    pub ground_truth: Option<Vec<bool>>,
}

impl VideoBag {
    /// Positive iff the video is a theft video.
    pub fn label(&self) -> bool {
        self.category.is_theft()
    }

    pub fn dim(&self) -> usize {
        self.segments.first().map_or(0, SegmentEmbedding::dim)
    }

    /// Per-segment labels: the annotations when present, otherwise the bag
    /// label repeated.
    pub fn segment_labels(&self) -> Vec<bool> {
        match &self.ground_truth {
            Some(gt) => gt.clone(),
            None => vec![self.label(); self.segments.len()],
        }
    }
}

pub fn load_video_bag(manifest: &Manifest, id: &str, mode: FusionMode) -> Result<VideoBag> {
    let record = manifest.record(id)?;
    if mode.requires_pose() && record.pose.is_none() {
        return Err(Error::MissingPose);
    }
    let features_path = manifest.resolve(&record.features);
    let clips = read_features(&features_path)?;
    if let Some(c) = clips.first() {
        if c.dim() != manifest.feature_dim {
            return Err(Error::InconsistentDimension {
                path: features_path,
                expected: manifest.feature_dim,
                found: c.dim(),
            });
        }
    }

    let total_frames = record.frames.unwrap_or(clips.len() * manifest.clip_length);
    if clips.len() != total_frames / manifest.clip_length {
        return Err(Error::CorruptFeatureFile {
            path: features_path,
            offset: FEATURE_HEADER_LEN as u64,
            reason: format!("{} clips do not match {total_frames} frames", clips.len()),
        });
    }
    let plan = plan_segments(total_frames, manifest.segment_length)?;

    let poses = match (&record.pose, mode) {
        (Some(p), FusionMode::GlobalLocalConcat) => {
            let path = manifest.resolve(p);
            let frames = read_pose_file(&path)?;
            let needed = plan.len() * plan.segment_length;
            if frames.len() < needed {
                return Err(Error::MalformedPoseFile(format!(
                    "{}: {} frames, segments need {needed}",
                    path.display(),
                    frames.len()
                )));
            }
            Some(frames)
        }
        _ => None,
    };

    let mut segments = Vec::with_capacity(plan.len());
    for (index, range) in plan.segments.iter().enumerate() {
        let clip_range = range.start / manifest.clip_length..range.end / manifest.clip_length;
        let appearance = SegmentEmbedding::new(aggregate_segment(&clips[clip_range])?, index);
        let pose = match &poses {
            Some(frames) => {
                let per_frame = frames[range.clone()]
                    .iter()
                    .map(|cands| pose_feature(cands, manifest.image_width, manifest.image_height))
                    .collect::<Result<Vec<_>>>()?;
                Some(pool_pose(&per_frame)?)
            }
            None => None,
        };
        segments.push(fuse(
            &appearance,
            pose.as_ref(),
            mode,
            manifest.feature_dim,
        )?);
    }

    let ground_truth = match &record.annotations {
        Some(a) if a.len() != segments.len() => {
            return Err(Error::ManifestSyntax {
                path: manifest.base_dir.clone(),
                message: format!(
                    "video {id:?}: {} annotations for {} segments",
                    a.len(),
                    segments.len()
                ),
            })
        }
        Some(a) => Some(a.iter().map(|&x| x == 1).collect()),
        None => None,
    };

    Ok(VideoBag {
        id: record.id.clone(),
        category: record.category,
        segments,
        ground_truth,
    })
}

/// Loads every video of `split`, in manifest order.
pub fn load_split(manifest: &Manifest, split: Split, mode: FusionMode) -> Result<Vec<VideoBag>> {
    manifest
        .videos_in(split)
        .map(|v| load_video_bag(manifest, &v.id, mode))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureHeader {
    pub version: u32,
    pub clips: usize,
    pub dim: usize,
}

fn parse_feature_header(path: &Path, bytes: &[u8]) -> Result<FeatureHeader> {
    let corrupt = |offset: usize, reason: &str| Error::CorruptFeatureFile {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason: reason.to_owned(),
    };
    if bytes.len() < FEATURE_HEADER_LEN {
        return Err(corrupt(bytes.len(), "truncated header"));
    }
    if bytes[..4] != FEATURE_MAGIC {
        return Err(corrupt(0, "bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != FEATURE_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FEATURE_VERSION,
        });
    }
    Ok(FeatureHeader {
        version,
        clips: word(8) as usize,
        dim: word(12) as usize,
    })
}

pub fn read_feature_header(path: &Path) -> Result<FeatureHeader> {
    use std::io::Read;
    let mut buf = Vec::with_capacity(FEATURE_HEADER_LEN);
    fs::File::open(path)
        .and_then(|f| f.take(FEATURE_HEADER_LEN as u64).read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    parse_feature_header(path, &buf)
}

pub fn read_features(path: &Path) -> Result<Vec<ClipFeature>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(path, &bytes)
}

fn decode_features(path: &Path, bytes: &[u8]) -> Result<Vec<ClipFeature>> {
    let header = parse_feature_header(path, bytes)?;
    let record_len = header.dim * 4;
    let body = &bytes[FEATURE_HEADER_LEN..];
    let corrupt = |offset: usize, reason: String| Error::CorruptFeatureFile {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason,
    };
    if header.dim == 0 {
        return Err(corrupt(12, "zero feature dimension".into()));
    }
    let expected = header.clips * record_len;
    if body.len() < expected {
        let complete = body.len() / record_len;
        return Err(corrupt(
            FEATURE_HEADER_LEN + complete * record_len,
            format!("truncated in clip {complete} of {}", header.clips),
        ));
    }
    if body.len() > expected {
        return Err(corrupt(
            FEATURE_HEADER_LEN + expected,
            "trailing bytes after last clip".into(),
        ));
    }
    body.chunks_exact(record_len)
        .enumerate()
        .map(|(k, rec)| {
            let values: Vec<f64> = rec
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
                .collect();
            if let Some(j) = values.iter().position(|v| !v.is_finite()) {
                return Err(corrupt(
                    FEATURE_HEADER_LEN + k * record_len + j * 4,
                    "non-finite value".into(),
                ));
            }
            Ok(ClipFeature::new(values))
        })
        .collect()
}

/// Writes clips as a PTDF file: `"PTDF"`, then version, clip count and
/// dimension as little-endian `u32`, then the values as little-endian `f32`.
pub fn write_features(path: &Path, dim: usize, clips: &[Vec<f32>]) -> Result<()> {
    if let Some(bad) = clips.iter().find(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    let mut bytes = Vec::with_capacity(FEATURE_HEADER_LEN + clips.len() * dim * 4);
    bytes.extend_from_slice(&FEATURE_MAGIC);
    for word in [FEATURE_VERSION, clips.len() as u32, dim as u32] {
        bytes.extend_from_slice(&word.to_le_bytes());
    }
    for v in clips.iter().flatten() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn category_names() {
        for c in Category::ALL {
            assert_eq!(c.name().parse::<Category>().unwrap(), c);
        }
        assert!(matches!("Theft".parse::<Category>(), Err(Error::BadCategory(s)) if s == "Theft"));
    }

    #[test]
    fn truncated_feature_file_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ptdf");
        write_features(&path, 4, &[vec![1.0; 4], vec![2.0; 4], vec![3.0; 4]]).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(16 + 16 + 9);
        match decode_features(&path, &bytes) {
            Err(Error::CorruptFeatureFile { offset, .. }) => assert_eq!(offset, 32),
            other => panic!("unexpected {other:?}"),
        }
        bytes[0] = b'X';
        assert!(matches!(
            decode_features(&path, &bytes),
            Err(Error::CorruptFeatureFile { offset: 0, .. })
        ));
        assert!(matches!(
            decode_features(&path, b"PTDF"),
            Err(Error::CorruptFeatureFile { offset: 4, .. })
        ));
    }

    #[test]
    fn rejects_other_versions_and_trailing_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ptdf");
        write_features(&path, 2, &[vec![1.0; 2]]).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.push(0);
        assert!(matches!(
            decode_features(&path, &bytes),
            Err(Error::CorruptFeatureFile { offset: 24, .. })
        ));
        bytes.pop();
        bytes[4] = 2;
        assert!(matches!(
            decode_features(&path, &bytes),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn feature_file_round_trip(
            (dim, clips) in (1usize..10).prop_flat_map(|d| (Just(d), prop::collection::vec(
                prop::collection::vec(-1e6f32..1e6, d), 0..6))),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("f.ptdf");
            write_features(&path, dim, &clips).unwrap();
            let back = read_features(&path).unwrap();
            prop_assert_eq!(back.len(), clips.len());
            for (a, b) in back.iter().zip(&clips) {
                let b: Vec<f64> = b.iter().map(|&v| f64::from(v)).collect();
                prop_assert_eq!(&a.values, &b);
            }
        }
    }
}
