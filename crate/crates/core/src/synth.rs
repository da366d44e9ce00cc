//! Synthetic datasets with known answers, standing in for real extractor output.
//!
//! Normal segments draw their clip features around a shared mean `b`; theft
//! segments around `b + separation * u` for a unit direction `u` orthogonal to
//! `b`. Each theft video carries one contiguous block of theft segments.
//! Pose files hold a standing COCO-18 skeleton that crouches and reaches down
//! during theft segments, with a strength that vanishes at zero separation.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dataset::{write_features, Category, Manifest, Split, VideoRecord};
use crate::error::{Error, Result};
use crate::metrics::auc;
use crate::pose::NUM_JOINTS;
use crate::segmenting::{aggregate_segment, CLIP_LENGTH};

/// Videos per category in [`Category::ALL`] order: 60/20/20/20 train,
/// 40/10/20/10 test.
pub const DEFAULT_TRAIN_COUNTS: [usize; 4] = [60, 20, 20, 20];
pub const DEFAULT_TEST_COUNTS: [usize; 4] = [40, 10, 20, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub train_counts: [usize; 4],
    pub test_counts: [usize; 4],
    pub min_segments: usize,
    pub max_segments: usize,
    pub feature_dim: usize,
    pub separation: f64,
    pub noise: f64,
    pub theft_fraction: f64,
    pub segment_length: usize,
    pub with_pose: bool,
    pub image_width: u32,
    pub image_height: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            train_counts: DEFAULT_TRAIN_COUNTS,
            test_counts: DEFAULT_TEST_COUNTS,
            min_segments: 4,
            max_segments: 8,
            feature_dim: 64,
            separation: 10.0,
            noise: 1.0,
            theft_fraction: 0.3,
            segment_length: 32,
            with_pose: true,
            image_width: crate::dataset::DEFAULT_IMAGE_WIDTH,
            image_height: crate::dataset::DEFAULT_IMAGE_HEIGHT,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return fail("separation must be finite and non-negative");
        }
        if !(self.noise.is_finite() && self.noise > 0.0) {
            return fail("noise must be finite and positive");
        }
        if !(self.theft_fraction > 0.0 && self.theft_fraction <= 1.0) {
            return fail("theft fraction must lie in (0, 1]");
        }
        if self.min_segments == 0 || self.min_segments > self.max_segments {
            return fail("segment range must satisfy 1 <= min <= max");
        }
        if self.feature_dim < 2 {
            return fail("feature dimension must be at least 2");
        }
        if self.segment_length == 0 || !self.segment_length.is_multiple_of(CLIP_LENGTH) {
            return fail("segment length must be a positive multiple of 16");
        }
        if self.image_width == 0 || self.image_height == 0 {
            return fail("image dimensions must be positive");
        }
        for counts in [self.train_counts, self.test_counts] {
            if counts[0] == 0 || counts[1..].iter().sum::<usize>() == 0 {
                return fail("each split needs at least one theft and one normal video");
            }
        }
        Ok(())
    }

    fn pose_strength(&self) -> f64 {
        self.separation / (self.separation + self.noise)
    }
}

// COCO-18 standing skeleton, offsets from the body centre in image fractions.
const SKELETON: [[f64; 2]; NUM_JOINTS] = [
    [0.0, -0.42],
    [0.0, -0.33],
    [-0.08, -0.33],
    [-0.10, -0.20],
    [-0.11, -0.08],
    [0.08, -0.33],
    [0.10, -0.20],
    [0.11, -0.08],
    [-0.05, -0.05],
    [-0.05, 0.12],
    [-0.05, 0.28],
    [0.05, -0.05],
    [0.05, 0.12],
    [0.05, 0.28],
    [-0.02, -0.44],
    [0.02, -0.44],
    [-0.04, -0.43],
    [0.04, -0.43],
];
const UPPER_BODY: [usize; 12] = [0, 1, 2, 3, 4, 5, 6, 7, 14, 15, 16, 17];
const WRISTS: [usize; 2] = [4, 7];

fn gaussian(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn round_to(v: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits);
    (v * scale).round() / scale
}

struct Generator<'a> {
    spec: &'a SynthSpec,
    rng: ChaCha8Rng,
    normal_mean: Vec<f64>,
    theft_mean: Vec<f64>,
}

struct SynthVideo {
    record: VideoRecord,
    clips: Vec<Vec<f32>>,
    pose: Option<Vec<Vec<Vec<[f64; 3]>>>>,
}

impl Generator<'_> {
    fn video(&mut self, id: String, split: Split, category: Category) -> SynthVideo {
        let spec = self.spec;
        let segments = self.rng.random_range(spec.min_segments..=spec.max_segments);
        let tail = self.rng.random_range(0..CLIP_LENGTH);
        let frames = segments * spec.segment_length + tail;

        let mut annotations = vec![0u8; segments];
        if category.is_theft() {
            let block =
                ((spec.theft_fraction * segments as f64).ceil() as usize).clamp(1, segments);
            let start = self.rng.random_range(0..=segments - block);
            annotations[start..start + block].fill(1);
        }

        let clips_per_segment = spec.segment_length / CLIP_LENGTH;
        let mut clips = Vec::with_capacity(segments * clips_per_segment);
        for &theft in &annotations {
            let mean = if theft == 1 {
                &self.theft_mean
            } else {
                &self.normal_mean
            };
            for _ in 0..clips_per_segment {
                let clip = mean
                    .iter()
                    .map(|m| (m + spec.noise * gaussian(&mut self.rng)) as f32)
                    .collect();
                clips.push(clip);
            }
        }

        let pose = spec
            .with_pose
            .then(|| self.pose_track(frames, &annotations));
        SynthVideo {
            record: VideoRecord {
                features: PathBuf::from(format!("features/{id}.ptdf")),
                pose: spec
                    .with_pose
                    .then(|| PathBuf::from(format!("pose/{id}.json"))),
                id,
                split,
                category,
                frames: Some(frames),
                annotations: Some(annotations),
            },
            clips,
            pose,
        }
    }

    fn pose_track(&mut self, frames: usize, annotations: &[u8]) -> Vec<Vec<Vec<[f64; 3]>>> {
        let spec = self.spec;
        let (w, h) = (f64::from(spec.image_width), f64::from(spec.image_height));
        let strength = spec.pose_strength();
        let start_x = self.rng.random_range(0.2..0.8);
        let drift = self.rng.random_range(-0.1..0.1);
        (0..frames)
            .map(|f| {
                let segment = (f / spec.segment_length).min(annotations.len() - 1);
                let crouch = if annotations[segment] == 1 {
                    strength
                } else {
                    0.0
                };
                let cx = start_x + drift * f as f64 / frames as f64;
                let roll: f64 = self.rng.random();
                let mut persons = Vec::new();
                if roll >= 0.03 {
                    persons.push(self.person(cx, 0.55, crouch, (0.5, 1.0), w, h));
                }
                if roll >= 0.95 {
                    let other = self.rng.random_range(0.05..0.95);
                    persons.push(self.person(other, 0.5, 0.0, (0.05, 0.4), w, h));
                }
                persons
            })
            .collect()
    }

    fn person(
        &mut self,
        cx: f64,
        cy: f64,
        crouch: f64,
        conf: (f64, f64),
        w: f64,
        h: f64,
    ) -> Vec<[f64; 3]> {
        let mut joints: Vec<[f64; 2]> = SKELETON.iter().map(|[x, y]| [cx + x, cy + y]).collect();
        for &j in &UPPER_BODY {
            joints[j][1] += 0.12 * crouch;
        }
        for &j in &WRISTS {
            joints[j][1] += 0.25 * crouch;
        }
        joints
            .into_iter()
            .map(|[x, y]| {
                if self.rng.random_bool(0.05) {
                    return [0.0, 0.0, 0.0];
                }
                let x = (x + 0.01 * gaussian(&mut self.rng)) * w;
                let y = (y + 0.01 * gaussian(&mut self.rng)) * h;
                let c = self.rng.random_range(conf.0..conf.1);
                [round_to(x, 1), round_to(y, 1), round_to(c, 2)]
            })
            .collect()
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string(value).expect("synthetic data serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Global segment embeddings exactly as the loader computes them.
fn segment_embeddings(video: &SynthVideo, clips_per_segment: usize) -> Result<Vec<Vec<f64>>> {
    video
        .clips
        .chunks(clips_per_segment)
        .map(|chunk| {
            let clips: Vec<Vec<f64>> = chunk
                .iter()
                .map(|c| c.iter().map(|&v| f64::from(v)).collect())
                .collect();
            aggregate_segment(&clips)
        })
        .collect()
}

/// Scores test segments by negative distance to the mean embedding of the
/// annotated theft segments in the training split.
fn nearest_mean_oracle(videos: &[SynthVideo], clips_per_segment: usize) -> Result<Option<f64>> {
    let mut center: Vec<f64> = Vec::new();
    let mut count = 0usize;
    let mut test = Vec::new();
    for video in videos {
        let embeddings = segment_embeddings(video, clips_per_segment)?;
        let labels = video.record.annotations.as_deref().unwrap_or_default();
        match video.record.split {
            Split::Train => {
                for (e, _) in embeddings.iter().zip(labels).filter(|(_, &l)| l == 1) {
                    if center.is_empty() {
                        center = vec![0.0; e.len()];
                    }
                    center.iter_mut().zip(e).for_each(|(c, x)| *c += x);
                    count += 1;
                }
            }
            Split::Test => test.extend(embeddings.into_iter().zip(labels.iter().map(|&l| l == 1))),
        }
    }
    if count == 0 {
        return Ok(None);
    }
    center.iter_mut().for_each(|c| *c /= count as f64);
    let (scores, labels): (Vec<f64>, Vec<bool>) = test
        .into_iter()
        .map(|(e, l)| {
            let d2: f64 = e.iter().zip(&center).map(|(x, c)| (x - c) * (x - c)).sum();
            (-d2.sqrt(), l)
        })
        .unzip();
    match auc(&scores, &labels) {
        Ok(a) => Ok(Some(a)),
        Err(Error::DegenerateLabels) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Writes feature files, pose files and `manifest.json` under `out_dir` and
/// returns the manifest path. Output is byte-identical for equal specs.
pub fn generate_synthetic(spec: &SynthSpec, out_dir: &Path) -> Result<PathBuf> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal_mean: Vec<f64> = {
        let scale = spec.noise * (spec.feature_dim as f64).sqrt();
        unit_vector(&mut rng, spec.feature_dim)
            .into_iter()
            .map(|x| x * scale)
            .collect()
    };
    // direction orthogonal to the normal mean
    let direction = loop {
        let u = unit_vector(&mut rng, spec.feature_dim);
        let b2: f64 = normal_mean.iter().map(|b| b * b).sum();
        let dot: f64 = u.iter().zip(&normal_mean).map(|(a, b)| a * b).sum();
        let v: Vec<f64> = u
            .iter()
            .zip(&normal_mean)
            .map(|(a, b)| a - dot / b2 * b)
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            break v.into_iter().map(|x| x / norm).collect::<Vec<_>>();
        }
    };
    let theft_mean = normal_mean
        .iter()
        .zip(&direction)
        .map(|(b, u)| b + spec.separation * u)
        .collect();

    let mut generator = Generator {
        spec,
        rng,
        normal_mean,
        theft_mean,
    };
    let mut videos = Vec::new();
    for (split, counts) in [
        (Split::Train, spec.train_counts),
        (Split::Test, spec.test_counts),
    ] {
        let split_name = match split {
            Split::Train => "train",
            Split::Test => "test",
        };
        for (category, &n) in Category::ALL.iter().zip(&counts) {
            for i in 0..n {
                let id = format!("{split_name}-{}-{i:03}", category.name().to_lowercase());
                videos.push(generator.video(id, split, *category));
            }
        }
    }

    let io = |p: &Path, e| Error::io(p, e);
    let features_dir = out_dir.join("features");
    fs::create_dir_all(&features_dir).map_err(|e| io(&features_dir, e))?;
    if spec.with_pose {
        let pose_dir = out_dir.join("pose");
        fs::create_dir_all(&pose_dir).map_err(|e| io(&pose_dir, e))?;
    }
    for video in &videos {
        write_features(
            &out_dir.join(&video.record.features),
            spec.feature_dim,
            &video.clips,
        )?;
        if let (Some(path), Some(pose)) = (&video.record.pose, &video.pose) {
            write_json(&out_dir.join(path), pose)?;
        }
    }

    let clips_per_segment = spec.segment_length / CLIP_LENGTH;
    let oracle = nearest_mean_oracle(&videos, clips_per_segment)?;
    let manifest = Manifest {
        name: format!("synthetic-{}", spec.seed),
        feature_dim: spec.feature_dim,
        clip_length: CLIP_LENGTH,
        segment_length: spec.segment_length,
        image_width: spec.image_width,
        image_height: spec.image_height,
        videos: videos.into_iter().map(|v| v.record).collect(),
        metadata: Some(json!({
            "generator": "ptde-synth",
            "spec": spec,
            "nearest_mean_oracle_test_auc": oracle,
        })),
        base_dir: out_dir.to_path_buf(),
    };
    let path = out_dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}

/// Oracle AUC stored by [`generate_synthetic`], if any.
pub fn stored_oracle_auc(manifest: &Manifest) -> Option<f64> {
    manifest
        .metadata
        .as_ref()?
        .get("nearest_mean_oracle_test_auc")?
        .as_f64()
}
