//! Pose keypoints in the COCO-18 layout emitted by OpenPose-style estimators.
//!
//! The keypoint document is JSON: an array of frames, each frame an array of
//! detected persons, each person exactly 18 `[x_pixels, y_pixels, confidence]`
//! triples. One person per frame is kept (highest mean joint confidence) and
//! mapped to normalized image coordinates.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

pub const NUM_JOINTS: usize = 18;
pub const JOINT_CHANNELS: usize = 3;
/// Flattened per-frame pose feature size (18 joints x (x, y, confidence)).
pub const POSE_FEATURE_DIM: usize = NUM_JOINTS * JOINT_CHANNELS;

/// COCO-18 joint order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum Joint {
    Nose = 0,
    Neck = 1,
    RightShoulder = 2,
    RightElbow = 3,
    RightWrist = 4,
    LeftShoulder = 5,
    LeftElbow = 6,
    LeftWrist = 7,
    RightHip = 8,
    RightKnee = 9,
    RightAnkle = 10,
    LeftHip = 11,
    LeftKnee = 12,
    LeftAnkle = 13,
    RightEye = 14,
    LeftEye = 15,
    RightEar = 16,
    LeftEar = 17,
}

/// One detected person in raw pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersonKeypoints {
    pub joints: [[f64; 3]; NUM_JOINTS],
}

impl PersonKeypoints {
    pub fn mean_confidence(&self) -> f64 {
        self.joints.iter().map(|j| j[2]).sum::<f64>() / NUM_JOINTS as f64
    }
}

/// Candidate persons detected in one frame.
pub type FrameCandidates = Vec<PersonKeypoints>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseFrame {
    pub joints: [[f64; 3]; NUM_JOINTS],
    pub person_present: bool,
}

impl PoseFrame {
    pub fn empty() -> Self {
        Self {
            joints: [[0.0; 3]; NUM_JOINTS],
            person_present: false,
        }
    }

    pub fn flatten(&self) -> [f64; POSE_FEATURE_DIM] {
        let mut out = [0.0; POSE_FEATURE_DIM];
        for (dst, joint) in out.chunks_exact_mut(JOINT_CHANNELS).zip(&self.joints) {
            dst.copy_from_slice(joint);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSegmentFeature {
    pub values: [f64; POSE_FEATURE_DIM],
}

impl AsRef<[f64]> for PoseSegmentFeature {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Deserialize)]
#[serde(transparent)]
struct RawDocument(Vec<Vec<Vec<[f64; 3]>>>);

pub fn parse_pose_document(doc: &str) -> Result<Vec<FrameCandidates>> {
    let RawDocument(frames) =
        serde_json::from_str(doc).map_err(|e| Error::MalformedPoseFile(e.to_string()))?;
    frames
        .into_iter()
        .enumerate()
        .map(|(f, persons)| {
            persons
                .into_iter()
                .enumerate()
                .map(|(p, joints)| {
                    let joints: [[f64; 3]; NUM_JOINTS] =
                        joints.try_into().map_err(|j: Vec<_>| {
                            Error::MalformedPoseFile(format!(
                                "frame {f} person {p}: expected {NUM_JOINTS} joints, found {}",
                                j.len()
                            ))
                        })?;
                    Ok(PersonKeypoints { joints })
                })
                .collect()
        })
        .collect()
}

pub fn read_pose_file(path: &Path) -> Result<Vec<FrameCandidates>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pose_document(&text).map_err(|e| match e {
        Error::MalformedPoseFile(msg) => {
            Error::MalformedPoseFile(format!("{}: {msg}", path.display()))
        }
        other => other,
    })
}

/// Picks the most confident person and maps it to normalized coordinates,
/// clamped to `[0, 1]`. No candidates yields an all-zero frame.
pub fn pose_feature(candidates: &[PersonKeypoints], width: u32, height: u32) -> Result<PoseFrame> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImageSize { width, height });
    }
    let mut best: Option<(f64, &PersonKeypoints)> = None;
    for person in candidates {
        let conf = person.mean_confidence();
        // strict `>` keeps the lowest index on ties
        if best.is_none_or(|(c, _)| conf > c) {
            best = Some((conf, person));
        }
    }
    let Some((_, person)) = best else {
        return Ok(PoseFrame::empty());
    };
    let (w, h) = (f64::from(width), f64::from(height));
    let mut joints = [[0.0; 3]; NUM_JOINTS];
    for (dst, &[x, y, c]) in joints.iter_mut().zip(&person.joints) {
        *dst = [clamp_unit(x / w), clamp_unit(y / h), clamp_unit(c)];
    }
    Ok(PoseFrame {
        joints,
        person_present: true,
    })
}

fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Element-wise mean of the flattened frames of one segment.
pub fn pool_pose(frames: &[PoseFrame]) -> Result<PoseSegmentFeature> {
    if frames.is_empty() {
        return Err(Error::EmptySegment);
    }
    let mut values = [0.0; POSE_FEATURE_DIM];
    for frame in frames {
        for (acc, v) in values.iter_mut().zip(frame.flatten()) {
            *acc += v;
        }
    }
    let n = frames.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(PoseSegmentFeature { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn person_json(x: f64, y: f64, c: f64, joints: usize) -> String {
        let j: Vec<String> = (0..joints).map(|_| format!("[{x},{y},{c}]")).collect();
        format!("[{}]", j.join(","))
    }

    fn person(conf: f64) -> PersonKeypoints {
        PersonKeypoints {
            joints: [[10.0, 20.0, conf]; NUM_JOINTS],
        }
    }

    #[test]
    fn parses_frames_and_persons() {
        let p = person_json(1.0, 2.0, 0.5, 18);
        let doc = format!("[[{p}],[{p}]]");
        let frames = parse_pose_document(&doc).unwrap();
        assert_eq!(frames.len(), 2);
        assert!(frames.iter().all(|f| f.len() == 1));
        assert_eq!(frames[1][0].joints[17], [1.0, 2.0, 0.5]);
    }

    #[test]
    fn frame_without_persons() {
        let p = person_json(1.0, 2.0, 0.5, 18);
        let frames = parse_pose_document(&format!("[[],[{p},{p}]]")).unwrap();
        assert!(frames[0].is_empty());
        assert_eq!(frames[1].len(), 2);
    }

    #[test]
    fn wrong_joint_count_is_malformed() {
        let p = person_json(1.0, 2.0, 0.5, 17);
        let err = parse_pose_document(&format!("[[{p}]]")).unwrap_err();
        assert!(matches!(err, Error::MalformedPoseFile(ref m) if m.contains("17")));
        assert!(matches!(
            parse_pose_document("[[[1,2]]"),
            Err(Error::MalformedPoseFile(_))
        ));
        assert!(matches!(
            parse_pose_document("{\"frames\": []}"),
            Err(Error::MalformedPoseFile(_))
        ));
    }

    #[test]
    fn scales_pixels_to_unit_square() {
        let mut p = person(0.9);
        p.joints[0] = [160.0, 120.0, 0.9];
        let frame = pose_feature(&[p], 320, 240).unwrap();
        assert!(frame.person_present);
        assert_eq!(frame.joints[0], [0.5, 0.5, 0.9]);
    }

    #[test]
    fn no_person_gives_zero_frame() {
        let frame = pose_feature(&[], 320, 240).unwrap();
        assert!(!frame.person_present);
        assert!(frame.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_image_size() {
        assert!(matches!(
            pose_feature(&[], 0, 240),
            Err(Error::InvalidImageSize { .. })
        ));
    }

    #[test]
    fn selects_highest_mean_confidence() {
        let mut low = person(0.4);
        low.joints[3] = [0.0, 0.0, 0.4];
        let mut high = person(0.0);
        for (i, j) in high.joints.iter_mut().enumerate() {
            // mean confidence 0.7, uneven per joint
            j[2] = if i % 2 == 0 { 0.6 } else { 0.8 };
            j[0] = 32.0;
        }
        let oracle = |p: &PersonKeypoints| {
            let mut s = 0.0;
            for j in &p.joints {
                s += j[2];
            }
            s / 18.0
        };
        assert!((oracle(&low) - 0.4).abs() < 1e-12);
        assert!((oracle(&high) - 0.7).abs() < 1e-12);

        for cands in [[low, high], [high, low]] {
            let frame = pose_feature(&cands, 320, 240).unwrap();
            assert_eq!(frame.joints[0][0], 0.1);
        }
    }

    #[test]
    fn ties_pick_lowest_index() {
        let mut a = person(0.5);
        a.joints[0][0] = 0.0;
        let mut b = person(0.5);
        b.joints[0][0] = 320.0;
        let frame = pose_feature(&[a, b], 320, 240).unwrap();
        assert_eq!(frame.joints[0][0], 0.0);
    }

    #[test]
    fn pool_examples() {
        let mut f = PoseFrame::empty();
        f.joints[5] = [0.1, 0.2, 0.3];
        assert_eq!(pool_pose(&[f]).unwrap().values, f.flatten());

        let ones = PoseFrame {
            joints: [[1.0; 3]; NUM_JOINTS],
            person_present: true,
        };
        let pooled = pool_pose(&[PoseFrame::empty(), ones]).unwrap();
        assert!(pooled.values.iter().all(|&v| v == 0.5));

        assert!(matches!(pool_pose(&[]), Err(Error::EmptySegment)));
    }

    #[test]
    fn pool_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frames: Vec<PoseFrame> = (0..16)
            .map(|_| {
                let mut f = PoseFrame::empty();
                for j in f.joints.iter_mut() {
                    *j = [rng.random(), rng.random(), rng.random()];
                }
                f.person_present = true;
                f
            })
            .collect();
        let mut expected = vec![0.0f64; 54];
        for f in &frames {
            for j in 0..18 {
                for c in 0..3 {
                    expected[j * 3 + c] += f.joints[j][c];
                }
            }
        }
        for e in expected.iter_mut() {
            *e /= 16.0;
        }
        let got = pool_pose(&frames).unwrap();
        for (g, e) in got.values.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    fn arb_person() -> impl Strategy<Value = PersonKeypoints> {
        prop::collection::vec((-1e4f64..1e4, -1e4f64..1e4, -2.0f64..2.0), NUM_JOINTS).prop_map(
            |v| {
                let mut joints = [[0.0; 3]; NUM_JOINTS];
                for (dst, (x, y, c)) in joints.iter_mut().zip(v) {
                    *dst = [x, y, c];
                }
                PersonKeypoints { joints }
            },
        )
    }

    proptest! {
        #[test]
        fn pose_entries_are_clamped(
            cands in prop::collection::vec(arb_person(), 0..4),
            w in 1u32..2000,
            h in 1u32..2000,
        ) {
            let frame = pose_feature(&cands, w, h).unwrap();
            prop_assert!(frame.flatten().iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(frame, pose_feature(&cands, w, h).unwrap());
        }

        #[test]
        fn pool_is_permutation_invariant(
            cands in prop::collection::vec(arb_person(), 1..10),
        ) {
            let frames: Vec<PoseFrame> = cands
                .iter()
                .map(|p| pose_feature(std::slice::from_ref(p), 640, 480).unwrap())
                .collect();
            let mut reversed = frames.clone();
            reversed.reverse();
            let a = pool_pose(&frames).unwrap();
            let b = pool_pose(&reversed).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let constant = vec![frames[0]; frames.len()];
            let pooled = pool_pose(&constant).unwrap();
            for (x, y) in pooled.values.iter().zip(frames[0].flatten()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
