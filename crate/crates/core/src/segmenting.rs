//! Segment planning and clip-feature aggregation.
//!
//! A video of `T` frames is cut into `⌊T/L⌋` non-overlapping segments of `L`
//! frames each, starting at frame 0. The trailing `T mod L` frames are dropped.
//! Each segment's appearance embedding is the mean of its L2-normalized
//! 16-frame clip features.

use std::ops::Range;

use crate::error::{Error, Result};

/// Frames covered by one appearance clip from the external extractor.
pub const CLIP_LENGTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentPlan {
    pub total_frames: usize,
    pub segment_length: usize,
    pub segments: Vec<Range<usize>>,
    pub dropped_tail: usize,
}

impl SegmentPlan {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Appearance embedding of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipFeature {
    pub values: Vec<f64>,
}

impl ClipFeature {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

impl AsRef<[f64]> for ClipFeature {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Embedding of one segment, ready for the scoring head.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEmbedding {
    pub values: Vec<f64>,
    pub segment_index: usize,
}

impl SegmentEmbedding {
    pub fn new(values: Vec<f64>, segment_index: usize) -> Self {
        Self {
            values,
            segment_index,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

impl AsRef<[f64]> for SegmentEmbedding {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

pub fn plan_segments(total_frames: usize, segment_length: usize) -> Result<SegmentPlan> {
    if segment_length == 0 {
        return Err(Error::InvalidSegmentLength(segment_length));
    }
    let count = total_frames / segment_length;
    if count == 0 {
        return Err(Error::EmptyVideo {
            total_frames,
            segment_length,
        });
    }
    let segments = (0..count)
        .map(|i| i * segment_length..(i + 1) * segment_length)
        .collect();
    Ok(SegmentPlan {
        total_frames,
        segment_length,
        segments,
        dropped_tail: total_frames % segment_length,
    })
}

/// Scales `v` to unit Euclidean norm. The zero vector is returned unchanged.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(v.to_vec());
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Mean of the L2-normalized clip features.
pub fn aggregate_segment<C: AsRef<[f64]>>(clips: &[C]) -> Result<Vec<f64>> {
    let first = clips.first().ok_or(Error::EmptySegment)?;
    let dim = first.as_ref().len();
    let mut sum = vec![0.0; dim];
    for clip in clips {
        let clip = clip.as_ref();
        if clip.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: clip.len(),
            });
        }
        for (acc, x) in sum.iter_mut().zip(l2_normalize(clip)?) {
            *acc += x;
        }
    }
    let n = clips.len() as f64;
    sum.iter_mut().for_each(|x| *x /= n);
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_division() {
        let plan = plan_segments(48, 16).unwrap();
        assert_eq!(plan.segments, vec![0..16, 16..32, 32..48]);
        assert_eq!(plan.dropped_tail, 0);
    }

    #[test]
    fn floor_drops_tail() {
        let plan = plan_segments(50, 16).unwrap();
        assert_eq!(plan.len(), 3);
        assert_eq!(plan.dropped_tail, 2);
    }

    #[test]
    fn too_short_video() {
        assert!(matches!(
            plan_segments(10, 16),
            Err(Error::EmptyVideo {
                total_frames: 10,
                segment_length: 16
            })
        ));
        assert!(matches!(
            plan_segments(10, 0),
            Err(Error::InvalidSegmentLength(0))
        ));
    }

    #[test]
    fn normalize_examples() {
        let v = l2_normalize(&[3.0, 4.0]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        assert_eq!(l2_normalize(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(l2_normalize(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(
            l2_normalize(&[1.0, f64::NAN]),
            Err(Error::NonFiniteInput)
        ));
        assert!(matches!(
            l2_normalize(&[f64::INFINITY]),
            Err(Error::NonFiniteInput)
        ));
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(
            aggregate_segment(&[vec![2.0, 0.0]]).unwrap(),
            vec![1.0, 0.0]
        );
        assert_eq!(
            aggregate_segment(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            vec![0.5, 0.5]
        );
        let empty: [Vec<f64>; 0] = [];
        assert!(matches!(
            aggregate_segment(&empty),
            Err(Error::EmptySegment)
        ));
        assert!(matches!(
            aggregate_segment(&[vec![1.0, 0.0], vec![1.0]]),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn aggregate_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let clips: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..8).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();

        let mut expected = [0.0f64; 8];
        for clip in &clips {
            let mut sq = 0.0;
            for k in 0..8 {
                sq += clip[k] * clip[k];
            }
            let norm = sq.sqrt();
            for k in 0..8 {
                expected[k] += clip[k] / norm / 3.0;
            }
        }
        let got = aggregate_segment(&clips).unwrap();
        for k in 0..8 {
            assert!((got[k] - expected[k]).abs() < 1e-12, "entry {k}");
        }
    }

    proptest! {
        #[test]
        fn plan_covers_floor_multiple(t in 1usize..=10_000, l in 1usize..=10_000) {
            prop_assume!(l <= t);
            let plan = plan_segments(t, l).unwrap();
            prop_assert_eq!(plan.len(), t / l);
            prop_assert_eq!(plan.dropped_tail, t % l);
            let mut next = 0;
            for r in &plan.segments {
                prop_assert_eq!(r.start, next);
                prop_assert_eq!(r.len(), l);
                next = r.end;
            }
            prop_assert_eq!(next, (t / l) * l);
        }

        #[test]
        fn normalized_norm_is_zero_or_one(v in prop::collection::vec(-1e3f64..1e3, 0..40)) {
            let n = l2_normalize(&v).unwrap().iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(n.abs() < 1e-12 || (n - 1.0).abs() < 1e-12);
        }

        #[test]
        fn aggregate_is_permutation_invariant(
            clips in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 1..8),
            shift in 0usize..8,
        ) {
            let a = aggregate_segment(&clips).unwrap();
            let mut rotated = clips.clone();
            let k = shift % rotated.len();
            rotated.rotate_left(k);
            rotated.reverse();
            let b = aggregate_segment(&rotated).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn aggregate_of_copies_is_normalization(
            clip in prop::collection::vec(-5.0f64..5.0, 1..16),
            k in 1usize..10,
        ) {
            let copies = vec![clip.clone(); k];
            let a = aggregate_segment(&copies).unwrap();
            let b = l2_normalize(&clip).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
