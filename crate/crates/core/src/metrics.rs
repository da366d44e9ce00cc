//! ROC/AUC evaluation at segment granularity.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Category, VideoBag};
use crate::error::{Error, Result};
use crate::head::ScoringHead;

pub const DEFAULT_THRESHOLD: f64 = 0.2;

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFiniteInput);
    }
    let positives = labels.iter().filter(|&&l| l).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok((positives, negatives))
}

/// Groups of tied scores in descending order, as (score, positives, negatives).
fn tie_groups(scores: &[f64], labels: &[bool]) -> Vec<(f64, u64, u64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for i in order {
        let (tp, fp) = if labels[i] { (1, 0) } else { (0, 1) };
        match groups.last_mut() {
            // == rather than total_cmp so that 0.0 and -0.0 tie
            Some(g) if g.0 == scores[i] => {
                g.1 += tp;
                g.2 += fp;
            }
            _ => groups.push((scores[i], tp, fp)),
        }
    }
    groups
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (positives, negatives) = check_inputs(scores, labels)?;
    // twice the pair count, kept integral so ties stay exact
    let mut doubled: u128 = 0;
    let mut tp_above: u128 = 0;
    for (_, tp, fp) in tie_groups(scores, labels) {
        doubled += u128::from(fp) * (2 * tp_above + u128::from(tp));
        tp_above += u128::from(tp);
    }
    Ok(doubled as f64 / (2 * u128::from(positives) * u128::from(negatives)) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` count as positive; the first point uses +inf.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    let (positives, negatives) = check_inputs(scores, labels)?;
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    for (score, t, f) in tie_groups(scores, labels) {
        tp += t;
        fp += f;
        points.push(RocPoint {
            threshold: score,
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
        });
    }
    Ok(RocCurve { points })
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum()
    }

    /// CSV with header `threshold,fpr,tpr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr);
        }
        out
    }

    /// Polyline over the unit square with the diagonal for reference.
    pub fn to_svg(&self) -> String {
        const SIZE: f64 = 400.0;
        const PAD: f64 = 20.0;
        let xy = |fpr: f64, tpr: f64| (PAD + fpr * SIZE, PAD + (1.0 - tpr) * SIZE);
        let points: Vec<String> = self
            .points
            .iter()
            .map(|p| {
                let (x, y) = xy(p.fpr, p.tpr);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let total = SIZE + 2.0 * PAD;
        let (x0, y0) = xy(0.0, 0.0);
        let (x1, y1) = xy(1.0, 1.0);
        format!(
            concat!(
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{t}\" height=\"{t}\" viewBox=\"0 0 {t} {t}\">\n",
                "  <rect x=\"{x0}\" y=\"{y1}\" width=\"{s}\" height=\"{s}\" fill=\"none\" stroke=\"black\"/>\n",
                "  <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y1}\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n",
                "  <polyline fill=\"none\" stroke=\"blue\" points=\"{p}\"/>\n",
                "</svg>\n"
            ),
            t = total,
            s = SIZE,
            x0 = x0,
            y0 = y0,
            x1 = x1,
            y1 = y1,
            p = points.join(" "),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_svg(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_svg()).map_err(|e| Error::io(path, e))
    }
}

/// Detection flags, `score > threshold`.
pub fn apply_threshold(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s > threshold).collect()
}

/// Per-segment scores and labels of one evaluated video.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredVideo {
    pub id: String,
    pub category: Category,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

pub fn score_bags(head: &ScoringHead, bags: &[VideoBag]) -> Result<Vec<ScoredVideo>> {
    bags.iter()
        .map(|bag| {
            Ok(ScoredVideo {
                id: bag.id.clone(),
                category: bag.category,
                scores: head.score_segments(&bag.segments)?,
                labels: bag.segment_labels(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionCounts {
    pub segments: usize,
    pub positives: usize,
    pub negatives: usize,
    pub flagged: usize,
    pub true_positives: usize,
    pub false_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_auc: f64,
    /// Theft segments against each normal category separately.
    pub per_category_auc: BTreeMap<String, f64>,
    pub threshold: f64,
    pub detections: DetectionCounts,
}

pub fn per_category_eval(videos: &[ScoredVideo], threshold: f64) -> Result<EvalReport> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for v in videos {
        if v.scores.len() != v.labels.len() {
            return Err(Error::LengthMismatch {
                scores: v.scores.len(),
                labels: v.labels.len(),
            });
        }
        scores.extend_from_slice(&v.scores);
        labels.extend_from_slice(&v.labels);
    }
    if !videos.iter().any(|v| v.category.is_theft()) {
        return Err(Error::DegenerateLabels);
    }
    let overall_auc = auc(&scores, &labels)?;

    let theft: Vec<f64> = videos
        .iter()
        .filter(|v| v.category.is_theft())
        .flat_map(|v| {
            v.scores
                .iter()
                .zip(&v.labels)
                .filter(|(_, &l)| l)
                .map(|(&s, _)| s)
        })
        .collect();
    let mut per_category_auc = BTreeMap::new();
    for category in Category::NORMAL {
        let normal: Vec<f64> = videos
            .iter()
            .filter(|v| v.category == category)
            .flat_map(|v| v.scores.iter().copied())
            .collect();
        let mut s = theft.clone();
        s.extend_from_slice(&normal);
        let mut l = vec![true; theft.len()];
        l.resize(s.len(), false);
        match auc(&s, &l) {
            Ok(a) => {
                per_category_auc.insert(category.name().to_owned(), a);
            }
            Err(Error::DegenerateLabels) => {}
            Err(e) => return Err(e),
        }
    }

    let flags = apply_threshold(&scores, threshold);
    let mut detections = DetectionCounts {
        segments: scores.len(),
        ..DetectionCounts::default()
    };
    for (&flag, &label) in flags.iter().zip(&labels) {
        if label {
            detections.positives += 1;
        } else {
            detections.negatives += 1;
        }
        if flag {
            detections.flagged += 1;
            if label {
                detections.true_positives += 1;
            } else {
                detections.false_positives += 1;
            }
        }
    }

    Ok(EvalReport {
        overall_auc,
        per_category_auc,
        threshold,
        detections,
    })
}
