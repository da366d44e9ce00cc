//! Multiple-instance ranking objective.
//!
//! A positive bag (theft video) and a negative bag (normal video) are compared
//! through their highest-scoring segments:
//!
//! ```text
//! hinge      = max(0, 1 - max_i pos_i + max_j neg_j)
//! smoothness = lambda1 * sum_i (pos_i - pos_{i+1})^2
//! sparsity   = lambda2 * sum_i pos_i
//! total      = hinge + smoothness + sparsity
//! ```
//!
//! Both regularizers run over the positive bag only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default weight of the temporal smoothness term.
pub const DEFAULT_LAMBDA1: f64 = 8e-5;
/// Default weight of the sparsity term.
pub const DEFAULT_LAMBDA2: f64 = 8e-5;

/// Terms of the objective for one bag pair. `smoothness` and `sparsity` are
/// already multiplied by their lambdas, so `total` is their plain sum with
/// `hinge`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub hinge: f64,
    pub smoothness: f64,
    pub sparsity: f64,
    pub total: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

fn check_args(pos: &[f64], neg: &[f64], lambda1: f64, lambda2: f64) -> Result<()> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptyBag);
    }
    if !(lambda1 >= 0.0 && lambda2 >= 0.0) {
        return Err(Error::NegativeLambda { lambda1, lambda2 });
    }
    Ok(())
}

/// Index and value of the maximum; ties resolve to the lowest index.
pub(crate) fn argmax(scores: &[f64]) -> (usize, f64) {
    let mut best = (0, scores[0]);
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > best.1 {
            best = (i, s);
        }
    }
    best
}

fn smoothness_raw(pos: &[f64]) -> f64 {
    pos.windows(2).map(|w| (w[0] - w[1]).powi(2)).sum()
}

pub fn mil_ranking_loss(
    pos: &[f64],
    neg: &[f64],
    lambda1: f64,
    lambda2: f64,
) -> Result<LossBreakdown> {
    check_args(pos, neg, lambda1, lambda2)?;
    let (_, max_pos) = argmax(pos);
    let (_, max_neg) = argmax(neg);
    let hinge = (1.0 - max_pos + max_neg).max(0.0);
    let smoothness = lambda1 * smoothness_raw(pos);
    let sparsity = lambda2 * pos.iter().sum::<f64>();
    Ok(LossBreakdown {
        hinge,
        smoothness,
        sparsity,
        total: hinge + smoothness + sparsity,
        lambda1,
        lambda2,
    })
}

/// Gradient of `mil_ranking_loss(..).total` with respect to each score.
///
/// Subgradient conventions: the hinge contributes nothing when exactly at
/// the margin, and only the lowest-index maximum of each bag receives it.
pub fn mil_score_gradients(
    pos: &[f64],
    neg: &[f64],
    lambda1: f64,
    lambda2: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_args(pos, neg, lambda1, lambda2)?;
    let (ip, max_pos) = argmax(pos);
    let (ineg, max_neg) = argmax(neg);

    let mut d_pos = vec![lambda2; pos.len()];
    let mut d_neg = vec![0.0; neg.len()];
    for (i, w) in pos.windows(2).enumerate() {
        let g = 2.0 * lambda1 * (w[0] - w[1]);
        d_pos[i] += g;
        d_pos[i + 1] -= g;
    }
    if 1.0 - max_pos + max_neg > 0.0 {
        d_pos[ip] -= 1.0;
        d_neg[ineg] += 1.0;
    }
    Ok((d_pos, d_neg))
}

/// True iff the positive bag's top score strictly exceeds the negative bag's.
pub fn ranking_satisfied(pos: &[f64], neg: &[f64]) -> Result<bool> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::EmptyBag);
    }
    Ok(argmax(pos).1 > argmax(neg).1)
}

/// Mean total loss over `(positive, negative)` bag pairs.
pub fn batch_objective<P, N>(pairs: &[(P, N)], lambda1: f64, lambda2: f64) -> Result<f64>
where
    P: AsRef<[f64]>,
    N: AsRef<[f64]>,
{
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut sum = 0.0;
    for (p, n) in pairs {
        sum += mil_ranking_loss(p.as_ref(), n.as_ref(), lambda1, lambda2)?.total;
    }
    Ok(sum / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const L: f64 = 8e-5;

    #[test]
    fn perfect_separation() {
        let b = mil_ranking_loss(&[1.0, 1.0], &[0.0, 0.0], L, L).unwrap();
        assert_eq!(b.hinge, 0.0);
        assert_eq!(b.smoothness, 0.0);
        assert!((b.sparsity - 1.6e-4).abs() < 1e-15);
        assert!((b.total - 1.6e-4).abs() < 1e-15);
    }

    #[test]
    fn equal_maxima() {
        let b = mil_ranking_loss(&[0.5], &[0.5], L, L).unwrap();
        assert_eq!(b.hinge, 1.0);
        assert_eq!(b.smoothness, 0.0);
        assert!((b.sparsity - 4e-5).abs() < 1e-15);
        assert!((b.total - 1.00004).abs() < 1e-12);
    }

    #[test]
    fn hand_evaluated_pair() {
        // independent scalar evaluation
        let (p, n) = ([0.2f64, 0.8], [0.3f64, 0.1]);
        let hinge = f64::max(0.0, 1.0 - p[0].max(p[1]) + n[0].max(n[1]));
        let smooth = (p[0] - p[1]) * (p[0] - p[1]);
        let sparse = p[0] + p[1];
        let oracle = hinge + L * smooth + L * sparse;
        assert!((oracle - 0.5001088).abs() < 1e-12);

        let b = mil_ranking_loss(&p, &n, L, L).unwrap();
        assert!((b.hinge - 0.5).abs() < 1e-12);
        assert!((b.smoothness - L * 0.36).abs() < 1e-15);
        assert!((b.sparsity - L).abs() < 1e-15);
        assert!((b.total - oracle).abs() < 1e-12);
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(
            mil_ranking_loss(&[], &[0.1], L, L),
            Err(Error::EmptyBag)
        ));
        assert!(matches!(
            mil_ranking_loss(&[0.1], &[], L, L),
            Err(Error::EmptyBag)
        ));
        assert!(matches!(
            mil_ranking_loss(&[0.1], &[0.1], -1.0, L),
            Err(Error::NegativeLambda { .. })
        ));
        assert!(matches!(
            mil_ranking_loss(&[0.1], &[0.1], L, f64::NAN),
            Err(Error::NegativeLambda { .. })
        ));
        assert!(matches!(
            ranking_satisfied(&[], &[0.1]),
            Err(Error::EmptyBag)
        ));
        let none: [(Vec<f64>, Vec<f64>); 0] = [];
        assert!(matches!(
            batch_objective(&none, L, L),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn ranking_examples() {
        assert!(ranking_satisfied(&[0.9, 0.1], &[0.2]).unwrap());
        assert!(!ranking_satisfied(&[0.3], &[0.3]).unwrap());
    }

    #[test]
    fn batch_examples() {
        let pair = (vec![0.2, 0.8], vec![0.3, 0.1]);
        let single = mil_ranking_loss(&pair.0, &pair.1, L, L).unwrap().total;
        assert_eq!(
            batch_objective(std::slice::from_ref(&pair), L, L).unwrap(),
            single
        );
        assert!(
            (batch_objective(&[pair.clone(), pair.clone()], L, L).unwrap() - single).abs() < 1e-15
        );

        let pairs = vec![
            (vec![0.1, 0.4, 0.3], vec![0.6]),
            (vec![0.9], vec![0.2, 0.25]),
            (vec![0.5, 0.5], vec![0.7, 0.1, 0.0]),
        ];
        let mut sum = 0.0;
        for (p, n) in &pairs {
            sum += mil_ranking_loss(p, n, L, L).unwrap().total;
        }
        assert!((batch_objective(&pairs, L, L).unwrap() - sum / 3.0).abs() < 1e-15);
    }

    #[test]
    fn order_sensitive_in_positive_bag() {
        let a = mil_ranking_loss(&[0.1, 0.9, 0.1], &[0.5], L, L).unwrap();
        let b = mil_ranking_loss(&[0.1, 0.1, 0.9], &[0.5], L, L).unwrap();
        assert_ne!(a.total, b.total);
        assert!(a.smoothness > b.smoothness);
    }

    #[test]
    fn score_gradients_at_margin() {
        // exactly at the margin: no hinge gradient
        let (dp, dn) = mil_score_gradients(&[1.0], &[0.0], 0.0, 0.0).unwrap();
        assert_eq!(dp, vec![0.0]);
        assert_eq!(dn, vec![0.0]);
        // tie in the positive bag: lowest index takes the hinge
        let (dp, dn) = mil_score_gradients(&[0.4, 0.4], &[0.3, 0.3], 0.0, 0.0).unwrap();
        assert_eq!(dp, vec![-1.0, 0.0]);
        assert_eq!(dn, vec![1.0, 0.0]);
    }

    fn scores() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..=1.0, 1..20)
    }

    proptest! {
        #[test]
        fn hinge_bounds_and_nonnegative_total(p in scores(), n in scores(), l1 in 0.0f64..1.0, l2 in 0.0f64..1.0) {
            let b = mil_ranking_loss(&p, &n, l1, l2).unwrap();
            prop_assert!((0.0..=2.0).contains(&b.hinge));
            prop_assert!(b.total >= 0.0);
            prop_assert!((b.total - (b.hinge + b.smoothness + b.sparsity)).abs() < 1e-12);
        }

        #[test]
        fn negative_bag_order_is_irrelevant(p in scores(), n in scores()) {
            let mut rev = n.clone();
            rev.reverse();
            prop_assert_eq!(
                mil_ranking_loss(&p, &n, L, L).unwrap(),
                mil_ranking_loss(&p, &rev, L, L).unwrap()
            );
        }

        #[test]
        fn zero_lambdas_reduce_to_hinge(p in scores(), n in scores()) {
            let b = mil_ranking_loss(&p, &n, 0.0, 0.0).unwrap();
            let mp = p.iter().cloned().fold(f64::MIN, f64::max);
            let mn = n.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert_eq!(b.total, f64::max(0.0, 1.0 - mp + mn));
        }

        #[test]
        fn hinge_positive_for_open_interval_scores(
            p in prop::collection::vec(1e-9f64..(1.0 - 1e-9), 1..20),
            n in prop::collection::vec(1e-9f64..(1.0 - 1e-9), 1..20),
        ) {
            prop_assert!(mil_ranking_loss(&p, &n, L, L).unwrap().hinge > 0.0);
        }

        #[test]
        fn ranking_agrees_with_brute_force(p in scores(), n in scores()) {
            let brute = p.iter().any(|&a| n.iter().all(|&b| a > b));
            prop_assert_eq!(ranking_satisfied(&p, &n).unwrap(), brute);
        }
    }
}
