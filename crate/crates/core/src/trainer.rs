//! Adagrad training of the scoring head over sampled (positive, negative)
//! bag pairs.
//!
//! One epoch draws `pairs_per_epoch` pairs with replacement, averages the
//! pairwise objective and its gradient, and takes a single Adagrad step.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::VideoBag;
use crate::error::{Error, Result};
use crate::fusion::FusionMode;
use crate::head::{backprop_into, init_head, HeadGradients, ScoringHead};
use crate::loss::{DEFAULT_LAMBDA1, DEFAULT_LAMBDA2};

pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_EPOCHS: usize = 5000;
pub const DEFAULT_PAIRS_PER_EPOCH: usize = 30;
pub const DEFAULT_ADAGRAD_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub pairs_per_epoch: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub seed: u64,
    pub adagrad_epsilon: f64,
    pub fusion_mode: FusionMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            epochs: DEFAULT_EPOCHS,
            pairs_per_epoch: DEFAULT_PAIRS_PER_EPOCH,
            lambda1: DEFAULT_LAMBDA1,
            lambda2: DEFAULT_LAMBDA2,
            seed: 0,
            adagrad_epsilon: DEFAULT_ADAGRAD_EPSILON,
            fusion_mode: FusionMode::GlobalOnly,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.pairs_per_epoch == 0 {
            return Err(Error::InvalidConfig(
                "epochs and pairs per epoch must be at least 1".into(),
            ));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::NegativeLambda {
                lambda1: self.lambda1,
                lambda2: self.lambda2,
            });
        }
        if self.adagrad_epsilon.is_nan() || self.adagrad_epsilon <= 0.0 {
            return Err(Error::InvalidConfig(
                "adagrad epsilon must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Running sums of squared gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    pub accumulators: HeadGradients,
    pub steps: u64,
}

impl AdagradState {
    pub fn new(head: &ScoringHead) -> Self {
        Self {
            accumulators: HeadGradients::zeros_like(head),
            steps: 0,
        }
    }
}

/// `acc += g^2; param -= lr * g / (sqrt(acc) + eps)`, element-wise.
pub fn adagrad_step(
    head: &mut ScoringHead,
    grads: &HeadGradients,
    state: &mut AdagradState,
    learning_rate: f64,
    epsilon: f64,
) -> Result<()> {
    if !grads.congruent_with(head) || !grads.congruent(&state.accumulators) {
        return Err(Error::ShapeMismatch);
    }
    for ((params, g), acc) in head
        .blocks_mut()
        .zip(grads.blocks())
        .zip(state.accumulators.blocks_mut())
    {
        for ((p, g), a) in params.iter_mut().zip(g).zip(acc.iter_mut()) {
            let before = *a;
            *a += g * g;
            debug_assert!(*a >= before, "adagrad accumulator decreased");
            *p -= learning_rate * g / (a.sqrt() + epsilon);
        }
    }
    state.steps += 1;
    Ok(())
}

/// Batch-mean objective terms for one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total: f64,
    pub hinge: f64,
    pub smoothness: f64,
    pub sparsity: f64,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub head: ScoringHead,
    pub optimizer: AdagradState,
    pub history: Vec<EpochRecord>,
    pub config: TrainConfig,
}

impl TrainRun {
    /// Tab-separated run log, one line per epoch:
    /// `epoch, total, hinge, smoothness, sparsity`.
    pub fn log_text(&self) -> String {
        let mut out = String::new();
        for r in &self.history {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.epoch, r.total, r.hinge, r.smoothness, r.sparsity
            );
        }
        out
    }

    pub fn write_log(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.log_text()).map_err(|e| Error::io(path, e))
    }
}

pub fn train(dataset: &[VideoBag], config: &TrainConfig) -> Result<TrainRun> {
    config.validate()?;
    let (positives, negatives): (Vec<&VideoBag>, Vec<&VideoBag>) =
        dataset.iter().partition(|b| b.label());
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::InsufficientData {
            positives: positives.len(),
            negatives: negatives.len(),
        });
    }
    let input_dim = dataset[0].dim();
    for bag in dataset {
        if bag.segments.is_empty() {
            return Err(Error::EmptyBag);
        }
        if let Some(s) = bag.segments.iter().find(|s| s.dim() != input_dim) {
            return Err(Error::DimensionMismatch {
                expected: input_dim,
                found: s.dim(),
            });
        }
    }

    let mut head = init_head(input_dim, config.seed)?;
    let mut optimizer = AdagradState::new(&head);
    let mut grads = HeadGradients::zeros_like(&head);
    let mut sampler = ChaCha8Rng::seed_from_u64(config.seed);
    sampler.set_stream(1);

    let weight = 1.0 / config.pairs_per_epoch as f64;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        grads.fill_zero();
        let mut record = EpochRecord {
            epoch,
            total: 0.0,
            hinge: 0.0,
            smoothness: 0.0,
            sparsity: 0.0,
        };
        for _ in 0..config.pairs_per_epoch {
            let pos = positives[sampler.random_range(0..positives.len())];
            let neg = negatives[sampler.random_range(0..negatives.len())];
            let loss = backprop_into(
                &head,
                &pos.segments,
                &neg.segments,
                config.lambda1,
                config.lambda2,
                weight,
                &mut grads,
            )?;
            record.total += loss.total * weight;
            record.hinge += loss.hinge * weight;
            record.smoothness += loss.smoothness * weight;
            record.sparsity += loss.sparsity * weight;
        }
        if !record.total.is_finite() || !grads.blocks().flatten().all(|g| g.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        adagrad_step(
            &mut head,
            &grads,
            &mut optimizer,
            config.learning_rate,
            config.adagrad_epsilon,
        )?;
        history.push(record);
    }

    Ok(TrainRun {
        head,
        optimizer,
        history,
        config: *config,
    })
}
