//! Three-layer feedforward scorer with hand-derived gradients.
//!
//! `score(x) = sigmoid(W3 . relu(W2 . relu(W1 . x + b1) + b2) + b3)`
//!
//! Weights are stored `fan_in x fan_out`, row-major.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::loss::{mil_ranking_loss, mil_score_gradients, LossBreakdown};

/// Hidden layer widths; the output layer always has one unit.
pub const HIDDEN_WIDTHS: [usize; 2] = [512, 32];
pub const OUTPUT_WIDTH: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weights: vec![0.0; fan_in * fan_out],
            bias: vec![0.0; fan_out],
        }
    }

    fn glorot(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut layer = Self::zeros(fan_in, fan_out);
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    #[inline]
    fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.fan_out + j]
    }

    /// `out = bias + x . W`
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.bias);
        for (xi, row) in x.iter().zip(self.weights.chunks_exact(self.fan_out)) {
            if *xi == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
    }

    fn same_shape(&self, other: &Dense) -> bool {
        self.fan_in == other.fan_in && self.fan_out == other.fan_out
    }
}

/// Parameters of the three layers, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringHead {
    pub layers: [Dense; 3],
}

/// Gradients, shape-congruent with the head they differentiate.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub layers: [Dense; 3],
}

fn layer_dims(input_dim: usize, hidden: [usize; 2]) -> [(usize, usize); 3] {
    [
        (input_dim, hidden[0]),
        (hidden[0], hidden[1]),
        (hidden[1], OUTPUT_WIDTH),
    ]
}

/// Glorot-uniform head of the default widths; biases start at zero.
pub fn init_head(input_dim: usize, seed: u64) -> Result<ScoringHead> {
    ScoringHead::with_widths(input_dim, HIDDEN_WIDTHS, seed)
}

impl ScoringHead {
    pub fn with_widths(input_dim: usize, hidden: [usize; 2], seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden.contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "head dimensions must be positive (input {input_dim}, hidden {hidden:?})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_dims(input_dim, hidden).map(|(i, o)| Dense::glorot(i, o, &mut rng));
        Ok(Self { layers })
    }

    pub fn zeros(input_dim: usize, hidden: [usize; 2]) -> Self {
        Self {
            layers: layer_dims(input_dim, hidden).map(|(i, o)| Dense::zeros(i, o)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn hidden_widths(&self) -> [usize; 2] {
        [self.layers[0].fan_out, self.layers[1].fan_out]
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Parameter blocks in storage order: W1, b1, W2, b2, W3, b3.
    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().flatten().all(|v| v.is_finite())
    }

    pub fn score(&self, embedding: &[f64]) -> Result<f64> {
        self.check_dim(embedding)?;
        Ok(self.trace(embedding, &mut Trace::default()))
    }

    pub fn score_segments<E: AsRef<[f64]>>(&self, embeddings: &[E]) -> Result<Vec<f64>> {
        embeddings.iter().map(|e| self.score(e.as_ref())).collect()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn trace(&self, x: &[f64], t: &mut Trace) -> f64 {
        let [l1, l2, l3] = &self.layers;
        l1.forward(x, &mut t.a1);
        relu(&mut t.a1);
        l2.forward(&t.a1, &mut t.a2);
        relu(&mut t.a2);
        let mut z3 = l3.bias[0];
        for (a, w) in t.a2.iter().zip(&l3.weights) {
            z3 += a * w;
        }
        t.score = sigmoid(z3);
        t.score
    }

    /// Adds `d_score * d(score)/d(params)` for one segment to `grads`.
    fn backward(
        &self,
        x: &[f64],
        t: &Trace,
        d_score: f64,
        grads: &mut HeadGradients,
        buf: &mut Backward,
    ) {
        let [l1, l2, l3] = &self.layers;
        let [g1, g2, g3] = &mut grads.layers;
        let d3 = d_score * t.score * (1.0 - t.score);

        g3.bias[0] += d3;
        buf.d2.clear();
        for (j, (a, g)) in t.a2.iter().zip(g3.weights.iter_mut()).enumerate() {
            *g += a * d3;
            // relu'(0) = 0: a2 == 0 exactly when the pre-activation was <= 0
            buf.d2
                .push(if *a > 0.0 { l3.weight(j, 0) * d3 } else { 0.0 });
        }

        for (g, d) in g2.bias.iter_mut().zip(&buf.d2) {
            *g += d;
        }
        buf.d1.clear();
        for (i, a) in t.a1.iter().enumerate() {
            let row = &l2.weights[i * l2.fan_out..(i + 1) * l2.fan_out];
            let grow = &mut g2.weights[i * l2.fan_out..(i + 1) * l2.fan_out];
            if *a > 0.0 {
                let mut back = 0.0;
                for ((gw, w), d) in grow.iter_mut().zip(row).zip(&buf.d2) {
                    *gw += a * d;
                    back += w * d;
                }
                buf.d1.push(back);
            } else {
                buf.d1.push(0.0);
            }
        }

        for (g, d) in g1.bias.iter_mut().zip(&buf.d1) {
            *g += d;
        }
        for (xi, grow) in x.iter().zip(g1.weights.chunks_exact_mut(l1.fan_out)) {
            if *xi == 0.0 {
                continue;
            }
            for (gw, d) in grow.iter_mut().zip(&buf.d1) {
                *gw += xi * d;
            }
        }
    }
}

impl HeadGradients {
    pub fn zeros_like(head: &ScoringHead) -> Self {
        Self {
            layers: head
                .layers
                .each_ref()
                .map(|l| Dense::zeros(l.fan_in, l.fan_out)),
        }
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
    }

    pub fn congruent_with(&self, head: &ScoringHead) -> bool {
        self.layers
            .iter()
            .zip(&head.layers)
            .all(|(a, b)| a.same_shape(b))
    }

    pub fn congruent(&self, other: &HeadGradients) -> bool {
        self.layers
            .iter()
            .zip(&other.layers)
            .all(|(a, b)| a.same_shape(b))
    }

    pub fn scale(&mut self, factor: f64) {
        self.blocks_mut().flatten().for_each(|v| *v *= factor);
    }

    pub fn fill_zero(&mut self) {
        self.blocks_mut().flatten().for_each(|v| *v = 0.0);
    }
}

#[derive(Default)]
struct Trace {
    a1: Vec<f64>,
    a2: Vec<f64>,
    score: f64,
}

#[derive(Default)]
struct Backward {
    d1: Vec<f64>,
    d2: Vec<f64>,
}

// NaN passes through so divergence stays visible in the score.
fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Loss of one (positive, negative) bag pair and its exact gradient with
/// respect to every head parameter.
pub fn backprop<P, N>(
    head: &ScoringHead,
    pos_bag: &[P],
    neg_bag: &[N],
    lambda1: f64,
    lambda2: f64,
) -> Result<(LossBreakdown, HeadGradients)>
where
    P: AsRef<[f64]>,
    N: AsRef<[f64]>,
{
    let mut grads = HeadGradients::zeros_like(head);
    let loss = backprop_into(head, pos_bag, neg_bag, lambda1, lambda2, 1.0, &mut grads)?;
    Ok((loss, grads))
}

/// Like [`backprop`], but adds `weight` times the gradient into `grads`.
pub fn backprop_into<P, N>(
    head: &ScoringHead,
    pos_bag: &[P],
    neg_bag: &[N],
    lambda1: f64,
    lambda2: f64,
    weight: f64,
    grads: &mut HeadGradients,
) -> Result<LossBreakdown>
where
    P: AsRef<[f64]>,
    N: AsRef<[f64]>,
{
    if pos_bag.is_empty() || neg_bag.is_empty() {
        return Err(Error::EmptyBag);
    }
    if !grads.congruent_with(head) {
        return Err(Error::ShapeMismatch);
    }
    let run = |bag: &[&[f64]]| -> Result<Vec<Trace>> {
        bag.iter()
            .map(|x| {
                head.check_dim(x)?;
                let mut t = Trace::default();
                head.trace(x, &mut t);
                Ok(t)
            })
            .collect()
    };
    let pos: Vec<&[f64]> = pos_bag.iter().map(AsRef::as_ref).collect();
    let neg: Vec<&[f64]> = neg_bag.iter().map(AsRef::as_ref).collect();
    let pos_traces = run(&pos)?;
    let neg_traces = run(&neg)?;
    let pos_scores: Vec<f64> = pos_traces.iter().map(|t| t.score).collect();
    let neg_scores: Vec<f64> = neg_traces.iter().map(|t| t.score).collect();

    let loss = mil_ranking_loss(&pos_scores, &neg_scores, lambda1, lambda2)?;
    let (d_pos, d_neg) = mil_score_gradients(&pos_scores, &neg_scores, lambda1, lambda2)?;

    let mut buf = Backward::default();
    let segments = pos
        .iter()
        .zip(&pos_traces)
        .zip(&d_pos)
        .chain(neg.iter().zip(&neg_traces).zip(&d_neg));
    for ((x, t), d) in segments {
        if *d != 0.0 {
            head.backward(x, t, weight * d, grads, &mut buf);
        }
    }
    Ok(loss)
}
