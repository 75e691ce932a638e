//! Fixed-context neural n-gram language model with hand-written backprop.
//!
//! ```text
//! x      = concat(E[t_{-k}], …, E[t_{-1}])          (k·d)
//! hidden = tanh(x · W1 + b1)                         (h)
//! logits = hidden · W2 + b2                          (V)
//! log P  = log_softmax(logits)
//! ```
//!
//! Every loss sees the model only through token log-probabilities, so the
//! supervised, listwise and combined objectives all share one backward pass.

mod checkpoint;
mod generate;
mod gradcheck;
mod loss;
mod model;
mod vocab;

pub use checkpoint::Checkpoint;
pub use generate::{generate, GenerateConfig};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use loss::{combined_loss_and_grad, mpra_loss_and_grad, sft_loss_and_grad, LossGrad};
pub use model::{forward, sequence_score, Aggregation, SequenceScore};
pub use vocab::{Vocabulary, BOS, EOS, PAD, UNK};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmDims {
    pub vocab_size: usize,
    pub context: usize,
    pub embed_dim: usize,
    pub hidden: usize,
}

impl LmDims {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            context: 4,
            embed_dim: 32,
            hidden: 64,
        }
    }

    fn input_dim(&self) -> usize {
        self.context * self.embed_dim
    }
}

pub const TENSOR_NAMES: [&str; 5] = ["embedding", "w1", "b1", "w2", "b2"];

/// Model weights, row-major. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct LmParameters {
    pub dims: LmDims,
    /// `V × d`
    pub embedding: Vec<f64>,
    /// `(k·d) × h`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `h × V`
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl LmParameters {
    pub fn zeros(dims: LmDims) -> Self {
        Self {
            dims,
            embedding: vec![0.0; dims.vocab_size * dims.embed_dim],
            w1: vec![0.0; dims.input_dim() * dims.hidden],
            b1: vec![0.0; dims.hidden],
            w2: vec![0.0; dims.hidden * dims.vocab_size],
            b2: vec![0.0; dims.vocab_size],
        }
    }

    /// Gaussian init: `N(0, scale²)` for embeddings, `N(0, 1/fan_in)` scaled by
    /// `scale` for weight matrices, zero biases.
    pub fn random<R: Rng>(dims: LmDims, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(dims);
        for x in &mut p.embedding {
            *x = scale * rng.sample::<f64, _>(StandardNormal);
        }
        let s1 = scale / (dims.input_dim() as f64).sqrt();
        for x in &mut p.w1 {
            *x = s1 * rng.sample::<f64, _>(StandardNormal);
        }
        let s2 = scale / (dims.hidden as f64).sqrt();
        for x in &mut p.w2 {
            *x = s2 * rng.sample::<f64, _>(StandardNormal);
        }
        p
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [&self.embedding, &self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.embedding,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &LmParameters) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for t in self.tensors_mut() {
            for x in t.iter_mut() {
                *x *= alpha;
            }
        }
    }

    pub fn max_abs_diff(&self, other: &LmParameters) -> f64 {
        self.tensors()
            .iter()
            .zip(other.tensors())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}
