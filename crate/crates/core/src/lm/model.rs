use serde::{Deserialize, Serialize};

use super::{LmDims, LmParameters, BOS, EOS};
use crate::error::{Error, Result};

/// Reduction of per-token log-probabilities into one sequence score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    MeanLogProb,
    SumLogProb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceScore {
    pub token_log_probs: Vec<f64>,
    pub aggregate: f64,
    pub mode: Aggregation,
}

impl SequenceScore {
    fn new(token_log_probs: Vec<f64>, mode: Aggregation) -> Self {
        let sum: f64 = token_log_probs.iter().sum();
        let aggregate = match mode {
            Aggregation::SumLogProb => sum,
            Aggregation::MeanLogProb => sum / token_log_probs.len() as f64,
        };
        Self {
            token_log_probs,
            aggregate,
            mode,
        }
    }
}

/// Values kept from the forward pass for backprop.
pub(crate) struct Activations {
    ctx: Vec<u32>,
    x: Vec<f64>,
    hidden: Vec<f64>,
    pub(crate) log_probs: Vec<f64>,
}

fn check_context(dims: &LmDims, ctx: &[u32]) -> Result<()> {
    if ctx.len() != dims.context {
        return Err(Error::domain(format!(
            "context has {} tokens, model expects {}",
            ctx.len(),
            dims.context
        )));
    }
    if let Some(&bad) = ctx.iter().find(|&&t| t as usize >= dims.vocab_size) {
        return Err(Error::domain(format!(
            "token id {bad} outside vocabulary of {}",
            dims.vocab_size
        )));
    }
    Ok(())
}

pub(crate) fn forward_cached(p: &LmParameters, ctx: &[u32]) -> Result<Activations> {
    let LmDims {
        vocab_size: v,
        embed_dim: d,
        hidden: h,
        ..
    } = p.dims;
    check_context(&p.dims, ctx)?;
    let mut x = Vec::with_capacity(ctx.len() * d);
    for &t in ctx {
        let t = t as usize;
        x.extend_from_slice(&p.embedding[t * d..(t + 1) * d]);
    }
    let mut z = p.b1.clone();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &p.w1[i * h..(i + 1) * h];
        for (zj, wij) in z.iter_mut().zip(row) {
            *zj += xi * wij;
        }
    }
    let hidden: Vec<f64> = z.into_iter().map(f64::tanh).collect();
    let mut logits = p.b2.clone();
    for (j, &aj) in hidden.iter().enumerate() {
        if aj == 0.0 {
            continue;
        }
        let row = &p.w2[j * v..(j + 1) * v];
        for (l, w) in logits.iter_mut().zip(row) {
            *l += aj * w;
        }
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    for l in &mut logits {
        *l -= lse;
    }
    Ok(Activations {
        ctx: ctx.to_vec(),
        x,
        hidden,
        log_probs: logits,
    })
}

/// Log-probabilities of the next token given exactly `k` context ids.
pub fn forward(p: &LmParameters, ctx: &[u32]) -> Result<Vec<f64>> {
    Ok(forward_cached(p, ctx)?.log_probs)
}

/// Adds `weight * d log P(target | ctx) / dθ` into `grad`.
pub(crate) fn backward_log_prob(
    p: &LmParameters,
    act: &Activations,
    target: u32,
    weight: f64,
    grad: &mut LmParameters,
) {
    let LmDims {
        vocab_size: v,
        embed_dim: d,
        hidden: h,
        ..
    } = p.dims;
    let mut dlogits: Vec<f64> = act.log_probs.iter().map(|lp| -weight * lp.exp()).collect();
    dlogits[target as usize] += weight;

    for (g, dl) in grad.b2.iter_mut().zip(&dlogits) {
        *g += dl;
    }
    let mut dz = vec![0.0; h];
    for (j, dzj) in dz.iter_mut().enumerate() {
        let aj = act.hidden[j];
        let row = &p.w2[j * v..(j + 1) * v];
        let grow = &mut grad.w2[j * v..(j + 1) * v];
        let mut da = 0.0;
        for u in 0..v {
            grow[u] += aj * dlogits[u];
            da += row[u] * dlogits[u];
        }
        *dzj = da * (1.0 - aj * aj);
    }
    for (g, dzj) in grad.b1.iter_mut().zip(&dz) {
        *g += dzj;
    }
    for (i, &xi) in act.x.iter().enumerate() {
        let row = &p.w1[i * h..(i + 1) * h];
        let grow = &mut grad.w1[i * h..(i + 1) * h];
        let mut dx = 0.0;
        for j in 0..h {
            grow[j] += xi * dz[j];
            dx += row[j] * dz[j];
        }
        let (slot, e) = (i / d, i % d);
        let t = act.ctx[slot] as usize;
        grad.embedding[t * d + e] += dx;
    }
}

/// (context, target) pairs for scoring `answer` after `prompt`; EOS is
/// appended as the final target and short histories are left-padded with BOS.
pub(crate) fn positions(prompt: &[u32], answer: &[u32], k: usize) -> Vec<(Vec<u32>, u32)> {
    let mut history: Vec<u32> = vec![BOS; k];
    history.extend_from_slice(&prompt[prompt.len().saturating_sub(k)..]);
    let mut out = Vec::with_capacity(answer.len() + 1);
    for &target in answer.iter().chain(std::iter::once(&EOS)) {
        let ctx = history[history.len() - k..].to_vec();
        out.push((ctx, target));
        history.push(target);
    }
    out
}

/// Forward trace of one answer, reusable for the backward pass.
pub(crate) struct SequenceTrace {
    pub(crate) score: SequenceScore,
    acts: Vec<Activations>,
    targets: Vec<u32>,
}

impl SequenceTrace {
    pub(crate) fn run(p: &LmParameters, prompt: &[u32], answer: &[u32], mode: Aggregation) -> Result<Self> {
        if answer.is_empty() {
            return Err(Error::domain("cannot score an empty answer"));
        }
        let mut acts = Vec::with_capacity(answer.len() + 1);
        let mut targets = Vec::with_capacity(answer.len() + 1);
        let mut lps = Vec::with_capacity(answer.len() + 1);
        for (ctx, target) in positions(prompt, answer, p.dims.context) {
            let act = forward_cached(p, &ctx)?;
            if target as usize >= p.dims.vocab_size {
                return Err(Error::domain(format!("target id {target} outside vocabulary")));
            }
            lps.push(act.log_probs[target as usize]);
            acts.push(act);
            targets.push(target);
        }
        Ok(Self {
            score: SequenceScore::new(lps, mode),
            acts,
            targets,
        })
    }

    /// Adds `weight * d aggregate / dθ` into `grad`.
    pub(crate) fn backward(&self, p: &LmParameters, weight: f64, grad: &mut LmParameters) {
        let per_token = match self.score.mode {
            Aggregation::SumLogProb => weight,
            Aggregation::MeanLogProb => weight / self.targets.len() as f64,
        };
        for (act, &t) in self.acts.iter().zip(&self.targets) {
            backward_log_prob(p, act, t, per_token, grad);
        }
    }
}

/// Scores `answer` (plus EOS) as a continuation of `prompt`.
pub fn sequence_score(p: &LmParameters, prompt: &[u32], answer: &[u32], mode: Aggregation) -> Result<SequenceScore> {
    Ok(SequenceTrace::run(p, prompt, answer, mode)?.score)
}
