use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::forward;
use super::{LmParameters, BOS, EOS};
use crate::error::{Error, Result};

/// Below this temperature decoding is greedy.
pub const GREEDY_TEMPERATURE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub max_len: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub seed: u64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            max_len: 512,
            temperature: 0.2,
            top_p: 0.95,
            seed: 0,
        }
    }
}

/// Smallest descending-probability prefix whose mass reaches `top_p`,
/// renormalized. Ties in probability keep the lower id first.
pub(crate) fn nucleus(log_probs: &[f64], temperature: f64, top_p: f64) -> Vec<(u32, f64)> {
    let scaled: Vec<f64> = log_probs.iter().map(|l| l / temperature).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut order: Vec<(u32, f64)> = weights.iter().enumerate().map(|(i, w)| (i as u32, w / z)).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut cum = 0.0;
    let mut keep = order.len();
    for (i, (_, p)) in order.iter().enumerate() {
        cum += p;
        if cum >= top_p - 1e-12 {
            keep = i + 1;
            break;
        }
    }
    order.truncate(keep);
    let mass: f64 = order.iter().map(|(_, p)| p).sum();
    for (_, p) in &mut order {
        *p /= mass;
    }
    order
}

fn argmax(log_probs: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &lp) in log_probs.iter().enumerate() {
        if lp > log_probs[best] {
            best = i;
        }
    }
    best as u32
}

/// Autoregressive sampling; stops at EOS (not returned) or after `max_len`
/// tokens.
pub fn generate(p: &LmParameters, prompt: &[u32], cfg: &GenerateConfig) -> Result<Vec<u32>> {
    if cfg.max_len == 0 {
        return Err(Error::domain("max_len must be at least 1"));
    }
    if !(cfg.temperature > 0.0) {
        return Err(Error::domain("temperature must be positive"));
    }
    if !(cfg.top_p > 0.0 && cfg.top_p <= 1.0) {
        return Err(Error::domain("top_p must lie in (0, 1]"));
    }
    let k = p.dims.context;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history: Vec<u32> = vec![BOS; k];
    history.extend_from_slice(&prompt[prompt.len().saturating_sub(k)..]);
    let mut out = Vec::new();
    while out.len() < cfg.max_len {
        let lp = forward(p, &history[history.len() - k..])?;
        let next = if cfg.temperature < GREEDY_TEMPERATURE {
            argmax(&lp)
        } else {
            let dist = nucleus(&lp, cfg.temperature, cfg.top_p);
            let u: f64 = rng.random();
            let mut cum = 0.0;
            let mut pick = dist[dist.len() - 1].0;
            for (id, prob) in &dist {
                cum += prob;
                if u < cum {
                    pick = *id;
                    break;
                }
            }
            pick
        };
        if next == EOS {
            break;
        }
        out.push(next);
        history.push(next);
    }
    Ok(out)
}
