//! Overlap metrics for generated answers, rank correlations, and the
//! evaluation report that combines them.

mod correlation;
mod embedding;
mod report;

pub use correlation::{average_ranks, correlation_table, kendall_tau_b, pearson, spearman, CorrelationRow};
pub use embedding::{bertscore_f1, EmbeddingRecord, FileEmbeddingProvider, Side, TokenEmbeddingProvider};
pub use report::{evaluate_run, ExampleMetrics, Generation, MetricReport, MetricSummary, ReferenceChoice};

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Substitute for a zero n-gram precision before the geometric mean.
pub const BLEU_EPSILON: f64 = 1e-9;
pub const BLEU_ORDER: usize = 4;
pub const CHRF_ORDER: usize = 6;
pub const CHRF_BETA: f64 = 2.0;

fn ngram_counts<T: Eq + Hash>(items: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut counts = HashMap::new();
    if n > 0 && items.len() >= n {
        for w in items.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn clipped_overlap<T: Eq + Hash>(reference: &HashMap<&[T], u64>, hypothesis: &HashMap<&[T], u64>) -> u64 {
    hypothesis
        .iter()
        .map(|(g, &c)| c.min(reference.get(g).copied().unwrap_or(0)))
        .sum()
}

/// Sufficient statistics for BLEU; add them up to pool a corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: [u64; BLEU_ORDER],
    pub hyp_ngrams: [u64; BLEU_ORDER],
    pub ref_ngrams: [u64; BLEU_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn from_pair<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> Self {
        let r: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
        let h: Vec<&str> = hypothesis.iter().map(AsRef::as_ref).collect();
        let mut s = BleuStats {
            hyp_len: h.len() as u64,
            ref_len: r.len() as u64,
            ..Default::default()
        };
        for n in 1..=BLEU_ORDER {
            let rc = ngram_counts(&r, n);
            let hc = ngram_counts(&h, n);
            s.matches[n - 1] = clipped_overlap(&rc, &hc);
            s.hyp_ngrams[n - 1] = hc.values().sum();
            s.ref_ngrams[n - 1] = rc.values().sum();
        }
        s
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..BLEU_ORDER {
            self.matches[n] += other.matches[n];
            self.hyp_ngrams[n] += other.hyp_ngrams[n];
            self.ref_ngrams[n] += other.ref_ngrams[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// Geometric mean of the modified precisions times the brevity penalty.
    /// Orders for which neither side has any n-gram are left out of the mean.
    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 {
            return if self.ref_len == 0 { 1.0 } else { 0.0 };
        }
        let mut log_sum = 0.0;
        let mut used = 0;
        for n in 0..BLEU_ORDER {
            if self.hyp_ngrams[n] == 0 && self.ref_ngrams[n] == 0 {
                continue;
            }
            let p = if self.matches[n] == 0 {
                BLEU_EPSILON
            } else {
                self.matches[n] as f64 / self.hyp_ngrams[n] as f64
            };
            log_sum += p.ln();
            used += 1;
        }
        let bp = if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        };
        bp * (log_sum / used as f64).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuResult {
    pub corpus: f64,
    pub sentences: Vec<f64>,
    pub stats: Vec<BleuStats>,
}

/// Corpus BLEU-4 from pooled counts, plus per-pair sentence scores.
pub fn bleu4<S: AsRef<str>>(references: &[Vec<S>], hypotheses: &[Vec<S>]) -> Result<BleuResult> {
    if references.len() != hypotheses.len() {
        return Err(Error::domain(format!(
            "{} references but {} hypotheses",
            references.len(),
            hypotheses.len()
        )));
    }
    let stats: Vec<BleuStats> = references
        .iter()
        .zip(hypotheses)
        .map(|(r, h)| BleuStats::from_pair(r, h))
        .collect();
    let mut pooled = BleuStats::default();
    for s in &stats {
        pooled.add(s);
    }
    Ok(BleuResult {
        corpus: if stats.is_empty() { 0.0 } else { pooled.score() },
        sentences: stats.iter().map(BleuStats::score).collect(),
        stats,
    })
}

pub fn sentence_bleu4<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> f64 {
    BleuStats::from_pair(reference, hypothesis).score()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    const ZERO: Prf = Prf {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
}

/// Clipped bigram overlap.
pub fn rouge2<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> Prf {
    let r: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    let h: Vec<&str> = hypothesis.iter().map(AsRef::as_ref).collect();
    let rc = ngram_counts(&r, 2);
    let hc = ngram_counts(&h, 2);
    let (rt, ht): (u64, u64) = (rc.values().sum(), hc.values().sum());
    if rt == 0 || ht == 0 {
        return Prf::ZERO;
    }
    let overlap = clipped_overlap(&rc, &hc) as f64;
    let precision = overlap / ht as f64;
    let recall = overlap / rt as f64;
    let f1 = if overlap == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

fn collapse_whitespace(text: &str) -> Vec<char> {
    let joined = text.split_whitespace().collect::<Vec<_>>().join(" ");
    joined.chars().collect()
}

/// Character n-gram F-score (orders 1..6, beta 2) on a 0..100 scale.
pub fn chrf(reference: &str, hypothesis: &str) -> f64 {
    let r = collapse_whitespace(reference);
    let h = collapse_whitespace(hypothesis);
    let b2 = CHRF_BETA * CHRF_BETA;
    let mut total = 0.0;
    let mut used = 0;
    for n in 1..=CHRF_ORDER {
        let rc = ngram_counts(&r, n);
        let hc = ngram_counts(&h, n);
        let (rt, ht): (u64, u64) = (rc.values().sum(), hc.values().sum());
        if rt == 0 && ht == 0 {
            continue;
        }
        used += 1;
        if rt == 0 || ht == 0 {
            continue;
        }
        let m = clipped_overlap(&rc, &hc) as f64;
        let p = m / ht as f64;
        let rec = m / rt as f64;
        if p + rec > 0.0 {
            total += (1.0 + b2) * p * rec / (b2 * p + rec);
        }
    }
    if used == 0 {
        return if r == h { 100.0 } else { 0.0 };
    }
    100.0 * total / used as f64
}
