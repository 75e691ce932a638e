//! Hook for embedding-based similarity columns (BERTScore-style). Vectors
//! come from an external file; without one, these columns stay missing.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Reference,
    Hypothesis,
}

pub trait TokenEmbeddingProvider: Send + Sync {
    /// Token vectors for one side of one example, if known.
    fn vectors(&self, question_id: u64, side: Side) -> Result<Option<&[Vec<f64>]>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub question_id: u64,
    pub side: Side,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct FileEmbeddingProvider {
    table: HashMap<(u64, Side), Vec<Vec<f64>>>,
}

impl FileEmbeddingProvider {
    pub fn from_records(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let mut table = HashMap::new();
        for r in records {
            let dim = r.vectors.first().map_or(0, Vec::len);
            if r.vectors.iter().any(|v| v.len() != dim) {
                return Err(Error::Contract(format!(
                    "ragged token vectors for question {}",
                    r.question_id
                )));
            }
            table.insert((r.question_id, r.side), r.vectors);
        }
        Ok(Self { table })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_records(crate::jsonl::load(path)?)
    }
}

impl TokenEmbeddingProvider for FileEmbeddingProvider {
    fn vectors(&self, question_id: u64, side: Side) -> Result<Option<&[Vec<f64>]>> {
        Ok(self.table.get(&(question_id, side)).map(Vec::as_slice))
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Greedy-matching F1 over token cosine similarities.
pub fn bertscore_f1(reference: &[Vec<f64>], hypothesis: &[Vec<f64>]) -> Option<f64> {
    if reference.is_empty() || hypothesis.is_empty() {
        return None;
    }
    let best = |from: &[Vec<f64>], to: &[Vec<f64>]| {
        from.iter()
            .map(|u| to.iter().map(|v| cosine(u, v)).fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            / from.len() as f64
    };
    let recall = best(reference, hypothesis);
    let precision = best(hypothesis, reference);
    if precision + recall == 0.0 {
        return Some(0.0);
    }
    Some(2.0 * precision * recall / (precision + recall))
}
