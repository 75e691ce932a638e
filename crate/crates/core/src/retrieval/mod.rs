//! Question-bank retrieval for one-shot prompting.
//!
//! BM25 over `title + body` with lowercased alphanumeric terms:
//!
//! ```text
//! idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
//! score(q, d) = sum_{t in q} idf(t) · tf·(k1 + 1) / (tf + k1·(1 - b + b·|d| / avgdl))
//! ```

mod prompt;

pub use prompt::{assemble_prompt, recover_question, PromptBundle, PromptTemplate, DEFAULT_TEMPLATE};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::QuestionPool;
use crate::error::{Error, Result};
use crate::ranking::RankedPool;
use crate::tokenize::retrieval_terms;

pub const INDEX_VERSION: u32 = 1;
pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// One bank document and its exemplar answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BankEntry {
    pub question_id: u64,
    pub question: String,
    pub answer: String,
}

/// Exemplar = highest-r answer.
pub fn entries_from_ranked(pools: &[RankedPool]) -> Vec<BankEntry> {
    pools
        .iter()
        .filter_map(|p| {
            let best = p
                .answers
                .iter()
                .reduce(|a, b| if b.scores.r > a.scores.r { b } else { a })?;
            Some(BankEntry {
                question_id: p.question_id,
                question: p.question_text(),
                answer: best.answer.content.clone(),
            })
        })
        .collect()
}

/// Exemplar = most-voted answer, for corpora that have not been scored.
pub fn entries_from_pools(pools: &[QuestionPool]) -> Vec<BankEntry> {
    pools
        .iter()
        .filter_map(|p| {
            let best = p.answers.iter().reduce(|a, b| if b.votes > a.votes { b } else { a })?;
            Some(BankEntry {
                question_id: p.question_id,
                question: p.question_text(),
                answer: best.content.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub question_id: u64,
    pub score: f64,
}

/// Anything that can rank bank questions for a query.
pub trait RetrievalProvider: Send + Sync {
    /// `query_id` identifies the query question when the provider keys
    /// precomputed representations by id.
    fn search(&self, query_id: Option<u64>, query: &str, k: usize, exclude: Option<u64>) -> Result<Vec<Hit>>;

    fn entry(&self, question_id: u64) -> Option<&BankEntry>;
}

fn top_k(mut hits: Vec<Hit>, k: usize, exclude: Option<u64>) -> Vec<Hit> {
    hits.retain(|h| Some(h.question_id) != exclude && h.score > 0.0);
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.question_id.cmp(&b.question_id)));
    hits.truncate(k);
    hits
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankIndex {
    pub version: u32,
    pub k1: f64,
    pub b: f64,
    pub docs: Vec<BankEntry>,
    pub doc_lens: Vec<u32>,
    pub avg_doc_len: f64,
    /// term -> [(doc index, term frequency)], doc indices ascending
    pub postings: BTreeMap<String, Vec<(u32, u32)>>,
}

pub fn build_index(entries: Vec<BankEntry>) -> BankIndex {
    let per_doc: Vec<(u32, BTreeMap<String, u32>)> = entries
        .par_iter()
        .map(|e| {
            let terms = retrieval_terms(&e.question);
            let mut tf = BTreeMap::new();
            for t in &terms {
                *tf.entry(t.clone()).or_insert(0) += 1;
            }
            (terms.len() as u32, tf)
        })
        .collect();
    let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
    let mut doc_lens = Vec::with_capacity(per_doc.len());
    for (i, (len, tf)) in per_doc.into_iter().enumerate() {
        doc_lens.push(len);
        for (t, c) in tf {
            postings.entry(t).or_default().push((i as u32, c));
        }
    }
    let total: u64 = doc_lens.iter().map(|&l| l as u64).sum();
    let avg_doc_len = if doc_lens.is_empty() {
        0.0
    } else {
        total as f64 / doc_lens.len() as f64
    };
    BankIndex {
        version: INDEX_VERSION,
        k1: BM25_K1,
        b: BM25_B,
        docs: entries,
        doc_lens,
        avg_doc_len,
        postings,
    }
}

impl BankIndex {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25 score of every document with at least one query term.
    pub fn scores(&self, query: &str) -> Vec<Hit> {
        let terms: BTreeSet<String> = retrieval_terms(query).into_iter().collect();
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for t in &terms {
            let Some(list) = self.postings.get(t) else {
                continue;
            };
            let idf = self.idf(t);
            for &(doc, tf) in list {
                let tf = tf as f64;
                let norm = self.k1 * (1.0 - self.b + self.b * self.doc_lens[doc as usize] as f64 / self.avg_doc_len);
                *acc.entry(doc).or_insert(0.0) += idf * tf * (self.k1 + 1.0) / (tf + norm);
            }
        }
        acc.into_iter()
            .map(|(doc, score)| Hit {
                question_id: self.docs[doc as usize].question_id,
                score,
            })
            .collect()
    }

    pub fn retrieve(&self, query: &str, k: usize, exclude: Option<u64>) -> Result<Vec<Hit>> {
        if k == 0 {
            return Err(Error::domain("k must be at least 1"));
        }
        Ok(top_k(self.scores(query), k, exclude))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let index: BankIndex = serde_json::from_slice(&std::fs::read(path)?)?;
        if index.version != INDEX_VERSION {
            return Err(Error::Config(format!(
                "index version {} unsupported (expected {INDEX_VERSION})",
                index.version
            )));
        }
        Ok(index)
    }
}

impl RetrievalProvider for BankIndex {
    fn search(&self, _query_id: Option<u64>, query: &str, k: usize, exclude: Option<u64>) -> Result<Vec<Hit>> {
        self.retrieve(query, k, exclude)
    }

    fn entry(&self, question_id: u64) -> Option<&BankEntry> {
        self.docs.iter().find(|d| d.question_id == question_id)
    }
}

/// Precomputed question vector, one JSON line per question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRecord {
    pub question_id: u64,
    pub vector: Vec<f64>,
}

/// Cosine scoring over externally computed question vectors.
#[derive(Debug, Clone)]
pub struct DenseIndex {
    entries: BTreeMap<u64, BankEntry>,
    vectors: BTreeMap<u64, Vec<f64>>,
}

impl DenseIndex {
    pub fn new(entries: Vec<BankEntry>, vectors: Vec<VectorRecord>) -> Result<Self> {
        let dim = vectors.first().map_or(0, |v| v.vector.len());
        if vectors.iter().any(|v| v.vector.len() != dim) {
            return Err(Error::Contract("question vectors differ in length".into()));
        }
        Ok(Self {
            entries: entries.into_iter().map(|e| (e.question_id, e)).collect(),
            vectors: vectors.into_iter().map(|v| (v.question_id, v.vector)).collect(),
        })
    }

    pub fn load(entries: Vec<BankEntry>, path: &Path) -> Result<Self> {
        Self::new(entries, crate::jsonl::load(path)?)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

impl RetrievalProvider for DenseIndex {
    fn search(&self, query_id: Option<u64>, _query: &str, k: usize, exclude: Option<u64>) -> Result<Vec<Hit>> {
        if k == 0 {
            return Err(Error::domain("k must be at least 1"));
        }
        let qid = query_id.ok_or_else(|| Error::Contract("dense retrieval needs the query question id".into()))?;
        let q = self
            .vectors
            .get(&qid)
            .ok_or_else(|| Error::Contract(format!("no vector for question {qid}")))?;
        let hits = self
            .entries
            .keys()
            .filter_map(|id| {
                self.vectors.get(id).map(|v| Hit {
                    question_id: *id,
                    score: cosine(q, v),
                })
            })
            .collect();
        Ok(top_k(hits, k, exclude))
    }

    fn entry(&self, question_id: u64) -> Option<&BankEntry> {
        self.entries.get(&question_id)
    }
}
