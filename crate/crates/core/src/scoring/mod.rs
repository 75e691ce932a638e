//! Multi-perspective preference scores.
//!
//! For a pool with votes `V`:
//!
//! ```text
//! s_q = ((v - v_acc) - mean(V)) / std(V)          questioner bias
//! s_u = (v - min V) / (max V - min V)              community votes
//! s_l = prod_t logistic(CM(question, t))           model content score
//! r   = a1*s_q + a2*s_u + a3*s_l
//! ```
//!
//! `std` is the population deviation. A zero deviation gives `s_q = 0`, a
//! zero vote range gives `s_u = 1/2`. A pool without an accepted answer uses
//! `v_acc = 0`.

mod provider;

pub use provider::{
    ConstantProvider, FileProvider, LineProtocolProvider, ScoreRequest, TokenScoreProvider, TokenScoreRecord,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnswerRecord, QuestionPool};
use crate::error::{Error, Result};
use crate::tokenize::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub bias: f64,
    pub vote: f64,
    pub content: f64,
}

impl ScoreWeights {
    pub fn new(bias: f64, vote: f64, content: f64) -> Result<Self> {
        let w = Self { bias, vote, content };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.bias, self.vote, self.content];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) || all.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(format!(
                "score weights must be nonnegative with a positive sum, got {all:?}"
            )));
        }
        Ok(())
    }

    /// Parses `a,b,c`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("weights {s:?}: {e}")))?;
        match parts[..] {
            [a, b, c] => Self::new(a, b, c),
            _ => Err(Error::Config(format!("expected three weights, got {s:?}"))),
        }
    }
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            bias: 1.0 / 3.0,
            vote: 1.0 / 3.0,
            content: 1.0 / 3.0,
        }
    }
}

/// How per-token probabilities are folded into `s_l`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContentMode {
    /// exp of the mean log-probability; independent of answer length.
    #[default]
    GeometricMean,
    ExactProduct,
}

impl std::str::FromStr for ContentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geomean" | "geometric_mean" => Ok(ContentMode::GeometricMean),
            "exact" | "exact_product" => Ok(ContentMode::ExactProduct),
            other => Err(Error::Config(format!("unknown content mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceVector {
    pub s_q: f64,
    pub s_u: f64,
    pub s_l: f64,
    pub r: f64,
}

impl PreferenceVector {
    pub fn compose(s_q: f64, s_u: f64, s_l: f64, w: &ScoreWeights) -> Self {
        Self {
            s_q,
            s_u,
            s_l,
            r: w.bias * s_q + w.vote * s_u + w.content * s_l,
        }
    }
}

pub fn bias_scores_from_votes(votes: &[i64], accepted_votes: Option<i64>) -> Vec<f64> {
    if votes.is_empty() {
        return Vec::new();
    }
    let n = votes.len() as f64;
    let v_a = accepted_votes.unwrap_or(0) as f64;
    let mean = votes.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = votes.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 {
        return vec![0.0; votes.len()];
    }
    votes.iter().map(|&v| ((v as f64 - v_a) - mean) / sd).collect()
}

pub fn vote_scores_from_votes(votes: &[i64]) -> Vec<f64> {
    let (Some(&lo), Some(&hi)) = (votes.iter().min(), votes.iter().max()) else {
        return Vec::new();
    };
    if lo == hi {
        return vec![0.5; votes.len()];
    }
    let range = (hi - lo) as f64;
    votes.iter().map(|&v| (v - lo) as f64 / range).collect()
}

pub fn bias_scores(pool: &QuestionPool) -> Vec<f64> {
    bias_scores_from_votes(&pool.votes(), pool.accepted().map(|a| a.votes))
}

pub fn vote_scores(pool: &QuestionPool) -> Vec<f64> {
    vote_scores_from_votes(&pool.votes())
}

/// `ln(logistic(x))` without overflow.
pub fn log_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn logistic(x: f64) -> f64 {
    log_logistic(x).exp()
}

/// Folds raw per-token scores into `s_l`.
pub fn content_score_from_raw(raw: &[f64], mode: ContentMode) -> Result<f64> {
    if raw.is_empty() {
        return Err(Error::domain("content score needs at least one token"));
    }
    if raw.iter().any(|x| x.is_nan()) {
        return Err(Error::Contract("provider returned NaN token score".into()));
    }
    let log_sum: f64 = raw.iter().map(|&x| log_logistic(x)).sum();
    Ok(match mode {
        ContentMode::ExactProduct => log_sum.exp(),
        ContentMode::GeometricMean => (log_sum / raw.len() as f64).exp(),
    })
}

pub fn content_score(
    provider: &dyn TokenScoreProvider,
    question_id: u64,
    question: &str,
    answer: &AnswerRecord,
    mode: ContentMode,
) -> Result<f64> {
    let tokens = tokenize(&answer.content);
    if tokens.is_empty() {
        return Err(Error::domain(format!("answer {} has no tokens", answer.answer_id)));
    }
    let req = ScoreRequest {
        question_id,
        answer_id: answer.answer_id,
        question,
        tokens: &tokens,
    };
    let raw = provider.token_scores(&req)?;
    if raw.len() != tokens.len() {
        return Err(Error::Contract(format!(
            "answer {}: provider returned {} scores for {} tokens",
            answer.answer_id,
            raw.len(),
            tokens.len()
        )));
    }
    content_score_from_raw(&raw, mode)
}

pub fn overall_scores(
    pool: &QuestionPool,
    weights: &ScoreWeights,
    provider: &dyn TokenScoreProvider,
    mode: ContentMode,
) -> Result<Vec<PreferenceVector>> {
    weights.validate()?;
    let s_q = bias_scores(pool);
    let s_u = vote_scores(pool);
    let question = pool.question_text();
    pool.answers
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let s_l = content_score(provider, pool.question_id, &question, a, mode)?;
            Ok(PreferenceVector::compose(s_q[i], s_u[i], s_l, weights))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredAnswer {
    #[serde(flatten)]
    pub answer: AnswerRecord,
    #[serde(flatten)]
    pub scores: PreferenceVector,
}

/// Corpus record with per-answer scores and the settings that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPool {
    pub question_id: u64,
    pub title: String,
    pub body: String,
    pub has_accepted: bool,
    pub weights: ScoreWeights,
    pub mode: ContentMode,
    pub answers: Vec<ScoredAnswer>,
}

impl ScoredPool {
    pub fn question_text(&self) -> String {
        crate::corpus::question_text(&self.title, &self.body)
    }
}

pub fn score_pool(
    pool: &QuestionPool,
    weights: &ScoreWeights,
    provider: &dyn TokenScoreProvider,
    mode: ContentMode,
) -> Result<ScoredPool> {
    let scores = overall_scores(pool, weights, provider, mode)?;
    Ok(ScoredPool {
        question_id: pool.question_id,
        title: pool.title.clone(),
        body: pool.body.clone(),
        has_accepted: pool.has_accepted,
        weights: *weights,
        mode,
        answers: pool
            .answers
            .iter()
            .cloned()
            .zip(scores)
            .map(|(answer, scores)| ScoredAnswer { answer, scores })
            .collect(),
    })
}

/// Scores every pool. Runs in parallel when the provider allows it; output
/// order always follows input order.
pub fn score_corpus(
    pools: &[QuestionPool],
    weights: &ScoreWeights,
    provider: &dyn TokenScoreProvider,
    mode: ContentMode,
) -> Result<Vec<ScoredPool>> {
    if provider.concurrent() {
        pools
            .par_iter()
            .map(|p| score_pool(p, weights, provider, mode))
            .collect()
    } else {
        pools.iter().map(|p| score_pool(p, weights, provider, mode)).collect()
    }
}

/// One point of the per-answer score distribution report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistributionRecord {
    pub question_id: u64,
    pub answer_id: u64,
    pub votes: i64,
    pub accepted: bool,
    pub s_q: f64,
    pub s_u: f64,
    pub s_l: f64,
}

pub fn score_distribution(pools: &[ScoredPool]) -> Vec<ScoreDistributionRecord> {
    pools
        .iter()
        .flat_map(|p| {
            p.answers.iter().map(move |a| ScoreDistributionRecord {
                question_id: p.question_id,
                answer_id: a.answer.answer_id,
                votes: a.answer.votes,
                accepted: a.answer.accepted,
                s_q: a.scores.s_q,
                s_u: a.scores.s_u,
                s_l: a.scores.s_l,
            })
        })
        .collect()
}
