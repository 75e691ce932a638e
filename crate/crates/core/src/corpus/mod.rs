//! Cleaned corpus records and the filter chain that produces them.
//!
//! Rules run in a fixed order:
//!
//! 1. reject a pool whose title has three or fewer whitespace tokens;
//! 2. drop every answer without a fenced code block;
//! 3. reject a pool left with fewer than two answers.

mod html;
mod stats;

pub use html::{clean_html, clean_html_detailed, has_code_block, Cleaned, HTML_TOKEN};
pub use stats::{pool_stats, PoolHistogram, DEFAULT_EDGES};

use serde::{Deserialize, Serialize};

use crate::dump::RawPool;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub answer_id: u64,
    pub content: String,
    pub votes: i64,
    pub accepted: bool,
    pub has_code: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionPool {
    pub question_id: u64,
    pub title: String,
    pub body: String,
    pub answers: Vec<AnswerRecord>,
    pub has_accepted: bool,
}

impl QuestionPool {
    /// Title and body separated by a blank line.
    pub fn question_text(&self) -> String {
        question_text(&self.title, &self.body)
    }

    pub fn accepted(&self) -> Option<&AnswerRecord> {
        self.answers.iter().find(|a| a.accepted)
    }

    pub fn votes(&self) -> Vec<i64> {
        self.answers.iter().map(|a| a.votes).collect()
    }
}

pub fn question_text(title: &str, body: &str) -> String {
    if body.is_empty() {
        title.to_string()
    } else {
        format!("{title}\n\n{body}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    ShortTitle,
    NoCodeAnswer,
    SmallPool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterOutcome {
    Retained { pool: QuestionPool, dropped_answers: usize },
    Rejected { reason: Rejection, dropped_answers: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input_pools: usize,
    pub short_title: usize,
    pub no_code_answer: usize,
    pub small_pool: usize,
    pub retained: usize,
    /// Answers removed by rule 2 plus answers whose cleaned content was empty.
    pub dropped_answers: usize,
}

impl FilterReport {
    pub fn rejected(&self) -> usize {
        self.short_title + self.no_code_answer + self.small_pool
    }
}

pub const MIN_TITLE_TOKENS: usize = 4;
pub const MIN_POOL_SIZE: usize = 2;

/// Cleans a raw pool. Answers that clean to empty text are dropped; the
/// second value counts them.
pub fn clean_pool(raw: &RawPool) -> (QuestionPool, usize) {
    let mut answers = Vec::with_capacity(raw.answers.len());
    let mut empty = 0;
    for a in &raw.answers {
        let cleaned = clean_html_detailed(&a.body_html);
        if cleaned.text.is_empty() {
            empty += 1;
            continue;
        }
        answers.push(AnswerRecord {
            answer_id: a.answer_id,
            content: cleaned.text,
            votes: a.votes,
            accepted: a.accepted,
            has_code: cleaned.code_blocks > 0,
        });
    }
    let has_accepted = answers.iter().any(|a| a.accepted);
    let title = html_escape::decode_html_entities(&raw.title).trim().to_string();
    let pool = QuestionPool {
        question_id: raw.question_id,
        title,
        body: clean_html(&raw.body_html),
        answers,
        has_accepted,
    };
    (pool, empty)
}

pub fn apply_filters(mut pool: QuestionPool) -> FilterOutcome {
    if pool.title.split_whitespace().count() < MIN_TITLE_TOKENS {
        return FilterOutcome::Rejected {
            reason: Rejection::ShortTitle,
            dropped_answers: 0,
        };
    }
    let before = pool.answers.len();
    pool.answers.retain(|a| a.has_code);
    let dropped = before - pool.answers.len();
    if before > 0 && pool.answers.is_empty() {
        return FilterOutcome::Rejected {
            reason: Rejection::NoCodeAnswer,
            dropped_answers: dropped,
        };
    }
    if pool.answers.len() < MIN_POOL_SIZE {
        return FilterOutcome::Rejected {
            reason: Rejection::SmallPool,
            dropped_answers: dropped,
        };
    }
    pool.answers
        .sort_by(|x, y| y.votes.cmp(&x.votes).then(x.answer_id.cmp(&y.answer_id)));
    pool.has_accepted = pool.answers.iter().any(|a| a.accepted);
    FilterOutcome::Retained {
        pool,
        dropped_answers: dropped,
    }
}

/// Runs the filter chain over already-cleaned pools.
pub fn filter_pools(pools: Vec<QuestionPool>) -> (Vec<QuestionPool>, FilterReport) {
    let mut report = FilterReport {
        input_pools: pools.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    for pool in pools {
        match apply_filters(pool) {
            FilterOutcome::Retained { pool, dropped_answers } => {
                report.dropped_answers += dropped_answers;
                kept.push(pool);
            }
            FilterOutcome::Rejected {
                reason,
                dropped_answers,
            } => {
                report.dropped_answers += dropped_answers;
                match reason {
                    Rejection::ShortTitle => report.short_title += 1,
                    Rejection::NoCodeAnswer => report.no_code_answer += 1,
                    Rejection::SmallPool => report.small_pool += 1,
                }
            }
        }
    }
    report.retained = kept.len();
    (kept, report)
}

/// Cleans and filters raw pools into the training/evaluation corpus.
pub fn build_corpus(raw: &[RawPool]) -> (Vec<QuestionPool>, FilterReport) {
    let mut empty = 0;
    let cleaned: Vec<QuestionPool> = raw
        .iter()
        .map(|r| {
            let (pool, e) = clean_pool(r);
            empty += e;
            pool
        })
        .collect();
    let (kept, mut report) = filter_pools(cleaned);
    report.dropped_answers += empty;
    (kept, report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftPair {
    pub question_id: u64,
    pub question: String,
    pub answer: String,
}

pub const DEFAULT_MIN_VOTES: i64 = 100;

/// (question, accepted answer) pairs whose accepted answer has strictly more
/// than `min_votes` votes.
pub fn build_sft_set(pools: &[QuestionPool], min_votes: i64) -> Vec<SftPair> {
    pools
        .iter()
        .filter(|p| p.has_accepted)
        .filter_map(|p| {
            let acc = p.accepted()?;
            (acc.votes > min_votes).then(|| SftPair {
                question_id: p.question_id,
                question: p.question_text(),
                answer: acc.content.clone(),
            })
        })
        .collect()
}
