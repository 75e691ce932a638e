//! Synthetic answer pools whose token content determines preference.
//!
//! Each answer holds eight tokens drawn from a "good" set (`ok0..ok9`) and a
//! "bad" set (`ko0..ko9`). Votes grow with the number of good tokens, so any
//! ranking derived from votes orders answers by good-token count. Question
//! titles use neutral words (`w0..w19`).

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnswerRecord, QuestionPool};
use crate::error::{Error, Result};
use crate::rng::substream;

pub const ANSWER_LEN: usize = 8;
pub const TITLE_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub pools: usize,
    pub min_answers: usize,
    pub max_answers: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            pools: 50,
            min_answers: 2,
            max_answers: 5,
            seed: 0,
        }
    }
}

fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn good_words() -> Vec<String> {
    words("ok", 10)
}

pub fn bad_words() -> Vec<String> {
    words("ko", 10)
}

pub fn neutral_words() -> Vec<String> {
    words("w", 20)
}

/// Number of good tokens in a synthetic answer.
pub fn good_count(content: &str) -> usize {
    content.split_whitespace().filter(|t| t.starts_with("ok")).count()
}

pub fn synth_pools(cfg: &SynthConfig) -> Result<Vec<QuestionPool>> {
    if cfg.min_answers < 2 || cfg.min_answers > cfg.max_answers || cfg.max_answers > ANSWER_LEN + 1 {
        return Err(Error::domain(format!(
            "answer count range [{}, {}] must lie within [2, {}]",
            cfg.min_answers,
            cfg.max_answers,
            ANSWER_LEN + 1
        )));
    }
    let mut rng = substream(cfg.seed, "synth");
    let (good, bad, neutral) = (good_words(), bad_words(), neutral_words());
    let mut out = Vec::with_capacity(cfg.pools);
    for p in 0..cfg.pools {
        let qid = 1000 + p as u64;
        let title: Vec<&str> = (0..TITLE_LEN)
            .map(|_| neutral.choose(&mut rng).unwrap().as_str())
            .collect();
        let n = rng.random_range(cfg.min_answers..=cfg.max_answers);
        let mut counts: Vec<usize> = (0..=ANSWER_LEN).collect();
        counts.shuffle(&mut rng);
        counts.truncate(n);
        let accepted = rng.random_range(0..n);
        let answers = counts
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let mut toks: Vec<&str> = (0..ANSWER_LEN)
                    .map(|j| {
                        let set = if j < g { &good } else { &bad };
                        set.choose(&mut rng).unwrap().as_str()
                    })
                    .collect();
                toks.shuffle(&mut rng);
                AnswerRecord {
                    answer_id: qid * 10 + i as u64,
                    content: toks.join(" "),
                    votes: 100 + 40 * g as i64 + rng.random_range(0..10),
                    accepted: i == accepted,
                    has_code: true,
                }
            })
            .collect();
        out.push(QuestionPool {
            question_id: qid,
            title: title.join(" "),
            body: String::new(),
            answers,
            has_accepted: true,
        });
    }
    Ok(out)
}
