//! Preference-ordered answer sets and the listwise (Plackett-Luce) ranking
//! probabilities built on model scores.
//!
//! For scores `m_1..m_N` of an order `p_1 ≻ … ≻ p_N`:
//!
//! ```text
//! P(order) = prod_{i=1}^{N-1} exp(m_i) / sum_{k=i}^{N} exp(m_k)
//! L        = -log P(order)
//! ```
//!
//! With `N = 2` this is the Bradley-Terry probability `logistic(m_1 - m_2)`.

use serde::{Deserialize, Serialize};

use crate::corpus::AnswerRecord;
use crate::error::{Error, Result};
use crate::scoring::{log_logistic, ContentMode, PreferenceVector, ScoreWeights, ScoredPool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Equal `r`; the answer with more votes goes first.
    Votes,
    /// Equal `r` and votes; the smaller answer id goes first.
    AnswerId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TieBreak {
    /// 1-based rank of the later answer of the tied pair.
    pub position: usize,
    pub rule: TieRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAnswer {
    pub rank: usize,
    #[serde(flatten)]
    pub answer: AnswerRecord,
    #[serde(flatten)]
    pub scores: PreferenceVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPool {
    pub question_id: u64,
    pub title: String,
    pub body: String,
    pub has_accepted: bool,
    pub weights: ScoreWeights,
    pub mode: ContentMode,
    pub answers: Vec<RankedAnswer>,
    pub tie_break_trace: Vec<TieBreak>,
}

impl RankedPool {
    pub fn question_text(&self) -> String {
        crate::corpus::question_text(&self.title, &self.body)
    }

    pub fn top(&self) -> Option<&RankedAnswer> {
        self.answers.first()
    }

    pub fn accepted(&self) -> Option<&RankedAnswer> {
        self.answers.iter().find(|a| a.answer.accepted)
    }

    pub fn r_values(&self) -> Vec<f64> {
        self.answers.iter().map(|a| a.scores.r).collect()
    }
}

/// Sorts by descending `r`, then descending votes, then ascending answer id.
/// `max_pool_size` keeps only the leading answers when set.
pub fn build_ranked_pool(scored: ScoredPool, max_pool_size: Option<usize>) -> RankedPool {
    let mut answers = scored.answers;
    answers.sort_by(|x, y| {
        y.scores
            .r
            .total_cmp(&x.scores.r)
            .then(y.answer.votes.cmp(&x.answer.votes))
            .then(x.answer.answer_id.cmp(&y.answer.answer_id))
    });
    let mut trace = Vec::new();
    for i in 1..answers.len() {
        let (prev, cur) = (&answers[i - 1], &answers[i]);
        if prev.scores.r == cur.scores.r {
            let rule = if prev.answer.votes != cur.answer.votes {
                TieRule::Votes
            } else {
                TieRule::AnswerId
            };
            trace.push(TieBreak { position: i + 1, rule });
        }
    }
    if let Some(max) = max_pool_size {
        answers.truncate(max);
        trace.retain(|t| t.position <= max);
    }
    RankedPool {
        question_id: scored.question_id,
        title: scored.title,
        body: scored.body,
        has_accepted: scored.has_accepted,
        weights: scored.weights,
        mode: scored.mode,
        answers: answers
            .into_iter()
            .enumerate()
            .map(|(i, a)| RankedAnswer {
                rank: i + 1,
                answer: a.answer,
                scores: a.scores,
            })
            .collect(),
        tie_break_trace: trace,
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.len() < 2 {
        return Err(Error::domain(format!(
            "ranking needs at least two scores, got {}",
            scores.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::domain(format!("non-finite ranking score {bad}")));
    }
    Ok(())
}

/// Probability that `p_1` wins against the whole list.
pub fn first_round_prob(scores: &[f64]) -> Result<f64> {
    check_scores(scores)?;
    Ok((scores[0] - log_sum_exp(scores)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderProb {
    pub prob: f64,
    pub log_prob: f64,
}

pub fn plackett_luce_prob(scores: &[f64]) -> Result<OrderProb> {
    check_scores(scores)?;
    let log_prob: f64 = (0..scores.len() - 1)
        .map(|i| scores[i] - log_sum_exp(&scores[i..]))
        .sum();
    Ok(OrderProb {
        prob: log_prob.exp(),
        log_prob,
    })
}

/// Pairwise Bradley-Terry preference of `i` over `j`.
pub fn bt_prob(score_i: f64, score_j: f64) -> f64 {
    log_logistic(score_i - score_j).exp()
}

/// Listwise negative log-likelihood of the given order and its gradient with
/// respect to each score.
///
/// `dL/dm_k = sum_{i <= min(k, N-1)} softmax_i(m)_k - [k < N]`, where
/// `softmax_i` runs over the suffix starting at `i`.
pub fn listwise_nll(scores: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_scores(scores)?;
    let n = scores.len();
    // suffix log-sum-exp, computed right to left
    let mut suffix = vec![0.0; n];
    suffix[n - 1] = scores[n - 1];
    for i in (0..n - 1).rev() {
        let (a, b) = (scores[i], suffix[i + 1]);
        let hi = a.max(b);
        suffix[i] = hi + ((a - hi).exp() + (b - hi).exp()).ln();
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    for i in 0..n - 1 {
        loss += suffix[i] - scores[i];
        grad[i] -= 1.0;
        for k in i..n {
            grad[k] += (scores[k] - suffix[i]).exp();
        }
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn scored(r: &[f64], votes: &[i64], ids: &[u64]) -> ScoredPool {
        ScoredPool {
            question_id: 1,
            title: "t".into(),
            body: String::new(),
            has_accepted: false,
            weights: ScoreWeights::default(),
            mode: ContentMode::GeometricMean,
            answers: r
                .iter()
                .zip(votes)
                .zip(ids)
                .map(|((&r, &votes), &id)| crate::scoring::ScoredAnswer {
                    answer: AnswerRecord {
                        answer_id: id,
                        content: format!("a{id}"),
                        votes,
                        accepted: false,
                        has_code: false,
                    },
                    scores: PreferenceVector {
                        s_q: 0.0,
                        s_u: 0.0,
                        s_l: 0.0,
                        r,
                    },
                })
                .collect(),
        }
    }

    fn ids(p: &RankedPool) -> Vec<u64> {
        p.answers.iter().map(|a| a.answer.answer_id).collect()
    }

    #[test]
    fn sorts_by_r() {
        let p = build_ranked_pool(scored(&[0.2, 0.9, 0.5], &[0, 0, 0], &[1, 2, 3]), None);
        assert_eq!(ids(&p), vec![2, 3, 1]);
        assert!(p.tie_break_trace.is_empty());
        assert_eq!(p.answers[2].rank, 3);
    }

    #[test]
    fn ties_by_votes_then_id() {
        let p = build_ranked_pool(scored(&[0.5, 0.5], &[3, 10], &[1, 2]), None);
        assert_eq!(ids(&p), vec![2, 1]);
        assert_eq!(
            p.tie_break_trace,
            vec![TieBreak {
                position: 2,
                rule: TieRule::Votes
            }]
        );
        let p = build_ranked_pool(scored(&[0.5, 0.5], &[4, 4], &[42, 7]), None);
        assert_eq!(ids(&p), vec![7, 42]);
        assert_eq!(p.tie_break_trace[0].rule, TieRule::AnswerId);
    }

    #[test]
    fn truncation_keeps_leaders() {
        let p = build_ranked_pool(scored(&[0.1, 0.3, 0.2, 0.4], &[0; 4], &[1, 2, 3, 4]), Some(2));
        assert_eq!(ids(&p), vec![4, 2]);
    }

    #[test]
    fn first_round_examples() {
        assert!((first_round_prob(&[0.3, 0.3, 0.3]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((first_round_prob(&[2f64.ln(), 0.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((first_round_prob(&[1.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(first_round_prob(&[1.0]).is_err());
        assert!(first_round_prob(&[1.0, f64::NAN]).is_err());
        assert!(first_round_prob(&[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn plackett_luce_examples() {
        assert!((plackett_luce_prob(&[0.0; 3]).unwrap().prob - 1.0 / 6.0).abs() < 1e-15);
        // oracle: brute-force product of the three softmax factors at 40 digits
        let p = plackett_luce_prob(&[2.0, 1.0, 0.0, -1.0]).unwrap();
        assert!((p.prob - 0.31315489128052754).abs() < 1e-12, "{}", p.prob);
        assert!((p.log_prob - p.prob.ln()).abs() < 1e-12);
        let two = plackett_luce_prob(&[0.7, -0.2]).unwrap().prob;
        assert!((two - first_round_prob(&[0.7, -0.2]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn bt_examples() {
        assert_eq!(bt_prob(0.4, 0.4), 0.5);
        assert!((bt_prob(3f64.ln(), 0.0) - 0.75).abs() < 1e-15);
        assert!((bt_prob(1.3, -0.4) + bt_prob(-0.4, 1.3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn extreme_scores_stay_finite() {
        let p = plackett_luce_prob(&[800.0, -800.0, 0.0]).unwrap();
        assert!(p.log_prob.is_finite());
        let (loss, grad) = listwise_nll(&[-900.0, 900.0]).unwrap();
        assert!((loss - 1800.0).abs() < 1e-9);
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn listwise_equal_scores_is_log_factorial() {
        let (loss, _) = listwise_nll(&[0.25; 3]).unwrap();
        assert!((loss - 6f64.ln()).abs() < 1e-12);
        let (loss, _) = listwise_nll(&[1.0; 5]).unwrap();
        assert!((loss - 120f64.ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn orders_sum_to_one(scores in prop::collection::vec(-5.0f64..5.0, 2..=5)) {
            let n = scores.len();
            let total: f64 = permutations(n)
                .iter()
                .map(|perm| {
                    let s: Vec<f64> = perm.iter().map(|&i| scores[i]).collect();
                    plackett_luce_prob(&s).unwrap().prob
                })
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }

        #[test]
        fn shift_invariance(scores in prop::collection::vec(-5.0f64..5.0, 2..=8), c in -50.0f64..50.0) {
            let moved: Vec<f64> = scores.iter().map(|s| s + c).collect();
            let a = plackett_luce_prob(&scores).unwrap().prob;
            let b = plackett_luce_prob(&moved).unwrap().prob;
            prop_assert!((a - b).abs() < 1e-12);
            let a = first_round_prob(&scores).unwrap();
            let b = first_round_prob(&moved).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn two_item_list_is_bradley_terry(a in -20.0f64..20.0, b in -20.0f64..20.0) {
            let pl = plackett_luce_prob(&[a, b]).unwrap().prob;
            prop_assert!((pl - bt_prob(a, b)).abs() < 1e-13);
            let (loss, _) = listwise_nll(&[a, b]).unwrap();
            prop_assert!((loss + log_logistic(a - b)).abs() < 1e-12);
        }

        #[test]
        fn listwise_gradient_matches_differences(scores in prop::collection::vec(-4.0f64..4.0, 2..=7)) {
            let (_, grad) = listwise_nll(&scores).unwrap();
            let h = 1e-6;
            for k in 0..scores.len() {
                let mut up = scores.clone();
                up[k] += h;
                let mut dn = scores.clone();
                dn[k] -= h;
                let num = (listwise_nll(&up).unwrap().0 - listwise_nll(&dn).unwrap().0) / (2.0 * h);
                prop_assert!((num - grad[k]).abs() < 1e-6);
            }
            prop_assert!(grad.iter().sum::<f64>().abs() < 1e-12);
        }

        #[test]
        fn order_invariant_under_increasing_transform(raw in prop::collection::vec(-16i32..16, 2..10)) {
            let r: Vec<f64> = raw.iter().map(|&x| x as f64 / 4.0).collect();
            let t: Vec<f64> = r.iter().map(|x| x * x * x + 2.0 * x).collect();
            let n = r.len();
            let votes = vec![0; n];
            let idv: Vec<u64> = (1..=n as u64).collect();
            let a = build_ranked_pool(scored(&r, &votes, &idv), None);
            let b = build_ranked_pool(scored(&t, &votes, &idv), None);
            prop_assert_eq!(ids(&a), ids(&b));
            let rv = a.r_values();
            prop_assert!(rv.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
