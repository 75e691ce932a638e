//! Supervised and listwise training loops (plain SGD with gradient
//! accumulation).
//!
//! One micro-step is one example: an SFT pair or a ranked pool. Gradients of
//! `grad_accum_steps` consecutive micro-steps are averaged and applied as one
//! update. Micro-step gradients inside a window may be computed on several
//! threads; they are always summed in example order.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::SftPair;
use crate::error::{Error, Result};
use crate::lm::{
    combined_loss_and_grad, sequence_score, sft_loss_and_grad, Aggregation, LmParameters, LossGrad, Vocabulary,
};
use crate::metrics::kendall_tau_b;
use crate::ranking::RankedPool;
use crate::retrieval::PromptTemplate;
use crate::rng::substream;
use crate::tokenize::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Sft,
    Mpra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub stage: Stage,
    pub epochs: usize,
    pub learning_rate: f64,
    pub grad_accum_steps: usize,
    pub alpha: f64,
    pub aggregation: Aggregation,
    pub max_seq_len: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Worker threads for gradient computation; does not change results.
    #[serde(skip, default = "one")]
    pub jobs: usize,
}

fn one() -> usize {
    1
}

impl TrainConfig {
    pub fn sft_default() -> Self {
        Self {
            stage: Stage::Sft,
            epochs: 4,
            learning_rate: 0.05,
            grad_accum_steps: 1,
            alpha: 1.0,
            aggregation: Aggregation::MeanLogProb,
            max_seq_len: 256,
            seed: 0,
            shuffle: true,
            jobs: 1,
        }
    }

    pub fn mpra_default() -> Self {
        Self {
            stage: Stage::Mpra,
            learning_rate: 1e-2,
            ..Self::sft_default()
        }
    }

    /// Hyperparameters that differ from the published large-model setup.
    pub fn rescaled(&self) -> Vec<String> {
        let mut out = vec![format!(
            "max_seq_len: published 2048 (SFT) / 512 (MPRA), used {}",
            self.max_seq_len
        )];
        match self.stage {
            Stage::Sft => out.push(format!(
                "learning_rate: published value not given, used {}",
                self.learning_rate
            )),
            Stage::Mpra => {
                out.push(format!("learning_rate: published 1e-4, used {}", self.learning_rate));
                out.push(format!("grad_accum_steps: published 9, used {}", self.grad_accum_steps));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.grad_accum_steps == 0 {
            return Err(Error::Config("grad_accum_steps must be at least 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if self.max_seq_len == 0 {
            return Err(Error::Config("max_seq_len must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub ranking_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub stage: Stage,
    pub seed: u64,
    pub config: TrainConfig,
    pub rescaled: Vec<String>,
    pub epochs: Vec<EpochLog>,
    #[serde(skip)]
    pub wall_clock_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftExample {
    pub prompt: Vec<u32>,
    pub answer: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedExample {
    pub prompt: Vec<u32>,
    /// Best first.
    pub answers: Vec<Vec<u32>>,
    pub r: Vec<f64>,
}

fn encode(vocab: &Vocabulary, text: &str, max_len: usize) -> Vec<u32> {
    let mut ids = vocab.encode(&tokenize(text));
    ids.truncate(max_len);
    ids
}

/// Prompt ids keep the last `max_len` tokens of the zero-shot prompt.
fn encode_prompt(vocab: &Vocabulary, template: &PromptTemplate, question: &str, max_len: usize) -> Vec<u32> {
    let ids = vocab.encode(&tokenize(&template.render(question, None)));
    ids[ids.len().saturating_sub(max_len)..].to_vec()
}

pub fn sft_examples(
    vocab: &Vocabulary,
    template: &PromptTemplate,
    pairs: &[SftPair],
    max_len: usize,
) -> Vec<SftExample> {
    pairs
        .iter()
        .map(|p| SftExample {
            prompt: encode_prompt(vocab, template, &p.question, max_len),
            answer: encode(vocab, &p.answer, max_len),
        })
        .collect()
}

pub fn ranked_examples(
    vocab: &Vocabulary,
    template: &PromptTemplate,
    pools: &[RankedPool],
    max_len: usize,
) -> Result<Vec<RankedExample>> {
    pools
        .iter()
        .map(|p| {
            if p.answers.len() < 2 {
                return Err(Error::domain(format!(
                    "pool {} has {} answer(s); listwise training needs two",
                    p.question_id,
                    p.answers.len()
                )));
            }
            Ok(RankedExample {
                prompt: encode_prompt(vocab, template, &p.question_text(), max_len),
                answers: p
                    .answers
                    .iter()
                    .map(|a| encode(vocab, &a.answer.content, max_len))
                    .collect(),
                r: p.r_values(),
            })
        })
        .collect()
}

/// Mean over pools of Kendall tau-b between model scores and `r`. Pools where
/// the coefficient is undefined count as zero.
pub fn ranking_agreement(p: &LmParameters, pools: &[RankedExample], mode: Aggregation) -> Result<f64> {
    if pools.is_empty() {
        return Err(Error::domain("no pools to measure agreement on"));
    }
    let mut total = 0.0;
    for pool in pools {
        let scores: Vec<f64> = pool
            .answers
            .iter()
            .map(|a| Ok(sequence_score(p, &pool.prompt, a, mode)?.aggregate))
            .collect::<Result<_>>()?;
        total += kendall_tau_b(&scores, &pool.r)?.unwrap_or(0.0);
    }
    Ok(total / pools.len() as f64)
}

fn with_workers<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn run_loop<T, F, A>(
    cfg: &TrainConfig,
    data: &[T],
    init: LmParameters,
    item: F,
    agreement: A,
) -> Result<(LmParameters, TrainLog)>
where
    T: Sync,
    F: Fn(&LmParameters, &T) -> Result<LossGrad> + Sync,
    A: Fn(&LmParameters) -> Result<Option<f64>>,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::domain("training set is empty"));
    }
    let start = Instant::now();
    let mut rng = substream(cfg.seed, "train/shuffle");
    let mut p = init;
    let mut log = TrainLog {
        stage: cfg.stage,
        seed: cfg.seed,
        config: cfg.clone(),
        rescaled: cfg.rescaled(),
        epochs: Vec::new(),
        wall_clock_ms: 0,
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=cfg.epochs {
        let last_good = p.clone();
        let diverged = |p: LmParameters| Error::Diverged {
            epoch,
            last_good: Box::new(p),
        };
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for window in order.chunks(cfg.grad_accum_steps) {
            let results: Vec<Result<LossGrad>> = if cfg.jobs > 1 {
                window.par_iter().map(|&i| item(&p, &data[i])).collect()
            } else {
                window.iter().map(|&i| item(&p, &data[i])).collect()
            };
            let mut grad = LmParameters::zeros(p.dims);
            for r in results {
                let r = r?;
                if !r.loss.is_finite() {
                    return Err(diverged(last_good));
                }
                loss_sum += r.loss;
                grad.axpy(1.0, &r.grad);
            }
            p.axpy(-cfg.learning_rate / window.len() as f64, &grad);
            if !p.all_finite() {
                return Err(diverged(last_good));
            }
        }
        log.epochs.push(EpochLog {
            epoch,
            mean_loss: loss_sum / data.len() as f64,
            ranking_agreement: agreement(&p)?,
        });
    }
    log.wall_clock_ms = start.elapsed().as_millis();
    Ok((p, log))
}

/// Foundational supervised stage.
pub fn train_sft(cfg: &TrainConfig, data: &[SftExample], init: LmParameters) -> Result<(LmParameters, TrainLog)> {
    let usable: Vec<&SftExample> = data.iter().filter(|e| !e.answer.is_empty()).collect();
    if usable.is_empty() {
        return Err(Error::domain("no supervised pairs with a nonempty answer"));
    }
    with_workers(cfg.jobs, || {
        run_loop(
            cfg,
            &usable,
            init,
            |p, e| sft_loss_and_grad(p, &[(e.prompt.clone(), e.answer.clone())]),
            |_| Ok(None),
        )
    })?
}

/// Listwise stage: minimizes the combined loss on each pool.
pub fn train_mpra(cfg: &TrainConfig, data: &[RankedExample], init: LmParameters) -> Result<(LmParameters, TrainLog)> {
    if let Some(bad) = data
        .iter()
        .find(|e| e.answers.len() < 2 || e.answers.len() != e.r.len())
    {
        return Err(Error::domain(format!(
            "ranked example with {} answers and {} scores",
            bad.answers.len(),
            bad.r.len()
        )));
    }
    with_workers(cfg.jobs, || {
        run_loop(
            cfg,
            data,
            init,
            |p, e| combined_loss_and_grad(p, &e.prompt, &e.answers, cfg.alpha, cfg.aggregation),
            |p| ranking_agreement(p, data, cfg.aggregation).map(Some),
        )
    })?
}
