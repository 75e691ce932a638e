use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlation::{correlation_table, CorrelationRow};
use super::embedding::{bertscore_f1, Side, TokenEmbeddingProvider};
use super::{chrf, rouge2, BleuStats};
use crate::error::Result;
use crate::ranking::RankedPool;
use crate::tokenize::tokenize;

/// Which answer of a pool serves as the evaluation reference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceChoice {
    #[default]
    HighestR,
    Accepted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub question_id: u64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleMetrics {
    pub question_id: u64,
    pub bleu4: f64,
    pub rouge2_p: f64,
    pub rouge2_r: f64,
    pub rouge2_f: f64,
    pub chrf: f64,
    pub bertscore: Option<f64>,
    pub preference: Option<f64>,
    pub bleu_stats: BleuStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub examples: usize,
    pub skipped: usize,
    pub corpus_bleu4: f64,
    pub mean_bleu4: f64,
    pub mean_rouge2_f: f64,
    pub mean_chrf: f64,
    pub mean_bertscore: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub examples: Vec<ExampleMetrics>,
    pub summary: MetricSummary,
    pub correlations: Vec<CorrelationRow>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

impl MetricReport {
    /// Corpus BLEU recomputed from the stored per-example counts.
    pub fn pooled_bleu4(&self) -> f64 {
        if self.examples.is_empty() {
            return 0.0;
        }
        let mut pooled = BleuStats::default();
        for e in &self.examples {
            pooled.add(&e.bleu_stats);
        }
        pooled.score()
    }

    pub fn summary_table(&self) -> String {
        let s = &self.summary;
        let mut out = String::new();
        let bert = s
            .mean_bertscore
            .map_or("-".to_string(), |b| format!("{:.2}", 100.0 * b));
        writeln!(
            out,
            "{:<14}| {:>7} | {:>7} | {:>7} | {:>9}",
            "", "BLEU4", "ROUGE2", "CHRF", "BERTScore"
        )
        .unwrap();
        writeln!(
            out,
            "{:<14}| {:>7.2} | {:>7} | {:>7} | {:>9}",
            "corpus",
            100.0 * s.corpus_bleu4,
            "-",
            "-",
            "-"
        )
        .unwrap();
        writeln!(
            out,
            "{:<14}| {:>7.2} | {:>7.2} | {:>7.2} | {:>9}",
            "sentence mean",
            100.0 * s.mean_bleu4,
            100.0 * s.mean_rouge2_f,
            s.mean_chrf,
            bert
        )
        .unwrap();
        writeln!(out, "examples: {}  skipped: {}", s.examples, s.skipped).unwrap();
        if !self.correlations.is_empty() {
            writeln!(out).unwrap();
            writeln!(
                out,
                "{:<14}| {:>8} | {:>8} | {:>8}",
                "vs preference", "Kendall", "Spearman", "Pearson"
            )
            .unwrap();
            for row in &self.correlations {
                writeln!(
                    out,
                    "{:<14}| {:>8} | {:>8} | {:>8}",
                    row.metric,
                    fmt_opt(row.kendall),
                    fmt_opt(row.spearman),
                    fmt_opt(row.pearson)
                )
                .unwrap();
            }
        }
        out
    }
}

/// Scores generations against each pool's reference answer. Pools without a
/// generation (or without the requested reference) are skipped and counted.
pub fn evaluate_run(
    pools: &[RankedPool],
    generations: &[Generation],
    reference: ReferenceChoice,
    preference: Option<&HashMap<u64, f64>>,
    embeddings: Option<&dyn TokenEmbeddingProvider>,
) -> Result<MetricReport> {
    let by_id: HashMap<u64, &str> = generations.iter().map(|g| (g.question_id, g.text.as_str())).collect();
    let jobs: Vec<(u64, &str, &str)> = pools
        .iter()
        .filter_map(|p| {
            let r = match reference {
                ReferenceChoice::HighestR => p.top(),
                ReferenceChoice::Accepted => p.accepted(),
            }?;
            let hyp = by_id.get(&p.question_id)?;
            Some((p.question_id, r.answer.content.as_str(), *hyp))
        })
        .collect();
    let skipped = pools.len() - jobs.len();
    let examples: Vec<ExampleMetrics> = jobs
        .par_iter()
        .map(|&(qid, r, h)| {
            let (rt, ht) = (tokenize(r), tokenize(h));
            let stats = BleuStats::from_pair(&rt, &ht);
            let rg = rouge2(&rt, &ht);
            let bertscore = match embeddings {
                Some(e) => match (e.vectors(qid, Side::Reference)?, e.vectors(qid, Side::Hypothesis)?) {
                    (Some(rv), Some(hv)) => bertscore_f1(rv, hv),
                    _ => None,
                },
                None => None,
            };
            Ok(ExampleMetrics {
                question_id: qid,
                bleu4: stats.score(),
                rouge2_p: rg.precision,
                rouge2_r: rg.recall,
                rouge2_f: rg.f1,
                chrf: chrf(r, h),
                bertscore,
                preference: preference.and_then(|m| m.get(&qid).copied()),
                bleu_stats: stats,
            })
        })
        .collect::<Result<_>>()?;

    let bert: Vec<f64> = examples.iter().filter_map(|e| e.bertscore).collect();
    let mut report = MetricReport {
        summary: MetricSummary {
            examples: examples.len(),
            skipped,
            corpus_bleu4: 0.0,
            mean_bleu4: mean(examples.iter().map(|e| e.bleu4)),
            mean_rouge2_f: mean(examples.iter().map(|e| e.rouge2_f)),
            mean_chrf: mean(examples.iter().map(|e| e.chrf)),
            mean_bertscore: (!bert.is_empty()).then(|| mean(bert.iter().copied())),
        },
        examples,
        correlations: Vec::new(),
    };
    report.summary.corpus_bleu4 = report.pooled_bleu4();

    if preference.is_some() {
        let with: Vec<&ExampleMetrics> = report.examples.iter().filter(|e| e.preference.is_some()).collect();
        if with.len() >= 2 {
            let target: Vec<f64> = with.iter().map(|e| e.preference.unwrap()).collect();
            let cols = vec![
                ("BLEU4".to_string(), with.iter().map(|e| e.bleu4).collect()),
                ("ROUGE2".to_string(), with.iter().map(|e| e.rouge2_f).collect()),
                ("CHRF".to_string(), with.iter().map(|e| e.chrf).collect()),
            ];
            report.correlations = correlation_table(&cols, &target)?;
        }
    }
    Ok(report)
}
