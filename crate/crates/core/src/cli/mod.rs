//! The `ccqa` command line.
//!
//! Every subcommand reads the files named in the pipeline config (or the
//! `--input`/`--output` overrides), writes its artifacts plus a manifest,
//! and reports failures as one JSON record on stderr.

mod commands;
mod manifest;

pub use manifest::{FileDigest, Manifest};

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::scoring::{ContentMode, ScoreWeights};

#[derive(Debug, Parser)]
#[command(name = "ccqa", version, about = "Preference-aligned code QA pipeline")]
pub struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, env = "CCQA_CONFIG", global = true)]
    pub config: Option<PathBuf>,
    /// Run seed; overrides the config.
    #[arg(long, env = "CCQA_SEED", global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Score weights `bias,vote,content`.
    #[arg(long, global = true)]
    pub weights: Option<String>,
    /// Content score mode: `exact` or `geomean`.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Prompt template file with {{EXAMPLE_Q}}, {{EXAMPLE_A}} and {{QUESTION}}.
    #[arg(long, global = true)]
    pub template: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Io {
    /// Input file; defaults to the path named in the config.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output file or directory; defaults to the path named in the config.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    /// Dump shard(s); repeatable.
    #[arg(long)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub io: Io,
    /// Starting checkpoint (train-mpra defaults to this config's SFT run).
    #[arg(long)]
    pub init: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub io: Io,
    /// Model checkpoint; defaults to this config's MPRA run.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub io: Io,
    #[arg(long)]
    pub generations: Option<PathBuf>,
    /// Preference scores, one `{question_id, score}` record per line.
    #[arg(long)]
    pub preference: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub io: Io,
    /// Numeric fields to correlate, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "bleu4,rouge2_f,chrf")]
    pub columns: Vec<String>,
    /// Field the columns are correlated against.
    #[arg(long, default_value = "preference")]
    pub target: String,
}

#[derive(Debug, Clone, Args)]
pub struct GradCheckArgs {
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Coordinates sampled per tensor (smaller tensors are checked fully).
    #[arg(long, default_value_t = 200)]
    pub coords: usize,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Optional JSON report.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Defaults to the configured corpus path.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub pools: usize,
    /// Fewest answers per pool.
    #[arg(long, default_value_t = 2)]
    pub min_answers: usize,
    /// Most answers per pool.
    #[arg(long, default_value_t = 5)]
    pub max_answers: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse dump XML into raw question pools.
    Ingest(IngestArgs),
    /// Clean and filter raw pools into the corpus and SFT pairs.
    BuildCorpus(Io),
    /// Histogram of answer-pool sizes.
    Stats(Io),
    /// Per-answer preference scores.
    Score(Io),
    /// Order each pool by preference score.
    Rank(Io),
    /// Supervised stage on accepted answers.
    TrainSft(TrainArgs),
    /// Listwise stage on ranked pools.
    TrainMpra(TrainArgs),
    /// Build the retrieval bank index.
    RetrieveIndex(Io),
    /// One-shot generation for held-out questions.
    Generate(GenerateArgs),
    /// Overlap metrics and preference correlations.
    Evaluate(EvaluateArgs),
    /// Correlation table between record columns.
    Correlate(CorrelateArgs),
    /// Finite-difference check of every loss gradient.
    GradCheck(GradCheckArgs),
    /// Synthetic pools whose content determines preference.
    SynthPools(SynthArgs),
}

/// Loaded config with command-line overrides applied.
pub struct Context {
    pub cfg: PipelineConfig,
    /// Hash of the effective config, taken before paths are resolved.
    pub hash: String,
    pub template: Option<PathBuf>,
}

impl Cli {
    pub fn context(&self) -> Result<Context> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                PipelineConfig::from_toml(&text)?
            }
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(jobs) = self.jobs {
            cfg.jobs = jobs;
        }
        if let Some(w) = &self.weights {
            cfg.scoring.weights = ScoreWeights::parse(w)?;
        }
        if let Some(m) = &self.mode {
            cfg.scoring.mode = m.parse::<ContentMode>()?;
        }
        if cfg.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        for t in [&mut cfg.train.sft, &mut cfg.train.mpra] {
            t.seed = cfg.seed;
            t.jobs = cfg.jobs;
        }
        cfg.validate()?;
        let hash = {
            let mut canonical = cfg.clone();
            canonical.jobs = 1;
            canonical.hash()
        };
        if let Some(p) = &self.config {
            cfg.resolve(p.parent().unwrap_or(Path::new("")));
        }
        let template = self.template.clone().or_else(|| cfg.retrieval.template.clone());
        Ok(Context { cfg, hash, template })
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = cli.context()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.cfg.jobs)
        .build_global()
        .ok();
    commands::dispatch(&ctx, cli.command)
}

/// JSON error record printed on failure.
pub fn error_record(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

/// Runs the binary: parses `args`, executes, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", error_record("usage", e.to_string().trim()));
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_record(e.kind(), &e.to_string()));
            1
        }
    }
}
