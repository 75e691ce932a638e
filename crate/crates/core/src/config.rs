//! Pipeline configuration: one TOML file, relative paths resolved against
//! the file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lm::{Aggregation, LmDims};
use crate::metrics::ReferenceChoice;
use crate::scoring::{ContentMode, ScoreWeights};
use crate::train::{Stage, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// One or more `Posts.xml` shards.
    pub dump: Vec<PathBuf>,
    pub raw_pools: PathBuf,
    pub corpus: PathBuf,
    pub sft_pairs: PathBuf,
    pub scored: PathBuf,
    pub ranked: PathBuf,
    pub runs: PathBuf,
    pub index: PathBuf,
    pub generations: PathBuf,
    pub reports: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preference: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        let out = PathBuf::from("out");
        Self {
            dump: vec![PathBuf::from("Posts.xml")],
            raw_pools: out.join("raw_pools.jsonl"),
            corpus: out.join("corpus.jsonl"),
            sft_pairs: out.join("sft_pairs.jsonl"),
            scored: out.join("scored.jsonl"),
            ranked: out.join("ranked.jsonl"),
            runs: out.join("runs"),
            index: out.join("index.json"),
            generations: out.join("generations.jsonl"),
            reports: out.join("reports"),
            preference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSettings {
    pub tag_filter: String,
    /// RFC 3339 timestamp; answers created later are dropped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<String>,
}

impl Default for IngestSettings {
    fn default() -> Self {
        Self {
            tag_filter: "python".into(),
            cutoff: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSettings {
    /// Accepted answers need strictly more votes than this to enter SFT.
    pub sft_min_votes: i64,
    /// Share of questions (by id hash) held out for evaluation, in percent.
    pub eval_percent: u64,
}

impl Default for CorpusSettings {
    fn default() -> Self {
        Self {
            sft_min_votes: crate::corpus::DEFAULT_MIN_VOTES,
            eval_percent: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ProviderSettings {
    Constant { value: f64 },
    File { path: PathBuf },
    Command { program: String, args: Vec<String> },
}

impl Default for ProviderSettings {
    fn default() -> Self {
        ProviderSettings::Constant { value: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSettings {
    pub weights: ScoreWeights,
    pub mode: ContentMode,
    pub provider: ProviderSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_pool_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerSettings {
    /// Tokens rarer than this map to UNK.
    pub min_freq: usize,
}

impl Default for TokenizerSettings {
    fn default() -> Self {
        Self { min_freq: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub context: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub init_scale: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let d = LmDims::new(0);
        Self {
            context: d.context,
            embed_dim: d.embed_dim,
            hidden: d.hidden,
            init_scale: 1.0,
        }
    }
}

impl ModelSettings {
    pub fn dims(&self, vocab_size: usize) -> LmDims {
        LmDims {
            vocab_size,
            context: self.context,
            embed_dim: self.embed_dim,
            hidden: self.hidden,
        }
    }
}

/// Per-stage training settings. A partial table in the file fills missing
/// keys from that stage's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TrainTables")]
pub struct TrainSettings {
    pub sft: TrainConfig,
    pub mpra: TrainConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainTable {
    stage: Option<Stage>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    grad_accum_steps: Option<usize>,
    alpha: Option<f64>,
    aggregation: Option<Aggregation>,
    max_seq_len: Option<usize>,
    seed: Option<u64>,
    shuffle: Option<bool>,
}

impl TrainTable {
    fn apply(self, base: TrainConfig) -> std::result::Result<TrainConfig, String> {
        if self.stage.is_some_and(|s| s != base.stage) {
            return Err(format!("train table for {:?} declares another stage", base.stage));
        }
        Ok(TrainConfig {
            stage: base.stage,
            epochs: self.epochs.unwrap_or(base.epochs),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            grad_accum_steps: self.grad_accum_steps.unwrap_or(base.grad_accum_steps),
            alpha: self.alpha.unwrap_or(base.alpha),
            aggregation: self.aggregation.unwrap_or(base.aggregation),
            max_seq_len: self.max_seq_len.unwrap_or(base.max_seq_len),
            seed: self.seed.unwrap_or(base.seed),
            shuffle: self.shuffle.unwrap_or(base.shuffle),
            jobs: base.jobs,
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainTables {
    sft: TrainTable,
    mpra: TrainTable,
}

impl TryFrom<TrainTables> for TrainSettings {
    type Error = String;

    fn try_from(t: TrainTables) -> std::result::Result<Self, String> {
        Ok(Self {
            sft: t.sft.apply(TrainConfig::sft_default())?,
            mpra: t.mpra.apply(TrainConfig::mpra_default())?,
        })
    }
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            sft: TrainConfig::sft_default(),
            mpra: TrainConfig::mpra_default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bank {
    /// Only training-split questions are retrievable.
    #[default]
    Train,
    All,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrieverKind {
    #[default]
    Bm25,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSettings {
    pub k: usize,
    pub bank: Bank,
    pub retriever: RetrieverKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template: Option<PathBuf>,
    /// Question vectors for the dense retriever.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vectors: Option<PathBuf>,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        Self {
            k: 1,
            bank: Bank::default(),
            retriever: RetrieverKind::default(),
            template: None,
            vectors: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSettings {
    pub temperature: f64,
    pub top_p: f64,
    pub max_gen_len: usize,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            temperature: 0.2,
            top_p: 0.95,
            max_gen_len: 512,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    pub reference: ReferenceChoice,
    /// Token vectors for the embedding-similarity column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub jobs: usize,
    pub paths: Paths,
    pub ingest: IngestSettings,
    pub corpus: CorpusSettings,
    pub scoring: ScoringSettings,
    pub tokenizer: TokenizerSettings,
    pub model: ModelSettings,
    pub train: TrainSettings,
    pub retrieval: RetrievalSettings,
    pub generation: GenerationSettings,
    pub evaluation: EvaluationSettings,
    /// Expected sha256 of input files, keyed by path as written here.
    pub digests: BTreeMap<String, String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 1,
            paths: Paths::default(),
            ingest: IngestSettings::default(),
            corpus: CorpusSettings::default(),
            scoring: ScoringSettings::default(),
            tokenizer: TokenizerSettings::default(),
            model: ModelSettings::default(),
            train: TrainSettings::default(),
            retrieval: RetrievalSettings::default(),
            generation: GenerationSettings::default(),
            evaluation: EvaluationSettings::default(),
            digests: BTreeMap::new(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        paths.dump.iter_mut().for_each(fix);
        for p in [
            &mut paths.raw_pools,
            &mut paths.corpus,
            &mut paths.sft_pairs,
            &mut paths.scored,
            &mut paths.ranked,
            &mut paths.runs,
            &mut paths.index,
            &mut paths.generations,
            &mut paths.reports,
        ] {
            fix(p);
        }
        for p in [
            paths.preference.as_mut(),
            self.retrieval.template.as_mut(),
            self.retrieval.vectors.as_mut(),
            self.evaluation.embeddings.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let ProviderSettings::File { path } = &mut self.scoring.provider {
            fix(path);
        }
        self.digests = std::mem::take(&mut self.digests)
            .into_iter()
            .map(|(k, v)| {
                let p = Path::new(&k);
                let key = if p.is_relative() { base.join(p) } else { p.to_path_buf() };
                (key.to_string_lossy().into_owned(), v)
            })
            .collect();
    }

    pub fn validate(&self) -> Result<()> {
        self.scoring.weights.validate()?;
        self.train.sft.validate()?;
        self.train.mpra.validate()?;
        if self.retrieval.k == 0 {
            return Err(Error::Config("retrieval.k must be at least 1".into()));
        }
        if self.corpus.eval_percent > 100 {
            return Err(Error::Config("corpus.eval_percent must be at most 100".into()));
        }
        if self.ingest.tag_filter.trim().is_empty() {
            return Err(Error::Config("ingest.tag_filter must be nonempty".into()));
        }
        let g = &self.generation;
        if !(g.temperature > 0.0) || !(g.top_p > 0.0 && g.top_p <= 1.0) || g.max_gen_len == 0 {
            return Err(Error::Config("generation settings out of range".into()));
        }
        if self.model.context == 0 || self.model.embed_dim == 0 || self.model.hidden == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        Ok(())
    }

    /// sha256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().unwrap_or_default().as_bytes())
    }

    /// Fails with a digest mismatch when `path` has a declared digest that
    /// differs from its contents.
    pub fn check_digest(&self, path: &Path) -> Result<String> {
        let actual = file_digest(path)?;
        if let Some(expected) = self.digests.get(path.to_string_lossy().as_ref()) {
            if !expected.eq_ignore_ascii_case(&actual) {
                return Err(Error::DigestMismatch {
                    path: path.display().to_string(),
                    expected: expected.clone(),
                    actual,
                });
            }
        }
        Ok(actual)
    }

    /// Deterministic question split: `true` means held out for evaluation.
    pub fn is_eval(&self, question_id: u64) -> bool {
        crate::rng::mix64(question_id) % 100 < self.corpus.eval_percent
    }
}
