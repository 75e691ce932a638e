use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::manifest::Manifest;
use super::{
    Command, Context, CorrelateArgs, EvaluateArgs, GenerateArgs, GradCheckArgs, IngestArgs, Io, SynthArgs, TrainArgs,
};
use crate::config::{Bank, PipelineConfig, ProviderSettings, RetrieverKind};
use crate::corpus::{build_corpus, build_sft_set, pool_stats, QuestionPool, DEFAULT_EDGES};
use crate::dump::{assemble_pools, parse_dump_files, AssembleOptions, RawPool};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::lm::{
    combined_loss_and_grad, generate, gradient_check, mpra_loss_and_grad, sft_loss_and_grad, Checkpoint,
    GenerateConfig, GradCheckReport, LmDims, LmParameters, Vocabulary,
};
use crate::metrics::{correlation_table, evaluate_run, FileEmbeddingProvider, Generation, TokenEmbeddingProvider};
use crate::ranking::{build_ranked_pool, RankedPool};
use crate::retrieval::{
    assemble_prompt, build_index, entries_from_ranked, BankIndex, DenseIndex, PromptBundle, PromptTemplate,
    RetrievalProvider,
};
use crate::rng::substream;
use crate::scoring::{
    score_corpus, score_distribution, ConstantProvider, FileProvider, LineProtocolProvider, ScoredPool,
    TokenScoreProvider,
};
use crate::synth::{synth_pools, SynthConfig};
use crate::tokenize::{detokenize, tokenize};
use crate::train::{ranked_examples, sft_examples, train_mpra, train_sft, Stage};

pub(super) fn dispatch(ctx: &Context, command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(ctx, a),
        Command::BuildCorpus(io) => build_corpus_cmd(ctx, io),
        Command::Stats(io) => stats(ctx, io),
        Command::Score(io) => score(ctx, io),
        Command::Rank(io) => rank(ctx, io),
        Command::TrainSft(a) => train_sft_cmd(ctx, a),
        Command::TrainMpra(a) => train_mpra_cmd(ctx, a),
        Command::RetrieveIndex(io) => retrieve_index(ctx, io),
        Command::Generate(a) => generate_cmd(ctx, a),
        Command::Evaluate(a) => evaluate(ctx, a),
        Command::Correlate(a) => correlate(ctx, a),
        Command::GradCheck(a) => grad_check(ctx, a),
        Command::SynthPools(a) => synth(ctx, a),
    }
}

fn pick(flag: &Option<PathBuf>, default: &Path) -> PathBuf {
    flag.clone().unwrap_or_else(|| default.to_path_buf())
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    manifest: Manifest,
}

impl<'a> Run<'a> {
    fn new(ctx: &'a Context, command: &str) -> Self {
        Self {
            cfg: &ctx.cfg,
            manifest: Manifest::new(command, &ctx.hash, ctx.cfg.seed),
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(Error::Config(format!("input {} does not exist", path.display())));
        }
        let digest = self.cfg.check_digest(path)?;
        self.manifest.input(path, digest);
        Ok(())
    }

    fn load<T: DeserializeOwned>(&mut self, path: &Path) -> Result<Vec<T>> {
        self.input(path)?;
        jsonl::load(path)
    }

    fn save<T: Serialize>(&mut self, path: &Path, records: &[T]) -> Result<()> {
        jsonl::save(path, records)?;
        self.manifest.output(path)
    }

    fn save_json<T: Serialize>(&mut self, path: &Path, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.save_text(path, &text)
    }

    fn save_text(&mut self, path: &Path, text: &str) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, text)?;
        self.manifest.output(path)
    }

    fn finish(self, primary: &Path) -> Result<()> {
        self.manifest.write_beside(primary)?;
        Ok(())
    }
}

fn ingest(ctx: &Context, args: IngestArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut run = Run::new(ctx, "ingest");
    let inputs = if args.input.is_empty() {
        cfg.paths.dump.clone()
    } else {
        args.input
    };
    for p in &inputs {
        run.input(p)?;
    }
    let parsed = parse_dump_files(&inputs)?;
    let cutoff = match &cfg.ingest.cutoff {
        Some(c) => Some(
            chrono::DateTime::parse_from_rfc3339(c)
                .map_err(|e| Error::Config(format!("ingest.cutoff {c:?}: {e}")))?
                .with_timezone(&chrono::Utc),
        ),
        None => None,
    };
    let opts = AssembleOptions {
        tag_filter: cfg.ingest.tag_filter.clone(),
        cutoff,
    };
    let assembly = assemble_pools(parsed.posts, &opts)?;
    let out = pick(&args.output, &cfg.paths.raw_pools);
    run.save(&out, &assembly.pools)?;
    let report = serde_json::json!({
        "skipped_rows": parsed.skipped_rows,
        "orphan_answers": assembly.report.orphan_answers,
        "cutoff_answers": assembly.report.cutoff_answers,
        "duplicate_posts": assembly.report.duplicate_posts,
        "retained_pools": assembly.report.retained_pools,
    });
    run.save_json(&cfg.paths.reports.join("ingest_report.json"), &report)?;
    println!("ingest: {} pools -> {}", assembly.pools.len(), out.display());
    run.finish(&out)
}

fn build_corpus_cmd(ctx: &Context, io: Io) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut run = Run::new(ctx, "build-corpus");
    let raw: Vec<RawPool> = run.load(&pick(&io.input, &cfg.paths.raw_pools))?;
    let (pools, report) = build_corpus(&raw);
    let out = pick(&io.output, &cfg.paths.corpus);
    run.save(&out, &pools)?;
    let sft = build_sft_set(&pools, cfg.corpus.sft_min_votes);
    run.save(&cfg.paths.sft_pairs, &sft)?;
    run.save_json(&cfg.paths.reports.join("filter_report.json"), &report)?;
    println!(
        "build-corpus: {} of {} pools retained, {} SFT pairs -> {}",
        report.retained,
        report.input_pools,
        sft.len(),
        out.display()
    );
    run.finish(&out)
}

fn stats(ctx: &Context, io: Io) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut run = Run::new(ctx, "stats");
    let records: Vec<serde_json::Value> = run.load(&pick(&io.input, &cfg.paths.raw_pools))?;
    let sizes = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.get("answers")
                .and_then(|a| a.as_array())
                .map(Vec::len)
                .ok_or_else(|| Error::Parse(format!("line {}: record has no answers list", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    let hist = pool_stats(sizes, &DEFAULT_EDGES)?;
    let table = hist.render_table();
    print!("{table}");
    let out = pick(&io.output, &cfg.paths.reports.join("stats.txt"));
    run.save_text(&out, &table)?;
    let mut json = out.clone();
    json.set_extension("json");
    run.save_json(&json, &hist)?;
    run.finish(&out)
}

fn provider(run: &mut Run<'_>) -> Result<Box<dyn TokenScoreProvider>> {
    Ok(match &run.cfg.scoring.provider {
        ProviderSettings::Constant { value } => Box::new(ConstantProvider { value: *value }),
        ProviderSettings::File { path } => {
            run.input(path)?;
            Box::new(FileProvider::load(path)?)
        }
        ProviderSettings::Command { program, args } => Box::new(LineProtocolProvider::spawn(program, args)?),
    })
}

fn score(ctx: &Context, io: Io) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut run = Run::new(ctx, "score");
    let pools: Vec<QuestionPool> = run.load(&pick(&io.input, &cfg.paths.corpus))?;
    let provider = provider(&mut run)?;
    let scored = score_corpus(&pools, &cfg.scoring.weights, provider.as_ref(), cfg.scoring.mode)?;
    let out = pick(&io.output, &cfg.paths.scored);
    run.save(&out, &scored)?;
    run.save(
        &cfg.paths.reports.join("score_distribution.jsonl"),
        &score_distribution(&scored),
    )?;
    println!("score: {} pools -> {}", scored.len(), out.display());
    run.finish(&out)
}

fn rank(ctx: &Context, io: Io) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut run = Run::new(ctx, "rank");
    let scored: Vec<ScoredPool> = run.load(&pick(&io.input, &cfg.paths.scored))?;
    let ranked: Vec<RankedPool> = scored
        .into_iter()
        .map(|s| build_ranked_pool(s, cfg.scoring.max_pool_size))
        .collect();
    let out = pick(&io.output, &cfg.paths.ranked);
    run.save(&out, &ranked)?;
    println!("rank: {} pools -> {}", ranked.len(), out.display());
    run.finish(&out)
}

fn run_dir(ctx: &Context, stage: Stage) -> PathBuf {
    let name = match stage {
        Stage::Sft => "sft",
        Stage::Mpra => "mpra",
    };
    ctx.cfg
        .paths
        .runs
        .join(format!("{name}-{}-seed{}", &ctx.hash[..12], ctx.cfg.seed))
}

fn template(ctx: &Context, run: &mut Run<'_>) -> Result<PromptTemplate> {
    match &ctx.template {
        Some(p) => {
            run.input(p)?;
            PromptTemplate::load(p)
        }
        None => Ok(PromptTemplate::default()),
    }
}

fn load_checkpoint(run: &mut Run<'_>, path: &Path) -> Result<Checkpoint> {
    run.input(path)?;
    Checkpoint::load(path)
}

fn train_sft_cmd(ctx: &Context, args: TrainArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut run = Run::new(ctx, "train-sft");
    let pools: Vec<QuestionPool> = run.load(&pick(&args.io.input, &cfg.paths.corpus))?;
    let train: Vec<QuestionPool> = pools.into_iter().filter(|p| !cfg.is_eval(p.question_id)).collect();
    let template = template(ctx, &mut run)?;
    let (init, vocab) = match &args.init {
        Some(p) => {
            let c = load_checkpoint(&mut run, p)?;
            (c.params, c.vocab)
        }
        None => {
            let texts: Vec<Vec<String>> = train
                .iter()
                .flat_map(|p| std::iter::once(p.question_text()).chain(p.answers.iter().map(|a| a.content.clone())))
                .map(|t| tokenize(&t))
                .collect();
            let vocab = Vocabulary::build(texts.iter().map(Vec::as_slice), cfg.tokenizer.min_freq);
            let dims = cfg.model.dims(vocab.len());
            let params = LmParameters::random(dims, cfg.model.init_scale, &mut substream(cfg.seed, "lm/init"));
            (params, vocab)
        }
    };
    let pairs = build_sft_set(&train, cfg.corpus.sft_min_votes);
    let data = sft_examples(&vocab, &template, &pairs, cfg.train.sft.max_seq_len);
    let (params, log) = train_sft(&cfg.train.sft, &data, init)?;
    let dir = pick(&args.io.output, &run_dir(ctx, Stage::Sft));
    let model = dir.join("model.bin");
    Checkpoint::new(params, vocab)?.save(&model)?;
    run.manifest.output(&model)?;
    run.save_json(&dir.join("train_log.json"), &log)?;
    println!(
        "train-sft: {} pairs, {} epochs, final loss {:.6} -> {}",
        data.len(),
        log.epochs.len(),
        log.epochs.last().map_or(f64::NAN, |e| e.mean_loss),
        dir.display()
    );
    run.finish(&dir)
}

fn train_mpra_cmd(ctx: &Context, args: TrainArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut run = Run::new(ctx, "train-mpra");
    let pools: Vec<RankedPool> = run.load(&pick(&args.io.input, &cfg.paths.ranked))?;
    let train: Vec<RankedPool> = pools.into_iter().filter(|p| !cfg.is_eval(p.question_id)).collect();
    let template = template(ctx, &mut run)?;
    let init_path = pick(&args.init, &run_dir(ctx, Stage::Sft).join("model.bin"));
    let init = load_checkpoint(&mut run, &init_path)?;
    let data = ranked_examples(&init.vocab, &template, &train, cfg.train.mpra.max_seq_len)?;
    let (params, log) = train_mpra(&cfg.train.mpra, &data, init.params)?;
    let dir = pick(&args.io.output, &run_dir(ctx, Stage::Mpra));
    let model = dir.join("model.bin");
    Checkpoint::new(params, init.vocab)?.save(&model)?;
    run.manifest.output(&model)?;
    run.save_json(&dir.join("train_log.json"), &log)?;
    let last = log.epochs.last();
    println!(
        "train-mpra: {} pools, {} epochs, final loss {:.6}, ranking agreement {:.4} -> {}",
        data.len(),
        log.epochs.len(),
        last.map_or(f64::NAN, |e| e.mean_loss),
        last.and_then(|e| e.ranking_agreement).unwrap_or(f64::NAN),
        dir.display()
    );
    run.finish(&dir)
}

fn retrieve_index(ctx: &Context, io: Io) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut run = Run::new(ctx, "retrieve-index");
    let pools: Vec<RankedPool> = run.load(&pick(&io.input, &cfg.paths.ranked))?;
    let bank: Vec<RankedPool> = match cfg.retrieval.bank {
        Bank::Train => pools.into_iter().filter(|p| !cfg.is_eval(p.question_id)).collect(),
        Bank::All => pools,
    };
    let index = build_index(entries_from_ranked(&bank));
    let out = pick(&io.output, &cfg.paths.index);
    index.save(&out)?;
    run.manifest.output(&out)?;
    println!("retrieve-index: {} documents -> {}", index.len(), out.display());
    run.finish(&out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PromptRecord {
    question_id: u64,
    retrieved: Option<u64>,
    retrieval_score: Option<f64>,
    #[serde(flatten)]
    bundle: PromptBundle,
}

fn generate_cmd(ctx: &Context, args: GenerateArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut run = Run::new(ctx, "generate");
    let pools: Vec<RankedPool> = run.load(&pick(&args.io.input, &cfg.paths.ranked))?;
    let eval: Vec<RankedPool> = pools.into_iter().filter(|p| cfg.is_eval(p.question_id)).collect();
    let ckpt = load_checkpoint(
        &mut run,
        &pick(&args.checkpoint, &run_dir(ctx, Stage::Mpra).join("model.bin")),
    )?;
    let template = template(ctx, &mut run)?;
    let index_path = pick(&args.index, &cfg.paths.index);
    run.input(&index_path)?;
    let index = BankIndex::load(&index_path)?;
    let provider: Box<dyn RetrievalProvider> = match cfg.retrieval.retriever {
        RetrieverKind::Bm25 => Box::new(index),
        RetrieverKind::Dense => {
            let vectors = cfg
                .retrieval
                .vectors
                .as_ref()
                .ok_or_else(|| Error::Config("dense retrieval needs retrieval.vectors".into()))?;
            run.input(vectors)?;
            Box::new(DenseIndex::load(index.docs, vectors)?)
        }
    };
    let results: Vec<(Generation, PromptRecord)> = eval
        .par_iter()
        .map(|p| {
            let question = p.question_text();
            let hits = provider.search(Some(p.question_id), &question, cfg.retrieval.k, Some(p.question_id))?;
            let top = hits.first().copied();
            let exemplar = top.and_then(|h| provider.entry(h.question_id));
            let bundle = assemble_prompt(
                &template,
                &question,
                exemplar.map(|e| (e.question.as_str(), e.answer.as_str())),
            );
            let prompt = ckpt.vocab.encode(&tokenize(&bundle.prompt));
            let gen_cfg = GenerateConfig {
                max_len: cfg.generation.max_gen_len,
                temperature: cfg.generation.temperature,
                top_p: cfg.generation.top_p,
                seed: substream(cfg.seed, &format!("generate/{}", p.question_id)).next_u64(),
            };
            let ids = generate(&ckpt.params, &prompt, &gen_cfg)?;
            let text = detokenize(&ckpt.vocab.decode(&ids));
            Ok((
                Generation {
                    question_id: p.question_id,
                    text,
                },
                PromptRecord {
                    question_id: p.question_id,
                    retrieved: top.map(|h| h.question_id),
                    retrieval_score: top.map(|h| h.score),
                    bundle,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let (gens, prompts): (Vec<Generation>, Vec<PromptRecord>) = results.into_iter().unzip();
    let out = pick(&args.io.output, &cfg.paths.generations);
    run.save(&out, &gens)?;
    run.save(&cfg.paths.reports.join("prompts.jsonl"), &prompts)?;
    println!("generate: {} questions -> {}", gens.len(), out.display());
    run.finish(&out)
}

#[derive(Debug, Clone, Deserialize)]
struct PreferenceRecord {
    question_id: u64,
    score: f64,
}

fn evaluate(ctx: &Context, args: EvaluateArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut run = Run::new(ctx, "evaluate");
    let pools: Vec<RankedPool> = run.load(&pick(&args.io.input, &cfg.paths.ranked))?;
    let eval: Vec<RankedPool> = pools.into_iter().filter(|p| cfg.is_eval(p.question_id)).collect();
    let gens: Vec<Generation> = run.load(&pick(&args.generations, &cfg.paths.generations))?;
    let preference = match args.preference.as_ref().or(cfg.paths.preference.as_ref()) {
        Some(p) => {
            let recs: Vec<PreferenceRecord> = run.load(p)?;
            Some(
                recs.into_iter()
                    .map(|r| (r.question_id, r.score))
                    .collect::<HashMap<_, _>>(),
            )
        }
        None => None,
    };
    let embeddings = match &cfg.evaluation.embeddings {
        Some(p) => {
            run.input(p)?;
            Some(FileEmbeddingProvider::load(p)?)
        }
        None => None,
    };
    let report = evaluate_run(
        &eval,
        &gens,
        cfg.evaluation.reference,
        preference.as_ref(),
        embeddings.as_ref().map(|e| e as &dyn TokenEmbeddingProvider),
    )?;
    let dir = pick(&args.io.output, &cfg.paths.reports);
    let examples = dir.join("metrics.jsonl");
    run.save(&examples, &report.examples)?;
    let table = report.summary_table();
    run.save_text(&dir.join("metrics_summary.txt"), &table)?;
    run.save_json(
        &dir.join("metrics.json"),
        &serde_json::json!({ "summary": report.summary, "correlations": report.correlations }),
    )?;
    print!("{table}");
    run.finish(&examples)
}

fn correlate(ctx: &Context, args: CorrelateArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut run = Run::new(ctx, "correlate");
    let input = pick(&args.io.input, &cfg.paths.reports.join("metrics.jsonl"));
    let records: Vec<serde_json::Value> = run.load(&input)?;
    let mut cols: Vec<(String, Vec<f64>)> = args.columns.iter().map(|c| (c.clone(), Vec::new())).collect();
    let mut target = Vec::new();
    let mut skipped = 0usize;
    for r in &records {
        let num = |k: &str| r.get(k).and_then(serde_json::Value::as_f64);
        let row: Option<Vec<f64>> = args.columns.iter().map(|c| num(c)).collect();
        match (row, num(&args.target)) {
            (Some(row), Some(t)) => {
                for ((_, col), v) in cols.iter_mut().zip(row) {
                    col.push(v);
                }
                target.push(t);
            }
            _ => skipped += 1,
        }
    }
    let rows = correlation_table(&cols, &target)?;
    println!(
        "{:<12}| {:>8} | {:>8} | {:>8}",
        format!("vs {}", args.target),
        "Kendall",
        "Spearman",
        "Pearson"
    );
    let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    for r in &rows {
        println!(
            "{:<12}| {:>8} | {:>8} | {:>8}",
            r.metric,
            f(r.kendall),
            f(r.spearman),
            f(r.pearson)
        );
    }
    println!("rows: {}  skipped: {}", target.len(), skipped);
    let out = pick(&args.io.output, &cfg.paths.reports.join("correlations.json"));
    run.save_json(
        &out,
        &serde_json::json!({ "target": args.target, "rows": rows, "used": target.len(), "skipped": skipped }),
    )?;
    run.finish(&out)
}

#[derive(Debug, Serialize)]
struct GradCheckRecord {
    loss: &'static str,
    #[serde(flatten)]
    report: GradCheckReport,
}

fn random_ids<R: Rng>(rng: &mut R, len: usize, vocab: usize) -> Vec<u32> {
    (0..len).map(|_| rng.random_range(4..vocab as u32)).collect()
}

fn grad_check(ctx: &Context, args: GradCheckArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    if args.step.is_nan() || args.step <= 0.0 {
        return Err(Error::Config("step must be positive".into()));
    }
    let mut rng = substream(cfg.seed, "grad-check");
    let dims = LmDims {
        vocab_size: 24,
        context: 4,
        embed_dim: 8,
        hidden: 16,
    };
    let params = LmParameters::random(dims, 1.0, &mut rng);
    let v = dims.vocab_size;
    let batch: Vec<(Vec<u32>, Vec<u32>)> = (0..3)
        .map(|_| {
            let (pl, al) = (rng.random_range(0..6), rng.random_range(1..8));
            (random_ids(&mut rng, pl, v), random_ids(&mut rng, al, v))
        })
        .collect();
    let prompt = random_ids(&mut rng, 5, v);
    let ranked: Vec<Vec<u32>> = (0..4)
        .map(|_| {
            let n = rng.random_range(1..7);
            random_ids(&mut rng, n, v)
        })
        .collect();
    let mode = cfg.train.mpra.aggregation;
    let alpha = cfg.train.mpra.alpha;
    let mut records = Vec::new();
    let sft = gradient_check(
        &params,
        |p| sft_loss_and_grad(p, &batch).map(|o| (o.loss, o.grad)),
        args.step,
        args.coords,
        &mut rng,
    )?;
    records.push(GradCheckRecord {
        loss: "sft",
        report: sft,
    });
    let mpra = gradient_check(
        &params,
        |p| mpra_loss_and_grad(p, &prompt, &ranked, mode).map(|o| (o.loss, o.grad)),
        args.step,
        args.coords,
        &mut rng,
    )?;
    records.push(GradCheckRecord {
        loss: "mpra",
        report: mpra,
    });
    let comb = gradient_check(
        &params,
        |p| combined_loss_and_grad(p, &prompt, &ranked, alpha, mode).map(|o| (o.loss, o.grad)),
        args.step,
        args.coords,
        &mut rng,
    )?;
    records.push(GradCheckRecord {
        loss: "combined",
        report: comb,
    });
    let worst = records.iter().map(|r| r.report.max_rel_error).fold(0.0, f64::max);
    let passed = records.iter().all(|r| r.report.passed(args.tolerance));
    for r in &records {
        println!("{:<9} max relative error {:.3e}", r.loss, r.report.max_rel_error);
    }
    println!(
        "max relative error: {worst:.3e} ({})",
        if passed { "pass" } else { "FAIL" }
    );
    if let Some(out) = &args.output {
        let mut run = Run::new(ctx, "grad-check");
        run.save_json(
            out,
            &serde_json::json!({ "seed": cfg.seed, "step": args.step, "tolerance": args.tolerance, "max_rel_error": worst, "passed": passed, "losses": records }),
        )?;
        run.finish(out)?;
    }
    if !passed {
        return Err(Error::domain(format!(
            "gradient check failed: max relative error {worst:.3e} >= {}",
            args.tolerance
        )));
    }
    Ok(())
}

fn synth(ctx: &Context, args: SynthArgs) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut run = Run::new(ctx, "synth-pools");
    let pools = synth_pools(&SynthConfig {
        pools: args.pools,
        min_answers: args.min_answers,
        max_answers: args.max_answers,
        seed: cfg.seed,
    })?;
    let out = pick(&args.output, &cfg.paths.corpus);
    run.save(&out, &pools)?;
    println!("synth-pools: {} pools -> {}", pools.len(), out.display());
    run.finish(&out)
}
