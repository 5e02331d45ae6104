use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde_json::json;

use emodetect_core::backend::load_checkpoint;
use emodetect_core::corpora::{
    compose_ablation, derive_data_seeds, load_corpus, make_seeded_split, synthesize_counterparts, validate_chatgpt100,
    write_corpus_file, AblationOutput, ChatGpt100Rules, Corpus, CorpusFormat, Doc, GenerationConfig, Label,
    MarkovGenerator, Recipe, Schema, SplitRatios,
};
use emodetect_core::emotaxon::{gne_mapping_tsv, sentiment_to_emotion, LexiconResolver};
use emodetect_core::evalkit::{compare_models, histogram, length_stats, paired_word_counts, render_comparison};
use emodetect_core::trainer::{evaluate_model, run_protocol, Profile, ProtocolEnv, RunSetResult, SPLIT_FILE};
use emodetect_llmzero::{run_zeroshot, ClientConfig, HttpBackend, MockBackend, MockScript};

use crate::config::{builtin_corpus, experiment_digest, resolve_format, to_sentiment, ExperimentConfig, ProtocolSpec};
use crate::report::{emit_report, json_bytes, read_results, results_digest, results_path};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "emodetect", version, about = "Emotion-aware detection of machine-generated text")]
pub struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a corpus file: convert, synthesize, compose an ablation, or emit a toy set.
    #[command(subcommand)]
    BuildDataset(BuildDataset),
    /// Print the GNE mapping, or relabel a corpus between emotion and sentiment.
    MapEmotions(MapEmotionsArgs),
    /// Split a corpus into train/validation/test with seeds derived from one base.
    Split(SplitArgs),
    /// Run the protocols of an experiment config.
    Train(TrainArgs),
    /// Score a saved checkpoint on a corpus.
    Evaluate(EvaluateArgs),
    /// Compare two results files head to head.
    Compare(CompareArgs),
    /// Length statistics of a binary corpus.
    Stats(StatsArgs),
    /// Zero-shot detection by prompting a chat model.
    Zeroshot(ZeroshotArgs),
    /// Write a report bundle from results files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long)]
    pub format: Option<String>,
}

impl InputArgs {
    fn load(&self) -> Result<Corpus, CliError> {
        Ok(load_corpus(&self.input, resolve_format(&self.input, self.format.as_deref())?)?)
    }
}

#[derive(Debug, Subcommand)]
pub enum BuildDataset {
    /// Re-read any supported format and write a native corpus file.
    Convert {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pair every human document with a generated counterpart.
    Synth {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        top_p: f64,
        #[arg(long, default_value_t = 40)]
        max_new_tokens: usize,
        #[arg(long, default_value_t = 0)]
        seed: i64,
        #[arg(long, default_value_t = 1)]
        width: usize,
        /// Prompt with the article text only, without headline metadata.
        #[arg(long)]
        no_metadata: bool,
    },
    /// Compose one of the emotion-data ablation recipes.
    Ablation {
        #[arg(long)]
        recipe: String,
        #[arg(long)]
        gne: Option<PathBuf>,
        #[arg(long)]
        at: Option<PathBuf>,
        #[arg(long)]
        sst2: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: i64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one of the bundled toy corpora.
    Toy {
        #[arg(long, value_enum)]
        kind: ToyKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n_human: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: i64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ToyKind {
    Detection,
    Emotion,
    Sentiment,
    Chatgpt100,
}

impl ToyKind {
    fn builtin(self) -> &'static str {
        match self {
            ToyKind::Detection => "desk-detection",
            ToyKind::Emotion => "desk-emotion",
            ToyKind::Sentiment => "desk-sentiment",
            ToyKind::Chatgpt100 => "desk-chatgpt100",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MapTarget {
    Sentiment,
    Emotion,
}

#[derive(Debug, Args)]
pub struct MapEmotionsArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long, value_enum)]
    pub to: Option<MapTarget>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "5:1:4")]
    pub ratios: String,
    #[arg(long)]
    pub seed_base: i64,
    /// Writes the split manifest and train/val/test corpora here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_parser = parse_profile)]
    pub profile: Option<Profile>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run only these protocols (repeatable).
    #[arg(long)]
    pub protocol: Vec<String>,
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse().map_err(|e: emodetect_core::trainer::TrainerError| e.to_string())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Checkpoint directory (holding weights.bin and meta.json).
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 128)]
    pub max_len: usize,
    /// Writes per-document predictions as JSON lines.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Baseline results file.
    #[arg(long)]
    pub a: PathBuf,
    /// Candidate results file.
    #[arg(long)]
    pub b: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 50.0)]
    pub bin_width: f64,
}

#[derive(Debug, Args)]
pub struct ZeroshotArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Replay responses from a script file instead of calling a model.
    #[arg(long)]
    pub mock: Option<PathBuf>,
    /// TOML file with client settings (endpoint, model_id, credential_ref, ...).
    #[arg(long)]
    pub client: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    #[arg(long)]
    pub credential_env: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub min_interval_ms: Option<u64>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Fail unless the corpus satisfies the 50/50, length-matched format.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs one parsed command. Human-readable output goes to stdout, progress
/// and warnings to stderr through the logger.
pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BuildDataset(b) => build_dataset(b),
        Command::MapEmotions(a) => map_emotions(a),
        Command::Split(a) => split(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
        Command::Stats(a) => stats(a),
        Command::Zeroshot(a) => zeroshot(a),
        Command::Report(a) => report(a),
    }
}

fn write_corpus(c: &Corpus, out: &Path) -> Result<(), CliError> {
    write_corpus_file(c, out)?;
    println!("wrote {} documents ({}) to {}", c.len(), c.schema, out.display());
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    emodetect_core::backend::write_atomic(path, bytes).map_err(|e| CliError::OutputUnwritable {
        path: path.to_path_buf(),
        source: e,
    })
}

fn build_dataset(cmd: BuildDataset) -> Result<(), CliError> {
    match cmd {
        BuildDataset::Convert { input, out } => write_corpus(&input.load()?, &out),
        BuildDataset::Synth {
            input,
            out,
            top_p,
            max_new_tokens,
            seed,
            width,
            no_metadata,
        } => {
            let humans = input.load()?;
            let cfg = GenerationConfig {
                top_p,
                max_new_tokens,
                use_metadata_prompt: !no_metadata,
                seed,
                ..GenerationConfig::default()
            };
            let output = synthesize_counterparts(&humans, &MarkovGenerator::bundled(), &cfg, width.max(1))?;
            write_corpus(&output.corpus, &out)?;
            if output.failures.is_empty() {
                Ok(())
            } else {
                for f in &output.failures {
                    warn!("no counterpart for {}: {}", f.doc_id, f.reason);
                }
                Err(CliError::Partial(format!("{} documents could not be synthesized", output.failures.len())))
            }
        }
        BuildDataset::Ablation {
            recipe,
            gne,
            at,
            sst2,
            seed,
            out,
        } => {
            let recipe: Recipe = recipe.parse()?;
            let mut sources = BTreeMap::new();
            for (name, path, format) in [
                ("gne", gne, CorpusFormat::GneCsv),
                ("at", at, CorpusFormat::AffectiveTextXmlish),
                ("sst2", sst2, CorpusFormat::Sst2Tsv),
            ] {
                if let Some(p) = path {
                    let fmt = if p.extension().is_some_and(|e| e == "jsonl") {
                        CorpusFormat::CorpusJsonl
                    } else {
                        format
                    };
                    sources.insert(name.to_string(), load_corpus(&p, fmt)?);
                }
            }
            let missing: Vec<&str> = recipe.sources().iter().copied().filter(|s| !sources.contains_key(*s)).collect();
            if !missing.is_empty() {
                return Err(CliError::User(format!("recipe {recipe} needs --{}", missing.join(", --"))));
            }
            let resolver = LexiconResolver::default();
            let tag = recipe.tag().replace('+', "p");
            match compose_ablation(recipe, &sources, seed, &resolver)? {
                AblationOutput::Single(c) => write_corpus(&c, &out.join(format!("{tag}.jsonl"))),
                AblationOutput::Stages(cs) => {
                    for (k, c) in cs.iter().enumerate() {
                        write_corpus(c, &out.join(format!("{tag}-stage-{}.jsonl", k + 1)))?;
                    }
                    Ok(())
                }
            }
        }
        BuildDataset::Toy { kind, out, n_human, seed } => write_corpus(&builtin_corpus(kind.builtin(), n_human, seed)?, &out),
    }
}

fn map_emotions(a: MapEmotionsArgs) -> Result<(), CliError> {
    let Some(input) = a.input else {
        print!("{}", gne_mapping_tsv());
        return Ok(());
    };
    let corpus = load_corpus(&input, resolve_format(&input, a.format.as_deref())?)?;
    let target = a.to.unwrap_or(match corpus.schema {
        Schema::Sentiment2 => MapTarget::Emotion,
        _ => MapTarget::Sentiment,
    });
    let mapped = match target {
        MapTarget::Sentiment => to_sentiment(&corpus)?,
        MapTarget::Emotion => {
            if corpus.schema != Schema::Sentiment2 {
                return Err(CliError::User(format!("expected a sentiment-2 corpus, got {}", corpus.schema)));
            }
            let docs = corpus
                .docs
                .iter()
                .map(|d| {
                    let Label::Sentiment(s) = d.label else { unreachable!("validated schema") };
                    let mut doc = Doc::new(d.id.clone(), d.text.clone(), Label::Emotion(sentiment_to_emotion(s)));
                    doc.meta = d.meta.clone();
                    doc
                })
                .collect();
            let mut prov = corpus.provenance.clone();
            prov.push("mapped sentiment-2 -> emotion-6".into());
            Corpus::new(Schema::Emotion6, docs, prov)?
        }
    };
    match a.out {
        Some(out) => write_corpus(&mapped, &out),
        None => {
            for (label, n) in mapped.label_histogram() {
                println!("{label}\t{n}");
            }
            Ok(())
        }
    }
}

fn split(a: SplitArgs) -> Result<(), CliError> {
    let corpus = a.input.load()?;
    let ratios: SplitRatios = a.ratios.parse()?;
    let seeds = derive_data_seeds(a.seed_base);
    let set = make_seeded_split(&corpus, ratios, seeds)?;
    let manifest = set.manifest(&corpus);
    println!(
        "seeds train={} val={} test={}  sizes train={} val={} test={}",
        seeds.train,
        seeds.val,
        seeds.test,
        set.train.len(),
        set.val.len(),
        set.test.len()
    );
    if let Some(out) = a.out {
        write_file(&out.join(SPLIT_FILE), &json_bytes(&manifest))?;
        for (name, part) in [("train", &set.train), ("val", &set.val), ("test", &set.test)] {
            write_corpus_file(part, &out.join(format!("{name}.jsonl")))?;
        }
        println!("wrote split to {}", out.display());
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(p) = a.profile {
        cfg.profile = p;
    }
    if let Some(j) = a.jobs {
        if j == 0 {
            return Err(CliError::User("--jobs must be at least 1".into()));
        }
        cfg.jobs = j;
    }
    if let Some(o) = a.out {
        cfg.out_dir = o;
    }
    let selected: Vec<&ProtocolSpec> = if a.protocol.is_empty() {
        cfg.protocols.iter().collect()
    } else {
        let mut v = Vec::new();
        for name in &a.protocol {
            v.push(
                cfg.protocols
                    .iter()
                    .find(|p| &p.name == name)
                    .ok_or_else(|| CliError::User(format!("no protocol named {name:?} in the config")))?,
            );
        }
        v
    };
    if selected.is_empty() {
        return Err(CliError::User("config defines no protocols".into()));
    }
    let datasets = cfg.load_datasets(&cfg.protocol_datasets(&selected))?;
    let resolved = selected
        .iter()
        .map(|s| cfg.resolve_protocol(s, &datasets))
        .collect::<Result<Vec<_>, _>>()?;
    let digest = experiment_digest(&cfg.name, &resolved, &datasets);
    let registry = cfg.registry()?;
    info!("experiment {} (config {digest}), profile {}", cfg.name, cfg.profile);

    write_file(
        &cfg.out_dir.join("experiment.json"),
        &json_bytes(&json!({
            "config_digest": digest,
            "name": cfg.name,
            "profile": cfg.profile,
            "protocols": resolved,
            "datasets": datasets.iter().map(|(k, c)| (k.clone(), c.digest())).collect::<BTreeMap<_, _>>(),
        })),
    )?;

    let mut results: BTreeMap<String, RunSetResult> = BTreeMap::new();
    let mut failed_runs = 0;
    for p in &resolved {
        let env = ProtocolEnv {
            registry: &registry,
            out_dir: cfg.out_dir.join(&p.name),
            jobs: cfg.jobs,
        };
        let r = run_protocol(p, &datasets, &env)?;
        write_file(&results_path(&cfg.out_dir, &p.name), &json_bytes(&r))?;
        failed_runs += r.per_run.len() - r.completed;
        match &r.aggregate {
            Some(agg) => println!(
                "{}: {}/{} runs, mean test accuracy {:.2}",
                p.name,
                r.completed,
                r.per_run.len(),
                agg.mean.accuracy
            ),
            None => println!("{}: no run completed", p.name),
        }
        results.insert(p.name.clone(), r);
    }

    if failed_runs > 0 {
        return Err(CliError::Partial(format!("{failed_runs} run(s) failed; see the run manifests")));
    }
    let report_dir = cfg.out_dir.join("report");
    match &cfg.report {
        Some(spec) if results.contains_key(&spec.baseline) && results.contains_key(&spec.candidate) => {
            emit_report(&results[&spec.candidate], Some(&results[&spec.baseline]), &digest, &report_dir)?;
            print!("{}", std::fs::read_to_string(report_dir.join("table.txt")).unwrap_or_default());
        }
        _ if results.len() == 1 => {
            let only = results.values().next().expect("one result");
            emit_report(only, None, &digest, &report_dir)?;
            print!("{}", std::fs::read_to_string(report_dir.join("table.txt")).unwrap_or_default());
        }
        _ => {}
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let (model, meta) = load_checkpoint(&a.checkpoint)?;
    let corpus = a.input.load()?;
    if corpus.schema.to_string() != meta.task_schema {
        return Err(CliError::User(format!(
            "checkpoint was trained on {}, corpus is {}",
            meta.task_schema, corpus.schema
        )));
    }
    let (report, preds) = evaluate_model(&model, &corpus, a.max_len)?;
    if let Some(path) = &a.predictions {
        let mut out = String::new();
        for (doc, p) in corpus.docs.iter().zip(&preds) {
            let label = corpus.schema.label_at(p.label_index).map(|l| l.to_string());
            out.push_str(&serde_json::to_string(&json!({"id": doc.id, "gold": doc.label, "pred": label, "scores": p.scores})).expect("serializes"));
            out.push('\n');
        }
        write_file(path, out.as_bytes())?;
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("serializes"));
    Ok(())
}

fn compare(a: CompareArgs) -> Result<(), CliError> {
    let base = read_results(&a.a)?;
    let cand = read_results(&a.b)?;
    let table = compare_models(&base.protocol, &base.test_reports(), &cand.protocol, &cand.test_reports())?;
    print!("{}", render_comparison(&table));
    Ok(())
}

fn stats(a: StatsArgs) -> Result<(), CliError> {
    let corpus = a.input.load()?;
    let analysis = length_stats(&corpus)?;
    println!("{}", serde_json::to_string_pretty(&analysis).expect("serializes"));
    if let Some(out) = a.out {
        write_file(&out.join("stats.json"), &json_bytes(&analysis))?;
        let mut hist = String::from("class,bin_start,count\n");
        for (class, label) in [("human", "human"), ("synthetic", "synthetic")] {
            let words: Vec<f64> = corpus
                .docs
                .iter()
                .filter(|d| d.label.as_str() == label)
                .map(|d| emodetect_core::evalkit::count_words(&d.text) as f64)
                .collect();
            for (start, n) in histogram(&words, a.bin_width) {
                hist.push_str(&format!("{class},{start},{n}\n"));
            }
        }
        write_file(&out.join("word_histogram.csv"), hist.as_bytes())?;
        let mut scatter = String::from("human_id,synthetic_id,human_words,synthetic_words\n");
        for (h, s, hw, sw) in paired_word_counts(&corpus) {
            scatter.push_str(&format!("{h},{s},{hw},{sw}\n"));
        }
        write_file(&out.join("pair_lengths.csv"), scatter.as_bytes())?;
    }
    Ok(())
}

fn zeroshot(a: ZeroshotArgs) -> Result<(), CliError> {
    let corpus = a.input.load()?;
    let check = validate_chatgpt100(&corpus, &ChatGpt100Rules::default());
    if !check.passes {
        let msg = format!(
            "corpus does not match the 50/50 length-matched format (human {}, synthetic {}, {} over the word cap, {} unpaired, {} length-mismatched pairs)",
            check.human,
            check.synthetic,
            check.over_limit.len(),
            check.unpaired.len(),
            check.length_mismatched.len()
        );
        if a.strict {
            return Err(CliError::User(msg));
        }
        warn!("{msg}");
    }
    let mut client = match &a.client {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::User(format!("cannot read client config {}: {e}", p.display())))?;
            toml::from_str::<ClientConfig>(&text).map_err(|e| CliError::Config {
                field: "client".into(),
                message: e.to_string(),
            })?
        }
        None => ClientConfig::default(),
    };
    if let Some(v) = a.model {
        client.model_id = v;
    }
    if let Some(v) = a.endpoint {
        client.endpoint = v;
    }
    if let Some(v) = a.credential_env {
        client.credential_ref = v;
    }
    if let Some(v) = a.min_interval_ms {
        client.min_interval_ms = v;
    }
    if let Some(v) = a.max_retries {
        client.max_retries = v;
    }
    client.cache_dir = a.cache_dir.unwrap_or_else(|| a.out.join("cache"));

    let outcome = match &a.mock {
        Some(script) => {
            let mut mock = MockBackend::new(MockScript::load(script)?);
            if a.client.is_none() {
                client.min_interval_ms = 0;
            }
            run_zeroshot(&corpus, &client, &mut mock)?
        }
        None => {
            let mut http = HttpBackend::from_config(&client)?;
            run_zeroshot(&corpus, &client, &mut http)?
        }
    };
    let mut lines = String::new();
    for v in &outcome.verdicts {
        lines.push_str(&serde_json::to_string(v).expect("serializes"));
        lines.push('\n');
    }
    write_file(&a.out.join("verdicts.jsonl"), lines.as_bytes())?;
    write_file(&a.out.join("report.json"), &json_bytes(&outcome.report))?;
    let m = &outcome.report.metrics;
    println!(
        "{}: P {:.2}  R {:.2}  F1 {:.2}  Acc {:.2}  ({} unparseable, {} cached, {} calls)",
        outcome.report.model_id,
        m.precision,
        m.recall,
        m.f1,
        m.accuracy,
        outcome.report.unparseable,
        outcome.report.cache_hits,
        outcome.report.network_calls
    );
    Ok(())
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    let results = read_results(&a.results)?;
    let baseline = a.baseline.as_deref().map(read_results).transpose()?;
    let sets: Vec<&RunSetResult> = baseline.iter().chain(std::iter::once(&results)).collect();
    let digest = results_digest(&sets);
    emit_report(&results, baseline.as_ref(), &digest, &a.out)?;
    print!("{}", std::fs::read_to_string(a.out.join("table.txt")).unwrap_or_default());
    Ok(())
}
