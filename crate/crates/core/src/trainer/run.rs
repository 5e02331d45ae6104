use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{needs_head_swap, ProtocolConfig, SelectionMetric, StageConfig};
use super::optim::{linear_schedule, AdamW};
use super::TrainerError;
use crate::backend::{
    attach_head, load_encoder, save_checkpoint, swap_head, BackboneRegistry, CheckpointMeta, CheckpointRef,
    ClassifierModel, Grads, Prediction, TokenBatch,
};
use crate::corpora::{derive_data_seeds, make_seeded_split, Corpus, SeedTriple, SplitManifest, SplitRatios, SplitSet};
use crate::evalkit::{aggregate_runs, evaluate_labels, AggregateReport, MetricsReport};
use crate::seed::{epoch_seed, rng_from_seed};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SPLIT_FILE: &str = "split.json";
const EVAL_CHUNK: usize = 256;

fn io_err(path: &Path, e: std::io::Error) -> TrainerError {
    TrainerError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

/// Append-only line-delimited run log; every record is flushed as written.
pub struct RunLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl RunLog {
    /// Starts a fresh log at `path`, replacing any earlier one.
    pub fn create(path: &Path) -> Result<Self, TrainerError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn record(&mut self, event: &str, body: serde_json::Value) -> Result<(), TrainerError> {
        let mut line = serde_json::Map::new();
        line.insert("event".into(), json!(event));
        if let serde_json::Value::Object(fields) = body {
            line.extend(fields);
        }
        let mut text = serde_json::to_string(&line).expect("log record serializes");
        text.push('\n');
        self.out.write_all(text.as_bytes()).map_err(|e| io_err(&self.path, e))?;
        self.out.flush().map_err(|e| io_err(&self.path, e))
    }
}

fn log_event(log: &mut Option<&mut RunLog>, event: &str, body: serde_json::Value) -> Result<(), TrainerError> {
    match log {
        Some(l) => l.record(event, body),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub train_loss: f64,
    pub optimizer_steps: usize,
    pub learning_rate_end: f64,
    pub val: MetricsReport,
    pub selection_value: f64,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub best: CheckpointRef,
    pub best_epoch: u32,
    pub records: Vec<EpochRecord>,
    pub model: ClassifierModel,
}

pub struct StageContext<'a> {
    /// Directory receiving `epoch-<k>` checkpoints.
    pub dir: PathBuf,
    pub model_seed: i64,
    pub config_digest: String,
    pub log: Option<&'a mut RunLog>,
}

fn selection_value(report: &MetricsReport, metric: SelectionMetric) -> f64 {
    match metric {
        SelectionMetric::Accuracy => report.raw.accuracy,
        SelectionMetric::F1 => report.raw.f1,
        SelectionMetric::F1Micro => report.raw.f1_micro.unwrap_or(report.raw.accuracy),
    }
}

/// Predictions and metrics for a model over a labeled corpus.
pub fn evaluate_model(
    model: &ClassifierModel,
    corpus: &Corpus,
    max_len: usize,
) -> Result<(MetricsReport, Vec<Prediction>), TrainerError> {
    if model.num_classes() != corpus.schema.num_classes() {
        return Err(TrainerError::SchemaMismatch {
            expected: format!("{} classes", model.num_classes()),
            found: corpus.schema.to_string(),
        });
    }
    let texts = corpus.texts();
    let mut preds = Vec::with_capacity(texts.len());
    for chunk in texts.chunks(EVAL_CHUNK) {
        preds.extend(model.predict_with_len(chunk, max_len)?);
    }
    let labels: Vec<_> = preds
        .iter()
        .map(|p| corpus.schema.label_at(p.label_index).expect("head size matches schema"))
        .collect();
    let golds: Vec<_> = corpus.docs.iter().map(|d| d.label).collect();
    Ok((evaluate_labels(&labels, &golds, corpus.schema)?, preds))
}

/// Trains one stage, checkpointing after every epoch, and returns the
/// checkpoint with the highest validation value (earliest on ties).
pub fn run_stage(
    mut model: ClassifierModel,
    splits: &SplitSet,
    cfg: &StageConfig,
    ctx: &mut StageContext<'_>,
) -> Result<StageOutcome, TrainerError> {
    cfg.validate()?;
    if model.num_classes() != cfg.num_classes {
        return Err(TrainerError::SchemaMismatch {
            expected: format!("{} classes", cfg.num_classes),
            found: format!("model with {} classes", model.num_classes()),
        });
    }
    if splits.schema() != cfg.task_schema {
        return Err(TrainerError::SchemaMismatch {
            expected: cfg.task_schema.to_string(),
            found: splits.schema().to_string(),
        });
    }
    if splits.train.is_empty() {
        return Err(TrainerError::Config(format!("stage {:?} has an empty training split", cfg.stage_name)));
    }

    let texts = splits.train.texts();
    let encoded = model.encoder.encode_batch(&texts, cfg.max_seq_len)?;
    let labels: Vec<usize> = splits.train.docs.iter().map(|d| d.label.index()).collect();
    let n = labels.len();
    let micro_batches = n.div_ceil(cfg.batch_size);
    let steps_per_epoch = micro_batches.div_ceil(cfg.grad_accum);
    let total_steps = steps_per_epoch * cfg.epochs as usize;

    let mut opt_enc = AdamW::new(cfg.adam, cfg.weight_decay, model.encoder.bias_mask());
    let mut opt_head = AdamW::new(cfg.adam, cfg.weight_decay, model.head.bias_mask());
    let mut grads = Grads::zeros_like(&model);
    let mut step = 0usize;
    let mut records: Vec<EpochRecord> = Vec::new();
    let mut best: Option<(usize, CheckpointRef, ClassifierModel)> = None;

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_from_seed(epoch_seed(splits.seeds.train, epoch)));
        let mut loss_sum = 0.0;
        let mut pending = 0usize;
        let mut lr = linear_schedule(cfg.learning_rate, step, cfg.warmup_steps, total_steps);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = TokenBatch {
                ids: chunk.iter().map(|&i| encoded.ids[i].clone()).collect(),
                lengths: chunk.iter().map(|&i| encoded.lengths[i]).collect(),
                truncated: vec![false; chunk.len()],
            };
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let loss = model.accumulate_gradients(&batch, &y, 1.0 / cfg.grad_accum as f32, &mut grads)?;
            if !loss.is_finite() {
                return Err(TrainerError::NonFiniteLoss { epoch, step, batch: b });
            }
            loss_sum += loss * chunk.len() as f64;
            pending += 1;
            if pending == cfg.grad_accum || b + 1 == micro_batches {
                lr = linear_schedule(cfg.learning_rate, step, cfg.warmup_steps, total_steps);
                opt_enc.step(&mut model.encoder.params, &grads.encoder, lr);
                opt_head.step(&mut model.head.params, &grads.head, lr);
                grads.clear();
                pending = 0;
                step += 1;
            }
        }
        if model.encoder.params.iter().chain(&model.head.params).any(|p| !p.is_finite()) {
            return Err(TrainerError::NonFiniteLoss { epoch, step, batch: micro_batches });
        }

        let (val, _) = evaluate_model(&model, &splits.val, cfg.max_seq_len)?;
        let value = selection_value(&val, cfg.selection_metric);
        let dir = ctx.dir.join(format!("epoch-{epoch}"));
        let meta = CheckpointMeta {
            stage_name: cfg.stage_name.clone(),
            task_schema: cfg.task_schema.to_string(),
            epoch,
            val_metrics: Some(val.clone()),
            model_seed: ctx.model_seed,
            data_seeds: splits.seeds,
            config_digest: ctx.config_digest.clone(),
            encoder_fingerprint: String::new(),
            head_fingerprint: String::new(),
        };
        let saved = save_checkpoint(&model, &meta, &dir)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n as f64,
            optimizer_steps: step,
            learning_rate_end: lr,
            val,
            selection_value: value,
            checkpoint: dir.clone(),
        };
        info!(
            "{} epoch {epoch}/{}: loss {:.4}, val {} {:.2}",
            cfg.stage_name,
            cfg.epochs,
            record.train_loss,
            cfg.selection_metric.as_str(),
            value
        );
        log_event(&mut ctx.log, "epoch", json!({ "stage": cfg.stage_name, "record": record }))?;
        let improved = match &best {
            None => true,
            Some((i, _, _)) => value > records[*i].selection_value,
        };
        records.push(record);
        if improved {
            best = Some((records.len() - 1, saved, model.clone()));
        }
    }
    let (i, best_ref, best_model) = best.expect("at least one epoch ran");
    Ok(StageOutcome {
        best: best_ref,
        best_epoch: records[i].epoch,
        records,
        model: best_model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage_name: String,
    pub task_schema: String,
    pub dataset_digest: String,
    pub split: SplitManifest,
    pub head_seed: i64,
    pub head_swapped: bool,
    pub encoder_fingerprint_in: String,
    pub best_epoch: u32,
    pub best_checkpoint: PathBuf,
    pub best_encoder_fingerprint: String,
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub model: ClassifierModel,
    pub final_checkpoint: CheckpointRef,
    pub stages: Vec<StageRecord>,
    /// Test split of the last stage.
    pub test: Corpus,
    pub data_seeds: SeedTriple,
}

pub struct PipelineEnv<'a> {
    pub registry: &'a BackboneRegistry,
    pub run_dir: PathBuf,
    pub ratios: SplitRatios,
    pub config_digest: String,
}

fn wrap_stage(index: usize, name: &str, e: TrainerError) -> TrainerError {
    TrainerError::Stage {
        index,
        name: name.to_string(),
        source: Box::new(e),
    }
}

/// Runs stages in order on one seed pair. Each stage's dataset is split with
/// the seeds derived from `data_seed_base`; a fresh head seeded with
/// `model_seed` is attached first and whenever the label space changes.
pub fn run_pipeline(
    encoder_id: &str,
    stages: &[(StageConfig, &Corpus)],
    model_seed: i64,
    data_seed_base: i64,
    env: &PipelineEnv<'_>,
    mut log: Option<&mut RunLog>,
) -> Result<PipelineOutcome, TrainerError> {
    let Some((first, _)) = stages.first() else {
        return Err(TrainerError::Config("pipeline needs at least one stage".into()));
    };
    let encoder = load_encoder(encoder_id, env.registry)?;
    let mut model = attach_head(encoder, first.num_classes, model_seed).map_err(|e| wrap_stage(0, &first.stage_name, e.into()))?;
    let seeds = derive_data_seeds(data_seed_base);
    let mut records = Vec::with_capacity(stages.len());
    let mut last: Option<(CheckpointRef, Corpus)> = None;

    for (k, (cfg, corpus)) in stages.iter().enumerate() {
        let wrap = |e: TrainerError| wrap_stage(k, &cfg.stage_name, e);
        let swapped = k > 0 && needs_head_swap(&stages[k - 1].0, cfg);
        if swapped {
            model = swap_head(&model, cfg.num_classes, model_seed).map_err(|e| wrap(e.into()))?;
        }
        let split = make_seeded_split(corpus, env.ratios, seeds).map_err(|e| wrap(e.into()))?;
        let manifest = split.manifest(corpus);
        let stage_dir = env.run_dir.join(&cfg.stage_name);
        let split_path = stage_dir.join(SPLIT_FILE);
        fs::create_dir_all(&stage_dir).map_err(|e| wrap(io_err(&stage_dir, e)))?;
        crate::backend::write_atomic(&split_path, &serde_json::to_vec_pretty(&manifest).expect("manifest serializes"))
            .map_err(|e| wrap(io_err(&split_path, e)))?;
        let fp_in = model.encoder.fingerprint();
        log_event(
            &mut log,
            "stage_start",
            json!({
                "stage": cfg.stage_name,
                "index": k,
                "config": cfg,
                "dataset_digest": manifest.corpus_digest,
                "split": manifest,
                "head_swapped": swapped,
                "head_seed": model_seed,
                "encoder_fingerprint": fp_in,
            }),
        )
        .map_err(wrap)?;
        let mut ctx = StageContext {
            dir: stage_dir,
            model_seed,
            config_digest: env.config_digest.clone(),
            log: log.as_deref_mut(),
        };
        let outcome = run_stage(model, &split, cfg, &mut ctx).map_err(wrap)?;
        log_event(
            &mut log,
            "stage_end",
            json!({ "stage": cfg.stage_name, "best_epoch": outcome.best_epoch, "checkpoint": outcome.best.dir }),
        )
        .map_err(wrap)?;
        records.push(StageRecord {
            stage_name: cfg.stage_name.clone(),
            task_schema: cfg.task_schema.to_string(),
            dataset_digest: manifest.corpus_digest.clone(),
            split: manifest,
            head_seed: model_seed,
            head_swapped: swapped,
            encoder_fingerprint_in: fp_in,
            best_epoch: outcome.best_epoch,
            best_checkpoint: outcome.best.dir.clone(),
            best_encoder_fingerprint: outcome.model.encoder.fingerprint(),
            epochs: outcome.records,
        });
        model = outcome.model;
        last = Some((outcome.best, split.test));
    }
    let (final_checkpoint, test) = last.expect("non-empty stage list");
    Ok(PipelineOutcome {
        model,
        final_checkpoint,
        stages: records,
        test,
        data_seeds: seeds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub model_seed: i64,
    pub data_seed_base: i64,
    pub data_seeds: SeedTriple,
    #[serde(flatten)]
    pub status: RunStatus,
    pub final_checkpoint: Option<CheckpointRef>,
    pub test: Option<MetricsReport>,
    pub stages: Vec<StageRecord>,
    pub manifest: PathBuf,
}

impl RunResult {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSetResult {
    pub protocol: String,
    pub config_digest: String,
    pub per_run: Vec<RunResult>,
    pub completed: usize,
    /// Over completed runs only.
    pub aggregate: Option<AggregateReport>,
}

impl RunSetResult {
    pub fn test_reports(&self) -> Vec<MetricsReport> {
        self.per_run.iter().filter_map(|r| r.test.clone()).collect()
    }

    pub fn all_completed(&self) -> bool {
        self.completed == self.per_run.len()
    }
}

pub struct ProtocolEnv<'a> {
    pub registry: &'a BackboneRegistry,
    /// Receives `run-<i>/` directories.
    pub out_dir: PathBuf,
    pub jobs: usize,
}

fn execute_run(
    p: &ProtocolConfig,
    i: usize,
    stages: &[(StageConfig, &Corpus)],
    env: &ProtocolEnv<'_>,
    digest: &str,
) -> RunResult {
    let run_dir = env.out_dir.join(format!("run-{}", i + 1));
    let manifest = run_dir.join(MANIFEST_FILE);
    let (model_seed, base) = (p.model_seeds[i], p.data_seed_bases[i]);
    let mut result = RunResult {
        run: i + 1,
        model_seed,
        data_seed_base: base,
        data_seeds: derive_data_seeds(base),
        status: RunStatus::Completed,
        final_checkpoint: None,
        test: None,
        stages: Vec::new(),
        manifest: manifest.clone(),
    };
    let outcome = (|| -> Result<_, TrainerError> {
        let mut log = RunLog::create(&manifest)?;
        log.record(
            "run_start",
            json!({
                "protocol": p.name,
                "run": i + 1,
                "model_seed": model_seed,
                "data_seed_base": base,
                "data_seeds": result.data_seeds,
                "config_digest": digest,
                "config": p,
            }),
        )?;
        let penv = PipelineEnv {
            registry: env.registry,
            run_dir: run_dir.clone(),
            ratios: p.ratios,
            config_digest: digest.to_string(),
        };
        let out = run_pipeline(&p.backbone_id, stages, model_seed, base, &penv, Some(&mut log));
        let out = match out {
            Ok(o) => o,
            Err(e) => {
                log.record("run_end", json!({ "status": "failed", "error": e.to_string() }))?;
                return Err(e);
            }
        };
        let last = &stages.last().expect("validated").0;
        let (test, _) = evaluate_model(&out.model, &out.test, last.max_seq_len)?;
        log.record("test", json!({ "metrics": test, "checkpoint": out.final_checkpoint.dir }))?;
        log.record("run_end", json!({ "status": "completed" }))?;
        Ok((out, test))
    })();
    match outcome {
        Ok((out, test)) => {
            result.final_checkpoint = Some(out.final_checkpoint);
            result.test = Some(test);
            result.stages = out.stages;
        }
        Err(e) => {
            warn!("{} run {} failed: {e}", p.name, i + 1);
            result.status = RunStatus::Failed { error: e.to_string() };
        }
    }
    result
}

/// Executes every run of a protocol (concurrently up to `env.jobs`) and
/// aggregates test metrics over the runs that completed.
pub fn run_protocol(
    p: &ProtocolConfig,
    datasets: &BTreeMap<String, Corpus>,
    env: &ProtocolEnv<'_>,
) -> Result<RunSetResult, TrainerError> {
    p.validate()?;
    let stages: Vec<(StageConfig, &Corpus)> = p
        .stages
        .iter()
        .map(|s| {
            datasets
                .get(&s.dataset)
                .map(|c| (s.config.clone(), c))
                .ok_or_else(|| TrainerError::UnknownDataset(s.dataset.clone()))
        })
        .collect::<Result<_, _>>()?;
    for (cfg, corpus) in &stages {
        if corpus.schema != cfg.task_schema {
            return Err(TrainerError::SchemaMismatch {
                expected: format!("{} for stage {:?}", cfg.task_schema, cfg.stage_name),
                found: corpus.schema.to_string(),
            });
        }
    }
    let digest = p.digest();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(env.jobs.max(1))
        .build()
        .map_err(|e| TrainerError::Config(format!("thread pool: {e}")))?;
    let per_run: Vec<RunResult> =
        pool.install(|| (0..p.runs).into_par_iter().map(|i| execute_run(p, i, &stages, env, &digest)).collect());
    let reports: Vec<MetricsReport> = per_run.iter().filter_map(|r| r.test.clone()).collect();
    let aggregate = if reports.is_empty() { None } else { Some(aggregate_runs(&reports, None)?) };
    Ok(RunSetResult {
        protocol: p.name.clone(),
        config_digest: digest,
        completed: reports.len(),
        per_run,
        aggregate,
    })
}
