//! Experiment configuration files.
//!
//! Precedence, highest first: command-line flags, fields in the config file,
//! then the defaults of the selected profile.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use emodetect_core::backend::{BackboneRegistry, BUILTIN_BIDIRECTIONAL};
use emodetect_core::corpora::{
    load_corpus, toy, Corpus, CorpusFormat, Doc, GenerationConfig, Label, Schema, SplitRatios,
};
use emodetect_core::emotaxon::{emotion_to_sentiment, LexiconResolver};
use emodetect_core::trainer::{Profile, ProtocolConfig, StageConfig, StageSpec, PAPER_DATA_SEED_BASES, PAPER_MODEL_SEEDS};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    /// Optional JSON or TOML file describing extra backbones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backbones: Option<PathBuf>,
    #[serde(default)]
    pub datasets: BTreeMap<String, DatasetRef>,
    #[serde(default)]
    pub protocols: Vec<ProtocolSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportSpec>,
}

fn default_profile() -> Profile {
    Profile::Desk
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_jobs() -> usize {
    1
}

/// Either a file on disk or one of the bundled toy sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    /// `desk-detection`, `desk-emotion`, `desk-sentiment` or `desk-chatgpt100`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_human: Option<usize>,
    #[serde(default)]
    pub seed: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub name: String,
    #[serde(default = "default_backbone")]
    pub backbone: String,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_seeds: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_seed_bases: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<String>,
    pub stages: Vec<StageOverrides>,
}

fn default_backbone() -> String {
    BUILTIN_BIDIRECTIONAL.to_string()
}

fn default_runs() -> usize {
    PAPER_MODEL_SEEDS.len()
}

/// A stage as written in the config; unset fields come from the profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageOverrides {
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Inferred from the dataset when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_accum: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_seq_len: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    pub baseline: String,
    pub candidate: String,
}

fn config_err(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::User(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        // relative paths are taken from the config file's directory
        let base = path.parent().unwrap_or(Path::new(""));
        for d in cfg.datasets.values_mut() {
            if let Some(p) = &d.path {
                if p.is_relative() {
                    d.path = Some(base.join(p));
                }
            }
        }
        if let Some(b) = &cfg.backbones {
            if b.is_relative() {
                cfg.backbones = Some(base.join(b));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| format!("byte {}..{}", s.start, s.end)).unwrap_or_default();
            config_err(field, e.message().to_string())
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Field-level sanity checks that need no dataset access.
    pub fn check(&self) -> Result<(), CliError> {
        if self.jobs == 0 {
            return Err(config_err("jobs", "must be at least 1"));
        }
        for (name, d) in &self.datasets {
            let field = format!("datasets.{name}");
            match (&d.path, &d.builtin) {
                (Some(_), Some(_)) => return Err(config_err(field, "set either path or builtin, not both")),
                (None, None) => return Err(config_err(field, "needs a path or a builtin")),
                (None, Some(b)) if !BUILTINS.contains(&b.as_str()) => {
                    return Err(config_err(format!("{field}.builtin"), format!("unknown builtin {b:?}; expected one of {BUILTINS:?}")))
                }
                _ => {}
            }
            if let Some(f) = &d.format {
                f.parse::<CorpusFormat>()
                    .map_err(|e| config_err(format!("{field}.format"), e.to_string()))?;
            }
        }
        let mut names = std::collections::HashSet::new();
        for (i, p) in self.protocols.iter().enumerate() {
            let field = format!("protocols[{i}]");
            if !names.insert(p.name.as_str()) {
                return Err(config_err(format!("{field}.name"), format!("duplicate protocol {:?}", p.name)));
            }
            if p.stages.is_empty() {
                return Err(config_err(format!("{field}.stages"), "at least one stage required"));
            }
            if let Some(r) = &p.ratios {
                r.parse::<SplitRatios>()
                    .map_err(|e| config_err(format!("{field}.ratios"), e.to_string()))?;
            }
            for (k, s) in p.stages.iter().enumerate() {
                if !self.datasets.contains_key(&s.dataset) {
                    return Err(config_err(
                        format!("{field}.stages[{k}].dataset"),
                        format!("no dataset named {:?}", s.dataset),
                    ));
                }
                if let Some(schema) = &s.schema {
                    schema
                        .parse::<Schema>()
                        .map_err(|e| config_err(format!("{field}.stages[{k}].schema"), e.to_string()))?;
                }
            }
        }
        if let Some(r) = &self.report {
            for (field, name) in [("report.baseline", &r.baseline), ("report.candidate", &r.candidate)] {
                if !names.contains(name.as_str()) {
                    return Err(config_err(field, format!("no protocol named {name:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn registry(&self) -> Result<BackboneRegistry, CliError> {
        match &self.backbones {
            None => Ok(BackboneRegistry::default()),
            Some(p) => load_registry(p),
        }
    }

    /// Loads only the datasets the protocols reference.
    pub fn load_datasets(&self, names: &[&str]) -> Result<BTreeMap<String, Corpus>, CliError> {
        let mut out = BTreeMap::new();
        for &name in names {
            let d = self
                .datasets
                .get(name)
                .ok_or_else(|| config_err("datasets", format!("no dataset named {name:?}")))?;
            out.insert(name.to_string(), load_dataset(name, d)?);
        }
        Ok(out)
    }

    pub fn protocol_datasets<'a>(&self, protocols: &[&'a ProtocolSpec]) -> Vec<&'a str> {
        let mut names: Vec<&str> = protocols
            .iter()
            .flat_map(|p| p.stages.iter().map(|s| s.dataset.as_str()))
            .collect();
        names.sort_unstable();
        names.dedup();
        names
    }

    pub fn resolve_protocol(&self, spec: &ProtocolSpec, datasets: &BTreeMap<String, Corpus>) -> Result<ProtocolConfig, CliError> {
        let mut stages = Vec::with_capacity(spec.stages.len());
        for (k, s) in spec.stages.iter().enumerate() {
            let field = format!("protocols.{}.stages[{k}]", spec.name);
            let corpus = datasets
                .get(&s.dataset)
                .ok_or_else(|| config_err(format!("{field}.dataset"), "dataset not loaded"))?;
            let schema = match &s.schema {
                Some(text) => text.parse::<Schema>().map_err(|e| config_err(format!("{field}.schema"), e.to_string()))?,
                None => corpus.schema,
            };
            let name = s.name.clone().unwrap_or_else(|| s.dataset.clone());
            let mut c = StageConfig::for_profile(self.profile, &name, schema);
            if let Some(v) = s.epochs {
                c.epochs = v;
            }
            if let Some(v) = s.batch_size {
                c.batch_size = v;
            }
            if let Some(v) = s.grad_accum {
                c.grad_accum = v;
            }
            if let Some(v) = s.warmup_steps {
                c.warmup_steps = v;
            }
            if let Some(v) = s.weight_decay {
                c.weight_decay = v;
            }
            if let Some(v) = s.learning_rate {
                c.learning_rate = v;
            }
            if let Some(v) = s.max_seq_len {
                c.max_seq_len = v;
            }
            stages.push(StageSpec {
                config: c,
                dataset: s.dataset.clone(),
            });
        }
        let seeds = |given: &Option<Vec<i64>>, defaults: &[i64], what: &str| -> Result<Vec<i64>, CliError> {
            match given {
                Some(v) => Ok(v.clone()),
                None if spec.runs <= defaults.len() => Ok(defaults[..spec.runs].to_vec()),
                None => Err(config_err(
                    format!("protocols.{}.{what}", spec.name),
                    format!("{} runs requested; list the seeds explicitly", spec.runs),
                )),
            }
        };
        let p = ProtocolConfig {
            name: spec.name.clone(),
            backbone_id: spec.backbone.clone(),
            runs: spec.runs,
            model_seeds: seeds(&spec.model_seeds, &PAPER_MODEL_SEEDS, "model_seeds")?,
            data_seed_bases: seeds(&spec.data_seed_bases, &PAPER_DATA_SEED_BASES, "data_seed_bases")?,
            ratios: match &spec.ratios {
                Some(r) => r.parse().map_err(|e: emodetect_core::corpora::CorpusError| {
                    config_err(format!("protocols.{}.ratios", spec.name), e.to_string())
                })?,
                None => SplitRatios::default(),
            },
            stages,
        };
        p.validate()
            .map_err(|e| config_err(format!("protocols.{}", spec.name), e.to_string()))?;
        Ok(p)
    }
}

/// Digest over everything that determines results: resolved protocols and
/// the content of their datasets. Output paths and job counts are excluded.
pub fn experiment_digest(name: &str, protocols: &[ProtocolConfig], datasets: &BTreeMap<String, Corpus>) -> String {
    let mut h = Sha256::new();
    h.update(name.as_bytes());
    h.update([0]);
    for p in protocols {
        h.update(p.digest().as_bytes());
        h.update([0]);
    }
    for (name, c) in datasets {
        h.update(name.as_bytes());
        h.update([0]);
        h.update(c.digest().as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

pub const BUILTINS: [&str; 4] = ["desk-detection", "desk-emotion", "desk-sentiment", "desk-chatgpt100"];

pub fn builtin_corpus(kind: &str, n_human: Option<usize>, seed: i64) -> Result<Corpus, CliError> {
    let corpus = match kind {
        "desk-detection" => {
            let cfg = GenerationConfig {
                seed,
                ..GenerationConfig::default()
            };
            toy::desk_detection_corpus(n_human.unwrap_or(200), &cfg)?.corpus
        }
        "desk-emotion" => toy::desk_emotion_corpus()?,
        "desk-sentiment" => to_sentiment(&toy::desk_emotion_corpus()?)?,
        "desk-chatgpt100" => toy::desk_chatgpt100(seed)?,
        other => return Err(CliError::User(format!("unknown builtin dataset {other:?}; expected one of {BUILTINS:?}"))),
    };
    Ok(corpus)
}

fn load_dataset(name: &str, d: &DatasetRef) -> Result<Corpus, CliError> {
    if let Some(b) = &d.builtin {
        return builtin_corpus(b, d.n_human, d.seed);
    }
    let path = d.path.as_ref().ok_or_else(|| config_err(format!("datasets.{name}"), "needs a path"))?;
    let format = resolve_format(path, d.format.as_deref())?;
    Ok(load_corpus(path, format)?)
}

/// Explicit format, else a guess from the file extension.
pub fn resolve_format(path: &Path, explicit: Option<&str>) -> Result<CorpusFormat, CliError> {
    if let Some(f) = explicit {
        return f.parse::<CorpusFormat>().map_err(|e| CliError::User(e.to_string()));
    }
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "jsonl" | "json" => Ok(CorpusFormat::CorpusJsonl),
        "csv" => Ok(CorpusFormat::GneCsv),
        "tsv" => Ok(CorpusFormat::Sst2Tsv),
        "xml" | "xmlish" => Ok(CorpusFormat::AffectiveTextXmlish),
        _ => Err(CliError::User(format!(
            "cannot infer the format of {}; pass --format",
            path.display()
        ))),
    }
}

/// Emotion-6 corpus relabelled onto sentiment with the default lexicon for
/// the surprise class.
pub fn to_sentiment(emotions: &Corpus) -> Result<Corpus, CliError> {
    if emotions.schema != Schema::Emotion6 {
        return Err(CliError::User(format!("expected an emotion-6 corpus, got {}", emotions.schema)));
    }
    let resolver = LexiconResolver::default();
    let mut docs = Vec::with_capacity(emotions.len());
    for d in &emotions.docs {
        let Label::Emotion(e) = d.label else { unreachable!("validated schema") };
        let s = emotion_to_sentiment(e, Some(&d.text), Some(&resolver)).map_err(|e| CliError::User(e.to_string()))?;
        let mut doc = Doc::new(d.id.clone(), d.text.clone(), Label::Sentiment(s.label));
        doc.meta = d.meta.clone();
        if let Some(r) = s.resolver_id {
            doc = doc.with_meta("sentiment_resolver", r);
        }
        docs.push(doc);
    }
    let mut provenance = emotions.provenance.clone();
    provenance.push("mapped emotion-6 -> sentiment-2".into());
    Ok(Corpus::new(Schema::Sentiment2, docs, provenance)?)
}

pub fn load_registry(path: &Path) -> Result<BackboneRegistry, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::User(format!("cannot read backbone registry {}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    let mut reg: BackboneRegistry = if is_toml {
        toml::from_str(&text).map_err(|e| config_err("backbones", e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| config_err("backbones", e.to_string()))?
    };
    let base = path.parent().unwrap_or(Path::new(""));
    for entry in reg.backbones.values_mut() {
        if let emodetect_core::backend::RegistryEntry::Path { path, .. } = entry {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
    Ok(reg)
}
