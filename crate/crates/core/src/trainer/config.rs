use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TrainerError;
use crate::corpora::{Schema, SplitRatios};
use crate::seed::digest_hex;

pub const PAPER_MODEL_SEEDS: [i64; 5] = [179, 50, 124, 253, 86];
pub const PAPER_DATA_SEED_BASES: [i64; 5] = [17, 38, 5, 91, 59];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    Accuracy,
    F1Micro,
    F1,
}

impl SelectionMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMetric::Accuracy => "accuracy",
            SelectionMetric::F1Micro => "f1_micro",
            SelectionMetric::F1 => "f1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Paper,
    Desk,
}

impl Profile {
    pub fn as_str(self) -> &'static str {
        match self {
            Profile::Paper => "paper",
            Profile::Desk => "desk",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Profile {
    type Err = TrainerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "paper" => Ok(Profile::Paper),
            "desk" => Ok(Profile::Desk),
            other => Err(TrainerError::Config(format!("unknown profile {other:?} (expected paper or desk)"))),
        }
    }
}

/// Adam moment parameters; the learning rate lives on the stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub stage_name: String,
    pub task_schema: Schema,
    pub num_classes: usize,
    pub epochs: u32,
    pub batch_size: usize,
    pub grad_accum: usize,
    pub warmup_steps: usize,
    pub weight_decay: f64,
    pub selection_metric: SelectionMetric,
    pub max_seq_len: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub adam: AdamConfig,
}

impl StageConfig {
    /// Stage defaults for a profile. The full-scale profile uses batch 7,
    /// accumulation 8, 500 warmup steps, decay 0.01 and 512 tokens; the desk
    /// profile is sized for the tiny backbones on a CPU.
    pub fn for_profile(profile: Profile, stage_name: &str, schema: Schema) -> Self {
        let selection_metric = match schema {
            Schema::BinaryAuthorship => SelectionMetric::Accuracy,
            Schema::Emotion6 | Schema::Sentiment2 => SelectionMetric::F1Micro,
        };
        match profile {
            Profile::Paper => Self {
                stage_name: stage_name.to_string(),
                task_schema: schema,
                num_classes: schema.num_classes(),
                epochs: if schema == Schema::BinaryAuthorship { 4 } else { 10 },
                batch_size: 7,
                grad_accum: 8,
                warmup_steps: 500,
                weight_decay: 0.01,
                selection_metric,
                max_seq_len: 512,
                learning_rate: 5e-5,
                adam: AdamConfig::default(),
            },
            Profile::Desk => Self {
                stage_name: stage_name.to_string(),
                task_schema: schema,
                num_classes: schema.num_classes(),
                epochs: if schema == Schema::BinaryAuthorship { 3 } else { 4 },
                batch_size: 8,
                grad_accum: 1,
                warmup_steps: 0,
                weight_decay: 0.01,
                selection_metric,
                max_seq_len: 128,
                learning_rate: 5e-3,
                adam: AdamConfig::default(),
            },
        }
    }

    pub fn validate(&self) -> Result<(), TrainerError> {
        let bad = |msg: String| Err(TrainerError::Config(format!("stage {:?}: {msg}", self.stage_name)));
        if self.stage_name.is_empty()
            || !self.stage_name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            || self.stage_name.starts_with('.')
        {
            return bad("stage_name must be a non-empty [A-Za-z0-9._-] name".into());
        }
        if self.num_classes != self.task_schema.num_classes() {
            return bad(format!(
                "num_classes {} does not match {} ({})",
                self.num_classes,
                self.task_schema,
                self.task_schema.num_classes()
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 || self.grad_accum == 0 || self.max_seq_len == 0 {
            return bad("batch_size, grad_accum and max_seq_len must be positive".into());
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay {} must be non-negative", self.weight_decay));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub config: StageConfig,
    /// Name of the dataset this stage trains on.
    pub dataset: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub name: String,
    pub backbone_id: String,
    pub runs: usize,
    pub model_seeds: Vec<i64>,
    pub data_seed_bases: Vec<i64>,
    #[serde(default)]
    pub ratios: SplitRatios,
    pub stages: Vec<StageSpec>,
}

impl ProtocolConfig {
    /// A protocol with the five default seed pairs.
    pub fn with_default_seeds(name: &str, backbone_id: &str, stages: Vec<StageSpec>) -> Self {
        Self {
            name: name.to_string(),
            backbone_id: backbone_id.to_string(),
            runs: PAPER_MODEL_SEEDS.len(),
            model_seeds: PAPER_MODEL_SEEDS.to_vec(),
            data_seed_bases: PAPER_DATA_SEED_BASES.to_vec(),
            ratios: SplitRatios::default(),
            stages,
        }
    }

    pub fn validate(&self) -> Result<(), TrainerError> {
        if self.runs == 0 {
            return Err(TrainerError::Config("runs must be at least 1".into()));
        }
        if self.model_seeds.len() != self.runs || self.data_seed_bases.len() != self.runs {
            return Err(TrainerError::Config(format!(
                "runs = {} but {} model seeds and {} data seed bases",
                self.runs,
                self.model_seeds.len(),
                self.data_seed_bases.len()
            )));
        }
        if self.stages.is_empty() {
            return Err(TrainerError::Config("protocol needs at least one stage".into()));
        }
        let mut names = std::collections::HashSet::new();
        for s in &self.stages {
            s.config.validate()?;
            if !names.insert(s.config.stage_name.as_str()) {
                return Err(TrainerError::Config(format!("duplicate stage name {:?}", s.config.stage_name)));
            }
        }
        Ok(())
    }

    /// Digest of the canonical JSON form.
    pub fn digest(&self) -> String {
        digest_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    /// Indices `k` where a new head is attached before stage `k`.
    pub fn head_swaps(&self) -> Vec<usize> {
        (1..self.stages.len())
            .filter(|&k| needs_head_swap(&self.stages[k - 1].config, &self.stages[k].config))
            .collect()
    }
}

/// A fresh head is needed when the class count or the label space changes.
pub fn needs_head_swap(prev: &StageConfig, next: &StageConfig) -> bool {
    prev.num_classes != next.num_classes || prev.task_schema != next.task_schema
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_profile_values() {
        let s = StageConfig::for_profile(Profile::Paper, "detect", Schema::BinaryAuthorship);
        assert_eq!((s.batch_size, s.grad_accum, s.warmup_steps, s.weight_decay, s.max_seq_len), (7, 8, 500, 0.01, 512));
        assert_eq!(s.epochs, 4);
        assert_eq!(s.selection_metric, SelectionMetric::Accuracy);
        let e = StageConfig::for_profile(Profile::Paper, "emotion", Schema::Emotion6);
        assert_eq!(e.epochs, 10);
        assert_eq!(e.selection_metric, SelectionMetric::F1Micro);
        assert_eq!(e.num_classes, 6);
    }

    #[test]
    fn validation() {
        let mut s = StageConfig::for_profile(Profile::Desk, "detect", Schema::BinaryAuthorship);
        s.validate().unwrap();
        s.num_classes = 6;
        assert!(s.validate().is_err());
        s.num_classes = 2;
        s.epochs = 0;
        assert!(s.validate().is_err());
        s.epochs = 1;
        s.stage_name = "../x".into();
        assert!(s.validate().is_err());
    }

    #[test]
    fn head_swap_boundaries() {
        let st = |n: &str, s: Schema| StageSpec {
            config: StageConfig::for_profile(Profile::Desk, n, s),
            dataset: n.into(),
        };
        let p = ProtocolConfig::with_default_seeds(
            "sga",
            "tiny-bidirectional",
            vec![st("sent", Schema::Sentiment2), st("emo", Schema::Emotion6), st("det", Schema::BinaryAuthorship)],
        );
        p.validate().unwrap();
        assert_eq!(p.head_swaps(), vec![1, 2]);
        let p2 = ProtocolConfig::with_default_seeds(
            "x",
            "tiny-bidirectional",
            vec![st("sent", Schema::Sentiment2), st("det", Schema::BinaryAuthorship)],
        );
        assert_eq!(p2.head_swaps(), vec![1]);
        let mut bad = p.clone();
        bad.model_seeds.pop();
        assert!(bad.validate().is_err());
    }
}
