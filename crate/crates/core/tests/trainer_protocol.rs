use std::collections::BTreeMap;

use emodetect_core::backend::{load_checkpoint, BackboneRegistry, BUILTIN_BIDIRECTIONAL, BUILTIN_CAUSAL};
use emodetect_core::corpora::toy::{desk_detection_corpus, desk_emotion_corpus};
use emodetect_core::corpora::{Corpus, Doc, GenerationConfig, Label, Schema};
use emodetect_core::emotaxon::{emotion_to_sentiment, LexiconResolver};
use emodetect_core::trainer::{
    run_protocol, Profile, ProtocolConfig, ProtocolEnv, RunStatus, StageConfig, StageSpec, TrainerError,
};

fn detection() -> Corpus {
    desk_detection_corpus(200, &GenerationConfig::default()).unwrap().corpus
}

fn sentiment() -> Corpus {
    let resolver = LexiconResolver::default();
    let emo = desk_emotion_corpus().unwrap();
    let docs = emo
        .docs
        .iter()
        .map(|d| {
            let Label::Emotion(e) = d.label else { unreachable!() };
            let s = emotion_to_sentiment(e, Some(&d.text), Some(&resolver)).unwrap();
            Doc::new(format!("s-{}", d.id), d.text.clone(), Label::Sentiment(s.label))
        })
        .collect();
    Corpus::new(Schema::Sentiment2, docs, vec!["test sentiment view".into()]).unwrap()
}

fn datasets() -> BTreeMap<String, Corpus> {
    let mut m = BTreeMap::new();
    m.insert("detect".to_string(), detection());
    m.insert("emotion".to_string(), desk_emotion_corpus().unwrap());
    m.insert("sentiment".to_string(), sentiment());
    m
}

fn stage(name: &str, schema: Schema, epochs: u32) -> StageSpec {
    let mut config = StageConfig::for_profile(Profile::Desk, name, schema);
    config.epochs = epochs;
    StageSpec {
        config,
        dataset: name.to_string(),
    }
}

fn protocol(name: &str, stages: Vec<StageSpec>, runs: usize) -> ProtocolConfig {
    let mut p = ProtocolConfig::with_default_seeds(name, BUILTIN_BIDIRECTIONAL, stages);
    p.runs = runs;
    p.model_seeds.truncate(runs);
    p.data_seed_bases.truncate(runs);
    p
}

#[test]
fn single_epoch_stage_has_one_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let reg = BackboneRegistry::default();
    let env = ProtocolEnv { registry: &reg, out_dir: dir.path().to_path_buf(), jobs: 1 };
    let p = protocol("one", vec![stage("detect", Schema::BinaryAuthorship, 1)], 1);
    let r = run_protocol(&p, &datasets(), &env).unwrap();
    assert_eq!(r.per_run.len(), 1);
    let s = &r.per_run[0].stages[0];
    assert_eq!(s.epochs.len(), 1);
    assert_eq!(s.best_epoch, 1);
    assert!(dir.path().join("run-1/detect/epoch-1/weights.bin").is_file());
    assert!(!dir.path().join("run-1/detect/epoch-2").exists());
}

#[test]
fn emotion_then_detection_swaps_head_and_carries_encoder() {
    let dir = tempfile::tempdir().unwrap();
    let reg = BackboneRegistry::default();
    let env = ProtocolEnv { registry: &reg, out_dir: dir.path().to_path_buf(), jobs: 2 };
    let p = protocol(
        "emo",
        vec![stage("emotion", Schema::Emotion6, 3), stage("detect", Schema::BinaryAuthorship, 3)],
        2,
    );
    let r = run_protocol(&p, &datasets(), &env).unwrap();
    assert_eq!(r.completed, 2);
    for run in &r.per_run {
        let (emo, det) = (&run.stages[0], &run.stages[1]);
        assert!(!emo.head_swapped && det.head_swapped);
        assert_eq!(det.encoder_fingerprint_in, emo.best_encoder_fingerprint);
        // the selected epoch attains the maximum of the recorded series
        for s in [emo, det] {
            assert_eq!(s.epochs.len(), 3);
            let max = s.epochs.iter().map(|e| e.selection_value).fold(f64::MIN, f64::max);
            let first_max = s.epochs.iter().find(|e| e.selection_value == max).unwrap().epoch;
            assert_eq!(s.best_epoch, first_max);
        }
        let (model, meta) = load_checkpoint(&det.best_checkpoint).unwrap();
        assert_eq!(model.num_classes(), 2);
        assert_eq!(meta.model_seed, run.model_seed);
        assert_eq!(meta.encoder_fingerprint, det.best_encoder_fingerprint);
        let (emo_model, _) = load_checkpoint(&emo.best_checkpoint).unwrap();
        assert_eq!(emo_model.num_classes(), 6);
    }
    let manifest = std::fs::read_to_string(&r.per_run[0].manifest).unwrap();
    let events: Vec<String> = manifest
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["event"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(events.first().unwrap(), "run_start");
    assert_eq!(events.last().unwrap(), "run_end");
    assert_eq!(events.iter().filter(|e| *e == "epoch").count(), 6);
}

#[test]
fn sentiment_emotion_detection_chain_swaps_twice() {
    let dir = tempfile::tempdir().unwrap();
    let reg = BackboneRegistry::default();
    let env = ProtocolEnv { registry: &reg, out_dir: dir.path().to_path_buf(), jobs: 1 };
    let p = protocol(
        "sga",
        vec![
            stage("sentiment", Schema::Sentiment2, 1),
            stage("emotion", Schema::Emotion6, 1),
            stage("detect", Schema::BinaryAuthorship, 1),
        ],
        1,
    );
    let r = run_protocol(&p, &datasets(), &env).unwrap();
    let swaps: Vec<bool> = r.per_run[0].stages.iter().map(|s| s.head_swapped).collect();
    assert_eq!(swaps, vec![false, true, true]);
}

#[test]
fn paired_protocols_share_test_splits() {
    let dir = tempfile::tempdir().unwrap();
    let reg = BackboneRegistry::default();
    let data = datasets();
    let base = protocol("bs", vec![stage("detect", Schema::BinaryAuthorship, 1)], 2);
    let emo = protocol(
        "emobs",
        vec![stage("emotion", Schema::Emotion6, 1), stage("detect", Schema::BinaryAuthorship, 1)],
        2,
    );
    let env_a = ProtocolEnv { registry: &reg, out_dir: dir.path().join("bs"), jobs: 2 };
    let env_b = ProtocolEnv { registry: &reg, out_dir: dir.path().join("emobs"), jobs: 2 };
    let a = run_protocol(&base, &data, &env_a).unwrap();
    let b = run_protocol(&emo, &data, &env_b).unwrap();
    for (ra, rb) in a.per_run.iter().zip(&b.per_run) {
        assert_eq!(ra.stages[0].split.test_ids, rb.stages[1].split.test_ids);
    }
}

#[test]
fn causal_backbone_trains() {
    let dir = tempfile::tempdir().unwrap();
    let reg = BackboneRegistry::default();
    let env = ProtocolEnv { registry: &reg, out_dir: dir.path().to_path_buf(), jobs: 1 };
    let mut p = protocol("causal", vec![stage("detect", Schema::BinaryAuthorship, 2)], 1);
    p.backbone_id = BUILTIN_CAUSAL.into();
    let r = run_protocol(&p, &datasets(), &env).unwrap();
    assert!(r.per_run[0].test.as_ref().unwrap().accuracy >= 60.0);
}

#[test]
fn divergence_fails_the_run_and_keeps_going() {
    let dir = tempfile::tempdir().unwrap();
    let reg = BackboneRegistry::default();
    let env = ProtocolEnv { registry: &reg, out_dir: dir.path().to_path_buf(), jobs: 1 };
    let mut p = protocol("nan", vec![stage("detect", Schema::BinaryAuthorship, 2)], 2);
    p.stages[0].config.learning_rate = 1e38;
    let r = run_protocol(&p, &datasets(), &env).unwrap();
    assert_eq!(r.completed, 0);
    assert!(r.aggregate.is_none());
    for run in &r.per_run {
        let RunStatus::Failed { error } = &run.status else { panic!("run should fail") };
        assert!(error.contains("non-finite"), "{error}");
    }
}

#[test]
fn schema_and_dataset_errors() {
    let dir = tempfile::tempdir().unwrap();
    let reg = BackboneRegistry::default();
    let env = ProtocolEnv { registry: &reg, out_dir: dir.path().to_path_buf(), jobs: 1 };
    let mut p = protocol("bad", vec![stage("detect", Schema::BinaryAuthorship, 1)], 1);
    p.stages[0].dataset = "emotion".into();
    assert!(matches!(run_protocol(&p, &datasets(), &env), Err(TrainerError::SchemaMismatch { .. })));
    p.stages[0].dataset = "missing".into();
    assert!(matches!(run_protocol(&p, &datasets(), &env), Err(TrainerError::UnknownDataset(_))));
}
