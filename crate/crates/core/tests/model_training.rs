mod common;

use common::corpus::synth_samples;
use common::{toy_config, toy_sample};
use mecross::corpus::SynthSpec;
use mecross::model::{forward, train_fold, ModelConfig, TrainConfig, Variant};
use mecross::protocol::PreparedSample;

fn toy_batch() -> Vec<mecross::model::TrainingSample<f64>> {
    (0..6).map(|i| toy_sample(40 + i, (i % 3) as usize, (i % 2) as usize)).collect()
}

fn small_train() -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        ..TrainConfig::default()
    }
}

#[test]
fn same_seed_gives_identical_parameters() {
    let cfg = toy_config(Variant::MotionPlusRgbPatch);
    let a = train_fold(&toy_batch(), &cfg, &small_train(), 5).unwrap();
    let b = train_fold(&toy_batch(), &cfg, &small_train(), 5).unwrap();
    assert_eq!(a.history.len(), 15);
    assert_eq!(a.params.content_hash(), b.params.content_hash());
    assert_eq!(a.history, b.history);
    let c = train_fold(&toy_batch(), &cfg, &small_train(), 6).unwrap();
    assert_ne!(a.params.content_hash(), c.params.content_hash());
}

#[test]
fn history_terms_add_up() {
    let out = train_fold(&toy_batch(), &toy_config(Variant::DualMotion), &small_train(), 1).unwrap();
    for h in &out.history {
        assert!((h.total - (h.l_emo + h.l_ethnic + h.l_fusion)).abs() < 1e-12);
    }
    assert!(out.history.last().unwrap().total < out.history[0].total);
}

#[test]
fn absent_class_is_reported() {
    let only_two: Vec<_> = toy_batch().into_iter().filter(|s| s.labels.emotion != 2).collect();
    let out = train_fold(&only_two, &toy_config(Variant::MotionOnly), &small_train(), 0).unwrap();
    assert_eq!(out.warnings.len(), 1);
    assert!(train_fold::<f64>(&[], &toy_config(Variant::MotionOnly), &small_train(), 0).is_err());
}

#[test]
fn separable_corpus_is_fit_within_fifteen_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        subjects_per_group: 4,
        clips_per_subject: 40,
        image_size: 64,
        shift_strength: 0.0,
    };
    let (_, samples) = synth_samples(&spec, 3, dir.path(), false);
    let train: Vec<_> = samples.iter().map(PreparedSample::training_sample).collect();
    let cfg = ModelConfig::new(Variant::DualMotion);
    let out = train_fold(&train, &cfg, &TrainConfig::default(), 11).unwrap();
    let correct = train
        .iter()
        .filter(|s| forward(&out.params, &cfg, &s.input).unwrap().predicted_emotion() == s.labels.emotion)
        .count();
    let acc = correct as f64 / train.len() as f64;
    assert!(acc >= 0.95, "training accuracy {acc:.3}");
}
