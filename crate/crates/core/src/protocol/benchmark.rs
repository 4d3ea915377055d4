//! LOSO training and evaluation of the network variants.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{
    forward, model_checkpoint, train_fold, LossBreakdown, ModelConfig, TrainConfig, TrainingSample, Variant,
};
use crate::seed::{derive_seed, sha256_hex};

use super::features::PreparedSample;
use super::folds::plan_loso;
use super::metrics::{aggregate_folds, ConfusionMatrix, FoldResult, MetricsReport};
use super::ProtocolError;

pub const EMOTION_NAMES: [&str; 3] = ["Negative", "Positive", "Surprise"];

/// Shared settings for every variant of a benchmark. `model.variant` is
/// overridden per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl BenchmarkConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            model: ModelConfig::new(Variant::DualMotion),
            train: TrainConfig::default(),
            seed,
        }
    }

    pub fn for_variant(&self, variant: Variant) -> ModelConfig {
        ModelConfig {
            variant,
            ..self.model.clone()
        }
    }
}

/// Everything needed to skip a finished fold on resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub run_hash: String,
    pub fold_index: usize,
    pub held_out: String,
    pub seed: u64,
    pub confusion: ConfusionMatrix,
    pub history: Vec<LossBreakdown<f64>>,
    /// `(sample key, predicted class)` for the test side.
    pub predictions: Vec<(String, usize)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoRun {
    pub variant: Variant,
    pub run_hash: String,
    pub report: MetricsReport,
    pub folds: Vec<FoldRecord>,
}

/// Hash of everything a fold's outcome depends on: model and training
/// configuration, seed, and the ordered sample keys with their labels.
pub fn run_hash(model: &ModelConfig, cfg: &BenchmarkConfig, samples: &[PreparedSample]) -> String {
    let keys: Vec<(&str, &str, usize, usize)> = samples
        .iter()
        .map(|s| (s.key.as_str(), s.subject_id.as_str(), s.emotion.index(), s.ethnicity.index()))
        .collect();
    let blob = serde_json::json!({
        "model": model,
        "train": cfg.train,
        "seed": cfg.seed,
        "samples": keys,
    });
    sha256_hex(blob.to_string().as_bytes())
}

fn fold_file_stem(dir: &Path, index: usize, held_out: &str) -> PathBuf {
    let safe: String = held_out
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    dir.join(format!("fold-{index:03}-{safe}"))
}

fn load_fold(path: &Path, hash: &str) -> Option<FoldRecord> {
    let text = std::fs::read_to_string(path).ok()?;
    let rec: FoldRecord = serde_json::from_str(&text).ok()?;
    (rec.run_hash == hash).then_some(rec)
}

/// Full LOSO for one variant. With `checkpoint_dir`, each finished fold
/// writes `fold-NNN-<subject>.json` (metrics) and `.ckpt` (weights); folds
/// whose record matches the current run hash are reused instead of retrained.
pub fn run_loso(
    samples: &[PreparedSample],
    variant: Variant,
    cfg: &BenchmarkConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<LosoRun, ProtocolError> {
    let model = cfg.for_variant(variant);
    model.validate()?;
    if variant.needs_rgb() && samples.iter().any(|s| s.rgb.is_none()) {
        return Err(ProtocolError::InvalidConfig(format!(
            "variant {variant} needs apex frames; prepare samples with RGB"
        )));
    }
    let hash = run_hash(&model, cfg, samples);
    let plan = plan_loso(samples.iter().map(|s| (s.key.as_str(), s.subject_id.as_str())))?;
    let by_key: BTreeMap<&str, usize> = samples.iter().enumerate().map(|(i, s)| (s.key.as_str(), i)).collect();
    let training: Vec<TrainingSample<f64>> = samples.iter().map(PreparedSample::training_sample).collect();

    let folds: Vec<FoldRecord> = plan
        .par_iter()
        .enumerate()
        .map(|(k, fold)| {
            let stem = checkpoint_dir.map(|d| fold_file_stem(d, k, &fold.held_out));
            if let Some(rec) = stem.as_ref().and_then(|s| load_fold(&s.with_extension("json"), &hash)) {
                log::info!("{variant}: fold {k} ({}) reused from checkpoint", fold.held_out);
                return Ok(rec);
            }
            let seed = derive_seed(cfg.seed, "fold", k as u64);
            let train: Vec<TrainingSample<f64>> =
                fold.train.iter().map(|key| training[by_key[key.as_str()]].clone()).collect();
            let outcome = train_fold(&train, &model, &cfg.train, seed)?;
            let mut confusion = ConfusionMatrix::new(&EMOTION_NAMES);
            let mut predictions = Vec::with_capacity(fold.test.len());
            for key in &fold.test {
                let i = by_key[key.as_str()];
                let predicted = forward(&outcome.params, &model, &training[i].input)?.predicted_emotion();
                confusion.record(samples[i].emotion.index(), predicted);
                predictions.push((key.clone(), predicted));
            }
            let rec = FoldRecord {
                run_hash: hash.clone(),
                fold_index: k,
                held_out: fold.held_out.clone(),
                seed,
                confusion,
                history: outcome.history.iter().map(LossBreakdown::to_f64).collect(),
                predictions,
                warnings: outcome.warnings,
            };
            if let Some(stem) = &stem {
                let extra = serde_json::json!({ "fold": k, "held_out": fold.held_out, "run_hash": hash });
                model_checkpoint(&model, &outcome.params, extra).save(&stem.with_extension("ckpt"))?;
                let json = serde_json::to_string_pretty(&rec).expect("fold record serializes");
                let path = stem.with_extension("json");
                crate::io_util::write_atomic(&path, json.as_bytes())
                    .map_err(|source| ProtocolError::Io { path, source })?;
            }
            log::info!("{variant}: fold {k} ({}) done", fold.held_out);
            Ok(rec)
        })
        .collect::<Result<_, ProtocolError>>()?;

    let results: Vec<FoldResult> = folds
        .iter()
        .map(|f| FoldResult {
            held_out: f.held_out.clone(),
            confusion: f.confusion.clone(),
        })
        .collect();
    Ok(LosoRun {
        variant,
        run_hash: hash,
        report: aggregate_folds(&results)?,
        folds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub variant: Variant,
    pub ethnic_context: bool,
    /// Per-class F1 in [`EMOTION_NAMES`] order.
    pub f1: [f64; 3],
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub runs: Vec<LosoRun>,
}

pub fn benchmark_row(run: &LosoRun) -> BenchmarkRow {
    let f = &run.report.f1.per_class;
    BenchmarkRow {
        variant: run.variant,
        ethnic_context: run.variant.has_ethnic_context(),
        f1: [f[0], f[1], f[2]],
        average: (f[0] + f[1] + f[2]) / 3.0,
    }
}

/// One LOSO run per variant, rows in the given order. Variant checkpoints
/// go to `<checkpoint_dir>/<variant>/`.
pub fn run_benchmark(
    samples: &[PreparedSample],
    variants: &[Variant],
    cfg: &BenchmarkConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<BenchmarkReport, ProtocolError> {
    let mut runs = Vec::with_capacity(variants.len());
    for &v in variants {
        let dir = checkpoint_dir.map(|d| d.join(v.as_str()));
        runs.push(run_loso(samples, v, cfg, dir.as_deref())?);
    }
    Ok(BenchmarkReport {
        rows: runs.iter().map(benchmark_row).collect(),
        runs,
    })
}

