//! Mono- versus mixed-ethnicity subject sampling with a frozen encoder and a
//! random forest on negative / non-negative labels.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Emotion, Ethnicity, Manifest};
use crate::model::FrozenEncoder;
use crate::seed::{derive_seed, rng_for};

use super::features::PreparedSample;
use super::folds::plan_loso;
use super::forest::{forest_train, ForestConfig};
use super::metrics::{aggregate_folds, ConfusionMatrix, FoldResult};
use super::ProtocolError;

pub const PRIMA_FACIE_SUBJECTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    AsianOnly,
    NonAsianOnly,
    Mixed,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::AsianOnly, ScenarioKind::NonAsianOnly, ScenarioKind::Mixed];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::AsianOnly => "asian_only",
            ScenarioKind::NonAsianOnly => "non_asian_only",
            ScenarioKind::Mixed => "mixed",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ScenarioKind::AsianOnly => "Asian only",
            ScenarioKind::NonAsianOnly => "Non-Asian only",
            ScenarioKind::Mixed => "Mixed",
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ProtocolError::InvalidConfig(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimaFacieScenario {
    pub kind: ScenarioKind,
    pub subjects: usize,
    pub seed: u64,
}

impl PrimaFacieScenario {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        Self {
            kind,
            subjects: PRIMA_FACIE_SUBJECTS,
            seed,
        }
    }

    /// `(asian, non_asian)` subject quotas; mixed splits the budget evenly.
    pub fn quotas(&self) -> (usize, usize) {
        match self.kind {
            ScenarioKind::AsianOnly => (self.subjects, 0),
            ScenarioKind::NonAsianOnly => (0, self.subjects),
            ScenarioKind::Mixed => (self.subjects / 2, self.subjects - self.subjects / 2),
        }
    }
}

/// Seeded draw without replacement from each ethnic group; subjects come back
/// sorted.
pub fn select_subjects(
    subjects: &BTreeMap<String, Ethnicity>,
    scenario: &PrimaFacieScenario,
) -> Result<Vec<String>, ProtocolError> {
    let (qa, qn) = scenario.quotas();
    let mut chosen = Vec::new();
    for (group, quota) in [(Ethnicity::Asian, qa), (Ethnicity::NonAsian, qn)] {
        if quota == 0 {
            continue;
        }
        let mut pool: Vec<&String> = subjects.iter().filter(|(_, &e)| e == group).map(|(s, _)| s).collect();
        if pool.len() < quota {
            return Err(ProtocolError::QuotaInfeasible {
                scenario: scenario.kind,
                group,
                needed: quota,
                available: pool.len(),
            });
        }
        let label = format!("prima_facie:{}:{group}", scenario.kind);
        pool.shuffle(&mut rng_for(scenario.seed, &label, 0));
        chosen.extend(pool.into_iter().take(quota).cloned());
    }
    chosen.sort();
    Ok(chosen)
}

fn eligible_subjects(manifest: &Manifest) -> BTreeMap<String, Ethnicity> {
    manifest
        .eligible()
        .into_iter()
        .filter_map(|r| r.mapped_ethnicity.map(|e| (r.subject_id.clone(), e)))
        .collect()
}

/// Sub-manifest holding every record of the sampled subjects.
pub fn sample_prima_facie(manifest: &Manifest, scenario: &PrimaFacieScenario) -> Result<Manifest, ProtocolError> {
    let chosen: BTreeSet<String> = select_subjects(&eligible_subjects(manifest), scenario)?.into_iter().collect();
    Ok(manifest.filtered(|r| chosen.contains(&r.subject_id)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryEmotion {
    Negative,
    NonNegative,
}

impl BinaryEmotion {
    pub const NAMES: [&'static str; 2] = ["Negative", "NonNegative"];

    pub fn index(self) -> usize {
        self as usize
    }
}

pub fn binarize(emotion: Emotion) -> BinaryEmotion {
    match emotion {
        Emotion::Negative => BinaryEmotion::Negative,
        Emotion::Positive | Emotion::Surprise => BinaryEmotion::NonNegative,
    }
}

/// Binary labels of every eligible record, keyed by sample key.
pub fn binarize_emotions(manifest: &Manifest) -> Vec<(String, BinaryEmotion)> {
    manifest
        .eligible()
        .into_iter()
        .filter_map(|r| r.emotion().map(|e| (r.key_string(), binarize(e))))
        .collect()
}

/// Scores of one scenario under one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedScore {
    pub seed: u64,
    pub subjects: Vec<String>,
    pub negative: f64,
    pub non_negative: f64,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaFacieRow {
    pub scenario: ScenarioKind,
    /// Means over seeds.
    pub negative: f64,
    pub non_negative: f64,
    pub average: f64,
    /// Sample standard deviation of `average` over seeds (0 for one seed).
    pub average_std: f64,
    pub per_seed: Vec<SeedScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimaFacieReport {
    pub rows: Vec<PrimaFacieRow>,
    pub seeds: Vec<u64>,
    pub forest: ForestConfig,
    pub encoder: String,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// LOSO over the sampled subjects with a forest retrained per fold.
fn score_scenario(
    samples: &[PreparedSample],
    features: &[Vec<f64>],
    subjects: &[String],
    forest: &ForestConfig,
    seed: u64,
) -> Result<(f64, f64, f64), ProtocolError> {
    let keep: BTreeSet<&str> = subjects.iter().map(String::as_str).collect();
    let idx: Vec<usize> = (0..samples.len())
        .filter(|&i| keep.contains(samples[i].subject_id.as_str()))
        .collect();
    let by_key: BTreeMap<&str, usize> = idx.iter().map(|&i| (samples[i].key.as_str(), i)).collect();
    let plan = plan_loso(idx.iter().map(|&i| (samples[i].key.as_str(), samples[i].subject_id.as_str())))?;
    let label = |i: usize| binarize(samples[i].emotion).index();
    let folds: Vec<FoldResult> = plan
        .par_iter()
        .enumerate()
        .map(|(k, fold)| {
            let train: Vec<usize> = fold.train.iter().map(|key| by_key[key.as_str()]).collect();
            let x: Vec<Vec<f64>> = train.iter().map(|&i| features[i].clone()).collect();
            let y: Vec<usize> = train.iter().map(|&i| label(i)).collect();
            let cfg = ForestConfig {
                seed: derive_seed(seed, "fold", k as u64),
                ..forest.clone()
            };
            let model = forest_train(&x, &y, 2, &cfg)?;
            let mut confusion = ConfusionMatrix::new(&BinaryEmotion::NAMES);
            for key in &fold.test {
                let i = by_key[key.as_str()];
                confusion.record(label(i), model.predict(&features[i]));
            }
            Ok(FoldResult {
                held_out: fold.held_out.clone(),
                confusion,
            })
        })
        .collect::<Result<_, ProtocolError>>()?;
    let report = aggregate_folds(&folds)?;
    let f = &report.f1.per_class;
    Ok((f[0], f[1], (f[0] + f[1]) / 2.0))
}

/// Frozen-encoder features for every sample, in sample order.
pub fn frozen_features(samples: &[PreparedSample], encoder: &FrozenEncoder<f64>) -> Result<Vec<Vec<f64>>, ProtocolError> {
    samples
        .par_iter()
        .map(|s| Ok(encoder.extract(&s.model_input().flow)?))
        .collect()
}

/// Scenario report: one row per scenario in the given order, each the
/// mean over `seeds`. Features are extracted once and shared by all runs.
pub fn run_prima_facie(
    samples: &[PreparedSample],
    scenarios: &[ScenarioKind],
    seeds: &[u64],
    encoder: &FrozenEncoder<f64>,
    forest: &ForestConfig,
) -> Result<PrimaFacieReport, ProtocolError> {
    if seeds.is_empty() || scenarios.is_empty() {
        return Err(ProtocolError::InvalidConfig("need at least one scenario and one seed".into()));
    }
    let features = frozen_features(samples, encoder)?;
    let subjects: BTreeMap<String, Ethnicity> =
        samples.iter().map(|s| (s.subject_id.clone(), s.ethnicity)).collect();
    let mut rows = Vec::with_capacity(scenarios.len());
    for &kind in scenarios {
        let mut per_seed = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let scenario = PrimaFacieScenario::new(kind, seed);
            let chosen = select_subjects(&subjects, &scenario)?;
            let run_seed = derive_seed(seed, &format!("prima_facie:{kind}"), 1);
            let (negative, non_negative, average) = score_scenario(samples, &features, &chosen, forest, run_seed)?;
            per_seed.push(SeedScore {
                seed,
                subjects: chosen,
                negative,
                non_negative,
                average,
            });
        }
        let col = |f: fn(&SeedScore) -> f64| per_seed.iter().map(f).collect::<Vec<_>>();
        let (negative, non_negative) = (mean(&col(|s| s.negative)), mean(&col(|s| s.non_negative)));
        rows.push(PrimaFacieRow {
            scenario: kind,
            negative,
            non_negative,
            average: (negative + non_negative) / 2.0,
            average_std: std(&col(|s| s.average)),
            per_seed,
        });
    }
    Ok(PrimaFacieReport {
        rows,
        seeds: seeds.to_vec(),
        forest: forest.clone(),
        encoder: encoder.source().to_string(),
    })
}
