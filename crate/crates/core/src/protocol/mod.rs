//! Evaluation protocols: leave-one-subject-out planning over the merged
//! corpus, pooled macro-F1, the mono- versus mixed-ethnicity sampling study
//! with a random forest on frozen features, and the variant benchmark.

mod benchmark;
mod features;
mod folds;
mod forest;
mod metrics;
mod prima;
mod report;

use std::path::PathBuf;

pub use benchmark::{
    benchmark_row, run_benchmark, run_hash, run_loso, BenchmarkConfig, BenchmarkReport, BenchmarkRow, FoldRecord,
    LosoRun, EMOTION_NAMES,
};
pub use features::{
    compute_flow_image, flow_image_path, flow_params_hash, materialize_flow, prepare_samples, FlowSidecar, FlowStat,
    PreparedSample,
};
pub use folds::{plan_loso, FoldPlan};
pub use forest::{forest_predict, forest_train, gini, FeatureSubsample, ForestConfig, ForestModel, Tree};
pub use metrics::{aggregate_folds, macro_f1, ConfusionMatrix, F1Scores, FoldResult, MetricsReport, POOLED_AGGREGATION};
pub use prima::{
    binarize, binarize_emotions, frozen_features, run_prima_facie, sample_prima_facie, select_subjects, BinaryEmotion,
    PrimaFacieReport, PrimaFacieRow, PrimaFacieScenario, ScenarioKind, SeedScore, PRIMA_FACIE_SUBJECTS,
};
pub use report::{
    benchmark_csv, benchmark_markdown, metrics_csv, metrics_markdown, prima_facie_csv, prima_facie_markdown, write_text,
    RunProvenance, DEVIATIONS,
};

use crate::corpus::{CorpusError, Ethnicity};
use crate::flowcore::FlowError;
use crate::model::ModelError;
use crate::ErrorKind;

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("leave-one-subject-out needs at least 2 subjects, found {0}")]
    TooFewSubjects(usize),
    #[error("confusion matrix is empty")]
    EmptyConfusion,
    #[error("class lists differ between folds: {left:?} vs {right:?}")]
    ClassMismatch { left: Vec<String>, right: Vec<String> },
    #[error("scenario {scenario} needs {needed} {group} subjects, only {available} available")]
    QuotaInfeasible {
        scenario: ScenarioKind,
        group: Ethnicity,
        needed: usize,
        available: usize,
    },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature vectors have inconsistent lengths")]
    InconsistentFeatures,
    #[error("sample {key} has no {what} label")]
    Unlabelled { key: String, what: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ProtocolError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ProtocolError::InvalidConfig(_) => ErrorKind::Config,
            ProtocolError::Flow(e) => e.kind(),
            ProtocolError::Corpus(e) => e.kind(),
            ProtocolError::Model(e) => e.kind(),
            _ => ErrorKind::Data,
        }
    }
}
