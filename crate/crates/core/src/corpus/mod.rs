//! Ethnically annotated sample manifests: dataset ingestion, attribute
//! prediction, correction ledgers, label remapping, distribution summaries,
//! and the synthetic desk-scale corpus.

mod correction;
mod ingest;
mod labels;
mod manifest;
mod predictor;
mod record;
mod summary;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

use crate::error::ErrorKind;
use crate::flowcore::FlowError;

pub use correction::{
    apply_heuristic_corrections, ledger_hash, load_ledger, parse_ledger, Attribute, AttributeValue, AuditEntry,
    CorrectionOutcome, CorrectionRule,
};
pub use ingest::ingest_dataset_index;
pub use labels::{
    map_emotion, map_ethnicity, map_ethnicity_str, Dataset, Emotion, Ethnicity, Gender, MappedEmotion, RawEthnicity,
    RAW_EMOTIONS,
};
pub use manifest::{build_manifest, Manifest, Provenance};
pub use predictor::{
    annotate_attributes, annotate_records, AnnotationFailure, AnnotationPolicy, AttributePredictor, Attributes,
    CommandPredictor, PredictRequest, StubPredictor,
};
pub use record::{RawAttributeRecord, SampleRecord, SynthTruth};
pub use summary::{mapped_emotion_counts, mapped_ethnicity_counts, summarize_distribution, Distribution};
pub use synth::{
    bump_displacement, plan_desk_corpus, render_clip, synthesize_desk_corpus, SynthClip, SynthSpec, SYNTH_PREDICTOR,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("{source_name}: missing required column {column:?}")]
    MissingColumn { column: String, source_name: String },
    #[error("duplicate sample key {key}")]
    Duplicate { key: String },
    #[error("sample {key} references missing file {}", path.display())]
    DanglingPath { key: String, path: PathBuf },
    #[error("unknown {vocabulary} label {value:?}")]
    UnknownLabel { vocabulary: &'static str, value: String },
    #[error("annotation failed for {sample}: {message}")]
    Annotation { sample: String, message: String },
    #[error("correction ledger line {line}: {message}")]
    Ledger { line: usize, message: String },
    #[error("sample {key} has no {what}")]
    Unresolved { key: String, what: &'static str },
    #[error("sample {key} has mapped labels inconsistent with its raw labels")]
    InconsistentMapping { key: String },
    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSynthSpec(String),
    #[error(transparent)]
    Frame(#[from] FlowError),
}

impl CorpusError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            CorpusError::InvalidSynthSpec(_) | CorpusError::Ledger { .. } => ErrorKind::Config,
            CorpusError::Frame(e) => e.kind(),
            _ => ErrorKind::Data,
        }
    }
}
