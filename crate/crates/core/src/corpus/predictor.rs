//! Attribute predictors: frame in, (gender, age, ethnicity) out.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use rayon::prelude::*;

use crate::flowcore::{load_frame, GrayFrame};

use super::labels::{Gender, RawEthnicity};
use super::record::{RawAttributeRecord, SampleRecord};
use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attributes {
    pub gender: Gender,
    pub age: u32,
    pub ethnicity: RawEthnicity,
}

/// What a predictor sees for one sample.
pub struct PredictRequest<'a> {
    pub subject_id: &'a str,
    pub clip_id: &'a str,
    pub apex_path: &'a Path,
    pub apex: &'a GrayFrame<f64>,
}

pub trait AttributePredictor: Send + Sync {
    /// Stable identity string recorded in manifest provenance.
    fn identity(&self) -> String;

    fn predict(&self, request: &PredictRequest<'_>) -> Result<Attributes, String>;
}

/// Deterministic table-driven predictor keyed by subject id.
///
/// Also serves as the file-exchange adapter: attributes produced offline by
/// an external model are written to a `subject,gender,age,ethnicity` table
/// and loaded with [`StubPredictor::from_table_file`].
#[derive(Debug, Clone, Default)]
pub struct StubPredictor {
    table: BTreeMap<String, Attributes>,
    fallback: Option<Attributes>,
    name: String,
}

impl StubPredictor {
    pub fn new(table: BTreeMap<String, Attributes>) -> Self {
        Self {
            table,
            fallback: None,
            name: "stub".to_string(),
        }
    }

    pub fn with_fallback(mut self, fallback: Attributes) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn from_table_file(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut table = BTreeMap::new();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        for row in reader.records() {
            let row = row.map_err(|e| CorpusError::Parse {
                source_name: path.display().to_string(),
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let get = |i: usize| row.get(i).unwrap_or("");
            let age = get(2).parse().map_err(|_| CorpusError::Parse {
                source_name: path.display().to_string(),
                line,
                message: format!("bad age {:?}", get(2)),
            })?;
            table.insert(
                get(0).to_string(),
                Attributes {
                    gender: get(1).parse()?,
                    age,
                    ethnicity: get(3).parse()?,
                },
            );
        }
        let digest = crate::seed::sha256_hex(text.as_bytes());
        Ok(Self {
            table,
            fallback: None,
            name: format!("table:{}", &digest[..16]),
        })
    }
}

impl AttributePredictor for StubPredictor {
    fn identity(&self) -> String {
        self.name.clone()
    }

    fn predict(&self, request: &PredictRequest<'_>) -> Result<Attributes, String> {
        self.table
            .get(request.subject_id)
            .copied()
            .or(self.fallback)
            .ok_or_else(|| format!("no attributes for subject {}", request.subject_id))
    }
}

/// Subprocess adapter: runs `program args... <apex_path>` and expects one
/// line `gender,age,ethnicity` on stdout.
#[derive(Debug, Clone)]
pub struct CommandPredictor {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl AttributePredictor for CommandPredictor {
    fn identity(&self) -> String {
        format!("command:{} {}", self.program.display(), self.args.join(" "))
    }

    fn predict(&self, request: &PredictRequest<'_>) -> Result<Attributes, String> {
        let out = Command::new(&self.program)
            .args(&self.args)
            .arg(request.apex_path)
            .env("MECROSS_SUBJECT", request.subject_id)
            .env("MECROSS_CLIP", request.clip_id)
            .output()
            .map_err(|e| format!("cannot run {}: {e}", self.program.display()))?;
        if !out.status.success() {
            return Err(format!(
                "{} exited with {}: {}",
                self.program.display(),
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            ));
        }
        let text = String::from_utf8_lossy(&out.stdout);
        let line = text.lines().next().unwrap_or("").trim();
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("expected gender,age,ethnicity but got {line:?}"));
        }
        Ok(Attributes {
            gender: parts[0].parse().map_err(|e: CorpusError| e.to_string())?,
            age: parts[1].parse().map_err(|_| format!("bad age {:?}", parts[1]))?,
            ethnicity: parts[2].parse().map_err(|e: CorpusError| e.to_string())?,
        })
    }
}

/// Runs the predictor on one already-loaded apex frame.
pub fn annotate_attributes(
    request: &PredictRequest<'_>,
    predictor: &dyn AttributePredictor,
) -> Result<RawAttributeRecord, CorpusError> {
    let a = predictor
        .predict(request)
        .map_err(|message| CorpusError::Annotation {
            sample: format!("{}/{}", request.subject_id, request.clip_id),
            message,
        })?;
    Ok(RawAttributeRecord {
        subject_id: request.subject_id.to_string(),
        gender: a.gender,
        age: a.age,
        raw_ethnicity: a.ethnicity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationPolicy {
    /// Stop at the first failing sample.
    Abort,
    /// Drop failing samples and report them.
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationFailure {
    pub sample: String,
    pub message: String,
}

/// Annotates every record's apex frame. Predictions run in parallel; the
/// output keeps the input order. Under [`AnnotationPolicy::Skip`] failing
/// samples are removed and listed.
pub fn annotate_records(
    records: Vec<SampleRecord>,
    predictor: &dyn AttributePredictor,
    policy: AnnotationPolicy,
) -> Result<(Vec<SampleRecord>, Vec<AnnotationFailure>), CorpusError> {
    let results: Vec<Result<RawAttributeRecord, CorpusError>> = records
        .par_iter()
        .map(|r| {
            let apex_path = Path::new(&r.apex_path);
            let frame = load_frame::<f64>(apex_path).map_err(|e| CorpusError::Annotation {
                sample: r.key_string(),
                message: e.to_string(),
            })?;
            annotate_attributes(
                &PredictRequest {
                    subject_id: &r.subject_id,
                    clip_id: &r.clip_id,
                    apex_path,
                    apex: &frame,
                },
                predictor,
            )
        })
        .collect();
    let mut kept = Vec::with_capacity(records.len());
    let mut failures = Vec::new();
    for (mut rec, res) in records.into_iter().zip(results) {
        match res {
            Ok(attrs) => {
                rec.set_attributes(&attrs);
                kept.push(rec);
            }
            Err(e) if policy == AnnotationPolicy::Skip => failures.push(AnnotationFailure {
                sample: rec.key_string(),
                message: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok((kept, failures))
}
