//! The joint sample manifest, persisted as JSON lines: a provenance line
//! followed by one sample record per line.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::flowcore::FlowParams;
use crate::io_util::write_atomic;

use super::labels::Ethnicity;
use super::record::SampleRecord;
use super::synth::SynthSpec;
use super::CorpusError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub flow_params: FlowParams,
    pub predictor: String,
    pub ledger_hash: String,
    pub seed: u64,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
}

impl Provenance {
    pub fn new(predictor: impl Into<String>, ledger_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            flow_params: FlowParams::default(),
            predictor: predictor.into(),
            ledger_hash: ledger_hash.into(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            synth: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Provenance(Provenance),
    Sample(Box<SampleRecord>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub provenance: Provenance,
    pub records: Vec<SampleRecord>,
    /// Directory that relative frame paths are resolved against.
    pub base_dir: PathBuf,
}

/// Validates records and assembles a manifest sorted by (subject, clip).
/// Excluded-emotion records are kept; see [`Manifest::eligible`].
pub fn build_manifest(
    mut records: Vec<SampleRecord>,
    provenance: Provenance,
    base_dir: impl Into<PathBuf>,
) -> Result<Manifest, CorpusError> {
    let base_dir = base_dir.into();
    let mut seen = BTreeSet::new();
    for r in &records {
        r.check_resolved()?;
        if !seen.insert(r.key()) {
            return Err(CorpusError::Duplicate { key: r.key_string() });
        }
        for p in [&r.onset_path, &r.apex_path] {
            let full = resolve(&base_dir, p);
            if !full.is_file() {
                return Err(CorpusError::DanglingPath {
                    key: r.key_string(),
                    path: full,
                });
            }
        }
    }
    records.sort_by_key(|a| a.key());
    Ok(Manifest {
        provenance,
        records,
        base_dir,
    })
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl Manifest {
    /// Records with a usable emotion class, in manifest order.
    pub fn eligible(&self) -> Vec<&SampleRecord> {
        self.records.iter().filter(|r| r.is_eligible()).collect()
    }

    pub fn resolve_path(&self, p: &str) -> PathBuf {
        resolve(&self.base_dir, p)
    }

    /// Distinct subject ids in sorted order.
    pub fn subjects(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.records.iter().map(|r| r.subject_id.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Mapped ethnicity of a subject (taken from its first record).
    pub fn subject_ethnicity(&self, subject: &str) -> Option<Ethnicity> {
        self.records
            .iter()
            .find(|r| r.subject_id == subject)
            .and_then(|r| r.mapped_ethnicity)
    }

    /// A manifest restricted to records satisfying `keep`.
    pub fn filtered(&self, keep: impl Fn(&SampleRecord) -> bool) -> Manifest {
        Manifest {
            provenance: self.provenance.clone(),
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            base_dir: self.base_dir.clone(),
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&Line::Provenance(self.provenance.clone())).expect("serialize");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(&Line::Sample(Box::new(r.clone()))).expect("serialize"));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(text: &str, base_dir: impl Into<PathBuf>) -> Result<Manifest, CorpusError> {
        let mut provenance = None;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| CorpusError::Parse {
                source_name: "manifest".into(),
                line: i + 1,
                message,
            };
            match serde_json::from_str::<Line>(line).map_err(|e| err(e.to_string()))? {
                Line::Provenance(p) if provenance.is_none() => provenance = Some(p),
                Line::Provenance(_) => return Err(err("second provenance line".into())),
                Line::Sample(r) => records.push(*r),
            }
        }
        let provenance = provenance.ok_or_else(|| CorpusError::Parse {
            source_name: "manifest".into(),
            line: 1,
            message: "missing provenance line".into(),
        })?;
        Ok(Manifest {
            provenance,
            records,
            base_dir: base_dir.into(),
        })
    }

    /// Writes the manifest atomically. Frame paths under the manifest's
    /// directory are stored relative to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut copy = self.clone();
        for r in &mut copy.records {
            for p in [&mut r.onset_path, &mut r.apex_path] {
                let full = resolve(&self.base_dir, p);
                let abs_dir = std::fs::canonicalize(&dir).unwrap_or(dir.clone());
                let abs_full = std::fs::canonicalize(&full).unwrap_or(full.clone());
                if let Ok(rel) = abs_full.strip_prefix(&abs_dir) {
                    *p = rel.to_string_lossy().into_owned();
                } else {
                    *p = abs_full.to_string_lossy().into_owned();
                }
            }
        }
        write_atomic(path, copy.to_jsonl().as_bytes()).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Manifest, CorpusError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Manifest::parse_jsonl(&text, base)
    }

    /// Content hash of the serialized manifest.
    pub fn content_hash(&self) -> String {
        crate::seed::sha256_hex(self.to_jsonl().as_bytes())
    }
}
