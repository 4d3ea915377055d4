//! Dataset index ingestion.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use super::labels::Dataset;
use super::record::SampleRecord;
use super::CorpusError;

const REQUIRED: [(&str, &[&str]); 5] = [
    ("subject", &["subject", "subject_id", "sub"]),
    ("clip", &["clip", "clip_id", "filename"]),
    ("onset", &["onset", "onset_frame", "onset_path"]),
    ("apex", &["apex", "apex_frame", "apex_path"]),
    ("emotion", &["emotion", "estimated_emotion"]),
];

/// Header key with case, spaces, underscores and dashes folded away.
fn header_key(h: &str) -> String {
    h.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

/// Reads a delimited index (comma or tab, header row required) with columns
/// subject, clip, onset, apex and emotion. Frame paths are resolved against
/// the index file's directory and must exist. Emotions are case-folded;
/// label mapping is left to later stages.
pub fn ingest_dataset_index(
    index_path: impl AsRef<Path>,
    dataset: Dataset,
) -> Result<Vec<SampleRecord>, CorpusError> {
    let index_path = index_path.as_ref();
    let text = std::fs::read_to_string(index_path).map_err(|source| CorpusError::Io {
        path: index_path.to_path_buf(),
        source,
    })?;
    let base = index_path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_index(&text, dataset, &base, &index_path.display().to_string())
}

pub(crate) fn parse_index(
    text: &str,
    dataset: Dataset,
    base: &Path,
    source_name: &str,
) -> Result<Vec<SampleRecord>, CorpusError> {
    let first = text.lines().next().unwrap_or("");
    let delimiter = if first.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CorpusError::Parse {
            source_name: source_name.to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(header_key)
        .collect();
    let mut cols = [0usize; 5];
    for (slot, (name, aliases)) in cols.iter_mut().zip(REQUIRED) {
        *slot = headers
            .iter()
            .position(|h| aliases.iter().any(|a| header_key(a) == *h))
            .ok_or_else(|| CorpusError::MissingColumn {
                column: name.to_string(),
                source_name: source_name.to_string(),
            })?;
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| CorpusError::Parse {
            source_name: source_name.to_string(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<String, CorpusError> {
            row.get(cols[i])
                .map(str::to_string)
                .ok_or_else(|| CorpusError::Parse {
                    source_name: source_name.to_string(),
                    line,
                    message: format!("missing {} field", REQUIRED[i].0),
                })
        };
        let (subject_id, clip_id) = (field(0)?, field(1)?);
        if !seen.insert((subject_id.clone(), clip_id.clone())) {
            return Err(CorpusError::Duplicate {
                key: format!("{subject_id}/{clip_id}"),
            });
        }
        let resolve = |p: String| -> Result<String, CorpusError> {
            let path = PathBuf::from(&p);
            let full = if path.is_absolute() { path } else { base.join(path) };
            if !full.is_file() {
                return Err(CorpusError::DanglingPath {
                    key: format!("{subject_id}/{clip_id}"),
                    path: full,
                });
            }
            Ok(full.to_string_lossy().into_owned())
        };
        let onset_path = resolve(field(2)?)?;
        let apex_path = resolve(field(3)?)?;
        out.push(SampleRecord {
            dataset,
            subject_id: subject_id.clone(),
            clip_id: clip_id.clone(),
            onset_path,
            apex_path,
            raw_emotion: field(4)?.to_lowercase(),
            mapped_emotion: None,
            raw_ethnicity: None,
            mapped_ethnicity: None,
            gender: None,
            age: None,
            corrected: false,
            synth: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn setup() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for name in ["a0.pgm", "a1.pgm", "b0.pgm", "b1.pgm", "c0.pgm", "c1.pgm"] {
            fs::write(dir.path().join(name), b"P2 1 1 1 0").unwrap();
        }
        dir
    }

    #[test]
    fn three_rows_preserved() {
        let dir = setup();
        let idx = dir.path().join("index.csv");
        fs::write(
            &idx,
            "subject,clip,onset,apex,emotion\nsub01,EP01,a0.pgm,a1.pgm,Happiness\nsub01,EP02,b0.pgm,b1.pgm,disgust\nsub02,EP01,c0.pgm,c1.pgm,others\n",
        )
        .unwrap();
        let recs = ingest_dataset_index(&idx, Dataset::Casme2).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].subject_id, "sub01");
        assert_eq!(recs[1].clip_id, "EP02");
        assert_eq!(recs[0].raw_emotion, "happiness");
        assert_eq!(recs[2].raw_emotion, "others");
        assert!(recs[0].onset_path.ends_with("a0.pgm"));
        assert!(recs.iter().all(|r| r.mapped_emotion.is_none() && r.mapped_ethnicity.is_none()));
    }

    #[test]
    fn tab_delimited_and_column_order() {
        let dir = setup();
        let idx = dir.path().join("index.tsv");
        fs::write(&idx, "Estimated Emotion\tApexFrame\tOnset\tClip\tSubject\nfear\ta1.pgm\ta0.pgm\tx\t006\n").unwrap();
        let recs = ingest_dataset_index(&idx, Dataset::Samm).unwrap();
        assert_eq!(recs[0].subject_id, "006");
        assert!(recs[0].apex_path.ends_with("a1.pgm"));
    }

    #[test]
    fn duplicate_missing_column_and_dangling() {
        let dir = setup();
        let idx = dir.path().join("dup.csv");
        fs::write(
            &idx,
            "subject,clip,onset,apex,emotion\ns1,c1,a0.pgm,a1.pgm,fear\ns1,c1,b0.pgm,b1.pgm,fear\n",
        )
        .unwrap();
        match ingest_dataset_index(&idx, Dataset::Casme2) {
            Err(CorpusError::Duplicate { key }) => assert_eq!(key, "s1/c1"),
            other => panic!("expected duplicate error, got {other:?}"),
        }
        fs::write(&idx, "subject,clip,onset,emotion\ns1,c1,a0.pgm,fear\n").unwrap();
        assert!(matches!(
            ingest_dataset_index(&idx, Dataset::Casme2),
            Err(CorpusError::MissingColumn { ref column, .. }) if column == "apex"
        ));
        fs::write(&idx, "subject,clip,onset,apex,emotion\ns1,c1,a0.pgm,nope.pgm,fear\n").unwrap();
        assert!(matches!(
            ingest_dataset_index(&idx, Dataset::Casme2),
            Err(CorpusError::DanglingPath { .. })
        ));
    }
}
