//! Replayable heuristic correction ledger.
//!
//! One rule per line, comma separated:
//!
//! ```text
//! # dataset, subject, attribute, replacement, note
//! *, S05, ethnicity, Asian, judged Asian on manual review
//! SAMM, 011, age, 34, predictor underestimated
//! ```
//!
//! `dataset` may be `*`. Rules set an attribute value for every matching
//! record; they are applied in file order, so the last rule touching a field
//! wins. Because rules assign rather than transform, applying a ledger twice
//! gives the same records as applying it once.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::labels::{Dataset, Gender, RawEthnicity};
use super::record::SampleRecord;
use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Gender,
    Age,
    Ethnicity,
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Attribute::Gender => "gender",
            Attribute::Age => "age",
            Attribute::Ethnicity => "ethnicity",
        })
    }
}

impl FromStr for Attribute {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gender" => Ok(Attribute::Gender),
            "age" => Ok(Attribute::Age),
            "ethnicity" | "race" => Ok(Attribute::Ethnicity),
            _ => Err(CorpusError::UnknownLabel {
                vocabulary: "attribute",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttributeValue {
    Gender(Gender),
    Age(u32),
    Ethnicity(RawEthnicity),
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Gender(g) => write!(f, "{g}"),
            AttributeValue::Age(a) => write!(f, "{a}"),
            AttributeValue::Ethnicity(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionRule {
    /// `None` matches every dataset.
    pub dataset: Option<Dataset>,
    pub subject_id: String,
    pub replacement: AttributeValue,
    pub note: String,
}

impl CorrectionRule {
    pub fn attribute(&self) -> Attribute {
        match self.replacement {
            AttributeValue::Gender(_) => Attribute::Gender,
            AttributeValue::Age(_) => Attribute::Age,
            AttributeValue::Ethnicity(_) => Attribute::Ethnicity,
        }
    }

    pub fn matches(&self, r: &SampleRecord) -> bool {
        self.subject_id == r.subject_id && self.dataset.is_none_or(|d| d == r.dataset)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub rule_index: usize,
    pub sample: String,
    pub attribute: Attribute,
    pub before: Option<String>,
    pub after: String,
    pub note: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrectionOutcome {
    pub records: Vec<SampleRecord>,
    pub audit: Vec<AuditEntry>,
    /// Rules that matched no record (likely stale).
    pub warnings: Vec<String>,
}

pub fn parse_ledger(text: &str) -> Result<Vec<CorrectionRule>, CorpusError> {
    let mut rules = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| CorpusError::Ledger { line: i + 1, message };
        let fields: Vec<&str> = line.splitn(5, ',').map(str::trim).collect();
        if fields.len() < 4 {
            return Err(err(format!("expected dataset, subject, attribute, replacement[, note]; got {line:?}")));
        }
        let dataset = match fields[0] {
            "*" | "" => None,
            d => Some(d.parse().map_err(|e: CorpusError| err(e.to_string()))?),
        };
        if fields[1].is_empty() {
            return Err(err("empty subject".into()));
        }
        let attribute: Attribute = fields[2].parse().map_err(|e: CorpusError| err(e.to_string()))?;
        let replacement = match attribute {
            Attribute::Gender => AttributeValue::Gender(fields[3].parse().map_err(|e: CorpusError| err(e.to_string()))?),
            Attribute::Age => AttributeValue::Age(
                fields[3].parse().map_err(|_| err(format!("bad age {:?}", fields[3])))?,
            ),
            Attribute::Ethnicity => {
                AttributeValue::Ethnicity(fields[3].parse().map_err(|e: CorpusError| err(e.to_string()))?)
            }
        };
        rules.push(CorrectionRule {
            dataset,
            subject_id: fields[1].to_string(),
            replacement,
            note: fields.get(4).copied().unwrap_or("").to_string(),
        });
    }
    Ok(rules)
}

pub fn load_ledger(path: impl AsRef<Path>) -> Result<Vec<CorrectionRule>, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_ledger(&text)
}

/// Content hash of a ledger, independent of comments and whitespace.
pub fn ledger_hash(rules: &[CorrectionRule]) -> String {
    let canonical = serde_json::to_vec(rules).expect("rules serialize");
    crate::seed::sha256_hex(&canonical)
}

fn current_value(r: &SampleRecord, a: Attribute) -> Option<String> {
    match a {
        Attribute::Gender => r.gender.map(|g| g.to_string()),
        Attribute::Age => r.age.map(|g| g.to_string()),
        Attribute::Ethnicity => r.raw_ethnicity.map(|g| g.to_string()),
    }
}

/// Applies rules in order; every application is logged with before/after.
/// Mapped ethnicity is not touched here; resolve mappings afterwards.
pub fn apply_heuristic_corrections(
    mut records: Vec<SampleRecord>,
    ledger: &[CorrectionRule],
) -> CorrectionOutcome {
    let mut audit = Vec::new();
    let mut warnings = Vec::new();
    for (rule_index, rule) in ledger.iter().enumerate() {
        let mut hits = 0;
        for r in records.iter_mut().filter(|r| rule.matches(r)) {
            hits += 1;
            let before = current_value(r, rule.attribute());
            match rule.replacement {
                AttributeValue::Gender(g) => r.gender = Some(g),
                AttributeValue::Age(a) => r.age = Some(a),
                AttributeValue::Ethnicity(e) => r.raw_ethnicity = Some(e),
            }
            r.corrected = true;
            audit.push(AuditEntry {
                rule_index,
                sample: r.key_string(),
                attribute: rule.attribute(),
                before,
                after: rule.replacement.to_string(),
                note: rule.note.clone(),
            });
        }
        if hits == 0 {
            warnings.push(format!(
                "rule {} ({} {} -> {}) matched no records",
                rule_index + 1,
                rule.subject_id,
                rule.attribute(),
                rule.replacement
            ));
        }
    }
    CorrectionOutcome {
        records,
        audit,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(subject: &str, eth: RawEthnicity) -> SampleRecord {
        SampleRecord {
            dataset: Dataset::Samm,
            subject_id: subject.into(),
            clip_id: "c1".into(),
            onset_path: String::new(),
            apex_path: String::new(),
            raw_emotion: "fear".into(),
            mapped_emotion: None,
            raw_ethnicity: Some(eth),
            mapped_ethnicity: None,
            gender: Some(Gender::Male),
            age: Some(30),
            corrected: false,
            synth: None,
        }
    }

    #[test]
    fn others_reclassified_as_asian() {
        let rules = parse_ledger("*, S05, ethnicity, Asian, manual review\n").unwrap();
        let out = apply_heuristic_corrections(vec![rec("S05", RawEthnicity::Others)], &rules);
        assert_eq!(out.records[0].raw_ethnicity, Some(RawEthnicity::Asian));
        assert!(out.records[0].corrected);
        assert_eq!(out.audit.len(), 1);
        assert_eq!(out.audit[0].before.as_deref(), Some("Others"));
        assert_eq!(out.audit[0].after, "Asian");
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn empty_ledger_is_identity() {
        let recs = vec![rec("S01", RawEthnicity::Caucasian)];
        let out = apply_heuristic_corrections(recs.clone(), &[]);
        assert_eq!(out.records, recs);
        assert!(out.audit.is_empty());
    }

    #[test]
    fn last_writer_wins_and_both_logged() {
        let rules = parse_ledger("*, S01, ethnicity, Indian\nSAMM, S01, ethnicity, Asian, second\n").unwrap();
        let out = apply_heuristic_corrections(vec![rec("S01", RawEthnicity::Others)], &rules);
        assert_eq!(out.records[0].raw_ethnicity, Some(RawEthnicity::Asian));
        assert_eq!(out.audit.len(), 2);
        assert_eq!(out.audit[1].before.as_deref(), Some("Indian"));
    }

    #[test]
    fn stale_rule_warns() {
        let rules = parse_ledger("CASME2, S01, age, 40\n").unwrap();
        let out = apply_heuristic_corrections(vec![rec("S01", RawEthnicity::Asian)], &rules);
        assert_eq!(out.records[0].age, Some(30));
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn idempotent() {
        let rules = parse_ledger(
            "*, S01, ethnicity, Indian\n*, S02, gender, female\n*, S01, age, 22\n*, S01, ethnicity, Others\n",
        )
        .unwrap();
        let recs = vec![rec("S01", RawEthnicity::Asian), rec("S02", RawEthnicity::African)];
        let once = apply_heuristic_corrections(recs, &rules).records;
        let twice = apply_heuristic_corrections(once.clone(), &rules).records;
        assert_eq!(once, twice);
    }

    #[test]
    fn malformed_rules() {
        assert!(matches!(parse_ledger("*, S01, height, 3"), Err(CorpusError::Ledger { line: 1, .. })));
        assert!(matches!(parse_ledger("# c\n*, S01, age, old"), Err(CorpusError::Ledger { line: 2, .. })));
        assert!(parse_ledger("*, S01").is_err());
        assert_ne!(
            ledger_hash(&parse_ledger("*, S01, age, 3").unwrap()),
            ledger_hash(&parse_ledger("*, S01, age, 4").unwrap())
        );
    }
}
