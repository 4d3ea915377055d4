use serde::{Deserialize, Serialize};

use super::labels::{map_emotion, map_ethnicity, Dataset, Emotion, Ethnicity, Gender, MappedEmotion, RawEthnicity};
use super::CorpusError;

/// Attributes reported by a predictor (possibly corrected afterwards).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAttributeRecord {
    pub subject_id: String,
    pub gender: Gender,
    pub age: u32,
    pub raw_ethnicity: RawEthnicity,
}

/// Ground truth of a synthetic clip: the displacement bump that generated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    /// Bump center in pixels (x, y).
    pub center: (f64, f64),
    pub sigma: f64,
    pub amplitude: f64,
    /// Unit displacement direction (x, y).
    pub direction: (f64, f64),
    /// Spatial-frequency band of the subject texture, cycles per image side.
    pub texture_band: (f64, f64),
}

/// One micro-expression clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub dataset: Dataset,
    pub subject_id: String,
    pub clip_id: String,
    pub onset_path: String,
    pub apex_path: String,
    pub raw_emotion: String,
    #[serde(default)]
    pub mapped_emotion: Option<MappedEmotion>,
    #[serde(default)]
    pub raw_ethnicity: Option<RawEthnicity>,
    #[serde(default)]
    pub mapped_ethnicity: Option<Ethnicity>,
    #[serde(default)]
    pub gender: Option<Gender>,
    #[serde(default)]
    pub age: Option<u32>,
    #[serde(default)]
    pub corrected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthTruth>,
}

impl SampleRecord {
    pub fn key(&self) -> (String, String) {
        (self.subject_id.clone(), self.clip_id.clone())
    }

    pub fn key_string(&self) -> String {
        format!("{}/{}", self.subject_id, self.clip_id)
    }

    /// Emotion class, or `None` for excluded or unmapped records.
    pub fn emotion(&self) -> Option<Emotion> {
        self.mapped_emotion.and_then(MappedEmotion::class)
    }

    pub fn is_eligible(&self) -> bool {
        self.emotion().is_some()
    }

    pub fn set_attributes(&mut self, attrs: &RawAttributeRecord) {
        self.gender = Some(attrs.gender);
        self.age = Some(attrs.age);
        self.raw_ethnicity = Some(attrs.raw_ethnicity);
    }

    /// Fills both mapped labels from the raw ones.
    pub fn resolve_mappings(&mut self) -> Result<(), CorpusError> {
        self.mapped_emotion = Some(map_emotion(&self.raw_emotion)?);
        let raw = self.raw_ethnicity.ok_or_else(|| CorpusError::Unresolved {
            key: self.key_string(),
            what: "raw_ethnicity",
        })?;
        self.mapped_ethnicity = Some(map_ethnicity(raw));
        Ok(())
    }

    pub fn check_resolved(&self) -> Result<(), CorpusError> {
        let missing = if self.mapped_emotion.is_none() {
            Some("mapped_emotion")
        } else if self.raw_ethnicity.is_none() {
            Some("raw_ethnicity")
        } else if self.mapped_ethnicity.is_none() {
            Some("mapped_ethnicity")
        } else {
            None
        };
        if let Some(what) = missing {
            return Err(CorpusError::Unresolved {
                key: self.key_string(),
                what,
            });
        }
        let (raw, mapped) = (self.raw_ethnicity.unwrap(), self.mapped_ethnicity.unwrap());
        if map_ethnicity(raw) != mapped || map_emotion(&self.raw_emotion)? != self.mapped_emotion.unwrap() {
            return Err(CorpusError::InconsistentMapping {
                key: self.key_string(),
            });
        }
        Ok(())
    }
}
