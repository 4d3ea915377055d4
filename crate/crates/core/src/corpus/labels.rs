//! Label vocabularies and the ethnicity/emotion remapping tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dataset {
    #[serde(rename = "CASME2")]
    Casme2,
    #[serde(rename = "SAMM")]
    Samm,
    #[serde(rename = "SYNTH")]
    Synth,
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dataset::Casme2 => "CASME2",
            Dataset::Samm => "SAMM",
            Dataset::Synth => "SYNTH",
        })
    }
}

impl FromStr for Dataset {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "casme2" | "casmeii" | "casme_ii" => Ok(Dataset::Casme2),
            "samm" => Ok(Dataset::Samm),
            "synth" => Ok(Dataset::Synth),
            _ => Err(CorpusError::UnknownLabel {
                vocabulary: "dataset",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "male",
            Gender::Female => "female",
            Gender::Unknown => "unknown",
        })
    }
}

impl FromStr for Gender {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            "unknown" | "" => Ok(Gender::Unknown),
            _ => Err(CorpusError::UnknownLabel {
                vocabulary: "gender",
                value: s.to_string(),
            }),
        }
    }
}

/// The five categories produced by the attribute predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RawEthnicity {
    Caucasian,
    African,
    Asian,
    Indian,
    Others,
}

impl RawEthnicity {
    pub const ALL: [RawEthnicity; 5] = [
        RawEthnicity::Caucasian,
        RawEthnicity::African,
        RawEthnicity::Asian,
        RawEthnicity::Indian,
        RawEthnicity::Others,
    ];
}

impl fmt::Display for RawEthnicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for RawEthnicity {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "caucasian" | "white" | "caucasian(white)" => Ok(RawEthnicity::Caucasian),
            "african" | "black" | "african(black)" => Ok(RawEthnicity::African),
            "asian" => Ok(RawEthnicity::Asian),
            "indian" => Ok(RawEthnicity::Indian),
            "others" | "other" => Ok(RawEthnicity::Others),
            _ => Err(CorpusError::UnknownLabel {
                vocabulary: "ethnicity",
                value: s.to_string(),
            }),
        }
    }
}

/// Binary ethnicity used for training and sampling. Class index order is
/// `Asian = 0`, `NonAsian = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Ethnicity {
    Asian,
    NonAsian,
}

impl Ethnicity {
    pub const ALL: [Ethnicity; 2] = [Ethnicity::Asian, Ethnicity::NonAsian];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Ethnicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Ethnicity {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "asian" => Ok(Ethnicity::Asian),
            "nonasian" => Ok(Ethnicity::NonAsian),
            _ => Err(CorpusError::UnknownLabel {
                vocabulary: "mapped ethnicity",
                value: s.to_string(),
            }),
        }
    }
}

/// Three-way emotion class. Class index order is `Negative = 0`,
/// `Positive = 1`, `Surprise = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Emotion {
    Negative,
    Positive,
    Surprise,
}

impl Emotion {
    pub const ALL: [Emotion; 3] = [Emotion::Negative, Emotion::Positive, Emotion::Surprise];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Emotion {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "negative" => Ok(Emotion::Negative),
            "positive" => Ok(Emotion::Positive),
            "surprise" => Ok(Emotion::Surprise),
            _ => Err(CorpusError::UnknownLabel {
                vocabulary: "emotion class",
                value: s.to_string(),
            }),
        }
    }
}

/// Result of emotion remapping: a class, or excluded from all splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MappedEmotion {
    Negative,
    Positive,
    Surprise,
    Excluded,
}

impl MappedEmotion {
    pub fn class(self) -> Option<Emotion> {
        match self {
            MappedEmotion::Negative => Some(Emotion::Negative),
            MappedEmotion::Positive => Some(Emotion::Positive),
            MappedEmotion::Surprise => Some(Emotion::Surprise),
            MappedEmotion::Excluded => None,
        }
    }
}

impl From<Emotion> for MappedEmotion {
    fn from(e: Emotion) -> Self {
        match e {
            Emotion::Negative => MappedEmotion::Negative,
            Emotion::Positive => MappedEmotion::Positive,
            Emotion::Surprise => MappedEmotion::Surprise,
        }
    }
}

impl fmt::Display for MappedEmotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Caucasian and African map to NonAsian; Asian, Indian and Others map to Asian.
pub fn map_ethnicity(raw: RawEthnicity) -> Ethnicity {
    match raw {
        RawEthnicity::Caucasian | RawEthnicity::African => Ethnicity::NonAsian,
        RawEthnicity::Asian | RawEthnicity::Indian | RawEthnicity::Others => Ethnicity::Asian,
    }
}

/// Parses a raw category name and maps it.
pub fn map_ethnicity_str(raw: &str) -> Result<Ethnicity, CorpusError> {
    raw.parse().map(map_ethnicity)
}

/// Case-insensitive emotion remapping. `others` is excluded; any string
/// outside the known vocabulary is an error.
pub fn map_emotion(raw: &str) -> Result<MappedEmotion, CorpusError> {
    match raw.trim().to_lowercase().as_str() {
        "happiness" => Ok(MappedEmotion::Positive),
        "anger" | "contempt" | "disgust" | "fear" | "repression" | "sadness" => {
            Ok(MappedEmotion::Negative)
        }
        "surprise" => Ok(MappedEmotion::Surprise),
        "others" | "other" => Ok(MappedEmotion::Excluded),
        _ => Err(CorpusError::UnknownLabel {
            vocabulary: "emotion",
            value: raw.to_string(),
        }),
    }
}

/// Every raw emotion string accepted by [`map_emotion`].
pub const RAW_EMOTIONS: [&str; 9] = [
    "happiness",
    "anger",
    "contempt",
    "disgust",
    "fear",
    "repression",
    "sadness",
    "surprise",
    "others",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ethnicity_table() {
        assert_eq!(map_ethnicity(RawEthnicity::Indian), Ethnicity::Asian);
        assert_eq!(map_ethnicity(RawEthnicity::African), Ethnicity::NonAsian);
        assert_eq!(map_ethnicity(RawEthnicity::Others), Ethnicity::Asian);
        assert_eq!(map_ethnicity(RawEthnicity::Caucasian), Ethnicity::NonAsian);
        assert_eq!(map_ethnicity(RawEthnicity::Asian), Ethnicity::Asian);
        assert_eq!(map_ethnicity_str("White").unwrap(), Ethnicity::NonAsian);
        assert!(map_ethnicity_str("martian").is_err());
    }

    #[test]
    fn emotion_table() {
        assert_eq!(map_emotion("repression").unwrap(), MappedEmotion::Negative);
        assert_eq!(map_emotion("Happiness").unwrap(), MappedEmotion::Positive);
        assert_eq!(map_emotion("others").unwrap(), MappedEmotion::Excluded);
        assert_eq!(map_emotion("SURPRISE").unwrap(), MappedEmotion::Surprise);
        for neg in ["anger", "contempt", "disgust", "fear", "sadness"] {
            assert_eq!(map_emotion(neg).unwrap(), MappedEmotion::Negative);
        }
        assert!(matches!(
            map_emotion("boredom"),
            Err(CorpusError::UnknownLabel { vocabulary: "emotion", .. })
        ));
    }

    #[test]
    fn maps_are_total_and_pure() {
        for raw in RawEthnicity::ALL {
            assert_eq!(map_ethnicity(raw), map_ethnicity(raw));
        }
        for raw in RAW_EMOTIONS {
            assert_eq!(map_emotion(raw).unwrap(), map_emotion(raw).unwrap());
        }
    }

    #[test]
    fn class_indices() {
        assert_eq!(Emotion::Negative.index(), 0);
        assert_eq!(Emotion::Surprise.index(), 2);
        assert_eq!(Ethnicity::NonAsian.index(), 1);
        assert_eq!(Emotion::from_index(1), Some(Emotion::Positive));
    }
}
