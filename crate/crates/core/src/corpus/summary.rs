//! Label distribution by subject and by video.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::labels::{map_emotion, map_ethnicity, Ethnicity, MappedEmotion, RawEthnicity};
use super::manifest::Manifest;
use super::CorpusError;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Distribution {
    pub subjects_by_raw_ethnicity: BTreeMap<RawEthnicity, usize>,
    pub videos_by_raw_ethnicity: BTreeMap<RawEthnicity, usize>,
    pub subjects_by_ethnicity: BTreeMap<Ethnicity, usize>,
    pub videos_by_ethnicity: BTreeMap<Ethnicity, usize>,
    pub videos_by_raw_emotion: BTreeMap<String, usize>,
    pub videos_by_emotion: BTreeMap<MappedEmotion, usize>,
    pub videos_per_subject: BTreeMap<String, usize>,
    pub total_subjects: usize,
    pub total_videos: usize,
    pub eligible_videos: usize,
    pub excluded_videos: usize,
    /// Subjects whose records disagree on ethnicity.
    pub inconsistent_subjects: Vec<String>,
}

impl Distribution {
    /// `total_videos - eligible_videos`: the number of excluded clips.
    pub fn video_vs_eligible_delta(&self) -> usize {
        self.total_videos - self.eligible_videos
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| Ethnic label | Mapped label | Subjects | Videos |");
        let _ = writeln!(s, "|---|---|---|---|");
        for raw in RawEthnicity::ALL {
            let _ = writeln!(
                s,
                "| {raw} | {} | {} | {} |",
                map_ethnicity(raw),
                self.subjects_by_raw_ethnicity.get(&raw).copied().unwrap_or(0),
                self.videos_by_raw_ethnicity.get(&raw).copied().unwrap_or(0)
            );
        }
        let _ = writeln!(s, "\n| Mapped ethnicity | Subjects | Videos |");
        let _ = writeln!(s, "|---|---|---|");
        for e in Ethnicity::ALL {
            let _ = writeln!(
                s,
                "| {e} | {} | {} |",
                self.subjects_by_ethnicity.get(&e).copied().unwrap_or(0),
                self.videos_by_ethnicity.get(&e).copied().unwrap_or(0)
            );
        }
        let _ = writeln!(s, "\n| Emotion label | Mapped label | Videos |");
        let _ = writeln!(s, "|---|---|---|");
        for (raw, n) in &self.videos_by_raw_emotion {
            let mapped = map_emotion(raw).map(|m| m.to_string()).unwrap_or_else(|_| "?".into());
            let _ = writeln!(s, "| {raw} | {mapped} | {n} |");
        }
        let _ = writeln!(s, "\n| Mapped emotion | Videos |");
        let _ = writeln!(s, "|---|---|");
        for (m, n) in &self.videos_by_emotion {
            let _ = writeln!(s, "| {m} | {n} |");
        }
        let _ = writeln!(
            s,
            "\nSubjects: {}. Videos: {}. Eligible: {}. Excluded: {} (video total minus eligible total = {}).",
            self.total_subjects,
            self.total_videos,
            self.eligible_videos,
            self.excluded_videos,
            self.video_vs_eligible_delta()
        );
        if !self.inconsistent_subjects.is_empty() {
            let _ = writeln!(s, "Subjects with inconsistent ethnicity: {}", self.inconsistent_subjects.join(", "));
        }
        s
    }
}

/// Counts by subject and by video for every raw and mapped label. A subject's
/// ethnicity is taken from its first record.
pub fn summarize_distribution(manifest: &Manifest) -> Result<Distribution, CorpusError> {
    let mut d = Distribution::default();
    let mut subject_eth: BTreeMap<&str, RawEthnicity> = BTreeMap::new();
    for r in &manifest.records {
        r.check_resolved()?;
        let raw = r.raw_ethnicity.expect("checked");
        let mapped_emotion = r.mapped_emotion.expect("checked");
        *d.videos_by_raw_ethnicity.entry(raw).or_default() += 1;
        *d.videos_by_ethnicity.entry(map_ethnicity(raw)).or_default() += 1;
        *d.videos_by_raw_emotion.entry(r.raw_emotion.clone()).or_default() += 1;
        *d.videos_by_emotion.entry(mapped_emotion).or_default() += 1;
        *d.videos_per_subject.entry(r.subject_id.clone()).or_default() += 1;
        match subject_eth.get(r.subject_id.as_str()) {
            None => {
                subject_eth.insert(&r.subject_id, raw);
            }
            Some(&first) if first != raw => {
                if !d.inconsistent_subjects.contains(&r.subject_id) {
                    d.inconsistent_subjects.push(r.subject_id.clone());
                }
            }
            Some(_) => {}
        }
        d.total_videos += 1;
        if r.is_eligible() {
            d.eligible_videos += 1;
        } else {
            d.excluded_videos += 1;
        }
    }
    for raw in subject_eth.values() {
        *d.subjects_by_raw_ethnicity.entry(*raw).or_default() += 1;
        *d.subjects_by_ethnicity.entry(map_ethnicity(*raw)).or_default() += 1;
    }
    d.total_subjects = subject_eth.len();
    Ok(d)
}

/// Pushes raw-category counts through the ethnicity map.
pub fn mapped_ethnicity_counts(raw: &BTreeMap<RawEthnicity, usize>) -> BTreeMap<Ethnicity, usize> {
    let mut out = BTreeMap::new();
    for (k, n) in raw {
        *out.entry(map_ethnicity(*k)).or_default() += n;
    }
    out
}

/// Pushes raw emotion counts through the emotion map.
pub fn mapped_emotion_counts(
    raw: &BTreeMap<String, usize>,
) -> Result<BTreeMap<MappedEmotion, usize>, CorpusError> {
    let mut out = BTreeMap::new();
    for (k, n) in raw {
        *out.entry(map_emotion(k)?).or_default() += n;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn mapping_conserves_counts(counts in prop::collection::vec(0usize..500, 5)) {
            let raw: BTreeMap<RawEthnicity, usize> = RawEthnicity::ALL.iter().copied().zip(counts.iter().copied()).collect();
            let mapped = mapped_ethnicity_counts(&raw);
            prop_assert_eq!(mapped.values().sum::<usize>(), counts.iter().sum::<usize>());
        }

        #[test]
        fn emotion_mapping_conserves_counts(counts in prop::collection::vec(0usize..100, 9)) {
            let raw: BTreeMap<String, usize> = crate::corpus::labels::RAW_EMOTIONS.iter().map(|s| s.to_string()).zip(counts.iter().copied()).collect();
            let mapped = mapped_emotion_counts(&raw).unwrap();
            prop_assert_eq!(mapped.values().sum::<usize>(), counts.iter().sum::<usize>());
            prop_assert_eq!(mapped.get(&MappedEmotion::Excluded).copied().unwrap_or(0), counts[8]);
        }
    }
}
