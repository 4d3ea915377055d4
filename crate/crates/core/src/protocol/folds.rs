use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// One leave-one-subject-out split, by sample key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub held_out: String,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// One fold per distinct subject, ordered by subject id. `samples` yields
/// `(sample key, subject id)`; keys keep their input order inside each side.
pub fn plan_loso<'a>(samples: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Vec<FoldPlan>, ProtocolError> {
    let samples: Vec<(&str, &str)> = samples.into_iter().collect();
    let mut by_subject: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for &(key, subject) in &samples {
        by_subject.entry(subject).or_default().push(key);
    }
    if by_subject.len() < 2 {
        return Err(ProtocolError::TooFewSubjects(by_subject.len()));
    }
    Ok(by_subject
        .into_iter()
        .map(|(subject, test)| FoldPlan {
            held_out: subject.to_string(),
            train: samples
                .iter()
                .filter(|(_, s)| *s != subject)
                .map(|(k, _)| k.to_string())
                .collect(),
            test: test.into_iter().map(str::to_string).collect(),
        })
        .collect())
}
