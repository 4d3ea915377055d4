//! In-memory manifests with the joint-corpus label distribution.

use std::path::PathBuf;

use mecross::corpus::{
    map_emotion, map_ethnicity, synthesize_desk_corpus, Dataset, Gender, Manifest, Provenance, RawEthnicity,
    SampleRecord, SynthSpec,
};
use mecross::flowcore::FlowParams;
use mecross::protocol::{prepare_samples, PreparedSample};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// (raw ethnicity, subjects, videos) of the merged corpus.
pub const JOINT_ETHNICITY: [(RawEthnicity, usize, usize); 5] = [
    (RawEthnicity::Caucasian, 15, 88),
    (RawEthnicity::African, 2, 4),
    (RawEthnicity::Asian, 31, 183),
    (RawEthnicity::Indian, 2, 5),
    (RawEthnicity::Others, 4, 11),
];

/// Raw emotion label counts: 58 happiness, 192 spread over the negative
/// words, 40 surprise, and one excluded clip.
pub fn joint_raw_emotions() -> Vec<(&'static str, usize)> {
    vec![
        ("happiness", 58),
        ("anger", 32),
        ("contempt", 32),
        ("disgust", 32),
        ("fear", 32),
        ("repression", 32),
        ("sadness", 32),
        ("surprise", 40),
        ("others", 1),
    ]
}

/// A 54-subject, 291-clip manifest whose frame paths are never opened.
pub fn joint_manifest(seed: u64) -> Manifest {
    let mut emotions: Vec<&str> = joint_raw_emotions()
        .into_iter()
        .flat_map(|(e, n)| std::iter::repeat_n(e, n))
        .collect();
    emotions.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut emotions = emotions.into_iter();
    let mut records = Vec::new();
    let mut subject = 0;
    for (raw, subjects, videos) in JOINT_ETHNICITY {
        for s in 0..subjects {
            subject += 1;
            let clips = videos / subjects + usize::from(s < videos % subjects);
            let subject_id = format!("P{subject:02}");
            for c in 0..clips {
                let raw_emotion = emotions.next().expect("emotion counts match video counts");
                records.push(SampleRecord {
                    dataset: if subject % 2 == 0 { Dataset::Casme2 } else { Dataset::Samm },
                    subject_id: subject_id.clone(),
                    clip_id: format!("C{c:02}"),
                    onset_path: format!("{subject_id}/C{c:02}_onset.ppm"),
                    apex_path: format!("{subject_id}/C{c:02}_apex.ppm"),
                    raw_emotion: raw_emotion.to_string(),
                    mapped_emotion: Some(map_emotion(raw_emotion).unwrap()),
                    raw_ethnicity: Some(raw),
                    mapped_ethnicity: Some(map_ethnicity(raw)),
                    gender: Some(Gender::Unknown),
                    age: None,
                    corrected: false,
                    synth: None,
                });
            }
        }
    }
    assert!(emotions.next().is_none());
    Manifest {
        provenance: Provenance::new("fixture", "none", seed),
        records,
        base_dir: PathBuf::from("/nonexistent"),
    }
}

/// Renders a synthetic corpus under `dir` and computes its flow images.
pub fn synth_samples(spec: &SynthSpec, seed: u64, dir: &std::path::Path, with_rgb: bool) -> (Manifest, Vec<PreparedSample>) {
    let manifest = synthesize_desk_corpus(spec, seed, dir).unwrap();
    let (samples, _) = prepare_samples(&manifest, &FlowParams::default(), None, false, with_rgb).unwrap();
    (manifest, samples)
}
