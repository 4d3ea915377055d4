//! Deterministic desk-scale corpus.
//!
//! Each subject owns a smooth sinusoidal base texture; its spatial-frequency
//! band and color tint encode the ethnicity proxy. Each clip is an
//! (onset, apex) pair where the apex is the base texture pushed by one
//! Gaussian displacement bump. Bump placement and direction encode emotion:
//!
//! | emotion  | center (fraction of side)     | direction      |
//! |----------|-------------------------------|----------------|
//! | Positive | (0.25 or 0.75, 0.75) lower face | outward and up |
//! | Surprise | (0.25 or 0.75, 0.25) brow       | up             |
//! | Negative | (0.5, 0.5) mid face             | down           |
//!
//! `shift_strength` in `[0, 1]` moves NonAsian subjects' patterns toward a
//! swapped layout: their Positive/Surprise bumps drift to the Negative
//! placement, and their Negative bumps drift to the brow with an upward
//! push. At 0 the displacement distribution is identical for both groups.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::flowcore::{write_ppm, RgbFrame};
use crate::seed::rng_for;

use super::correction::ledger_hash;
use super::labels::{map_ethnicity, Dataset, Emotion, Ethnicity, Gender, MappedEmotion, RawEthnicity};
use super::manifest::{build_manifest, Manifest, Provenance};
use super::record::{SampleRecord, SynthTruth};
use super::CorpusError;

pub const SYNTH_PREDICTOR: &str = "synthetic-ground-truth";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub subjects_per_group: usize,
    pub clips_per_subject: usize,
    pub image_size: usize,
    pub shift_strength: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            subjects_per_group: 8,
            clips_per_subject: 10,
            image_size: 64,
            shift_strength: 0.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::InvalidSynthSpec(m.to_string()));
        if self.image_size < 32 {
            return bad("image_size must be >= 32");
        }
        if self.subjects_per_group < 1 {
            return bad("need at least one subject per group");
        }
        if self.clips_per_subject < 1 {
            return bad("need at least one clip per subject");
        }
        if !(0.0..=1.0).contains(&self.shift_strength) {
            return bad("shift_strength must lie in [0, 1]");
        }
        Ok(())
    }
}

const ASIAN_BAND: (f64, f64) = (2.0, 4.0);
const NON_ASIAN_BAND: (f64, f64) = (5.5, 8.0);
const ASIAN_TINT: [f64; 3] = [1.0, 0.86, 0.72];
const NON_ASIAN_TINT: [f64; 3] = [0.92, 0.82, 0.84];
const COMPONENTS: usize = 10;
/// Bump width as a fraction of the image side.
const BUMP_SIGMA: f64 = 0.12;
/// Emotion cycle per subject: 3 Negative, 1 Positive, 1 Surprise.
const EMOTION_CYCLE: [Emotion; 5] = [
    Emotion::Negative,
    Emotion::Positive,
    Emotion::Negative,
    Emotion::Surprise,
    Emotion::Negative,
];
const NEGATIVE_WORDS: [&str; 6] = ["anger", "contempt", "disgust", "fear", "repression", "sadness"];

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectTexture {
    /// (frequency x, frequency y, phase, amplitude); frequencies in cycles per side.
    components: Vec<(f64, f64, f64, f64)>,
    tint: [f64; 3],
    band: (f64, f64),
}

impl SubjectTexture {
    fn value(&self, x: f64, y: f64, size: f64) -> f64 {
        let s: f64 = self
            .components
            .iter()
            .map(|&(fx, fy, ph, a)| a * (2.0 * PI * (fx * x + fy * y) / size + ph).sin())
            .sum();
        0.5 + s
    }
}

/// Everything needed to render one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub subject_id: String,
    pub clip_id: String,
    pub ethnicity: Ethnicity,
    pub raw_ethnicity: RawEthnicity,
    pub gender: Gender,
    pub age: u32,
    pub emotion: Emotion,
    pub raw_emotion: String,
    pub truth: SynthTruth,
    pub texture: SubjectTexture,
    pub size: usize,
}

fn canonical(emotion: Emotion, left: bool) -> ((f64, f64), f64) {
    let side = if left { 0.25 } else { 0.75 };
    match emotion {
        Emotion::Positive => {
            let dx = if left { -1.0 } else { 1.0 };
            ((side, 0.75), f64::atan2(-0.4, dx))
        }
        Emotion::Surprise => ((side, 0.25), -PI / 2.0),
        Emotion::Negative => ((0.5, 0.5), PI / 2.0),
    }
}

/// Placement the shifted group drifts toward.
fn shifted_target(emotion: Emotion, left: bool) -> ((f64, f64), f64) {
    match emotion {
        Emotion::Positive | Emotion::Surprise => canonical(Emotion::Negative, left),
        Emotion::Negative => canonical(Emotion::Surprise, left),
    }
}

fn lerp_angle(a: f64, b: f64, t: f64) -> f64 {
    let mut d = (b - a) % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    a + t * d
}

/// Plans the corpus without rendering: subjects, textures, labels, bumps.
pub fn plan_desk_corpus(spec: &SynthSpec, seed: u64) -> Result<Vec<SynthClip>, CorpusError> {
    spec.validate()?;
    let size = spec.image_size as f64;
    let mut clips = Vec::new();
    let n_subjects = 2 * spec.subjects_per_group;
    for s in 0..n_subjects {
        let mut rng = rng_for(seed, "synth-subject", s as u64);
        // even subjects form the Asian-proxy group, odd the NonAsian one
        let group_index = s / 2;
        let (ethnicity, raw_ethnicity) = if s % 2 == 0 {
            let raw = match group_index % 5 {
                3 => RawEthnicity::Indian,
                4 => RawEthnicity::Others,
                _ => RawEthnicity::Asian,
            };
            (Ethnicity::Asian, raw)
        } else {
            let raw = if group_index % 4 == 3 {
                RawEthnicity::African
            } else {
                RawEthnicity::Caucasian
            };
            (Ethnicity::NonAsian, raw)
        };
        debug_assert_eq!(map_ethnicity(raw_ethnicity), ethnicity);
        let (band, tint0) = match ethnicity {
            Ethnicity::Asian => (ASIAN_BAND, ASIAN_TINT),
            Ethnicity::NonAsian => (NON_ASIAN_BAND, NON_ASIAN_TINT),
        };
        let mut components: Vec<(f64, f64, f64, f64)> = (0..COMPONENTS)
            .map(|_| {
                let f = rng.random_range(band.0..band.1);
                let theta = rng.random_range(0.0..PI);
                let phase = rng.random_range(0.0..2.0 * PI);
                let amp = rng.random_range(0.5..1.0);
                (f * theta.cos(), f * theta.sin(), phase, amp)
            })
            .collect();
        let total: f64 = components.iter().map(|c| c.3).sum();
        for c in &mut components {
            c.3 *= 0.3 / total;
        }
        let tint = tint0.map(|t| t + rng.random_range(-0.04..0.04));
        let texture = SubjectTexture {
            components,
            tint,
            band,
        };
        let gender = if rng.random_bool(0.5) { Gender::Male } else { Gender::Female };
        let age = rng.random_range(19..41);
        let offset = rng.random_range(0..EMOTION_CYCLE.len());
        let subject_id = format!("S{:02}", s + 1);
        for c in 0..spec.clips_per_subject {
            let mut crng = rng_for(seed, &format!("synth-clip-{subject_id}"), c as u64);
            let emotion = EMOTION_CYCLE[(offset + c) % EMOTION_CYCLE.len()];
            let raw_emotion = match emotion {
                Emotion::Positive => "happiness".to_string(),
                Emotion::Surprise => "surprise".to_string(),
                Emotion::Negative => NEGATIVE_WORDS.choose(&mut crng).expect("nonempty").to_string(),
            };
            let left = crng.random_bool(0.5);
            let ((cx, cy), mut angle) = canonical(emotion, left);
            let (mut cx, mut cy) = (cx, cy);
            if ethnicity == Ethnicity::NonAsian && spec.shift_strength > 0.0 {
                let ((tx, ty), ta) = shifted_target(emotion, left);
                let t = spec.shift_strength;
                cx += t * (tx - cx);
                cy += t * (ty - cy);
                angle = lerp_angle(angle, ta, t);
            }
            let jitter = 0.03;
            cx += crng.random_range(-jitter..jitter);
            cy += crng.random_range(-jitter..jitter);
            let amplitude = crng.random_range(1.2..2.0);
            clips.push(SynthClip {
                subject_id: subject_id.clone(),
                clip_id: format!("C{:02}", c + 1),
                ethnicity,
                raw_ethnicity,
                gender,
                age,
                emotion,
                raw_emotion,
                truth: SynthTruth {
                    center: (cx * size, cy * size),
                    sigma: BUMP_SIGMA * size,
                    amplitude,
                    direction: (angle.cos(), angle.sin()),
                    texture_band: band,
                },
                texture: texture.clone(),
                size: spec.image_size,
            });
        }
    }
    Ok(clips)
}

/// Displacement at pixel (x, y) generated by a bump.
pub fn bump_displacement(t: &SynthTruth, x: f64, y: f64) -> (f64, f64) {
    let r2 = (x - t.center.0).powi(2) + (y - t.center.1).powi(2);
    let g = t.amplitude * (-r2 / (2.0 * t.sigma * t.sigma)).exp();
    (g * t.direction.0, g * t.direction.1)
}

/// Renders (onset, apex) for a planned clip. The apex samples the texture at
/// `x - d(x)`, so content moves along the bump direction.
pub fn render_clip(clip: &SynthClip) -> (RgbFrame<f64>, RgbFrame<f64>) {
    let n = clip.size;
    let size = n as f64;
    let mut onset: [Vec<f64>; 3] = Default::default();
    let mut apex: [Vec<f64>; 3] = Default::default();
    for y in 0..n {
        for x in 0..n {
            let (xf, yf) = (x as f64, y as f64);
            let (dx, dy) = bump_displacement(&clip.truth, xf, yf);
            let a = clip.texture.value(xf, yf, size);
            let b = clip.texture.value(xf - dx, yf - dy, size);
            for c in 0..3 {
                onset[c].push((clip.texture.tint[c] * a).clamp(0.0, 1.0));
                apex[c].push((clip.texture.tint[c] * b).clamp(0.0, 1.0));
            }
        }
    }
    (
        RgbFrame::new(n, n, onset).expect("texture values are clamped"),
        RgbFrame::new(n, n, apex).expect("texture values are clamped"),
    )
}

/// Plans, renders, and writes the corpus under `out_dir`
/// (`frames/<subject>/<clip>_{onset,apex}.ppm` plus `manifest.jsonl`).
pub fn synthesize_desk_corpus(
    spec: &SynthSpec,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<Manifest, CorpusError> {
    let out_dir = out_dir.as_ref();
    let clips = plan_desk_corpus(spec, seed)?;
    let mut records = Vec::with_capacity(clips.len());
    for clip in &clips {
        let (onset, apex) = render_clip(clip);
        let rel_onset = format!("frames/{}/{}_onset.ppm", clip.subject_id, clip.clip_id);
        let rel_apex = format!("frames/{}/{}_apex.ppm", clip.subject_id, clip.clip_id);
        write_ppm(&onset, out_dir.join(&rel_onset))?;
        write_ppm(&apex, out_dir.join(&rel_apex))?;
        records.push(SampleRecord {
            dataset: Dataset::Synth,
            subject_id: clip.subject_id.clone(),
            clip_id: clip.clip_id.clone(),
            onset_path: rel_onset,
            apex_path: rel_apex,
            raw_emotion: clip.raw_emotion.clone(),
            mapped_emotion: Some(MappedEmotion::from(clip.emotion)),
            raw_ethnicity: Some(clip.raw_ethnicity),
            mapped_ethnicity: Some(clip.ethnicity),
            gender: Some(clip.gender),
            age: Some(clip.age),
            corrected: false,
            synth: Some(clip.truth.clone()),
        });
    }
    let mut provenance = Provenance::new(SYNTH_PREDICTOR, ledger_hash(&[]), seed);
    provenance.synth = Some(*spec);
    let manifest = build_manifest(records, provenance, out_dir)?;
    manifest.save(out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}
