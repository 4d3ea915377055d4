//! Materializing manifest samples into network inputs, with an on-disk
//! cache of flow images keyed by the flow parameters.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Emotion, Ethnicity, Manifest, SampleRecord};
use crate::flowcore::{
    assemble_flow_image, compute_strain, estimate_flow, load_frame, load_rgb_frame, read_flow_image, write_flow_image,
    FlowParams, OpticalFlowImage, RgbFrame,
};
use crate::model::{Labels, ModelInput, TrainingSample};
use crate::seed::sha256_hex;

use super::ProtocolError;

/// An eligible sample with its motion input and, optionally, its apex frame.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub key: String,
    pub subject_id: String,
    pub ethnicity: Ethnicity,
    pub emotion: Emotion,
    pub flow: OpticalFlowImage<f64>,
    pub rgb: Option<RgbFrame<f64>>,
}

impl PreparedSample {
    pub fn model_input(&self) -> ModelInput<f64> {
        let input = ModelInput::from_flow_image(&self.flow);
        match &self.rgb {
            Some(rgb) => input.with_rgb(rgb),
            None => input,
        }
    }

    pub fn training_sample(&self) -> TrainingSample<f64> {
        TrainingSample {
            input: self.model_input(),
            labels: Labels {
                emotion: self.emotion.index(),
                ethnicity: Some(self.ethnicity.index()),
            },
        }
    }
}

/// Sidecar stored next to each cached flow image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSidecar {
    pub flow_params_hash: String,
    pub onset_path: String,
    pub apex_path: String,
    /// Fraction of clipped pixels per channel (fx, fy, strain).
    pub clip_fraction: [f64; 3],
}

/// Per-sample outcome of flow materialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStat {
    pub key: String,
    pub cached: bool,
    pub clip_fraction: [f64; 3],
}

pub fn flow_params_hash(params: &FlowParams) -> String {
    sha256_hex(serde_json::to_string(params).expect("flow params serialize").as_bytes())
}

/// `<flow_dir>/<dataset>/<subject>/<clip>.ofi`.
pub fn flow_image_path(flow_dir: &Path, record: &SampleRecord) -> PathBuf {
    flow_dir
        .join(record.dataset.to_string())
        .join(&record.subject_id)
        .join(format!("{}.ofi", record.clip_id))
}

fn sidecar_path(ofi: &Path) -> PathBuf {
    let mut s = ofi.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Onset→apex flow image of one record.
pub fn compute_flow_image(
    manifest: &Manifest,
    record: &SampleRecord,
    params: &FlowParams,
) -> Result<OpticalFlowImage<f64>, ProtocolError> {
    let onset = load_frame::<f64>(manifest.resolve_path(&record.onset_path))?;
    let apex = load_frame::<f64>(manifest.resolve_path(&record.apex_path))?;
    let flow = estimate_flow(&onset, &apex, params)?;
    let strain = compute_strain(&flow);
    Ok(assemble_flow_image(&flow, &strain)?)
}

fn cached_image(ofi: &Path, hash: &str) -> Option<(OpticalFlowImage<f64>, FlowSidecar)> {
    let text = std::fs::read_to_string(sidecar_path(ofi)).ok()?;
    let sidecar: FlowSidecar = serde_json::from_str(&text).ok()?;
    if sidecar.flow_params_hash != hash {
        return None;
    }
    let img = read_flow_image::<f64>(ofi).ok()?;
    Some((img, sidecar))
}

/// Flow image for one record, reading or refreshing the cache when
/// `flow_dir` is given.
pub fn materialize_flow(
    manifest: &Manifest,
    record: &SampleRecord,
    params: &FlowParams,
    flow_dir: Option<&Path>,
    force: bool,
) -> Result<(OpticalFlowImage<f64>, FlowStat), ProtocolError> {
    let hash = flow_params_hash(params);
    let key = record.key_string();
    let ofi = flow_dir.map(|d| flow_image_path(d, record));
    if let (Some(ofi), false) = (&ofi, force) {
        if let Some((img, sidecar)) = cached_image(ofi, &hash) {
            return Ok((
                img,
                FlowStat {
                    key,
                    cached: true,
                    clip_fraction: sidecar.clip_fraction,
                },
            ));
        }
    }
    let img = compute_flow_image(manifest, record, params)?;
    let clip_fraction = img.clip_fraction.unwrap_or([0.0; 3]);
    if let Some(ofi) = &ofi {
        write_flow_image(&img, ofi)?;
        let sidecar = FlowSidecar {
            flow_params_hash: hash,
            onset_path: record.onset_path.clone(),
            apex_path: record.apex_path.clone(),
            clip_fraction,
        };
        let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        crate::io_util::write_atomic(&sidecar_path(ofi), text.as_bytes()).map_err(|source| ProtocolError::Io {
            path: sidecar_path(ofi),
            source,
        })?;
    }
    Ok((
        img,
        FlowStat {
            key,
            cached: false,
            clip_fraction,
        },
    ))
}

/// Flow images (and apex frames when `with_rgb`) for every eligible record,
/// in manifest order. Samples are processed in parallel.
pub fn prepare_samples(
    manifest: &Manifest,
    params: &FlowParams,
    flow_dir: Option<&Path>,
    force: bool,
    with_rgb: bool,
) -> Result<(Vec<PreparedSample>, Vec<FlowStat>), ProtocolError> {
    let eligible = manifest.eligible();
    let out: Vec<(PreparedSample, FlowStat)> = eligible
        .par_iter()
        .map(|r| {
            let (flow, stat) = materialize_flow(manifest, r, params, flow_dir, force)?;
            let rgb = if with_rgb {
                Some(load_rgb_frame::<f64>(manifest.resolve_path(&r.apex_path))?)
            } else {
                None
            };
            let missing = |what: &str| ProtocolError::Unlabelled {
                key: r.key_string(),
                what: what.to_string(),
            };
            Ok((
                PreparedSample {
                    key: r.key_string(),
                    subject_id: r.subject_id.clone(),
                    ethnicity: r.mapped_ethnicity.ok_or_else(|| missing("ethnicity"))?,
                    emotion: r.emotion().ok_or_else(|| missing("emotion"))?,
                    flow,
                    rgb,
                },
                stat,
            ))
        })
        .collect::<Result<_, ProtocolError>>()?;
    Ok(out.into_iter().unzip())
}
