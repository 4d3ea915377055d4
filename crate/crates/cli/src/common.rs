//! Pieces shared by the subcommands: run configuration, flow settings,
//! sample preparation and provenance sidecars.

use std::path::{Path, PathBuf};

use clap::Args;
use mecross::corpus::Manifest;
use mecross::flowcore::FlowParams;
use mecross::model::{ModelConfig, TrainConfig, Variant};
use mecross::protocol::{prepare_samples, write_text, PreparedSample, RunProvenance, ScenarioKind};
use serde::Serialize;

use crate::error::{CliResult, Context};

/// What a run was asked to do; stored in its provenance sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub manifest: Option<PathBuf>,
    pub output: PathBuf,
    pub seed: u64,
    pub flow_params: FlowParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scenarios: Vec<ScenarioKind>,
    /// Subcommand-specific settings.
    pub extra: serde_json::Value,
}

impl RunConfig {
    pub fn new(subcommand: &str, manifest: Option<&Path>, output: &Path, seed: u64, flow_params: FlowParams) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            manifest: manifest.map(Path::to_path_buf),
            output: output.to_path_buf(),
            seed,
            flow_params,
            model: None,
            train: None,
            variants: Vec::new(),
            scenarios: Vec::new(),
            extra: serde_json::Value::Null,
        }
    }

    /// Writes `<out>/<stem>.provenance.json` and returns its hash.
    pub fn save_provenance(&self, manifest: &Manifest, stem: &str) -> CliResult<String> {
        let provenance = RunProvenance::new(
            self.subcommand.clone(),
            self.seed,
            manifest.content_hash(),
            manifest.provenance.ledger_hash.clone(),
            self.flow_params,
            serde_json::to_value(self).expect("run config serializes"),
        );
        let path = self.output.join(format!("{stem}.provenance.json"));
        let hash = provenance.save(&path).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {} ({})", path.display(), &hash[..12]);
        Ok(hash)
    }
}

/// Overrides on top of the flow parameters recorded in the manifest.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct FlowArgs {
    /// Smoothness weight of the flow solver.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Solver iterations per pyramid level.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Number of pyramid levels.
    #[arg(long)]
    pub pyramid_levels: Option<usize>,
    /// Flow image cache directory [default: <out>/flow].
    #[arg(long)]
    pub flow_cache: Option<PathBuf>,
}

impl FlowArgs {
    pub fn params(&self, manifest: &Manifest) -> CliResult<FlowParams> {
        let mut p = manifest.provenance.flow_params;
        if let Some(a) = self.alpha {
            p.smoothness_alpha = a;
        }
        if let Some(i) = self.iterations {
            p.iterations = i;
        }
        if let Some(l) = self.pyramid_levels {
            p.pyramid_levels = l;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn cache_dir(&self, out: &Path) -> PathBuf {
        self.flow_cache.clone().unwrap_or_else(|| out.join("flow"))
    }
}

pub fn load_manifest(path: &Path) -> CliResult<Manifest> {
    Manifest::load(path).with_context(|| format!("loading manifest {}", path.display()))
}

/// Flow images (cached under `cache`) and optionally apex frames for every
/// eligible record.
pub fn samples(
    manifest: &Manifest,
    params: &FlowParams,
    cache: &Path,
    with_rgb: bool,
) -> CliResult<Vec<PreparedSample>> {
    let (samples, stats) =
        prepare_samples(manifest, params, Some(cache), false, with_rgb).with_context(|| "preparing samples")?;
    let cached = stats.iter().filter(|s| s.cached).count();
    log::info!("{} samples ready ({cached} flow images from cache)", samples.len());
    if samples.is_empty() {
        return Err(crate::error::CliError::data("manifest has no eligible samples"));
    }
    Ok(samples)
}

pub fn write(path: &Path, text: &str) -> CliResult {
    write_text(path, text).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    write(path, &serde_json::to_string_pretty(value).expect("report serializes"))
}

/// File-name-safe form of an identifier.
pub fn safe_name(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}
