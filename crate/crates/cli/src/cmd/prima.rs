//! `prima-facie`: mono- versus mixed-ethnicity sampling study with a random
//! forest on frozen features.

use std::path::PathBuf;

use clap::Args;
use mecross::model::{EncoderConfig, FrozenEncoder};
use mecross::protocol::{
    prima_facie_csv, prima_facie_markdown, run_prima_facie, sample_prima_facie, ForestConfig, PrimaFacieScenario,
    ScenarioKind,
};
use mecross::seed::derive_seed;
use serde::Serialize;

use crate::common::{load_manifest, samples, write, write_json, FlowArgs, RunConfig};
use crate::error::{CliResult, Context};

#[derive(Debug, Clone, Args, Serialize)]
pub struct PrimaArgs {
    /// Manifest written by `mecross manifest`.
    #[arg(long, short)]
    pub manifest: PathBuf,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Scenarios to run, comma separated: asian_only, non_asian_only, mixed.
    #[arg(long = "scenario", value_delimiter = ',', default_value = "asian_only,non_asian_only,mixed")]
    pub scenarios: Vec<ScenarioKind>,
    /// Number of sampling seeds; seed k is `--seed + k`.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Frozen encoder weights; defaults to seeded random features.
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 8)]
    pub max_depth: usize,
    #[command(flatten)]
    pub flow: FlowArgs,
}

pub fn run(args: PrimaArgs) -> CliResult {
    let manifest = load_manifest(&args.manifest)?;
    let params = args.flow.params(&manifest)?;
    if args.seeds == 0 || args.scenarios.is_empty() {
        return Err(crate::error::CliError::config("need at least one seed and one scenario"));
    }
    let seeds: Vec<u64> = (0..args.seeds).map(|k| args.seed + k).collect();
    // quotas do not depend on the seed; refuse before any flow work
    for &kind in &args.scenarios {
        sample_prima_facie(&manifest, &PrimaFacieScenario::new(kind, seeds[0]))
            .with_context(|| format!("refusing scenario {kind}"))?;
    }
    let encoder = match &args.encoder {
        Some(p) => FrozenEncoder::load(p).with_context(|| format!("loading encoder {}", p.display()))?,
        None => FrozenEncoder::random(EncoderConfig::default(), derive_seed(args.seed, "frozen_encoder", 0))?,
    };
    let forest = ForestConfig {
        trees: args.trees,
        max_depth: args.max_depth,
        ..ForestConfig::default()
    };
    let samples = samples(&manifest, &params, &args.flow.cache_dir(&args.out), false)?;
    let report = run_prima_facie(&samples, &args.scenarios, &seeds, &encoder, &forest)?;
    let text = prima_facie_markdown(&report);
    write(&args.out.join("prima_facie.md"), &text)?;
    write(&args.out.join("prima_facie.csv"), &prima_facie_csv(&report))?;
    write_json(&args.out.join("prima_facie.json"), &report)?;
    let mut run = RunConfig::new("prima-facie", Some(&args.manifest), &args.out, args.seed, params);
    run.scenarios = args.scenarios.clone();
    run.extra = serde_json::json!({ "args": args, "forest": forest, "encoder": encoder.source() });
    run.save_provenance(&manifest, "prima_facie")?;
    print!("{text}");
    Ok(())
}
