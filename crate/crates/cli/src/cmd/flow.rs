//! `flow`: materialize the flow-image cache for every eligible sample.

use std::path::PathBuf;

use clap::Args;
use mecross::protocol::{materialize_flow, FlowStat};
use rayon::prelude::*;
use serde::Serialize;

use crate::common::{load_manifest, write, FlowArgs, RunConfig};
use crate::error::{CliResult, Context};

#[derive(Debug, Clone, Args, Serialize)]
pub struct FlowCmdArgs {
    /// Manifest written by `mecross manifest`.
    #[arg(long, short)]
    pub manifest: PathBuf,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Recompute even when a cached image matches the flow parameters.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub flow: FlowArgs,
}

fn stats_csv(stats: &[FlowStat]) -> String {
    let mut s = String::from("key,cached,clip_fx,clip_fy,clip_strain\n");
    for st in stats {
        let [a, b, c] = st.clip_fraction;
        s.push_str(&format!("{},{},{a:.6},{b:.6},{c:.6}\n", st.key, st.cached));
    }
    s
}

pub fn run(args: FlowCmdArgs) -> CliResult {
    let manifest = load_manifest(&args.manifest)?;
    let params = args.flow.params(&manifest)?;
    let cache = args.flow.cache_dir(&args.out);
    let eligible = manifest.eligible();
    let stats: Vec<FlowStat> = eligible
        .par_iter()
        .map(|r| {
            materialize_flow(&manifest, r, &params, Some(&cache), args.force)
                .map(|(_, stat)| stat)
                .with_context(|| format!("flow for {}", r.key_string()))
        })
        .collect::<CliResult<_>>()?;
    write(&args.out.join("flow_stats.csv"), &stats_csv(&stats))?;
    let cached = stats.iter().filter(|s| s.cached).count();
    let n = stats.len().max(1) as f64;
    let mean = |c: usize| stats.iter().map(|s| s.clip_fraction[c]).sum::<f64>() / n;
    println!(
        "{} samples: {} computed, {cached} cached; mean clipped fraction fx {:.4}, fy {:.4}, strain {:.4}",
        stats.len(),
        stats.len() - cached,
        mean(0),
        mean(1),
        mean(2)
    );
    let mut run = RunConfig::new("flow", Some(&args.manifest), &args.out, manifest.provenance.seed, params);
    run.extra = serde_json::to_value(&args).expect("args serialize");
    run.save_provenance(&manifest, "flow")?;
    Ok(())
}
