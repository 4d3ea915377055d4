//! `loso`: leave-one-subject-out training and evaluation of one or more
//! network variants, with fold-level checkpoints.

use std::path::PathBuf;

use clap::Args;
use mecross::model::Variant;
use mecross::protocol::{
    benchmark_csv, benchmark_markdown, metrics_csv, metrics_markdown, run_benchmark, BenchmarkConfig,
};
use serde::Serialize;

use crate::common::{load_manifest, samples, write, write_json, FlowArgs, RunConfig};
use crate::error::{CliResult, Context};

#[derive(Debug, Clone, Args, Serialize)]
pub struct LosoArgs {
    /// Manifest written by `mecross manifest`.
    #[arg(long, short)]
    pub manifest: PathBuf,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Variants to run, comma separated: motion_only, dual_motion,
    /// motion_plus_rgb_conv, motion_plus_rgb_patch.
    #[arg(long = "variant", value_delimiter = ',', default_value = "dual_motion")]
    pub variants: Vec<Variant>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Per-epoch learning-rate decay factor.
    #[arg(long)]
    pub lr_decay: Option<f64>,
    #[command(flatten)]
    pub flow: FlowArgs,
}

pub fn run(args: LosoArgs) -> CliResult {
    let manifest = load_manifest(&args.manifest)?;
    let params = args.flow.params(&manifest)?;
    let mut cfg = BenchmarkConfig::new(args.seed);
    let t = &mut cfg.train;
    t.epochs = args.epochs.unwrap_or(t.epochs);
    t.batch_size = args.batch_size.unwrap_or(t.batch_size);
    t.learning_rate = args.learning_rate.unwrap_or(t.learning_rate);
    t.lr_decay = args.lr_decay.unwrap_or(t.lr_decay);
    cfg.train.validate()?;
    let with_rgb = args.variants.iter().any(|v| v.needs_rgb());
    let samples = samples(&manifest, &params, &args.flow.cache_dir(&args.out), with_rgb)?;
    if let Some(rgb) = samples.iter().find_map(|s| s.rgb.as_ref()) {
        // the patch encoder tiles the apex frame at its native size
        cfg.model.patch.image_size = rgb.width();
    }
    let report = run_benchmark(&samples, &args.variants, &cfg, Some(&args.out.join("loso")))
        .with_context(|| "LOSO run")?;

    let mut run = RunConfig::new("loso", Some(&args.manifest), &args.out, args.seed, params);
    run.model = Some(cfg.model.clone());
    run.train = Some(cfg.train.clone());
    run.extra = serde_json::to_value(&args).expect("args serialize");
    for r in &report.runs {
        let stem = format!("loso-{}", r.variant);
        write(&args.out.join(format!("{stem}.md")), &metrics_markdown(&r.report))?;
        write(&args.out.join(format!("{stem}.csv")), &metrics_csv(&r.report))?;
        write_json(&args.out.join(format!("{stem}.json")), r)?;
        let mut per_variant = run.clone();
        per_variant.variants = vec![r.variant];
        per_variant.model = Some(cfg.for_variant(r.variant));
        per_variant.save_provenance(&manifest, &stem)?;
    }
    let text = benchmark_markdown(&report);
    write(&args.out.join("benchmark.md"), &text)?;
    write(&args.out.join("benchmark.csv"), &benchmark_csv(&report))?;
    write_json(&args.out.join("benchmark.json"), &report)?;
    run.variants = args.variants.clone();
    run.save_provenance(&manifest, "benchmark")?;
    print!("{text}");
    Ok(())
}
