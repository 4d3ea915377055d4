//! `manifest`: ingest dataset indices (or synthesize a corpus), annotate,
//! correct, remap, and summarize.

use std::path::PathBuf;

use clap::Args;
use mecross::corpus::{
    annotate_records, apply_heuristic_corrections, build_manifest, ingest_dataset_index, ledger_hash, load_ledger,
    summarize_distribution, synthesize_desk_corpus, AnnotationPolicy, AttributePredictor, CommandPredictor,
    CorrectionRule, Dataset, Manifest, Provenance, StubPredictor, SynthSpec,
};
use serde::Serialize;

use crate::common::{load_manifest, write, RunConfig};
use crate::error::{CliError, CliResult, Context};

#[derive(Debug, Clone, Args, Serialize)]
pub struct ManifestArgs {
    /// CASME II index (CSV or TSV with subject, clip, onset, apex, emotion).
    #[arg(long, conflicts_with = "synth")]
    pub casme2: Option<PathBuf>,
    /// SAMM index, same columns.
    #[arg(long, conflicts_with = "synth")]
    pub samm: Option<PathBuf>,
    /// Correction ledger: `dataset, subject, attribute, replacement[, note]` per line.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    /// Attribute predictor: `table:<csv>` or `command:<program> [args...]`.
    #[arg(long)]
    pub predictor: Option<String>,
    /// Drop samples the predictor fails on instead of aborting.
    #[arg(long)]
    pub skip_failed: bool,
    /// Generate the synthetic desk-scale corpus instead of ingesting indices.
    #[arg(long)]
    pub synth: bool,
    #[arg(long, default_value_t = 8)]
    pub synth_subjects: usize,
    #[arg(long, default_value_t = 10)]
    pub synth_clips: usize,
    #[arg(long, default_value_t = 64)]
    pub synth_size: usize,
    /// Ethnic shift strength in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    pub synth_shift: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

fn predictor(spec: &str) -> CliResult<Box<dyn AttributePredictor>> {
    if let Some(path) = spec.strip_prefix("table:") {
        let p = StubPredictor::from_table_file(path).with_context(|| format!("loading predictor table {path}"))?;
        return Ok(Box::new(p));
    }
    if let Some(cmd) = spec.strip_prefix("command:") {
        let mut parts = cmd.split_whitespace();
        let program = parts.next().ok_or_else(|| CliError::config("command predictor needs a program"))?;
        return Ok(Box::new(CommandPredictor {
            program: program.into(),
            args: parts.map(str::to_string).collect(),
        }));
    }
    Err(CliError::config(format!("unknown predictor {spec:?}; use table:<csv> or command:<program>")))
}

fn ledger(path: Option<&PathBuf>) -> CliResult<Vec<CorrectionRule>> {
    match path {
        Some(p) if p.exists() => Ok(load_ledger(p).with_context(|| format!("loading ledger {}", p.display()))?),
        Some(p) => {
            log::warn!("correction ledger {} not found; continuing with an empty ledger", p.display());
            Ok(Vec::new())
        }
        None => {
            log::warn!("no correction ledger given; continuing with an empty ledger");
            Ok(Vec::new())
        }
    }
}

fn ingest(args: &ManifestArgs) -> CliResult<Manifest> {
    let mut records = Vec::new();
    for (path, dataset) in [(&args.casme2, Dataset::Casme2), (&args.samm, Dataset::Samm)] {
        if let Some(p) = path {
            records.extend(ingest_dataset_index(p, dataset)?);
        }
    }
    if records.is_empty() {
        return Err(CliError::config("nothing to ingest: pass --casme2 and/or --samm, or --synth"));
    }
    let spec = args
        .predictor
        .as_deref()
        .ok_or_else(|| CliError::config("--predictor is required when ingesting indices"))?;
    let predictor = predictor(spec)?;
    let policy = if args.skip_failed { AnnotationPolicy::Skip } else { AnnotationPolicy::Abort };
    let (records, failures) = annotate_records(records, predictor.as_ref(), policy)?;
    for f in &failures {
        log::warn!("dropped {}: {}", f.sample, f.message);
    }
    let rules = ledger(args.ledger.as_ref())?;
    let outcome = apply_heuristic_corrections(records, &rules);
    for w in &outcome.warnings {
        log::warn!("{w}");
    }
    let audit: String = outcome
        .audit
        .iter()
        .map(|a| serde_json::to_string(a).expect("audit serializes") + "\n")
        .collect();
    write(&args.out.join("corrections.jsonl"), &audit)?;
    let mut records = outcome.records;
    for r in &mut records {
        r.resolve_mappings()?;
    }
    let provenance = Provenance::new(predictor.identity(), ledger_hash(&rules), args.seed);
    Ok(build_manifest(records, provenance, &args.out)?)
}

pub fn run(args: ManifestArgs) -> CliResult {
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::data(format!("{}: {e}", args.out.display())))?;
    let path = args.out.join("manifest.jsonl");
    if args.synth {
        let spec = SynthSpec {
            subjects_per_group: args.synth_subjects,
            clips_per_subject: args.synth_clips,
            image_size: args.synth_size,
            shift_strength: args.synth_shift,
        };
        synthesize_desk_corpus(&spec, args.seed, &args.out)?;
    } else {
        ingest(&args)?.save(&path)?;
    }
    // hash what later commands will read back
    let manifest = load_manifest(&path)?;
    let summary = summarize_distribution(&manifest)?;
    for s in &summary.inconsistent_subjects {
        log::warn!("subject {s} has records with different ethnicity labels");
    }
    let text = summary.to_markdown();
    write(&args.out.join("distribution.md"), &text)?;
    print!("{text}");
    let mut run = RunConfig::new("manifest", None, &args.out, args.seed, manifest.provenance.flow_params);
    run.extra = serde_json::to_value(&args).expect("args serialize");
    run.save_provenance(&manifest, "manifest")?;
    Ok(())
}
