//! `gradcam`: class activation maps for held-out samples, grouped by mapped
//! ethnicity and emotion class.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use mecross::corpus::{Emotion, Ethnicity};
use mecross::flowcore::{write_pgm, GrayFrame};
use mecross::model::{forward, gradcam, load_model, Branch, ModelConfig, ParamSet};
use mecross::protocol::PreparedSample;
use mecross::seed::sha256_hex;
use serde::Serialize;

use crate::common::{load_manifest, safe_name, samples, write, FlowArgs, RunConfig};
use crate::error::{CliError, CliResult, Context};

#[derive(Debug, Clone, Args, Serialize)]
pub struct GradcamArgs {
    /// Manifest written by `mecross manifest`.
    #[arg(long, short)]
    pub manifest: PathBuf,
    /// A model checkpoint, or a LOSO fold directory: each subject then uses
    /// the fold that held it out.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Emotion classes to map, comma separated.
    #[arg(long = "class", value_delimiter = ',', default_value = "positive,surprise")]
    pub classes: Vec<Emotion>,
    /// Encoder whose grid is attributed: emotion or ethnic.
    #[arg(long, default_value = "emotion", value_parser = parse_branch)]
    pub branch: Branch,
    /// Restrict to these subjects.
    #[arg(long = "subject", value_delimiter = ',')]
    pub subjects: Vec<String>,
    #[command(flatten)]
    pub flow: FlowArgs,
}

fn parse_branch(s: &str) -> Result<Branch, String> {
    match s {
        "emotion" => Ok(Branch::Emotion),
        "ethnic" => Ok(Branch::Ethnic),
        _ => Err(format!("unknown branch {s:?}; use emotion or ethnic")),
    }
}

type Model = (ModelConfig, ParamSet<f64>);
/// A model with the SHA-256 of its checkpoint file.
type Loaded = (Model, String);
/// `(width, height, overlay)` per map.
type Overlays = Vec<(usize, usize, Vec<f64>)>;

/// One line of `gradcam/index.jsonl`.
#[derive(Debug, Serialize)]
struct IndexLine {
    sample: String,
    subject: String,
    ethnicity: Ethnicity,
    class: Emotion,
    predicted: Emotion,
    branch: Branch,
    file: String,
    argmax: (usize, usize),
    checkpoint: String,
}

/// Model per subject. A directory maps each fold checkpoint's held-out
/// subject to it; a file serves every subject.
fn models(path: &Path) -> CliResult<(BTreeMap<String, Loaded>, Option<Loaded>)> {
    let load = |p: &Path| -> CliResult<(Model, String, serde_json::Value)> {
        let bytes = std::fs::read(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
        let (cfg, params, extra) = load_model::<f64>(p).with_context(|| format!("loading {}", p.display()))?;
        Ok(((cfg, params), sha256_hex(&bytes), extra))
    };
    if !path.is_dir() {
        let (m, hash, _) = load(path)?;
        return Ok((BTreeMap::new(), Some((m, hash))));
    }
    let mut by_subject = BTreeMap::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ckpt"))
        .collect();
    entries.sort();
    for p in entries {
        let (m, hash, extra) = load(&p)?;
        let subject = extra
            .get("held_out")
            .and_then(|v| v.as_str())
            .ok_or_else(|| CliError::data(format!("{} does not name a held-out subject", p.display())))?;
        by_subject.insert(subject.to_string(), (m, hash));
    }
    if by_subject.is_empty() {
        return Err(CliError::data(format!("no fold checkpoints in {}", path.display())));
    }
    Ok((by_subject, None))
}

fn mean_map(maps: &[&[f64]]) -> Vec<f64> {
    let mut acc = vec![0.0; maps[0].len()];
    for m in maps {
        for (a, v) in acc.iter_mut().zip(m.iter()) {
            *a += v;
        }
    }
    let peak = acc.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        acc.iter_mut().for_each(|v| *v /= peak);
    }
    acc
}

pub fn run(args: GradcamArgs) -> CliResult {
    if args.classes.is_empty() {
        return Err(CliError::config("need at least one class"));
    }
    let manifest = load_manifest(&args.manifest)?;
    let params = args.flow.params(&manifest)?;
    let (by_subject, single) = models(&args.checkpoint)?;
    let needs_rgb = single
        .iter()
        .chain(by_subject.values())
        .any(|((cfg, _), _)| cfg.variant.needs_rgb());
    let all = samples(&manifest, &params, &args.flow.cache_dir(&args.out), needs_rgb)?;
    let selected: Vec<&PreparedSample> = all
        .iter()
        .filter(|s| args.classes.contains(&s.emotion))
        .filter(|s| args.subjects.is_empty() || args.subjects.contains(&s.subject_id))
        .collect();
    let root = args.out.join("gradcam");
    let mut lines = Vec::new();
    let mut groups: BTreeMap<(Ethnicity, Emotion), Overlays> = BTreeMap::new();
    for s in selected {
        let Some(((cfg, model), ckpt)) = single.as_ref().or_else(|| by_subject.get(&s.subject_id)) else {
            log::warn!("no fold checkpoint holds out {}; skipping {}", s.subject_id, s.key);
            continue;
        };
        let input = s.model_input();
        let map = gradcam(model, cfg, &input, s.emotion.index(), args.branch)
            .with_context(|| format!("Grad-CAM for {}", s.key))?;
        let predicted = forward(model, cfg, &input)?.predicted_emotion();
        let rel = format!(
            "{}/{}/{}_{}.pgm",
            safe_name(&s.ethnicity.to_string().to_lowercase()),
            safe_name(&s.emotion.to_string().to_lowercase()),
            safe_name(&s.key),
            args.branch.as_str()
        );
        let record = map.export(&root.join(&rel))?;
        lines.push(IndexLine {
            sample: s.key.clone(),
            subject: s.subject_id.clone(),
            ethnicity: s.ethnicity,
            class: s.emotion,
            predicted: Emotion::from_index(predicted).expect("class index"),
            branch: args.branch,
            file: rel,
            argmax: record.argmax,
            checkpoint: ckpt[..16].to_string(),
        });
        groups
            .entry((s.ethnicity, s.emotion))
            .or_default()
            .push((map.width, map.height, map.overlay));
    }
    if lines.is_empty() {
        return Err(CliError::data("no samples matched the class and subject filters"));
    }
    for ((eth, class), maps) in &groups {
        let (w, h) = (maps[0].0, maps[0].1);
        if maps.iter().any(|m| (m.0, m.1) != (w, h)) {
            log::warn!("{eth}/{class}: maps differ in size; no mean panel");
            continue;
        }
        let views: Vec<&[f64]> = maps.iter().map(|m| m.2.as_slice()).collect();
        let frame = GrayFrame::new(w, h, mean_map(&views)).map_err(CliError::from)?;
        let path = root
            .join(eth.to_string().to_lowercase())
            .join(class.to_string().to_lowercase())
            .join(format!("mean_{}.pgm", args.branch.as_str()));
        write_pgm(&frame, &path)?;
        println!("{eth} {class}: {} maps, mean panel {}", maps.len(), path.display());
    }
    let index: String = lines
        .iter()
        .map(|l| serde_json::to_string(l).expect("index serializes") + "\n")
        .collect();
    write(&root.join("index.jsonl"), &index)?;
    let checkpoints: BTreeMap<&str, &str> = match &single {
        Some((_, h)) => BTreeMap::from([("*", h.as_str())]),
        None => by_subject.iter().map(|(s, (_, h))| (s.as_str(), h.as_str())).collect(),
    };
    let mut run = RunConfig::new("gradcam", Some(&args.manifest), &args.out, manifest.provenance.seed, params);
    run.extra = serde_json::json!({ "args": args, "checkpoints": checkpoints });
    run.save_provenance(&manifest, "gradcam")?;
    Ok(())
}
