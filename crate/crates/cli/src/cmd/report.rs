//! `report`: one markdown document over the artifacts of a run directory,
//! refusing artifacts whose provenance sidecar is missing or altered.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use mecross::protocol::RunProvenance;

use crate::common::write;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Run directory holding the artifacts of earlier commands.
    #[arg(long)]
    pub run: PathBuf,
    /// Output path [default: <run>/report.md].
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// An artifact found in the run directory with its verified sidecar.
struct Artifact {
    file: String,
    hash: String,
    provenance: RunProvenance,
}

/// `(artifact, sidecar stem)` pairs present under `dir`, in pipeline order.
fn discover(dir: &Path) -> CliResult<Vec<(String, String)>> {
    let mut found = Vec::new();
    for (file, stem) in [
        ("manifest.jsonl", "manifest"),
        ("flow_stats.csv", "flow"),
        ("benchmark.json", "benchmark"),
    ] {
        if dir.join(file).is_file() {
            found.push((file.to_string(), stem.to_string()));
        }
    }
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    let mut loso: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.starts_with("loso-") && n.ends_with(".json") && !n.ends_with(".provenance.json"))
        .collect();
    loso.sort();
    for name in loso {
        let stem = name.trim_end_matches(".json").to_string();
        found.push((name, stem));
    }
    for (file, stem) in [("prima_facie.json", "prima_facie"), ("gradcam/index.jsonl", "gradcam")] {
        if dir.join(file).is_file() {
            found.push((file.to_string(), stem.to_string()));
        }
    }
    Ok(found)
}

fn verify(dir: &Path, file: &str, stem: &str) -> CliResult<Artifact> {
    let sidecar = dir.join(format!("{stem}.provenance.json"));
    if !sidecar.is_file() {
        return Err(CliError::data(format!("{file} has no provenance sidecar ({})", sidecar.display())));
    }
    let (hash, provenance) = RunProvenance::load(&sidecar)
        .map_err(|e| CliError::data(format!("{}: {e}", sidecar.display())))?;
    if provenance.hash() != hash {
        return Err(CliError::data(format!("{}: recorded hash does not match its contents", sidecar.display())));
    }
    Ok(Artifact {
        file: file.to_string(),
        hash,
        provenance,
    })
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn flow_summary(text: &str) -> String {
    let mut n = 0usize;
    let mut cached = 0usize;
    let mut clip = [0.0f64; 3];
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let fields: Vec<&str> = line.rsplitn(5, ',').collect();
        if fields.len() < 5 {
            continue;
        }
        n += 1;
        cached += usize::from(fields[3] == "true");
        for (c, f) in clip.iter_mut().zip([fields[2], fields[1], fields[0]]) {
            *c += f.parse::<f64>().unwrap_or(0.0);
        }
    }
    let d = n.max(1) as f64;
    format!(
        "{n} flow images ({cached} served from cache). Mean clipped fraction: fx {:.4}, fy {:.4}, strain {:.4}.\n",
        clip[0] / d,
        clip[1] / d,
        clip[2] / d
    )
}

fn gradcam_summary(text: &str) -> CliResult<String> {
    let mut counts: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let v: serde_json::Value =
            serde_json::from_str(line).map_err(|e| CliError::data(format!("gradcam index: {e}")))?;
        let field = |k: &str| v.get(k).and_then(|x| x.as_str()).unwrap_or("?").to_string();
        let entry = counts.entry((field("ethnicity"), field("class"))).or_default();
        entry.0 += 1;
        entry.1 += usize::from(field("class") == field("predicted"));
    }
    let mut s = String::from("| Ethnicity | Class | Maps | Correctly predicted |\n|---|---|---|---|\n");
    for ((eth, class), (n, ok)) in counts {
        let _ = writeln!(s, "| {eth} | {class} | {n} | {ok} |");
    }
    Ok(s)
}

/// Markdown written next to an artifact by the command that produced it.
fn companion(dir: &Path, stem: &str) -> Option<String> {
    let name = match stem {
        "manifest" => "distribution.md".to_string(),
        s => format!("{s}.md"),
    };
    std::fs::read_to_string(dir.join(name)).ok()
}

pub fn run(args: ReportArgs) -> CliResult {
    let dir = &args.run;
    let found = discover(dir)?;
    if found.is_empty() {
        return Err(CliError::data(format!("no artifacts under {}", dir.display())));
    }
    let artifacts: Vec<Artifact> = found
        .iter()
        .map(|(file, stem)| verify(dir, file, stem))
        .collect::<CliResult<_>>()?;
    let manifests: std::collections::BTreeSet<&str> =
        artifacts.iter().map(|a| a.provenance.manifest_hash.as_str()).collect();
    if manifests.len() > 1 {
        log::warn!("artifacts were produced from {} different manifests", manifests.len());
    }

    let mut s = String::from("# Run report\n\n## Provenance\n\n");
    s.push_str("| Artifact | Command | Seed | Manifest | Sidecar hash |\n|---|---|---|---|---|\n");
    for a in &artifacts {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            a.file,
            a.provenance.command,
            a.provenance.seed,
            &a.provenance.manifest_hash[..12.min(a.provenance.manifest_hash.len())],
            &a.hash[..16]
        );
    }
    s.push_str("\n## Deviations\n\n");
    for d in &artifacts[0].provenance.deviations {
        let _ = writeln!(s, "- {d}");
    }
    for ((file, stem), _) in found.iter().zip(&artifacts) {
        let (title, body) = match stem.as_str() {
            "manifest" => ("Corpus distribution".to_string(), companion(dir, stem)),
            "flow" => ("Flow images".to_string(), Some(flow_summary(&read(&dir.join(file))?))),
            "benchmark" => ("Variant benchmark".to_string(), companion(dir, stem)),
            "prima_facie" => ("Sampling study".to_string(), companion(dir, stem)),
            "gradcam" => ("Grad-CAM maps".to_string(), Some(gradcam_summary(&read(&dir.join(file))?)?)),
            loso => (format!("LOSO metrics: {}", loso.trim_start_matches("loso-")), companion(dir, stem)),
        };
        let _ = write!(s, "\n## {title}\n\n");
        match body {
            Some(b) => s.push_str(&b),
            None => {
                let _ = writeln!(s, "See `{file}`.");
            }
        }
    }
    let out = args.out.clone().unwrap_or_else(|| dir.join("report.md"));
    write(&out, &s)?;
    println!("{} artifacts verified; report at {}", artifacts.len(), out.display());
    Ok(())
}
