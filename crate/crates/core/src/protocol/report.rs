//! Markdown and CSV renderings of reports, and the provenance sidecar.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::flowcore::FlowParams;
use crate::seed::sha256_hex;

use super::benchmark::BenchmarkReport;
use super::metrics::MetricsReport;
use super::prima::PrimaFacieReport;
use super::ProtocolError;

/// Departures from the reference setup that every report carries.
pub const DEVIATIONS: &[&str] = &[
    "Backbones are small from-scratch encoders (4-stage CNN, 2-block patch transformer), not pretrained ResNet-18/TinyViT.",
    "The frozen encoder for the sampling study defaults to seeded random features; no pretrained weights ship with the tool.",
    "Learning-rate decay factor 0.9 per epoch, batch size 32, fan-in scaled initialization (truncated normal 0.02 for transformer embeddings).",
    "Macro-F1 is computed once on the confusion matrix pooled over all LOSO folds.",
    "The ethnicity head is trained on the video-level label inherited from the subject.",
    "Random forest: 100 trees, depth 8, min leaf 2, sqrt(d) features per split, midpoint thresholds.",
];

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub command: String,
    pub seed: u64,
    pub manifest_hash: String,
    pub ledger_hash: String,
    pub flow_params: FlowParams,
    pub tool_version: String,
    /// Command-specific configuration (model, training, forest, scenarios...).
    pub config: serde_json::Value,
    pub deviations: Vec<String>,
}

impl RunProvenance {
    pub fn new(
        command: impl Into<String>,
        seed: u64,
        manifest_hash: impl Into<String>,
        ledger_hash: impl Into<String>,
        flow_params: FlowParams,
        config: serde_json::Value,
    ) -> Self {
        Self {
            command: command.into(),
            seed,
            manifest_hash: manifest_hash.into(),
            ledger_hash: ledger_hash.into(),
            flow_params,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            deviations: DEVIATIONS.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("provenance serializes").as_bytes())
    }

    /// Writes `{ "hash": ..., "provenance": ... }`.
    pub fn save(&self, path: &Path) -> Result<String, ProtocolError> {
        let hash = self.hash();
        let doc = serde_json::json!({ "hash": hash, "provenance": self });
        write_text(path, &serde_json::to_string_pretty(&doc).expect("json"))?;
        Ok(hash)
    }

    pub fn load(path: &Path) -> Result<(String, RunProvenance), ProtocolError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProtocolError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        #[derive(Deserialize)]
        struct Doc {
            hash: String,
            provenance: RunProvenance,
        }
        let doc: Doc = serde_json::from_str(&text)
            .map_err(|e| ProtocolError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Ok((doc.hash, doc.provenance))
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ProtocolError> {
    crate::io_util::write_atomic(path, text.as_bytes()).map_err(|source| ProtocolError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

pub fn prima_facie_markdown(report: &PrimaFacieReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| Scenario | Negative | NonNegative | Average | Std (avg) |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            r.scenario.label(),
            f4(r.negative),
            f4(r.non_negative),
            f4(r.average),
            f4(r.average_std)
        );
    }
    let seeds: Vec<String> = report.seeds.iter().map(u64::to_string).collect();
    let _ = writeln!(
        s,
        "\nMean over seeds {}; encoder `{}`; F1 from pooled LOSO confusion.",
        seeds.join(", "),
        report.encoder
    );
    s
}

pub fn prima_facie_csv(report: &PrimaFacieReport) -> String {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .flat_map(|r| {
            let mean = vec![
                r.scenario.as_str().to_string(),
                "mean".to_string(),
                f4(r.negative),
                f4(r.non_negative),
                f4(r.average),
            ];
            std::iter::once(mean).chain(r.per_seed.iter().map(move |p| {
                vec![
                    r.scenario.as_str().to_string(),
                    p.seed.to_string(),
                    f4(p.negative),
                    f4(p.non_negative),
                    f4(p.average),
                ]
            }))
        })
        .collect();
    csv_text(&["scenario", "seed", "negative", "non_negative", "average"], &rows)
}

pub fn benchmark_markdown(report: &BenchmarkReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| Variant | Ethnic context | Negative | Positive | Surprise | MF1 |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            r.variant,
            if r.ethnic_context { "yes" } else { "no" },
            f4(r.f1[0]),
            f4(r.f1[1]),
            f4(r.f1[2]),
            f4(r.average)
        );
    }
    s
}

pub fn benchmark_csv(report: &BenchmarkReport) -> String {
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.variant.to_string(),
                r.ethnic_context.to_string(),
                f4(r.f1[0]),
                f4(r.f1[1]),
                f4(r.f1[2]),
                f4(r.average),
            ]
        })
        .collect();
    csv_text(&["variant", "ethnic_context", "negative", "positive", "surprise", "mf1"], &rows)
}

/// Pooled confusion and per-class F1 of one LOSO run.
pub fn metrics_markdown(report: &MetricsReport) -> String {
    let mut s = String::new();
    let classes = &report.pooled.classes;
    let _ = writeln!(s, "| actual \\ predicted | {} |", classes.join(" | "));
    let _ = writeln!(s, "|---|{}", "---|".repeat(classes.len()));
    for (c, row) in classes.iter().zip(&report.pooled.counts) {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "| {c} | {} |", cells.join(" | "));
    }
    let _ = writeln!(s);
    for (c, f) in classes.iter().zip(&report.f1.per_class) {
        let _ = writeln!(s, "- F1 {c}: {}", f4(*f));
    }
    let _ = writeln!(s, "- Macro-F1: {}", f4(report.f1.macro_f1));
    let _ = writeln!(s, "- Folds: {}; {}", report.folds.len(), report.aggregation);
    s
}

pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut rows: Vec<Vec<String>> = report
        .pooled
        .classes
        .iter()
        .zip(&report.f1.per_class)
        .map(|(c, f)| vec![c.clone(), f4(*f)])
        .collect();
    rows.push(vec!["macro".into(), f4(report.f1.macro_f1)]);
    csv_text(&["class", "f1"], &rows)
}

