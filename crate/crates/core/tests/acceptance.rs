//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line per criterion, and exits non-zero if any failed.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::corpus::{joint_manifest, joint_raw_emotions, synth_samples, JOINT_ETHNICITY};
use common::warp::{smooth_texture, translate};
use common::{finite_difference_check, perturbed, toy_config, toy_sample};
use mecross::corpus::{
    mapped_emotion_counts, mapped_ethnicity_counts, summarize_distribution, Emotion, Ethnicity, Manifest,
    MappedEmotion, SynthSpec,
};
use mecross::flowcore::{compute_strain, estimate_flow, FlowField, FlowParams, GrayFrame};
use mecross::model::{
    backward, cce, forward, gradcam, load_model, softmax, total_loss, Branch, EncoderConfig, FrozenEncoder, Labels,
    ParamSet, Variant,
};
use mecross::protocol::{
    binarize_emotions, macro_f1, plan_loso, run_loso, run_prima_facie, sample_prima_facie, BenchmarkConfig,
    BinaryEmotion, ConfusionMatrix, ForestConfig, LosoRun, PrimaFacieScenario, PreparedSample, ScenarioKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn flow_solver() -> Outcome {
    let shifts = [(1.0, 0.0), (-1.5, 1.2), (0.7, -1.9), (2.0, 0.0), (-0.4, -2.0)];
    let (w, h) = (128, 128);
    let params = FlowParams::default();
    let mut worst_epe: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for (seed, &(dx, dy)) in shifts.iter().enumerate() {
        let base = smooth_texture(w, h, 2.0, 500 + seed as u64);
        let onset = GrayFrame::new(w, h, base.clone()).unwrap();
        let apex = GrayFrame::new(w, h, translate(&base, w, h, dx, dy)).unwrap();
        let start = Instant::now();
        let flow = estimate_flow(&onset, &apex, &params).unwrap();
        slowest = slowest.max(start.elapsed());
        let (mut epe, mut n) = (0.0, 0.0);
        for y in 5..h - 5 {
            for x in 5..w - 5 {
                let (u, v) = flow.at(x, y);
                epe += ((u - dx).powi(2) + (v - dy).powi(2)).sqrt();
                n += 1.0;
            }
        }
        let epe = epe / n;
        ensure(epe < 0.2, || format!("texture {seed}, shift ({dx}, {dy}): mean EPE {epe:.4} px"))?;
        worst_epe = worst_epe.max(epe);
    }
    ensure(slowest < Duration::from_secs(5), || format!("128x128 pair took {slowest:?}"))?;
    let still = GrayFrame::new(w, h, smooth_texture(w, h, 2.0, 9)).unwrap();
    let zero = estimate_flow(&still, &still, &params).unwrap();
    let peak = zero.u().iter().chain(zero.v()).fold(0.0f64, |m, v| m.max(v.abs()));
    ensure(peak == 0.0, || format!("identical frames gave |flow| up to {peak:e}"))?;
    Ok(format!("worst mean EPE {worst_epe:.4} px over 5 textures, slowest pair {slowest:.2?}, identical frames give 0"))
}

fn strain_analytic() -> Outcome {
    let (w, h) = (24, 20);
    // (u, v) = (p x + q y + c, r x + s y + d): exx = p, eyy = s, exy = (q + r) / 2
    let cases: [(&str, [f64; 6]); 4] = [
        ("constant", [0.0, 0.0, 0.0, 0.0, 1.5, -0.7]),
        ("linear shear", [0.0, 0.3, 0.0, 0.0, 0.0, 0.0]),
        ("cross shear", [0.0, 0.25, -0.6, 0.0, 0.1, 0.2]),
        ("general linear", [0.2, -0.1, 0.45, -0.35, 0.0, 1.0]),
    ];
    let mut worst: f64 = 0.0;
    for (name, [p, q, r, s, c, d]) in cases {
        let flow = FlowField::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            (p * x + q * y + c, r * x + s * y + d)
        })
        .unwrap();
        let strain = compute_strain(&flow);
        let exy = 0.5 * (q + r);
        let mag = (p * p + s * s + 2.0 * exy * exy).sqrt();
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let i = y * w + x;
                for (got, want) in [
                    (strain.exx[i], p),
                    (strain.eyy[i], s),
                    (strain.exy[i], exy),
                    (strain.magnitude[i], mag),
                ] {
                    let err = (got - want).abs();
                    ensure(err <= 1e-9, || format!("{name} at ({x}, {y}): {got} vs {want}"))?;
                    worst = worst.max(err);
                }
            }
        }
    }
    Ok(format!("constant, shear, cross-shear and general linear fields match, worst error {worst:.1e}"))
}

fn gradient_suite() -> Outcome {
    let mut summary = Vec::new();
    for variant in Variant::ALL {
        let cfg = toy_config(variant);
        let params = perturbed(&ParamSet::<f64>::init(&cfg, 17).unwrap(), 99);
        let batch = vec![toy_sample(1, 0, 1), toy_sample(2, 2, 0)];
        let (grads, _) = backward(&params, &cfg, &batch).unwrap();
        let check = finite_difference_check(&params, &cfg, &batch, &grads);
        ensure(check.checked == params.num_scalars(), || format!("{variant}: not every parameter was checked"))?;
        ensure(check.kinks == 0, || format!("{variant}: {} entries sit on a ReLU kink", check.kinks))?;
        ensure(check.worst_rel <= 1e-4, || {
            format!("{variant}: relative error {:.2e} at {}", check.worst_rel, check.worst_param)
        })?;
        summary.push(format!("{variant} {} params {:.1e}", check.checked, check.worst_rel));
    }
    Ok(summary.join(", "))
}

fn loss_identities() -> Outcome {
    let cfg = toy_config(Variant::DualMotion);
    let params = ParamSet::<f64>::init(&cfg, 4).unwrap();
    let sample = toy_sample(8, 1, 1);
    let logits = forward(&params, &cfg, &sample.input).unwrap();
    let loss = total_loss(&logits, sample.labels).unwrap();
    let sum = loss.l_emo + loss.l_ethnic + loss.l_fusion;
    ensure(loss.total == sum, || format!("total {} vs sum {sum}", loss.total))?;
    ensure(loss.l_ethnic > 0.0 && loss.l_fusion > 0.0, || "dual-motion terms are missing".into())?;
    for k in [2usize, 3] {
        let uniform = vec![0.37; k];
        for target in 0..k {
            let l = cce(&uniform, target).unwrap();
            let want = (k as f64).ln();
            ensure((l - want).abs() <= 1e-9, || format!("uniform CCE over {k} classes: {l} vs ln {k}"))?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let z: Vec<f64> = (0..3).map(|_| rng.random_range(-8.0..8.0)).collect();
        let c = rng.random_range(-50.0..50.0);
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        for (a, b) in softmax(&z).iter().zip(softmax(&shifted)) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("softmax shift changed probabilities by {worst:e}"))?;
    let labels = Labels {
        emotion: 0,
        ethnicity: None,
    };
    ensure(total_loss(&logits, labels).is_err(), || "missing ethnic label was accepted".into())?;
    Ok(format!("total = sum of terms, uniform CCE = ln k, softmax shift drift {worst:.1e}"))
}

fn metric_oracle() -> Outcome {
    let confusion = ConfusionMatrix {
        classes: vec!["Negative".into(), "NonNegative".into()],
        counts: vec![vec![3, 1], vec![2, 2]],
    };
    let f = macro_f1(&confusion).unwrap();
    let want = [2.0 / 3.0, 4.0 / 7.0];
    for (got, want) in f.per_class.iter().zip(want) {
        ensure((got - want).abs() <= 1e-9, || format!("per-class F1 {got} vs {want}"))?;
    }
    ensure((f.macro_f1 - 0.619048).abs() <= 1e-6, || format!("macro-F1 {}", f.macro_f1))?;
    // printed to four decimals, so agreement within half a unit in the last place
    let within_rounding = |a: f64, b: f64| (a - b).abs() <= 0.5e-4 + 1e-12;
    let prima_row = (0.4330 + 0.4762) / 2.0;
    ensure(within_rounding(prima_row, 0.4546), || format!("prima facie row average {prima_row}"))?;
    let bench_row = (0.8142 + 0.5225 + 0.5263) / 3.0;
    ensure(within_rounding(bench_row, 0.6210), || format!("benchmark row average {bench_row}"))?;
    Ok(format!(
        "binary example ({:.6}, {:.6}) mean {:.6}; row checks {prima_row:.5}, {bench_row:.5}",
        f.per_class[0], f.per_class[1], f.macro_f1
    ))
}

fn protocol_invariants() -> Outcome {
    let manifest = joint_manifest(21);
    let eligible = manifest.eligible();
    let keys: Vec<(String, String)> = eligible.iter().map(|r| (r.key_string(), r.subject_id.clone())).collect();
    let plan = plan_loso(keys.iter().map(|(k, s)| (k.as_str(), s.as_str()))).unwrap();
    ensure(plan.len() == 54, || format!("{} folds", plan.len()))?;
    let subject_of: BTreeMap<&str, &str> = keys.iter().map(|(k, s)| (k.as_str(), s.as_str())).collect();
    let mut seen = 0;
    for fold in &plan {
        ensure(fold.test.iter().all(|k| subject_of[k.as_str()] == fold.held_out), || {
            format!("fold {} tests a foreign subject", fold.held_out)
        })?;
        ensure(fold.train.iter().all(|k| subject_of[k.as_str()] != fold.held_out), || {
            format!("fold {} trains on its held-out subject", fold.held_out)
        })?;
        ensure(fold.train.len() + fold.test.len() == keys.len(), || "fold does not partition".into())?;
        seen += fold.test.len();
    }
    ensure(seen == keys.len(), || "test sides do not cover the corpus exactly once".into())?;
    for seed in 0..5 {
        let sub = sample_prima_facie(&manifest, &PrimaFacieScenario::new(ScenarioKind::Mixed, seed)).unwrap();
        let subjects = sub.subjects();
        let asian = subjects.iter().filter(|s| sub.subject_ethnicity(s) == Some(Ethnicity::Asian)).count();
        ensure((asian, subjects.len() - asian) == (8, 8), || {
            format!("seed {seed}: mixed draw {asian}+{}", subjects.len() - asian)
        })?;
    }
    let binary = binarize_emotions(&manifest);
    let neg = binary.iter().filter(|(_, b)| *b == BinaryEmotion::Negative).count();
    let by_class = |e| eligible.iter().filter(|r| r.emotion() == Some(e)).count();
    ensure(binary.len() == eligible.len(), || "binarization dropped samples".into())?;
    ensure(neg == by_class(Emotion::Negative), || "negative count changed".into())?;
    ensure(binary.len() - neg == by_class(Emotion::Positive) + by_class(Emotion::Surprise), || {
        "non-negative count changed".into()
    })?;
    Ok(format!("54 leak-free folds over {} clips, mixed draws 8+8, binarization {neg}+{}", keys.len(), binary.len() - neg))
}

fn label_aggregates() -> Outcome {
    let subjects = mapped_ethnicity_counts(&JOINT_ETHNICITY.iter().map(|&(r, s, _)| (r, s)).collect());
    let videos = mapped_ethnicity_counts(&JOINT_ETHNICITY.iter().map(|&(r, _, v)| (r, v)).collect());
    let emotions =
        mapped_emotion_counts(&joint_raw_emotions().into_iter().map(|(e, n)| (e.to_string(), n)).collect()).unwrap();
    let pair = |m: &BTreeMap<Ethnicity, usize>| (m[&Ethnicity::Asian], m[&Ethnicity::NonAsian]);
    ensure(pair(&subjects) == (37, 17), || format!("subjects {:?}", pair(&subjects)))?;
    ensure(pair(&videos) == (199, 92), || format!("videos {:?}", pair(&videos)))?;
    let triple = (
        emotions[&MappedEmotion::Positive],
        emotions[&MappedEmotion::Negative],
        emotions[&MappedEmotion::Surprise],
    );
    ensure(triple == (58, 192, 40), || format!("emotions {triple:?}"))?;
    let dist = summarize_distribution(&joint_manifest(0)).unwrap();
    ensure(pair(&dist.subjects_by_ethnicity) == (37, 17), || "manifest subject summary differs".into())?;
    ensure(pair(&dist.videos_by_ethnicity) == (199, 92), || "manifest video summary differs".into())?;
    ensure(dist.eligible_videos == 290 && dist.total_subjects == 54, || "manifest totals differ".into())?;
    Ok("subjects 37/17, videos 199/92, emotions 58/192/40 (290 eligible)".into())
}

const DESK_SEED: u64 = 2024;

fn desk_spec() -> SynthSpec {
    SynthSpec {
        subjects_per_group: 4,
        clips_per_subject: 40,
        image_size: 64,
        shift_strength: 0.0,
    }
}

struct DeskRun {
    _dir: tempfile::TempDir,
    manifest: Manifest,
    samples: Vec<PreparedSample>,
    checkpoints: PathBuf,
    run: LosoRun,
    elapsed: Duration,
}

/// First training run on the separable corpus, shared by the learning and
/// attribution criteria.
fn desk_run() -> &'static DeskRun {
    static RUN: OnceLock<DeskRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let (manifest, samples) = synth_samples(&desk_spec(), DESK_SEED, &dir.path().join("corpus"), false);
        let checkpoints = dir.path().join("folds");
        std::fs::create_dir_all(&checkpoints).unwrap();
        let run = run_loso(&samples, Variant::DualMotion, &BenchmarkConfig::new(DESK_SEED), Some(&checkpoints)).unwrap();
        DeskRun {
            _dir: dir,
            manifest,
            samples,
            checkpoints,
            run,
            elapsed: start.elapsed(),
        }
    })
}

fn end_to_end_learning() -> Outcome {
    let first = desk_run();
    let cfg = BenchmarkConfig::new(DESK_SEED);
    ensure(cfg.train.epochs == 15, || format!("{} epochs configured", cfg.train.epochs))?;
    let mf1 = first.run.report.f1.macro_f1;
    ensure(first.run.folds.iter().all(|f| f.history.len() == 15), || "a fold did not train 15 epochs".into())?;
    ensure(mf1 >= 0.95, || format!("held-out macro-F1 {mf1:.4}"))?;
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (_, samples) = synth_samples(&desk_spec(), DESK_SEED, dir.path(), false);
    let rerun = run_loso(&samples, Variant::DualMotion, &cfg, None).unwrap();
    let rerun_time = start.elapsed();
    let a = serde_json::to_string(&first.run).unwrap();
    let b = serde_json::to_string(&rerun).unwrap();
    ensure(a == b, || "identical seeds gave different reports".into())?;
    let total = first.elapsed + rerun_time;
    ensure(total < Duration::from_secs(600), || format!("two runs took {total:.0?}"))?;
    Ok(format!(
        "dual_motion LOSO macro-F1 {mf1:.4} over {} folds; run {:.0?}, rerun {rerun_time:.0?}, bit-identical",
        first.run.folds.len(),
        first.elapsed
    ))
}

fn ethnic_shift() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        subjects_per_group: 16,
        clips_per_subject: 5,
        image_size: 32,
        shift_strength: 0.5,
    };
    let (_, samples) = synth_samples(&spec, 77, dir.path(), false);
    let encoder = FrozenEncoder::random(EncoderConfig::default(), 5).unwrap();
    let seeds: Vec<u64> = (0..5).collect();
    let report =
        run_prima_facie(&samples, &ScenarioKind::ALL, &seeds, &encoder, &ForestConfig::default()).unwrap();
    let row = |k: ScenarioKind| report.rows.iter().find(|r| r.scenario == k).unwrap();
    let (asian, non_asian, mixed) =
        (row(ScenarioKind::AsianOnly), row(ScenarioKind::NonAsianOnly), row(ScenarioKind::Mixed));
    let holds = (0..seeds.len())
        .filter(|&i| {
            let m = mixed.per_seed[i].non_negative;
            m <= asian.per_seed[i].non_negative && m <= non_asian.per_seed[i].non_negative
        })
        .count();
    let detail = format!(
        "non-negative F1 asian {:.3}, non-asian {:.3}, mixed {:.3}; mixed lowest in {holds}/5 seeds",
        asian.non_negative, non_asian.non_negative, mixed.non_negative
    );
    ensure(holds >= 4, || detail.clone())?;
    Ok(detail)
}

fn gradcam_locality() -> Outcome {
    let desk = desk_run();
    let truth: BTreeMap<String, (f64, f64)> = desk
        .manifest
        .records
        .iter()
        .map(|r| (r.key_string(), r.synth.as_ref().unwrap().center))
        .collect();
    let half = desk_spec().image_size as f64 / 2.0;
    let (mut hits, mut total) = (0, 0);
    for fold in &desk.run.folds {
        let stem = format!("fold-{:03}-{}", fold.fold_index, fold.held_out);
        let (cfg, params, _) = load_model::<f64>(&desk.checkpoints.join(stem).with_extension("ckpt")).unwrap();
        for s in desk.samples.iter().filter(|s| s.subject_id == fold.held_out) {
            if s.emotion == Emotion::Negative {
                // centered bump, not quadrant-localized
                continue;
            }
            let map = gradcam(&params, &cfg, &s.model_input(), s.emotion.index(), Branch::Emotion).unwrap();
            let (lo, hi) = map.overlay.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
            ensure((0.0..=1.0).contains(&lo) && hi <= 1.0, || format!("{}: map outside [0, 1]", s.key))?;
            ensure(hi == 1.0 || map.is_zero(), || format!("{}: map maximum {hi}", s.key))?;
            let (cx, cy) = truth[&s.key];
            let (ax, ay) = map.argmax();
            let quadrant = |x: f64, y: f64| (x < half, y < half);
            total += 1;
            if quadrant(ax as f64 + 0.5, ay as f64 + 0.5) == quadrant(cx, cy) {
                hits += 1;
            }
        }
    }
    let rate = hits as f64 / total as f64;
    ensure(rate >= 0.9, || format!("argmax in the bump quadrant for {hits}/{total}"))?;
    Ok(format!("argmax in the bump quadrant for {hits}/{total} held-out Positive/Surprise clips ({:.1}%)", 100.0 * rate))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("flow solver accuracy and runtime", flow_solver),
        ("optical strain on analytic fields", strain_analytic),
        ("gradients against finite differences", gradient_suite),
        ("loss identities", loss_identities),
        ("metric oracle and printed-row arithmetic", metric_oracle),
        ("protocol invariants", protocol_invariants),
        ("label aggregates", label_aggregates),
        ("end-to-end learning", end_to_end_learning),
        ("directional ethnic-shift check", ethnic_shift),
        ("Grad-CAM locality", gradcam_locality),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| f == &n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg)
        });
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS criterion {n:2} {name}: {detail} [{took:.1?}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n:2} {name}: {detail} [{took:.1?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
