//! Evaluation protocol oracles: fold planning, pooled metrics, the random
//! forest, scenario sampling, and report provenance.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::corpus::joint_manifest;
use mecross::corpus::{Emotion, Ethnicity};
use mecross::flowcore::FlowParams;
use mecross::protocol::{
    aggregate_folds, binarize, binarize_emotions, forest_train, gini, macro_f1, plan_loso, sample_prima_facie,
    select_subjects, BinaryEmotion, ConfusionMatrix, FeatureSubsample, FoldResult, ForestConfig, PrimaFacieScenario,
    ProtocolError, RunProvenance, ScenarioKind,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn keyed(manifest: &mecross::corpus::Manifest) -> Vec<(String, String)> {
    manifest.records.iter().map(|r| (r.key_string(), r.subject_id.clone())).collect()
}

#[test]
fn loso_over_joint_manifest_partitions_without_leakage() {
    let manifest = joint_manifest(3);
    let pairs = keyed(&manifest);
    let plan = plan_loso(pairs.iter().map(|(k, s)| (k.as_str(), s.as_str()))).unwrap();
    assert_eq!(plan.len(), 54);
    let subject_of: BTreeMap<&str, &str> = pairs.iter().map(|(k, s)| (k.as_str(), s.as_str())).collect();
    let mut tested = BTreeSet::new();
    for fold in &plan {
        assert!(fold.test.iter().all(|k| subject_of[k.as_str()] == fold.held_out));
        assert!(fold.train.iter().all(|k| subject_of[k.as_str()] != fold.held_out));
        assert_eq!(fold.train.len() + fold.test.len(), pairs.len());
        for k in &fold.test {
            assert!(tested.insert(k.clone()), "{k} tested twice");
        }
    }
    assert_eq!(tested.len(), pairs.len());
}

#[test]
fn loso_needs_two_subjects() {
    assert!(matches!(plan_loso([("a", "S1"), ("b", "S1")]), Err(ProtocolError::TooFewSubjects(1))));
}

fn matrix(counts: Vec<Vec<u64>>) -> ConfusionMatrix {
    let names: Vec<String> = (0..counts.len()).map(|i| format!("c{i}")).collect();
    ConfusionMatrix {
        classes: names,
        counts,
    }
}

proptest! {
    #[test]
    fn macro_f1_is_invariant_to_class_relabeling(
        cells in prop::collection::vec(0u64..20, 9),
        perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
    ) {
        prop_assume!(cells.iter().sum::<u64>() > 0);
        let counts: Vec<Vec<u64>> = cells.chunks(3).map(|r| r.to_vec()).collect();
        let permuted: Vec<Vec<u64>> = (0..3).map(|i| (0..3).map(|j| counts[perm[i]][perm[j]]).collect()).collect();
        let a = macro_f1(&matrix(counts)).unwrap().macro_f1;
        let b = macro_f1(&matrix(permuted)).unwrap().macro_f1;
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn pooling_ignores_fold_order(cells in prop::collection::vec(0u64..10, 12), rot in 0usize..3) {
        prop_assume!(cells.iter().sum::<u64>() > 0);
        let folds: Vec<FoldResult> = cells
            .chunks(4)
            .enumerate()
            .map(|(i, c)| FoldResult { held_out: format!("S{i}"), confusion: matrix(vec![c[..2].to_vec(), c[2..].to_vec()]) })
            .collect();
        let mut rotated = folds.clone();
        rotated.rotate_left(rot);
        let a = aggregate_folds(&folds).unwrap();
        let b = aggregate_folds(&rotated).unwrap();
        prop_assert_eq!(&a.pooled, &b.pooled);
        prop_assert_eq!(a.f1.macro_f1, b.f1.macro_f1);
    }
}

#[test]
fn single_fold_pools_to_itself() {
    let m = matrix(vec![vec![2, 1], vec![1, 3]]);
    let report = aggregate_folds(&[FoldResult {
        held_out: "S1".into(),
        confusion: m.clone(),
    }])
    .unwrap();
    assert_eq!(report.pooled, m);
    assert_eq!(report.f1, macro_f1(&m).unwrap());
}

#[test]
fn pooled_differs_from_fold_average() {
    // perfect on one fold, all-wrong on a tiny one
    let a = matrix(vec![vec![5, 0], vec![0, 5]]);
    let b = matrix(vec![vec![0, 1], vec![0, 0]]);
    let folds = [
        FoldResult {
            held_out: "A".into(),
            confusion: a.clone(),
        },
        FoldResult {
            held_out: "B".into(),
            confusion: b,
        },
    ];
    let pooled = aggregate_folds(&folds).unwrap().f1.macro_f1;
    // negative: tp 5, fn 1 -> 10/11; non-negative: tp 5, fp 1 -> 10/11
    assert!((pooled - 10.0 / 11.0).abs() < 1e-12);
}

fn forest(trees: usize, depth: usize, seed: u64) -> ForestConfig {
    ForestConfig {
        trees,
        max_depth: depth,
        seed,
        ..ForestConfig::default()
    }
}

#[test]
fn pure_labels_give_constant_forest() {
    let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
    let y = vec![1; 20];
    let m = forest_train(&x, &y, 3, &forest(10, 5, 1)).unwrap();
    for t in &m.trees {
        assert_eq!(t.root_split(), None);
    }
    assert_eq!(m.predict(&[100.0, -3.0]), 1);
}

/// Exhaustive 1-D search: midpoints of consecutive distinct values, weighted
/// child Gini, first minimum wins.
fn brute_force_split(x: &[f64], y: &[usize], classes: usize) -> Option<f64> {
    let mut values: Vec<f64> = x.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let counts = |pred: &dyn Fn(f64) -> bool| {
        let mut c = vec![0; classes];
        for (xi, yi) in x.iter().zip(y) {
            if pred(*xi) {
                c[*yi] += 1;
            }
        }
        c
    };
    let parent = gini(&counts(&|_| true));
    let n = x.len() as f64;
    let mut best: Option<(f64, f64)> = None;
    for w in values.windows(2) {
        let t = 0.5 * (w[0] + w[1]);
        let l = counts(&|v| v <= t);
        let r = counts(&|v| v > t);
        let nl = l.iter().sum::<usize>() as f64;
        let nr = r.iter().sum::<usize>() as f64;
        let impurity = (nl * gini(&l) + nr * gini(&r)) / n;
        if parent - impurity > 1e-12 && best.is_none_or(|(_, b)| impurity < b) {
            best = Some((t, impurity));
        }
    }
    best.map(|(t, _)| t)
}

#[test]
fn root_split_matches_brute_force_gini() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(6..30);
        let x: Vec<f64> = (0..n).map(|_| (rng.random_range(0..40) as f64) * 0.25).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let features: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
        let cfg = ForestConfig {
            trees: 1,
            max_depth: 1,
            min_leaf: 1,
            feature_subsample: FeatureSubsample::All,
            bootstrap: false,
            seed,
        };
        let m = forest_train(&features, &y, 3, &cfg).unwrap();
        let got = m.trees[0].root_split().map(|(f, t)| {
            assert_eq!(f, 0);
            t
        });
        assert_eq!(got, brute_force_split(&x, &y, 3), "seed {seed}");
    }
}

fn xor_data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let y = x.iter().map(|p| usize::from((p[0] > 0.0) != (p[1] > 0.0))).collect();
    (x, y)
}

#[test]
fn forest_learns_xor() {
    let (x, y) = xor_data(200, 5);
    let m = forest_train(&x, &y, 2, &forest(50, 4, 9)).unwrap();
    let (tx, ty) = xor_data(400, 6);
    let correct = tx.iter().zip(&ty).filter(|(p, &c)| m.predict(p) == c).count();
    let acc = correct as f64 / tx.len() as f64;
    assert!(acc >= 0.9, "xor accuracy {acc}");
}

#[test]
fn duplicating_rows_leaves_a_plain_tree_unchanged() {
    let (x, y) = xor_data(60, 11);
    let cfg = ForestConfig {
        trees: 1,
        max_depth: 6,
        min_leaf: 1,
        feature_subsample: FeatureSubsample::All,
        bootstrap: false,
        seed: 0,
    };
    let once = forest_train(&x, &y, 2, &cfg).unwrap();
    let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
    let y2: Vec<usize> = y.iter().chain(&y).copied().collect();
    let twice = forest_train(&x2, &y2, 2, &cfg).unwrap();
    assert_eq!(once.trees, twice.trees);
}

#[test]
fn forest_is_deterministic_per_seed() {
    let (x, y) = xor_data(80, 2);
    let a = forest_train(&x, &y, 2, &forest(20, 5, 4)).unwrap();
    let b = forest_train(&x, &y, 2, &forest(20, 5, 4)).unwrap();
    let c = forest_train(&x, &y, 2, &forest(20, 5, 5)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn forest_rejects_bad_inputs() {
    assert!(forest_train(&[], &[], 2, &ForestConfig::default()).is_err());
    assert!(forest_train(&[vec![1.0], vec![1.0, 2.0]], &[0, 1], 2, &ForestConfig::default()).is_err());
    assert!(forest_train(&[vec![1.0]], &[2], 2, &ForestConfig::default()).is_err());
}

fn subject_groups(manifest: &mecross::corpus::Manifest) -> BTreeMap<String, Ethnicity> {
    manifest
        .subjects()
        .into_iter()
        .map(|s| {
            let e = manifest.subject_ethnicity(&s).unwrap();
            (s, e)
        })
        .collect()
}

#[test]
fn mixed_scenario_draws_eight_plus_eight() {
    let manifest = joint_manifest(1);
    let groups = subject_groups(&manifest);
    for seed in 0..5 {
        let chosen = select_subjects(&groups, &PrimaFacieScenario::new(ScenarioKind::Mixed, seed)).unwrap();
        assert_eq!(chosen.len(), 16);
        let asian = chosen.iter().filter(|s| groups[*s] == Ethnicity::Asian).count();
        assert_eq!((asian, chosen.len() - asian), (8, 8));
        let sub = sample_prima_facie(&manifest, &PrimaFacieScenario::new(ScenarioKind::Mixed, seed)).unwrap();
        assert_eq!(sub.subjects(), chosen);
    }
}

#[test]
fn mono_scenarios_respect_their_group() {
    let groups: BTreeMap<String, Ethnicity> = (0..36)
        .map(|i| (format!("S{i:02}"), if i < 20 { Ethnicity::Asian } else { Ethnicity::NonAsian }))
        .collect();
    let asian = select_subjects(&groups, &PrimaFacieScenario::new(ScenarioKind::AsianOnly, 2)).unwrap();
    assert_eq!(asian.len(), 16);
    assert!(asian.iter().all(|s| groups[s] == Ethnicity::Asian));
    let non = select_subjects(&groups, &PrimaFacieScenario::new(ScenarioKind::NonAsianOnly, 2)).unwrap();
    assert_eq!(non.len(), 16);
    assert!(non.iter().all(|s| groups[s] == Ethnicity::NonAsian));
}

#[test]
fn infeasible_quota_is_refused() {
    let groups: BTreeMap<String, Ethnicity> = (0..30)
        .map(|i| (format!("S{i:02}"), if i < 20 { Ethnicity::Asian } else { Ethnicity::NonAsian }))
        .collect();
    let err = select_subjects(&groups, &PrimaFacieScenario::new(ScenarioKind::NonAsianOnly, 0)).unwrap_err();
    assert!(matches!(
        err,
        ProtocolError::QuotaInfeasible {
            needed: 16,
            available: 10,
            ..
        }
    ));
    assert_eq!(err.kind(), mecross::ErrorKind::Data);
}

#[test]
fn subject_draw_is_seeded() {
    let groups = subject_groups(&joint_manifest(1));
    let s = |seed| select_subjects(&groups, &PrimaFacieScenario::new(ScenarioKind::Mixed, seed)).unwrap();
    assert_eq!(s(7), s(7));
    assert!((0..5).any(|k| s(k) != s(7)));
}

#[test]
fn binarization_conserves_counts() {
    let manifest = joint_manifest(4);
    let labels = binarize_emotions(&manifest);
    assert_eq!(labels.len(), manifest.eligible().len());
    let neg = labels.iter().filter(|(_, b)| *b == BinaryEmotion::Negative).count();
    assert_eq!((neg, labels.len() - neg), (192, 98));
    assert_eq!(binarize(Emotion::Surprise), BinaryEmotion::NonNegative);
    assert_eq!(binarize(Emotion::Positive), BinaryEmotion::NonNegative);
}

#[test]
fn provenance_hash_tracks_every_field() {
    let base = RunProvenance::new("loso", 1, "m", "l", FlowParams::default(), serde_json::json!({"batch": 32}));
    let h = base.hash();
    assert_eq!(h, base.clone().hash());
    let mut seed = base.clone();
    seed.seed = 2;
    let mut manifest = base.clone();
    manifest.manifest_hash = "m2".into();
    let mut flow = base.clone();
    flow.flow_params.smoothness_alpha += 1.0;
    let mut config = base.clone();
    config.config = serde_json::json!({"batch": 8});
    for other in [seed, manifest, flow, config] {
        assert_ne!(other.hash(), h);
    }
}

#[test]
fn provenance_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let p = RunProvenance::new("report", 0, "a", "b", FlowParams::default(), serde_json::Value::Null);
    let path = dir.path().join("run.provenance.json");
    let hash = p.save(&path).unwrap();
    let (loaded_hash, loaded) = RunProvenance::load(&path).unwrap();
    assert_eq!((loaded_hash, loaded), (hash, p));
}

#[test]
fn printed_table_rows_are_internally_consistent() {
    let close = |a: f64, b: f64| (a - b).abs() <= 5e-5 + 1e-12;
    assert!(close((0.4330 + 0.4762) / 2.0, 0.4546));
    assert!(close((0.8142 + 0.5225 + 0.5263) / 3.0, 0.6210));
}
