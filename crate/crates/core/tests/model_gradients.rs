mod common;

use common::{finite_difference_check, perturbed, toy_config, toy_sample};
use mecross::model::{backward, ParamSet, Variant, ETHNIC_ENCODER};

fn check_variant(variant: Variant) {
    let cfg = toy_config(variant);
    let params = perturbed(&ParamSet::<f64>::init(&cfg, 17).unwrap(), 99);
    let batch = vec![toy_sample(1, 0, 1), toy_sample(2, 2, 0)];
    let (grads, _) = backward(&params, &cfg, &batch).unwrap();
    let check = finite_difference_check(&params, &cfg, &batch, &grads);
    assert_eq!(check.checked, params.num_scalars());
    eprintln!("{variant}: {} entries, {} at kinks", check.checked, check.kinks);
    assert!(check.kinks * 100 <= check.checked, "{variant}: {} kinks", check.kinks);
    assert!(
        check.worst_rel <= 1e-4,
        "{variant}: worst relative error {:.3e} at {}",
        check.worst_rel,
        check.worst_param
    );
}

#[test]
fn gradients_match_finite_differences_motion_only() {
    check_variant(Variant::MotionOnly);
}

#[test]
fn gradients_match_finite_differences_dual_motion() {
    check_variant(Variant::DualMotion);
}

#[test]
fn gradients_match_finite_differences_rgb_conv() {
    check_variant(Variant::MotionPlusRgbConv);
}

#[test]
fn gradients_match_finite_differences_rgb_patch() {
    check_variant(Variant::MotionPlusRgbPatch);
}

#[test]
fn unused_branch_has_exactly_zero_gradient() {
    let cfg = toy_config(Variant::MotionOnly);
    let params = ParamSet::<f64>::init(&cfg, 3).unwrap();
    let (grads, loss) = backward(&params, &cfg, &[toy_sample(5, 1, 0)]).unwrap();
    assert_eq!(loss.total, loss.l_emo);
    for (name, g) in grads.iter() {
        if name.starts_with(ETHNIC_ENCODER) || name.starts_with("ethnic_head") || name.starts_with("fusion_head") {
            assert!(g.data().iter().all(|&v| v == 0.0), "{name}");
        }
    }
    assert!(grads.get("emotion_head.bias").unwrap().data().iter().any(|&v| v != 0.0));
}

#[test]
fn duplicated_batch_leaves_mean_gradient_unchanged() {
    let cfg = toy_config(Variant::DualMotion);
    let params = ParamSet::<f64>::init(&cfg, 3).unwrap();
    let batch = vec![toy_sample(1, 0, 0), toy_sample(2, 1, 1), toy_sample(3, 2, 1)];
    let doubled: Vec<_> = batch.iter().flat_map(|s| [s.clone(), s.clone()]).collect();
    let (a, la) = backward(&params, &cfg, &batch).unwrap();
    let (b, lb) = backward(&params, &cfg, &doubled).unwrap();
    assert!((la.total - lb.total).abs() < 1e-12);
    for (name, ga) in a.iter() {
        for (x, y) in ga.data().iter().zip(b.get(name).unwrap().data()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{name}");
        }
    }
}

#[test]
fn batch_gradient_is_thread_count_independent() {
    let cfg = toy_config(Variant::MotionPlusRgbPatch);
    let params = ParamSet::<f64>::init(&cfg, 8).unwrap();
    let batch: Vec<_> = (0..6).map(|i| toy_sample(i, (i % 3) as usize, (i % 2) as usize)).collect();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| backward(&params, &cfg, &batch).unwrap().0)
    };
    assert_eq!(run(1), run(3));
}
