#![allow(dead_code)]

pub mod corpus;
pub mod warp;

use mecross::model::{
    forward, total_loss, EncoderConfig, Labels, ModelConfig, ModelInput, ParamSet, PatchEncoderConfig, Tensor,
    TrainingSample, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small network on 16×16 inputs: two conv stages and one attention block.
pub fn toy_config(variant: Variant) -> ModelConfig {
    ModelConfig {
        variant,
        encoder: EncoderConfig {
            input_channels: 3,
            widths: vec![2, 3],
            kernel: 3,
            strides: vec![2, 1],
            feature_dim: 4,
        },
        patch: PatchEncoderConfig {
            image_size: 16,
            patch: 8,
            embed_dim: 4,
            blocks: 1,
            heads: 2,
            mlp_ratio: 2,
        },
    }
}

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random::<f64>()).collect())
}

pub fn toy_sample(seed: u64, emotion: usize, ethnicity: usize) -> TrainingSample<f64> {
    TrainingSample {
        input: ModelInput::new(
            random_tensor(&[3, 16, 16], seed),
            Some(random_tensor(&[3, 16, 16], seed + 1000)),
        ),
        labels: Labels {
            emotion,
            ethnicity: Some(ethnicity),
        },
    }
}

/// Mean total loss over a batch, evaluated without the tape's backward pass.
pub fn batch_loss(params: &ParamSet<f64>, cfg: &ModelConfig, batch: &[TrainingSample<f64>]) -> f64 {
    let sum: f64 = batch
        .iter()
        .map(|s| total_loss(&forward(params, cfg, &s.input).unwrap(), s.labels).unwrap().total)
        .sum();
    sum / batch.len() as f64
}

/// Worst violation of `|analytic - numeric| <= 1e-4 * max(|analytic|, |numeric|)`
/// over every scalar parameter, using central differences with step 1e-5.
/// The denominator is floored at 1e-6 so vanishing gradients are compared
/// against difference round-off rather than divided by zero.
///
/// ReLU is not differentiable at zero. An entry whose central second
/// difference exceeds `KINK_CURVATURE` straddles such a kink; it is counted
/// in `kinks` instead of being compared.
pub struct GradCheck {
    pub worst_rel: f64,
    pub worst_param: String,
    pub checked: usize,
    pub kinks: usize,
}

const KINK_CURVATURE: f64 = 50.0;

pub fn finite_difference_check(
    params: &ParamSet<f64>,
    cfg: &ModelConfig,
    batch: &[TrainingSample<f64>],
    analytic: &ParamSet<f64>,
) -> GradCheck {
    const H: f64 = 1e-5;
    let mut p = params.clone();
    let names: Vec<String> = params.names().map(str::to_string).collect();
    let mut out = GradCheck {
        worst_rel: 0.0,
        worst_param: String::new(),
        checked: 0,
        kinks: 0,
    };
    let base = batch_loss(params, cfg, batch);
    for name in names {
        let n = params.get(&name).unwrap().len();
        for i in 0..n {
            out.checked += 1;
            let orig = params.get(&name).unwrap().data()[i];
            p.get_mut(&name).unwrap().data_mut()[i] = orig + H;
            let up = batch_loss(&p, cfg, batch);
            p.get_mut(&name).unwrap().data_mut()[i] = orig - H;
            let down = batch_loss(&p, cfg, batch);
            p.get_mut(&name).unwrap().data_mut()[i] = orig;
            if (up - 2.0 * base + down).abs() / (H * H) > KINK_CURVATURE {
                out.kinks += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * H);
            let a = analytic.get(&name).unwrap().data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if rel > out.worst_rel {
                out.worst_rel = rel;
                out.worst_param = format!("{name}[{i}]");
            }
        }
    }
    out
}

/// Adds uniform noise in `[-0.1, 0.1]` to every parameter. Zero-initialized
/// biases put ReLU inputs exactly on the kink wherever a receptive field is
/// dead; the perturbation moves the toy model to a generic point.
pub fn perturbed(params: &ParamSet<f64>, seed: u64) -> ParamSet<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = params.clone();
    for (_, t) in p.iter_mut() {
        for v in t.data_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    p
}
