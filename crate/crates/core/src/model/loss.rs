use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::config::{ModelConfig, EMOTION_CLASSES, ETHNIC_CLASSES};
use super::graph::{cce, Graph};
use super::network::{record_forward, Bound, Logits, ModelInput};
use super::params::{GradientSet, ParamSet};
use super::tensor::Tensor;
use super::ModelError;

/// The three cross-entropy terms and their unweighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown<T> {
    pub l_emo: T,
    pub l_ethnic: T,
    pub l_fusion: T,
    pub total: T,
}

impl<T: Scalar> LossBreakdown<T> {
    /// `total = (l_emo + l_ethnic) + l_fusion`.
    pub fn new(l_emo: T, l_ethnic: T, l_fusion: T) -> Self {
        Self {
            l_emo,
            l_ethnic,
            l_fusion,
            total: l_emo + l_ethnic + l_fusion,
        }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn to_f64(&self) -> LossBreakdown<f64> {
        LossBreakdown {
            l_emo: self.l_emo.to_f64_lossy(),
            l_ethnic: self.l_ethnic.to_f64_lossy(),
            l_fusion: self.l_fusion.to_f64_lossy(),
            total: self.total.to_f64_lossy(),
        }
    }

    /// Component-wise mean, total recomputed from the means.
    pub fn mean(items: &[LossBreakdown<T>]) -> Self {
        if items.is_empty() {
            return Self::zero();
        }
        let n = T::from_usize_lossy(items.len());
        let sum = |f: fn(&LossBreakdown<T>) -> T| items.iter().map(f).fold(T::zero(), |a, b| a + b) / n;
        Self::new(sum(|l| l.l_emo), sum(|l| l.l_ethnic), sum(|l| l.l_fusion))
    }
}

/// Class indices for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub emotion: usize,
    pub ethnicity: Option<usize>,
}

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    super::graph::softmax(logits)
}

/// Loss terms for one forward result. The fused logits are scored against the
/// emotion label; variants without ethnic context contribute zero for the
/// ethnic and fusion terms.
pub fn total_loss<T: Scalar>(logits: &Logits<T>, labels: Labels) -> Result<LossBreakdown<T>, ModelError> {
    let l_emo = cce(&logits.emotion, labels.emotion)?;
    let (l_eth, l_fus) = match (&logits.ethnic, &logits.fused) {
        (Some(eth), Some(fused)) => {
            let y = labels.ethnicity.ok_or(ModelError::MissingLabel("ethnicity"))?;
            (cce(eth, y)?, cce(fused, labels.emotion)?)
        }
        _ => (T::zero(), T::zero()),
    };
    Ok(LossBreakdown::new(l_emo, l_eth, l_fus))
}

/// A labelled network input.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample<T> {
    pub input: ModelInput<T>,
    pub labels: Labels,
}

fn check_labels(cfg: &ModelConfig, labels: Labels) -> Result<(), ModelError> {
    if labels.emotion >= EMOTION_CLASSES {
        return Err(ModelError::TargetOutOfRange {
            target: labels.emotion,
            classes: EMOTION_CLASSES,
        });
    }
    if cfg.variant.has_ethnic_context() {
        let y = labels.ethnicity.ok_or(ModelError::MissingLabel("ethnicity"))?;
        if y >= ETHNIC_CLASSES {
            return Err(ModelError::TargetOutOfRange {
                target: y,
                classes: ETHNIC_CLASSES,
            });
        }
    }
    Ok(())
}

/// Loss and exact gradient for a single sample.
pub fn sample_gradient<T: Scalar>(
    params: &ParamSet<T>,
    cfg: &ModelConfig,
    sample: &TrainingSample<T>,
) -> Result<(GradientSet<T>, LossBreakdown<T>), ModelError> {
    check_labels(cfg, sample.labels)?;
    let mut g = Graph::new();
    let p = Bound::new(&mut g, params);
    let t = record_forward(&mut g, &p, cfg, &sample.input)?;
    let l_emo = g.cross_entropy(t.emotion, sample.labels.emotion);
    let terms = match (t.ethnic, t.fused, sample.labels.ethnicity) {
        (Some(eth), Some(fused), Some(y)) => {
            let l_eth = g.cross_entropy(eth, y);
            let l_fus = g.cross_entropy(fused, sample.labels.emotion);
            vec![l_emo, l_eth, l_fus]
        }
        _ => vec![l_emo],
    };
    let total = g.sum_scalars(&terms);
    let read = |i: usize| terms.get(i).map_or(T::zero(), |&v| g.value(v).data()[0]);
    let loss = LossBreakdown::new(read(0), read(1), read(2));
    debug_assert_eq!(loss.total, g.value(total).data()[0]);
    let grads = g.backward(total);
    let mut out = ParamSet::zeros_like(params);
    for (name, var) in p.iter() {
        if let Some(gv) = grads.get(var) {
            let shape = params.expect(name)?.shape().to_vec();
            *out.get_mut(name).expect("same layout") = Tensor::new(shape, gv.to_vec());
        }
    }
    Ok((out, loss))
}

/// Mean loss and mean gradient over a batch. Samples are differentiated in
/// parallel and reduced in batch order, so the result does not depend on the
/// thread count.
pub fn backward<T: Scalar>(
    params: &ParamSet<T>,
    cfg: &ModelConfig,
    batch: &[TrainingSample<T>],
) -> Result<(GradientSet<T>, LossBreakdown<T>), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptySplit);
    }
    let per_sample: Vec<_> = batch
        .par_iter()
        .map(|s| sample_gradient(params, cfg, s))
        .collect::<Result<_, _>>()?;
    let mut grad = ParamSet::zeros_like(params);
    let mut losses = Vec::with_capacity(per_sample.len());
    for (g, l) in &per_sample {
        grad.add_assign(g);
        losses.push(*l);
    }
    grad.scale(T::one() / T::from_usize_lossy(batch.len()));
    if let Some(name) = grad.first_non_finite() {
        return Err(ModelError::NonFiniteGradient(name.to_string()));
    }
    Ok((grad, LossBreakdown::mean(&losses)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cce_examples() {
        let logits: Vec<f64> = [0.7f64, 0.2, 0.1].iter().map(|p| p.ln()).collect();
        assert_abs_diff_eq!(cce(&logits, 0).unwrap(), -(0.7f64.ln()), epsilon = 1e-12);
        assert_abs_diff_eq!(cce(&[2.0f64, 2.0, 2.0], 1).unwrap(), 3f64.ln(), epsilon = 1e-12);
        let big = cce(&[1000.0f64, 0.0, 0.0], 0).unwrap();
        assert!(big.is_finite() && big.abs() < 1e-12);
        assert!(matches!(cce(&[0.0f64, 1.0], 2), Err(ModelError::TargetOutOfRange { .. })));
    }

    #[test]
    fn breakdown_sums() {
        let l = LossBreakdown::new(0.5f64, 0.2, 0.3);
        assert_eq!(l.total, 0.5 + 0.2 + 0.3);
        assert_abs_diff_eq!(l.total, 1.0, epsilon = 1e-12);
        let logits = Logits {
            emotion: vec![0.0f64, 0.0, 0.0],
            ethnic: None,
            fused: None,
        };
        let l = total_loss(&logits, Labels { emotion: 0, ethnicity: None }).unwrap();
        assert_eq!(l.total, l.l_emo);
        assert_eq!((l.l_ethnic, l.l_fusion), (0.0, 0.0));
    }

    #[test]
    fn confident_agreement_gives_zero_total() {
        let logits = Logits {
            emotion: vec![800.0f64, 0.0, 0.0],
            ethnic: Some(vec![0.0, 800.0]),
            fused: Some(vec![800.0, 0.0, 0.0]),
        };
        let l = total_loss(&logits, Labels { emotion: 0, ethnicity: Some(1) }).unwrap();
        assert_eq!(l.total, 0.0);
        assert!(matches!(
            total_loss(&logits, Labels { emotion: 0, ethnicity: None }),
            Err(ModelError::MissingLabel(_))
        ));
    }
}
