use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::seed::{derive_seed, rng_for};

use super::config::{ModelConfig, EMOTION_CLASSES};
use super::loss::{backward, LossBreakdown, TrainingSample};
use super::network::{forward, Logits, ModelInput};
use super::optim::{adam_step, lr_schedule, AdamConfig, AdamState};
use super::params::ParamSet;
use super::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Per-epoch multiplicative learning-rate decay.
    pub lr_decay: f64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 32,
            learning_rate: 0.001,
            lr_decay: 0.9,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(ModelError::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.lr_decay > 0.0) {
            return Err(ModelError::InvalidConfig("learning rate and decay must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: ParamSet<T>,
    /// Sample-mean loss terms of each epoch, measured before each update.
    pub history: Vec<LossBreakdown<T>>,
    pub warnings: Vec<String>,
}

/// Trains a fresh network. Initialization draws from the `init` stream and
/// epoch `k` shuffles with the `shuffle`/`k` stream, both derived from `seed`.
pub fn train_fold<T: Scalar>(
    samples: &[TrainingSample<T>],
    model: &ModelConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome<T>, ModelError> {
    model.validate()?;
    train.validate()?;
    if samples.is_empty() {
        return Err(ModelError::EmptySplit);
    }
    let mut warnings = Vec::new();
    for c in 0..EMOTION_CLASSES {
        if !samples.iter().any(|s| s.labels.emotion == c) {
            warnings.push(format!("emotion class {c} is absent from the training split"));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let mut params = ParamSet::init(model, derive_seed(seed, "init", 0))?;
    let mut state = AdamState::new(&params, train.adam);
    let mut history = Vec::with_capacity(train.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..train.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_for(seed, "shuffle", epoch as u64));
        let lr = lr_schedule(train.learning_rate, train.lr_decay, epoch);
        let mut weighted = Vec::new();
        for chunk in order.chunks(train.batch_size) {
            let batch: Vec<TrainingSample<T>> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let (grads, loss) = backward(&params, model, &batch)?;
            adam_step(&mut params, &grads, &mut state, lr)?;
            weighted.extend(std::iter::repeat_n(loss, chunk.len()));
        }
        let epoch_loss = LossBreakdown::mean(&weighted);
        log::debug!("epoch {epoch}: loss {:.6}", epoch_loss.total.to_f64_lossy());
        history.push(epoch_loss);
    }
    Ok(TrainOutcome {
        params,
        history,
        warnings,
    })
}

/// Forward passes over many inputs, in input order.
pub fn predict_all<T: Scalar>(
    params: &ParamSet<T>,
    model: &ModelConfig,
    inputs: &[&ModelInput<T>],
) -> Result<Vec<Logits<T>>, ModelError> {
    inputs.par_iter().map(|x| forward(params, model, x)).collect()
}
