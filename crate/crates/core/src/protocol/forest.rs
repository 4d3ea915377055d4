//! Bagged CART classifier with Gini splits.

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::{derive_seed, rng_for, Rng};

use super::ProtocolError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    /// `ceil(sqrt(d))` candidate features per split.
    Sqrt,
    All,
    Count(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_subsample: FeatureSubsample,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            max_depth: 8,
            min_leaf: 2,
            feature_subsample: FeatureSubsample::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// `(feature, threshold)` of the root split, if the root is not a leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub classes: usize,
    pub dims: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Majority vote; ties go to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.classes];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        best
    }
}

pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in counts.iter().enumerate() {
        if v > counts[best] {
            best = c;
        }
    }
    best
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    classes: usize,
    cfg: &'a ForestConfig,
    per_split: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    /// Lowest weighted Gini over midpoint thresholds of the candidate features.
    fn best_split(&self, idx: &[usize], features: &[usize]) -> Option<(usize, f64, f64)> {
        let n = idx.len();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = idx.to_vec();
        for &f in features {
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left = vec![0usize; self.classes];
            let mut right = self.counts(idx);
            for k in 0..n - 1 {
                let i = sorted[k];
                left[self.y[i]] += 1;
                right[self.y[i]] -= 1;
                let (a, b) = (self.x[i][f], self.x[sorted[k + 1]][f]);
                if a == b || k + 1 < self.cfg.min_leaf || n - k - 1 < self.cfg.min_leaf {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = (n - k - 1) as f64;
                let score = (nl * gini(&left) + nr * gini(&right)) / n as f64;
                if best.is_none_or(|(_, _, s)| score < s) {
                    best = Some((f, a + (b - a) / 2.0, score));
                }
            }
        }
        best
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize, rng: &mut Rng) -> usize {
        let counts = self.counts(&idx);
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf {
            class: majority(&counts),
        });
        let parent = gini(&counts);
        if depth >= self.cfg.max_depth || parent == 0.0 || idx.len() < 2 * self.cfg.min_leaf.max(1) {
            return me;
        }
        let dims = self.x[0].len();
        let mut features: Vec<usize> = if self.per_split >= dims {
            (0..dims).collect()
        } else {
            sample(rng, dims, self.per_split).into_vec()
        };
        features.sort_unstable();
        let Some((feature, threshold, score)) = self.best_split(&idx, &features) else {
            return me;
        };
        if score >= parent - 1e-12 {
            return me;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[me] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }
}

/// Trains `config.trees` trees; tree `t` samples from stream `tree`/`t` of
/// `config.seed`, so the forest is identical for any thread count.
pub fn forest_train(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    config: &ForestConfig,
) -> Result<ForestModel, ProtocolError> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(ProtocolError::EmptyTrainingSet);
    }
    let dims = features[0].len();
    if dims == 0 || features.iter().any(|f| f.len() != dims) {
        return Err(ProtocolError::InconsistentFeatures);
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(ProtocolError::InvalidConfig(format!("label {bad} out of range for {classes} classes")));
    }
    if config.trees == 0 {
        return Err(ProtocolError::InvalidConfig("forest needs at least one tree".into()));
    }
    let per_split = match config.feature_subsample {
        FeatureSubsample::Sqrt => (dims as f64).sqrt().ceil() as usize,
        FeatureSubsample::All => dims,
        FeatureSubsample::Count(k) => k.clamp(1, dims),
    };
    let n = features.len();
    let trees = (0..config.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(derive_seed(config.seed, "forest", 0), "tree", t as u64);
            let idx: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = Builder {
                x: features,
                y: labels,
                classes,
                cfg: config,
                per_split,
                nodes: Vec::new(),
            };
            b.build(idx, 0, &mut rng);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(ForestModel { classes, dims, trees })
}

pub fn forest_predict(model: &ForestModel, feature: &[f64]) -> Result<usize, ProtocolError> {
    if feature.len() != model.dims {
        return Err(ProtocolError::InconsistentFeatures);
    }
    Ok(model.predict(feature))
}
