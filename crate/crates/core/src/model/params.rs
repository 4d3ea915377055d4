use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};

use crate::scalar::Scalar;
use crate::seed::rng_for;

use super::config::{EncoderConfig, ModelConfig, PatchEncoderConfig, EMOTION_CLASSES, ETHNIC_CLASSES};
use super::tensor::Tensor;
use super::ModelError;

pub const EMOTION_ENCODER: &str = "emotion_encoder";
pub const ETHNIC_ENCODER: &str = "ethnic_encoder";
pub const TEXTURE_ENCODER: &str = "texture_encoder";

/// Standard deviation of the truncated normal used for transformer embeddings.
pub const EMBED_INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Init {
    /// Normal with `std = sqrt(gain / fan_in)`.
    FanIn { fan_in: usize, gain: f64 },
    /// Normal with the given std, redrawn outside two standard deviations.
    TruncNormal(f64),
    Zeros,
    Ones,
}

/// Ordered parameter layout: name, shape, initializer.
pub(crate) type Layout = Vec<(String, Vec<usize>, Init)>;

fn affine(layout: &mut Layout, name: &str, out: usize, inp: usize) {
    layout.push((
        format!("{name}.weight"),
        vec![out, inp],
        Init::FanIn { fan_in: inp, gain: 1.0 },
    ));
    layout.push((format!("{name}.bias"), vec![out], Init::Zeros));
}

fn norm(layout: &mut Layout, name: &str, dim: usize) {
    layout.push((format!("{name}.gain"), vec![dim], Init::Ones));
    layout.push((format!("{name}.bias"), vec![dim], Init::Zeros));
}

pub(crate) fn conv_layout(layout: &mut Layout, prefix: &str, cfg: &EncoderConfig) {
    let mut c = cfg.input_channels;
    let k = cfg.kernel;
    for (i, &w) in cfg.widths.iter().enumerate() {
        layout.push((
            format!("{prefix}.stage{i}.weight"),
            vec![w, c, k, k],
            Init::FanIn {
                fan_in: c * k * k,
                gain: 2.0,
            },
        ));
        layout.push((format!("{prefix}.stage{i}.bias"), vec![w], Init::Zeros));
        c = w;
    }
    affine(layout, &format!("{prefix}.proj"), cfg.feature_dim, c);
}

fn patch_layout(layout: &mut Layout, prefix: &str, cfg: &PatchEncoderConfig, feature_dim: usize) {
    let d = cfg.embed_dim;
    layout.push((
        format!("{prefix}.patch_embed.weight"),
        vec![d, cfg.patch_len()],
        Init::TruncNormal(EMBED_INIT_STD),
    ));
    layout.push((format!("{prefix}.patch_embed.bias"), vec![d], Init::Zeros));
    layout.push((
        format!("{prefix}.pos_embed"),
        vec![cfg.num_patches(), d],
        Init::TruncNormal(EMBED_INIT_STD),
    ));
    for b in 0..cfg.blocks {
        let p = format!("{prefix}.block{b}");
        norm(layout, &format!("{p}.ln1"), d);
        for m in ["q", "k", "v", "out"] {
            affine(layout, &format!("{p}.attn.{m}"), d, d);
        }
        norm(layout, &format!("{p}.ln2"), d);
        affine(layout, &format!("{p}.mlp.fc1"), d * cfg.mlp_ratio, d);
        affine(layout, &format!("{p}.mlp.fc2"), d, d * cfg.mlp_ratio);
    }
    norm(layout, &format!("{prefix}.ln_f"), d);
    affine(layout, &format!("{prefix}.proj"), feature_dim, d);
}

/// Every variant carries an ethnic branch and all three heads; for
/// `motion_only` they simply receive no gradient.
pub(crate) fn model_layout(cfg: &ModelConfig) -> Layout {
    let e = cfg.feature_dim();
    let mut layout = Layout::new();
    conv_layout(&mut layout, EMOTION_ENCODER, &cfg.encoder);
    if cfg.variant.uses_patch_encoder() {
        patch_layout(&mut layout, TEXTURE_ENCODER, &cfg.patch, e);
    } else {
        conv_layout(&mut layout, ETHNIC_ENCODER, &cfg.encoder);
    }
    affine(&mut layout, "emotion_head", EMOTION_CLASSES, e);
    affine(&mut layout, "ethnic_head", ETHNIC_CLASSES, e);
    affine(&mut layout, "fusion_head", EMOTION_CLASSES, 2 * e);
    layout
}

/// Named tensors, iterated in name order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    tensors: BTreeMap<String, Tensor<T>>,
}

/// Gradients share the parameter container.
pub type GradientSet<T> = ParamSet<T>;

impl<T: Scalar> ParamSet<T> {
    pub(crate) fn from_layout(layout: &Layout, seed: u64) -> Self {
        let tensors = layout
            .iter()
            .map(|(name, shape, init)| {
                let n: usize = shape.iter().product();
                let mut rng = rng_for(seed, &format!("init:{name}"), 0);
                let data: Vec<T> = match *init {
                    Init::Zeros => vec![T::zero(); n],
                    Init::Ones => vec![T::one(); n],
                    Init::FanIn { fan_in, gain } => {
                        let d = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("positive std");
                        (0..n).map(|_| T::lit(d.sample(&mut rng))).collect()
                    }
                    Init::TruncNormal(std) => {
                        let d = Normal::new(0.0, std).expect("positive std");
                        (0..n)
                            .map(|_| loop {
                                let z: f64 = d.sample(&mut rng);
                                if z.abs() <= 2.0 * std {
                                    break T::lit(z);
                                }
                            })
                            .collect()
                    }
                };
                (name.clone(), Tensor::new(shape.clone(), data))
            })
            .collect();
        Self { tensors }
    }

    /// Fresh parameters for `config`. Each tensor draws from its own stream
    /// keyed by its name, so a branch initializes identically in every variant.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        Ok(Self::from_layout(&model_layout(config), seed))
    }

    /// Zero tensors with the same names and shapes.
    pub fn zeros_like(other: &ParamSet<T>) -> Self {
        Self {
            tensors: other
                .tensors
                .iter()
                .map(|(k, t)| (k.clone(), Tensor::zeros(t.shape())))
                .collect(),
        }
    }

    /// Builds a set from named tensors, checking it matches `config` exactly.
    pub fn from_tensors(config: &ModelConfig, tensors: BTreeMap<String, Tensor<T>>) -> Result<Self, ModelError> {
        config.validate()?;
        let set = Self { tensors };
        set.check_layout(&model_layout(config))?;
        Ok(set)
    }

    pub(crate) fn from_map_unchecked(tensors: BTreeMap<String, Tensor<T>>) -> Self {
        Self { tensors }
    }

    pub(crate) fn check_layout(&self, layout: &Layout) -> Result<(), ModelError> {
        for (name, shape, _) in layout {
            let t = self.tensors.get(name).ok_or_else(|| ModelError::MissingParam(name.clone()))?;
            if t.shape() != shape.as_slice() {
                return Err(ModelError::ShapeMismatch {
                    what: name.clone(),
                    expected: shape.clone(),
                    found: t.shape().to_vec(),
                });
            }
            if !t.all_finite() {
                return Err(ModelError::NonFinite { what: name.clone() });
            }
        }
        if self.tensors.len() != layout.len() {
            let known: std::collections::HashSet<&str> = layout.iter().map(|(n, _, _)| n.as_str()).collect();
            let extra = self
                .tensors
                .keys()
                .find(|k| !known.contains(k.as_str()))
                .cloned()
                .unwrap_or_default();
            return Err(ModelError::UnknownParam(extra));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.get_mut(name)
    }

    pub(crate) fn expect(&self, name: &str) -> Result<&Tensor<T>, ModelError> {
        self.tensors.get(name).ok_or_else(|| ModelError::MissingParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalars across all tensors.
    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.tensors.iter().find(|(_, t)| !t.all_finite()).map(|(k, _)| k.as_str())
    }

    pub fn convert<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            tensors: self.tensors.iter().map(|(k, t)| (k.clone(), t.convert())).collect(),
        }
    }

    pub fn into_map(self) -> BTreeMap<String, Tensor<T>> {
        self.tensors
    }

    /// Elementwise `self += other`; both sets must share names and shapes.
    pub(crate) fn add_assign(&mut self, other: &ParamSet<T>) {
        for (k, t) in &mut self.tensors {
            let o = &other.tensors[k];
            for (a, &b) in t.data_mut().iter_mut().zip(o.data()) {
                *a = *a + b;
            }
        }
    }

    pub(crate) fn scale(&mut self, s: T) {
        for t in self.tensors.values_mut() {
            for a in t.data_mut() {
                *a = *a * s;
            }
        }
    }

    /// SHA-256 over names, shapes and the little-endian f64 values.
    pub fn content_hash(&self) -> String {
        let mut bytes = Vec::new();
        for (k, t) in &self.tensors {
            bytes.extend_from_slice(k.as_bytes());
            for &d in t.shape() {
                bytes.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                bytes.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
            }
        }
        crate::seed::sha256_hex(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::Variant;

    #[test]
    fn init_is_deterministic_and_shapes_match() {
        for v in Variant::ALL {
            let cfg = ModelConfig::new(v);
            let a = ParamSet::<f64>::init(&cfg, 3).unwrap();
            let b = ParamSet::<f64>::init(&cfg, 3).unwrap();
            assert_eq!(a, b);
            a.check_layout(&model_layout(&cfg)).unwrap();
            assert_ne!(a, ParamSet::<f64>::init(&cfg, 4).unwrap());
        }
    }

    #[test]
    fn emotion_branch_init_is_variant_independent() {
        let a = ParamSet::<f64>::init(&ModelConfig::new(Variant::MotionOnly), 9).unwrap();
        let b = ParamSet::<f64>::init(&ModelConfig::new(Variant::MotionPlusRgbPatch), 9).unwrap();
        for (name, t) in a.iter().filter(|(n, _)| n.starts_with(EMOTION_ENCODER)) {
            assert_eq!(b.get(name).unwrap(), t);
        }
    }

    #[test]
    fn embeddings_are_truncated() {
        let p = ParamSet::<f64>::init(&ModelConfig::new(Variant::MotionPlusRgbPatch), 1).unwrap();
        let pos = p.get("texture_encoder.pos_embed").unwrap();
        assert!(pos.data().iter().all(|v| v.abs() <= 2.0 * EMBED_INIT_STD));
        let gain = p.get("texture_encoder.block0.ln1.gain").unwrap();
        assert!(gain.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn from_tensors_rejects_wrong_shapes() {
        let cfg = ModelConfig::new(Variant::DualMotion);
        let p = ParamSet::<f64>::init(&cfg, 1).unwrap();
        let mut map = p.clone().into_map();
        map.insert("emotion_head.bias".into(), Tensor::zeros(&[4]));
        assert!(matches!(
            ParamSet::from_tensors(&cfg, map),
            Err(ModelError::ShapeMismatch { .. })
        ));
        let mut map = p.clone().into_map();
        map.insert("extra".into(), Tensor::zeros(&[1]));
        assert!(matches!(ParamSet::from_tensors(&cfg, map), Err(ModelError::UnknownParam(_))));
        let mut map = p.into_map();
        map.remove("fusion_head.weight");
        assert!(matches!(ParamSet::from_tensors(&cfg, map), Err(ModelError::MissingParam(_))));
    }
}
