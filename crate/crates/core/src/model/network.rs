//! Forward pass of the dual-branch network, recorded on a [`Graph`].

use std::collections::BTreeMap;

use crate::flowcore::{OpticalFlowImage, RgbFrame};
use crate::scalar::Scalar;

use super::config::{EncoderConfig, ModelConfig, PatchEncoderConfig, Variant};
use super::graph::{Graph, Var};
use super::params::{ParamSet, EMOTION_ENCODER, ETHNIC_ENCODER, TEXTURE_ENCODER};
use super::tensor::Tensor;
use super::ModelError;

/// One network input: the `[3, H, W]` flow image and, for RGB variants, the
/// `[3, H, W]` apex frame.
///
/// The constructors center their sources so that a static pixel is zero:
/// each flow-image channel is shifted by its normalized zero-motion level and
/// RGB values by 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput<T> {
    pub flow: Tensor<T>,
    pub rgb: Option<Tensor<T>>,
}

impl<T: Scalar> ModelInput<T> {
    pub fn new(flow: Tensor<T>, rgb: Option<Tensor<T>>) -> Self {
        Self { flow, rgb }
    }

    pub fn from_flow_image(image: &OpticalFlowImage<T>) -> Self {
        let n = image.width() * image.height();
        let mut data = image.to_chw();
        for (c, plane) in data.chunks_exact_mut(n).enumerate() {
            let zero = T::lit(image.normalization[c].zero_level());
            plane.iter_mut().for_each(|v| *v = *v - zero);
        }
        Self {
            flow: Tensor::new(vec![3, image.height(), image.width()], data),
            rgb: None,
        }
    }

    pub fn with_rgb(mut self, frame: &RgbFrame<T>) -> Self {
        self.rgb = Some(rgb_tensor(frame));
        self
    }
}

/// `[3, H, W]` tensor of an RGB frame, centered at 0.5.
pub fn rgb_tensor<T: Scalar>(frame: &RgbFrame<T>) -> Tensor<T> {
    let mut data = Vec::with_capacity(3 * frame.width() * frame.height());
    let half = T::lit(0.5);
    for c in 0..3 {
        data.extend(frame.plane(c).iter().map(|&v| v - half));
    }
    Tensor::new(vec![3, frame.height(), frame.width()], data)
}

/// Logits of one forward pass. `ethnic` and `fused` are absent for
/// `motion_only`.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits<T> {
    pub emotion: Vec<T>,
    pub ethnic: Option<Vec<T>>,
    pub fused: Option<Vec<T>>,
}

impl<T: Scalar> Logits<T> {
    /// Emotion prediction: the fused head when present, else the emotion head.
    pub fn predicted_emotion(&self) -> usize {
        argmax(self.fused.as_deref().unwrap_or(&self.emotion))
    }
}

pub(crate) fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Parameter leaves bound into a graph.
pub(crate) struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub(crate) fn new<T: Scalar>(g: &mut Graph<T>, params: &ParamSet<T>) -> Self {
        Self {
            vars: params.iter().map(|(k, t)| (k.to_string(), g.leaf(t.clone()))).collect(),
        }
    }

    pub(crate) fn var(&self, name: &str) -> Result<Var, ModelError> {
        self.vars.get(name).copied().ok_or_else(|| ModelError::MissingParam(name.to_string()))
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, &v)| (k.as_str(), v))
    }

    fn affine<T: Scalar>(&self, g: &mut Graph<T>, name: &str, x: Var) -> Result<Var, ModelError> {
        let w = self.var(&format!("{name}.weight"))?;
        let b = self.var(&format!("{name}.bias"))?;
        Ok(g.linear(x, w, b))
    }

    fn norm<T: Scalar>(&self, g: &mut Graph<T>, name: &str, x: Var) -> Result<Var, ModelError> {
        let gain = self.var(&format!("{name}.gain"))?;
        let b = self.var(&format!("{name}.bias"))?;
        Ok(g.layer_norm_rows(x, gain, b))
    }
}

/// Nodes of interest in a recorded forward pass.
pub(crate) struct Trace {
    pub emotion_grid: Var,
    pub ethnic_grid: Option<Var>,
    pub emotion: Var,
    pub ethnic: Option<Var>,
    pub fused: Option<Var>,
}

/// Convolutional branch: returns (final feature grid, embedding).
pub(crate) fn conv_branch<T: Scalar>(
    g: &mut Graph<T>,
    p: &Bound,
    prefix: &str,
    cfg: &EncoderConfig,
    input: &Tensor<T>,
) -> Result<(Var, Var), ModelError> {
    let s = input.shape();
    if s.len() != 3 || s[0] != cfg.input_channels {
        return Err(ModelError::ShapeMismatch {
            what: format!("{prefix} input"),
            expected: vec![cfg.input_channels, 0, 0],
            found: s.to_vec(),
        });
    }
    if s[1] < cfg.kernel || s[2] < cfg.kernel {
        return Err(ModelError::ShapeMismatch {
            what: format!("{prefix} input smaller than kernel"),
            expected: vec![cfg.input_channels, cfg.kernel, cfg.kernel],
            found: s.to_vec(),
        });
    }
    let mut x = g.leaf(input.clone());
    let pad = cfg.kernel / 2;
    for (i, &stride) in cfg.strides.iter().enumerate() {
        let w = p.var(&format!("{prefix}.stage{i}.weight"))?;
        let b = p.var(&format!("{prefix}.stage{i}.bias"))?;
        let c = g.conv2d(x, w, b, stride, pad);
        x = g.relu(c);
    }
    let pooled = g.global_avg_pool(x);
    let f = p.affine(g, &format!("{prefix}.proj"), pooled)?;
    Ok((x, f))
}

/// `[3, H, W]` image to `[patches, 3·p·p]`, patches in row-major grid order,
/// each flattened channel-major.
pub fn patchify<T: Scalar>(image: &Tensor<T>, patch: usize) -> Result<Tensor<T>, ModelError> {
    let s = image.shape();
    if s.len() != 3 || s[0] != 3 || patch == 0 || !s[1].is_multiple_of(patch) || !s[2].is_multiple_of(patch) {
        return Err(ModelError::ShapeMismatch {
            what: format!("image for {patch}-pixel patches"),
            expected: vec![3, patch, patch],
            found: s.to_vec(),
        });
    }
    let (h, w) = (s[1], s[2]);
    let (ph, pw) = (h / patch, w / patch);
    let d = image.data();
    let mut out = Vec::with_capacity(3 * h * w);
    for py in 0..ph {
        for px in 0..pw {
            for c in 0..3 {
                for dy in 0..patch {
                    let row = c * h * w + (py * patch + dy) * w + px * patch;
                    out.extend_from_slice(&d[row..row + patch]);
                }
            }
        }
    }
    Ok(Tensor::new(vec![ph * pw, 3 * patch * patch], out))
}

/// Multi-head self-attention over `[N, D]` tokens. Returns the output and
/// the per-head attention matrices.
pub(crate) fn attention<T: Scalar>(
    g: &mut Graph<T>,
    p: &Bound,
    prefix: &str,
    heads: usize,
    x: Var,
) -> Result<(Var, Vec<Var>), ModelError> {
    let d = g.value(x).shape()[1];
    let dh = d / heads;
    let q = p.affine(g, &format!("{prefix}.q"), x)?;
    let k = p.affine(g, &format!("{prefix}.k"), x)?;
    let v = p.affine(g, &format!("{prefix}.v"), x)?;
    let scale = T::one() / T::from_usize_lossy(dh).sqrt();
    let mut outs = Vec::with_capacity(heads);
    let mut maps = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = g.slice_cols(q, h * dh, dh);
        let kh = g.slice_cols(k, h * dh, dh);
        let vh = g.slice_cols(v, h * dh, dh);
        let scores = g.matmul(qh, kh, true);
        let scores = g.scale(scores, scale);
        let a = g.softmax_rows(scores);
        maps.push(a);
        outs.push(g.matmul(a, vh, false));
    }
    let cat = g.concat_last(&outs);
    Ok((p.affine(g, &format!("{prefix}.out"), cat)?, maps))
}

/// Patch transformer branch: returns (embedding, attention maps of every block).
pub(crate) fn patch_branch<T: Scalar>(
    g: &mut Graph<T>,
    p: &Bound,
    prefix: &str,
    cfg: &PatchEncoderConfig,
    image: &Tensor<T>,
) -> Result<(Var, Vec<Var>), ModelError> {
    let s = image.shape();
    if s != [3, cfg.image_size, cfg.image_size] {
        return Err(ModelError::ShapeMismatch {
            what: format!("{prefix} input"),
            expected: vec![3, cfg.image_size, cfg.image_size],
            found: s.to_vec(),
        });
    }
    let patches = g.leaf(patchify(image, cfg.patch)?);
    let tokens = p.affine(g, &format!("{prefix}.patch_embed"), patches)?;
    let pos = p.var(&format!("{prefix}.pos_embed"))?;
    let mut x = g.add(tokens, pos);
    let mut maps = Vec::new();
    for b in 0..cfg.blocks {
        let bp = format!("{prefix}.block{b}");
        let h = p.norm(g, &format!("{bp}.ln1"), x)?;
        let (a, m) = attention(g, p, &format!("{bp}.attn"), cfg.heads, h)?;
        maps.extend(m);
        x = g.add(x, a);
        let h = p.norm(g, &format!("{bp}.ln2"), x)?;
        let h = p.affine(g, &format!("{bp}.mlp.fc1"), h)?;
        let h = g.gelu(h);
        let h = p.affine(g, &format!("{bp}.mlp.fc2"), h)?;
        x = g.add(x, h);
    }
    let x = p.norm(g, &format!("{prefix}.ln_f"), x)?;
    let pooled = g.mean_rows(x);
    Ok((p.affine(g, &format!("{prefix}.proj"), pooled)?, maps))
}

/// Records the full forward pass for one input.
pub(crate) fn record_forward<T: Scalar>(
    g: &mut Graph<T>,
    p: &Bound,
    cfg: &ModelConfig,
    input: &ModelInput<T>,
) -> Result<Trace, ModelError> {
    let (emotion_grid, f_emo) = conv_branch(g, p, EMOTION_ENCODER, &cfg.encoder, &input.flow)?;
    let emotion = p.affine(g, "emotion_head", f_emo)?;
    let (ethnic_grid, f_eth) = match cfg.variant {
        Variant::MotionOnly => {
            return Ok(Trace {
                emotion_grid,
                ethnic_grid: None,
                emotion,
                ethnic: None,
                fused: None,
            })
        }
        Variant::DualMotion => {
            let (grid, f) = conv_branch(g, p, ETHNIC_ENCODER, &cfg.encoder, &input.flow)?;
            (Some(grid), f)
        }
        Variant::MotionPlusRgbConv => {
            let rgb = input.rgb.as_ref().ok_or(ModelError::MissingRgb(cfg.variant))?;
            let (grid, f) = conv_branch(g, p, ETHNIC_ENCODER, &cfg.encoder, rgb)?;
            (Some(grid), f)
        }
        Variant::MotionPlusRgbPatch => {
            let rgb = input.rgb.as_ref().ok_or(ModelError::MissingRgb(cfg.variant))?;
            (None, patch_branch(g, p, TEXTURE_ENCODER, &cfg.patch, rgb)?.0)
        }
    };
    let ethnic = p.affine(g, "ethnic_head", f_eth)?;
    let merged = g.concat_last(&[f_emo, f_eth]);
    let fused = p.affine(g, "fusion_head", merged)?;
    Ok(Trace {
        emotion_grid,
        ethnic_grid,
        emotion,
        ethnic: Some(ethnic),
        fused: Some(fused),
    })
}

/// Emotion/ethnicity/fused logits for one input.
pub fn forward<T: Scalar>(params: &ParamSet<T>, cfg: &ModelConfig, input: &ModelInput<T>) -> Result<Logits<T>, ModelError> {
    let mut g = Graph::new();
    let p = Bound::new(&mut g, params);
    let t = record_forward(&mut g, &p, cfg, input)?;
    let read = |v: Var| g.value(v).data().to_vec();
    Ok(Logits {
        emotion: read(t.emotion),
        ethnic: t.ethnic.map(read),
        fused: t.fused.map(read),
    })
}

/// Emotion-branch embedding of a flow image (length `E`).
pub fn encode_motion<T: Scalar>(params: &ParamSet<T>, cfg: &EncoderConfig, flow: &Tensor<T>) -> Result<Vec<T>, ModelError> {
    encode_conv(params, EMOTION_ENCODER, cfg, flow)
}

pub(crate) fn encode_conv<T: Scalar>(
    params: &ParamSet<T>,
    prefix: &str,
    cfg: &EncoderConfig,
    input: &Tensor<T>,
) -> Result<Vec<T>, ModelError> {
    let mut g = Graph::new();
    let p = bind_prefix(&mut g, params, prefix);
    let (_, f) = conv_branch(&mut g, &p, prefix, cfg, input)?;
    Ok(g.value(f).data().to_vec())
}

/// Texture-branch embedding of an apex RGB frame (length `E`).
pub fn encode_texture_patches<T: Scalar>(
    params: &ParamSet<T>,
    cfg: &PatchEncoderConfig,
    rgb: &Tensor<T>,
) -> Result<Vec<T>, ModelError> {
    cfg.validate()?;
    let mut g = Graph::new();
    let p = bind_prefix(&mut g, params, TEXTURE_ENCODER);
    let (f, _) = patch_branch(&mut g, &p, TEXTURE_ENCODER, cfg, rgb)?;
    Ok(g.value(f).data().to_vec())
}

/// Per-head attention matrices (`[patches, patches]`, row-stochastic) of
/// every block, in block then head order.
pub fn attention_maps<T: Scalar>(
    params: &ParamSet<T>,
    cfg: &PatchEncoderConfig,
    rgb: &Tensor<T>,
) -> Result<Vec<Tensor<T>>, ModelError> {
    cfg.validate()?;
    let mut g = Graph::new();
    let p = bind_prefix(&mut g, params, TEXTURE_ENCODER);
    let (_, maps) = patch_branch(&mut g, &p, TEXTURE_ENCODER, cfg, rgb)?;
    Ok(maps.into_iter().map(|m| g.value(m).clone()).collect())
}

/// Concatenates (emotion, ethnicity) embeddings and applies the fusion head.
pub fn fuse_and_classify<T: Scalar>(params: &ParamSet<T>, f_emotion: &[T], f_ethnic: &[T]) -> Result<Vec<T>, ModelError> {
    if f_emotion.len() != f_ethnic.len() {
        return Err(ModelError::ShapeMismatch {
            what: "fusion inputs".into(),
            expected: vec![f_emotion.len()],
            found: vec![f_ethnic.len()],
        });
    }
    let mut g = Graph::new();
    let p = bind_prefix(&mut g, params, "fusion_head");
    let w = p.var("fusion_head.weight")?;
    let expected = vec![g.value(w).shape()[0], 2 * f_emotion.len()];
    if g.value(w).shape() != expected.as_slice() {
        return Err(ModelError::ShapeMismatch {
            what: "fusion_head.weight".into(),
            expected,
            found: g.value(w).shape().to_vec(),
        });
    }
    let a = g.leaf(Tensor::from_vec(f_emotion.to_vec()));
    let b = g.leaf(Tensor::from_vec(f_ethnic.to_vec()));
    let merged = g.concat_last(&[a, b]);
    let out = p.affine(&mut g, "fusion_head", merged)?;
    Ok(g.value(out).data().to_vec())
}

fn bind_prefix<T: Scalar>(g: &mut Graph<T>, params: &ParamSet<T>, prefix: &str) -> Bound {
    let dotted = format!("{prefix}.");
    Bound {
        vars: params
            .iter()
            .filter(|(k, _)| k.starts_with(&dotted))
            .map(|(k, t)| (k.to_string(), g.leaf(t.clone())))
            .collect(),
    }
}
