use serde::{Deserialize, Serialize};

use super::ModelError;

/// Convolutional encoder: one `kernel × kernel` convolution + ReLU per stage,
/// global average pooling, then an affine projection to `feature_dim`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub input_channels: usize,
    pub widths: Vec<usize>,
    pub kernel: usize,
    pub strides: Vec<usize>,
    pub feature_dim: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            input_channels: 3,
            widths: vec![8, 16, 16, 32],
            kernel: 3,
            strides: vec![2, 2, 2, 1],
            feature_dim: 32,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.input_channels == 0 {
            return bad("input_channels must be positive");
        }
        if self.widths.is_empty() {
            return bad("encoder needs at least one stage");
        }
        if self.widths.len() != self.strides.len() {
            return bad("widths and strides must have one entry per stage");
        }
        if self.widths.contains(&0) || self.strides.contains(&0) {
            return bad("stage widths and strides must be positive");
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return bad("kernel size must be odd");
        }
        if self.feature_dim < 2 {
            return bad("feature_dim must be at least 2");
        }
        Ok(())
    }

    /// Spatial size of the final feature grid for an `h × w` input.
    pub fn grid_dims(&self, h: usize, w: usize) -> (usize, usize) {
        let pad = self.kernel / 2;
        self.strides.iter().fold((h, w), |(h, w), &s| {
            ((h + 2 * pad - self.kernel) / s + 1, (w + 2 * pad - self.kernel) / s + 1)
        })
    }
}

/// Patch transformer: non-overlapping patches, linear embedding plus learned
/// positional embedding, pre-norm self-attention blocks, mean over patches,
/// and a projection to the motion encoder's feature width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchEncoderConfig {
    pub image_size: usize,
    pub patch: usize,
    pub embed_dim: usize,
    pub blocks: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
}

impl Default for PatchEncoderConfig {
    fn default() -> Self {
        Self {
            image_size: 64,
            patch: 8,
            embed_dim: 16,
            blocks: 2,
            heads: 2,
            mlp_ratio: 2,
        }
    }
}

impl PatchEncoderConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.patch == 0 || self.image_size == 0 || !self.image_size.is_multiple_of(self.patch) {
            return bad("image side must be a positive multiple of the patch size");
        }
        if self.heads == 0 || self.embed_dim == 0 || !self.embed_dim.is_multiple_of(self.heads) {
            return bad("embed_dim must be a positive multiple of heads");
        }
        if self.blocks == 0 || self.mlp_ratio == 0 {
            return bad("blocks and mlp_ratio must be positive");
        }
        Ok(())
    }

    pub fn num_patches(&self) -> usize {
        (self.image_size / self.patch).pow(2)
    }

    pub fn patch_len(&self) -> usize {
        3 * self.patch * self.patch
    }
}

/// Benchmark variants: where the ethnic branch gets its input, if anywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Emotion branch only; no ethnic context.
    MotionOnly,
    /// Ethnic branch is a second convolutional encoder on the flow image.
    DualMotion,
    /// Ethnic branch is a convolutional encoder on the apex RGB frame.
    MotionPlusRgbConv,
    /// Ethnic branch is the patch transformer on the apex RGB frame.
    MotionPlusRgbPatch,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::MotionOnly,
        Variant::DualMotion,
        Variant::MotionPlusRgbConv,
        Variant::MotionPlusRgbPatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::MotionOnly => "motion_only",
            Variant::DualMotion => "dual_motion",
            Variant::MotionPlusRgbConv => "motion_plus_rgb_conv",
            Variant::MotionPlusRgbPatch => "motion_plus_rgb_patch",
        }
    }

    pub fn has_ethnic_context(self) -> bool {
        self != Variant::MotionOnly
    }

    pub fn needs_rgb(self) -> bool {
        matches!(self, Variant::MotionPlusRgbConv | Variant::MotionPlusRgbPatch)
    }

    pub fn uses_patch_encoder(self) -> bool {
        self == Variant::MotionPlusRgbPatch
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| ModelError::InvalidConfig(format!("unknown variant {s:?}")))
    }
}

/// Full network description. The emotion and ethnic convolutional branches
/// share `encoder`'s shape but never its weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub encoder: EncoderConfig,
    pub patch: PatchEncoderConfig,
}

impl ModelConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            encoder: EncoderConfig::default(),
            patch: PatchEncoderConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.encoder.validate()?;
        if self.variant.uses_patch_encoder() {
            self.patch.validate()?;
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.encoder.feature_dim
    }
}

pub const EMOTION_CLASSES: usize = 3;
pub const ETHNIC_CLASSES: usize = 2;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for v in Variant::ALL {
            ModelConfig::new(v).validate().unwrap();
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("resnet".parse::<Variant>().is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut e = EncoderConfig::default();
        e.feature_dim = 1;
        assert!(e.validate().is_err());
        let mut e = EncoderConfig::default();
        e.widths.clear();
        e.strides.clear();
        assert!(e.validate().is_err());
        let mut p = PatchEncoderConfig::default();
        p.image_size = 60;
        assert!(p.validate().is_err());
        let mut p = PatchEncoderConfig::default();
        p.heads = 3;
        assert!(p.validate().is_err());
    }

    #[test]
    fn patch_arithmetic() {
        let p = PatchEncoderConfig::default();
        assert_eq!(p.num_patches(), 64);
        assert_eq!(EncoderConfig::default().grid_dims(64, 64), (8, 8));
    }
}
