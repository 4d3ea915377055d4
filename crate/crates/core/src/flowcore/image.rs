use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::{FlowError, FlowField, StrainMap};

/// Clip range (pixels) applied to both flow channels.
pub const FLOW_CLIP: (f32, f32) = (-3.0, 3.0);
/// Clip range applied to the strain-magnitude channel.
pub const STRAIN_CLIP: (f32, f32) = (0.0, 0.5);

/// Affine normalization of one channel: `clamp(x, lo, hi)` mapped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelNorm {
    pub lo: f32,
    pub hi: f32,
}

impl ChannelNorm {
    fn apply<T: Scalar>(&self, x: T) -> (T, bool) {
        let lo = T::lit(f64::from(self.lo));
        let hi = T::lit(f64::from(self.hi));
        let clipped = x < lo || x > hi;
        ((x.max(lo).min(hi) - lo) / (hi - lo), clipped)
    }

    /// Normalized value of a zero measurement (no motion / no strain).
    pub fn zero_level(&self) -> f64 {
        self.apply(0.0f64).0
    }
}

/// The model input `(f_x, f_y, ε)`, each channel normalized to `[0, 1]`.
///
/// `clip_fraction` is a diagnostic produced by [`assemble_flow_image`]; it is
/// not part of the on-disk format and is ignored by equality.
#[derive(Debug, Clone)]
pub struct OpticalFlowImage<T> {
    width: usize,
    height: usize,
    pub channel_fx: Vec<T>,
    pub channel_fy: Vec<T>,
    pub channel_strain: Vec<T>,
    pub normalization: [ChannelNorm; 3],
    pub clip_fraction: Option<[f64; 3]>,
}

impl<T: Scalar> PartialEq for OpticalFlowImage<T> {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.channel_fx == other.channel_fx
            && self.channel_fy == other.channel_fy
            && self.channel_strain == other.channel_strain
            && self.normalization == other.normalization
    }
}

impl<T: Scalar> OpticalFlowImage<T> {
    /// Builds an image from already-normalized planes.
    pub fn from_planes(
        width: usize,
        height: usize,
        planes: [Vec<T>; 3],
        normalization: [ChannelNorm; 3],
    ) -> Result<Self, FlowError> {
        if width == 0 || height == 0 {
            return Err(FlowError::ZeroSized);
        }
        if planes.iter().any(|p| p.len() != width * height) {
            return Err(FlowError::Malformed("plane length does not match dimensions".into()));
        }
        let [channel_fx, channel_fy, channel_strain] = planes;
        Ok(Self {
            width,
            height,
            channel_fx,
            channel_fy,
            channel_strain,
            normalization,
            clip_fraction: None,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channel(&self, c: usize) -> &[T] {
        match c {
            0 => &self.channel_fx,
            1 => &self.channel_fy,
            2 => &self.channel_strain,
            _ => panic!("flow image has 3 channels, asked for {c}"),
        }
    }

    /// Channel-major `[3, H, W]` copy of the planes.
    pub fn to_chw(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(3 * self.width * self.height);
        out.extend_from_slice(&self.channel_fx);
        out.extend_from_slice(&self.channel_fy);
        out.extend_from_slice(&self.channel_strain);
        out
    }

    /// Channels that had any values clipped during normalization.
    pub fn clip_warnings(&self) -> Vec<&'static str> {
        let names = ["fx", "fy", "strain"];
        match self.clip_fraction {
            Some(f) => (0..3).filter(|&c| f[c] > 0.0).map(|c| names[c]).collect(),
            None => Vec::new(),
        }
    }

    pub fn convert<U: Scalar>(&self) -> OpticalFlowImage<U> {
        let conv = |p: &[T]| p.iter().map(|v| U::lit(v.to_f64_lossy())).collect();
        OpticalFlowImage {
            width: self.width,
            height: self.height,
            channel_fx: conv(&self.channel_fx),
            channel_fy: conv(&self.channel_fy),
            channel_strain: conv(&self.channel_strain),
            normalization: self.normalization,
            clip_fraction: self.clip_fraction,
        }
    }
}

/// Stacks `(u, v, strain magnitude)` and normalizes each channel: flow clipped
/// to [`FLOW_CLIP`], strain clipped to [`STRAIN_CLIP`], both mapped to `[0, 1]`.
pub fn assemble_flow_image<T: Scalar>(
    flow: &FlowField<T>,
    strain: &StrainMap<T>,
) -> Result<OpticalFlowImage<T>, FlowError> {
    if flow.dims() != strain.dims() {
        return Err(FlowError::DimensionMismatch {
            left: flow.dims(),
            right: strain.dims(),
        });
    }
    let flow_norm = ChannelNorm {
        lo: FLOW_CLIP.0,
        hi: FLOW_CLIP.1,
    };
    let strain_norm = ChannelNorm {
        lo: STRAIN_CLIP.0,
        hi: STRAIN_CLIP.1,
    };
    let norms = [flow_norm, flow_norm, strain_norm];
    let sources = [flow.u(), flow.v(), strain.magnitude.as_slice()];
    let n = flow.width() * flow.height();
    let mut planes: [Vec<T>; 3] = Default::default();
    let mut fractions = [0.0; 3];
    for c in 0..3 {
        let mut clipped = 0usize;
        planes[c] = sources[c]
            .iter()
            .map(|&x| {
                let (y, hit) = norms[c].apply(x);
                clipped += usize::from(hit);
                y
            })
            .collect();
        fractions[c] = clipped as f64 / n as f64;
    }
    let mut img = OpticalFlowImage::from_planes(flow.width(), flow.height(), planes, norms)?;
    img.clip_fraction = Some(fractions);
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowcore::compute_strain;

    fn image_for(u: f64, v: f64) -> OpticalFlowImage<f64> {
        let f = FlowField::from_fn(8, 8, |_, _| (u, v)).unwrap();
        assemble_flow_image(&f, &compute_strain(&f)).unwrap()
    }

    #[test]
    fn zero_flow_maps_to_midpoint() {
        let img = image_for(0.0, 0.0);
        assert!(img.channel_fx.iter().all(|&x| x == 0.5));
        assert!(img.channel_fy.iter().all(|&x| x == 0.5));
        assert!(img.channel_strain.iter().all(|&x| x == 0.0));
        assert!(img.clip_warnings().is_empty());
    }

    #[test]
    fn clip_boundary_and_clipping() {
        let img = image_for(3.0, 0.0);
        assert!(img.channel_fx.iter().all(|&x| x == 1.0));
        assert_eq!(img.clip_fraction.unwrap()[0], 0.0);
        let img = image_for(10.0, -10.0);
        assert!(img.channel_fx.iter().all(|&x| x == 1.0));
        assert!(img.channel_fy.iter().all(|&x| x == 0.0));
        assert_eq!(img.clip_fraction.unwrap()[0], 1.0);
        assert_eq!(img.clip_warnings(), vec!["fx", "fy"]);
    }

    #[test]
    fn dimension_mismatch() {
        let f = FlowField::from_fn(8, 8, |_, _| (0.0f64, 0.0)).unwrap();
        let g = FlowField::from_fn(9, 8, |_, _| (0.0f64, 0.0)).unwrap();
        assert!(matches!(
            assemble_flow_image(&f, &compute_strain(&g)),
            Err(FlowError::DimensionMismatch { .. })
        ));
    }
}
