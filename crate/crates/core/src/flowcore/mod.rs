//! Dense motion features between an onset and an apex frame: Horn–Schunck
//! optical flow, optical strain, and the normalized 3-channel flow image.

mod flow;
mod frame;
mod image;
mod ofi;
mod pnm;
mod strain;

use std::path::PathBuf;

use thiserror::Error;

use crate::error::ErrorKind;

pub use flow::{estimate_flow, FlowField, FlowParams};
pub use frame::{GrayFrame, RgbFrame};
pub use image::{assemble_flow_image, ChannelNorm, OpticalFlowImage, FLOW_CLIP, STRAIN_CLIP};
pub use ofi::{decode_flow_image, encode_flow_image, read_flow_image, write_flow_image, OFI_MAGIC};
pub use pnm::{load_frame, load_rgb_frame, write_pgm, write_ppm};
pub use strain::{compute_strain, StrainMap};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed image: {0}")]
    Malformed(String),
    #[error("zero-sized image")]
    ZeroSized,
    #[error("frame value at index {index} is {value}, expected a finite value in [0, 1]")]
    InvalidValue { index: usize, value: f64 },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("frame {width}x{height} is smaller than the 8x8 minimum for flow estimation")]
    FrameTooSmall { width: usize, height: usize },
    #[error("invalid flow parameters: {0}")]
    InvalidParams(String),
    #[error("non-finite value in {stage} at pyramid level {level}")]
    NonFinite { stage: &'static str, level: usize },
    #[error("bad magic {found:?}, expected \"OFI1\"")]
    BadMagic { found: [u8; 4] },
    #[error("truncated flow image: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("flow image dimensions {height}x{width} overflow")]
    DimensionOverflow { height: u32, width: u32 },
}

impl FlowError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            FlowError::InvalidParams(_) => ErrorKind::Config,
            FlowError::NonFinite { .. } => ErrorKind::Internal,
            _ => ErrorKind::Data,
        }
    }
}
