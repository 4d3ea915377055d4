//! `OFI1` binary container for optical flow images.
//!
//! Layout (little-endian): magic `OFI1`, `u32` height, `u32` width, three
//! row-major `f32` planes (fx, fy, strain), then six `f32` values holding
//! `(lo, hi)` for each channel.

use std::fs;
use std::path::Path;

use crate::io_util::write_atomic;
use crate::scalar::Scalar;

use super::{ChannelNorm, FlowError, OpticalFlowImage};

pub const OFI_MAGIC: [u8; 4] = *b"OFI1";

pub fn encode_flow_image<T: Scalar>(img: &OpticalFlowImage<T>) -> Result<Vec<u8>, FlowError> {
    let (h, w) = (img.height(), img.width());
    let too_big = || FlowError::DimensionOverflow {
        height: u32::try_from(h).unwrap_or(u32::MAX),
        width: u32::try_from(w).unwrap_or(u32::MAX),
    };
    let h32 = u32::try_from(h).map_err(|_| too_big())?;
    let w32 = u32::try_from(w).map_err(|_| too_big())?;
    let mut out = Vec::with_capacity(12 + 12 * w * h + 24);
    out.extend_from_slice(&OFI_MAGIC);
    out.extend_from_slice(&h32.to_le_bytes());
    out.extend_from_slice(&w32.to_le_bytes());
    for c in 0..3 {
        for &v in img.channel(c) {
            out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
        }
    }
    for n in &img.normalization {
        out.extend_from_slice(&n.lo.to_le_bytes());
        out.extend_from_slice(&n.hi.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_flow_image<T: Scalar>(bytes: &[u8]) -> Result<OpticalFlowImage<T>, FlowError> {
    if bytes.len() < 12 {
        if bytes.len() >= 4 && bytes[..4] != OFI_MAGIC {
            return Err(FlowError::BadMagic {
                found: [bytes[0], bytes[1], bytes[2], bytes[3]],
            });
        }
        return Err(FlowError::Truncated {
            expected: 12,
            found: bytes.len(),
        });
    }
    let magic = [bytes[0], bytes[1], bytes[2], bytes[3]];
    if magic != OFI_MAGIC {
        return Err(FlowError::BadMagic { found: magic });
    }
    let word = |at: usize| u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
    let (height, width) = (word(4), word(8));
    let overflow = FlowError::DimensionOverflow { height, width };
    let pixels = (height as usize)
        .checked_mul(width as usize)
        .ok_or(overflow)?;
    let expected = pixels
        .checked_mul(12)
        .and_then(|n| n.checked_add(12 + 24))
        .ok_or(FlowError::DimensionOverflow { height, width })?;
    if bytes.len() != expected {
        return Err(FlowError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let float = |at: usize| f32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
    let mut planes: [Vec<T>; 3] = Default::default();
    for (c, plane) in planes.iter_mut().enumerate() {
        let base = 12 + c * pixels * 4;
        *plane = (0..pixels)
            .map(|i| T::lit(f64::from(float(base + 4 * i))))
            .collect();
    }
    let tail = 12 + 3 * pixels * 4;
    let norm = |c: usize| ChannelNorm {
        lo: float(tail + 8 * c),
        hi: float(tail + 8 * c + 4),
    };
    OpticalFlowImage::from_planes(
        width as usize,
        height as usize,
        planes,
        [norm(0), norm(1), norm(2)],
    )
}

pub fn write_flow_image<T: Scalar>(
    img: &OpticalFlowImage<T>,
    path: impl AsRef<Path>,
) -> Result<(), FlowError> {
    let path = path.as_ref();
    let bytes = encode_flow_image(img)?;
    write_atomic(path, &bytes).map_err(|source| FlowError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_flow_image<T: Scalar>(path: impl AsRef<Path>) -> Result<OpticalFlowImage<T>, FlowError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| FlowError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_flow_image(&bytes)
}
