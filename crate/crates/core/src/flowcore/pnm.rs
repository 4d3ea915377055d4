//! Netpbm raster I/O (P2/P5 graymaps, P3/P6 pixmaps).

use std::fs;
use std::path::Path;

use crate::io_util::write_atomic;
use crate::scalar::Scalar;

use super::{FlowError, GrayFrame, RgbFrame};

struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    maxval: u32,
    samples: Vec<u32>,
}

fn io_err(path: &Path, source: std::io::Error) -> FlowError {
    FlowError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, FlowError> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(FlowError::Malformed(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| FlowError::Malformed(format!("bad {what}")))
    }
}

fn parse(bytes: &[u8]) -> Result<Raster, FlowError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(FlowError::UnsupportedFormat(
            "not a portable anymap (missing 'P' magic)".into(),
        ));
    }
    let (channels, binary) = match bytes[1] {
        b'2' => (1, false),
        b'5' => (1, true),
        b'3' => (3, false),
        b'6' => (3, true),
        other => {
            return Err(FlowError::UnsupportedFormat(format!(
                "netpbm variant P{}",
                other as char
            )))
        }
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")? as usize;
    let height = h.number("height")? as usize;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(FlowError::ZeroSized);
    }
    if maxval == 0 || maxval > 65535 || (channels == 3 && maxval > 255) {
        return Err(FlowError::UnsupportedFormat(format!(
            "maxval {maxval} (pixmaps must be 8-bit)"
        )));
    }
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| FlowError::Malformed("image dimensions overflow".into()))?;
    let mut samples = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        h.pos += 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let data = bytes.get(h.pos..h.pos + need).ok_or_else(|| {
            FlowError::Malformed(format!(
                "raster truncated: need {need} bytes, have {}",
                bytes.len().saturating_sub(h.pos)
            ))
        })?;
        if wide {
            samples.extend(
                data.chunks_exact(2)
                    .map(|c| u32::from(u16::from_be_bytes([c[0], c[1]]))),
            );
        } else {
            samples.extend(data.iter().map(|&b| u32::from(b)));
        }
    } else {
        for _ in 0..count {
            samples.push(h.number("sample")?);
        }
    }
    if let Some(s) = samples.iter().find(|&&s| s > maxval) {
        return Err(FlowError::Malformed(format!(
            "sample {s} exceeds maxval {maxval}"
        )));
    }
    Ok(Raster {
        width,
        height,
        channels,
        maxval,
        samples,
    })
}

fn read_raster(path: &Path) -> Result<Raster, FlowError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    parse(&bytes)
}

fn scale<T: Scalar>(sample: u32, maxval: u32) -> T {
    T::lit(f64::from(sample) / f64::from(maxval))
}

/// Loads a frame as luminance in `[0, 1]`. Pixmaps are converted with
/// `Y = 0.299 R + 0.587 G + 0.114 B`.
pub fn load_frame<T: Scalar>(path: impl AsRef<Path>) -> Result<GrayFrame<T>, FlowError> {
    let r = read_raster(path.as_ref())?;
    if r.channels == 1 {
        let values = r.samples.iter().map(|&s| scale(s, r.maxval)).collect();
        GrayFrame::new(r.width, r.height, values)
    } else {
        Ok(rgb_from_raster(&r)?.to_gray())
    }
}

/// Loads a frame as RGB; graymaps are replicated into all three planes.
pub fn load_rgb_frame<T: Scalar>(path: impl AsRef<Path>) -> Result<RgbFrame<T>, FlowError> {
    let r = read_raster(path.as_ref())?;
    if r.channels == 1 {
        let values = r.samples.iter().map(|&s| scale(s, r.maxval)).collect();
        Ok(RgbFrame::from_gray(&GrayFrame::new(r.width, r.height, values)?))
    } else {
        rgb_from_raster(&r)
    }
}

fn rgb_from_raster<T: Scalar>(r: &Raster) -> Result<RgbFrame<T>, FlowError> {
    let mut planes: [Vec<T>; 3] = Default::default();
    for px in r.samples.chunks_exact(3) {
        for c in 0..3 {
            planes[c].push(scale(px[c], r.maxval));
        }
    }
    RgbFrame::new(r.width, r.height, planes)
}

fn quantize<T: Scalar>(v: T) -> u8 {
    (v.to_f64_lossy().clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes an 8-bit binary graymap (P5).
pub fn write_pgm<T: Scalar>(frame: &GrayFrame<T>, path: impl AsRef<Path>) -> Result<(), FlowError> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.values().iter().map(|&v| quantize(v)));
    write_atomic(path, &out).map_err(|e| io_err(path, e))
}

/// Writes an 8-bit binary pixmap (P6).
pub fn write_ppm<T: Scalar>(frame: &RgbFrame<T>, path: impl AsRef<Path>) -> Result<(), FlowError> {
    let path = path.as_ref();
    let mut out = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    for i in 0..frame.width() * frame.height() {
        for c in 0..3 {
            out.push(quantize(frame.plane(c)[i]));
        }
    }
    write_atomic(path, &out).map_err(|e| io_err(path, e))
}
