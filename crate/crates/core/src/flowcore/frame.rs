use crate::scalar::Scalar;

use super::FlowError;

/// Single-channel luminance frame, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Scalar> GrayFrame<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self, FlowError> {
        if width == 0 || height == 0 {
            return Err(FlowError::ZeroSized);
        }
        if values.len() != width * height {
            return Err(FlowError::Malformed(format!(
                "{} values for a {width}x{height} frame",
                values.len()
            )));
        }
        if let Some((index, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < T::zero() || **v > T::one())
        {
            return Err(FlowError::InvalidValue {
                index,
                value: v.to_f64_lossy(),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self, FlowError> {
        Self::new(width, height, vec![T::zero(); width * height])
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self, FlowError> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }
}

/// Three-plane color frame (R, G, B), each plane row-major in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbFrame<T> {
    width: usize,
    height: usize,
    planes: [Vec<T>; 3],
}

impl<T: Scalar> RgbFrame<T> {
    pub fn new(width: usize, height: usize, planes: [Vec<T>; 3]) -> Result<Self, FlowError> {
        if width == 0 || height == 0 {
            return Err(FlowError::ZeroSized);
        }
        for plane in &planes {
            if plane.len() != width * height {
                return Err(FlowError::Malformed(format!(
                    "plane of {} values for a {width}x{height} frame",
                    plane.len()
                )));
            }
            if let Some((index, v)) = plane
                .iter()
                .enumerate()
                .find(|(_, v)| !v.is_finite() || **v < T::zero() || **v > T::one())
            {
                return Err(FlowError::InvalidValue {
                    index,
                    value: v.to_f64_lossy(),
                });
            }
        }
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn plane(&self, c: usize) -> &[T] {
        &self.planes[c]
    }

    /// Luminance `Y = 0.299 R + 0.587 G + 0.114 B`, clamped to `[0, 1]`.
    pub fn to_gray(&self) -> GrayFrame<T> {
        let (wr, wg, wb) = (T::lit(0.299), T::lit(0.587), T::lit(0.114));
        let values = (0..self.width * self.height)
            .map(|i| {
                (wr * self.planes[0][i] + wg * self.planes[1][i] + wb * self.planes[2][i])
                    .max(T::zero())
                    .min(T::one())
            })
            .collect();
        GrayFrame {
            width: self.width,
            height: self.height,
            values,
        }
    }

    pub fn from_gray(frame: &GrayFrame<T>) -> Self {
        let p = frame.values.clone();
        Self {
            width: frame.width,
            height: frame.height,
            planes: [p.clone(), p.clone(), p],
        }
    }
}
