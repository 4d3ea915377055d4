use crate::scalar::Scalar;

use super::FlowField;

/// Symmetric strain tensor `½(∇u + ∇uᵀ)` per pixel, plus its magnitude
/// `sqrt(exx² + eyy² + 2·exy²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainMap<T> {
    width: usize,
    height: usize,
    pub exx: Vec<T>,
    pub eyy: Vec<T>,
    pub exy: Vec<T>,
    pub magnitude: Vec<T>,
}

impl<T: Scalar> StrainMap<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Derivative of `f` along one axis: central difference in the interior,
/// one-sided at the two ends, zero for a single-sample axis.
fn axis_derivative<T: Scalar>(f: impl Fn(usize) -> T, n: usize, i: usize) -> T {
    if n < 2 {
        T::zero()
    } else if i == 0 {
        f(1) - f(0)
    } else if i == n - 1 {
        f(n - 1) - f(n - 2)
    } else {
        (f(i + 1) - f(i - 1)) * T::lit(0.5)
    }
}

pub fn compute_strain<T: Scalar>(flow: &FlowField<T>) -> StrainMap<T> {
    let (w, h) = flow.dims();
    let (u, v) = (flow.u(), flow.v());
    let n = w * h;
    let mut exx = Vec::with_capacity(n);
    let mut eyy = Vec::with_capacity(n);
    let mut exy = Vec::with_capacity(n);
    let mut magnitude = Vec::with_capacity(n);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    for y in 0..h {
        for x in 0..w {
            let du_dx = axis_derivative(|k| u[y * w + k], w, x);
            let du_dy = axis_derivative(|k| u[k * w + x], h, y);
            let dv_dx = axis_derivative(|k| v[y * w + k], w, x);
            let dv_dy = axis_derivative(|k| v[k * w + x], h, y);
            let sxy = half * (du_dy + dv_dx);
            exx.push(du_dx);
            eyy.push(dv_dy);
            exy.push(sxy);
            magnitude.push((du_dx * du_dx + dv_dy * dv_dy + two * sxy * sxy).sqrt());
        }
    }
    StrainMap {
        width: w,
        height: h,
        exx,
        eyy,
        exy,
        magnitude,
    }
}
