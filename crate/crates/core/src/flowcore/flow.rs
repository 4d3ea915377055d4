//! Coarse-to-fine Horn–Schunck optical flow with per-level warping.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::{FlowError, GrayFrame};

/// Intensities are rescaled from `[0, 1]` to `[0, INTENSITY_RANGE]` before
/// solving, so `smoothness_alpha` has its conventional 8-bit magnitude.
const INTENSITY_RANGE: f64 = 255.0;
const MIN_LEVEL_SIDE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub smoothness_alpha: f64,
    /// Jacobi iterations per warp at each pyramid level.
    pub iterations: usize,
    pub pyramid_levels: usize,
    pub pyramid_scale: f64,
    /// Start the coarsest level from the zero field.
    pub zero_init: bool,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            smoothness_alpha: 15.0,
            iterations: 200,
            pyramid_levels: 3,
            pyramid_scale: 0.5,
            zero_init: true,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: &str| Err(FlowError::InvalidParams(m.to_string()));
        if !(self.smoothness_alpha > 0.0 && self.smoothness_alpha.is_finite()) {
            return bad("smoothness_alpha must be > 0");
        }
        if self.iterations < 1 {
            return bad("iterations must be >= 1");
        }
        if self.pyramid_levels < 1 {
            return bad("pyramid_levels must be >= 1");
        }
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return bad("pyramid_scale must lie in (0, 1)");
        }
        if !self.zero_init {
            return bad("only zero initialization is supported");
        }
        Ok(())
    }
}

/// Per-pixel displacement from onset to apex, in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T> {
    width: usize,
    height: usize,
    u: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> FlowField<T> {
    pub fn new(width: usize, height: usize, u: Vec<T>, v: Vec<T>) -> Result<Self, FlowError> {
        if width == 0 || height == 0 {
            return Err(FlowError::ZeroSized);
        }
        if u.len() != width * height || v.len() != width * height {
            return Err(FlowError::Malformed("flow component length mismatch".into()));
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(FlowError::NonFinite {
                stage: "flow field",
                level: 0,
            });
        }
        Ok(Self {
            width,
            height,
            u,
            v,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> (T, T),
    ) -> Result<Self, FlowError> {
        let mut u = Vec::with_capacity(width * height);
        let mut v = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                u.push(a);
                v.push(b);
            }
        }
        Self::new(width, height, u, v)
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

    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn v(&self) -> &[T] {
        &self.v
    }

    pub fn at(&self, x: usize, y: usize) -> (T, T) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }
}

#[derive(Clone)]
struct Plane<T> {
    w: usize,
    h: usize,
    d: Vec<T>,
}

impl<T: Scalar> Plane<T> {
    fn zeros(w: usize, h: usize) -> Self {
        Self {
            w,
            h,
            d: vec![T::zero(); w * h],
        }
    }

    #[inline]
    fn at(&self, x: isize, y: isize) -> T {
        let x = x.clamp(0, self.w as isize - 1) as usize;
        let y = y.clamp(0, self.h as isize - 1) as usize;
        self.d[y * self.w + x]
    }

    /// Bilinear sample with edge replication.
    fn sample(&self, x: T, y: T) -> T {
        let max_x = T::from_usize_lossy(self.w - 1);
        let max_y = T::from_usize_lossy(self.h - 1);
        let x = x.max(T::zero()).min(max_x);
        let y = y.max(T::zero()).min(max_y);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0.to_isize().unwrap_or(0), y0.to_isize().unwrap_or(0));
        let a = self.at(xi, yi);
        let b = self.at(xi + 1, yi);
        let c = self.at(xi, yi + 1);
        let d = self.at(xi + 1, yi + 1);
        let one = T::one();
        (one - fy) * ((one - fx) * a + fx * b) + fy * ((one - fx) * c + fx * d)
    }

    /// Separable binomial blur `[1 4 6 4 1] / 16` with edge replication.
    fn blur(&self) -> Self {
        let k = [1.0, 4.0, 6.0, 4.0, 1.0].map(|v| T::lit(v / 16.0));
        let mut tmp = Self::zeros(self.w, self.h);
        for y in 0..self.h {
            for x in 0..self.w {
                let mut s = T::zero();
                for (j, &kw) in k.iter().enumerate() {
                    s = s + kw * self.at(x as isize + j as isize - 2, y as isize);
                }
                tmp.d[y * self.w + x] = s;
            }
        }
        let mut out = Self::zeros(self.w, self.h);
        for y in 0..self.h {
            for x in 0..self.w {
                let mut s = T::zero();
                for (j, &kw) in k.iter().enumerate() {
                    s = s + kw * tmp.at(x as isize, y as isize + j as isize - 2);
                }
                out.d[y * self.w + x] = s;
            }
        }
        out
    }

    /// Pixel-center aligned bilinear resize.
    fn resize(&self, w: usize, h: usize) -> Self {
        let sx = T::from_usize_lossy(self.w) / T::from_usize_lossy(w);
        let sy = T::from_usize_lossy(self.h) / T::from_usize_lossy(h);
        let half = T::lit(0.5);
        let mut out = Self::zeros(w, h);
        for y in 0..h {
            let fy = (T::from_usize_lossy(y) + half) * sy - half;
            for x in 0..w {
                let fx = (T::from_usize_lossy(x) + half) * sx - half;
                out.d[y * w + x] = self.sample(fx, fy);
            }
        }
        out
    }

    fn all_finite(&self) -> bool {
        self.d.iter().all(|v| v.is_finite())
    }
}

fn check_finite<T: Scalar>(p: &Plane<T>, stage: &'static str, level: usize) -> Result<(), FlowError> {
    if p.all_finite() {
        Ok(())
    } else {
        Err(FlowError::NonFinite { stage, level })
    }
}

fn pyramid<T: Scalar>(base: Plane<T>, levels: usize, scale: f64) -> Vec<Plane<T>> {
    let mut out = vec![base];
    for l in 1..levels {
        let f = scale.powi(l as i32);
        let prev = out.last().expect("pyramid has a base level");
        let w = ((out[0].w as f64) * f).round() as usize;
        let h = ((out[0].h as f64) * f).round() as usize;
        if w < MIN_LEVEL_SIDE || h < MIN_LEVEL_SIDE {
            break;
        }
        let next = prev.blur().resize(w, h);
        out.push(next);
    }
    out
}

/// Estimates dense flow such that `apex(x + u, y + v) ≈ onset(x, y)`.
///
/// Each pyramid level warps the apex frame by the current estimate, then runs
/// Jacobi iterations of the Horn–Schunck update on the total flow, with
/// neighbourhood averages taken over the 3x3 stencil (1/6 edge, 1/12 corner).
/// The result does not depend on the rayon thread count.
pub fn estimate_flow<T: Scalar>(
    onset: &GrayFrame<T>,
    apex: &GrayFrame<T>,
    params: &FlowParams,
) -> Result<FlowField<T>, FlowError> {
    params.validate()?;
    if onset.dims() != apex.dims() {
        return Err(FlowError::DimensionMismatch {
            left: onset.dims(),
            right: apex.dims(),
        });
    }
    let (w, h) = onset.dims();
    if w < MIN_LEVEL_SIDE || h < MIN_LEVEL_SIDE {
        return Err(FlowError::FrameTooSmall {
            width: w,
            height: h,
        });
    }
    let range = T::lit(INTENSITY_RANGE);
    let to_plane = |f: &GrayFrame<T>| Plane {
        w,
        h,
        d: f.values().iter().map(|&v| v * range).collect(),
    };
    let p0 = pyramid(to_plane(onset), params.pyramid_levels, params.pyramid_scale);
    let p1 = pyramid(to_plane(apex), params.pyramid_levels, params.pyramid_scale);
    let alpha2 = T::lit(params.smoothness_alpha * params.smoothness_alpha);

    let coarsest = p0.len() - 1;
    let mut u = Plane::zeros(p0[coarsest].w, p0[coarsest].h);
    let mut v = u.clone();
    for level in (0..p0.len()).rev() {
        let (i0, i1) = (&p0[level], &p1[level]);
        if u.w != i0.w || u.h != i0.h {
            let rx = T::from_usize_lossy(i0.w) / T::from_usize_lossy(u.w);
            let ry = T::from_usize_lossy(i0.h) / T::from_usize_lossy(u.h);
            u = u.resize(i0.w, i0.h);
            v = v.resize(i0.w, i0.h);
            u.d.iter_mut().for_each(|x| *x = *x * rx);
            v.d.iter_mut().for_each(|x| *x = *x * ry);
        }
        solve_level(i0, i1, &mut u, &mut v, alpha2, params.iterations);
        check_finite(&u, "horizontal flow", level)?;
        check_finite(&v, "vertical flow", level)?;
    }
    FlowField::new(w, h, u.d, v.d)
}

fn solve_level<T: Scalar>(
    i0: &Plane<T>,
    i1: &Plane<T>,
    u: &mut Plane<T>,
    v: &mut Plane<T>,
    alpha2: T,
    iterations: usize,
) {
    let (w, h) = (i0.w, i0.h);
    let mut warped = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            warped.d[i] = i1.sample(
                T::from_usize_lossy(x) + u.d[i],
                T::from_usize_lossy(y) + v.d[i],
            );
        }
    }
    let half = T::lit(0.5);
    let n = w * h;
    let mut ix = vec![T::zero(); n];
    let mut iy = vec![T::zero(); n];
    let mut it = vec![T::zero(); n];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let dx0 = (i0.at(x + 1, y) - i0.at(x - 1, y)) * half;
            let dx1 = (warped.at(x + 1, y) - warped.at(x - 1, y)) * half;
            let dy0 = (i0.at(x, y + 1) - i0.at(x, y - 1)) * half;
            let dy1 = (warped.at(x, y + 1) - warped.at(x, y - 1)) * half;
            ix[i] = (dx0 + dx1) * half;
            iy[i] = (dy0 + dy1) * half;
            it[i] = warped.d[i] - i0.d[i];
        }
    }
    let u0 = u.d.clone();
    let v0 = v.d.clone();
    let mut nu = u.clone();
    let mut nv = v.clone();
    let edge = T::lit(1.0 / 6.0);
    let corner = T::lit(1.0 / 12.0);
    for _ in 0..iterations {
        let (cu, cv) = (&*u, &*v);
        nu.d.par_chunks_mut(w)
            .zip(nv.d.par_chunks_mut(w))
            .enumerate()
            .for_each(|(y, (row_u, row_v))| {
                let y = y as isize;
                for x in 0..w {
                    let xi = x as isize;
                    let avg = |p: &Plane<T>| {
                        edge * (p.at(xi - 1, y) + p.at(xi + 1, y) + p.at(xi, y - 1) + p.at(xi, y + 1))
                            + corner
                                * (p.at(xi - 1, y - 1)
                                    + p.at(xi + 1, y - 1)
                                    + p.at(xi - 1, y + 1)
                                    + p.at(xi + 1, y + 1))
                    };
                    let i = y as usize * w + x;
                    let ub = avg(cu);
                    let vb = avg(cv);
                    let r = ix[i] * (ub - u0[i]) + iy[i] * (vb - v0[i]) + it[i];
                    let den = alpha2 + ix[i] * ix[i] + iy[i] * iy[i];
                    row_u[x] = ub - ix[i] * r / den;
                    row_v[x] = vb - iy[i] * r / den;
                }
            });
        std::mem::swap(u, &mut nu);
        std::mem::swap(v, &mut nv);
    }
}
