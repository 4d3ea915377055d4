//! Synthetic-warp fixtures shared by the flow tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// White noise blurred by a separable Gaussian (sigma in pixels), rescaled
/// into [0.1, 0.9].
pub fn smooth_texture(w: usize, h: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
    let r = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-r..=r).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let ksum: f64 = kernel.iter().sum();
    let clampi = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = (-r..=r)
                .map(|k| kernel[(k + r) as usize] * noise[y * w + clampi(x as isize + k, w)])
                .sum::<f64>()
                / ksum;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (-r..=r)
                .map(|k| kernel[(k + r) as usize] * tmp[clampi(y as isize + k, h) * w + x])
                .sum::<f64>()
                / ksum;
        }
    }
    let (lo, hi) = out.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    out.iter().map(|v| 0.1 + 0.8 * (v - lo) / (hi - lo)).collect()
}

/// apex(x, y) = onset(x - dx, y - dy), bilinear with edge replication.
pub fn translate(src: &[f64], w: usize, h: usize, dx: f64, dy: f64) -> Vec<f64> {
    let get = |x: isize, y: isize| src[y.clamp(0, h as isize - 1) as usize * w + x.clamp(0, w as isize - 1) as usize];
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let sx = x as f64 - dx;
            let sy = y as f64 - dy;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (xi, yi) = (x0 as isize, y0 as isize);
            out[y * w + x] = (1.0 - fy) * ((1.0 - fx) * get(xi, yi) + fx * get(xi + 1, yi))
                + fy * ((1.0 - fx) * get(xi, yi + 1) + fx * get(xi + 1, yi + 1));
        }
    }
    out
}
