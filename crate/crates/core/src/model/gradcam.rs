use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::flowcore::{write_pgm, GrayFrame};
use crate::scalar::Scalar;

use super::config::{ModelConfig, EMOTION_CLASSES, ETHNIC_CLASSES};
use super::graph::Graph;
use super::network::{record_forward, Bound, ModelInput};
use super::params::ParamSet;
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Emotion encoder grid, scored by the fused head when present.
    Emotion,
    /// Ethnic convolutional encoder grid, scored by the ethnicity head.
    Ethnic,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Emotion => "emotion",
            Branch::Ethnic => "ethnic",
        }
    }
}

/// Class attribution over the final convolutional grid and its bilinear
/// upsampling to the input resolution, both normalized to a maximum of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMap {
    pub class: usize,
    pub branch: Branch,
    pub grid_width: usize,
    pub grid_height: usize,
    pub grid: Vec<f64>,
    pub width: usize,
    pub height: usize,
    pub overlay: Vec<f64>,
}

/// Sidecar record for an exported map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationRecord {
    pub file: String,
    pub class: usize,
    pub branch: Branch,
    /// `(x, y)` of the overlay maximum.
    pub argmax: (usize, usize),
}

fn normalize(v: &mut [f64]) {
    let m = v.iter().copied().fold(0.0, f64::max);
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
}

fn argmax_xy(v: &[f64], width: usize) -> (usize, usize) {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    (best % width, best / width)
}

/// Pixel-center aligned bilinear resize with edge clamping.
fn upsample(grid: &[f64], gw: usize, gh: usize, w: usize, h: usize) -> Vec<f64> {
    let coord = |o: usize, out: usize, inp: usize| {
        let s = ((o as f64 + 0.5) * inp as f64 / out as f64 - 0.5).clamp(0.0, (inp - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(inp - 1);
        (i0, i1, s - i0 as f64)
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1, fy) = coord(y, h, gh);
        for x in 0..w {
            let (x0, x1, fx) = coord(x, w, gw);
            let top = grid[y0 * gw + x0] * (1.0 - fx) + grid[y0 * gw + x1] * fx;
            let bot = grid[y1 * gw + x0] * (1.0 - fx) + grid[y1 * gw + x1] * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

impl ActivationMap {
    pub fn argmax(&self) -> (usize, usize) {
        argmax_xy(&self.overlay, self.width)
    }

    pub fn grid_argmax(&self) -> (usize, usize) {
        argmax_xy(&self.grid, self.grid_width)
    }

    pub fn is_zero(&self) -> bool {
        self.overlay.iter().all(|&v| v == 0.0)
    }

    /// Writes the overlay as an 8-bit PGM and returns its sidecar record.
    pub fn export(&self, path: &Path) -> Result<ActivationRecord, ModelError> {
        let frame = GrayFrame::new(self.width, self.height, self.overlay.clone())
            .map_err(|e| ModelError::Checkpoint(format!("activation map: {e}")))?;
        write_pgm(&frame, path).map_err(|e| match e {
            crate::flowcore::FlowError::Io { path, source } => ModelError::Io { path, source },
            other => ModelError::Checkpoint(other.to_string()),
        })?;
        Ok(ActivationRecord {
            file: path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
            class: self.class,
            branch: self.branch,
            argmax: self.argmax(),
        })
    }
}

/// Grad-CAM of `class` on `branch`: channel weights are the spatial means of
/// the class-score gradient at the final post-ReLU grid; the map is the
/// rectified weighted channel sum.
pub fn gradcam<T: Scalar>(
    params: &ParamSet<T>,
    cfg: &ModelConfig,
    input: &ModelInput<T>,
    class: usize,
    branch: Branch,
) -> Result<ActivationMap, ModelError> {
    let mut g = Graph::new();
    let p = Bound::new(&mut g, params);
    let t = record_forward(&mut g, &p, cfg, input)?;
    let (grid, score, classes) = match branch {
        Branch::Emotion => (t.emotion_grid, t.fused.unwrap_or(t.emotion), EMOTION_CLASSES),
        Branch::Ethnic => {
            let grid = t.ethnic_grid.ok_or_else(|| {
                ModelError::UnsupportedBranch(format!("{} has no convolutional ethnic branch", cfg.variant))
            })?;
            (grid, t.ethnic.expect("ethnic grid implies ethnic head"), ETHNIC_CLASSES)
        }
    };
    if class >= classes {
        return Err(ModelError::TargetOutOfRange { target: class, classes });
    }
    let mut seed = vec![T::zero(); classes];
    seed[class] = T::one();
    let grads = g.backward_from(score, seed);
    let shape = g.value(grid).shape().to_vec();
    let (c, gh, gw) = (shape[0], shape[1], shape[2]);
    let hw = gh * gw;
    let a: Vec<f64> = g.value(grid).data().iter().map(|v| v.to_f64_lossy()).collect();
    let d: Vec<f64> = match grads.get(grid) {
        Some(d) => d.iter().map(|v| v.to_f64_lossy()).collect(),
        None => vec![0.0; c * hw],
    };
    let mut map = vec![0.0; hw];
    for k in 0..c {
        let alpha = d[k * hw..(k + 1) * hw].iter().sum::<f64>() / hw as f64;
        for (m, &ak) in map.iter_mut().zip(&a[k * hw..(k + 1) * hw]) {
            *m += alpha * ak;
        }
    }
    map.iter_mut().for_each(|m| *m = m.max(0.0));
    normalize(&mut map);
    let (h, w) = (input.flow.shape()[1], input.flow.shape()[2]);
    let mut overlay = upsample(&map, gw, gh, w, h);
    normalize(&mut overlay);
    Ok(ActivationMap {
        class,
        branch,
        grid_width: gw,
        grid_height: gh,
        grid: map,
        width: w,
        height: h,
        overlay,
    })
}
