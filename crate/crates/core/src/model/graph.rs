//! Minimal reverse-mode differentiation over tensors.
//!
//! A [`Graph`] records every operation with its forward value. Calling
//! [`Graph::backward`] walks the tape in reverse and accumulates exact
//! gradients for every node that the seed depends on.

use crate::scalar::Scalar;

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Conv2d {
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        pad: usize,
    },
    Relu(Var),
    Gelu(Var),
    GlobalAvgPool(Var),
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    MatMul {
        a: Var,
        b: Var,
        transpose_b: bool,
    },
    Add(Var, Var),
    Scale(Var, T),
    SliceCols {
        x: Var,
        start: usize,
        len: usize,
    },
    ConcatLast(Vec<Var>),
    SoftmaxRows(Var),
    LayerNormRows {
        x: Var,
        gain: Var,
        bias: Var,
    },
    MeanRows(Var),
    CrossEntropy {
        logits: Var,
        target: usize,
    },
    SumScalars(Vec<Var>),
}

struct Node<T> {
    op: Op<T>,
    value: Tensor<T>,
    /// Op-specific cache (convolution: patch matrix; layer norm: normalized
    /// input then inverse std per row).
    aux: Vec<T>,
}

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients indexed by [`Var`]; `None` where the seed does not depend on a node.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn rows_cols(shape: &[usize]) -> (usize, usize) {
    match shape {
        [d] => (1, *d),
        [n, d] => (*n, *d),
        _ => panic!("expected a 1-D or 2-D tensor, got shape {shape:?}"),
    }
}

/// Shapes of one convolution and the `[C·k·k, OH·OW]` patch-matrix layout.
struct ConvGeom {
    c: usize,
    h: usize,
    w: usize,
    o: usize,
    k: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: usize,
}

impl ConvGeom {
    fn new(xs: &[usize], ws: &[usize], stride: usize, pad: usize) -> Self {
        let (c, h, w) = (xs[0], xs[1], xs[2]);
        let (o, ci, k) = (ws[0], ws[1], ws[2]);
        assert_eq!(c, ci, "conv channel mismatch");
        Self {
            c,
            h,
            w,
            o,
            k,
            oh: (h + 2 * pad - k) / stride + 1,
            ow: (w + 2 * pad - k) / stride + 1,
            stride,
            pad,
        }
    }

    fn rows(&self) -> usize {
        self.c * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    /// Visits every in-bounds (patch-matrix index, input index) pair.
    fn for_each(&self, mut f: impl FnMut(usize, usize)) {
        let p = self.cols();
        for ic in 0..self.c {
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = ((ic * self.k + ky) * self.k + kx) * p;
                    for oy in 0..self.oh {
                        let iy = oy * self.stride + ky;
                        if iy < self.pad || iy - self.pad >= self.h {
                            continue;
                        }
                        let base = ic * self.h * self.w + (iy - self.pad) * self.w;
                        for ox in 0..self.ow {
                            let ix = ox * self.stride + kx;
                            if ix >= self.pad && ix - self.pad < self.w {
                                f(row + oy * self.ow + ox, base + ix - self.pad);
                            }
                        }
                    }
                }
            }
        }
    }

    fn im2col<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let mut cols = vec![T::zero(); self.rows() * self.cols()];
        self.for_each(|ci, xi| cols[ci] = x[xi]);
        cols
    }

    fn col2im<T: Scalar>(&self, cols: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.c * self.h * self.w];
        self.for_each(|ci, xi| x[xi] = x[xi] + cols[ci]);
        x
    }
}

const GELU_K: f64 = 0.044_715;

fn gelu<T: Scalar>(x: T) -> (T, T) {
    let c = T::lit((2.0 / std::f64::consts::PI).sqrt());
    let k = T::lit(GELU_K);
    let half = T::lit(0.5);
    let inner = c * (x + k * x * x * x);
    let t = inner.tanh();
    let y = half * x * (T::one() + t);
    let dy = half * (T::one() + t) + half * x * (T::one() - t * t) * c * (T::one() + T::lit(3.0) * k * x * x);
    (y, dy)
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>) -> Var {
        self.push_aux(op, value, Vec::new())
    }

    fn push_aux(&mut self, op: Op<T>, value: Tensor<T>, aux: Vec<T>) -> Var {
        self.nodes.push(Node { op, value, aux });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(Op::Leaf, t)
    }

    /// `[C, H, W]` input, `[O, C, k, k]` weight, `[O]` bias, zero padding.
    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, stride: usize, pad: usize) -> Var {
        let (xs, ws) = (self.value(input).shape(), self.value(weight).shape());
        let geom = ConvGeom::new(xs, ws, stride, pad);
        let cols = geom.im2col(self.value(input).data());
        let wt = self.value(weight).data();
        let b = self.value(bias).data();
        let (r, p) = (geom.rows(), geom.cols());
        let mut out = vec![T::zero(); geom.o * p];
        for (oc, orow) in out.chunks_exact_mut(p).enumerate() {
            orow.iter_mut().for_each(|v| *v = b[oc]);
            for (ri, crow) in cols.chunks_exact(p).enumerate() {
                let w = wt[oc * r + ri];
                for (o, &c) in orow.iter_mut().zip(crow) {
                    *o = *o + w * c;
                }
            }
        }
        self.push_aux(
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                pad,
            },
            Tensor::new(vec![geom.o, geom.oh, geom.ow], out),
            cols,
        )
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&a| a.max(T::zero())).collect());
        self.push(Op::Relu(x), out)
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&a| gelu(a).0).collect());
        self.push(Op::Gelu(x), out)
    }

    /// `[C, H, W] -> [C]`.
    pub fn global_avg_pool(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let (c, hw) = (v.shape()[0], v.shape()[1] * v.shape()[2]);
        let n = T::from_usize_lossy(hw);
        let out = (0..c)
            .map(|i| v.data()[i * hw..(i + 1) * hw].iter().copied().sum::<T>() / n)
            .collect();
        self.push(Op::GlobalAvgPool(x), Tensor::from_vec(out))
    }

    /// `x [N, in]` (or `[in]`), `w [out, in]`, `b [out]` → `[N, out]` (or `[out]`).
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xv = self.value(x);
        let (n, din) = rows_cols(xv.shape());
        let wv = self.value(w);
        let (dout, win) = (wv.shape()[0], wv.shape()[1]);
        assert_eq!(din, win, "linear input width mismatch");
        let bv = self.value(b).data();
        let mut out = Vec::with_capacity(n * dout);
        for r in 0..n {
            let xr = &xv.data()[r * din..(r + 1) * din];
            for o in 0..dout {
                let wr = &wv.data()[o * din..(o + 1) * din];
                let mut s = bv[o];
                for i in 0..din {
                    s = s + wr[i] * xr[i];
                }
                out.push(s);
            }
        }
        let shape = if xv.shape().len() == 1 { vec![dout] } else { vec![n, dout] };
        self.push(Op::Linear { x, w, b }, Tensor::new(shape, out))
    }

    /// `a [n, k] · b [k, m]`, or `a · bᵀ` with `b [m, k]` when `transpose_b`.
    pub fn matmul(&mut self, a: Var, b: Var, transpose_b: bool) -> Var {
        let (n, k) = rows_cols(self.value(a).shape());
        let (br, bc) = rows_cols(self.value(b).shape());
        let m = if transpose_b { br } else { bc };
        assert_eq!(if transpose_b { bc } else { br }, k, "matmul inner dimension mismatch");
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![T::zero(); n * m];
        for i in 0..n {
            for j in 0..m {
                let mut s = T::zero();
                for t in 0..k {
                    let bval = if transpose_b { bv[j * k + t] } else { bv[t * m + j] };
                    s = s + av[i * k + t] * bval;
                }
                out[i * m + j] = s;
            }
        }
        self.push(Op::MatMul { a, b, transpose_b }, Tensor::new(vec![n, m], out))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "add shape mismatch");
        let out = Tensor::new(
            av.shape().to_vec(),
            av.data().iter().zip(bv.data()).map(|(&x, &y)| x + y).collect(),
        );
        self.push(Op::Add(a, b), out)
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        let v = self.value(x);
        let out = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&a| a * s).collect());
        self.push(Op::Scale(x, s), out)
    }

    /// Columns `start..start + len` of a `[N, D]` tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let v = self.value(x);
        let (n, d) = rows_cols(v.shape());
        assert!(start + len <= d, "column slice out of range");
        let mut out = Vec::with_capacity(n * len);
        for r in 0..n {
            out.extend_from_slice(&v.data()[r * d + start..r * d + start + len]);
        }
        self.push(Op::SliceCols { x, start, len }, Tensor::new(vec![n, len], out))
    }

    /// Concatenation along the last axis of 1-D or 2-D tensors with equal row counts.
    pub fn concat_last(&mut self, parts: &[Var]) -> Var {
        let one_d = self.value(parts[0]).shape().len() == 1;
        let n = rows_cols(self.value(parts[0]).shape()).0;
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                let (pn, pd) = rows_cols(self.value(p).shape());
                assert_eq!(pn, n, "concat row mismatch");
                pd
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(n * total);
        for r in 0..n {
            for (&p, &d) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * d..(r + 1) * d]);
            }
        }
        let shape = if one_d { vec![total] } else { vec![n, total] };
        self.push(Op::ConcatLast(parts.to_vec()), Tensor::new(shape, out))
    }

    /// Row-wise softmax (max-subtracted).
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let (n, d) = rows_cols(v.shape());
        let mut out = Vec::with_capacity(n * d);
        for r in 0..n {
            out.extend(softmax(&v.data()[r * d..(r + 1) * d]));
        }
        self.push(Op::SoftmaxRows(x), Tensor::new(v.shape().to_vec(), out))
    }

    pub fn layer_norm_rows(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let eps = T::lit(1e-5);
        let v = self.value(x);
        let (n, d) = rows_cols(v.shape());
        let (g, b) = (self.value(gain).data(), self.value(bias).data());
        let dn = T::from_usize_lossy(d);
        let mut out = Vec::with_capacity(n * d);
        let mut xhat = Vec::with_capacity(n * d);
        let mut inv = Vec::with_capacity(n);
        for r in 0..n {
            let row = &v.data()[r * d..(r + 1) * d];
            let mean = row.iter().copied().sum::<T>() / dn;
            let var = row.iter().map(|&a| (a - mean) * (a - mean)).sum::<T>() / dn;
            let is = T::one() / (var + eps).sqrt();
            inv.push(is);
            for i in 0..d {
                let h = (row[i] - mean) * is;
                xhat.push(h);
                out.push(h * g[i] + b[i]);
            }
        }
        xhat.extend(inv);
        self.push_aux(Op::LayerNormRows { x, gain, bias }, Tensor::new(v.shape().to_vec(), out), xhat)
    }

    /// `[N, D] -> [D]`.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let (n, d) = rows_cols(v.shape());
        let nn = T::from_usize_lossy(n);
        let out = (0..d)
            .map(|j| (0..n).map(|r| v.data()[r * d + j]).sum::<T>() / nn)
            .collect();
        self.push(Op::MeanRows(x), Tensor::from_vec(out))
    }

    /// `-log softmax(logits)[target]` as a one-element tensor.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Var {
        let l = cce(self.value(logits).data(), target).expect("target validated by caller");
        self.push(Op::CrossEntropy { logits, target }, Tensor::from_vec(vec![l]))
    }

    /// Sum of one-element tensors, accumulated left to right.
    pub fn sum_scalars(&mut self, parts: &[Var]) -> Var {
        let mut s = T::zero();
        for &p in parts {
            s = s + self.value(p).data()[0];
        }
        self.push(Op::SumScalars(parts.to_vec()), Tensor::from_vec(vec![s]))
    }

    /// Gradients of a one-element node.
    pub fn backward(&self, root: Var) -> Gradients<T> {
        assert_eq!(self.value(root).len(), 1, "backward root must be a scalar");
        self.backward_from(root, vec![T::one()])
    }

    /// Gradients of `<seed, value(root)>`.
    pub fn backward_from(&self, root: Var, seed: Vec<T>) -> Gradients<T> {
        assert_eq!(seed.len(), self.value(root).len());
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(seed);
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, idx: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[idx];
        let acc = |grads: &mut [Option<Vec<T>>], v: Var, f: &mut dyn FnMut(&mut [T])| {
            let len = self.nodes[v.0].value.len();
            let slot = grads[v.0].get_or_insert_with(|| vec![T::zero(); len]);
            f(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
                pad,
            } => {
                let geom = ConvGeom::new(self.value(*input).shape(), self.value(*weight).shape(), *stride, *pad);
                let (r, p) = (geom.rows(), geom.cols());
                let cols = &node.aux;
                let wt = self.value(*weight).data();
                let mut gw = vec![T::zero(); geom.o * r];
                let mut gb = vec![T::zero(); geom.o];
                let mut gcols = vec![T::zero(); r * p];
                for (oc, grow) in g.chunks_exact(p).enumerate() {
                    gb[oc] = grow.iter().copied().sum();
                    for (ri, (crow, gcrow)) in cols.chunks_exact(p).zip(gcols.chunks_exact_mut(p)).enumerate() {
                        let mut acc = T::zero();
                        for (&gv, &c) in grow.iter().zip(crow) {
                            acc = acc + gv * c;
                        }
                        gw[oc * r + ri] = acc;
                        let w = wt[oc * r + ri];
                        for (gc, &gv) in gcrow.iter_mut().zip(grow) {
                            *gc = *gc + w * gv;
                        }
                    }
                }
                add_into(grads, self, *input, &geom.col2im(&gcols));
                add_into(grads, self, *weight, &gw);
                add_into(grads, self, *bias, &gb);
            }
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                acc(grads, *x, &mut |s| {
                    for i in 0..s.len() {
                        if xv[i] > T::zero() {
                            s[i] = s[i] + g[i];
                        }
                    }
                });
            }
            Op::Gelu(x) => {
                let xv = self.value(*x).data();
                acc(grads, *x, &mut |s| {
                    for i in 0..s.len() {
                        s[i] = s[i] + g[i] * gelu(xv[i]).1;
                    }
                });
            }
            Op::GlobalAvgPool(x) => {
                let xs = self.value(*x).shape();
                let hw = xs[1] * xs[2];
                let n = T::from_usize_lossy(hw);
                acc(grads, *x, &mut |s| {
                    for (i, v) in s.iter_mut().enumerate() {
                        *v = *v + g[i / hw] / n;
                    }
                });
            }
            Op::Linear { x, w, b } => {
                let xv = self.value(*x);
                let (n, din) = rows_cols(xv.shape());
                let wv = self.value(*w).data();
                let dout = self.value(*w).shape()[0];
                let mut gx = vec![T::zero(); n * din];
                let mut gw = vec![T::zero(); dout * din];
                let mut gb = vec![T::zero(); dout];
                for r in 0..n {
                    let xr = &xv.data()[r * din..(r + 1) * din];
                    for o in 0..dout {
                        let go = g[r * dout + o];
                        gb[o] = gb[o] + go;
                        for i in 0..din {
                            gw[o * din + i] = gw[o * din + i] + go * xr[i];
                            gx[r * din + i] = gx[r * din + i] + go * wv[o * din + i];
                        }
                    }
                }
                add_into(grads, self, *x, &gx);
                add_into(grads, self, *w, &gw);
                add_into(grads, self, *b, &gb);
            }
            Op::MatMul { a, b, transpose_b } => {
                let (n, k) = rows_cols(self.value(*a).shape());
                let m = node.value.shape()[1];
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                let mut ga = vec![T::zero(); n * k];
                let mut gb = vec![T::zero(); k * m];
                for i in 0..n {
                    for j in 0..m {
                        let go = g[i * m + j];
                        for t in 0..k {
                            let bi = if *transpose_b { j * k + t } else { t * m + j };
                            ga[i * k + t] = ga[i * k + t] + go * bv[bi];
                            gb[bi] = gb[bi] + go * av[i * k + t];
                        }
                    }
                }
                add_into(grads, self, *a, &ga);
                add_into(grads, self, *b, &gb);
            }
            Op::Add(a, b) => {
                add_into(grads, self, *a, g);
                add_into(grads, self, *b, g);
            }
            Op::Scale(x, s) => {
                let scaled: Vec<T> = g.iter().map(|&v| v * *s).collect();
                add_into(grads, self, *x, &scaled);
            }
            Op::SliceCols { x, start, len } => {
                let (n, d) = rows_cols(self.value(*x).shape());
                let (start, len) = (*start, *len);
                acc(grads, *x, &mut |s| {
                    for r in 0..n {
                        for j in 0..len {
                            s[r * d + start + j] = s[r * d + start + j] + g[r * len + j];
                        }
                    }
                });
            }
            Op::ConcatLast(parts) => {
                let (n, total) = rows_cols(node.value.shape());
                let mut offset = 0;
                for &p in parts {
                    let d = rows_cols(self.value(p).shape()).1;
                    acc(grads, p, &mut |s| {
                        for r in 0..n {
                            for j in 0..d {
                                s[r * d + j] = s[r * d + j] + g[r * total + offset + j];
                            }
                        }
                    });
                    offset += d;
                }
            }
            Op::SoftmaxRows(x) => {
                let (n, d) = rows_cols(node.value.shape());
                let y = node.value.data();
                acc(grads, *x, &mut |s| {
                    for r in 0..n {
                        let row = r * d..(r + 1) * d;
                        let dot: T = y[row.clone()].iter().zip(&g[row.clone()]).map(|(&a, &b)| a * b).sum();
                        for i in row {
                            s[i] = s[i] + y[i] * (g[i] - dot);
                        }
                    }
                });
            }
            Op::LayerNormRows { x, gain, bias } => {
                let (n, d) = rows_cols(node.value.shape());
                let xhat = &node.aux[..n * d];
                let inv = &node.aux[n * d..];
                let gv = self.value(*gain).data();
                let dn = T::from_usize_lossy(d);
                let mut gx = vec![T::zero(); n * d];
                let mut gg = vec![T::zero(); d];
                let mut gbias = vec![T::zero(); d];
                for r in 0..n {
                    let mut mean_dh = T::zero();
                    let mut mean_dh_xh = T::zero();
                    for i in 0..d {
                        let go = g[r * d + i];
                        gg[i] = gg[i] + go * xhat[r * d + i];
                        gbias[i] = gbias[i] + go;
                        let dh = go * gv[i];
                        mean_dh = mean_dh + dh;
                        mean_dh_xh = mean_dh_xh + dh * xhat[r * d + i];
                    }
                    mean_dh = mean_dh / dn;
                    mean_dh_xh = mean_dh_xh / dn;
                    for i in 0..d {
                        let dh = g[r * d + i] * gv[i];
                        gx[r * d + i] = inv[r] * (dh - mean_dh - xhat[r * d + i] * mean_dh_xh);
                    }
                }
                add_into(grads, self, *x, &gx);
                add_into(grads, self, *gain, &gg);
                add_into(grads, self, *bias, &gbias);
            }
            Op::MeanRows(x) => {
                let (n, d) = rows_cols(self.value(*x).shape());
                let nn = T::from_usize_lossy(n);
                acc(grads, *x, &mut |s| {
                    for r in 0..n {
                        for j in 0..d {
                            s[r * d + j] = s[r * d + j] + g[j] / nn;
                        }
                    }
                });
            }
            Op::CrossEntropy { logits, target } => {
                let p = softmax(self.value(*logits).data());
                acc(grads, *logits, &mut |s| {
                    for i in 0..s.len() {
                        let onehot = if i == *target { T::one() } else { T::zero() };
                        s[i] = s[i] + g[0] * (p[i] - onehot);
                    }
                });
            }
            Op::SumScalars(parts) => {
                for &p in parts {
                    add_into(grads, self, p, g);
                }
            }
        }
    }
}

fn add_into<T: Scalar>(grads: &mut [Option<Vec<T>>], graph: &Graph<T>, v: Var, delta: &[T]) {
    let slot = grads[v.0].get_or_insert_with(|| vec![T::zero(); graph.value(v).len()]);
    for (s, &d) in slot.iter_mut().zip(delta) {
        *s = *s + d;
    }
}

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Categorical cross-entropy `-log softmax(logits)[target]`, computed as
/// `logsumexp(logits - max) - (logits[target] - max)`.
pub fn cce<T: Scalar>(logits: &[T], target: usize) -> Result<T, super::ModelError> {
    if target >= logits.len() {
        return Err(super::ModelError::TargetOutOfRange {
            target,
            classes: logits.len(),
        });
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(super::ModelError::NonFinite {
            what: "logits".into(),
        });
    }
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&l| (l - m).exp()).sum::<T>().ln();
    Ok((lse - (logits[target] - m)).max(T::zero()))
}
