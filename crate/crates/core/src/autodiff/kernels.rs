//! Plain-slice numeric kernels behind the tape operations.

use crate::error::{Error, Result};

/// `[m×k] · [k×n]`.
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            for (o, &bpj) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += aip * bpj;
            }
        }
    }
    out
}

/// `dst [m×k] += g [m×n] · bᵀ` where `b` is `[k×n]`.
pub(crate) fn matmul_nt_acc(g: &[f64], b: &[f64], m: usize, n: usize, k: usize, dst: &mut [f64]) {
    for i in 0..m {
        let gi = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let bp = &b[p * n..(p + 1) * n];
            dst[i * k + p] += gi.iter().zip(bp).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `dst [k×n] += aᵀ · g` where `a` is `[m×k]` and `g` is `[m×n]`.
pub(crate) fn matmul_tn_acc(a: &[f64], g: &[f64], m: usize, k: usize, n: usize, dst: &mut [f64]) {
    for i in 0..m {
        let gi = &g[i * n..(i + 1) * n];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            for (d, &gv) in dst[p * n..(p + 1) * n].iter_mut().zip(gi) {
                *d += aip * gv;
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log_sum_exp(row) - row[label]`, computed on max-shifted values so the
/// result keeps its precision when the logits are large.
pub(crate) fn negative_log_softmax(row: &[f64], label: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() - (row[label] - max)
}

pub(crate) fn softmax_rows(v: &[f64], rows: usize, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * k);
    for row in v.chunks(k).take(rows) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = out.len();
        out.extend(row.iter().map(|x| (x - max).exp()));
        let total: f64 = out[start..].iter().sum();
        out[start..].iter_mut().for_each(|x| *x /= total);
    }
    out
}

/// Shapes of a (possibly batched) 2-D cross-correlation.
#[derive(Clone, Debug)]
pub(crate) struct ConvGeometry {
    pub batch: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(input: &[usize], kernels: &[usize], stride: usize, padding: usize) -> Result<Self> {
        let (batch, c_in, h, w) = match *input {
            [c, h, w] => (1, c, h, w),
            [b, c, h, w] => (b, c, h, w),
            _ => {
                return Err(Error::Shape {
                    op: "conv2d",
                    shape: input.to_vec(),
                    reason: "expected [C×H×W] or [B×C×H×W] input".into(),
                })
            }
        };
        let [c_out, kc, kh, kw] = *kernels else {
            return Err(Error::Shape {
                op: "conv2d",
                shape: kernels.to_vec(),
                reason: "expected [C_out×C_in×kH×kW] kernels".into(),
            });
        };
        if kc != c_in {
            return Err(Error::dim("conv2d", input, kernels));
        }
        if stride == 0 {
            return Err(Error::Contract("conv2d stride must be positive".into()));
        }
        if kh > h + 2 * padding || kw > w + 2 * padding {
            return Err(Error::Shape {
                op: "conv2d",
                shape: kernels.to_vec(),
                reason: format!(
                    "kernel larger than padded input {:?} (padding {padding})",
                    input
                ),
            });
        }
        Ok(Self {
            batch,
            c_in,
            h,
            w,
            c_out,
            kh,
            kw,
            stride,
            padding,
            out_h: (h + 2 * padding - kh) / stride + 1,
            out_w: (w + 2 * padding - kw) / stride + 1,
        })
    }

    pub fn output_shape(&self, batched: bool) -> Vec<usize> {
        if batched {
            vec![self.batch, self.c_out, self.out_h, self.out_w]
        } else {
            vec![self.c_out, self.out_h, self.out_w]
        }
    }

    /// Output indices `o` with `0 <= o*stride + offset - padding < extent`.
    fn valid_range(&self, offset: usize, extent: usize, out: usize) -> std::ops::Range<usize> {
        let s = self.stride as isize;
        let shift = offset as isize - self.padding as isize;
        // smallest o with o*s + shift >= 0
        let lo = if shift >= 0 {
            0
        } else {
            ((-shift) + s - 1) / s
        };
        // largest o with o*s + shift <= extent-1
        let hi_num = extent as isize - 1 - shift;
        let hi = if hi_num < 0 { -1 } else { hi_num / s };
        let lo = lo as usize;
        let hi = ((hi + 1).max(0) as usize).min(out);
        lo..hi.max(lo)
    }

    /// Visits every (output offset, input offset, kernel offset) triple
    /// contributing to the correlation, one contiguous output row at a time.
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize, usize)) {
        let in_plane = self.h * self.w;
        let out_plane = self.out_h * self.out_w;
        for b in 0..self.batch {
            for o in 0..self.c_out {
                let out_base = (b * self.c_out + o) * out_plane;
                for c in 0..self.c_in {
                    let in_base = (b * self.c_in + c) * in_plane;
                    for ky in 0..self.kh {
                        let ys = self.valid_range(ky, self.h, self.out_h);
                        for kx in 0..self.kw {
                            let k_idx = ((o * self.c_in + c) * self.kh + ky) * self.kw + kx;
                            let xs = self.valid_range(kx, self.w, self.out_w);
                            if xs.is_empty() {
                                continue;
                            }
                            for y in ys.clone() {
                                let iy = y * self.stride + ky - self.padding;
                                let ix0 = xs.start * self.stride + kx - self.padding;
                                f(
                                    out_base + y * self.out_w + xs.start,
                                    in_base + iy * self.w + ix0,
                                    k_idx,
                                    xs.len(),
                                );
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_forward(geom: &ConvGeometry, input: &[f64], kernels: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; geom.batch * geom.c_out * geom.out_h * geom.out_w];
    let s = geom.stride;
    geom.for_each_tap(|out_i, in_i, k_i, len| {
        let w = kernels[k_i];
        for (j, o) in out[out_i..out_i + len].iter_mut().enumerate() {
            *o += w * input[in_i + j * s];
        }
    });
    out
}

pub(crate) fn conv2d_backward_input(
    geom: &ConvGeometry,
    g: &[f64],
    kernels: &[f64],
    dst: &mut [f64],
) {
    let s = geom.stride;
    geom.for_each_tap(|out_i, in_i, k_i, len| {
        let w = kernels[k_i];
        for (j, gv) in g[out_i..out_i + len].iter().enumerate() {
            dst[in_i + j * s] += w * gv;
        }
    });
}

pub(crate) fn conv2d_backward_kernels(
    geom: &ConvGeometry,
    g: &[f64],
    input: &[f64],
    dst: &mut [f64],
) {
    let s = geom.stride;
    geom.for_each_tap(|out_i, in_i, k_i, len| {
        let mut acc = 0.0;
        for (j, gv) in g[out_i..out_i + len].iter().enumerate() {
            acc += input[in_i + j * s] * gv;
        }
        dst[k_i] += acc;
    });
}

/// Returns pooled values and, for each output, the flat index of the input
/// element that won (first maximum in row-major window order).
pub(crate) fn max_pool2d(
    input: &[f64],
    planes: usize,
    h: usize,
    w: usize,
    size: usize,
) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h / size, w / size);
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut argmax = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let base = p * h * w;
        for y in 0..oh {
            for x in 0..ow {
                let mut best = base + y * size * w + x * size;
                for dy in 0..size {
                    for dx in 0..size {
                        let idx = base + (y * size + dy) * w + x * size + dx;
                        if input[idx] > input[best] {
                            best = idx;
                        }
                    }
                }
                out.push(input[best]);
                argmax.push(best);
            }
        }
    }
    (out, argmax)
}
