//! Forward and backward kernels for the operations recorded on the tape.
//!
//! Work is split over output planes (or weight slabs) with rayon. Each output
//! element is accumulated by a single task in a fixed loop order, so results
//! do not depend on the number of threads.

use rayon::prelude::*;

use crate::error::NnError;
use crate::tensor::{Scalar, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ConvGeom {
    n: usize,
    ci: usize,
    h: usize,
    w: usize,
    co: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn new(x: [usize; 4], weight: [usize; 4], stride: usize, pad: usize) -> Result<Self, NnError> {
        let [n, ci, h, w] = x;
        let [co, wci, kh, kw] = weight;
        if wci != ci {
            return Err(NnError::Shape(format!(
                "conv weight expects {wci} input channels, input has {ci}"
            )));
        }
        if kh != kw || kh == 0 {
            return Err(NnError::Shape(format!("conv kernel must be square, got {kh}x{kw}")));
        }
        if stride == 0 {
            return Err(NnError::Shape("conv stride must be positive".into()));
        }
        if h + 2 * pad < kh || w + 2 * pad < kw {
            return Err(NnError::Shape(format!(
                "conv kernel {kh} larger than padded input {h}x{w} (pad {pad})"
            )));
        }
        Ok(Self {
            n,
            ci,
            h,
            w,
            co,
            k: kh,
            stride,
            pad,
            oh: (h + 2 * pad - kh) / stride + 1,
            ow: (w + 2 * pad - kw) / stride + 1,
        })
    }

    /// Input row for output row `oy` and kernel row `ky`, if inside the image.
    fn in_row(&self, oy: usize, ky: usize) -> Option<usize> {
        (oy * self.stride + ky).checked_sub(self.pad).filter(|&iy| iy < self.h)
    }

    /// Range of output columns whose input column for tap `kx` is inside the image.
    fn col_range(&self, kx: usize) -> (usize, usize) {
        let lo = if self.pad > kx {
            (self.pad - kx).div_ceil(self.stride)
        } else {
            0
        };
        let hi = if self.w + self.pad > kx {
            ((self.w - 1 + self.pad - kx) / self.stride + 1).min(self.ow)
        } else {
            0
        };
        (lo, hi.max(lo))
    }

    fn in_col(&self, ox: usize, kx: usize) -> usize {
        ox * self.stride + kx - self.pad
    }
}

fn check_bias<T>(bias: Option<&[T]>, co: usize) -> Result<(), NnError> {
    match bias {
        Some(b) if b.len() != co => Err(NnError::Shape(format!(
            "bias has {} entries for {co} output channels",
            b.len()
        ))),
        _ => Ok(()),
    }
}

/// 2-D cross-correlation with zero padding. Weight layout `(c_out, c_in, k, k)`.
pub fn conv2d<T: Scalar>(
    x: &Tensor4<T>,
    weight: &Tensor4<T>,
    bias: Option<&[T]>,
    stride: usize,
    pad: usize,
) -> Result<Tensor4<T>, NnError> {
    let g = ConvGeom::new(x.shape(), weight.shape(), stride, pad)?;
    check_bias(bias, g.co)?;
    let mut out = Tensor4::zeros([g.n, g.co, g.oh, g.ow]);
    let plane = g.oh * g.ow;
    if plane == 0 {
        return Ok(out);
    }
    out.data.par_chunks_mut(plane).enumerate().for_each(|(idx, dst)| {
        let (ni, o) = (idx / g.co, idx % g.co);
        if let Some(b) = bias {
            dst.fill(b[o]);
        }
        for c in 0..g.ci {
            let src = x.plane(ni, c);
            for ky in 0..g.k {
                for kx in 0..g.k {
                    let wv = weight.data[((o * g.ci + c) * g.k + ky) * g.k + kx];
                    let (lo, hi) = g.col_range(kx);
                    if lo >= hi {
                        continue;
                    }
                    for oy in 0..g.oh {
                        let Some(iy) = g.in_row(oy, ky) else { continue };
                        let row_in = &src[iy * g.w..(iy + 1) * g.w];
                        let row_out = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                        if g.stride == 1 {
                            let off = g.in_col(lo, kx);
                            for (o, &i) in row_out[lo..hi].iter_mut().zip(&row_in[off..]) {
                                *o = *o + wv * i;
                            }
                        } else {
                            for ox in lo..hi {
                                row_out[ox] = row_out[ox] + wv * row_in[g.in_col(ox, kx)];
                            }
                        }
                    }
                }
            }
        }
    });
    Ok(out)
}

/// Gradient of [`conv2d`] with respect to its input.
pub fn conv2d_backward_input<T: Scalar>(
    grad_out: &Tensor4<T>,
    weight: &Tensor4<T>,
    x_shape: [usize; 4],
    stride: usize,
    pad: usize,
) -> Result<Tensor4<T>, NnError> {
    let g = ConvGeom::new(x_shape, weight.shape(), stride, pad)?;
    if grad_out.shape() != [g.n, g.co, g.oh, g.ow] {
        return Err(NnError::Shape(format!(
            "conv output gradient {:?} does not match {:?}",
            grad_out.shape(),
            [g.n, g.co, g.oh, g.ow]
        )));
    }
    let mut gx = Tensor4::zeros(x_shape);
    let plane = g.h * g.w;
    if plane == 0 {
        return Ok(gx);
    }
    gx.data.par_chunks_mut(plane).enumerate().for_each(|(idx, dst)| {
        let (ni, c) = (idx / g.ci, idx % g.ci);
        for o in 0..g.co {
            let src = grad_out.plane(ni, o);
            for ky in 0..g.k {
                for kx in 0..g.k {
                    let wv = weight.data[((o * g.ci + c) * g.k + ky) * g.k + kx];
                    let (lo, hi) = g.col_range(kx);
                    for oy in 0..g.oh {
                        let Some(iy) = g.in_row(oy, ky) else { continue };
                        let row_g = &src[oy * g.ow..(oy + 1) * g.ow];
                        let row_x = &mut dst[iy * g.w..(iy + 1) * g.w];
                        if g.stride == 1 && lo < hi {
                            let off = g.in_col(lo, kx);
                            for (d, &s) in row_x[off..].iter_mut().zip(&row_g[lo..hi]) {
                                *d = *d + wv * s;
                            }
                        } else {
                            for ox in lo..hi {
                                let ix = g.in_col(ox, kx);
                                row_x[ix] = row_x[ix] + wv * row_g[ox];
                            }
                        }
                    }
                }
            }
        }
    });
    Ok(gx)
}

/// Gradients of [`conv2d`] with respect to weight and bias.
pub fn conv2d_backward_params<T: Scalar>(
    x: &Tensor4<T>,
    grad_out: &Tensor4<T>,
    weight_shape: [usize; 4],
    stride: usize,
    pad: usize,
) -> Result<(Tensor4<T>, Vec<T>), NnError> {
    let g = ConvGeom::new(x.shape(), weight_shape, stride, pad)?;
    if grad_out.shape() != [g.n, g.co, g.oh, g.ow] {
        return Err(NnError::Shape(format!(
            "conv output gradient {:?} does not match {:?}",
            grad_out.shape(),
            [g.n, g.co, g.oh, g.ow]
        )));
    }
    let mut gw = Tensor4::zeros(weight_shape);
    let slab = g.ci * g.k * g.k;
    if slab > 0 {
        gw.data.par_chunks_mut(slab).enumerate().for_each(|(o, dst)| {
            for c in 0..g.ci {
                for ky in 0..g.k {
                    for kx in 0..g.k {
                        let (lo, hi) = g.col_range(kx);
                        let mut acc = T::zero();
                        for ni in 0..g.n {
                            let gp = grad_out.plane(ni, o);
                            let xp = x.plane(ni, c);
                            for oy in 0..g.oh {
                                let Some(iy) = g.in_row(oy, ky) else { continue };
                                let row_g = &gp[oy * g.ow..(oy + 1) * g.ow];
                                let row_x = &xp[iy * g.w..(iy + 1) * g.w];
                                for ox in lo..hi {
                                    acc = acc + row_g[ox] * row_x[g.in_col(ox, kx)];
                                }
                            }
                        }
                        dst[(c * g.k + ky) * g.k + kx] = acc;
                    }
                }
            }
        });
    }
    Ok((gw, bias_grad(grad_out)))
}

fn bias_grad<T: Scalar>(grad_out: &Tensor4<T>) -> Vec<T> {
    (0..grad_out.c())
        .into_par_iter()
        .map(|o| {
            let mut acc = T::zero();
            for ni in 0..grad_out.n() {
                for &v in grad_out.plane(ni, o) {
                    acc = acc + v;
                }
            }
            acc
        })
        .collect()
}

fn transpose_shape(x: [usize; 4], weight: [usize; 4], stride: usize) -> Result<[usize; 4], NnError> {
    let [n, ci, h, w] = x;
    let [wci, co, kh, kw] = weight;
    if wci != ci {
        return Err(NnError::Shape(format!(
            "transposed conv weight expects {wci} input channels, input has {ci}"
        )));
    }
    if kh != kw || kh == 0 || stride == 0 {
        return Err(NnError::Shape(format!(
            "transposed conv needs a square kernel and positive stride, got {kh}x{kw} stride {stride}"
        )));
    }
    if h == 0 || w == 0 {
        return Err(NnError::Shape("transposed conv input is empty".into()));
    }
    Ok([n, co, (h - 1) * stride + kh, (w - 1) * stride + kw])
}

/// Transposed convolution without padding. Weight layout `(c_in, c_out, k, k)`.
///
/// With the same weight tensor this is the adjoint of [`conv2d`] at the
/// same stride and zero padding.
pub fn conv_transpose2d<T: Scalar>(
    x: &Tensor4<T>,
    weight: &Tensor4<T>,
    bias: Option<&[T]>,
    stride: usize,
) -> Result<Tensor4<T>, NnError> {
    let out_shape = transpose_shape(x.shape(), weight.shape(), stride)?;
    let [_, co, oh, ow] = out_shape;
    check_bias(bias, co)?;
    let (ci, h, w, k) = (x.c(), x.h(), x.w(), weight.h());
    let mut out = Tensor4::zeros(out_shape);
    out.data.par_chunks_mut(oh * ow).enumerate().for_each(|(idx, dst)| {
        let (ni, o) = (idx / co, idx % co);
        if let Some(b) = bias {
            dst.fill(b[o]);
        }
        for c in 0..ci {
            let src = x.plane(ni, c);
            for ky in 0..k {
                for kx in 0..k {
                    let wv = weight.data[((c * co + o) * k + ky) * k + kx];
                    for iy in 0..h {
                        let row_out = &mut dst[(iy * stride + ky) * ow..][..ow];
                        let row_in = &src[iy * w..(iy + 1) * w];
                        for (ix, &v) in row_in.iter().enumerate() {
                            let ox = ix * stride + kx;
                            row_out[ox] = row_out[ox] + wv * v;
                        }
                    }
                }
            }
        }
    });
    Ok(out)
}

/// Gradient of [`conv_transpose2d`] with respect to its input.
pub fn conv_transpose2d_backward_input<T: Scalar>(
    grad_out: &Tensor4<T>,
    weight: &Tensor4<T>,
    x_shape: [usize; 4],
    stride: usize,
) -> Result<Tensor4<T>, NnError> {
    let out_shape = transpose_shape(x_shape, weight.shape(), stride)?;
    if grad_out.shape() != out_shape {
        return Err(NnError::Shape(format!(
            "transposed conv output gradient {:?} does not match {out_shape:?}",
            grad_out.shape()
        )));
    }
    let [_, ci, h, w] = x_shape;
    let [_, co, _, ow] = out_shape;
    let k = weight.h();
    let mut gx = Tensor4::zeros(x_shape);
    gx.data.par_chunks_mut(h * w).enumerate().for_each(|(idx, dst)| {
        let (ni, c) = (idx / ci, idx % ci);
        for o in 0..co {
            let src = grad_out.plane(ni, o);
            for ky in 0..k {
                for kx in 0..k {
                    let wv = weight.data[((c * co + o) * k + ky) * k + kx];
                    for iy in 0..h {
                        let row_g = &src[(iy * stride + ky) * ow..][..ow];
                        let row_x = &mut dst[iy * w..(iy + 1) * w];
                        for (ix, d) in row_x.iter_mut().enumerate() {
                            *d = *d + wv * row_g[ix * stride + kx];
                        }
                    }
                }
            }
        }
    });
    Ok(gx)
}

/// Gradients of [`conv_transpose2d`] with respect to weight and bias.
pub fn conv_transpose2d_backward_params<T: Scalar>(
    x: &Tensor4<T>,
    grad_out: &Tensor4<T>,
    weight_shape: [usize; 4],
    stride: usize,
) -> Result<(Tensor4<T>, Vec<T>), NnError> {
    let out_shape = transpose_shape(x.shape(), weight_shape, stride)?;
    if grad_out.shape() != out_shape {
        return Err(NnError::Shape(format!(
            "transposed conv output gradient {:?} does not match {out_shape:?}",
            grad_out.shape()
        )));
    }
    let [n, _, h, w] = x.shape();
    let [_, co, _, ow] = out_shape;
    let k = weight_shape[2];
    let mut gw = Tensor4::zeros(weight_shape);
    gw.data.par_chunks_mut(co * k * k).enumerate().for_each(|(c, dst)| {
        for o in 0..co {
            for ky in 0..k {
                for kx in 0..k {
                    let mut acc = T::zero();
                    for ni in 0..n {
                        let xp = x.plane(ni, c);
                        let gp = grad_out.plane(ni, o);
                        for iy in 0..h {
                            let row_g = &gp[(iy * stride + ky) * ow..][..ow];
                            let row_x = &xp[iy * w..(iy + 1) * w];
                            for (ix, &v) in row_x.iter().enumerate() {
                                acc = acc + v * row_g[ix * stride + kx];
                            }
                        }
                    }
                    dst[(o * k + ky) * k + kx] = acc;
                }
            }
        }
    });
    Ok((gw, bias_grad(grad_out)))
}

/// Non-overlapping max pooling with window and stride `k`.
///
/// Returns the pooled tensor and, per output element, the flat index of the
/// winning input inside its plane. Ties go to the first element in row-major
/// order within the window.
pub fn maxpool2d<T: Scalar>(x: &Tensor4<T>, k: usize) -> Result<(Tensor4<T>, Vec<u32>), NnError> {
    let [n, c, h, w] = x.shape();
    if k == 0 || h % k != 0 || w % k != 0 {
        return Err(NnError::Shape(format!("max pool window {k} does not tile {h}x{w}")));
    }
    let (oh, ow) = (h / k, w / k);
    let mut out = Tensor4::zeros([n, c, oh, ow]);
    let mut argmax = vec![0u32; n * c * oh * ow];
    if oh * ow == 0 {
        return Ok((out, argmax));
    }
    out.data
        .par_chunks_mut(oh * ow)
        .zip(argmax.par_chunks_mut(oh * ow))
        .enumerate()
        .for_each(|(idx, (dst, arg))| {
            let src = &x.data[idx * h * w..(idx + 1) * h * w];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best_i = (oy * k) * w + ox * k;
                    let mut best = src[best_i];
                    for dy in 0..k {
                        for dx in 0..k {
                            let i = (oy * k + dy) * w + ox * k + dx;
                            if src[i] > best {
                                best = src[i];
                                best_i = i;
                            }
                        }
                    }
                    dst[oy * ow + ox] = best;
                    arg[oy * ow + ox] = best_i as u32;
                }
            }
        });
    Ok((out, argmax))
}

pub fn maxpool2d_backward<T: Scalar>(
    grad_out: &Tensor4<T>,
    argmax: &[u32],
    x_shape: [usize; 4],
) -> Result<Tensor4<T>, NnError> {
    if grad_out.len() != argmax.len() {
        return Err(NnError::Shape("max pool gradient does not match recorded argmax".into()));
    }
    let mut gx = Tensor4::zeros(x_shape);
    let plane_in = x_shape[2] * x_shape[3];
    let plane_out = grad_out.plane_len();
    if plane_in == 0 || plane_out == 0 {
        return Ok(gx);
    }
    gx.data.par_chunks_mut(plane_in).enumerate().for_each(|(idx, dst)| {
        let g = &grad_out.data[idx * plane_out..(idx + 1) * plane_out];
        let a = &argmax[idx * plane_out..(idx + 1) * plane_out];
        for (&gi, &ai) in g.iter().zip(a) {
            dst[ai as usize] = dst[ai as usize] + gi;
        }
    });
    Ok(gx)
}

pub fn relu<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of ReLU given the forward output. The derivative at zero is zero.
pub fn relu_backward<T: Scalar>(grad_out: &Tensor4<T>, y: &Tensor4<T>) -> Tensor4<T> {
    let data = grad_out
        .data
        .iter()
        .zip(&y.data)
        .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor4::from_vec(grad_out.shape(), data).expect("same shape")
}

/// Concatenates along the channel axis, `a` first.
pub fn concat_channels<T: Scalar>(a: &Tensor4<T>, b: &Tensor4<T>) -> Result<Tensor4<T>, NnError> {
    let [n, ca, h, w] = a.shape();
    let [nb, cb, hb, wb] = b.shape();
    if (n, h, w) != (nb, hb, wb) {
        return Err(NnError::Shape(format!(
            "cannot concatenate {:?} and {:?} along channels",
            a.shape(),
            b.shape()
        )));
    }
    let mut data = Vec::with_capacity(n * (ca + cb) * h * w);
    for ni in 0..n {
        data.extend_from_slice(&a.data[ni * a.item_len()..(ni + 1) * a.item_len()]);
        data.extend_from_slice(&b.data[ni * b.item_len()..(ni + 1) * b.item_len()]);
    }
    Tensor4::from_vec([n, ca + cb, h, w], data)
}

/// Splits a gradient of [`concat_channels`] back into its two parts.
pub fn split_channels<T: Scalar>(g: &Tensor4<T>, ca: usize) -> (Tensor4<T>, Tensor4<T>) {
    let [n, c, h, w] = g.shape();
    let cb = c - ca;
    let plane = h * w;
    let mut ga = Vec::with_capacity(n * ca * plane);
    let mut gb = Vec::with_capacity(n * cb * plane);
    for ni in 0..n {
        let item = &g.data[ni * c * plane..(ni + 1) * c * plane];
        ga.extend_from_slice(&item[..ca * plane]);
        gb.extend_from_slice(&item[ca * plane..]);
    }
    (
        Tensor4::from_vec([n, ca, h, w], ga).expect("split shape"),
        Tensor4::from_vec([n, cb, h, w], gb).expect("split shape"),
    )
}

/// Mean squared error over all elements, accumulated in `f64`.
pub fn mse<T: Scalar>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<T, NnError> {
    if pred.shape() != target.shape() {
        return Err(NnError::Shape(format!(
            "mse between {:?} and {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if pred.is_empty() {
        return Err(NnError::Shape("mse of an empty tensor".into()));
    }
    let sum: f64 = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(&p, &t)| {
            let d = p.to_f64() - t.to_f64();
            d * d
        })
        .sum();
    Ok(T::from_f64(sum / pred.len() as f64))
}

/// Gradient of [`mse`] with respect to the prediction, scaled by `upstream`.
pub fn mse_backward<T: Scalar>(pred: &Tensor4<T>, target: &Tensor4<T>, upstream: T) -> Tensor4<T> {
    let scale = T::from_f64(2.0 / pred.len() as f64) * upstream;
    let data = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(&p, &t)| scale * (p - t))
        .collect();
    Tensor4::from_vec(pred.shape(), data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor4<f64> {
        let n = shape.iter().product();
        Tensor4::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct definition of padded cross-correlation.
    fn naive_conv(x: &Tensor4<f64>, w: &Tensor4<f64>, b: &[f64], s: usize, p: usize) -> Tensor4<f64> {
        let [n, ci, h, wd] = x.shape();
        let [co, _, k, _] = w.shape();
        let oh = (h + 2 * p - k) / s + 1;
        let ow = (wd + 2 * p - k) / s + 1;
        let mut out = Tensor4::zeros([n, co, oh, ow]);
        for ni in 0..n {
            for o in 0..co {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = b[o];
                        for c in 0..ci {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let iy = (oy * s + ky) as isize - p as isize;
                                    let ix = (ox * s + kx) as isize - p as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                        continue;
                                    }
                                    acc += w.at(o, c, ky, kx) * x.at(ni, c, iy as usize, ix as usize);
                                }
                            }
                        }
                        out.data[((ni * co + o) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        out
    }

    fn naive_conv_transpose(x: &Tensor4<f64>, w: &Tensor4<f64>, b: &[f64], s: usize) -> Tensor4<f64> {
        let [n, ci, h, wd] = x.shape();
        let [_, co, k, _] = w.shape();
        let (oh, ow) = ((h - 1) * s + k, (wd - 1) * s + k);
        let mut out = Tensor4::zeros([n, co, oh, ow]);
        for ni in 0..n {
            for o in 0..co {
                for y in 0..oh {
                    for xx in 0..ow {
                        out.data[((ni * co + o) * oh + y) * ow + xx] = b[o];
                    }
                }
                for c in 0..ci {
                    for iy in 0..h {
                        for ix in 0..wd {
                            for ky in 0..k {
                                for kx in 0..k {
                                    out.data[((ni * co + o) * oh + iy * s + ky) * ow + ix * s + kx] +=
                                        x.at(ni, c, iy, ix) * w.at(c, o, ky, kx);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn assert_close(a: &Tensor4<f64>, b: &Tensor4<f64>, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn conv_matches_direct_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(k, s, p, h, w) in &[(3, 1, 1, 6, 5), (3, 2, 1, 7, 6), (1, 1, 0, 4, 4), (2, 2, 0, 6, 4), (5, 1, 2, 5, 7), (3, 3, 0, 9, 8)] {
            let x = random([2, 3, h, w], &mut rng);
            let wt = random([4, 3, k, k], &mut rng);
            let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let got = conv2d(&x, &wt, Some(&b), s, p).unwrap();
            assert_close(&got, &naive_conv(&x, &wt, &b, s, p), 1e-12);
        }
    }

    #[test]
    fn conv_transpose_matches_direct_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(k, s) in &[(2, 2), (3, 1), (3, 2), (1, 1)] {
            let x = random([2, 3, 4, 5], &mut rng);
            let wt = random([3, 2, k, k], &mut rng);
            let b = vec![0.3, -0.2];
            let got = conv_transpose2d(&x, &wt, Some(&b), s).unwrap();
            assert_close(&got, &naive_conv_transpose(&x, &wt, &b, s), 1e-12);
        }
    }

    #[test]
    fn conv_transpose_is_adjoint_of_strided_conv() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random([2, 3, 8, 6], &mut rng);
        let w = random([5, 3, 2, 2], &mut rng);
        let y = random([2, 5, 4, 3], &mut rng);
        let lhs = conv2d(&x, &w, None, 2, 0).unwrap().dot(&y);
        let rhs = x.dot(&conv_transpose2d(&y, &w, None, 2).unwrap());
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn conv_backward_input_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &(k, s, p) in &[(3, 1, 1), (3, 2, 1), (2, 2, 0), (1, 1, 0)] {
            let x = random([2, 3, 6, 6], &mut rng);
            let w = random([4, 3, k, k], &mut rng);
            let y0 = conv2d(&x, &w, None, s, p).unwrap();
            let g = random(y0.shape(), &mut rng);
            let gx = conv2d_backward_input(&g, &w, x.shape(), s, p).unwrap();
            assert!((y0.dot(&g) - x.dot(&gx)).abs() < 1e-10);
        }
    }

    #[test]
    fn maxpool_picks_first_of_ties() {
        let x = Tensor4::from_vec([1, 1, 2, 4], vec![1.0, 1.0, 0.0, 2.0, 1.0, 0.5, 2.0, 2.0]).unwrap();
        let (y, arg) = maxpool2d(&x, 2).unwrap();
        assert_eq!(y.data, vec![1.0, 2.0]);
        assert_eq!(arg, vec![0, 3]);
        let g = Tensor4::from_vec([1, 1, 1, 2], vec![5.0, 7.0]).unwrap();
        let gx = maxpool2d_backward(&g, &arg, x.shape()).unwrap();
        assert_eq!(gx.data, vec![5.0, 0.0, 0.0, 7.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(maxpool2d(&Tensor4::<f64>::zeros([1, 1, 3, 4]), 2).is_err());
    }

    #[test]
    fn concat_then_split_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random([2, 2, 3, 3], &mut rng);
        let b = random([2, 3, 3, 3], &mut rng);
        let c = concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), [2, 5, 3, 3]);
        assert_eq!(c.at(1, 2, 0, 1), b.at(1, 0, 0, 1));
        let (ga, gb) = split_channels(&c, 2);
        assert_eq!((ga, gb), (a, b));
    }

    #[test]
    fn shape_errors_are_reported() {
        let x = Tensor4::<f32>::zeros([1, 3, 4, 4]);
        let w = Tensor4::<f32>::zeros([2, 4, 3, 3]);
        assert!(matches!(conv2d(&x, &w, None, 1, 1), Err(NnError::Shape(_))));
        let w = Tensor4::<f32>::zeros([2, 3, 3, 3]);
        assert!(conv2d(&x, &w, Some(&[0.0]), 1, 1).is_err());
        assert!(mse(&x, &Tensor4::zeros([1, 3, 4, 5])).is_err());
    }

    #[test]
    fn mse_of_constant_offset() {
        let p = Tensor4::filled([1, 1, 2, 2], 3.0f64);
        let t = Tensor4::filled([1, 1, 2, 2], 1.0f64);
        assert_eq!(mse(&p, &t).unwrap(), 4.0);
        assert_eq!(mse_backward(&p, &t, 1.0).data, vec![1.0; 4]);
    }
}
