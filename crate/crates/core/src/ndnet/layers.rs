//! Batched NHWC kernels: convolution via im2col + GEMM, 2x2 max pooling,
//! fully connected layers and ReLU.

use super::scalar::{gemm, Mat, Scalar};

/// Stride-1 square convolution geometry on NHWC activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub h: usize,
    pub w: usize,
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        self.h + 2 * self.pad + 1 - self.k
    }

    pub fn out_w(&self) -> usize {
        self.w + 2 * self.pad + 1 - self.k
    }

    pub fn patch_len(&self) -> usize {
        self.k * self.k * self.cin
    }

    fn in_len(&self) -> usize {
        self.h * self.w * self.cin
    }

    fn out_pixels(&self) -> usize {
        self.out_h() * self.out_w()
    }

    /// Images per GEMM call; keeps the im2col buffer a few hundred KB.
    fn chunk(&self) -> usize {
        (2048 / self.out_pixels()).max(1)
    }
}

/// Valid kernel-column range `[kx0, kx1)` for output column `ox`.
fn kx_range(g: &ConvGeom, ox: usize) -> (usize, usize) {
    let kx0 = g.pad.saturating_sub(ox);
    let kx1 = g.k.min(g.w + g.pad - ox);
    (kx0, kx1)
}

/// Unfold `images` (n consecutive NHWC images) into patch rows ordered (ky, kx, ci).
fn im2col<F: Scalar>(g: &ConvGeom, images: &[F], cols: &mut [F]) {
    let (oh, ow, pl) = (g.out_h(), g.out_w(), g.patch_len());
    let run = g.k * g.cin;
    for (img, img_cols) in images
        .chunks_exact(g.in_len())
        .zip(cols.chunks_exact_mut(oh * ow * pl))
    {
        for oy in 0..oh {
            for ox in 0..ow {
                let (kx0, kx1) = kx_range(g, ox);
                let row = &mut img_cols[(oy * ow + ox) * pl..][..pl];
                for (ky, dst) in row.chunks_exact_mut(run).enumerate() {
                    let iy = (oy + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize || kx0 >= kx1 {
                        dst.fill(F::zero());
                        continue;
                    }
                    dst[..kx0 * g.cin].fill(F::zero());
                    dst[kx1 * g.cin..].fill(F::zero());
                    let src = (iy as usize * g.w + ox + kx0 - g.pad) * g.cin;
                    let len = (kx1 - kx0) * g.cin;
                    dst[kx0 * g.cin..kx1 * g.cin].copy_from_slice(&img[src..src + len]);
                }
            }
        }
    }
}

/// Scatter-add patch-row gradients back onto image gradients.
fn col2im<F: Scalar>(g: &ConvGeom, cols: &[F], images: &mut [F]) {
    let (oh, ow, pl) = (g.out_h(), g.out_w(), g.patch_len());
    let run = g.k * g.cin;
    for (img, img_cols) in images
        .chunks_exact_mut(g.in_len())
        .zip(cols.chunks_exact(oh * ow * pl))
    {
        for oy in 0..oh {
            for ox in 0..ow {
                let (kx0, kx1) = kx_range(g, ox);
                if kx0 >= kx1 {
                    continue;
                }
                let row = &img_cols[(oy * ow + ox) * pl..][..pl];
                for (ky, src) in row.chunks_exact(run).enumerate() {
                    let iy = (oy + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = (iy as usize * g.w + ox + kx0 - g.pad) * g.cin;
                    let len = (kx1 - kx0) * g.cin;
                    for (d, s) in img[dst..dst + len]
                        .iter_mut()
                        .zip(&src[kx0 * g.cin..kx1 * g.cin])
                    {
                        *d += *s;
                    }
                }
            }
        }
    }
}

/// `out[b, y, x, co] = bias[co] + sum_{ky,kx,ci} in[b, y+ky-pad, x+kx-pad, ci] * w[ky, kx, ci, co]`
pub fn conv_forward<F: Scalar>(g: &ConvGeom, input: &[F], weight: &[F], bias: &[F], out: &mut [F]) {
    let batch = input.len() / g.in_len();
    let (op, pl) = (g.out_pixels(), g.patch_len());
    debug_assert_eq!(out.len(), batch * op * g.cout);
    let chunk = g.chunk();
    let mut cols = vec![F::zero(); chunk.min(batch) * op * pl];
    let wmat = Mat::new(weight, pl, g.cout);
    for (imgs, outs) in input
        .chunks(chunk * g.in_len())
        .zip(out.chunks_mut(chunk * op * g.cout))
    {
        let n = imgs.len() / g.in_len();
        let cols = &mut cols[..n * op * pl];
        im2col(g, imgs, cols);
        for px in outs.chunks_exact_mut(g.cout) {
            px.copy_from_slice(bias);
        }
        gemm(F::one(), Mat::new(cols, n * op, pl), wmat, F::one(), outs);
    }
}

/// Accumulates weight/bias gradients; writes the input gradient when requested.
pub fn conv_backward<F: Scalar>(
    g: &ConvGeom,
    input: &[F],
    weight: &[F],
    grad_out: &[F],
    grad_w: &mut [F],
    grad_b: &mut [F],
    mut grad_in: Option<&mut [F]>,
) {
    let batch = input.len() / g.in_len();
    let (op, pl) = (g.out_pixels(), g.patch_len());
    let chunk = g.chunk();
    let mut cols = vec![F::zero(); chunk.min(batch) * op * pl];
    let mut dcols = if grad_in.is_some() {
        vec![F::zero(); chunk.min(batch) * op * pl]
    } else {
        Vec::new()
    };
    let wmat = Mat::new(weight, pl, g.cout);
    if let Some(gi) = grad_in.as_deref_mut() {
        gi.fill(F::zero());
    }
    for (ci, (imgs, gouts)) in input
        .chunks(chunk * g.in_len())
        .zip(grad_out.chunks(chunk * op * g.cout))
        .enumerate()
    {
        let n = imgs.len() / g.in_len();
        let cols = &mut cols[..n * op * pl];
        im2col(g, imgs, cols);
        let gmat = Mat::new(gouts, n * op, g.cout);
        gemm(F::one(), Mat::new(cols, n * op, pl).t(), gmat, F::one(), grad_w);
        for px in gouts.chunks_exact(g.cout) {
            for (b, v) in grad_b.iter_mut().zip(px) {
                *b += *v;
            }
        }
        if let Some(gi) = grad_in.as_deref_mut() {
            let dcols = &mut dcols[..n * op * pl];
            gemm(F::one(), gmat, wmat.t(), F::zero(), dcols);
            let start = ci * chunk * g.in_len();
            col2im(g, dcols, &mut gi[start..start + n * g.in_len()]);
        }
    }
}

/// 2x2 stride-2 max pooling on NHWC; records the flat input index of each max.
pub fn maxpool_forward<F: Scalar>(
    h: usize,
    w: usize,
    c: usize,
    input: &[F],
    out: &mut [F],
    argmax: &mut [u32],
) {
    let (oh, ow) = (h / 2, w / 2);
    let batch = input.len() / (h * w * c);
    for b in 0..batch {
        let ib = b * h * w * c;
        let obase = b * oh * ow * c;
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best = ib + ((2 * oy) * w + 2 * ox) * c + ch;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = ib + ((2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                        if input[idx] > input[best] {
                            best = idx;
                        }
                    }
                    let o = obase + (oy * ow + ox) * c + ch;
                    out[o] = input[best];
                    argmax[o] = best as u32;
                }
            }
        }
    }
}

pub fn maxpool_backward<F: Scalar>(grad_out: &[F], argmax: &[u32], grad_in: &mut [F]) {
    grad_in.fill(F::zero());
    for (g, &i) in grad_out.iter().zip(argmax) {
        grad_in[i as usize] += *g;
    }
}

/// `out = x W + b` with `x: (batch, inp)`, `W: (inp, out)`.
pub fn dense_forward<F: Scalar>(
    inp: usize,
    outd: usize,
    x: &[F],
    weight: &[F],
    bias: &[F],
    out: &mut [F],
) {
    let batch = x.len() / inp;
    for row in out.chunks_exact_mut(outd) {
        row.copy_from_slice(bias);
    }
    gemm(
        F::one(),
        Mat::new(x, batch, inp),
        Mat::new(weight, inp, outd),
        F::one(),
        out,
    );
}

#[allow(clippy::too_many_arguments)]
pub fn dense_backward<F: Scalar>(
    inp: usize,
    outd: usize,
    x: &[F],
    weight: &[F],
    grad_out: &[F],
    grad_w: &mut [F],
    grad_b: &mut [F],
    grad_in: Option<&mut [F]>,
) {
    let batch = x.len() / inp;
    let gmat = Mat::new(grad_out, batch, outd);
    gemm(F::one(), Mat::new(x, batch, inp).t(), gmat, F::one(), grad_w);
    for row in grad_out.chunks_exact(outd) {
        for (b, v) in grad_b.iter_mut().zip(row) {
            *b += *v;
        }
    }
    if let Some(gi) = grad_in {
        gemm(F::one(), gmat, Mat::new(weight, inp, outd).t(), F::zero(), gi);
    }
}

pub fn relu_forward<F: Scalar>(x: &mut [F]) {
    for v in x {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
}

/// Masks `grad` in place by the post-activation output.
pub fn relu_backward<F: Scalar>(output: &[F], grad: &mut [F]) {
    for (g, o) in grad.iter_mut().zip(output) {
        if *o <= F::zero() {
            *g = F::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct 7-loop convolution, independent of im2col.
    fn conv_naive(g: &ConvGeom, input: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
        let batch = input.len() / (g.h * g.w * g.cin);
        let (oh, ow) = (g.out_h(), g.out_w());
        let mut out = vec![0.0; batch * oh * ow * g.cout];
        for n in 0..batch {
            for oy in 0..oh {
                for ox in 0..ow {
                    for co in 0..g.cout {
                        let mut acc = b[co];
                        for ky in 0..g.k {
                            for kx in 0..g.k {
                                let iy = oy as isize + ky as isize - g.pad as isize;
                                let ix = ox as isize + kx as isize - g.pad as isize;
                                if iy < 0 || ix < 0 || iy >= g.h as isize || ix >= g.w as isize {
                                    continue;
                                }
                                for ci in 0..g.cin {
                                    let iv = input[((n * g.h + iy as usize) * g.w + ix as usize)
                                        * g.cin
                                        + ci];
                                    acc += iv * w[((ky * g.k + kx) * g.cin + ci) * g.cout + co];
                                }
                            }
                        }
                        out[((n * oh + oy) * ow + ox) * g.cout + co] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_direct_loops() {
        let g = ConvGeom {
            h: 5,
            w: 4,
            cin: 3,
            cout: 2,
            k: 3,
            pad: 1,
        };
        let input: Vec<f64> = (0..2 * 5 * 4 * 3).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let w: Vec<f64> = (0..27 * 2).map(|i| ((i * 13) % 7) as f64 * 0.25 - 0.7).collect();
        let b = vec![0.5, -1.0];
        let mut out = vec![0.0; 2 * 5 * 4 * 2];
        conv_forward(&g, &input, &w, &b, &mut out);
        for (a, b) in out.iter().zip(conv_naive(&g, &input, &w, &b)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn maxpool_picks_window_max() {
        let input = [1.0, 5.0, 2.0, 0.0, 3.0, 4.0, -1.0, 7.0];
        // (1, 2, 4, 1)
        let mut out = [0.0; 2];
        let mut arg = [0u32; 2];
        maxpool_forward(2, 4, 1, &input, &mut out, &mut arg);
        assert_eq!(out, [5.0, 7.0]);
        assert_eq!(arg, [1, 7]);
        let mut gi = [9.0; 8];
        maxpool_backward(&[1.0, 2.0], &arg, &mut gi);
        assert_eq!(gi, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
    }
}
