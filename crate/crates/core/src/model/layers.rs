use crate::error::{Error, Result};
use crate::numerics::{gemm, MatRef, Tensor};

/// Patch matrix of a 3x3, stride-1, zero-padded convolution.
///
/// `cols[(c * 9 + dy * 3 + dx) * H * W + y * W + x] = input[c, y + dy - 1, x + dx - 1]`,
/// zero outside the image. `cols` is resized to `9 * cin * h * w`.
pub fn im2col_3x3(input: &[f64], cin: usize, h: usize, w: usize, cols: &mut Vec<f64>) {
    let hw = h * w;
    cols.clear();
    cols.resize(9 * cin * hw, 0.0);
    for c in 0..cin {
        let plane = &input[c * hw..(c + 1) * hw];
        for dy in 0..3 {
            for dx in 0..3 {
                let row = &mut cols[(c * 9 + dy * 3 + dx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + dy as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * w..][..w];
                    let dst = &mut row[y * w..][..w];
                    match dx {
                        0 => dst[1..].copy_from_slice(&src[..w - 1]),
                        1 => dst.copy_from_slice(src),
                        _ => dst[..w - 1].copy_from_slice(&src[1..]),
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col_3x3`]: scatter-adds patch gradients into `grad_input`.
pub fn col2im_3x3(cols: &[f64], cin: usize, h: usize, w: usize, grad_input: &mut [f64]) {
    let hw = h * w;
    for c in 0..cin {
        let plane = &mut grad_input[c * hw..(c + 1) * hw];
        for dy in 0..3 {
            for dx in 0..3 {
                let row = &cols[(c * 9 + dy * 3 + dx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + dy as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * w..][..w];
                    let src = &row[y * w..][..w];
                    match dx {
                        0 => dst[..w - 1].iter_mut().zip(&src[1..]).for_each(|(d, s)| *d += s),
                        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d += s),
                        _ => dst[1..].iter_mut().zip(&src[..w - 1]).for_each(|(d, s)| *d += s),
                    }
                }
            }
        }
    }
}

/// One sample's convolution: `out[Cout x H x W] = K . im2col(input) + bias`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_sample(
    input: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    kernels: &Tensor,
    bias: &Tensor,
    cols: &mut Vec<f64>,
    out: &mut [f64],
) {
    let cout = kernels.shape()[0];
    let hw = h * w;
    im2col_3x3(input, cin, h, w, cols);
    for (o, chunk) in out.chunks_exact_mut(hw).enumerate() {
        chunk.fill(bias.data()[o]);
    }
    gemm(
        1.0,
        MatRef::new(kernels.data(), cout, cin * 9),
        MatRef::new(cols, cin * 9, hw),
        1.0,
        out,
    );
}

/// Cross-correlation with 3x3 kernels, stride 1, zero padding 1.
///
/// `input` is `B x Cin x H x W`, `kernels` `Cout x Cin x 3 x 3`, `bias` `Cout`.
pub fn conv2d(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (b, cin, h, w) = match *input.shape() {
        [b, c, h, w] => (b, c, h, w),
        ref s => return Err(Error::Shape(format!("conv2d input must be 4-D, got {s:?}"))),
    };
    let cout = match *kernels.shape() {
        [o, c, 3, 3] if c == cin => o,
        ref s => {
            return Err(Error::Shape(format!(
                "kernels {s:?} do not match {cin} input channels"
            )))
        }
    };
    if bias.shape() != [cout] {
        return Err(Error::Shape(format!(
            "bias {:?} does not match {cout} output channels",
            bias.shape()
        )));
    }
    let mut out = vec![0.0; b * cout * h * w];
    let mut cols = Vec::new();
    for (i, dst) in out.chunks_exact_mut(cout * h * w).enumerate() {
        conv_sample(input.outer(i), cin, h, w, kernels, bias, &mut cols, dst);
    }
    Tensor::new(&[b, cout, h, w], out)
}

/// 2x2 max pooling with stride 2 per channel. Returns pooled values and, for
/// each output, the flat input index of the winning element (first maximum
/// in row-major window order).
pub(crate) fn maxpool_sample(input: &[f64], c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut idx = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..oh {
            for x in 0..ow {
                let i00 = base + 2 * y * w + 2 * x;
                let mut best = i00;
                for cand in [i00 + 1, i00 + w, i00 + w + 1] {
                    if input[cand] > input[best] {
                        best = cand;
                    }
                }
                out.push(input[best]);
                idx.push(best as u32);
            }
        }
    }
    (out, idx)
}

/// 2x2 stride-2 max pooling over a `B x C x H x W` tensor.
pub fn maxpool2x2(input: &Tensor) -> Result<Tensor> {
    let (b, c, h, w) = match *input.shape() {
        [b, c, h, w] if h % 2 == 0 && w % 2 == 0 => (b, c, h, w),
        ref s => return Err(Error::Shape(format!("maxpool needs B x C x even x even, got {s:?}"))),
    };
    let mut data = Vec::with_capacity(input.len() / 4);
    for i in 0..b {
        data.extend(maxpool_sample(input.outer(i), c, h, w).0);
    }
    Tensor::new(&[b, c, h / 2, w / 2], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seeded_rng;

    /// Direct evaluation of the defining sum.
    fn conv_naive(input: &Tensor, k: &Tensor, bias: &Tensor) -> Tensor {
        let s = input.shape();
        let (b, cin, h, w) = (s[0], s[1], s[2], s[3]);
        let cout = k.shape()[0];
        let mut out = Tensor::zeros(&[b, cout, h, w]);
        let od = out.data_mut();
        for bi in 0..b {
            for o in 0..cout {
                for y in 0..h {
                    for x in 0..w {
                        let mut acc = bias.data()[o];
                        for c in 0..cin {
                            for dy in 0..3 {
                                for dx in 0..3 {
                                    let (sy, sx) = (y as isize + dy - 1, x as isize + dx - 1);
                                    if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                        continue;
                                    }
                                    let iv = input.data()
                                        [((bi * cin + c) * h + sy as usize) * w + sx as usize];
                                    let kv = k.data()[((o * cin + c) * 3 + dy as usize) * 3 + dx as usize];
                                    acc += iv * kv;
                                }
                            }
                        }
                        od[((bi * cout + o) * h + y) * w + x] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let mut r = seeded_rng(1);
        let x = Tensor::from_fn(&[2, 2, 5, 6], |_| r.normal());
        let mut k = Tensor::zeros(&[2, 2, 3, 3]);
        k.data_mut()[4] = 1.0; // o=0,c=0 center
        k.data_mut()[(9 + 4) + 18] = 1.0; // o=1,c=1 center
        let out = conv2d(&x, &k, &Tensor::zeros(&[2])).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn ones_kernel_counts_in_bounds_neighbors() {
        let x = Tensor::filled(&[1, 1, 3, 3], 1.0);
        let k = Tensor::filled(&[1, 1, 3, 3], 1.0);
        let out = conv2d(&x, &k, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(out.data(), &[4., 6., 4., 6., 9., 6., 4., 6., 4.]);
    }

    #[test]
    fn zero_kernels_give_bias() {
        let x = Tensor::filled(&[1, 2, 4, 4], 3.0);
        let out = conv2d(&x, &Tensor::zeros(&[3, 2, 3, 3]), &Tensor::filled(&[3], 0.25)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn channel_mismatch_is_a_shape_error() {
        let x = Tensor::zeros(&[1, 2, 4, 4]);
        assert!(matches!(
            conv2d(&x, &Tensor::zeros(&[1, 3, 3, 3]), &Tensor::zeros(&[1])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn agrees_with_direct_sum() {
        let mut r = seeded_rng(5);
        let x = Tensor::from_fn(&[2, 3, 6, 8], |_| r.normal());
        let k = Tensor::from_fn(&[4, 3, 3, 3], |_| r.normal());
        let b = Tensor::from_fn(&[4], |_| r.normal());
        let fast = conv2d(&x, &k, &b).unwrap();
        assert!(fast.max_abs_diff(&conv_naive(&x, &k, &b)).unwrap() < 1e-12);
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let mut r = seeded_rng(9);
        let (c, h, w) = (2, 5, 4);
        let x: Vec<f64> = (0..c * h * w).map(|_| r.normal()).collect();
        let y: Vec<f64> = (0..9 * c * h * w).map(|_| r.normal()).collect();
        let mut cols = Vec::new();
        im2col_3x3(&x, c, h, w, &mut cols);
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; c * h * w];
        col2im_3x3(&y, c, h, w, &mut back);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn maxpool_picks_window_maxima() {
        let x = Tensor::new(
            &[1, 1, 2, 4],
            vec![1., 5., -1., -2., 3., 2., -3., -0.5],
        )
        .unwrap();
        let p = maxpool2x2(&x).unwrap();
        assert_eq!(p.data(), &[5., -0.5]);
        let (_, idx) = maxpool_sample(x.data(), 1, 2, 4);
        assert_eq!(idx, vec![1, 7]);
    }
}
