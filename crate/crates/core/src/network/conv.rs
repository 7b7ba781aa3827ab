//! 3x3, stride-1, zero-padded cross-correlation lowered to matrix products.
//!
//! A layer's kernels, stored `[out][in][ky][kx]`, are already the row-major
//! `out x (in * 9)` matrix that multiplies the `(in * 9) x pixels` patch matrix built
//! by [`im2col`]. Each output pixel therefore accumulates its taps channel-major, in
//! the same order wherever it sits in the image.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

pub const KERNEL: usize = 3;
pub const TAPS: usize = KERNEL * KERNEL;

/// Expand `channels x height x width` into the `(channels * 9) x (height * width)`
/// patch matrix, row index `c * 9 + ky * 3 + kx`.
pub fn im2col(input: &[f64], channels: usize, height: usize, width: usize) -> Vec<f64> {
    let n = height * width;
    let mut col = vec![0.0; channels * TAPS * n];
    for c in 0..channels {
        let plane = &input[c * n..(c + 1) * n];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &mut col[((c * TAPS) + ky * KERNEL + kx) * n..][..n];
                for y in 0..height {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= height as isize {
                        continue;
                    }
                    let src = &plane[sy as usize * width..(sy as usize + 1) * width];
                    let dst = &mut row[y * width..(y + 1) * width];
                    match kx {
                        0 => dst[1..].copy_from_slice(&src[..width - 1]),
                        1 => dst.copy_from_slice(src),
                        _ => dst[..width - 1].copy_from_slice(&src[1..]),
                    }
                }
            }
        }
    }
    col
}

/// Adjoint of [`im2col`]: scatter-add a patch matrix back onto a `channels x height x width`
/// volume.
pub fn col2im_add(col: &[f64], channels: usize, height: usize, width: usize, out: &mut [f64]) {
    let n = height * width;
    for c in 0..channels {
        let plane = &mut out[c * n..(c + 1) * n];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &col[((c * TAPS) + ky * KERNEL + kx) * n..][..n];
                for y in 0..height {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= height as isize {
                        continue;
                    }
                    let dst = &mut plane[sy as usize * width..(sy as usize + 1) * width];
                    let src = &row[y * width..(y + 1) * width];
                    match kx {
                        0 => {
                            for (d, s) in dst[..width - 1].iter_mut().zip(&src[1..]) {
                                *d += s;
                            }
                        }
                        1 => {
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                        _ => {
                            for (d, s) in dst[1..].iter_mut().zip(&src[..width - 1]) {
                                *d += s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `c = a * b` (or `c += a * b` when `accumulate`) for row-major `a: m x k`, `b: k x n`.
pub fn matmul(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize, accumulate: bool) {
    let a = ArrayView2::from_shape((m, k), a).expect("lhs shape");
    let b = ArrayView2::from_shape((k, n), b).expect("rhs shape");
    let mut c = ArrayViewMut2::from_shape((m, n), c).expect("output shape");
    general_mat_mul(1.0, &a, &b, if accumulate { 1.0 } else { 0.0 }, &mut c);
}

/// `c = a^T * b` for row-major `a: k x m`, `b: k x n`.
pub fn matmul_tn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    let a = ArrayView2::from_shape((k, m), a).expect("lhs shape");
    let b = ArrayView2::from_shape((k, n), b).expect("rhs shape");
    let mut c = ArrayViewMut2::from_shape((m, n), c).expect("output shape");
    general_mat_mul(1.0, &a.t(), &b, 0.0, &mut c);
}

/// `c += a * b^T` for row-major `a: m x k`, `b: n x k`.
pub fn matmul_nt_add(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    let a = ArrayView2::from_shape((m, k), a).expect("lhs shape");
    let b = ArrayView2::from_shape((n, k), b).expect("rhs shape");
    let mut c = ArrayViewMut2::from_shape((m, n), c).expect("output shape");
    general_mat_mul(1.0, &a, &b.t(), 1.0, &mut c);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let (c, h, w) = (2, 4, 5);
        let x: Vec<f64> = (0..c * h * w).map(|i| ((i * 37) % 17) as f64 - 8.0).collect();
        let y: Vec<f64> = (0..c * TAPS * h * w).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let col = im2col(&x, c, h, w);
        let lhs: f64 = col.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut back = vec![0.0; c * h * w];
        col2im_add(&y, c, h, w, &mut back);
        let rhs: f64 = x.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn single_pixel_columns() {
        let col = im2col(&[5.0], 1, 1, 1);
        assert_eq!(col, vec![0.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
