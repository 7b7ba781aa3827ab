//! Anscombe variance stabilization, its inverses, and photon binning.
//!
//! Two kinds of binning live here. [`bin_downsample`] sums non-overlapping `n x n`
//! blocks (stride `n`) for the classical bin / stabilize / denoise / invert /
//! interpolate pipeline. [`BoxKernelStack`] applies stride-1 box sums of several sizes
//! at once and serves as the fixed first layer of the stabilized network variant.

use crate::error::{domain, Result};
use crate::imaging::{Image, Peak};
use crate::noise::CountImage;
use crate::tensor::Tensor3;

/// `2 sqrt(3/8)`, the transform of a zero count.
pub const ANSCOMBE_FLOOR: f64 = 1.224_744_871_391_589;

const SQRT_3_2: f64 = 1.224_744_871_391_589;

/// `2 sqrt(x + 3/8)`.
pub fn anscombe_forward(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return domain(format!("anscombe transform needs a non-negative input, got {x}"));
    }
    Ok(anscombe(x))
}

#[inline]
pub(crate) fn anscombe(x: f64) -> f64 {
    2.0 * (x + 0.375).sqrt()
}

pub fn anscombe_image(img: &Image) -> Result<Image> {
    if let Some(v) = img.data().iter().find(|v| **v < 0.0) {
        return domain(format!("anscombe transform needs non-negative input, got {v}"));
    }
    Ok(img.map(anscombe))
}

/// Result of an inverse whose input fell below the transform's range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Inverted {
    pub value: f64,
    /// `true` when the input was below `2 sqrt(3/8)` and the value was clamped to 0.
    pub clamped: bool,
}

/// `(d/2)^2 - 3/8`, the exact left inverse of [`anscombe_forward`].
pub fn anscombe_inverse_algebraic(d: f64) -> Inverted {
    if d < ANSCOMBE_FLOOR {
        return Inverted {
            value: 0.0,
            clamped: true,
        };
    }
    Inverted {
        value: (d / 2.0).powi(2) - 0.375,
        clamped: false,
    }
}

/// Closed-form approximation of the exact unbiased inverse:
/// `d^2/4 - 1/8 + sqrt(3/2)/4 d^-1 - 11/8 d^-2 + 5 sqrt(3/2)/8 d^-3`.
/// Inputs below `2 sqrt(3/8)` map to 0.
pub fn anscombe_inverse_unbiased(d: f64) -> f64 {
    if d < ANSCOMBE_FLOOR {
        return 0.0;
    }
    let inv = 1.0 / d;
    let value = 0.25 * d * d - 0.125 + 0.25 * SQRT_3_2 * inv - 1.375 * inv * inv
        + 0.625 * SQRT_3_2 * inv * inv * inv;
    value.max(0.0)
}

/// Derivative of [`anscombe_inverse_unbiased`]; zero wherever the output is clamped.
pub fn anscombe_inverse_unbiased_derivative(d: f64) -> f64 {
    if d < ANSCOMBE_FLOOR || anscombe_inverse_unbiased(d) <= 0.0 {
        return 0.0;
    }
    let inv = 1.0 / d;
    0.5 * d - 0.25 * SQRT_3_2 * inv * inv + 2.75 * inv * inv * inv
        - 1.875 * SQRT_3_2 * inv * inv * inv * inv
}

/// Sum non-overlapping `n x n` blocks. Partial blocks on the right and bottom edges are
/// summed over the pixels they contain. The peak is multiplied by `n^2`.
pub fn bin_downsample(counts: &CountImage, n: usize) -> Result<CountImage> {
    if n < 1 {
        return domain("bin size must be at least 1");
    }
    let (h, w) = counts.dims();
    let (oh, ow) = (h.div_ceil(n), w.div_ceil(n));
    let mut out = vec![0u32; oh * ow];
    for y in 0..h {
        for x in 0..w {
            out[(y / n) * ow + x / n] += counts.get(y, x);
        }
    }
    let peak = Peak::new(counts.peak().value() * (n * n) as f64)?;
    CountImage::new(oh, ow, out, peak)
}

/// Corner-aligned bilinear interpolation up to `(target_h, target_w)`.
pub fn upsample_bilinear(img: &Image, target_h: usize, target_w: usize) -> Result<Image> {
    let (h, w) = img.dims();
    if target_h < h || target_w < w {
        return domain(format!(
            "upsample target {target_h}x{target_w} is smaller than source {h}x{w}"
        ));
    }
    let coord = |i: usize, src: usize, dst: usize| -> (usize, usize, f64) {
        if dst <= 1 || src <= 1 {
            return (0, 0, 0.0);
        }
        let pos = i as f64 * (src - 1) as f64 / (dst - 1) as f64;
        let lo = (pos.floor() as usize).min(src - 1);
        let hi = (lo + 1).min(src - 1);
        (lo, hi, pos - lo as f64)
    };
    Ok(Image::from_fn(target_h, target_w, |y, x| {
        let (y0, y1, fy) = coord(y, h, target_h);
        let (x0, x1, fx) = coord(x, w, target_w);
        let top = img.get(y0, x0) * (1.0 - fx) + img.get(y0, x1) * fx;
        let bottom = img.get(y1, x0) * (1.0 - fx) + img.get(y1, x1) * fx;
        top * (1.0 - fy) + bottom * fy
    }))
}

/// Bin by `n`, stabilize, denoise in the stabilized domain, invert with the unbiased
/// inverse, undo the `n^2` aggregation and interpolate back to full resolution.
/// The result is an intensity estimate in photoelectrons per pixel.
pub fn classical_pipeline(
    counts: &CountImage,
    n: usize,
    denoiser: impl Fn(&Image) -> Image,
) -> Result<Image> {
    let binned = bin_downsample(counts, n)?;
    let stabilized = binned.to_image().map(anscombe);
    let denoised = denoiser(&stabilized);
    let area = (n * n) as f64;
    let restored = denoised.map(|d| anscombe_inverse_unbiased(d) / area);
    upsample_bilinear(&restored, counts.height(), counts.width())
}

/// Fixed, non-trainable stack of constant square kernels applied with stride 1.
///
/// Kernel `k` has weight 1 on its `n_k x n_k` centered support (a photon sum), zero
/// elsewhere, and all kernels are zero-padded to the largest size.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxKernelStack {
    sizes: Vec<usize>,
    extent: usize,
    taps: Vec<f64>,
}

impl BoxKernelStack {
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    pub fn channels(&self) -> usize {
        self.sizes.len()
    }

    /// Always false; the stack is excluded from gradient updates.
    pub fn trainable(&self) -> bool {
        false
    }

    /// Weights of kernel `k`, `extent x extent`, row-major.
    pub fn kernel(&self, k: usize) -> &[f64] {
        let n = self.extent * self.extent;
        &self.taps[k * n..(k + 1) * n]
    }

    /// Spatial reach beyond the center pixel.
    pub fn radius(&self) -> usize {
        self.extent / 2
    }

    /// Stride-1, zero-padded box sums of the counts, one channel per kernel.
    pub fn apply(&self, counts: &CountImage) -> Tensor3 {
        let (h, w) = counts.dims();
        // integral image keeps the sums exact
        let mut integral = vec![0u64; (h + 1) * (w + 1)];
        for y in 0..h {
            let mut row = 0u64;
            for x in 0..w {
                row += u64::from(counts.get(y, x));
                integral[(y + 1) * (w + 1) + x + 1] = integral[y * (w + 1) + x + 1] + row;
            }
        }
        let rect = |y0: usize, x0: usize, y1: usize, x1: usize| -> u64 {
            integral[y1 * (w + 1) + x1] + integral[y0 * (w + 1) + x0]
                - integral[y0 * (w + 1) + x1]
                - integral[y1 * (w + 1) + x0]
        };
        let mut data = Vec::with_capacity(self.sizes.len() * h * w);
        for &n in &self.sizes {
            let r = n / 2;
            for y in 0..h {
                let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
                for x in 0..w {
                    let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
                    data.push(rect(y0, x0, y1, x1) as f64);
                }
            }
        }
        Tensor3::from_raw(self.sizes.len(), h, w, data)
    }
}

/// Box sizes of the stabilized network variant's fixed first layer.
pub const VARIANT_BOX_SIZES: [usize; 4] = [1, 3, 5, 7];

pub fn box_kernel_stack(sizes: &[usize]) -> Result<BoxKernelStack> {
    if sizes.is_empty() {
        return domain("box kernel stack needs at least one size");
    }
    if let Some(&bad) = sizes.iter().find(|&&n| n == 0 || n % 2 == 0) {
        return domain(format!("box kernel sizes must be odd and positive, got {bad}"));
    }
    let extent = *sizes.iter().max().unwrap();
    let mut taps = vec![0.0; sizes.len() * extent * extent];
    for (k, &n) in sizes.iter().enumerate() {
        let offset = (extent - n) / 2;
        for y in offset..offset + n {
            for x in offset..offset + n {
                taps[k * extent * extent + y * extent + x] = 1.0;
            }
        }
    }
    Ok(BoxKernelStack {
        sizes: sizes.to_vec(),
        extent,
        taps,
    })
}
