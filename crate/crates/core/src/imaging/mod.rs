//! Single-channel images, peak scaling, symmetric padding and quality metrics.

mod io;

pub use io::{load_dir, load_grayscale, load_pgm_raw, read_grayscale, read_pgm_raw, save_pgm, write_pgm};

use crate::error::{domain, Result};

/// Upper bound written in place of an infinite PSNR in reports.
pub const PSNR_REPORT_CAP: f64 = 999.0;

/// Row-major single-channel image of finite reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

/// A latent clean image in photoelectron units (peak-scaled, non-negative).
pub type IntensityField = Image;

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return domain(format!(
                "image data has {} values, expected {height}x{width}",
                data.len()
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return domain(format!("image value at index {i} is not finite"));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Copy of the `height x width` window whose top-left corner is `(top, left)`.
    pub fn window(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return domain(format!(
                "window {height}x{width} at ({top},{left}) exceeds {}x{} image",
                self.height, self.width
            ));
        }
        Ok(Self::from_fn(height, width, |y, x| self.get(top + y, left + x)))
    }

    /// Mirror about the vertical axis (left-right flip).
    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.height, self.width, |y, x| self.get(y, self.width - 1 - x))
    }

    /// Translate content by (dy, dx), filling uncovered pixels with `fill`.
    pub fn shifted(&self, dy: isize, dx: isize, fill: f64) -> Self {
        Self::from_fn(self.height, self.width, |y, x| {
            let sy = y as isize - dy;
            let sx = x as isize - dx;
            if sy < 0 || sx < 0 || sy >= self.height as isize || sx >= self.width as isize {
                fill
            } else {
                self.get(sy as usize, sx as usize)
            }
        })
    }

    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self {
            height,
            width,
            data,
        }
    }

    fn check_same_dims(&self, other: &Image, what: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return domain(format!(
                "{what}: dimension mismatch {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            ));
        }
        Ok(())
    }
}

/// Maximum latent intensity in photoelectrons.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Peak(f64);

impl Peak {
    pub fn new(peak: f64) -> Result<Self> {
        if !(peak.is_finite() && peak > 0.0) {
            return domain(format!("peak must be positive and finite, got {peak}"));
        }
        Ok(Self(peak))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for Peak {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Multiply a `[0, 1]` image by the peak, giving photoelectron intensities.
pub fn scale_to_peak(img: &Image, peak: Peak) -> Result<IntensityField> {
    if let Some(i) = img.data.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return domain(format!(
            "scale_to_peak expects values in [0,1]; index {i} holds {}",
            img.data[i]
        ));
    }
    Ok(img.map(|v| v * peak.value()))
}

/// Shift a `[0, 1]` image to `[-1/2, 1/2]`.
pub fn normalize_shift(img: &Image) -> Image {
    img.map(|v| v - 0.5)
}

/// Inverse of [`normalize_shift`].
pub fn unshift(img: &Image) -> Image {
    img.map(|v| v + 0.5)
}

/// Pad by `margin` pixels on every side with symmetric reflection that repeats the edge
/// pixel: `[a, b, c]` padded by 1 becomes `[a, a, b, c, c]`.
pub fn pad_symmetric(img: &Image, margin: usize) -> Result<Image> {
    if margin > img.height.min(img.width) {
        return domain(format!(
            "pad margin {margin} exceeds image dimension {}x{}",
            img.height, img.width
        ));
    }
    let reflect = |i: isize, n: usize| -> usize {
        let n = n as isize;
        if i < 0 {
            (-i - 1) as usize
        } else if i >= n {
            (2 * n - i - 1) as usize
        } else {
            i as usize
        }
    };
    let m = margin as isize;
    Ok(Image::from_fn(
        img.height + 2 * margin,
        img.width + 2 * margin,
        |y, x| {
            let sy = reflect(y as isize - m, img.height);
            let sx = reflect(x as isize - m, img.width);
            img.get(sy, sx)
        },
    ))
}

/// Remove `margin` pixels from every side.
pub fn crop_center(img: &Image, margin: usize) -> Result<Image> {
    if 2 * margin >= img.height.min(img.width) && margin > 0 {
        return domain(format!(
            "cannot crop {margin} pixels from each side of a {}x{} image",
            img.height, img.width
        ));
    }
    img.window(
        margin,
        margin,
        img.height - 2 * margin,
        img.width - 2 * margin,
    )
}

/// Clamp every value into `[lo, hi]`.
pub fn clip(img: &Image, lo: f64, hi: f64) -> Image {
    img.map(|v| v.clamp(lo, hi))
}

fn mean_squared_error(a: &Image, b: &Image) -> f64 {
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    sum / a.data.len() as f64
}

/// Peak signal-to-noise ratio `10 log10(peak^2 / MSE)` with both fields in photoelectrons.
///
/// Returns `f64::INFINITY` for identical inputs; use [`capped_psnr`] when writing reports.
pub fn psnr(reference: &IntensityField, estimate: &IntensityField, peak: Peak) -> Result<f64> {
    reference.check_same_dims(estimate, "psnr")?;
    let mse = mean_squared_error(reference, estimate);
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak.value() * peak.value() / mse).log10())
}

pub fn capped_psnr(db: f64) -> f64 {
    db.min(PSNR_REPORT_CAP)
}

pub fn rmse(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_dims(b, "rmse")?;
    Ok(mean_squared_error(a, b).sqrt())
}
