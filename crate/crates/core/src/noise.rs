//! Poisson degradation of intensity fields with reproducible random streams.
//!
//! All randomness in the crate flows through [`Stream`], a ChaCha8 generator
//! (`rand_chacha::ChaCha8Rng`). A stream is fully determined by a 64-bit seed and a
//! 64-bit stream id: the key comes from `seed_from_u64(seed)` and the id selects the
//! ChaCha stream (nonce), so per-image or per-realization streams never overlap.
//! Uniform doubles take the top 53 bits of `next_u64()` scaled by `2^-53`; bounded
//! integers use the multiply-high reduction `(next_u64() * n) >> 64`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};
use crate::imaging::{Image, IntensityField, Peak};

/// Rates at or above this use transformed rejection; below it, Knuth multiplication.
pub const KNUTH_LIMIT: f64 = 30.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

/// Seeded ChaCha8 random stream.
#[derive(Clone, Debug)]
pub struct Stream(ChaCha8Rng);

impl Stream {
    pub fn new(seed: Seed) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed.0))
    }

    /// Independent stream `id` under the same seed.
    pub fn derived(seed: Seed, id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
        rng.set_stream(id);
        Self(rng)
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((u128::from(self.0.next_u64()) * n as u128) >> 64) as usize
    }

    pub fn coin(&mut self) -> bool {
        self.0.next_u64() >> 63 == 1
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Observed photon counts together with the peak used to generate them.
#[derive(Clone, Debug, PartialEq)]
pub struct CountImage {
    height: usize,
    width: usize,
    counts: Vec<u32>,
    peak: Peak,
}

impl CountImage {
    pub fn new(height: usize, width: usize, counts: Vec<u32>, peak: Peak) -> Result<Self> {
        if counts.len() != height * width {
            return domain(format!(
                "count image has {} values, expected {height}x{width}",
                counts.len()
            ));
        }
        Ok(Self {
            height,
            width,
            counts,
            peak,
        })
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

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn peak(&self) -> Peak {
        self.peak
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u32 {
        self.counts[y * self.width + x]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    /// Counts as reals, unscaled.
    pub fn to_image(&self) -> Image {
        Image::from_raw(
            self.height,
            self.width,
            self.counts.iter().map(|&c| f64::from(c)).collect(),
        )
    }

    /// Counts divided by the peak, i.e. the noisy image on the clean image's `[0, 1]` scale.
    pub fn to_normalized(&self) -> Image {
        let p = self.peak.value();
        Image::from_raw(
            self.height,
            self.width,
            self.counts.iter().map(|&c| f64::from(c) / p).collect(),
        )
    }
}

/// Poisson probability mass `lambda^n e^-lambda / n!`, with `P(0 | 0) = 1`.
pub fn poisson_pmf(n: u64, lambda: f64) -> Result<f64> {
    if !(0.0..f64::INFINITY).contains(&lambda) {
        return domain(format!("poisson rate must be finite and non-negative, got {lambda}"));
    }
    if lambda == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let n = n as f64;
    Ok((n * lambda.ln() - lambda - ln_gamma(n + 1.0)).exp())
}

/// Draw one Poisson variate. A zero rate returns 0 without consuming the stream.
pub fn sample_poisson(lambda: f64, rng: &mut Stream) -> Result<u64> {
    if !lambda.is_finite() || lambda < 0.0 {
        return domain(format!("poisson rate must be finite and non-negative, got {lambda}"));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    if lambda < KNUTH_LIMIT {
        Ok(knuth(lambda, rng))
    } else {
        Ok(ptrs(lambda, rng))
    }
}

fn knuth(lambda: f64, rng: &mut Stream) -> u64 {
    let limit = (-lambda).exp();
    let mut k = 0;
    let mut p = rng.uniform();
    while p > limit {
        k += 1;
        p *= rng.uniform();
    }
    k
}

/// Hörmann's transformed rejection with squeeze (PTRS), valid for `lambda >= 10`.
fn ptrs(lambda: f64, rng: &mut Stream) -> u64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
            <= -lambda + k * loglam - ln_gamma(k + 1.0)
        {
            return k as u64;
        }
    }
}

/// Replace every pixel by an independent Poisson draw with that pixel's rate.
/// Pixels are visited in row-major order from a single stream.
pub fn degrade(field: &IntensityField, peak: Peak, rng: &mut Stream) -> Result<CountImage> {
    let mut counts = Vec::with_capacity(field.len());
    for &lambda in field.data() {
        let k = sample_poisson(lambda, rng)?;
        counts.push(u32::try_from(k).unwrap_or(u32::MAX));
    }
    CountImage::new(field.height(), field.width(), counts, peak)
}
