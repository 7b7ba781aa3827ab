use std::path::Path;

use crate::error::{domain, Result};
use crate::imaging::{rmse, write_pgm, Image, IntensityField};
use crate::network::{denoise_traced, ForwardTrace, ModelWeights};
use crate::noise::CountImage;

/// Per-pixel index (1-based) of the layer whose residual slice has the largest magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct DominantMap {
    pub height: usize,
    pub width: usize,
    pub depth: usize,
    pub layers: Vec<usize>,
}

impl DominantMap {
    pub fn get(&self, y: usize, x: usize) -> usize {
        self.layers[y * self.width + x]
    }

    /// Indices scaled to 0–255 (`index * 255 / depth`, rounded).
    pub fn to_bytes(&self) -> Vec<u8> {
        self.layers
            .iter()
            .map(|&l| (l as f64 * 255.0 / self.depth as f64).round() as u8)
            .collect()
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        write_pgm(path, self.height, self.width, &self.to_bytes())
    }
}

/// Ties go to the shallowest layer.
pub fn dominant_layer_map(trace: &ForwardTrace) -> Result<DominantMap> {
    let Some(first) = trace.residual_slices.first() else {
        return domain("trace has no layers");
    };
    let (height, width) = first.dims();
    let mut best = vec![f64::NEG_INFINITY; height * width];
    let mut layers = vec![0; height * width];
    for (l, slice) in trace.residual_slices.iter().enumerate() {
        if slice.dims() != (height, width) {
            return domain("residual slices differ in size");
        }
        for (i, v) in slice.data().iter().enumerate() {
            if v.abs() > best[i] {
                best[i] = v.abs();
                layers[i] = l + 1;
            }
        }
    }
    Ok(DominantMap {
        height,
        width,
        depth: trace.residual_slices.len(),
        layers,
    })
}

#[derive(Clone, Debug)]
pub struct LayerReport {
    /// RMSE in photoelectrons after `d` layers; entry 0 is the noisy input.
    pub rmse: Vec<f64>,
    /// The clipped intensity estimate after `d` layers, same indexing as `rmse`.
    pub estimates: Vec<IntensityField>,
    pub dominant: DominantMap,
}

impl LayerReport {
    /// Fraction of consecutive depth steps on which the RMSE strictly decreases.
    pub fn monotone_fraction(&self) -> f64 {
        let steps = self.rmse.len() - 1;
        let down = self.rmse.windows(2).filter(|w| w[1] < w[0]).count();
        down as f64 / steps as f64
    }

    /// `|clean - estimate_d| / peak` for each depth, for dumping as images.
    pub fn error_images(&self, clean: &IntensityField, peak: f64) -> Vec<Image> {
        self.estimates
            .iter()
            .map(|e| {
                let data = e.data().iter().zip(clean.data()).map(|(a, b)| (a - b).abs() / peak).collect();
                Image::new(e.height(), e.width(), data).expect("finite by construction")
            })
            .collect()
    }

    /// Columns `depth,rmse`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["depth", "rmse"])?;
        for (d, r) in self.rmse.iter().enumerate() {
            w.write_record([d.to_string(), super::fixed(*r)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Error profile of an existing trace against the clean intensity.
pub fn rmse_profile(weights: &ModelWeights, clean: &IntensityField, trace: &ForwardTrace) -> Result<LayerReport> {
    let estimates: Vec<IntensityField> = std::iter::once(&trace.input)
        .chain(&trace.cumulative_estimates)
        .map(|w| weights.to_clipped_intensity(w))
        .collect();
    let rmse = estimates.iter().map(|e| rmse(clean, e)).collect::<Result<Vec<_>>>()?;
    Ok(LayerReport {
        rmse,
        estimates,
        dominant: dominant_layer_map(trace)?,
    })
}

/// Denoise `counts` and measure the error after every layer.
pub fn layer_profile(weights: &ModelWeights, clean: &IntensityField, counts: &CountImage) -> Result<LayerReport> {
    if clean.dims() != counts.dims() {
        return domain(format!(
            "clean image is {:?} but counts are {:?}",
            clean.dims(),
            counts.dims()
        ));
    }
    let trace = denoise_traced(weights, counts)?;
    rmse_profile(weights, clean, &trace)
}
