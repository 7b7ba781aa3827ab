use rand_distr::{Distribution, StandardNormal};

use super::conv::TAPS;
use super::{ModelWeights, NetworkConfig};
use crate::error::Result;
use crate::imaging::Peak;
use crate::noise::Stream;

/// Extra factor on the extracted-channel kernels so a fresh network starts near identity.
/// It is divided by `sqrt(depth)` because all layers' components are summed.
pub const RESIDUAL_INIT_SCALE: f64 = 0.1;

/// He-normal kernels (`std = sqrt(2 / (9 * in_ch))`), zero biases, and extracted-channel
/// kernels further scaled by `RESIDUAL_INIT_SCALE / sqrt(depth)`. Draws are taken in
/// storage order, layer by layer.
pub fn init_weights(config: &NetworkConfig, peak: Peak, rng: &mut Stream) -> Result<ModelWeights> {
    let mut weights = ModelWeights::zeros(config, peak)?;
    let residual_scale = RESIDUAL_INIT_SCALE / (config.depth as f64).sqrt();
    for layer in &mut weights.layers {
        let fan_in = (layer.in_ch * TAPS) as f64;
        let std = (2.0 / fan_in).sqrt();
        let per_out = layer.in_ch * TAPS;
        let extracted = layer.out_ch - 1;
        for (i, w) in layer.kernels.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            let scale = if i / per_out == extracted { residual_scale } else { 1.0 };
            *w = z * std * scale;
        }
    }
    Ok(weights)
}
