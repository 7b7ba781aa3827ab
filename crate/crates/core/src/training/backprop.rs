//! Gradients of the central-crop L2 loss with respect to every trainable parameter.

use crate::error::{domain, Error, Result};
use crate::imaging::{crop_center, Image};
use crate::network::conv::{col2im_add, im2col, matmul_nt_add, matmul_tn, TAPS};
use crate::network::{is_linear_layer, run_stack, variant_inputs, LayerWeights, ModelWeights, Variant};
use crate::noise::CountImage;
use crate::tensor::Tensor3;
use crate::vst::{anscombe_inverse_unbiased, anscombe_inverse_unbiased_derivative};

/// Mean squared error over the region left after removing `margin` pixels per side.
pub fn loss_central_l2(pred: &Image, target: &Image, margin: usize) -> Result<f64> {
    check_loss_dims(pred, target, margin)?;
    let (h, w) = pred.dims();
    let mut sum = 0.0;
    for y in margin..h - margin {
        for x in margin..w - margin {
            let d = pred.get(y, x) - target.get(y, x);
            sum += d * d;
        }
    }
    Ok(sum / ((h - 2 * margin) * (w - 2 * margin)) as f64)
}

fn check_loss_dims(pred: &Image, target: &Image, margin: usize) -> Result<()> {
    if pred.dims() != target.dims() {
        return domain(format!(
            "loss: prediction is {:?} but target is {:?}",
            pred.dims(),
            target.dims()
        ));
    }
    if 2 * margin >= pred.height().min(pred.width()) {
        return domain(format!(
            "loss: margin {margin} leaves no pixels in a {}x{} patch",
            pred.height(),
            pred.width()
        ));
    }
    Ok(())
}

/// Per-parameter gradients, laid out exactly like [`ModelWeights::layers`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerWeights>,
}

impl Gradients {
    pub fn zeros_like(weights: &ModelWeights) -> Self {
        Self {
            layers: weights
                .layers
                .iter()
                .map(|l| LayerWeights::zeros(l.out_ch, l.in_ch))
                .collect(),
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.kernels.iter().chain(&l.biases))
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.kernels.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Flat view in storage order (layer, kernels then biases).
    pub fn flatten(&self) -> Vec<f64> {
        self.values().copied().collect()
    }
}

/// Loss value and gradients for one patch.
#[derive(Clone, Debug)]
pub struct Backprop {
    pub loss: f64,
    pub gradients: Gradients,
}

/// Gradient of [`loss_central_l2`] for one patch.
///
/// `input` is the normalized noisy patch for the plain network, or the raw counts (as
/// reals) for the stabilized variant. `target` is the normalized clean patch. The fixed
/// box layer of the variant has no parameters here and receives no gradient.
pub fn backward(weights: &ModelWeights, input: &Image, target: &Image, margin: usize) -> Result<Backprop> {
    backward_weighted(weights, input, target, margin, 1.0)
}

/// [`backward`] for the loss multiplied by `weight`.
pub fn backward_weighted(
    weights: &ModelWeights,
    input: &Image,
    target: &Image,
    margin: usize,
    weight: f64,
) -> Result<Backprop> {
    weights.validate()?;
    check_loss_dims(input, target, margin)?;
    // Pixels farther than the receptive radius from the loss region cannot affect it,
    // so the pass runs on the smallest window that still determines the loss exactly.
    let trim = margin.saturating_sub(weights.config().receptive_radius());
    if trim > 0 {
        let input = crop_center(input, trim)?;
        let target = crop_center(target, trim)?;
        backward_exact(weights, &input, &target, margin - trim, weight)
    } else {
        backward_exact(weights, input, target, margin, weight)
    }
}

pub(crate) fn backward_exact(
    weights: &ModelWeights,
    input: &Image,
    target: &Image,
    margin: usize,
    weight: f64,
) -> Result<Backprop> {
    let (h, w) = input.dims();
    let n = h * w;
    let peak = weights.peak.value();
    let (stack_input, skip) = match weights.variant {
        Variant::Plain => (Tensor3::from_image(input), input.clone()),
        Variant::VstBinned => {
            let counts = counts_from_image(input, weights)?;
            variant_inputs(&counts)
        }
    };
    let pass = run_stack(&weights.layers, stack_input, true);

    let mut sum = skip.into_data();
    for r in &pass.residuals {
        sum.iter_mut().zip(r).for_each(|(s, v)| *s += v);
    }
    let pred: Vec<f64> = match weights.variant {
        Variant::Plain => sum.clone(),
        Variant::VstBinned => sum.iter().map(|&d| anscombe_inverse_unbiased(d) / peak - 0.5).collect(),
    };

    let region = ((h - 2 * margin) * (w - 2 * margin)) as f64;
    let mut loss = 0.0;
    let mut g_sum = vec![0.0; n];
    for y in margin..h - margin {
        for x in margin..w - margin {
            let i = y * w + x;
            let d = pred[i] - target.get(y, x);
            loss += d * d;
            let g = weight * 2.0 * d / region;
            g_sum[i] = match weights.variant {
                Variant::Plain => g,
                Variant::VstBinned => g * anscombe_inverse_unbiased_derivative(sum[i]) / peak,
            };
        }
    }
    loss /= region;
    if !loss.is_finite() {
        return Err(Error::Numeric("loss is not finite".into()));
    }

    let depth = weights.layers.len();
    let mut grads = Gradients::zeros_like(weights);
    // gradient w.r.t. the propagated output of the current layer
    let mut g_out: Option<Vec<f64>> = None;
    for l in (0..depth).rev() {
        let layer = &weights.layers[l];
        let features = layer.out_ch;
        let k = layer.in_ch * TAPS;
        let activation = &pass.activations[l];

        let (rows, delta) = match g_out.take() {
            None => (1, g_sum.clone()),
            Some(mut g) => {
                if !is_linear_layer(l, depth) {
                    let output = &pass.activations[l + 1];
                    for (gv, &a) in g.iter_mut().zip(output.data()) {
                        if a <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                }
                g.extend_from_slice(&g_sum);
                (features, g)
            }
        };
        let first_row = features - rows;

        let col = im2col(activation.data(), layer.in_ch, h, w);
        let grad = &mut grads.layers[l];
        matmul_nt_add(&delta, &col, &mut grad.kernels[first_row * k..], rows, n, k);
        for (r, plane) in delta.chunks_exact(n).enumerate() {
            grad.biases[first_row + r] += plane.iter().sum::<f64>();
        }

        if l > 0 {
            let mut dcol = col;
            matmul_tn(&layer.kernels[first_row * k..], &delta, &mut dcol, k, rows, n);
            let mut g_in = vec![0.0; layer.in_ch * n];
            col2im_add(&dcol, layer.in_ch, h, w, &mut g_in);
            g_out = Some(g_in);
        }
    }
    if !grads.is_finite() {
        return Err(Error::Numeric("gradient is not finite".into()));
    }
    Ok(Backprop {
        loss: loss * weight,
        gradients: grads,
    })
}

fn counts_from_image(img: &Image, weights: &ModelWeights) -> Result<CountImage> {
    let mut counts = Vec::with_capacity(img.len());
    for &v in img.data() {
        if v < 0.0 || v.fract() != 0.0 || v > f64::from(u32::MAX) {
            return domain(format!("stabilized variant expects integer counts, got {v}"));
        }
        counts.push(v as u32);
    }
    CountImage::new(img.height(), img.width(), counts, weights.peak)
}

/// Loss only, through the same path as [`backward`]. Used by gradient checks.
pub fn patch_loss(weights: &ModelWeights, input: &Image, target: &Image, margin: usize) -> Result<f64> {
    check_loss_dims(input, target, margin)?;
    let pred = match weights.variant {
        Variant::Plain => crate::network::forward(weights, input)?.final_estimate,
        Variant::VstBinned => {
            let counts = counts_from_image(input, weights)?;
            let out = crate::network::forward_vst_variant(weights, &counts)?;
            out.estimate.map(|v| v / weights.peak.value() - 0.5)
        }
    };
    loss_central_l2(&pred, target, margin)
}
