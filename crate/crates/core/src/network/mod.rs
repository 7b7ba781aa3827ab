//! The residual denoising network.
//!
//! Every layer convolves the previous activation with `features` 3x3 kernels. The
//! last output channel is split off as that layer's noise component and added to a
//! running sum; the other `features - 1` channels pass through ReLU (all but the final
//! two layers) or stay linear, and feed the next layer. The estimate is the input plus
//! the sum of all components.
//!
//! The stabilized variant prepends a fixed box-sum layer and an elementwise Anscombe
//! transform, adds the components to the transformed input, and maps the sum back to
//! intensities with the unbiased inverse.

pub mod conv;
mod format;
mod init;

pub use format::{load_weights, read_weights, save_weights, write_weights};
pub use init::{init_weights, RESIDUAL_INIT_SCALE};

use crate::error::{domain, Error, Result};
use crate::imaging::{clip, crop_center, pad_symmetric, Image, IntensityField, Peak};
use crate::noise::CountImage;
use crate::tensor::Tensor3;
use crate::vst::{anscombe, anscombe_inverse_unbiased, box_kernel_stack, BoxKernelStack, VARIANT_BOX_SIZES};
use conv::{im2col, matmul, KERNEL, TAPS};

/// Depth of the full network.
pub const DEFAULT_DEPTH: usize = 20;
/// Output channels per layer in the full network (63 propagated + 1 extracted).
pub const DEFAULT_FEATURES: usize = 64;
/// Trailing layers whose propagated channels skip the ReLU.
pub const LINEAR_TAIL: usize = 2;
/// Reflection padding applied around an image before inference, removed afterwards.
pub const TEST_PAD: usize = 21;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Single-channel normalized input.
    Plain,
    /// Counts through fixed box sums and the Anscombe transform.
    VstBinned,
}

impl Variant {
    pub fn input_channels(self) -> usize {
        match self {
            Variant::Plain => 1,
            Variant::VstBinned => VARIANT_BOX_SIZES.len(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::VstBinned => "vst_binned",
        }
    }
}

/// Network shape: number of layers and output channels per layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetworkConfig {
    pub variant: Variant,
    pub depth: usize,
    pub features: usize,
}

impl NetworkConfig {
    /// Full-size 20 x 64 network, as used by the `paper` preset.
    pub fn paper(variant: Variant) -> Self {
        Self {
            variant,
            depth: DEFAULT_DEPTH,
            features: DEFAULT_FEATURES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return domain("network needs at least one layer");
        }
        if self.features < 2 {
            return domain("layers need at least one propagated and one extracted channel");
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        let first = self.features * (self.variant.input_channels() * TAPS + 1);
        let rest = self.features * ((self.features - 1) * TAPS + 1);
        first + (self.depth - 1) * rest
    }

    /// How far any output pixel can see into the input, box layer included.
    pub fn receptive_radius(&self) -> usize {
        let boxes = match self.variant {
            Variant::Plain => 0,
            Variant::VstBinned => VARIANT_BOX_SIZES.iter().max().unwrap() / 2,
        };
        self.depth + boxes
    }
}

/// One convolution layer: `out_ch x in_ch x 3 x 3` kernels and `out_ch` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights {
    pub out_ch: usize,
    pub in_ch: usize,
    /// Row-major `[out][in][ky][kx]`.
    pub kernels: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerWeights {
    pub fn zeros(out_ch: usize, in_ch: usize) -> Self {
        Self {
            out_ch,
            in_ch,
            kernels: vec![0.0; out_ch * in_ch * TAPS],
            biases: vec![0.0; out_ch],
        }
    }

    #[inline]
    pub fn kernel_index(&self, o: usize, c: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_ch + c) * KERNEL + ky) * KERNEL + kx
    }

    pub fn parameter_count(&self) -> usize {
        self.kernels.len() + self.biases.len()
    }

    fn check(&self) -> Result<()> {
        if self.kernels.len() != self.out_ch * self.in_ch * TAPS || self.biases.len() != self.out_ch {
            return domain(format!(
                "layer {}x{} holds {} kernel taps and {} biases",
                self.out_ch,
                self.in_ch,
                self.kernels.len(),
                self.biases.len()
            ));
        }
        Ok(())
    }
}

/// Trainable parameters of a network plus the metadata needed to use them.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    pub layers: Vec<LayerWeights>,
    pub peak: Peak,
    pub variant: Variant,
    pub class_tag: Option<String>,
}

impl ModelWeights {
    pub fn zeros(config: &NetworkConfig, peak: Peak) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::with_capacity(config.depth);
        let mut in_ch = config.variant.input_channels();
        for _ in 0..config.depth {
            layers.push(LayerWeights::zeros(config.features, in_ch));
            in_ch = config.features - 1;
        }
        Ok(Self {
            layers,
            peak,
            variant: config.variant,
            class_tag: None,
        })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn features(&self) -> usize {
        self.layers.first().map_or(0, |l| l.out_ch)
    }

    pub fn config(&self) -> NetworkConfig {
        NetworkConfig {
            variant: self.variant,
            depth: self.depth(),
            features: self.features(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(LayerWeights::parameter_count).sum()
    }

    /// Check the layer chain: first layer reads the variant's input channels, each later
    /// layer reads the previous layer's propagated channels, all layers share a width.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return domain("model has no layers");
        }
        let features = self.features();
        if features < 2 {
            return domain("layers need at least two output channels");
        }
        let mut expected_in = self.variant.input_channels();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.check()?;
            if layer.out_ch != features || layer.in_ch != expected_in {
                return domain(format!(
                    "layer {} is {}->{}, expected {}->{}",
                    i + 1,
                    layer.in_ch,
                    layer.out_ch,
                    expected_in,
                    features
                ));
            }
            expected_in = features - 1;
        }
        Ok(())
    }

    /// The fixed first layer of the stabilized variant, `None` for the plain network.
    pub fn fixed_layer(&self) -> Option<BoxKernelStack> {
        match self.variant {
            Variant::Plain => None,
            Variant::VstBinned => Some(box_kernel_stack(&VARIANT_BOX_SIZES).expect("valid sizes")),
        }
    }

    /// Map a working-domain image (network input plus components) to photoelectrons,
    /// unclipped.
    pub fn to_intensity(&self, working: &Image) -> Image {
        match self.variant {
            Variant::Plain => {
                let p = self.peak.value();
                working.map(|v| (v + 0.5) * p)
            }
            Variant::VstBinned => working.map(anscombe_inverse_unbiased),
        }
    }

    /// [`to_intensity`](Self::to_intensity) followed by clipping to `[0, peak]`.
    pub fn to_clipped_intensity(&self, working: &Image) -> IntensityField {
        clip(&self.to_intensity(working), 0.0, self.peak.value())
    }
}

/// Per-layer record of a forward pass, all in the network's working domain
/// (normalized for the plain network, Anscombe-stabilized for the variant).
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    /// The image the components are added to.
    pub input: Image,
    /// One extracted channel per layer.
    pub residual_slices: Vec<Image>,
    /// `input + slice_1 + ... + slice_l` for every layer `l`.
    pub cumulative_estimates: Vec<Image>,
    pub final_estimate: Image,
}

impl ForwardTrace {
    fn crop(&self, margin: usize) -> Result<Self> {
        let crop_all = |v: &[Image]| v.iter().map(|i| crop_center(i, margin)).collect::<Result<Vec<_>>>();
        Ok(Self {
            input: crop_center(&self.input, margin)?,
            residual_slices: crop_all(&self.residual_slices)?,
            cumulative_estimates: crop_all(&self.cumulative_estimates)?,
            final_estimate: crop_center(&self.final_estimate, margin)?,
        })
    }
}

/// Output of the stabilized variant: the stabilized-domain trace and the estimate after
/// the unbiased inverse, in photoelectrons.
#[derive(Clone, Debug, PartialEq)]
pub struct VstTrace {
    pub trace: ForwardTrace,
    pub estimate: IntensityField,
}

pub fn relu(t: &Tensor3) -> Tensor3 {
    t.map(|v| v.max(0.0))
}

/// Full 3x3 convolution with zero padding of one pixel; output has `w.out_ch` channels.
pub fn conv2d(input: &Tensor3, w: &LayerWeights) -> Result<Tensor3> {
    w.check()?;
    if input.channels() != w.in_ch {
        return domain(format!(
            "conv2d: input has {} channels, kernels expect {}",
            input.channels(),
            w.in_ch
        ));
    }
    let (h, wd) = (input.height(), input.width());
    let n = h * wd;
    let col = im2col(input.data(), w.in_ch, h, wd);
    let mut out = vec![0.0; w.out_ch * n];
    matmul(&w.kernels, &col, &mut out, w.out_ch, w.in_ch * TAPS, n, false);
    for (o, plane) in out.chunks_exact_mut(n).enumerate() {
        let b = w.biases[o];
        plane.iter_mut().for_each(|v| *v += b);
    }
    Ok(Tensor3::from_raw(w.out_ch, h, wd, out))
}

/// Intermediate results of one pass through the trainable layers.
pub(crate) struct StackPass {
    /// Input of every layer (`activations[0]` is the network input), kept on request.
    pub activations: Vec<Tensor3>,
    /// Extracted channel of every layer.
    pub residuals: Vec<Vec<f64>>,
}

pub(crate) fn is_linear_layer(index: usize, depth: usize) -> bool {
    index + LINEAR_TAIL >= depth
}

pub(crate) fn run_stack(layers: &[LayerWeights], input: Tensor3, keep_activations: bool) -> StackPass {
    let (h, w) = (input.height(), input.width());
    let n = h * w;
    let depth = layers.len();
    let mut residuals = Vec::with_capacity(depth);
    let mut activations = Vec::with_capacity(if keep_activations { depth } else { 0 });
    let mut current = input;
    for (l, layer) in layers.iter().enumerate() {
        let k = layer.in_ch * TAPS;
        let col = im2col(current.data(), layer.in_ch, h, w);
        let propagated = layer.out_ch - 1;
        let last = l + 1 == depth;
        // the final layer's propagated channels feed nothing, so only its extracted row runs
        let rows = if last { 1 } else { layer.out_ch };
        let first_row = layer.out_ch - rows;
        let mut out = vec![0.0; rows * n];
        matmul(&layer.kernels[first_row * k..], &col, &mut out, rows, k, n, false);
        for (r, plane) in out.chunks_exact_mut(n).enumerate() {
            let b = layer.biases[first_row + r];
            plane.iter_mut().for_each(|v| *v += b);
        }
        residuals.push(out[(rows - 1) * n..].to_vec());
        let next = if last {
            None
        } else {
            out.truncate(propagated * n);
            if !is_linear_layer(l, depth) {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            Some(Tensor3::from_raw(propagated, h, w, out))
        };
        let previous = std::mem::replace(&mut current, next.unwrap_or_else(|| Tensor3::zeros(0, h, w)));
        if keep_activations {
            activations.push(previous);
        }
    }
    StackPass {
        activations,
        residuals,
    }
}

fn assemble_trace(input: Image, residuals: Vec<Vec<f64>>) -> Result<ForwardTrace> {
    let (h, w) = input.dims();
    let mut running = input.data().to_vec();
    let mut residual_slices = Vec::with_capacity(residuals.len());
    let mut cumulative_estimates = Vec::with_capacity(residuals.len());
    for r in residuals {
        running.iter_mut().zip(&r).for_each(|(acc, v)| *acc += v);
        residual_slices.push(Image::from_raw(h, w, r));
        cumulative_estimates.push(Image::from_raw(h, w, running.clone()));
    }
    if running.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("forward pass produced a non-finite value".into()));
    }
    Ok(ForwardTrace {
        input,
        residual_slices,
        cumulative_estimates,
        final_estimate: Image::from_raw(h, w, running),
    })
}

fn check_spatial(h: usize, w: usize) -> Result<()> {
    if h < KERNEL || w < KERNEL {
        return domain(format!("network input must be at least 3x3, got {h}x{w}"));
    }
    Ok(())
}

/// Run the plain network on a normalized (`[-1/2, 1/2]`) noisy image.
pub fn forward(weights: &ModelWeights, noisy_normalized: &Image) -> Result<ForwardTrace> {
    weights.validate()?;
    if weights.variant != Variant::Plain {
        return domain("forward expects plain weights; use forward_vst_variant");
    }
    check_spatial(noisy_normalized.height(), noisy_normalized.width())?;
    let pass = run_stack(&weights.layers, Tensor3::from_image(noisy_normalized), false);
    assemble_trace(noisy_normalized.clone(), pass.residuals)
}

/// Network input and skip image for the stabilized variant.
pub(crate) fn variant_inputs(counts: &CountImage) -> (Tensor3, Image) {
    let stack = box_kernel_stack(&VARIANT_BOX_SIZES).expect("valid sizes");
    let binned = stack.apply(counts).map(anscombe);
    let skip = counts.to_image().map(anscombe);
    (binned, skip)
}

/// Run the stabilized variant on raw counts.
pub fn forward_vst_variant(weights: &ModelWeights, counts: &CountImage) -> Result<VstTrace> {
    weights.validate()?;
    if weights.variant != Variant::VstBinned {
        return domain("forward_vst_variant expects vst_binned weights");
    }
    check_spatial(counts.height(), counts.width())?;
    let (input, skip) = variant_inputs(counts);
    let pass = run_stack(&weights.layers, input, false);
    let trace = assemble_trace(skip, pass.residuals)?;
    let estimate = trace.final_estimate.map(anscombe_inverse_unbiased);
    Ok(VstTrace { trace, estimate })
}

fn pad_counts(counts: &CountImage, margin: usize) -> Result<CountImage> {
    let padded = pad_symmetric(&counts.to_image(), margin)?;
    let (h, w) = padded.dims();
    CountImage::new(h, w, padded.data().iter().map(|&v| v as u32).collect(), counts.peak())
}

/// Reflection-pad by [`TEST_PAD`], run the network, and crop back. The returned trace
/// covers the original pixels only.
pub fn denoise_traced(weights: &ModelWeights, counts: &CountImage) -> Result<ForwardTrace> {
    let margin = TEST_PAD.min(counts.height()).min(counts.width());
    let padded = pad_counts(counts, margin)?;
    let trace = match weights.variant {
        Variant::Plain => {
            let normalized = padded.to_normalized().map(|v| v - 0.5);
            forward(weights, &normalized)?
        }
        Variant::VstBinned => forward_vst_variant(weights, &padded)?.trace,
    };
    trace.crop(margin)
}

/// Denoise observed counts; the estimate is in photoelectrons, clipped to `[0, peak]`.
pub fn denoise(weights: &ModelWeights, counts: &CountImage) -> Result<IntensityField> {
    if counts.peak() != weights.peak {
        return domain(format!(
            "counts were generated at peak {} but the weights were trained for peak {}",
            counts.peak(),
            weights.peak
        ));
    }
    let trace = denoise_traced(weights, counts)?;
    Ok(weights.to_clipped_intensity(&trace.final_estimate))
}
