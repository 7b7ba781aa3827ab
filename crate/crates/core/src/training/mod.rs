//! Training: patch sampling, backpropagation, Adam, the training loop and class
//! fine-tuning.

mod adam;
mod backprop;
mod patches;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use backprop::{backward, backward_weighted, loss_central_l2, patch_loss, Backprop, Gradients};
pub use patches::sample_patch;

use std::path::Path;
use std::str::FromStr;

use log::{debug, info, warn};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::imaging::{capped_psnr, normalize_shift, psnr, scale_to_peak, Image, Peak};
use crate::network::{denoise, init_weights, ModelWeights, NetworkConfig, Variant};
use crate::noise::{degrade, Seed, Stream};

/// Default fine-tuning length.
pub const FINE_TUNE_ITERATIONS: usize = 45_000;

/// Stream ids derived from the training seed.
const INIT_STREAM: u64 = 0;
const SAMPLING_STREAM: u64 = 1;
const VALIDATION_STREAM: u64 = 2;
const SPLIT_STREAM: u64 = 3;

/// Named hyperparameter bundles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Full network and optimizer settings as published: 120k iterations of 64 patches.
    Paper,
    /// Narrow 10-layer network, 96x96 patches, 5000 iterations.
    Small,
    /// Narrow 8-layer network overfitting eight 64x64 patches in 2000 iterations.
    Toy,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "small" => Ok(Preset::Small),
            "toy" => Ok(Preset::Toy),
            other => domain(format!("unknown preset {other:?} (expected paper, small or toy)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub network: NetworkConfig,
    pub iterations: usize,
    pub batch: usize,
    pub patch_size: usize,
    pub crop_margin: usize,
    pub adam: AdamConfig,
    pub peak: Peak,
    pub seed: Seed,
    /// Validation snapshot period in iterations; 0 disables snapshots.
    pub validate_every: usize,
    /// Worker threads for per-patch gradients. Results do not depend on this.
    pub threads: usize,
}

impl TrainConfig {
    /// Published protocol: full network, 120k iterations of 64 patches of 128x128,
    /// Adam at 1e-4.
    pub fn paper(peak: Peak, seed: Seed) -> Self {
        Self {
            network: NetworkConfig::paper(Variant::Plain),
            iterations: 120_000,
            batch: 64,
            patch_size: 128,
            crop_margin: 21,
            adam: AdamConfig::default(),
            peak,
            seed,
            validate_every: 500,
            threads: 1,
        }
    }

    pub fn preset(preset: Preset, peak: Peak, seed: Seed) -> Self {
        let paper = Self::paper(peak, seed);
        match preset {
            Preset::Paper => paper,
            Preset::Small => Self {
                network: NetworkConfig {
                    variant: Variant::Plain,
                    depth: 10,
                    features: 16,
                },
                iterations: 5000,
                batch: 2,
                patch_size: 96,
                adam: AdamConfig {
                    lr: 1e-3,
                    ..AdamConfig::default()
                },
                ..paper
            },
            Preset::Toy => Self {
                network: NetworkConfig {
                    variant: Variant::Plain,
                    depth: 8,
                    features: 16,
                },
                iterations: 2000,
                batch: 8,
                patch_size: 64,
                adam: AdamConfig {
                    lr: 3e-4,
                    ..AdamConfig::default()
                },
                ..paper
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.patch_size <= 2 * self.crop_margin {
            return domain(format!(
                "patch size {} must exceed twice the crop margin {}",
                self.patch_size, self.crop_margin
            ));
        }
        let a = &self.adam;
        if !(a.lr >= 0.0 && a.beta1 > 0.0 && a.beta1 < 1.0 && a.beta2 > 0.0 && a.beta2 < 1.0 && a.epsilon > 0.0) {
            return domain("optimizer rates must be positive with betas in (0, 1)");
        }
        if self.batch == 0 {
            return domain("batch must hold at least one patch");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    /// Mean batch loss of every iteration run.
    pub losses: Vec<f64>,
    /// `(iteration, mean PSNR in dB)` snapshots on the validation images.
    pub validation: Vec<(usize, f64)>,
}

impl TrainHistory {
    /// Mean of `window` consecutive losses starting at `start`.
    pub fn smoothed_loss(&self, start: usize, window: usize) -> f64 {
        let end = (start + window).min(self.losses.len());
        let slice = &self.losses[start.min(end)..end];
        slice.iter().sum::<f64>() / slice.len() as f64
    }

    /// Columns `iteration,loss,val_psnr`; iterations count from 1 and `val_psnr` is empty
    /// where no snapshot was taken.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["iteration", "loss", "val_psnr"])?;
        let mut snapshots = self.validation.iter().peekable();
        for (i, loss) in self.losses.iter().enumerate() {
            let iteration = i + 1;
            let val = match snapshots.peek() {
                Some(&&(it, p)) if it == iteration => {
                    snapshots.next();
                    format!("{p:.4}")
                }
                _ => String::new(),
            };
            w.write_record([iteration.to_string(), loss.to_string(), val])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Noisy network input and normalized clean target for one patch.
fn make_example(patch: &Image, variant: Variant, peak: Peak, rng: &mut Stream) -> Result<(Image, Image)> {
    let clean = scale_to_peak(patch, peak)?;
    let counts = degrade(&clean, peak, rng)?;
    let input = match variant {
        Variant::Plain => normalize_shift(&counts.to_normalized()),
        Variant::VstBinned => counts.to_image(),
    };
    Ok((input, normalize_shift(patch)))
}

fn usable_images(dataset: &[Image], patch: usize) -> Result<Vec<&Image>> {
    let usable: Vec<&Image> = dataset
        .iter()
        .enumerate()
        .filter_map(|(i, img)| {
            if img.height() < patch || img.width() < patch {
                warn!(
                    "skipping training image {i}: {}x{} is smaller than the {patch}x{patch} patch",
                    img.height(),
                    img.width()
                );
                None
            } else {
                Some(img)
            }
        })
        .collect();
    if usable.is_empty() {
        return domain("no training image is large enough for the patch size");
    }
    Ok(usable)
}

fn batch_gradient(
    weights: &ModelWeights,
    examples: &[(Image, Image)],
    margin: usize,
    pool: Option<&rayon::ThreadPool>,
) -> Result<(f64, Gradients)> {
    let share = 1.0 / examples.len() as f64;
    let run = |(input, target): &(Image, Image)| backward_weighted(weights, input, target, margin, share);
    let parts: Vec<Result<Backprop>> = match pool {
        Some(pool) => pool.install(|| examples.par_iter().map(run).collect()),
        None => examples.iter().map(run).collect(),
    };
    // fixed patch-index reduction order
    let mut total = Gradients::zeros_like(weights);
    let mut loss = 0.0;
    for part in parts {
        let part = part?;
        loss += part.loss;
        total.add_assign(&part.gradients);
    }
    Ok((loss, total))
}

/// Mean denoised PSNR over `images`, one fixed noise realization each.
pub fn validation_psnr(weights: &ModelWeights, images: &[Image], seed: Seed) -> Result<f64> {
    let mut rng = Stream::derived(seed, VALIDATION_STREAM);
    let mut total = 0.0;
    for img in images {
        let clean = scale_to_peak(img, weights.peak)?;
        let counts = degrade(&clean, weights.peak, &mut rng)?;
        let estimate = denoise(weights, &counts)?;
        total += capped_psnr(psnr(&clean, &estimate, weights.peak)?);
    }
    Ok(total / images.len() as f64)
}

/// Train a freshly initialized network on `dataset` (`[0, 1]` images).
///
/// Every iteration draws `batch` patches (random image, random crop, random flip),
/// scales them to the peak, draws fresh Poisson noise, and takes one Adam step on the
/// central-crop loss. `validation` images, when given, are scored every
/// `validate_every` iterations.
pub fn train(dataset: &[Image], config: &TrainConfig, validation: &[Image]) -> Result<(ModelWeights, TrainHistory)> {
    config.validate()?;
    let mut init_rng = Stream::derived(config.seed, INIT_STREAM);
    let weights = init_weights(&config.network, config.peak, &mut init_rng)?;
    train_from(weights, dataset, config, validation)
}

/// Continue training existing weights. The network shape comes from `weights`.
pub fn train_from(
    mut weights: ModelWeights,
    dataset: &[Image],
    config: &TrainConfig,
    validation: &[Image],
) -> Result<(ModelWeights, TrainHistory)> {
    config.validate()?;
    weights.validate()?;
    if dataset.is_empty() {
        return domain("training dataset is empty");
    }
    let images = usable_images(dataset, config.patch_size)?;
    let pool = if config.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .map_err(|e| Error::Domain(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let mut rng = Stream::derived(config.seed, SAMPLING_STREAM);
    let mut adam = AdamState::new(&weights);
    let mut history = TrainHistory::default();
    for iteration in 1..=config.iterations {
        let mut examples = Vec::with_capacity(config.batch);
        for _ in 0..config.batch {
            let img = images[rng.below(images.len())];
            let patch = sample_patch(img, config.patch_size, &mut rng)?;
            examples.push(make_example(&patch, weights.variant, weights.peak, &mut rng)?);
        }
        let (loss, grads) = batch_gradient(&weights, &examples, config.crop_margin, pool.as_ref())?;
        adam.update(&mut weights, &grads, &config.adam)?;
        history.losses.push(loss);
        debug!("iteration {iteration}: loss {loss:.6}");
        if config.validate_every > 0 && iteration % config.validate_every == 0 {
            if !validation.is_empty() {
                let score = validation_psnr(&weights, validation, config.seed)?;
                info!("iteration {iteration}: loss {loss:.6}, validation PSNR {score:.4} dB");
                history.validation.push((iteration, score));
            } else {
                info!("iteration {iteration}: loss {loss:.6}");
            }
        }
    }
    Ok((weights, history))
}

/// Train / validation / test partition of a class dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..n` split 60 / 20 / 20 (train and validation rounded to nearest,
/// test takes the rest).
pub fn split_dataset(n: usize, seed: Seed) -> DatasetSplit {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = Stream::derived(seed, SPLIT_STREAM);
    for i in (1..n).rev() {
        let j = rng.below(i + 1);
        order.swap(i, j);
    }
    let n_train = (n as f64 * 0.6).round() as usize;
    let n_val = ((n as f64 * 0.2).round() as usize).min(n - n_train);
    let test = order.split_off(n_train + n_val);
    let validation = order.split_off(n_train);
    DatasetSplit {
        train: order,
        validation,
        test,
    }
}

#[derive(Clone, Debug)]
pub struct FineTuned {
    pub weights: ModelWeights,
    pub history: TrainHistory,
    pub split: DatasetSplit,
}

/// Continue training `base` on one semantic class.
///
/// The class images are split 60/20/20; training uses the first part, validation
/// snapshots the second, and the third is left for evaluation. All trainable layers are
/// updated. `config.network` is ignored in favour of the base network's shape.
pub fn fine_tune(base: &ModelWeights, class_dataset: &[Image], config: &TrainConfig, class_tag: &str) -> Result<FineTuned> {
    if base.peak != config.peak {
        return domain(format!(
            "base weights were trained for peak {} but fine-tuning targets peak {}",
            base.peak, config.peak
        ));
    }
    let split = split_dataset(class_dataset.len(), config.seed);
    let mut weights = base.clone();
    weights.class_tag = Some(class_tag.to_string());
    if config.iterations == 0 {
        return Ok(FineTuned {
            weights,
            history: TrainHistory::default(),
            split,
        });
    }
    let pick = |idx: &[usize]| idx.iter().map(|&i| class_dataset[i].clone()).collect::<Vec<_>>();
    let train_set = pick(&split.train);
    let val_set = pick(&split.validation);
    let config = TrainConfig {
        network: base.config(),
        ..config.clone()
    };
    let (weights, history) = train_from(weights, &train_set, &config, &val_set)?;
    Ok(FineTuned {
        weights,
        history,
        split,
    })
}

#[cfg(test)]
mod tests;
