//! The stabilized variant: a fixed layer of 1x1, 3x3, 5x5 and 7x7 photon sums, Anscombe
//! on each channel, the residual stack on top, and the unbiased inverse at the end.
//! Trained side by side with the plain network at a very low peak.
//!
//! At low peaks most sums sit at the Anscombe floor, below which the inverse is clamped
//! to zero and passes no gradient; the variant therefore uses a smaller step size.
//!
//! cargo run --release --example vst_variant

use photon_denoise::evalbench::evaluate;
use photon_denoise::imaging::Peak;
use photon_denoise::network::{NetworkConfig, Variant};
use photon_denoise::noise::Seed;
use photon_denoise::synth::scenes;
use photon_denoise::training::{train, Preset, TrainConfig};

fn main() -> photon_denoise::Result<()> {
    let peak = Peak::new(2.0)?;
    let data = scenes(8, 64, 64, Seed(2));
    let test: Vec<_> = scenes(4, 80, 80, Seed(3))
        .into_iter()
        .enumerate()
        .map(|(i, img)| (format!("scene{i}"), img))
        .collect();
    for variant in [Variant::Plain, Variant::VstBinned] {
        let mut config = TrainConfig::preset(Preset::Toy, peak, Seed(1));
        config.iterations = 600;
        config.network = NetworkConfig { variant, ..config.network };
        if variant == Variant::VstBinned {
            config.adam.lr = 1e-4;
        }
        let (weights, _) = train(&data, &config, &[])?;
        if let Some(fixed) = weights.fixed_layer() {
            println!("fixed input layer: box sizes {:?}, trainable: {}", fixed.sizes(), fixed.trainable());
        }
        let report = evaluate(&weights, &test, peak, 3, Seed(4), 1)?;
        println!(
            "{:>10}: noisy {:.2} dB -> denoised {:.2} dB",
            variant.name(),
            report.mean_noisy(),
            report.mean_denoised()
        );
    }
    Ok(())
}
