//! Class-aware denoising: start from a general network and keep training on one class
//! of images (here posterized, cartoon-like scenes), then score both networks on the
//! class's held-out test split.
//!
//! cargo run --release --example fine_tune_class

use photon_denoise::evalbench::{compare, evaluate};
use photon_denoise::imaging::{Image, Peak};
use photon_denoise::noise::Seed;
use photon_denoise::synth::scenes;
use photon_denoise::training::{fine_tune, train, Preset, TrainConfig};

fn posterize(img: &Image) -> Image {
    img.map(|v| (v * 3.0).round() / 3.0)
}

fn main() -> photon_denoise::Result<()> {
    let peak = Peak::new(4.0)?;
    let mut config = TrainConfig::preset(Preset::Toy, peak, Seed(1));
    config.iterations = 400;
    let (base, _) = train(&scenes(16, 64, 64, Seed(2)), &config, &[])?;

    let class: Vec<Image> = scenes(30, 64, 64, Seed(3)).iter().map(posterize).collect();
    config.iterations = 400;
    let tuned = fine_tune(&base, &class, &config, "cartoon")?;
    println!(
        "split: {} train / {} validation / {} test",
        tuned.split.train.len(),
        tuned.split.validation.len(),
        tuned.split.test.len()
    );

    let test: Vec<_> = tuned.split.test.iter().map(|&i| (format!("class{i:02}"), class[i].clone())).collect();
    let a = evaluate(&tuned.weights, &test, peak, 3, Seed(5), 1)?;
    let b = evaluate(&base, &test, peak, 3, Seed(5), 1)?;
    let c = compare(&a, &b)?;
    println!(
        "class test set: general {:.2} dB, fine-tuned {:.2} dB; fine-tuned wins {:.0}% of images",
        b.mean_denoised(),
        a.mean_denoised(),
        c.wins_a_pct
    );
    println!("class tag stored in weights: {:?}", tuned.weights.class_tag);
    Ok(())
}
