//! Overfit the toy preset on eight synthetic 64x64 patches at peak 8 and report the
//! loss drop and the PSNR gain on the training patches.
//!
//! cargo run --release --example train_toy [iterations] [learning-rate]

use std::time::Instant;

use photon_denoise::imaging::{psnr, scale_to_peak, Peak};
use photon_denoise::network::denoise;
use photon_denoise::noise::{degrade, Seed, Stream};
use photon_denoise::synth::scenes;
use photon_denoise::training::{train, Preset, TrainConfig};

fn main() -> photon_denoise::Result<()> {
    let peak = Peak::new(8.0)?;
    let mut config = TrainConfig::preset(Preset::Toy, peak, Seed(1));
    if let Some(n) = std::env::args().nth(1) {
        config.iterations = n.parse().expect("iterations must be an integer");
    }
    if let Some(lr) = std::env::args().nth(2) {
        config.adam.lr = lr.parse().expect("learning rate must be a number");
    }
    let patches = scenes(8, 64, 64, Seed(7));

    let start = Instant::now();
    let (weights, history) = train(&patches, &config, &[])?;
    let elapsed = start.elapsed().as_secs_f64();
    let window = 50.min(history.losses.len());
    let first = history.smoothed_loss(0, window);
    let last = history.smoothed_loss(history.losses.len() - window, window);
    println!("{} iterations in {elapsed:.1} s", config.iterations);
    println!("smoothed loss {first:.5} -> {last:.5} (ratio {:.3})", last / first);

    let mut rng = Stream::new(Seed(99));
    let (mut noisy, mut denoised) = (0.0, 0.0);
    for p in &patches {
        let clean = scale_to_peak(p, peak)?;
        let counts = degrade(&clean, peak, &mut rng)?;
        noisy += psnr(&clean, &counts.to_image(), peak)?;
        denoised += psnr(&clean, &denoise(&weights, &counts)?, peak)?;
    }
    let n = patches.len() as f64;
    println!("training patches: noisy {:.2} dB, denoised {:.2} dB", noisy / n, denoised / n);
    Ok(())
}
