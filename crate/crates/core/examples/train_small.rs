//! Train the small preset on 50 synthetic scenes, then score ten held-out scenes with
//! five noise realizations each against the noisy input.
//!
//! cargo run --release --example train_small [iterations]

use std::time::Instant;

use photon_denoise::evalbench::evaluate;
use photon_denoise::imaging::Peak;
use photon_denoise::noise::Seed;
use photon_denoise::synth::scenes;
use photon_denoise::training::{train, Preset, TrainConfig};

fn main() -> photon_denoise::Result<()> {
    let peak = Peak::new(8.0)?;
    let mut config = TrainConfig::preset(Preset::Small, peak, Seed(1));
    if let Some(n) = std::env::args().nth(1) {
        config.iterations = n.parse().expect("iterations must be an integer");
    }
    let training = scenes(50, 128, 128, Seed(100));
    let held_out: Vec<_> = scenes(10, 128, 128, Seed(200))
        .into_iter()
        .enumerate()
        .map(|(i, img)| (format!("scene{i:02}"), img))
        .collect();

    let start = Instant::now();
    let (weights, _) = train(&training, &config, &[])?;
    println!("{} iterations in {:.1} s", config.iterations, start.elapsed().as_secs_f64());

    let report = evaluate(&weights, &held_out, peak, 5, Seed(300), 1)?;
    println!(
        "held-out: noisy {:.2} dB, denoised {:.2} dB, gain {:+.2} dB",
        report.mean_noisy(),
        report.mean_denoised(),
        report.mean_gain()
    );
    Ok(())
}
