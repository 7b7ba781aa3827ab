//! Look inside a trained network: how the error falls as residual components are added
//! layer by layer, and which layer changes each pixel the most.
//!
//! cargo run --release --example layer_introspection [out-dir]

use photon_denoise::evalbench::layer_profile;
use photon_denoise::imaging::{save_pgm, scale_to_peak, Peak};
use photon_denoise::noise::{degrade, Seed, Stream};
use photon_denoise::synth::{scene, scenes};
use photon_denoise::training::{train, Preset, TrainConfig};

fn main() -> photon_denoise::Result<()> {
    let out_dir = std::env::args().nth(1).unwrap_or_else(|| "layers_demo".into());
    std::fs::create_dir_all(&out_dir)?;
    let peak = Peak::new(4.0)?;
    let mut config = TrainConfig::preset(Preset::Toy, peak, Seed(1));
    config.iterations = 600;
    let (weights, _) = train(&scenes(8, 64, 64, Seed(2)), &config, &[])?;

    let clean = scale_to_peak(&scene(96, 96, &mut Stream::new(Seed(8))), peak)?;
    let counts = degrade(&clean, peak, &mut Stream::new(Seed(9)))?;
    let report = layer_profile(&weights, &clean, &counts)?;
    for (d, r) in report.rmse.iter().enumerate() {
        println!("depth {d:>2}: RMSE {r:.4} {}", "#".repeat((r * 40.0) as usize));
    }
    println!("RMSE decreases on {:.0}% of depth steps", 100.0 * report.monotone_fraction());

    let mut histogram = vec![0usize; report.dominant.depth + 1];
    report.dominant.layers.iter().for_each(|&l| histogram[l] += 1);
    for (l, n) in histogram.iter().enumerate().skip(1) {
        println!("layer {l:>2} dominates {n} pixels");
    }
    report.write_csv(format!("{out_dir}/layer_rmse.csv"))?;
    report.dominant.save_pgm(format!("{out_dir}/dominant_layer.pgm"))?;
    for (d, img) in report.error_images(&clean, peak.value()).iter().enumerate() {
        save_pgm(format!("{out_dir}/error_depth_{d:02}.pgm"), img)?;
    }
    println!("profile and maps written to {out_dir}/");
    Ok(())
}
