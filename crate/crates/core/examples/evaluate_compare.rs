//! Evaluate two methods on the same images and noise draws, then compare them the way
//! the reporting tables do: per-image gains, win rates, a sorted gain profile and a
//! method-by-peak table.
//!
//! cargo run --release --example evaluate_compare [out-dir]
//!
//! Method B is the identity network (all-zero weights), i.e. the noisy input itself.

use photon_denoise::evalbench::{
    compare, evaluate, time_denoise, write_comparison_csv, write_report_csv, write_table_csv, TableRow,
};
use photon_denoise::imaging::Peak;
use photon_denoise::network::ModelWeights;
use photon_denoise::noise::Seed;
use photon_denoise::synth::scenes;
use photon_denoise::training::{train, Preset, TrainConfig};

fn main() -> photon_denoise::Result<()> {
    let out_dir = std::env::args().nth(1).unwrap_or_else(|| "eval_demo".into());
    std::fs::create_dir_all(&out_dir)?;
    let peak = Peak::new(8.0)?;
    let mut config = TrainConfig::preset(Preset::Toy, peak, Seed(1));
    config.iterations = 300;
    let (trained, _) = train(&scenes(8, 64, 64, Seed(2)), &config, &[])?;
    let identity = ModelWeights::zeros(&config.network, peak)?;

    let test: Vec<_> = scenes(6, 80, 80, Seed(3))
        .into_iter()
        .enumerate()
        .map(|(i, img)| (format!("scene{i}"), img))
        .collect();
    let a = evaluate(&trained, &test, peak, 3, Seed(4), 1)?;
    let b = evaluate(&identity, &test, peak, 3, Seed(4), 1)?;
    write_report_csv(&a, format!("{out_dir}/trained.csv"))?;
    write_report_csv(&b, format!("{out_dir}/identity.csv"))?;

    let c = compare(&a, &b)?;
    println!("mean PSNR: trained {:.2} dB, identity {:.2} dB", a.mean_denoised(), b.mean_denoised());
    println!("trained wins {:.1}% of images, zero crossing after {}", c.wins_a_pct, c.zero_crossing);
    for (name, gain) in &c.profile {
        println!("  {name}: {gain:+.3} dB");
    }
    write_comparison_csv(&c, format!("{out_dir}/comparison.csv"))?;

    let rows = [
        TableRow { method: "trained", report: &a, time_s: time_denoise(&trained, 256, 5)? },
        TableRow { method: "identity", report: &b, time_s: time_denoise(&identity, 256, 5)? },
    ];
    write_table_csv(&rows, format!("{out_dir}/table.csv"))?;
    println!("reports written to {out_dir}/");
    Ok(())
}
