//! Simulate photon-limited capture of one scene at several peak values.
//!
//! cargo run --release --example add_noise [out-dir]

use photon_denoise::imaging::{capped_psnr, clip, psnr, save_pgm, scale_to_peak, Peak};
use photon_denoise::noise::{degrade, Seed, Stream};
use photon_denoise::synth::scene;

fn main() -> photon_denoise::Result<()> {
    let out_dir = std::env::args().nth(1).unwrap_or_else(|| "noise_demo".into());
    std::fs::create_dir_all(&out_dir)?;
    let clean = scene(128, 128, &mut Stream::new(Seed(3)));
    save_pgm(format!("{out_dir}/clean.pgm"), &clean)?;

    println!("{:>6}  {:>10}  {:>9}", "peak", "photons", "PSNR dB");
    for peak in [0.5, 1.0, 2.0, 4.0, 8.0, 30.0] {
        let peak = Peak::new(peak)?;
        let field = scale_to_peak(&clean, peak)?;
        let counts = degrade(&field, peak, &mut Stream::new(Seed(11)))?;
        let noisy = clip(&counts.to_image(), 0.0, peak.value());
        let db = capped_psnr(psnr(&field, &noisy, peak)?);
        println!("{:>6}  {:>10}  {db:>9.2}", peak.value(), counts.total());
        // normalized view of the observation
        save_pgm(format!("{out_dir}/noisy_peak{}.pgm", peak.value()), &noisy.map(|v| v / peak.value()))?;
    }
    println!("images written to {out_dir}/");
    Ok(())
}
