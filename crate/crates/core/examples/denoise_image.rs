//! Denoise one image end to end: load (or synthesize) a clean image, simulate capture,
//! run a trained network and save the three views.
//!
//! cargo run --release --example denoise_image [weights.dnz] [image.pgm|png]
//!
//! Without a weights file a toy network is trained for a few hundred iterations and
//! saved as `quick.dnz`.

use photon_denoise::imaging::{clip, load_grayscale, psnr, save_pgm, scale_to_peak, Peak};
use photon_denoise::network::{denoise, load_weights, save_weights};
use photon_denoise::noise::{degrade, Seed, Stream};
use photon_denoise::synth::{scene, scenes};
use photon_denoise::training::{train, Preset, TrainConfig};

fn main() -> photon_denoise::Result<()> {
    let mut args = std::env::args().skip(1);
    let weights = match args.next() {
        Some(path) => load_weights(path)?,
        None => {
            let mut config = TrainConfig::preset(Preset::Toy, Peak::new(4.0)?, Seed(1));
            config.iterations = 400;
            println!("no weights given; training a toy network at peak 4 for 400 iterations");
            let (w, _) = train(&scenes(8, 64, 64, Seed(2)), &config, &[])?;
            save_weights(&w, "quick.dnz")?;
            w
        }
    };
    let peak = weights.peak;
    let clean = match args.next() {
        Some(path) => load_grayscale(path)?,
        None => scene(96, 96, &mut Stream::new(Seed(40))),
    };

    let field = scale_to_peak(&clean, peak)?;
    let counts = degrade(&field, peak, &mut Stream::new(Seed(41)))?;
    let noisy = clip(&counts.to_image(), 0.0, peak.value());
    let estimate = denoise(&weights, &counts)?;
    println!(
        "peak {peak}: noisy {:.2} dB -> denoised {:.2} dB",
        psnr(&field, &noisy, peak)?,
        psnr(&field, &estimate, peak)?
    );
    let p = peak.value();
    save_pgm("clean.pgm", &clean)?;
    save_pgm("noisy.pgm", &noisy.map(|v| v / p))?;
    save_pgm("denoised.pgm", &estimate.map(|v| v / p))?;
    println!("wrote clean.pgm, noisy.pgm, denoised.pgm");
    Ok(())
}
