//! The classical route to Poisson denoising: bin, stabilize with Anscombe, denoise as
//! if the noise were unit Gaussian, invert without bias and interpolate back.
//! The Gaussian-domain denoiser here is a plain 5x5 mean filter.
//!
//! cargo run --release --example vst_pipeline

use photon_denoise::imaging::{clip, psnr, scale_to_peak, Image, Peak};
use photon_denoise::noise::{degrade, Seed, Stream};
use photon_denoise::synth::scene;
use photon_denoise::vst::{anscombe_forward, anscombe_inverse_algebraic, anscombe_inverse_unbiased, classical_pipeline};

fn mean_filter(img: &Image) -> Image {
    let (h, w) = img.dims();
    Image::from_fn(h, w, |y, x| {
        let (mut sum, mut n) = (0.0, 0.0);
        for yy in y.saturating_sub(2)..(y + 3).min(h) {
            for xx in x.saturating_sub(2)..(x + 3).min(w) {
                sum += img.get(yy, xx);
                n += 1.0;
            }
        }
        sum / n
    })
}

fn main() -> photon_denoise::Result<()> {
    println!("bias of the two inverses at small means:");
    for lambda in [0.5, 1.0, 2.0, 5.0] {
        let mut rng = Stream::new(Seed(1));
        let n = 50_000;
        let mean_d = (0..n)
            .map(|_| anscombe_forward(photon_denoise::noise::sample_poisson(lambda, &mut rng).unwrap() as f64).unwrap())
            .sum::<f64>()
            / n as f64;
        println!(
            "  lambda {lambda:>4}: algebraic {:.3}, unbiased {:.3}",
            anscombe_inverse_algebraic(mean_d).value,
            anscombe_inverse_unbiased(mean_d)
        );
    }

    let clean = scene(128, 128, &mut Stream::new(Seed(5)));
    for peak in [1.0, 4.0] {
        let peak = Peak::new(peak)?;
        let field = scale_to_peak(&clean, peak)?;
        let counts = degrade(&field, peak, &mut Stream::new(Seed(6)))?;
        let noisy = psnr(&field, &clip(&counts.to_image(), 0.0, peak.value()), peak)?;
        print!("peak {:>3}: noisy {noisy:.2} dB", peak.value());
        for bin in [1, 2, 3] {
            let estimate = clip(&classical_pipeline(&counts, bin, mean_filter)?, 0.0, peak.value());
            print!(", bin {bin}: {:.2} dB", psnr(&field, &estimate, peak)?);
        }
        println!();
    }
    Ok(())
}
