//! Command-line front end. [`run`] parses arguments, dispatches to the library and maps
//! failures to exit codes: 0 success, 1 usage, 2 data or format error, 3 numeric failure.
//!
//! Count images travel as 8-bit PGM whose bytes are raw photon counts. Real-valued
//! matrices (network estimates, transform outputs) travel as headerless CSV.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use log::info;

use crate::error::{Error, Result};
use crate::evalbench::{compare, evaluate, layer_profile, read_report_csv, write_comparison_csv, write_report_csv};
use crate::imaging::{load_dir, load_grayscale, load_pgm_raw, save_pgm, scale_to_peak, write_pgm, Image, Peak};
use crate::network::{denoise, load_weights, save_weights, NetworkConfig, Variant};
use crate::noise::{degrade, CountImage, Seed, Stream};
use crate::training::{fine_tune, train, Preset, TrainConfig, FINE_TUNE_ITERATIONS};
use crate::vst::{anscombe_forward, anscombe_inverse_algebraic, anscombe_inverse_unbiased};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable holding the log filter, e.g. `DENOISE_LOG=debug`.
pub const LOG_ENV: &str = "DENOISE_LOG";

#[derive(Parser, Debug)]
#[command(name = "photon-denoise", version, about = "Denoise photon-limited images with a residual CNN")]
struct Cli {
    /// Worker threads for training and evaluation; 1 keeps everything sequential.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    Paper,
    Small,
    Toy,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Paper => Preset::Paper,
            PresetArg::Small => Preset::Small,
            PresetArg::Toy => Preset::Toy,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Plain,
    VstBinned,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scale a clean image to a peak and draw Poisson counts; writes counts as PGM bytes.
    AddNoise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        peak: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Denoise a counts PGM. A `.csv` output holds photoelectrons; any other
    /// extension gets an 8-bit PGM normalized by the peak.
    Denoise {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Must match the peak stored in the weights.
        #[arg(long)]
        peak: Option<f64>,
    },
    /// Train a network from scratch on every PGM/PNG in a directory.
    Train {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        peak: f64,
        #[arg(long, value_enum, default_value = "paper")]
        preset: PresetArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_weights: PathBuf,
        #[arg(long, value_enum, default_value = "plain")]
        variant: VariantArg,
        /// Override the preset's iteration count.
        #[arg(long)]
        iterations: Option<usize>,
        /// Override the preset's Adam learning rate.
        #[arg(long)]
        lr: Option<f64>,
        /// Images scored for the validation PSNR snapshots.
        #[arg(long)]
        validation_dir: Option<PathBuf>,
    },
    /// Continue training existing weights on one class of images.
    FineTune {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        class_dir: PathBuf,
        #[arg(long)]
        out_weights: PathBuf,
        #[arg(long, default_value_t = FINE_TUNE_ITERATIONS)]
        iterations: usize,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long, value_enum, default_value = "paper")]
        preset: PresetArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to the class directory name.
        #[arg(long)]
        class_tag: Option<String>,
    },
    /// Score weights on a directory of clean images.
    Evaluate {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        peak: f64,
        #[arg(long, default_value_t = 1)]
        realizations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
    },
    /// Paired comparison of two evaluation reports (A against the incumbent B).
    Compare {
        #[arg(long)]
        report_a: PathBuf,
        #[arg(long)]
        report_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-layer error curve, dominant-layer map and per-depth error images.
    Introspect {
        #[arg(long)]
        weights: PathBuf,
        /// Counts PGM.
        #[arg(long = "in")]
        input: PathBuf,
        /// Clean `[0, 1]` image of the same scene.
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Apply the Anscombe transform or one of its inverses elementwise.
    #[command(group(ArgGroup::new("direction").required(true).args(["forward", "inverse_algebraic", "inverse_unbiased"])))]
    Vst {
        #[arg(long)]
        forward: bool,
        #[arg(long)]
        inverse_algebraic: bool,
        #[arg(long)]
        inverse_unbiased: bool,
        /// Counts PGM or headerless CSV matrix.
        #[arg(long = "in")]
        input: PathBuf,
        /// `.csv` keeps full precision; `.pgm` rounds to byte levels.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parse `args` (including the program name) and execute. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn read_counts(path: &Path, peak: Peak) -> Result<CountImage> {
    let (h, w, bytes) = load_pgm_raw(path)?;
    CountImage::new(h, w, bytes.into_iter().map(u32::from).collect(), peak)
}

/// Headerless CSV, one image row per line, shortest round-trip float formatting.
pub fn write_matrix_csv(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in img.data().chunks(img.width()) {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Image> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut data = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (line, record) in r.records().enumerate() {
        let record = record?;
        if *width.get_or_insert(record.len()) != record.len() {
            return crate::error::format_err(line as u64 + 1, "ragged matrix row");
        }
        for v in &record {
            data.push(v.trim().parse::<f64>().map_err(|_| Error::Format {
                offset: line as u64 + 1,
                message: format!("line {}: {v:?} is not a number", line + 1),
            })?);
        }
        height += 1;
    }
    Image::new(height, width.unwrap_or(0), data)
}

fn write_bytes_pgm(path: &Path, img: &Image) -> Result<()> {
    let bytes: Vec<u8> = img.data().iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    write_pgm(path, img.height(), img.width(), &bytes)
}

fn execute(cli: Cli) -> Result<()> {
    let threads = cli.threads.max(1);
    match cli.command {
        Command::AddNoise { input, out, peak, seed } => {
            let peak = Peak::new(peak)?;
            let clean = scale_to_peak(&load_grayscale(&input)?, peak)?;
            let counts = degrade(&clean, peak, &mut Stream::new(Seed(seed)))?;
            let bytes = counts
                .counts()
                .iter()
                .map(|&c| u8::try_from(c))
                .collect::<std::result::Result<Vec<u8>, _>>()
                .map_err(|_| Error::Domain("a count exceeds 255 and cannot be stored in an 8-bit PGM; use a lower peak".into()))?;
            write_pgm(&out, counts.height(), counts.width(), &bytes)?;
            info!("wrote {} ({} photons)", out.display(), counts.total());
        }
        Command::Denoise { weights, input, out, peak } => {
            let weights = load_weights(&weights)?;
            let peak = match peak {
                Some(p) => Peak::new(p)?,
                None => weights.peak,
            };
            let counts = read_counts(&input, peak)?;
            let estimate = denoise(&weights, &counts)?;
            if is_csv(&out) {
                write_matrix_csv(&out, &estimate)?;
            } else {
                save_pgm(&out, &estimate.map(|v| v / peak.value()))?;
            }
        }
        Command::Train {
            data_dir,
            peak,
            preset,
            seed,
            out_weights,
            variant,
            iterations,
            lr,
            validation_dir,
        } => {
            let mut config = TrainConfig::preset(preset.into(), Peak::new(peak)?, Seed(seed));
            if let VariantArg::VstBinned = variant {
                config.network = NetworkConfig {
                    variant: Variant::VstBinned,
                    ..config.network
                };
            }
            if let Some(n) = iterations {
                config.iterations = n;
            }
            if let Some(lr) = lr {
                config.adam.lr = lr;
            }
            config.threads = threads;
            let dataset: Vec<Image> = load_dir(&data_dir)?.into_iter().map(|(_, img)| img).collect();
            let validation: Vec<Image> = match validation_dir {
                Some(dir) => load_dir(dir)?.into_iter().map(|(_, img)| img).collect(),
                None => Vec::new(),
            };
            info!("training on {} images for {} iterations", dataset.len(), config.iterations);
            let (weights, history) = train(&dataset, &config, &validation)?;
            save_weights(&weights, &out_weights)?;
            history.write_csv(history_path(&out_weights))?;
        }
        Command::FineTune {
            base,
            class_dir,
            out_weights,
            iterations,
            lr,
            preset,
            seed,
            class_tag,
        } => {
            let base = load_weights(&base)?;
            let mut config = TrainConfig::preset(preset.into(), base.peak, Seed(seed));
            config.iterations = iterations;
            if let Some(lr) = lr {
                config.adam.lr = lr;
            }
            config.threads = threads;
            let tag = match class_tag {
                Some(t) => t,
                None => class_dir
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "class".into()),
            };
            let named = load_dir(&class_dir)?;
            let images: Vec<Image> = named.iter().map(|(_, img)| img.clone()).collect();
            let tuned = fine_tune(&base, &images, &config, &tag)?;
            save_weights(&tuned.weights, &out_weights)?;
            tuned.history.write_csv(history_path(&out_weights))?;
            let test: Vec<&str> = tuned.split.test.iter().map(|&i| named[i].0.as_str()).collect();
            info!("held-out test images: {}", test.join(" "));
        }
        Command::Evaluate {
            weights,
            data_dir,
            peak,
            realizations,
            seed,
            report,
        } => {
            let weights = load_weights(&weights)?;
            let dataset = load_dir(&data_dir)?;
            let result = evaluate(&weights, &dataset, Peak::new(peak)?, realizations, Seed(seed), threads)?;
            write_report_csv(&result, &report)?;
            info!(
                "mean PSNR: noisy {:.4} dB, denoised {:.4} dB",
                result.mean_noisy(),
                result.mean_denoised()
            );
        }
        Command::Compare { report_a, report_b, out } => {
            let c = compare(&read_report_csv(report_a)?, &read_report_csv(report_b)?)?;
            write_comparison_csv(&c, &out)?;
            info!(
                "A wins {:.1}%, B wins {:.1}%, zero crossing after {} of {}",
                c.wins_a_pct,
                c.wins_b_pct,
                c.zero_crossing,
                c.profile.len()
            );
        }
        Command::Introspect {
            weights,
            input,
            clean,
            out_dir,
        } => {
            let weights = load_weights(&weights)?;
            let counts = read_counts(&input, weights.peak)?;
            let clean = scale_to_peak(&load_grayscale(&clean)?, weights.peak)?;
            let report = layer_profile(&weights, &clean, &counts)?;
            fs::create_dir_all(&out_dir)?;
            report.write_csv(out_dir.join("layer_rmse.csv"))?;
            report.dominant.save_pgm(out_dir.join("dominant_layer.pgm"))?;
            for (d, img) in report.error_images(&clean, weights.peak.value()).iter().enumerate() {
                save_pgm(out_dir.join(format!("error_depth_{d:02}.pgm")), img)?;
            }
            info!("RMSE decreases on {:.0}% of depth steps", 100.0 * report.monotone_fraction());
        }
        Command::Vst {
            forward,
            inverse_algebraic,
            input,
            out,
            ..
        } => {
            let values = if is_csv(&input) {
                read_matrix_csv(&input)?
            } else {
                let (h, w, bytes) = load_pgm_raw(&input)?;
                Image::new(h, w, bytes.into_iter().map(f64::from).collect())?
            };
            let mapped = if forward {
                let data = values.data().iter().map(|&v| anscombe_forward(v)).collect::<Result<Vec<_>>>()?;
                Image::new(values.height(), values.width(), data)?
            } else if inverse_algebraic {
                values.map(|d| anscombe_inverse_algebraic(d).value)
            } else {
                values.map(anscombe_inverse_unbiased)
            };
            if is_csv(&out) {
                write_matrix_csv(&out, &mapped)?;
            } else {
                write_bytes_pgm(&out, &mapped)?;
            }
        }
    }
    Ok(())
}

/// Sidecar written next to trained weights: `<weights file name>.history.csv`.
pub fn history_path(weights: &Path) -> PathBuf {
    let mut name = weights.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".history.csv");
    weights.with_file_name(name)
}
