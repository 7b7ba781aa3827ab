//! Evaluation bench: PSNR reports over datasets and noise realizations, paired
//! comparisons with win rates and sorted gain profiles, per-layer error profiles, and
//! the CSV files that carry all of them.
//!
//! Both the noisy input and the estimate are clipped to `[0, peak]` before PSNR, so a
//! network with all-zero weights scores exactly the noisy baseline.

mod compare;
mod layers;
mod table;

pub use compare::{compare, read_comparison_csv, write_comparison_csv, ComparisonReport};
pub use layers::{dominant_layer_map, layer_profile, rmse_profile, DominantMap, LayerReport};
pub use table::{time_denoise, write_table_csv, TableRow};

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{domain, format_err, Error, Result};
use crate::imaging::{capped_psnr, clip, psnr, scale_to_peak, Image, Peak};
use crate::network::{denoise, ModelWeights};
use crate::noise::{degrade, Seed, Stream};

/// Decimal places written to every report CSV.
pub const CSV_DECIMALS: usize = 4;

/// Scores of one image over all realizations.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageScores {
    pub name: String,
    pub noisy_psnr: Vec<f64>,
    pub denoised_psnr: Vec<f64>,
    /// Median wall-clock seconds of one `denoise` call on this image.
    pub runtime_s: f64,
}

impl ImageScores {
    pub fn mean_noisy(&self) -> f64 {
        mean(&self.noisy_psnr)
    }

    pub fn mean_denoised(&self) -> f64 {
        mean(&self.denoised_psnr)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub peak: Peak,
    pub realizations: usize,
    pub images: Vec<ImageScores>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Round exactly as the CSV writer does, so values compare equal after a round trip.
fn round_to(v: f64, decimals: usize) -> f64 {
    format!("{v:.decimals$}").parse().expect("formatted float parses")
}

impl EvalReport {
    /// Mean over images of the per-image mean denoised PSNR.
    pub fn mean_denoised(&self) -> f64 {
        mean(&self.images.iter().map(ImageScores::mean_denoised).collect::<Vec<_>>())
    }

    pub fn mean_noisy(&self) -> f64 {
        mean(&self.images.iter().map(ImageScores::mean_noisy).collect::<Vec<_>>())
    }

    pub fn mean_gain(&self) -> f64 {
        self.mean_denoised() - self.mean_noisy()
    }

    pub fn names(&self) -> Vec<&str> {
        self.images.iter().map(|i| i.name.as_str()).collect()
    }

    /// The report as it reads back from CSV: every value rounded to [`CSV_DECIMALS`].
    pub fn rounded(&self) -> Self {
        let r = |v: &Vec<f64>| v.iter().map(|&x| round_to(x, CSV_DECIMALS)).collect();
        Self {
            peak: Peak::new(round_to(self.peak.value(), CSV_DECIMALS)).unwrap_or(self.peak),
            realizations: self.realizations,
            images: self
                .images
                .iter()
                .map(|i| ImageScores {
                    name: i.name.clone(),
                    noisy_psnr: r(&i.noisy_psnr),
                    denoised_psnr: r(&i.denoised_psnr),
                    runtime_s: round_to(i.runtime_s, CSV_DECIMALS),
                })
                .collect(),
        }
    }

    /// Same images, peak and realizations, with PSNR values bit-identical. Runtimes are
    /// wall-clock and ignored.
    pub fn same_scores(&self, other: &EvalReport) -> bool {
        self.peak == other.peak
            && self.realizations == other.realizations
            && self.images.len() == other.images.len()
            && self.images.iter().zip(&other.images).all(|(a, b)| {
                a.name == b.name && a.noisy_psnr == b.noisy_psnr && a.denoised_psnr == b.denoised_psnr
            })
    }
}

/// Stream for realization `r` of image `index`.
fn realization_stream(seed: Seed, index: usize, r: usize) -> Stream {
    Stream::derived(seed, ((index as u64) << 32) | r as u64)
}

struct Realization {
    noisy: f64,
    denoised: f64,
    seconds: f64,
}

fn run_realization(weights: &ModelWeights, clean: &Image, seed: Seed, index: usize, r: usize) -> Result<Realization> {
    let peak = weights.peak;
    let counts = degrade(clean, peak, &mut realization_stream(seed, index, r))?;
    let noisy = clip(&counts.to_image(), 0.0, peak.value());
    let start = Instant::now();
    let estimate = denoise(weights, &counts)?;
    let seconds = start.elapsed().as_secs_f64();
    Ok(Realization {
        noisy: capped_psnr(psnr(clean, &noisy, peak)?),
        denoised: capped_psnr(psnr(clean, &estimate, peak)?),
        seconds,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Score `weights` on named `[0, 1]` images, `realizations` noise draws per image.
///
/// Realization `r` of image `i` uses its own stream derived from `seed`, so the result
/// does not depend on `threads`.
pub fn evaluate(
    weights: &ModelWeights,
    dataset: &[(String, Image)],
    peak: Peak,
    realizations: usize,
    seed: Seed,
    threads: usize,
) -> Result<EvalReport> {
    if weights.peak != peak {
        return domain(format!(
            "weights were trained for peak {} but evaluation asks for peak {peak}",
            weights.peak
        ));
    }
    if realizations == 0 {
        return domain("at least one noise realization is required");
    }
    let cleans = dataset
        .iter()
        .map(|(_, img)| scale_to_peak(img, peak))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..dataset.len())
        .flat_map(|i| (0..realizations).map(move |r| (i, r)))
        .collect();
    let run = |&(i, r): &(usize, usize)| run_realization(weights, &cleans[i], seed, i, r);
    let results: Vec<Result<Realization>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run).collect())
    } else {
        jobs.iter().map(run).collect()
    };
    let mut results = results.into_iter();
    let mut images = Vec::with_capacity(dataset.len());
    for (name, _) in dataset {
        let mut scores = ImageScores {
            name: name.clone(),
            noisy_psnr: Vec::with_capacity(realizations),
            denoised_psnr: Vec::with_capacity(realizations),
            runtime_s: 0.0,
        };
        let mut times = Vec::with_capacity(realizations);
        for _ in 0..realizations {
            let r = results.next().expect("one result per job")?;
            scores.noisy_psnr.push(r.noisy);
            scores.denoised_psnr.push(r.denoised);
            times.push(r.seconds);
        }
        scores.runtime_s = median(times);
        images.push(scores);
    }
    Ok(EvalReport {
        peak,
        realizations,
        images,
    })
}

const REPORT_HEADER: [&str; 6] = ["image", "peak", "realization", "noisy_psnr", "denoised_psnr", "runtime_s"];

fn fixed(v: f64) -> String {
    format!("{v:.prec$}", prec = CSV_DECIMALS)
}

/// Write one row per (image, realization):
/// `image,peak,realization,noisy_psnr,denoised_psnr,runtime_s`, preceded by a
/// `# peak=..,realizations=..` comment line so empty reports still round-trip.
pub fn write_report_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let mut out = format!(
        "# peak={},realizations={}\n",
        fixed(report.peak.value()),
        report.realizations
    )
    .into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(REPORT_HEADER)?;
        for img in &report.images {
            for r in 0..report.realizations {
                w.write_record([
                    img.name.clone(),
                    fixed(report.peak.value()),
                    r.to_string(),
                    fixed(img.noisy_psnr[r]),
                    fixed(img.denoised_psnr[r]),
                    fixed(img.runtime_s),
                ])?;
            }
        }
        w.flush()?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn parse_meta(line: &str) -> Option<(f64, usize)> {
    let rest = line.strip_prefix("# ")?;
    let mut peak = None;
    let mut realizations = None;
    for part in rest.split(',') {
        match part.split_once('=')? {
            ("peak", v) => peak = v.parse().ok(),
            ("realizations", v) => realizations = v.parse().ok(),
            _ => {}
        }
    }
    Some((peak?, realizations?))
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    record
        .get(i)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format {
            offset: line,
            message: format!("line {line}: bad or missing {} field", REPORT_HEADER[i]),
        })
}

/// Parse a file written by [`write_report_csv`]. Format error offsets are line numbers.
pub fn read_report_csv(path: impl AsRef<Path>) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path)?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    let Some((peak, realizations)) = parse_meta(first) else {
        return format_err(1, "line 1: expected `# peak=..,realizations=..`");
    };
    let peak = Peak::new(peak)?;
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    if reader.headers()?.iter().ne(REPORT_HEADER) {
        return format_err(2, format!("line 2: expected header {}", REPORT_HEADER.join(",")));
    }
    let mut images: Vec<ImageScores> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 3;
        let record = record?;
        let name = record.get(0).unwrap_or_default().to_string();
        let r: usize = field(&record, 2, line)?;
        let row_peak: f64 = field(&record, 1, line)?;
        if row_peak != peak.value() {
            return format_err(line, format!("line {line}: peak {row_peak} differs from the header"));
        }
        if r == 0 {
            images.push(ImageScores {
                name,
                noisy_psnr: Vec::new(),
                denoised_psnr: Vec::new(),
                runtime_s: field(&record, 5, line)?,
            });
        } else if images.last().is_none_or(|img| img.name != name || img.noisy_psnr.len() != r) {
            return format_err(line, format!("line {line}: realizations out of order"));
        }
        let img = images.last_mut().expect("pushed above");
        img.noisy_psnr.push(field(&record, 3, line)?);
        img.denoised_psnr.push(field(&record, 4, line)?);
    }
    if let Some(img) = images.iter().find(|i| i.noisy_psnr.len() != realizations) {
        return format_err(0, format!("image {} has {} of {realizations} realizations", img.name, img.noisy_psnr.len()));
    }
    Ok(EvalReport {
        peak,
        realizations,
        images,
    })
}
