use std::path::Path;
use std::time::Instant;

use super::{fixed, median, EvalReport};
use crate::error::{domain, Result};
use crate::imaging::scale_to_peak;
use crate::network::{denoise, ModelWeights};
use crate::noise::{degrade, Seed, Stream};
use crate::synth::scene;

/// One method at one peak.
#[derive(Clone, Copy, Debug)]
pub struct TableRow<'a> {
    pub method: &'a str,
    pub report: &'a EvalReport,
    /// Seconds per image, usually from [`time_denoise`].
    pub time_s: f64,
}

/// Method-by-peak table: `method,peak,<one column per image>,time_s`, each image cell
/// holding the mean denoised PSNR over realizations.
pub fn write_table_csv(rows: &[TableRow], path: impl AsRef<Path>) -> Result<()> {
    let names: Vec<&str> = rows.first().map(|r| r.report.names()).unwrap_or_default();
    if rows.iter().any(|r| r.report.names() != names) {
        return domain("table rows cover different image sets");
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["method", "peak"];
    header.extend(&names);
    header.push("time_s");
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![row.method.to_string(), fixed(row.report.peak.value())];
        record.extend(row.report.images.iter().map(|i| fixed(i.mean_denoised())));
        record.push(fixed(row.time_s));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Median wall-clock seconds of `repeats` denoising runs on a `size x size` noisy scene.
pub fn time_denoise(weights: &ModelWeights, size: usize, repeats: usize) -> Result<f64> {
    if repeats == 0 {
        return domain("at least one timing run is required");
    }
    let mut rng = Stream::new(Seed(0));
    let clean = scale_to_peak(&scene(size, size, &mut rng), weights.peak)?;
    let counts = degrade(&clean, weights.peak, &mut rng)?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        denoise(weights, &counts)?;
        times.push(start.elapsed().as_secs_f64());
    }
    Ok(median(times))
}
