use std::path::Path;

use super::{fixed, EvalReport};
use crate::error::{domain, format_err, Result};

/// Paired comparison of method A against method B (the incumbent).
///
/// Gains are per-image mean-PSNR differences A − B. An image counts as a win for A only
/// when its gain is strictly positive; ties go to B, so the two rates always sum to 100.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    /// `(image, gain_db)` sorted ascending by gain; equal gains keep input order.
    pub profile: Vec<(String, f64)>,
    pub wins_a_pct: f64,
    pub wins_b_pct: f64,
    /// Number of strictly negative gains, i.e. the index where the profile crosses zero.
    pub zero_crossing: usize,
}

impl ComparisonReport {
    fn from_gains(gains: Vec<(String, f64)>) -> Self {
        let mut profile = gains;
        profile.sort_by(|a, b| a.1.total_cmp(&b.1));
        let n = profile.len();
        let wins_a = profile.iter().filter(|(_, g)| *g > 0.0).count();
        let wins_a_pct = if n == 0 { 0.0 } else { 100.0 * wins_a as f64 / n as f64 };
        Self {
            zero_crossing: profile.iter().take_while(|(_, g)| *g < 0.0).count(),
            wins_a_pct,
            wins_b_pct: 100.0 - wins_a_pct,
            profile,
        }
    }

    pub fn gains(&self) -> Vec<f64> {
        self.profile.iter().map(|p| p.1).collect()
    }
}

pub fn compare(a: &EvalReport, b: &EvalReport) -> Result<ComparisonReport> {
    if a.peak != b.peak {
        return domain(format!("reports are at different peaks ({} vs {})", a.peak, b.peak));
    }
    if a.realizations != b.realizations {
        return domain(format!(
            "reports use different realization counts ({} vs {})",
            a.realizations, b.realizations
        ));
    }
    if a.names() != b.names() {
        return domain("reports cover different image sets");
    }
    let gains = a
        .images
        .iter()
        .zip(&b.images)
        .map(|(x, y)| (x.name.clone(), x.mean_denoised() - y.mean_denoised()))
        .collect();
    Ok(ComparisonReport::from_gains(gains))
}

const HEADER: [&str; 3] = ["rank", "image", "gain_db"];

/// `# wins_a_pct=..,wins_b_pct=..,zero_crossing=..` then `rank,image,gain_db` rows in
/// profile order.
pub fn write_comparison_csv(report: &ComparisonReport, path: impl AsRef<Path>) -> Result<()> {
    let mut out = format!(
        "# wins_a_pct={},wins_b_pct={},zero_crossing={}\n",
        fixed(report.wins_a_pct),
        fixed(report.wins_b_pct),
        report.zero_crossing
    )
    .into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(HEADER)?;
        for (rank, (name, gain)) in report.profile.iter().enumerate() {
            w.write_record([(rank + 1).to_string(), name.clone(), fixed(*gain)])?;
        }
        w.flush()?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a file written by [`write_comparison_csv`].
pub fn read_comparison_csv(path: impl AsRef<Path>) -> Result<ComparisonReport> {
    let text = std::fs::read_to_string(path)?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    let mut meta = [None; 3];
    for part in first.strip_prefix("# ").unwrap_or_default().split(',') {
        if let Some((k, v)) = part.split_once('=') {
            let slot = match k {
                "wins_a_pct" => 0,
                "wins_b_pct" => 1,
                "zero_crossing" => 2,
                _ => continue,
            };
            meta[slot] = v.parse::<f64>().ok();
        }
    }
    let [Some(wins_a_pct), Some(wins_b_pct), Some(zero_crossing)] = meta else {
        return format_err(1, "line 1: expected `# wins_a_pct=..,wins_b_pct=..,zero_crossing=..`");
    };
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    if reader.headers()?.iter().ne(HEADER) {
        return format_err(2, "line 2: expected header rank,image,gain_db");
    }
    let mut profile = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i as u64 + 3;
        let gain = record.get(2).and_then(|v| v.parse().ok());
        match (record.get(1), gain) {
            (Some(name), Some(gain)) => profile.push((name.to_string(), gain)),
            _ => return format_err(line, format!("line {line}: bad comparison row")),
        }
    }
    Ok(ComparisonReport {
        profile,
        wins_a_pct,
        wins_b_pct,
        zero_crossing: zero_crossing as usize,
    })
}
