use std::path::Path;
use std::process::{Command, Output};

use photon_denoise::cli::read_matrix_csv;
use photon_denoise::imaging::{load_pgm_raw, save_pgm, Peak};
use photon_denoise::network::{load_weights, save_weights, ModelWeights, NetworkConfig, Variant};
use photon_denoise::noise::Seed;
use photon_denoise::synth::scenes;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photon-denoise"))
        .args(args)
        .env("DENOISE_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_scenes(dir: &Path, n: usize, size: usize, seed: u64) {
    std::fs::create_dir_all(dir).unwrap();
    for (i, img) in scenes(n, size, size, Seed(seed)).iter().enumerate() {
        save_pgm(dir.join(format!("s{i:02}.pgm")), img).unwrap();
    }
}

fn zero_weights(path: &Path, peak: f64) {
    let cfg = NetworkConfig {
        variant: Variant::Plain,
        depth: 3,
        features: 4,
    };
    save_weights(&ModelWeights::zeros(&cfg, Peak::new(peak).unwrap()).unwrap(), path).unwrap();
}

#[test]
fn add_noise_then_identity_denoise() {
    let dir = tempfile::tempdir().unwrap();
    write_scenes(dir.path(), 1, 40, 1);
    let clean = dir.path().join("s00.pgm");
    let noisy = dir.path().join("noisy.pgm");
    let weights = dir.path().join("zero.dnz");
    zero_weights(&weights, 8.0);

    let out = cli(&["add-noise", "--in", s(&clean), "--out", s(&noisy), "--peak", "8", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let again = dir.path().join("again.pgm");
    cli(&["add-noise", "--in", s(&clean), "--out", s(&again), "--peak", "8", "--seed", "3"]);
    assert_eq!(std::fs::read(&noisy).unwrap(), std::fs::read(&again).unwrap());

    let estimate = dir.path().join("est.csv");
    let out = cli(&["denoise", "--weights", s(&weights), "--in", s(&noisy), "--out", s(&estimate), "--peak", "8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, _, counts) = load_pgm_raw(&noisy).unwrap();
    let est = read_matrix_csv(&estimate).unwrap();
    // the zero network returns the noisy counts, clipped to the peak
    for (e, &c) in est.data().iter().zip(&counts) {
        assert_eq!(*e, f64::from(c).min(8.0));
    }

    let png_like = dir.path().join("est.pgm");
    let out = cli(&["denoise", "--weights", s(&weights), "--in", s(&noisy), "--out", s(&png_like)]);
    assert_eq!(out.status.code(), Some(0));

    let out = cli(&["denoise", "--weights", s(&weights), "--in", s(&noisy), "--out", s(&estimate), "--peak", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_and_data_errors() {
    let out = cli(&["denoise", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(cli(&[]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("bogus.dnz");
    std::fs::write(&bogus, b"DNZ1\x00").unwrap();
    let out = cli(&["denoise", "--weights", s(&bogus), "--in", "missing.pgm", "--out", "x.pgm"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn counts_that_do_not_fit_a_byte_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_scenes(dir.path(), 1, 8, 2);
    let out = cli(&[
        "add-noise",
        "--in",
        s(&dir.path().join("s00.pgm")),
        "--out",
        s(&dir.path().join("n.pgm")),
        "--peak",
        "1000",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn vst_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("c.pgm");
    photon_denoise::imaging::write_pgm(&counts, 1, 4, &[0, 1, 10, 200]).unwrap();
    let fwd = dir.path().join("f.csv");
    let back = dir.path().join("b.csv");
    assert_eq!(cli(&["vst", "--forward", "--in", s(&counts), "--out", s(&fwd)]).status.code(), Some(0));
    let f = read_matrix_csv(&fwd).unwrap();
    assert!((f.data()[1] - 2.0 * 1.375f64.sqrt()).abs() < 1e-15);
    assert_eq!(
        cli(&["vst", "--inverse-algebraic", "--in", s(&fwd), "--out", s(&back)]).status.code(),
        Some(0)
    );
    let b = read_matrix_csv(&back).unwrap();
    for (x, y) in b.data().iter().zip([0.0, 1.0, 10.0, 200.0]) {
        assert!((x - y).abs() < 1e-12);
    }
    let bytes = dir.path().join("b.pgm");
    assert_eq!(
        cli(&["vst", "--inverse-unbiased", "--in", s(&fwd), "--out", s(&bytes)]).status.code(),
        Some(0)
    );
    // exactly one direction is required
    assert_eq!(
        cli(&["vst", "--forward", "--inverse-unbiased", "--in", s(&fwd), "--out", s(&back)]).status.code(),
        Some(1)
    );
}

#[test]
fn train_evaluate_compare_introspect() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    write_scenes(&data, 3, 64, 5);
    let weights = dir.path().join("toy.dnz");
    let out = cli(&[
        "train",
        "--data-dir",
        s(&data),
        "--peak",
        "8",
        "--preset",
        "toy",
        "--seed",
        "1",
        "--iterations",
        "3",
        "--out-weights",
        s(&weights),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let trained = load_weights(&weights).unwrap();
    assert_eq!(trained.peak.value(), 8.0);
    let history = std::fs::read_to_string(dir.path().join("toy.dnz.history.csv")).unwrap();
    assert_eq!(history.lines().count(), 4);

    let zero = dir.path().join("zero.dnz");
    zero_weights(&zero, 8.0);
    let report_a = dir.path().join("a.csv");
    let report_b = dir.path().join("b.csv");
    for (w, r) in [(&weights, &report_a), (&zero, &report_b)] {
        let out = cli(&[
            "evaluate",
            "--weights",
            s(w),
            "--data-dir",
            s(&data),
            "--peak",
            "8",
            "--realizations",
            "2",
            "--seed",
            "4",
            "--report",
            s(r),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let cmp = dir.path().join("cmp.csv");
    let out = cli(&["compare", "--report-a", s(&report_a), "--report-b", s(&report_b), "--out", s(&cmp)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&cmp).unwrap().lines().count(), 5);

    let self_cmp = dir.path().join("self.csv");
    cli(&["compare", "--report-a", s(&report_b), "--report-b", s(&report_b), "--out", s(&self_cmp)]);
    assert!(std::fs::read_to_string(&self_cmp)
        .unwrap()
        .starts_with("# wins_a_pct=0.0000,wins_b_pct=100.0000,zero_crossing=0"));

    let noisy = dir.path().join("noisy.pgm");
    let clean = data.join("s00.pgm");
    cli(&["add-noise", "--in", s(&clean), "--out", s(&noisy), "--peak", "8"]);
    let intro = dir.path().join("intro");
    let out = cli(&[
        "introspect",
        "--weights",
        s(&weights),
        "--in",
        s(&noisy),
        "--clean",
        s(&clean),
        "--out-dir",
        s(&intro),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let depth = trained.depth();
    assert_eq!(std::fs::read_to_string(intro.join("layer_rmse.csv")).unwrap().lines().count(), depth + 2);
    assert!(intro.join("dominant_layer.pgm").exists());
    assert!(intro.join(format!("error_depth_{depth:02}.pgm")).exists());

    let tuned = dir.path().join("tuned.dnz");
    let out = cli(&[
        "fine-tune",
        "--base",
        s(&weights),
        "--class-dir",
        s(&data),
        "--out-weights",
        s(&tuned),
        "--iterations",
        "2",
        "--preset",
        "toy",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(load_weights(&tuned).unwrap().class_tag.as_deref(), Some("data"));
}
