use super::backprop::backward_exact;
use super::*;
use crate::network::LayerWeights;

fn peak8() -> Peak {
    Peak::new(8.0).unwrap()
}

fn tiny(variant: Variant) -> NetworkConfig {
    NetworkConfig {
        variant,
        depth: 3,
        features: 5,
    }
}

fn random_weights(cfg: &NetworkConfig, rng: &mut Stream, scale: f64) -> ModelWeights {
    let mut w = ModelWeights::zeros(cfg, peak8()).unwrap();
    for l in &mut w.layers {
        l.kernels.iter_mut().for_each(|v| *v = (rng.uniform() - 0.5) * scale);
        l.biases.iter_mut().for_each(|v| *v = (rng.uniform() - 0.5) * 0.2);
    }
    w
}

fn param_mut(w: &mut ModelWeights, flat: usize) -> &mut f64 {
    let mut i = flat;
    for l in &mut w.layers {
        let LayerWeights { kernels, biases, .. } = l;
        if i < kernels.len() {
            return &mut kernels[i];
        }
        i -= kernels.len();
        if i < biases.len() {
            return &mut biases[i];
        }
        i -= biases.len();
    }
    panic!("index out of range")
}

/// Central finite differences through the forward path only.
fn finite_difference(w: &ModelWeights, input: &Image, target: &Image, margin: usize, flat: usize) -> f64 {
    let eps = 1e-5;
    let mut plus = w.clone();
    *param_mut(&mut plus, flat) += eps;
    let mut minus = w.clone();
    *param_mut(&mut minus, flat) -= eps;
    let lp = patch_loss(&plus, input, target, margin).unwrap();
    let lm = patch_loss(&minus, input, target, margin).unwrap();
    (lp - lm) / (2.0 * eps)
}

fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

#[test]
fn loss_examples() {
    let a = Image::from_fn(128, 128, |y, x| ((y * 7 + x * 3) % 11) as f64 / 11.0);
    assert_eq!(loss_central_l2(&a, &a, 21).unwrap(), 0.0);
    // only the central 86x86 = 7396 pixels count
    let mut b = a.clone();
    b.set(64, 64, a.get(64, 64) + 1.0);
    assert!((loss_central_l2(&b, &a, 21).unwrap() - 1.0 / 7396.0).abs() < 1e-18);
    let mut ring = a.clone();
    for y in 0..128 {
        for x in 0..128 {
            if y < 21 || x < 21 || y >= 107 || x >= 107 {
                ring.set(y, x, 5.0);
            }
        }
    }
    assert_eq!(loss_central_l2(&ring, &a, 21).unwrap(), 0.0);
    assert!(loss_central_l2(&a, &a, 64).is_err());
    assert!(loss_central_l2(&a, &Image::zeros(4, 4), 0).is_err());
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = Stream::new(Seed(21));
    let cfg = tiny(Variant::Plain);
    let w = random_weights(&cfg, &mut rng, 0.8);
    let input = Image::from_fn(12, 12, |_, _| rng.uniform() - 0.5);
    let target = Image::from_fn(12, 12, |_, _| rng.uniform() - 0.5);
    let bp = backward(&w, &input, &target, 2).unwrap();
    let analytic = bp.gradients.flatten();
    assert_eq!(analytic.len(), cfg.parameter_count());
    assert!((bp.loss - patch_loss(&w, &input, &target, 2).unwrap()).abs() < 1e-14);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let i = rng.below(analytic.len());
        let numeric = finite_difference(&w, &input, &target, 2, i);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn variant_gradients_match_finite_differences() {
    let mut rng = Stream::new(Seed(22));
    let cfg = tiny(Variant::VstBinned);
    let w = random_weights(&cfg, &mut rng, 0.3);
    let input = Image::from_fn(12, 12, |_, _| rng.below(12) as f64);
    let target = Image::from_fn(12, 12, |_, _| rng.uniform() - 0.5);
    let analytic = backward(&w, &input, &target, 2).unwrap().gradients.flatten();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let i = rng.below(analytic.len());
        let numeric = finite_difference(&w, &input, &target, 2, i);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
    // the variant rejects non-integer counts
    assert!(backward(&w, &input.map(|v| v + 0.5), &target, 2).is_err());
}

#[test]
fn windowed_pass_equals_full_patch() {
    let mut rng = Stream::new(Seed(23));
    let cfg = NetworkConfig {
        variant: Variant::Plain,
        depth: 4,
        features: 4,
    };
    let w = random_weights(&cfg, &mut rng, 0.6);
    let input = Image::from_fn(24, 24, |_, _| rng.uniform() - 0.5);
    let target = Image::from_fn(24, 24, |_, _| rng.uniform() - 0.5);
    let fast = backward(&w, &input, &target, 9).unwrap();
    let full = backward_exact(&w, &input, &target, 9, 1.0).unwrap();
    assert!((fast.loss - full.loss).abs() < 1e-15);
    for (a, b) in fast.gradients.flatten().iter().zip(full.gradients.flatten()) {
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
    }
}

#[test]
fn stationary_point_has_zero_gradient() {
    let w = ModelWeights::zeros(&tiny(Variant::Plain), peak8()).unwrap();
    let img = Image::from_fn(12, 12, |y, x| ((y + x) % 5) as f64 / 10.0 - 0.2);
    let bp = backward(&w, &img, &img, 2).unwrap();
    assert_eq!(bp.loss, 0.0);
    assert_eq!(bp.gradients.max_abs(), 0.0);
}

#[test]
fn scaling_the_loss_scales_gradients() {
    let mut rng = Stream::new(Seed(24));
    let w = random_weights(&tiny(Variant::Plain), &mut rng, 0.8);
    let input = Image::from_fn(10, 10, |_, _| rng.uniform() - 0.5);
    let target = Image::from_fn(10, 10, |_, _| rng.uniform() - 0.5);
    let one = backward_weighted(&w, &input, &target, 1, 1.0).unwrap();
    let two = backward_weighted(&w, &input, &target, 1, 2.0).unwrap();
    assert_eq!(two.loss, 2.0 * one.loss);
    for (a, b) in one.gradients.flatten().iter().zip(two.gradients.flatten()) {
        assert_eq!(2.0 * a, b);
    }
}

fn single_param() -> ModelWeights {
    ModelWeights {
        layers: vec![LayerWeights {
            out_ch: 2,
            in_ch: 1,
            kernels: vec![0.0; 18],
            biases: vec![0.0; 2],
        }],
        peak: peak8(),
        variant: Variant::Plain,
        class_tag: None,
    }
}

#[test]
fn adam_first_step() {
    let w = single_param();
    let mut g = Gradients::zeros_like(&w);
    g.layers[0].kernels[0] = 1.0;
    let cfg = AdamConfig::default();
    let (next, state) = adam_step(&w, &AdamState::new(&w), &g, &cfg).unwrap();
    let expected = -1e-4 * (1.0 / (1.0 + 1e-8));
    assert!((next.layers[0].kernels[0] - expected).abs() < 1e-18);
    assert_eq!(state.step, 1);
    // untouched coordinates with zero gradient stay put
    assert_eq!(next.layers[0].kernels[1], 0.0);

    let zero = Gradients::zeros_like(&w);
    let (same, _) = adam_step(&w, &AdamState::new(&w), &zero, &cfg).unwrap();
    assert_eq!(same, w);

    let other = ModelWeights::zeros(&tiny(Variant::Plain), peak8()).unwrap();
    assert!(adam_step(&w, &AdamState::new(&w), &Gradients::zeros_like(&other), &cfg).is_err());
}

#[test]
fn adam_update_is_bounded_by_learning_rate() {
    let cfg = AdamConfig::default();
    let mut rng = Stream::new(Seed(25));
    let w = ModelWeights::zeros(&tiny(Variant::Plain), peak8()).unwrap();
    // first step, arbitrary gradient magnitudes
    let mut g = Gradients::zeros_like(&w);
    for l in &mut g.layers {
        l.kernels.iter_mut().for_each(|v| *v = (rng.uniform() - 0.5) * 10f64.powi(rng.below(12) as i32 - 6));
    }
    let (next, _) = adam_step(&w, &AdamState::new(&w), &g, &cfg).unwrap();
    let moved = next.layers.iter().flat_map(|l| &l.kernels).fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(moved <= cfg.lr * (1.0 + 1e-12));

    // later steps from states reached through random gradient streams
    let mut weights = w.clone();
    let mut state = AdamState::new(&w);
    for _ in 0..300 {
        let mut g = Gradients::zeros_like(&w);
        for l in &mut g.layers {
            l.kernels.iter_mut().for_each(|v| *v = rng.uniform() - 0.5);
            l.biases.iter_mut().for_each(|v| *v = 3.0 * (rng.uniform() - 0.5));
        }
        let before = weights.clone();
        state.update(&mut weights, &g, &cfg).unwrap();
        for (a, b) in before.layers.iter().zip(&weights.layers) {
            for (x, y) in a.kernels.iter().chain(&a.biases).zip(b.kernels.iter().chain(&b.biases)) {
                assert!((x - y).abs() <= cfg.lr * 1.01);
            }
        }
    }
}

fn scenes(n: usize, size: usize, seed: u64) -> Vec<Image> {
    let mut rng = Stream::new(Seed(seed));
    (0..n)
        .map(|_| {
            let (a, b, c) = (rng.uniform(), rng.uniform(), rng.uniform());
            Image::from_fn(size, size, |y, x| {
                (0.5 + 0.4 * ((x as f64 * a * 0.3).sin() * (y as f64 * b * 0.2).cos()) * c).clamp(0.0, 1.0)
            })
        })
        .collect()
}

fn quick_config() -> TrainConfig {
    TrainConfig {
        network: NetworkConfig {
            variant: Variant::Plain,
            depth: 3,
            features: 4,
        },
        iterations: 3,
        batch: 3,
        patch_size: 16,
        crop_margin: 4,
        ..TrainConfig::preset(Preset::Toy, peak8(), Seed(5))
    }
}

#[test]
fn defaults_follow_published_protocol() {
    let c = TrainConfig::paper(peak8(), Seed(0));
    assert_eq!(c.iterations, 120_000);
    assert_eq!(c.batch, 64);
    assert_eq!(c.patch_size, 128);
    assert_eq!(c.crop_margin, 21);
    assert_eq!(c.adam, AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 });
    assert_eq!(c.network, NetworkConfig::paper(Variant::Plain));
    assert_eq!(TrainConfig::preset(Preset::Paper, peak8(), Seed(0)), c);
    assert_eq!("toy".parse::<Preset>().unwrap(), Preset::Toy);
    assert!("huge".parse::<Preset>().is_err());
    let bad = TrainConfig {
        patch_size: 42,
        ..c
    };
    assert!(bad.validate().is_err());
}

#[test]
fn zero_learning_rate_leaves_weights() {
    let mut cfg = quick_config();
    cfg.iterations = 1;
    cfg.adam.lr = 0.0;
    let data = scenes(2, 20, 1);
    let (w, history) = train(&data, &cfg, &[]).unwrap();
    let init = init_weights(&cfg.network, cfg.peak, &mut Stream::derived(cfg.seed, INIT_STREAM)).unwrap();
    assert_eq!(w, init);
    assert_eq!(history.losses.len(), 1);
}

#[test]
fn training_is_reproducible_and_thread_independent() {
    let data = scenes(3, 24, 2);
    let cfg = quick_config();
    let (a, ha) = train(&data, &cfg, &[]).unwrap();
    let (b, hb) = train(&data, &cfg, &[]).unwrap();
    let threaded = TrainConfig { threads: 3, ..cfg.clone() };
    let (c, hc) = train(&data, &threaded, &[]).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    assert_eq!(a, c);
    assert_eq!(ha, hc);
}

#[test]
fn small_images_are_skipped() {
    let mut data = scenes(1, 10, 3);
    data.extend(scenes(1, 24, 4));
    let cfg = quick_config();
    assert!(train(&data, &cfg, &[]).is_ok());
    assert!(train(&scenes(2, 10, 3), &cfg, &[]).is_err());
    assert!(train(&[], &cfg, &[]).is_err());
}

#[test]
fn validation_snapshots_and_history_csv() {
    let data = scenes(2, 24, 6);
    let cfg = TrainConfig {
        iterations: 4,
        validate_every: 2,
        ..quick_config()
    };
    let (_, history) = train(&data, &cfg, &scenes(1, 20, 7)).unwrap();
    assert_eq!(history.validation.iter().map(|v| v.0).collect::<Vec<_>>(), vec![2, 4]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    history.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "iteration,loss,val_psnr");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].ends_with(','));
    assert!(!lines[2].ends_with(','));
}

#[test]
fn variant_training_keeps_box_layer_fixed() {
    let data = scenes(2, 24, 8);
    let cfg = TrainConfig {
        network: NetworkConfig {
            variant: Variant::VstBinned,
            depth: 3,
            features: 4,
        },
        crop_margin: 5,
        ..quick_config()
    };
    let (w, history) = train(&data, &cfg, &[]).unwrap();
    assert!(history.losses.iter().all(|l| l.is_finite()));
    let fixed = w.fixed_layer().unwrap();
    assert!(!fixed.trainable());
    assert_eq!(fixed, crate::vst::box_kernel_stack(&[1, 3, 5, 7]).unwrap());
    // gradient sets cover only the trainable stack
    assert_eq!(Gradients::zeros_like(&w).layers.len(), cfg.network.depth);
}

#[test]
fn dataset_split() {
    let s = split_dataset(1200, Seed(1));
    assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (720, 240, 240));
    let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..1200).collect::<Vec<_>>());
    assert_eq!(split_dataset(1200, Seed(1)), s);
    assert_ne!(split_dataset(1200, Seed(2)), s);
    let t = split_dataset(3, Seed(0));
    assert_eq!(t.train.len() + t.validation.len() + t.test.len(), 3);
}

#[test]
fn fine_tune_contract() {
    let cfg = quick_config();
    let base = init_weights(&cfg.network, cfg.peak, &mut Stream::new(Seed(1))).unwrap();
    let data = scenes(5, 24, 9);
    let zero = TrainConfig { iterations: 0, ..cfg.clone() };
    let out = fine_tune(&base, &data, &zero, "cats").unwrap();
    assert_eq!(out.weights.class_tag.as_deref(), Some("cats"));
    assert_eq!(out.weights.layers, base.layers);

    let out = fine_tune(&base, &data, &cfg, "cats").unwrap();
    assert_ne!(out.weights.layers, base.layers);
    assert_eq!(out.split.train.len(), 3);

    let other_peak = TrainConfig { peak: Peak::new(2.0).unwrap(), ..cfg };
    assert!(fine_tune(&base, &data, &other_peak, "cats").is_err());
}
