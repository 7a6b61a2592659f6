//! Cross-method integration checks: trajectory identities, the sharpening
//! limit at the pipeline level, and end-to-end learnability on synthetic
//! data.

use regenc::codec::{BinStyle, HardBinner, TargetCodec};
use regenc::data::{self, SynthKind};
use regenc::losses::LossWeights;
use regenc::nn::MlpSpec;
use regenc::optim::TrainConfig;
use regenc::pipeline::{self, MethodKind};
use regenc::{Rng, Tensor};

#[test]
fn frozen_e2e_with_kl_only_retraces_soft_bin() {
    // weights (0, 1, 0) with the codec frozen at its initialization must
    // produce the soft-binning loss trajectory bit for bit
    let ds = data::synth_dataset(SynthKind::Sinusoid, 400, 0.02, &mut Rng::from_seed(3)).unwrap();
    let cfg = TrainConfig { epochs: 3, batch_size: 64, max_lr: 3e-3, seed: 9, ..TrainConfig::default() };
    let k = 8;
    let spec = MlpSpec { input_dim: 2, hidden_dims: vec![8], output_dim: k, dropout_rate: 0.3 };

    let frozen = MethodKind::EndToEnd {
        k,
        lambda_sigma: 1.0,
        weights: LossWeights { lambda_auto: 0.0, lambda_kl: 1.0, lambda_pred: 0.0, alpha: 0.0 },
        freeze_codec: true,
    };
    let e2e = pipeline::train_method(&frozen, &ds, &spec, &cfg).unwrap();
    let soft =
        pipeline::train_method(&MethodKind::SoftBin { k, lambda_sigma: 1.0 }, &ds, &spec, &cfg)
            .unwrap();
    assert_eq!(e2e.step_losses.len(), soft.step_losses.len());
    for (a, b) in e2e.step_losses.iter().zip(&soft.step_losses) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    for (a, b) in e2e.final_params.iter().zip(&soft.final_params) {
        assert_eq!(a.data(), b.data());
    }
    assert_eq!(e2e.result.test_rmse.to_bits(), soft.result.test_rmse.to_bits());
}

#[test]
fn soft_bin_with_sharp_encoder_matches_hard_assignment_on_train_split() {
    // With sigma = 1e-3 * spacing, the per-example soft labels concentrate
    // so their argmax equals nearest-prototype hard assignment away from
    // cell boundaries.
    let ds = data::synth_dataset(SynthKind::Sinusoid, 500, 0.05, &mut Rng::from_seed(5)).unwrap();
    let k = 12;
    let sharp = pipeline::init_method_codec(k, 1e-3, &ds.y_train, &mut Rng::from_seed(0)).unwrap();
    let binner = HardBinner::new(sharp.mu.clone()).unwrap();
    let delta = sharp.mu.data()[1] - sharp.mu.data()[0];

    let psi = sharp.encode_soft_eval(&ds.y_train).unwrap();
    let hard = binner.encode_hard(&ds.y_train).unwrap();
    let mut compared = 0usize;
    for r in 0..ds.y_train.rows() {
        let y = ds.y_train.at(r, 0);
        let near_boundary = (0..k - 1).any(|j| {
            let b = (sharp.mu.data()[j] + sharp.mu.data()[j + 1]) / 2.0;
            (y - b).abs() < delta / 10.0
        });
        if near_boundary {
            continue;
        }
        compared += 1;
        let soft_arg = psi
            .row(r)
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let hard_arg = hard.row(r).iter().position(|&v| v == 1.0).unwrap();
        assert_eq!(soft_arg, hard_arg, "row {r} (y = {y})");
    }
    assert!(compared > 300, "only {compared} rows away from boundaries");
}

#[test]
fn sinusoid_is_learnable_by_ls_and_e2e_at_defaults() {
    // Noiseless-function oracle: the sinusoid is learnable, so both the
    // baseline and the joint method reach small test error with the default
    // configuration (k = 25 for the joint method).
    let ds = data::synth_dataset(SynthKind::Sinusoid, 2000, 0.01, &mut Rng::from_seed(0)).unwrap();
    let cfg = TrainConfig { seed: 0, batch_size: ds.batch_size, ..TrainConfig::default() };

    let ls_spec = MlpSpec::tabular(2, 1);
    let ls = pipeline::train_method(&MethodKind::Ls, &ds, &ls_spec, &cfg).unwrap();
    assert!(ls.result.test_rmse < 0.05, "ls test RMSE {}", ls.result.test_rmse);

    let e2e_spec = MlpSpec::tabular(2, 25);
    let e2e = MethodKind::EndToEnd {
        k: 25,
        lambda_sigma: 1.0,
        weights: LossWeights { lambda_auto: 1.0, lambda_kl: 0.068, lambda_pred: 1.0, alpha: 1e-6 },
        freeze_codec: false,
    };
    let e2e = pipeline::train_method(&e2e, &ds, &e2e_spec, &cfg).unwrap();
    assert!(e2e.result.test_rmse < 0.05, "e2e test RMSE {}", e2e.result.test_rmse);
}

#[test]
fn multivariate_targets_train_through_kmeans_codec() {
    let ds = data::synth_dataset(SynthKind::TwoBlob2d, 600, 0.05, &mut Rng::from_seed(4)).unwrap();
    assert_eq!(ds.target_dim(), 2);
    let cfg = TrainConfig { epochs: 30, batch_size: 64, max_lr: 3e-3, seed: 2, ..TrainConfig::default() };
    let method = MethodKind::EndToEnd {
        k: 9,
        lambda_sigma: 1.0,
        weights: LossWeights { lambda_auto: 1.0, lambda_kl: 0.147, lambda_pred: 1.0, alpha: 1e-6 },
        freeze_codec: false,
    };
    let spec = MlpSpec { input_dim: 2, hidden_dims: vec![32], output_dim: 9, dropout_rate: 0.0 };
    let out = pipeline::train_method(&method, &ds, &spec, &cfg).unwrap();
    // features are the targets plus small noise, so decent error is easy
    assert!(out.result.test_rmse < 0.2, "test RMSE {}", out.result.test_rmse);
    let codec: &TargetCodec = out.bundle.codec.as_ref().unwrap();
    assert_eq!(codec.m(), 2);
    assert_eq!(codec.k(), 9);
}

#[test]
fn quantile_bins_follow_mass_on_skewed_targets() {
    // 80% of the mass near 0: quantile centers must crowd low while equal
    // width spreads evenly.
    let mut rng = Rng::from_seed(6);
    let vals: Vec<f64> = (0..500)
        .map(|i| if i % 5 == 4 { 0.9 + 0.1 * rng.uniform() } else { 0.1 * rng.uniform() })
        .collect();
    let targets = Tensor::new(vec![500, 1], vals).unwrap();
    let k = 8;
    let eq = HardBinner::from_targets_1d(k, BinStyle::EqualWidth, &targets).unwrap();
    let q = HardBinner::from_targets_1d(k, BinStyle::Quantile, &targets).unwrap();
    let low = |b: &HardBinner| b.centers().data().iter().filter(|&&c| c < 0.5).count();
    assert!(low(&q) > low(&eq), "quantile {} vs equal-width {}", low(&q), low(&eq));

    // both bin styles train end to end
    let ds = data::synth_dataset(SynthKind::Piecewise, 800, 0.01, &mut Rng::from_seed(6)).unwrap();
    let cfg = TrainConfig { epochs: 2, batch_size: 64, max_lr: 3e-3, seed: 0, ..TrainConfig::default() };
    for style in [BinStyle::EqualWidth, BinStyle::Quantile] {
        let spec = MlpSpec { input_dim: 2, hidden_dims: vec![8], output_dim: k, dropout_rate: 0.1 };
        pipeline::train_method(&MethodKind::HardBin { k, bin_style: style }, &ds, &spec, &cfg)
            .unwrap();
    }
}

#[test]
fn benchmark_table_is_identical_across_thread_counts() {
    // the collector must make the table independent of scheduling; compare a
    // 1-thread pool against the default pool
    let ds = data::synth_dataset(SynthKind::Sinusoid, 300, 0.02, &mut Rng::from_seed(2)).unwrap();
    let cfg = TrainConfig { epochs: 2, batch_size: 64, max_lr: 3e-3, seed: 0, ..TrainConfig::default() };
    let methods = [MethodKind::Ls, MethodKind::SoftBin { k: 5, lambda_sigma: 1.0 }];

    let run = || {
        pipeline::run_benchmark(&[&ds], &methods, &[0, 1], &cfg, &[8], 0.1)
            .unwrap()
            .rows_csv()
    };
    let default_pool = run();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run);
    // runtimes differ; compare everything except the runtime column
    let strip = |csv: &str| -> Vec<String> {
        csv.lines()
            .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap_or_default())
            .collect()
    };
    assert_eq!(strip(&default_pool), strip(&single));
}

#[test]
fn decoded_rmse_uses_scaled_units_with_unscale_available() {
    let ds = data::synth_dataset(SynthKind::Sinusoid, 300, 0.02, &mut Rng::from_seed(1)).unwrap();
    // targets live in [0, 1] after preparation
    let (lo, hi) = ds
        .y_train
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    assert_eq!(lo, 0.0);
    assert_eq!(hi, 1.0);
    // the scaler reverses exactly on train values
    for &v in ds.y_train.data().iter().take(20) {
        let raw = ds.target_scaler.unscale_value(0, v);
        let back = ds.target_scaler.scale_value(0, raw);
        assert!((back - v).abs() < 1e-12);
    }
    let _: Tensor = ds.y_train.clone();
}
