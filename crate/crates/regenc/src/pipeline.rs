//! The six training methods, their shared training engine, and the
//! benchmark/sweep runners.
//!
//! Every method is a configuration over the same components: an MLP, an
//! optional target codec, and one of the loss builders in [`crate::losses`].
//! The engine trains on shuffled mini-batches with Adam, evaluates the
//! decoded validation RMSE after every epoch, and reports test RMSE from the
//! parameter snapshot with the best validation RMSE.
//!
//! Randomness is split into independent streams per purpose (`init`,
//! `dropout`, `shuffle`, `codec`), all derived from the config seed. This
//! makes runs bit-reproducible and makes the weight-degeneration identities
//! hold exactly: end-to-end training with `(0,0,1)` weights consumes the
//! same draws, builds the same loss expressions, and therefore traces the
//! same float trajectory as the least-squares-with-softmax method.

use crate::codec::{self, BinStyle, HardBinner, TargetCodec};
use crate::data::{self, PreparedDataset, Split};
use crate::error::{Error, Result};
use crate::losses::{self, CompositeParts, LossWeights};
use crate::nn::{MlpModel, MlpSpec};
use crate::optim::{self, AdamState, TrainConfig};
use crate::rng::Rng;
use crate::tape::{Mode, Tape, Var};
use crate::tensor::{self, Tensor};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::time::Instant;

/// One of the six training methods.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum MethodKind {
    /// Direct regression on the squared loss.
    Ls,
    /// Squared loss through a softmax layer and trainable decoder.
    LsSoftmax { k: usize },
    /// KL classification against nearest-center one-hot targets.
    HardBin { k: usize, bin_style: BinStyle },
    /// KL classification against a fixed soft encoder.
    SoftBin { k: usize, lambda_sigma: f64 },
    /// Stage 1: autoencoding pretraining of the codec on targets;
    /// stage 2: KL classification against the frozen result.
    PretrainEnc { k: usize, lambda_sigma: f64, alpha: f64 },
    /// Joint training of encoder, decoder, and classifier on the weighted
    /// composite objective.
    EndToEnd { k: usize, lambda_sigma: f64, weights: LossWeights, freeze_codec: bool },
}

impl MethodKind {
    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Ls => "ls",
            MethodKind::LsSoftmax { .. } => "ls-softmax",
            MethodKind::HardBin { .. } => "hard-bin",
            MethodKind::SoftBin { .. } => "soft-bin",
            MethodKind::PretrainEnc { .. } => "pretrain",
            MethodKind::EndToEnd { .. } => "e2e",
        }
    }

    pub fn k(&self) -> Option<usize> {
        match self {
            MethodKind::Ls => None,
            MethodKind::LsSoftmax { k }
            | MethodKind::HardBin { k, .. }
            | MethodKind::SoftBin { k, .. }
            | MethodKind::PretrainEnc { k, .. }
            | MethodKind::EndToEnd { k, .. } => Some(*k),
        }
    }

    /// MLP output dimension this method requires.
    pub fn output_dim(&self, target_dim: usize) -> usize {
        self.k().unwrap_or(target_dim)
    }

    /// Method hyperparameters for result records.
    pub fn hparams(&self) -> BTreeMap<String, serde_json::Value> {
        let mut map = BTreeMap::new();
        let num = |m: &mut BTreeMap<String, serde_json::Value>, k: &str, v: f64| {
            m.insert(k.to_string(), serde_json::json!(v));
        };
        if let Some(k) = self.k() {
            map.insert("k".into(), serde_json::json!(k));
        }
        match self {
            MethodKind::Ls | MethodKind::LsSoftmax { .. } => {}
            MethodKind::HardBin { bin_style, .. } => {
                map.insert(
                    "bin_style".into(),
                    serde_json::json!(match bin_style {
                        BinStyle::EqualWidth => "equal-width",
                        BinStyle::Quantile => "quantile",
                    }),
                );
            }
            MethodKind::SoftBin { lambda_sigma, .. } => {
                num(&mut map, "lambda_sigma", *lambda_sigma);
            }
            MethodKind::PretrainEnc { lambda_sigma, alpha, .. } => {
                num(&mut map, "lambda_sigma", *lambda_sigma);
                num(&mut map, "alpha", *alpha);
            }
            MethodKind::EndToEnd { lambda_sigma, weights, freeze_codec, .. } => {
                num(&mut map, "lambda_sigma", *lambda_sigma);
                num(&mut map, "lambda_auto", weights.lambda_auto);
                num(&mut map, "lambda_kl", weights.lambda_kl);
                num(&mut map, "lambda_pred", weights.lambda_pred);
                num(&mut map, "alpha", weights.alpha);
                if *freeze_codec {
                    map.insert("freeze_codec".into(), serde_json::json!(true));
                }
            }
        }
        map
    }
}

/// Trained model plus whatever decoding apparatus the method uses.
#[derive(Clone, Debug)]
pub struct TrainedBundle {
    pub method: MethodKind,
    pub mlp: MlpModel,
    /// Decoder prototypes for simplex-output methods; `None` for direct
    /// regression.
    pub mu: Option<Tensor>,
    /// Full encoder-decoder for methods that carry one.
    pub codec: Option<TargetCodec>,
}

impl TrainedBundle {
    /// Decoded prediction: direct MLP output, or `softmax(logits) @ mu`.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let out = self.mlp.forward_eval(x)?;
        match &self.mu {
            None => Ok(out),
            Some(mu) => {
                let pi = tensor::softmax_rows(&out)?;
                codec::decode(mu, &pi)
            }
        }
    }
}

/// Per-epoch training statistics.
#[derive(Clone, Debug, Serialize)]
pub struct EpochStat {
    pub epoch: usize,
    pub mean_train_loss: f64,
    pub val_rmse: f64,
    pub lr_last: f64,
}

/// One training cell's outcome.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentResult {
    pub dataset: String,
    pub method: String,
    pub k: Option<usize>,
    pub seed: u64,
    pub best_val_rmse: f64,
    pub best_epoch: usize,
    pub test_rmse: f64,
    /// Test RMSE divided by the mean least-squares test RMSE on the same
    /// dataset; filled in by the benchmark runner.
    pub normalized_test_rmse: Option<f64>,
    pub selected_hparams: BTreeMap<String, serde_json::Value>,
    pub wall_clock_s: f64,
}

pub struct TrainOutcome {
    pub bundle: TrainedBundle,
    pub result: ExperimentResult,
    pub epochs: Vec<EpochStat>,
    /// Loss of every optimizer step, in order (trajectory identities).
    pub step_losses: Vec<f64>,
    /// Raw parameter tensors after the final step (not the best snapshot).
    pub final_params: Vec<Tensor>,
    pub param_names: Vec<String>,
}

// ── method runtime ───────────────────────────────────────────────────

enum LossPlan {
    Direct,
    DecodedMu,
    FrozenEncoder,
    Joint { weights: LossWeights, freeze_codec: bool },
}

struct Runtime {
    plan: LossPlan,
    params: Vec<Tensor>,
    names: Vec<String>,
    wds: Vec<f64>,
    mlp_param_count: usize,
    /// Frozen codec (soft methods) or initial codec values (joint).
    codec: Option<TargetCodec>,
    hard: Option<HardBinner>,
}

impl Runtime {
    /// Decoder prototypes implied by the current parameter state.
    fn current_mu(&self) -> Option<Tensor> {
        match self.plan {
            LossPlan::Direct => None,
            LossPlan::DecodedMu => Some(self.params[self.params.len() - 1].clone()),
            LossPlan::FrozenEncoder => Some(match (&self.codec, &self.hard) {
                (Some(c), _) => c.mu.clone(),
                (None, Some(h)) => h.centers().clone(),
                _ => unreachable!("frozen encoder always has a codec or binner"),
            }),
            LossPlan::Joint { freeze_codec, .. } => Some(if freeze_codec {
                self.codec.as_ref().expect("joint method has a codec").mu.clone()
            } else {
                self.params[self.params.len() - 1].clone()
            }),
        }
    }

    fn current_codec(&self) -> Option<TargetCodec> {
        match self.plan {
            LossPlan::Joint { freeze_codec: false, .. } => {
                let n = self.params.len();
                Some(
                    TargetCodec::new(
                        self.params[n - 3].clone(),
                        self.params[n - 2].clone(),
                        self.params[n - 1].clone(),
                    )
                    .expect("codec shapes preserved during training"),
                )
            }
            _ => self.codec.clone(),
        }
    }
}

fn target_ranges(y: &Tensor) -> Vec<(f64, f64)> {
    let m = y.cols();
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); m];
    for row in y.data().chunks_exact(m) {
        for (r, &v) in ranges.iter_mut().zip(row) {
            r.0 = r.0.min(v);
            r.1 = r.1.max(v);
        }
    }
    ranges
}

/// Initial codec for soft methods: uniform 1-D spacing over the scaled
/// target range, or k-means++ prototypes for multivariate targets. This is
/// exactly the codec every soft method starts from (soft-bin keeps it
/// frozen, pretraining and end-to-end training move it).
pub fn init_method_codec(
    k: usize,
    lambda_sigma: f64,
    y_train: &Tensor,
    rng_codec: &mut Rng,
) -> Result<TargetCodec> {
    let m = y_train.cols();
    let mut cfg = codec::CodecInitConfig::new(k, m);
    cfg.lambda_sigma = lambda_sigma;
    cfg.target_range = target_ranges(y_train);
    if m == 1 {
        codec::init_uniform_1d(&cfg)
    } else {
        codec::init_kmeanspp(&cfg, y_train, rng_codec)
    }
}

fn build_runtime(
    method: &MethodKind,
    ds: &PreparedDataset,
    mlp: &MlpModel,
    cfg: &TrainConfig,
    rng_codec: &mut Rng,
) -> Result<Runtime> {
    let mut params = mlp.params.clone();
    let mut names = mlp.param_names();
    let mut wds = vec![cfg.weight_decay_model; params.len()];
    let mlp_param_count = params.len();

    let push_codec_params = |params: &mut Vec<Tensor>,
                                 names: &mut Vec<String>,
                                 wds: &mut Vec<f64>,
                                 tensors: &[&Tensor],
                                 tensor_names: &[&str]| {
        for (t, n) in tensors.iter().zip(tensor_names) {
            params.push((*t).clone());
            names.push(n.to_string());
            wds.push(cfg.weight_decay_codec);
        }
    };

    let runtime = match method {
        MethodKind::Ls => Runtime {
            plan: LossPlan::Direct,
            params,
            names,
            wds,
            mlp_param_count,
            codec: None,
            hard: None,
        },
        MethodKind::LsSoftmax { k } => {
            let init = init_method_codec(*k, 1.0, &ds.y_train, rng_codec)?;
            push_codec_params(&mut params, &mut names, &mut wds, &[&init.mu], &["codec.mu"]);
            Runtime {
                plan: LossPlan::DecodedMu,
                params,
                names,
                wds,
                mlp_param_count,
                codec: None,
                hard: None,
            }
        }
        MethodKind::HardBin { k, bin_style } => {
            let binner = HardBinner::from_targets_1d(*k, *bin_style, &ds.y_train)?;
            Runtime {
                plan: LossPlan::FrozenEncoder,
                params,
                names,
                wds,
                mlp_param_count,
                codec: None,
                hard: Some(binner),
            }
        }
        MethodKind::SoftBin { k, lambda_sigma } => {
            let frozen = init_method_codec(*k, *lambda_sigma, &ds.y_train, rng_codec)?;
            Runtime {
                plan: LossPlan::FrozenEncoder,
                params,
                names,
                wds,
                mlp_param_count,
                codec: Some(frozen),
                hard: None,
            }
        }
        MethodKind::PretrainEnc { k, lambda_sigma, alpha } => {
            let init = init_method_codec(*k, *lambda_sigma, &ds.y_train, rng_codec)?;
            let pretrained = codec::pretrain_codec(&init, &ds.y_train, *alpha, cfg)?;
            Runtime {
                plan: LossPlan::FrozenEncoder,
                params,
                names,
                wds,
                mlp_param_count,
                codec: Some(pretrained.codec),
                hard: None,
            }
        }
        MethodKind::EndToEnd { k, lambda_sigma, weights, freeze_codec } => {
            weights.validate()?;
            let init = init_method_codec(*k, *lambda_sigma, &ds.y_train, rng_codec)?;
            if !freeze_codec {
                push_codec_params(
                    &mut params,
                    &mut names,
                    &mut wds,
                    &[&init.w_lin, &init.w_bias, &init.mu],
                    &TargetCodec::param_names(),
                );
            }
            Runtime {
                plan: LossPlan::Joint { weights: *weights, freeze_codec: *freeze_codec },
                params,
                names,
                wds,
                mlp_param_count,
                codec: Some(init),
                hard: None,
            }
        }
    };
    Ok(runtime)
}

fn batch_loss(
    rt: &Runtime,
    mlp_spec: &MlpSpec,
    tape: &mut Tape,
    vars: &[Var],
    x: &Tensor,
    y: &Tensor,
    rng_dropout: &mut Rng,
) -> Result<Var> {
    let mlp_vars = &vars[..rt.mlp_param_count];
    let xv = tape.input(x.clone());
    match &rt.plan {
        LossPlan::Direct => {
            let yv = tape.input(y.clone());
            let out = MlpModel::forward(mlp_spec, tape, mlp_vars, xv, Mode::Train, rng_dropout)?;
            losses::squared_error(tape, yv, out)
        }
        LossPlan::DecodedMu => {
            let yv = tape.input(y.clone());
            let g = MlpModel::forward(mlp_spec, tape, mlp_vars, xv, Mode::Train, rng_dropout)?;
            let pi = tape.softmax_rows(g)?;
            let mu = vars[vars.len() - 1];
            losses::prediction_objective(tape, yv, pi, mu)
        }
        LossPlan::FrozenEncoder => {
            let psi = match (&rt.codec, &rt.hard) {
                (Some(c), _) => c.encode_soft_eval(y)?,
                (None, Some(h)) => h.encode_hard(y)?,
                _ => unreachable!("frozen encoder always has a codec or binner"),
            };
            let psi = tape.input(psi);
            let g = MlpModel::forward(mlp_spec, tape, mlp_vars, xv, Mode::Train, rng_dropout)?;
            let log_pi = tape.log_softmax_rows(g)?;
            losses::kl_div(tape, psi, log_pi)
        }
        LossPlan::Joint { weights, freeze_codec } => {
            let yv = tape.input(y.clone());
            let (w_lin, w_bias, mu) = if *freeze_codec {
                let c = rt.codec.as_ref().expect("joint method has a codec");
                (tape.input(c.w_lin.clone()), tape.input(c.w_bias.clone()), tape.input(c.mu.clone()))
            } else {
                let n = vars.len();
                (vars[n - 3], vars[n - 2], vars[n - 1])
            };
            let psi = codec::encode_soft(tape, w_lin, w_bias, yv)?;
            let g = MlpModel::forward(mlp_spec, tape, mlp_vars, xv, Mode::Train, rng_dropout)?;
            let log_pi = tape.log_softmax_rows(g)?;
            let pi = tape.softmax_rows(g)?;
            losses::composite_objective(
                tape,
                weights,
                CompositeParts { y: yv, psi, log_pi, mu, pi },
            )
        }
    }
}

// ── training engine ──────────────────────────────────────────────────

/// Train one method on one prepared dataset.
pub fn train_method(
    method: &MethodKind,
    ds: &PreparedDataset,
    mlp_spec: &MlpSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    mlp_spec.validate()?;
    let started = Instant::now();
    let m = ds.target_dim();
    if mlp_spec.input_dim != ds.feature_dim() {
        return Err(Error::InvalidArgument(format!(
            "MLP input_dim {} does not match dataset features {}",
            mlp_spec.input_dim,
            ds.feature_dim()
        )));
    }
    let expected_out = method.output_dim(m);
    if mlp_spec.output_dim != expected_out {
        return Err(Error::InvalidArgument(format!(
            "method {} needs output_dim {expected_out}, spec has {}",
            method.name(),
            mlp_spec.output_dim
        )));
    }

    let root = Rng::from_seed(cfg.seed);
    let mut rng_init = root.derive("init");
    let mut rng_dropout = root.derive("dropout");
    let mut rng_shuffle = root.derive("shuffle");
    let mut rng_codec = root.derive("codec");

    let mlp = MlpModel::init(mlp_spec, &mut rng_init)?;
    let mut rt = build_runtime(method, ds, &mlp, cfg, &mut rng_codec)?;

    let n = ds.x_train.rows();
    let batches_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * batches_per_epoch;
    let mut adam = AdamState::new(&rt.params);

    let mut live_mlp = mlp.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params = rt.params.clone();
    let mut step_losses = Vec::with_capacity(total_steps);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        let batches =
            data::batch_tensor_pair(&ds.x_train, &ds.y_train, cfg.batch_size, &mut rng_shuffle, true);
        let mut loss_sum = 0.0;
        let mut lr_last = 0.0;
        for (bx, by) in &batches {
            let mut tape = Tape::new();
            let vars: Vec<Var> = rt.params.iter().map(|p| tape.param(p)).collect();
            let loss = batch_loss(&rt, mlp_spec, &mut tape, &vars, bx, by, &mut rng_dropout)?;
            let loss_val = tape.value(loss).item();
            if !loss_val.is_finite() {
                return Err(Error::Training(format!(
                    "{}: loss became {loss_val} at epoch {epoch}, step {step}",
                    method.name()
                )));
            }
            step_losses.push(loss_val);
            loss_sum += loss_val;

            let mut grads = tape.backward(loss)?.collect(&vars)?;
            optim::clip_grad_norm(&mut grads, cfg.grad_clip)?;
            let lr = optim::lr_at(cfg, step, total_steps)?;
            lr_last = lr;
            optim::adam_step(&mut adam, &mut rt.params, &grads, &rt.wds, lr, cfg).map_err(
                |e| Error::Training(format!("{}: epoch {epoch}, step {step}: {e}", method.name())),
            )?;
            step += 1;
        }

        live_mlp.params = rt.params[..rt.mlp_param_count].to_vec();
        let bundle = TrainedBundle {
            method: method.clone(),
            mlp: live_mlp.clone(),
            mu: rt.current_mu(),
            codec: rt.current_codec(),
        };
        let val_rmse = evaluate_rmse(&bundle, ds, Split::Val)?;
        epochs.push(EpochStat {
            epoch,
            mean_train_loss: loss_sum / batches.len() as f64,
            val_rmse,
            lr_last,
        });
        if val_rmse < best_val {
            best_val = val_rmse;
            best_epoch = epoch;
            best_params = rt.params.clone();
        }
    }

    let final_params = rt.params.clone();
    rt.params = best_params;
    live_mlp.params = rt.params[..rt.mlp_param_count].to_vec();
    let bundle = TrainedBundle {
        method: method.clone(),
        mlp: live_mlp,
        mu: rt.current_mu(),
        codec: rt.current_codec(),
    };
    let test_rmse = evaluate_rmse(&bundle, ds, Split::Test)?;

    let mut hparams = method.hparams();
    hparams.insert("lr".into(), serde_json::json!(cfg.max_lr));
    hparams.insert("epochs".into(), serde_json::json!(cfg.epochs));
    hparams.insert("batch_size".into(), serde_json::json!(cfg.batch_size));
    hparams.insert("hidden_dims".into(), serde_json::json!(mlp_spec.hidden_dims));
    hparams.insert("dropout".into(), serde_json::json!(mlp_spec.dropout_rate));

    let result = ExperimentResult {
        dataset: ds.name.clone(),
        method: method.name().into(),
        k: method.k(),
        seed: cfg.seed,
        best_val_rmse: best_val,
        best_epoch,
        test_rmse,
        normalized_test_rmse: None,
        selected_hparams: hparams,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome {
        bundle,
        result,
        epochs,
        step_losses,
        final_params,
        param_names: rt.names,
    })
}

/// RMSE of decoded predictions on a split, in scaled target units:
/// `sqrt(mean_b ||y_b - prediction_b||^2)`.
pub fn evaluate_rmse(bundle: &TrainedBundle, ds: &PreparedDataset, split: Split) -> Result<f64> {
    let (x, y) = ds.split(split);
    if x.rows() == 0 {
        return Err(Error::InvalidArgument("cannot evaluate an empty split".into()));
    }
    let pred = bundle.predict(x)?;
    let total: f64 = y
        .data()
        .iter()
        .zip(pred.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((total / x.rows() as f64).sqrt())
}

// ── benchmark runner ─────────────────────────────────────────────────

#[derive(Clone, Debug, Serialize)]
pub struct CellFailure {
    pub dataset: String,
    pub method: String,
    pub k: Option<usize>,
    pub seed: u64,
    pub error: String,
}

/// Seed-averaged summary of one (dataset, method, k) combination.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub method: String,
    pub k: Option<usize>,
    pub n_seeds: usize,
    pub mean_val_rmse: f64,
    pub mean_test_rmse: f64,
    /// Mean test RMSE over the least-squares mean on the same dataset.
    pub normalized: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct BenchTable {
    pub rows: Vec<ExperimentResult>,
    pub failures: Vec<CellFailure>,
    pub summary: Vec<SummaryRow>,
}

impl BenchTable {
    /// Per-seed rows as CSV.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from(
            "dataset,method,k,seed,val_rmse,test_rmse,normalized,best_epoch,runtime_s\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{},{},{:.3}\n",
                r.dataset,
                r.method,
                r.k.map(|k| k.to_string()).unwrap_or_default(),
                r.seed,
                r.best_val_rmse,
                r.test_rmse,
                r.normalized_test_rmse.map(|v| format!("{v:.6}")).unwrap_or_default(),
                r.best_epoch,
                r.wall_clock_s,
            ));
        }
        for f in &self.failures {
            out.push_str(&format!(
                "{},{},{},{},,,,,FAILED: {}\n",
                f.dataset,
                f.method,
                f.k.map(|k| k.to_string()).unwrap_or_default(),
                f.seed,
                f.error.replace(['\n', ','], ";"),
            ));
        }
        out
    }

    /// Seed-averaged summary as CSV (the normalized bar-plot table).
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("dataset,method,k,n_seeds,mean_val_rmse,mean_test_rmse,normalized\n");
        for s in &self.summary {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{}\n",
                s.dataset,
                s.method,
                s.k.map(|k| k.to_string()).unwrap_or_default(),
                s.n_seeds,
                s.mean_val_rmse,
                s.mean_test_rmse,
                s.normalized.map(|v| format!("{v:.6}")).unwrap_or_default(),
            ));
        }
        out
    }
}

/// Train every (dataset, method, seed) combination, average over seeds, and
/// normalize each dataset by its least-squares mean. Cell failures are
/// recorded and the remaining cells continue. Cells run in parallel; the
/// table is identical for any degree of parallelism.
pub fn run_benchmark(
    datasets: &[&PreparedDataset],
    methods: &[MethodKind],
    seeds: &[u64],
    base_cfg: &TrainConfig,
    hidden_dims: &[usize],
    dropout: f64,
) -> Result<BenchTable> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    struct Cell<'a> {
        ds: &'a PreparedDataset,
        method: MethodKind,
        seed: u64,
    }
    let mut cells = Vec::new();
    for ds in datasets {
        for method in methods {
            for &seed in seeds {
                cells.push(Cell { ds, method: method.clone(), seed });
            }
        }
    }

    let outcomes: Vec<(usize, std::result::Result<ExperimentResult, CellFailure>)> = cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| {
            let mut cfg = base_cfg.clone();
            cfg.seed = cell.seed;
            cfg.batch_size = cell.ds.batch_size;
            let mut spec = MlpSpec::new(
                cell.ds.feature_dim(),
                hidden_dims.to_vec(),
                cell.method.output_dim(cell.ds.target_dim()),
            );
            spec.dropout_rate = dropout;
            let out = train_method(&cell.method, cell.ds, &spec, &cfg);
            (
                i,
                out.map(|o| o.result).map_err(|e| CellFailure {
                    dataset: cell.ds.name.clone(),
                    method: cell.method.name().into(),
                    k: cell.method.k(),
                    seed: cell.seed,
                    error: e.to_string(),
                }),
            )
        })
        .collect();

    let mut ordered: Vec<_> = outcomes;
    ordered.sort_by_key(|(i, _)| *i);
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (_, r) in ordered {
        match r {
            Ok(res) => rows.push(res),
            Err(f) => failures.push(f),
        }
    }

    // least-squares mean per dataset, for normalization
    let mut ls_mean: BTreeMap<String, f64> = BTreeMap::new();
    for ds in datasets {
        let ls: Vec<f64> = rows
            .iter()
            .filter(|r| r.dataset == ds.name && r.method == "ls")
            .map(|r| r.test_rmse)
            .collect();
        if !ls.is_empty() {
            ls_mean.insert(ds.name.clone(), ls.iter().sum::<f64>() / ls.len() as f64);
        }
    }
    for r in &mut rows {
        r.normalized_test_rmse = ls_mean.get(&r.dataset).map(|m| r.test_rmse / m);
    }

    let mut summary = Vec::new();
    for ds in datasets {
        for method in methods {
            let cell_rows: Vec<&ExperimentResult> = rows
                .iter()
                .filter(|r| {
                    r.dataset == ds.name && r.method == method.name() && r.k == method.k()
                })
                .collect();
            if cell_rows.is_empty() {
                continue;
            }
            let n = cell_rows.len() as f64;
            let mean_test = cell_rows.iter().map(|r| r.test_rmse).sum::<f64>() / n;
            let mean_val = cell_rows.iter().map(|r| r.best_val_rmse).sum::<f64>() / n;
            summary.push(SummaryRow {
                dataset: ds.name.clone(),
                method: method.name().into(),
                k: method.k(),
                n_seeds: cell_rows.len(),
                mean_val_rmse: mean_val,
                mean_test_rmse: mean_test,
                normalized: ls_mean.get(&ds.name).map(|m| mean_test / m),
            });
        }
    }
    Ok(BenchTable { rows, failures, summary })
}

// ── hyperparameter sweep ─────────────────────────────────────────────

#[derive(Clone, Debug, Serialize)]
pub struct SweepCell {
    pub assignment: BTreeMap<String, f64>,
    pub mean_val_rmse: f64,
    pub mean_test_rmse: f64,
    pub results: Vec<ExperimentResult>,
}

#[derive(Debug, Serialize)]
pub struct SweepOutcome {
    pub best: BTreeMap<String, f64>,
    pub best_mean_val_rmse: f64,
    pub cells: Vec<SweepCell>,
    pub failures: Vec<CellFailure>,
}

/// The ten-point logarithmic grid over `[10^-1.5, 10^1.5]` used for
/// KL-weight sweeps.
pub fn log_grid_10() -> Vec<f64> {
    (0..10).map(|i| 10f64.powf(-1.5 + 3.0 * i as f64 / 9.0)).collect()
}

/// Parse a sweep grid string of the form `"lr=1e-3,1e-2;lambda_kl=@log10"`:
/// semicolon-separated `name=v1,v2,...` entries, where the special value
/// `@log10` expands to [`log_grid_10`].
pub fn parse_grid(s: &str) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut grid = BTreeMap::new();
    for entry in s.split(';') {
        let entry = entry.trim();
        if entry.is_empty() {
            continue;
        }
        let Some((key, values)) = entry.split_once('=') else {
            return Err(Error::Config(format!("grid entry {entry:?} is not `name=v1,v2`")));
        };
        let key = key.trim();
        if !SWEEPABLE.contains(&key) {
            return Err(Error::Config(format!(
                "unknown sweep parameter {key:?} (one of {SWEEPABLE:?})"
            )));
        }
        let parsed: Vec<f64> = if values.trim() == "@log10" {
            log_grid_10()
        } else {
            values
                .split(',')
                .map(|v| {
                    let v = v.trim();
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::Config(format!("grid value {v:?} is not a number")))
                })
                .collect::<Result<_>>()?
        };
        if parsed.is_empty() {
            return Err(Error::Config(format!("grid entry {key:?} has no values")));
        }
        if grid.insert(key.to_string(), parsed).is_some() {
            return Err(Error::Config(format!("grid parameter {key:?} given twice")));
        }
    }
    if grid.is_empty() {
        return Err(Error::Config("sweep grid must be non-empty".into()));
    }
    Ok(grid)
}

const SWEEPABLE: &[&str] =
    &["lr", "lambda_kl", "lambda_auto", "lambda_pred", "lambda_sigma", "alpha", "k", "epochs"];

fn apply_assignment(
    method: &MethodKind,
    cfg: &TrainConfig,
    assignment: &BTreeMap<String, f64>,
) -> Result<(MethodKind, TrainConfig)> {
    let mut method = method.clone();
    let mut cfg = cfg.clone();
    for (key, &value) in assignment {
        match key.as_str() {
            "lr" => cfg.max_lr = value,
            "epochs" => cfg.epochs = value as usize,
            "k" => {
                let k_new = value as usize;
                match &mut method {
                    MethodKind::Ls => {
                        return Err(Error::Config("ls has no k to sweep".into()));
                    }
                    MethodKind::LsSoftmax { k }
                    | MethodKind::HardBin { k, .. }
                    | MethodKind::SoftBin { k, .. }
                    | MethodKind::PretrainEnc { k, .. }
                    | MethodKind::EndToEnd { k, .. } => *k = k_new,
                }
            }
            "lambda_sigma" => match &mut method {
                MethodKind::SoftBin { lambda_sigma, .. }
                | MethodKind::PretrainEnc { lambda_sigma, .. }
                | MethodKind::EndToEnd { lambda_sigma, .. } => *lambda_sigma = value,
                _ => {
                    return Err(Error::Config(format!(
                        "{} has no lambda_sigma to sweep",
                        method.name()
                    )))
                }
            },
            "alpha" => match &mut method {
                MethodKind::PretrainEnc { alpha, .. } => *alpha = value,
                MethodKind::EndToEnd { weights, .. } => weights.alpha = value,
                _ => {
                    return Err(Error::Config(format!("{} has no alpha to sweep", method.name())))
                }
            },
            "lambda_kl" | "lambda_auto" | "lambda_pred" => match &mut method {
                MethodKind::EndToEnd { weights, .. } => match key.as_str() {
                    "lambda_kl" => weights.lambda_kl = value,
                    "lambda_auto" => weights.lambda_auto = value,
                    _ => weights.lambda_pred = value,
                },
                _ => {
                    return Err(Error::Config(format!(
                        "{} has no {key} to sweep",
                        method.name()
                    )))
                }
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown sweep parameter {other:?} (one of {SWEEPABLE:?})"
                )))
            }
        }
    }
    Ok((method, cfg))
}

/// Train every grid point over all seeds and pick the assignment with the
/// lowest mean validation RMSE. Ties prefer smaller `lambda_kl`, then
/// smaller `lr`.
pub fn sweep(
    ds: &PreparedDataset,
    method: &MethodKind,
    grid: &BTreeMap<String, Vec<f64>>,
    seeds: &[u64],
    base_cfg: &TrainConfig,
    hidden_dims: &[usize],
    dropout: f64,
) -> Result<SweepOutcome> {
    if grid.is_empty() || grid.values().any(|v| v.is_empty()) {
        return Err(Error::Config("sweep grid must be non-empty".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    for key in grid.keys() {
        if !SWEEPABLE.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "unknown sweep parameter {key:?} (one of {SWEEPABLE:?})"
            )));
        }
    }

    // cartesian product in deterministic (sorted-key) order
    let keys: Vec<&String> = grid.keys().collect();
    let mut assignments: Vec<BTreeMap<String, f64>> = vec![BTreeMap::new()];
    for key in &keys {
        let mut next = Vec::new();
        for partial in &assignments {
            for &v in &grid[*key] {
                let mut a = partial.clone();
                a.insert((*key).clone(), v);
                next.push(a);
            }
        }
        assignments = next;
    }

    let evaluated: Vec<(Option<SweepCell>, Vec<CellFailure>)> = assignments
        .par_iter()
        .map(|assignment| {
            let (cell_method, cell_cfg) = match apply_assignment(method, base_cfg, assignment) {
                Ok(v) => v,
                Err(e) => {
                    return (
                        None,
                        vec![CellFailure {
                            dataset: ds.name.clone(),
                            method: method.name().into(),
                            k: method.k(),
                            seed: 0,
                            error: e.to_string(),
                        }],
                    )
                }
            };
            let mut results = Vec::new();
            let mut cell_failures = Vec::new();
            for &seed in seeds {
                let mut cfg = cell_cfg.clone();
                cfg.seed = seed;
                cfg.batch_size = ds.batch_size;
                let mut spec = MlpSpec::new(
                    ds.feature_dim(),
                    hidden_dims.to_vec(),
                    cell_method.output_dim(ds.target_dim()),
                );
                spec.dropout_rate = dropout;
                match train_method(&cell_method, ds, &spec, &cfg) {
                    Ok(out) => results.push(out.result),
                    Err(e) => cell_failures.push(CellFailure {
                        dataset: ds.name.clone(),
                        method: cell_method.name().into(),
                        k: cell_method.k(),
                        seed,
                        error: e.to_string(),
                    }),
                }
            }
            if results.is_empty() {
                return (None, cell_failures);
            }
            let n = results.len() as f64;
            let mean_val = results.iter().map(|r| r.best_val_rmse).sum::<f64>() / n;
            let mean_test = results.iter().map(|r| r.test_rmse).sum::<f64>() / n;
            let cell = SweepCell {
                assignment: assignment.clone(),
                mean_val_rmse: mean_val,
                mean_test_rmse: mean_test,
                results,
            };
            (Some(cell), cell_failures)
        })
        .collect();

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for (cell, cell_failures) in evaluated {
        cells.extend(cell);
        failures.extend(cell_failures);
    }
    if cells.is_empty() {
        return Err(Error::Training(format!(
            "every sweep cell failed; first error: {}",
            failures.first().map(|f| f.error.clone()).unwrap_or_default()
        )));
    }

    let tie_key = |c: &SweepCell| {
        (
            c.mean_val_rmse,
            c.assignment.get("lambda_kl").copied().unwrap_or(f64::INFINITY),
            c.assignment.get("lr").copied().unwrap_or(f64::INFINITY),
        )
    };
    let best = cells
        .iter()
        .min_by(|a, b| tie_key(a).partial_cmp(&tie_key(b)).expect("finite rmse"))
        .expect("cells is non-empty");

    Ok(SweepOutcome {
        best: best.assignment.clone(),
        best_mean_val_rmse: best.mean_val_rmse,
        cells: cells.clone(),
        failures,
    })
}
