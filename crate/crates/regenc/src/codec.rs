//! Target encoder/decoder pairs.
//!
//! The encoder maps a target `y` in `R^m` to a distribution over `k`
//! classes; the decoder is a matrix `mu` of `k` prototype rows mapping a
//! distribution back to `R^m` via `z = pi @ mu`. Encoders come in two
//! flavors:
//!
//! - [`HardBinner`]: nearest-center one-hot assignment (not differentiable).
//! - [`TargetCodec`]: softmax of affine logits `softmax(y @ w_lin + w_bias)`.
//!   A codec built from centers and a temperature via [`gaussian_to_affine`]
//!   reproduces the squared-distance softmax form exactly; trained codecs
//!   are free affine maps.
//!
//! Initialization places prototypes by uniform spacing (`m = 1`) or
//! k-means++ (`m > 1`) and sets the temperature to `lambda_sigma` times the
//! prototype spacing. [`pretrain_codec`] then minimizes the autoencoding
//! objective on targets alone.

use crate::error::{Error, Result};
use crate::losses;
use crate::optim::{self, AdamState, TrainConfig};
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::{self, Tensor};

// ── hard binning ─────────────────────────────────────────────────────

/// How 1-D bins are placed over the target range.
#[derive(Copy, Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BinStyle {
    /// Equal-width intervals; centers at interval midpoints.
    EqualWidth,
    /// Intervals holding similar mass; edges at empirical quantiles.
    Quantile,
}

/// Nearest-center one-hot encoder. Ties break toward the lowest index.
#[derive(Clone, Debug)]
pub struct HardBinner {
    centers: Tensor,
}

impl HardBinner {
    pub fn new(centers: Tensor) -> Result<Self> {
        if !centers.is_matrix() || centers.rows() < 2 {
            return Err(Error::InvalidArgument(format!(
                "hard binner needs a [k>=2, m] center matrix, got {:?}",
                centers.shape()
            )));
        }
        let k = centers.rows();
        for i in 0..k {
            for j in i + 1..k {
                if centers.row(i) == centers.row(j) {
                    return Err(Error::InvalidArgument(format!(
                        "centers {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(HardBinner { centers })
    }

    /// Bin centers for 1-D targets over `[lo, hi]`.
    pub fn from_targets_1d(k: usize, style: BinStyle, targets: &Tensor) -> Result<Self> {
        if targets.shape().get(1) != Some(&1) {
            return Err(Error::InvalidArgument(format!(
                "1-D binner requires targets of shape [n, 1], got {:?}",
                targets.shape()
            )));
        }
        if k < 2 {
            return Err(Error::InvalidArgument("need at least 2 bins".into()));
        }
        let mut vals: Vec<f64> = targets.data().to_vec();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite targets"));
        let (lo, hi) = (vals[0], vals[vals.len() - 1]);
        if lo == hi {
            return Err(Error::InvalidArgument("constant targets cannot be binned".into()));
        }
        let centers: Vec<f64> = match style {
            BinStyle::EqualWidth => {
                let w = (hi - lo) / k as f64;
                (0..k).map(|i| lo + (i as f64 + 0.5) * w).collect()
            }
            BinStyle::Quantile => {
                let edge = |q: f64| -> f64 {
                    // linear-interpolation empirical quantile
                    let pos = q * (vals.len() - 1) as f64;
                    let i = pos.floor() as usize;
                    let frac = pos - i as f64;
                    if i + 1 < vals.len() {
                        vals[i] * (1.0 - frac) + vals[i + 1] * frac
                    } else {
                        vals[i]
                    }
                };
                (0..k)
                    .map(|i| {
                        let a = edge(i as f64 / k as f64);
                        let b = edge((i + 1) as f64 / k as f64);
                        0.5 * (a + b)
                    })
                    .collect()
            }
        };
        HardBinner::new(Tensor::new(vec![k, 1], centers)?)
    }

    pub fn centers(&self) -> &Tensor {
        &self.centers
    }

    pub fn k(&self) -> usize {
        self.centers.rows()
    }

    /// One-hot rows `e_i` with `i = argmin_i ||y_b - c_i||^2`.
    pub fn encode_hard(&self, y: &Tensor) -> Result<Tensor> {
        let m = self.centers.cols();
        if !y.is_matrix() || y.cols() != m {
            return Err(Error::shape(
                "encode_hard",
                format!("targets {:?} vs centers {:?}", y.shape(), self.centers.shape()),
            ));
        }
        let k = self.k();
        let mut out = Tensor::zeros(vec![y.rows(), k]);
        for r in 0..y.rows() {
            let yb = y.row(r);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for i in 0..k {
                let d: f64 = self
                    .centers
                    .row(i)
                    .iter()
                    .zip(yb)
                    .map(|(c, v)| (c - v) * (c - v))
                    .sum();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            out.set(r, best, 1.0);
        }
        Ok(out)
    }
}

// ── soft codec ───────────────────────────────────────────────────────

/// Affine-logit softmax encoder plus linear decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetCodec {
    /// Encoder weights `[m, k]`.
    pub w_lin: Tensor,
    /// Encoder bias `[k]`.
    pub w_bias: Tensor,
    /// Decoder prototypes `[k, m]`.
    pub mu: Tensor,
}

impl TargetCodec {
    pub fn new(w_lin: Tensor, w_bias: Tensor, mu: Tensor) -> Result<Self> {
        let (m, k) = (w_lin.shape()[0], w_lin.shape()[1]);
        if w_lin.shape().len() != 2 || w_bias.shape() != [k] || mu.shape() != [k, m] {
            return Err(Error::shape(
                "codec",
                format!(
                    "w_lin {:?}, w_bias {:?}, mu {:?} are inconsistent",
                    w_lin.shape(),
                    w_bias.shape(),
                    mu.shape()
                ),
            ));
        }
        Ok(TargetCodec { w_lin, w_bias, mu })
    }

    pub fn k(&self) -> usize {
        self.w_bias.shape()[0]
    }

    pub fn m(&self) -> usize {
        self.w_lin.shape()[0]
    }

    /// Encode targets without a tape: `softmax(y @ w_lin + w_bias)`.
    pub fn encode_soft_eval(&self, y: &Tensor) -> Result<Tensor> {
        let logits = tensor::add_row_broadcast(&tensor::matmul(y, &self.w_lin)?, &self.w_bias)?;
        tensor::softmax_rows(&logits)
    }

    /// Parameters in the fixed order `[w_lin, w_bias, mu]`.
    pub fn params(&self) -> [&Tensor; 3] {
        [&self.w_lin, &self.w_bias, &self.mu]
    }

    pub fn param_names() -> [&'static str; 3] {
        ["codec.w_lin", "codec.w_bias", "codec.mu"]
    }

    pub fn set_params(&mut self, params: &[Tensor]) {
        self.w_lin = params[0].clone();
        self.w_bias = params[1].clone();
        self.mu = params[2].clone();
    }
}

/// Differentiable encoder forward pass on a tape.
pub fn encode_soft(tape: &mut Tape, w_lin: Var, w_bias: Var, y: Var) -> Result<Var> {
    let wy = tape.matmul(y, w_lin)?;
    let logits = tape.add(wy, w_bias)?;
    tape.softmax_rows(logits)
}

/// Convert Gaussian-kernel parameters (centers, temperature) to affine
/// logits: column `i` of `w_lin` is `c_i / sigma^2` and
/// `w_bias_i = -||c_i||^2 / (2 sigma^2)`. The resulting encoder equals the
/// squared-distance softmax for every `y` (the two logit vectors differ only
/// by the shared `-||y||^2 / (2 sigma^2)` shift).
pub fn gaussian_to_affine(centers: &Tensor, sigma: f64) -> Result<(Tensor, Tensor)> {
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if !centers.is_matrix() {
        return Err(Error::shape("gaussian_to_affine", format!("{:?}", centers.shape())));
    }
    let (k, m) = (centers.rows(), centers.cols());
    let inv_s2 = 1.0 / (sigma * sigma);
    let mut w_lin = Tensor::zeros(vec![m, k]);
    let mut w_bias = Tensor::zeros(vec![k]);
    for i in 0..k {
        let c = centers.row(i);
        let sq: f64 = c.iter().map(|v| v * v).sum();
        w_bias.data_mut()[i] = -0.5 * sq * inv_s2;
        for (d, &cv) in c.iter().enumerate() {
            w_lin.set(d, i, cv * inv_s2);
        }
    }
    Ok((w_lin, w_bias))
}

/// Gaussian-form encoding evaluated directly from centers: softmax over
/// `-||c_i - y||^2 / (2 sigma^2)`. Reference route for the affine form.
pub fn encode_gaussian_eval(centers: &Tensor, sigma: f64, y: &Tensor) -> Result<Tensor> {
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let (k, m) = (centers.rows(), centers.cols());
    if !y.is_matrix() || y.cols() != m {
        return Err(Error::shape(
            "encode_gaussian",
            format!("targets {:?} vs centers {:?}", y.shape(), centers.shape()),
        ));
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut logits = Tensor::zeros(vec![y.rows(), k]);
    for r in 0..y.rows() {
        let yb = y.row(r);
        for i in 0..k {
            let d: f64 = centers.row(i).iter().zip(yb).map(|(c, v)| (c - v) * (c - v)).sum();
            logits.set(r, i, -d * inv);
        }
    }
    tensor::softmax_rows(&logits)
}

/// Decode class distributions into the target space: `z = pi @ mu`. Each
/// output coordinate is a convex combination of the prototype coordinates.
pub fn decode(mu: &Tensor, pi: &Tensor) -> Result<Tensor> {
    if !pi.is_matrix() || !mu.is_matrix() || pi.cols() != mu.rows() {
        return Err(Error::shape(
            "decode",
            format!("pi {:?} vs mu {:?}", pi.shape(), mu.shape()),
        ));
    }
    validate_simplex(pi, 1e-6)?;
    tensor::matmul(pi, mu)
}

/// Rows must have entries `>= -tol` and sums within `tol` of 1.
pub fn validate_simplex(pi: &Tensor, tol: f64) -> Result<()> {
    let c = pi.cols();
    for (r, row) in pi.data().chunks_exact(c).enumerate() {
        let mut sum = 0.0;
        for (i, &v) in row.iter().enumerate() {
            if v < -tol {
                return Err(Error::InvalidArgument(format!(
                    "row {r} entry {i} is {v}, below the simplex"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "row {r} sums to {sum}, outside the simplex tolerance {tol}"
            )));
        }
    }
    Ok(())
}

// ── initialization ───────────────────────────────────────────────────

/// Settings for building an initial codec.
#[derive(Clone, Debug)]
pub struct CodecInitConfig {
    pub k: usize,
    pub m: usize,
    /// Temperature multiplier: `sigma = lambda_sigma * delta_mu`.
    pub lambda_sigma: f64,
    /// Per-dimension target range `[min, max]`.
    pub target_range: Vec<(f64, f64)>,
    pub kmeans_iters: usize,
    /// Entropy coefficient for pretraining (signed; positive penalizes).
    pub alpha: f64,
}

impl CodecInitConfig {
    pub fn new(k: usize, m: usize) -> Self {
        CodecInitConfig {
            k,
            m,
            lambda_sigma: 1.0,
            target_range: vec![(0.0, 1.0); m],
            kmeans_iters: 50,
            alpha: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.target_range.len() != self.m {
            return Err(Error::InvalidArgument(format!(
                "target_range must list {} dimensions",
                self.m
            )));
        }
        if self.lambda_sigma <= 0.0 {
            return Err(Error::InvalidArgument("lambda_sigma must be positive".into()));
        }
        for &(lo, hi) in &self.target_range {
            if lo >= hi {
                return Err(Error::InvalidArgument(format!(
                    "target range [{lo}, {hi}] is empty"
                )));
            }
        }
        Ok(())
    }
}

/// Uniformly spaced 1-D prototypes: `mu_i = lo + (i-1)·delta` with
/// `delta = (hi - lo)/(k - 1)`, encoder from
/// `gaussian_to_affine(mu, lambda_sigma·delta)`.
pub fn init_uniform_1d(cfg: &CodecInitConfig) -> Result<TargetCodec> {
    cfg.validate()?;
    if cfg.m != 1 {
        return Err(Error::InvalidArgument(format!(
            "uniform spacing init requires m = 1, got {}",
            cfg.m
        )));
    }
    if cfg.k < 2 {
        return Err(Error::InvalidArgument("need k >= 2 for uniform spacing".into()));
    }
    let (lo, hi) = cfg.target_range[0];
    let delta = (hi - lo) / (cfg.k - 1) as f64;
    let mu = Tensor::new(
        vec![cfg.k, 1],
        (0..cfg.k).map(|i| lo + i as f64 * delta).collect(),
    )?;
    let (w_lin, w_bias) = gaussian_to_affine(&mu, cfg.lambda_sigma * delta)?;
    TargetCodec::new(w_lin, w_bias, mu)
}

/// k-means++ seeding followed by Lloyd iterations.
#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub centers: Tensor,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub sse: f64,
    /// Mean Euclidean distance of each point to its assigned center.
    pub avg_intra_dist: f64,
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn kmeans_pp(points: &Tensor, k: usize, iters: usize, rng: &mut Rng) -> Result<KMeansResult> {
    if !points.is_matrix() || points.rows() < k || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "k-means needs k in [1, n]: k = {k}, points {:?}",
            points.shape()
        )));
    }
    let (n, m) = (points.rows(), points.cols());
    {
        let mut distinct: Vec<&[f64]> = (0..n).map(|r| points.row(r)).collect();
        distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
        distinct.dedup();
        if distinct.len() < k {
            return Err(Error::InvalidArgument(format!(
                "only {} distinct points for k = {k}",
                distinct.len()
            )));
        }
    }

    // D^2 seeding.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points.row(rng.index(n)).to_vec());
    let mut d2: Vec<f64> = (0..n).map(|r| dist_sq(points.row(r), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let mut r = rng.uniform() * total;
        let mut pick = n - 1;
        for (i, &w) in d2.iter().enumerate() {
            if r < w {
                pick = i;
                break;
            }
            r -= w;
        }
        centers.push(points.row(pick).to_vec());
        let new = centers.last().expect("just pushed");
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist_sq(points.row(i), new));
        }
    }

    // Lloyd with early stop on unchanged assignments; empty clusters reseed
    // at the point farthest from its current center.
    let mut assignments = vec![0usize; n];
    for _ in 0..iters.max(1) {
        let mut changed = false;
        for (i, a) in assignments.iter_mut().enumerate() {
            let p = points.row(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = dist_sq(p, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0; m]; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = dist_sq(points.row(a), &centers[assignments[a]]);
                        let db = dist_sq(points.row(b), &centers[assignments[b]]);
                        da.partial_cmp(&db).expect("finite")
                    })
                    .expect("n > 0");
                centers[c] = points.row(far).to_vec();
                changed = true;
            } else {
                for (d, s) in centers[c].iter_mut().zip(&sums[c]) {
                    *d = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut sse = 0.0;
    let mut dist_sum = 0.0;
    for (i, &a) in assignments.iter().enumerate() {
        let d = dist_sq(points.row(i), &centers[a]);
        sse += d;
        dist_sum += d.sqrt();
    }
    let centers = Tensor::new(vec![k, m], centers.into_iter().flatten().collect())?;
    Ok(KMeansResult { centers, assignments, sse, avg_intra_dist: dist_sum / n as f64 })
}

/// Prototypes from k-means++ over the targets; the spacing scale
/// `delta_mu` is the average intra-cluster distance.
pub fn init_kmeanspp(cfg: &CodecInitConfig, targets: &Tensor, rng: &mut Rng) -> Result<TargetCodec> {
    cfg.validate()?;
    if targets.shape().get(1) != Some(&cfg.m) {
        return Err(Error::shape(
            "init_kmeanspp",
            format!("targets {:?} vs m = {}", targets.shape(), cfg.m),
        ));
    }
    let km = kmeans_pp(targets, cfg.k, cfg.kmeans_iters, rng)?;
    let mut delta = km.avg_intra_dist;
    if delta == 0.0 {
        // Degenerate fit (k >= #distinct points): fall back to the mean
        // nearest-neighbor spacing between centers so sigma stays positive.
        let k = km.centers.rows();
        let mut total = 0.0;
        for i in 0..k {
            let mut nearest = f64::INFINITY;
            for j in 0..k {
                if i != j {
                    nearest = nearest.min(dist_sq(km.centers.row(i), km.centers.row(j)));
                }
            }
            total += nearest.sqrt();
        }
        delta = total / k as f64;
    }
    let (w_lin, w_bias) = gaussian_to_affine(&km.centers, cfg.lambda_sigma * delta)?;
    TargetCodec::new(w_lin, w_bias, km.centers)
}

// ── pretraining ──────────────────────────────────────────────────────

/// Root-mean-square autoencoding error `sqrt(mean ||y - psi(y) @ mu||^2)`.
pub fn autoencoding_rmse(codec: &TargetCodec, targets: &Tensor) -> Result<f64> {
    let psi = codec.encode_soft_eval(targets)?;
    let decoded = tensor::matmul(&psi, &codec.mu)?;
    let n = targets.rows() as f64;
    let total: f64 = targets
        .data()
        .iter()
        .zip(decoded.data())
        .map(|(y, z)| (y - z) * (y - z))
        .sum();
    Ok((total / n).sqrt())
}

/// Mean entropy of the encoded distributions over the given targets.
pub fn mean_encode_entropy(codec: &TargetCodec, targets: &Tensor) -> Result<f64> {
    let psi = codec.encode_soft_eval(targets)?;
    let k = psi.cols();
    let mut total = 0.0;
    for row in psi.data().chunks_exact(k) {
        total -= row
            .iter()
            .map(|&p| p * p.max(crate::tape::XLOGX_EPS).ln())
            .sum::<f64>();
    }
    Ok(total / psi.rows() as f64)
}

/// Result of [`pretrain_codec`].
#[derive(Debug)]
pub struct PretrainOutcome {
    /// Codec snapshot with the best autoencoding RMSE seen (including the
    /// initialization itself).
    pub codec: TargetCodec,
    /// Codec state after the last step, regardless of which epoch was best.
    pub final_codec: TargetCodec,
    /// Loss value of every optimizer step, in order.
    pub step_losses: Vec<f64>,
    /// Autoencoding RMSE after each epoch.
    pub epoch_rmse: Vec<f64>,
    pub init_rmse: f64,
    pub best_rmse: f64,
}

/// Stage-1 training: minimize
/// `mean ||y - psi_w(y) @ mu||^2 + alpha * H(psi_w(y))` over `(w, mu)` by
/// Adam on target batches alone (no features involved).
pub fn pretrain_codec(
    codec: &TargetCodec,
    targets: &Tensor,
    alpha: f64,
    cfg: &TrainConfig,
) -> Result<PretrainOutcome> {
    cfg.validate()?;
    if targets.shape().get(1) != Some(&codec.m()) {
        return Err(Error::shape(
            "pretrain_codec",
            format!("targets {:?} vs codec m = {}", targets.shape(), codec.m()),
        ));
    }
    let mut work = codec.clone();
    let mut shuffle_rng = Rng::from_seed(cfg.seed).derive("shuffle");
    let n = targets.rows();
    let batches_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * batches_per_epoch;

    let mut params: Vec<Tensor> = work.params().iter().map(|&t| t.clone()).collect();
    let wds = vec![cfg.weight_decay_codec; params.len()];
    let mut adam = AdamState::new(&params);

    let init_rmse = autoencoding_rmse(&work, targets)?;
    let mut best_rmse = init_rmse;
    let mut best_params = params.clone();
    let mut step_losses = Vec::with_capacity(total_steps);
    let mut epoch_rmse = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        shuffle_rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let mut y_data = Vec::with_capacity(chunk.len() * codec.m());
            for &i in chunk {
                y_data.extend_from_slice(targets.row(i));
            }
            let y = Tensor::new(vec![chunk.len(), codec.m()], y_data)?;

            let mut tape = Tape::new();
            let vars: Vec<Var> = params.iter().map(|p| tape.param(p)).collect();
            let yv = tape.input(y);
            let psi = encode_soft(&mut tape, vars[0], vars[1], yv)?;
            let loss = losses::autoencoding_objective(&mut tape, yv, psi, vars[2], alpha)?;
            let loss_val = tape.value(loss).item();
            if !loss_val.is_finite() {
                return Err(Error::Training(format!(
                    "pretraining loss became {loss_val} at epoch {epoch}, step {step}"
                )));
            }
            step_losses.push(loss_val);

            let mut grads = tape.backward(loss)?.collect(&vars)?;
            optim::clip_grad_norm(&mut grads, cfg.grad_clip)?;
            let lr = optim::lr_at(cfg, step, total_steps)?;
            optim::adam_step(&mut adam, &mut params, &grads, &wds, lr, cfg)?;
            step += 1;
        }
        work.set_params(&params);
        let rmse = autoencoding_rmse(&work, targets)?;
        epoch_rmse.push(rmse);
        if rmse < best_rmse {
            best_rmse = rmse;
            best_params = params.clone();
        }
    }

    let mut final_codec = work.clone();
    final_codec.set_params(&params);
    work.set_params(&best_params);
    Ok(PretrainOutcome { codec: work, final_codec, step_losses, epoch_rmse, init_rmse, best_rmse })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(vals: &[f64]) -> Tensor {
        Tensor::new(vec![vals.len(), 1], vals.to_vec()).unwrap()
    }

    #[test]
    fn encode_hard_examples() {
        let binner = HardBinner::new(col(&[0.0, 0.5, 1.0])).unwrap();
        // 0.3 is nearer to 0.5 than to 0
        let e = binner.encode_hard(&col(&[0.3])).unwrap();
        assert_eq!(e.data(), &[0.0, 1.0, 0.0]);
        // exact center
        let e = binner.encode_hard(&col(&[1.0])).unwrap();
        assert_eq!(e.data(), &[0.0, 0.0, 1.0]);
        // tie breaks toward the lowest index
        let binner = HardBinner::new(col(&[0.0, 0.5])).unwrap();
        let e = binner.encode_hard(&col(&[0.25])).unwrap();
        assert_eq!(e.data(), &[1.0, 0.0]);
    }

    #[test]
    fn hard_binner_rejects_duplicate_centers() {
        assert!(HardBinner::new(col(&[0.3, 0.3, 0.9])).is_err());
        assert!(HardBinner::new(col(&[0.3])).is_err());
    }

    #[test]
    fn equal_width_and_quantile_bins() {
        let targets = col(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]);
        let eq = HardBinner::from_targets_1d(4, BinStyle::EqualWidth, &targets).unwrap();
        assert_eq!(eq.centers().data(), &[0.125, 0.375, 0.625, 0.875]);

        // Skewed data: quantile centers crowd where the mass is.
        let skew = col(&[0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.5, 1.0]);
        let q = HardBinner::from_targets_1d(2, BinStyle::Quantile, &skew).unwrap();
        assert!(q.centers().data()[0] < 0.1, "{:?}", q.centers().data());
    }

    #[test]
    fn gaussian_to_affine_example() {
        // Hand evaluation: centers (0, .5, 1), sigma = .5 so sigma^2 = .25.
        let (w_lin, w_bias) = gaussian_to_affine(&col(&[0.0, 0.5, 1.0]), 0.5).unwrap();
        assert_eq!(w_lin.shape(), &[1, 3]);
        assert_eq!(w_lin.data(), &[0.0, 2.0, 4.0]);
        assert_eq!(w_bias.data(), &[0.0, -0.5, -2.0]);
        assert!(gaussian_to_affine(&col(&[0.0, 1.0]), 0.0).is_err());
        assert!(gaussian_to_affine(&col(&[0.0, 1.0]), -1.0).is_err());
    }

    #[test]
    fn encode_soft_oracle_value() {
        // Oracle (30-digit evaluation of the squared-distance softmax):
        // psi(0.5) = (0.274068619061197, 0.45186276187760604, same as 1st).
        let (w_lin, w_bias) = gaussian_to_affine(&col(&[0.0, 0.5, 1.0]), 0.5).unwrap();
        let codec = TargetCodec::new(w_lin, w_bias, col(&[0.0, 0.5, 1.0])).unwrap();
        let psi = codec.encode_soft_eval(&col(&[0.5])).unwrap();
        assert!((psi.data()[0] - 0.274068619061197).abs() < 1e-12);
        assert!((psi.data()[1] - 0.45186276187760604).abs() < 1e-12);
        // symmetric centers about y give exactly equal end coordinates
        assert_eq!(psi.data()[0], psi.data()[2]);
    }

    #[test]
    fn zero_encoder_is_uniform() {
        let codec = TargetCodec::new(
            Tensor::zeros(vec![1, 4]),
            Tensor::zeros(vec![4]),
            Tensor::zeros(vec![4, 1]),
        )
        .unwrap();
        let psi = codec.encode_soft_eval(&col(&[0.37, -2.0, 5.0])).unwrap();
        for &v in psi.data() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn large_sigma_approaches_uniform() {
        let centers = col(&[0.0, 0.4, 1.0]);
        let psi = encode_gaussian_eval(&centers, 1e3, &col(&[0.2, 0.9])).unwrap();
        for &v in psi.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-4, "{v}");
        }
    }

    #[test]
    fn affine_matches_gaussian_form() {
        let mut rng = Rng::from_seed(41);
        for _ in 0..100 {
            let k = 2 + rng.index(6);
            let m = 1 + rng.index(2);
            let centers = Tensor::new(
                vec![k, m],
                (0..k * m).map(|_| rng.uniform_in(-1.0, 2.0)).collect(),
            )
            .unwrap();
            let sigma = 0.05 + rng.uniform();
            let y =
                Tensor::new(vec![3, m], (0..3 * m).map(|_| rng.uniform_in(-1.0, 2.0)).collect())
                    .unwrap();
            let reference = encode_gaussian_eval(&centers, sigma, &y).unwrap();
            let (w_lin, w_bias) = gaussian_to_affine(&centers, sigma).unwrap();
            let codec = TargetCodec::new(w_lin, w_bias, centers).unwrap();
            let affine = codec.encode_soft_eval(&y).unwrap();
            for (a, b) in affine.data().iter().zip(reference.data()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn decode_examples() {
        let mu = col(&[0.0, 0.5, 1.0]);
        // one-hot picks the prototype row
        let pi = Tensor::new(vec![1, 3], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(decode(&mu, &pi).unwrap().data(), &[0.5]);
        // symmetric mixture
        let pi = Tensor::new(vec![1, 3], vec![0.25, 0.5, 0.25]).unwrap();
        assert!((decode(&mu, &pi).unwrap().data()[0] - 0.5).abs() < 1e-15);
        // off-simplex rejected
        let pi = Tensor::new(vec![1, 3], vec![0.5, 0.5, 0.5]).unwrap();
        assert!(decode(&mu, &pi).is_err());
    }

    #[test]
    fn decode_stays_in_convex_hull() {
        let mut rng = Rng::from_seed(3);
        let mu = Tensor::new(vec![5, 1], (0..5).map(|_| rng.uniform()).collect()).unwrap();
        let (lo, hi) = mu.data().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
        for _ in 0..200 {
            let logits =
                Tensor::new(vec![1, 5], (0..5).map(|_| rng.normal() * 3.0).collect()).unwrap();
            let pi = tensor::softmax_rows(&logits).unwrap();
            let z = decode(&mu, &pi).unwrap().data()[0];
            assert!(z >= lo - 1e-12 && z <= hi + 1e-12, "{z} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn init_uniform_examples() {
        let cfg = CodecInitConfig::new(5, 1);
        let codec = init_uniform_1d(&cfg).unwrap();
        assert_eq!(codec.mu.data(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        // lambda_sigma = 1 gives sigma = delta = 0.25, hence w_lin col i = mu_i/sigma^2
        assert!((codec.w_lin.data()[1] - 0.25 / 0.0625).abs() < 1e-12);

        let cfg = CodecInitConfig::new(1, 1);
        assert!(init_uniform_1d(&cfg).is_err());
    }

    #[test]
    fn uniform_init_autoencoding_improves_with_k() {
        // Denser prototype grids reconstruct uniform targets strictly better.
        let y = col(&(0..=1000).map(|i| i as f64 / 1000.0).collect::<Vec<_>>());
        let rmse_at = |k: usize| {
            let codec = init_uniform_1d(&CodecInitConfig::new(k, 1)).unwrap();
            autoencoding_rmse(&codec, &y).unwrap()
        };
        let (r5, r50) = (rmse_at(5), rmse_at(50));
        assert!(r50 < r5, "rmse k=50 {r50} should beat k=5 {r5}");
    }

    #[test]
    fn kmeans_single_cluster_is_mean() {
        let pts = Tensor::from_rows(&[vec![0.0, 0.0], vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let km = kmeans_pp(&pts, 1, 50, &mut Rng::from_seed(0)).unwrap();
        assert!((km.centers.at(0, 0) - 1.0).abs() < 1e-12);
        assert!((km.centers.at(0, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kmeans_exact_points_reach_zero_sse() {
        let pts = Tensor::from_rows(&[
            vec![0.0, 0.0],
            vec![5.0, 5.0],
            vec![-3.0, 4.0],
        ])
        .unwrap();
        let km = kmeans_pp(&pts, 3, 50, &mut Rng::from_seed(1)).unwrap();
        assert!(km.sse < 1e-24, "sse {}", km.sse);
        let mut got: Vec<Vec<f64>> = (0..3).map(|r| km.centers.row(r).to_vec()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, vec![vec![-3.0, 4.0], vec![0.0, 0.0], vec![5.0, 5.0]]);
    }

    #[test]
    fn kmeans_rejects_too_few_distinct_points() {
        let pts = Tensor::from_rows(&[vec![1.0], vec![1.0], vec![2.0]]).unwrap();
        assert!(kmeans_pp(&pts, 3, 10, &mut Rng::from_seed(0)).is_err());
    }

    #[test]
    fn kmeans_three_blob_sse_near_restart_oracle() {
        // 2-D three-blob data; a single seeded run must come within 5% of the
        // best of 100 random restarts.
        let mut rng = Rng::from_seed(55);
        let blobs = [(0.0, 0.0), (4.0, 4.0), (-4.0, 5.0)];
        let mut rows = Vec::new();
        for &(cx, cy) in &blobs {
            for _ in 0..60 {
                rows.push(vec![cx + 0.4 * rng.normal(), cy + 0.4 * rng.normal()]);
            }
        }
        let pts = Tensor::from_rows(&rows).unwrap();
        let single = kmeans_pp(&pts, 3, 50, &mut Rng::from_seed(7)).unwrap();
        let mut best = f64::INFINITY;
        for restart in 0..100 {
            let km = kmeans_pp(&pts, 3, 50, &mut Rng::from_seed(1000 + restart)).unwrap();
            best = best.min(km.sse);
        }
        assert!(single.sse <= best * 1.05, "sse {} vs oracle {best}", single.sse);
    }

    #[test]
    fn interpolation_oracle_reaches_tiny_rmse() {
        // Prototypes placed exactly at the (distinct) targets with a sharp
        // temperature make the autoencoding error collapse.
        let y = col(&[0.05, 0.2, 0.4, 0.55, 0.7, 0.95]);
        let (w_lin, w_bias) = gaussian_to_affine(&y, 1e-2).unwrap();
        let codec = TargetCodec::new(w_lin, w_bias, y.clone()).unwrap();
        let rmse = autoencoding_rmse(&codec, &y).unwrap();
        assert!(rmse < 1e-3, "rmse {rmse}");
    }

    #[test]
    fn decode_of_hard_encoding_reproduces_nearest_centers() {
        let centers = col(&[0.1, 0.5, 0.9]);
        let binner = HardBinner::new(centers.clone()).unwrap();
        let y = col(&[0.0, 0.35, 0.52, 1.4]);
        let psi = binner.encode_hard(&y).unwrap();
        let decoded = decode(&centers, &psi).unwrap();
        assert_eq!(decoded.data(), &[0.1, 0.5, 0.5, 0.9]);
    }

    #[test]
    fn pretrain_divergence_is_reported_with_step() {
        let y = col(&[0.1, 0.4, 0.9, 0.3, 0.6, 0.2, 0.8, 0.7]);
        let codec = init_uniform_1d(&CodecInitConfig::new(4, 1)).unwrap();
        // an absurd learning rate overflows the reconstruction loss
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            max_lr: 1e160,
            grad_clip: 1e300,
            schedule: crate::optim::Schedule::Constant,
            seed: 0,
            ..TrainConfig::default()
        };
        let err = pretrain_codec(&codec, &y, 0.0, &cfg).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("step"), "{msg}");
    }

    #[test]
    fn pretrain_improves_autoencoding() {
        let mut rng = Rng::from_seed(71);
        let y = col(&(0..256).map(|_| rng.uniform()).collect::<Vec<_>>());
        let codec = init_uniform_1d(&CodecInitConfig::new(25, 1)).unwrap();
        let cfg = TrainConfig {
            epochs: 15,
            batch_size: 64,
            max_lr: 3e-3,
            seed: 5,
            ..TrainConfig::default()
        };
        let out = pretrain_codec(&codec, &y, 0.0, &cfg).unwrap();
        assert!(
            out.best_rmse < out.init_rmse,
            "best {} vs init {}",
            out.best_rmse,
            out.init_rmse
        );
        // returned codec carries the best snapshot
        let rmse = autoencoding_rmse(&out.codec, &y).unwrap();
        assert!((rmse - out.best_rmse).abs() < 1e-12);
    }

    #[test]
    fn entropy_penalty_lowers_mean_entropy() {
        let mut rng = Rng::from_seed(72);
        let y = col(&(0..256).map(|_| rng.uniform()).collect::<Vec<_>>());
        let codec = init_uniform_1d(&CodecInitConfig::new(10, 1)).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 64,
            max_lr: 3e-3,
            seed: 9,
            ..TrainConfig::default()
        };
        let plain = pretrain_codec(&codec, &y, 0.0, &cfg).unwrap();
        let penalized = pretrain_codec(&codec, &y, 1e-2, &cfg).unwrap();
        let h_plain = mean_encode_entropy(&plain.codec, &y).unwrap();
        let h_pen = mean_encode_entropy(&penalized.codec, &y).unwrap();
        assert!(h_pen <= h_plain, "entropy {h_pen} should not exceed {h_plain}");
    }
}
