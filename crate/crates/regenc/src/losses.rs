//! Scalar training objectives, built as tape expressions.
//!
//! All reductions are batch means, so loss-weight settings are independent of
//! batch size. KL and cross-entropy consume *log*-probabilities (from
//! [`crate::tape::Tape::log_softmax_rows`]) rather than probabilities; that
//! is the numerical-stability contract for the classifier side. The encoded
//! target side enters as probabilities and its `p·log p` terms use the
//! clamped kernel of [`crate::tape::Tape::xlogx`], so one-hot rows are valid
//! input (`0·log 0 = 0`).

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};

/// Weights selecting a point on the composite objective family.
///
/// `alpha` is the entropy coefficient inside the autoencoding term. It is
/// signed: positive values penalize encoder entropy (the default reading),
/// negative values reward it.
#[derive(Copy, Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub lambda_auto: f64,
    pub lambda_kl: f64,
    pub lambda_pred: f64,
    pub alpha: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_auto < 0.0 || self.lambda_kl < 0.0 || self.lambda_pred < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "loss weights must be nonnegative: {self:?}"
            )));
        }
        if self.lambda_auto == 0.0 && self.lambda_kl == 0.0 && self.lambda_pred == 0.0 {
            return Err(Error::InvalidArgument(
                "at least one loss weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for LossWeights {
    /// Joint-training defaults: prediction and autoencoding at weight 1, the
    /// KL weight meant to be selected by sweep, and a very small entropy
    /// penalty.
    fn default() -> Self {
        LossWeights { lambda_auto: 1.0, lambda_kl: 1.0, lambda_pred: 1.0, alpha: 1e-6 }
    }
}

/// Check that every row of `p` is a probability vector: entries nonnegative
/// and row sums within `tol` of 1.
pub fn validate_simplex_rows(tape: &Tape, p: Var, tol: f64) -> Result<()> {
    let t = tape.value(p);
    if !t.is_matrix() {
        return Err(Error::shape("simplex", format!("expected matrix, got {:?}", t.shape())));
    }
    let c = t.cols();
    for (r, row) in t.data().chunks_exact(c).enumerate() {
        let mut sum = 0.0;
        for (i, &v) in row.iter().enumerate() {
            if v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "row {r} entry {i} is negative ({v}), not a probability"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "row {r} sums to {sum}, off the simplex by more than {tol}"
            )));
        }
    }
    Ok(())
}

/// Batch mean of `||y_b - z_b||^2`.
pub fn squared_error(tape: &mut Tape, y: Var, z: Var) -> Result<Var> {
    let (ty, tz) = (tape.value(y), tape.value(z));
    if !ty.same_shape(tz) {
        return Err(Error::shape(
            "squared_error",
            format!("{:?} vs {:?}", ty.shape(), tz.shape()),
        ));
    }
    let batch = ty.shape()[0];
    let neg_z = tape.scalar_mul(z, -1.0);
    let diff = tape.add(y, neg_z)?;
    let sq = tape.square(diff);
    let total = tape.sum(sq);
    Ok(tape.scalar_mul(total, 1.0 / batch as f64))
}

/// Batch mean of `sum_i p_i (log p_i - log q_i)` with `0·log 0 = 0`.
pub fn kl_div(tape: &mut Tape, p: Var, log_q: Var) -> Result<Var> {
    check_dist_shapes("kl_div", tape, p, log_q)?;
    validate_simplex_rows(tape, p, 1e-6)?;
    let batch = tape.value(p).shape()[0];
    let plogp = tape.xlogx(p);
    let plogq = tape.mul(p, log_q)?;
    let neg = tape.scalar_mul(plogq, -1.0);
    let diff = tape.add(plogp, neg)?;
    let total = tape.sum(diff);
    Ok(tape.scalar_mul(total, 1.0 / batch as f64))
}

/// Batch mean of `-sum_i p_i log q_i`; equals `kl_div + entropy(p)`.
pub fn cross_entropy(tape: &mut Tape, p: Var, log_q: Var) -> Result<Var> {
    check_dist_shapes("cross_entropy", tape, p, log_q)?;
    validate_simplex_rows(tape, p, 1e-6)?;
    let batch = tape.value(p).shape()[0];
    let plogq = tape.mul(p, log_q)?;
    let total = tape.sum(plogq);
    Ok(tape.scalar_mul(total, -1.0 / batch as f64))
}

/// Batch mean of `-sum_i p_i log p_i`, in `[0, ln k]`.
pub fn entropy(tape: &mut Tape, p: Var) -> Result<Var> {
    validate_simplex_rows(tape, p, 1e-6)?;
    let batch = tape.value(p).shape()[0];
    let plogp = tape.xlogx(p);
    let total = tape.sum(plogp);
    Ok(tape.scalar_mul(total, -1.0 / batch as f64))
}

fn check_dist_shapes(op: &'static str, tape: &Tape, p: Var, log_q: Var) -> Result<()> {
    let (tp, tq) = (tape.value(p), tape.value(log_q));
    if !tp.is_matrix() || !tp.same_shape(tq) {
        return Err(Error::shape(op, format!("{:?} vs {:?}", tp.shape(), tq.shape())));
    }
    Ok(())
}

/// Reconstruction term `mean ||y - psi @ mu||^2 + alpha * entropy(psi)`.
///
/// Shared by standalone encoder pretraining and the composite objective so
/// the two build identical tape expressions.
pub fn autoencoding_objective(
    tape: &mut Tape,
    y: Var,
    psi: Var,
    mu: Var,
    alpha: f64,
) -> Result<Var> {
    let decoded = tape.matmul(psi, mu)?;
    let rec = squared_error(tape, y, decoded)?;
    if alpha == 0.0 {
        return Ok(rec);
    }
    let ent = entropy(tape, psi)?;
    let scaled = tape.scalar_mul(ent, alpha);
    tape.add(rec, scaled)
}

/// Decoded prediction term `mean ||y - pi @ mu||^2`.
///
/// Shared by the least-squares-with-softmax method and the composite
/// objective.
pub fn prediction_objective(tape: &mut Tape, y: Var, pi: Var, mu: Var) -> Result<Var> {
    let decoded = tape.matmul(pi, mu)?;
    squared_error(tape, y, decoded)
}

/// Operands of [`composite_objective`], all recorded on one tape.
#[derive(Copy, Clone)]
pub struct CompositeParts {
    /// Targets `[batch, m]`.
    pub y: Var,
    /// Encoded targets `[batch, k]`.
    pub psi: Var,
    /// Classifier log-probabilities `[batch, k]`.
    pub log_pi: Var,
    /// Decoder matrix `[k, m]`.
    pub mu: Var,
    /// Classifier probabilities `[batch, k]`.
    pub pi: Var,
}

/// Weighted sum
/// `λ_auto·[mean||y - psi@mu||² + α·H(psi)] + λ_kl·KL(psi‖pi) + λ_pred·mean||y - pi@mu||²`.
///
/// Terms with zero weight are not built, and unit weights skip the final
/// scale, so degenerate weight settings reproduce the dedicated
/// single-objective methods operation for operation.
pub fn composite_objective(
    tape: &mut Tape,
    weights: &LossWeights,
    parts: CompositeParts,
) -> Result<Var> {
    weights.validate()?;
    let mut acc: Option<Var> = None;
    let push = |tape: &mut Tape, acc: &mut Option<Var>, term: Var, w: f64| -> Result<()> {
        let scaled = if w == 1.0 { term } else { tape.scalar_mul(term, w) };
        *acc = Some(match *acc {
            None => scaled,
            Some(prev) => tape.add(prev, scaled)?,
        });
        Ok(())
    };

    if weights.lambda_auto > 0.0 {
        let term = autoencoding_objective(tape, parts.y, parts.psi, parts.mu, weights.alpha)?;
        push(tape, &mut acc, term, weights.lambda_auto)?;
    }
    if weights.lambda_kl > 0.0 {
        let term = kl_div(tape, parts.psi, parts.log_pi)?;
        push(tape, &mut acc, term, weights.lambda_kl)?;
    }
    if weights.lambda_pred > 0.0 {
        let term = prediction_objective(tape, parts.y, parts.pi, parts.mu)?;
        push(tape, &mut acc, term, weights.lambda_pred)?;
    }
    Ok(acc.expect("validate() guarantees at least one active term"))
}
