//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! The tape is define-by-run: each training batch builds a fresh [`Tape`],
//! records primitive applications in topological order, and replays them in
//! reverse to accumulate gradients. Leaves registered with [`Tape::param`]
//! receive gradients; leaves registered with [`Tape::input`] do not.
//!
//! Forward values are produced by the shared kernels in [`crate::tensor`],
//! so a tape forward pass and a pure eval-mode forward pass of the same
//! computation are bit-identical.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{self, Tensor};

/// Clamp floor used inside `x·ln(x)` so that one-hot and softmax-boundary
/// inputs stay finite; gradients use the same floored logarithm.
pub const XLOGX_EPS: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Train/eval switch for stochastic primitives (dropout).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

enum Op {
    Leaf,
    Matmul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Relu(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    Dropout { x: Var, mask: Vec<f64> },
    Mean(Var),
    Sum(Var),
    Mul(Var, Var),
    ScalarMul(Var, f64),
    Square(Var),
    Log(Var),
    XLogX(Var),
}

struct Node {
    op: Op,
    value: Tensor,
    is_param: bool,
}

/// Recorded forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value, is_param: false });
        Var(self.nodes.len() - 1)
    }

    /// Register a constant leaf (no gradient bookkeeping).
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value)
    }

    /// Register a trainable leaf; [`Tape::backward`] reports its gradient.
    pub fn param(&mut self, value: &Tensor) -> Var {
        let v = self.push(Op::Leaf, value.clone());
        self.nodes[v.0].is_param = true;
        v
    }

    /// Value held at `v`.
    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.push(Op::Matmul(a, b), value))
    }

    /// Elementwise addition; also accepts the `[r,c] + [c]` bias broadcast.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.same_shape(tb) {
            let value = tensor::add(ta, tb)?;
            Ok(self.push(Op::Add(a, b), value))
        } else {
            let value = tensor::add_row_broadcast(ta, tb)?;
            Ok(self.push(Op::AddRow(a, b), value))
        }
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = tensor::relu(self.value(x));
        self.push(Op::Relu(x), value)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let value = tensor::softmax_rows(self.value(x))?;
        Ok(self.push(Op::SoftmaxRows(x), value))
    }

    pub fn log_softmax_rows(&mut self, x: Var) -> Result<Var> {
        let value = tensor::log_softmax_rows(self.value(x))?;
        Ok(self.push(Op::LogSoftmaxRows(x), value))
    }

    /// Inverted dropout: in train mode zeroes entries with probability `rate`
    /// and rescales survivors by `1/(1-rate)`; in eval mode it is the
    /// identity (no node is recorded).
    pub fn dropout(&mut self, x: Var, rate: f64, mode: Mode, rng: &mut Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        if mode == Mode::Eval || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - rate;
        let scale = 1.0 / keep;
        let mask: Vec<f64> = (0..self.value(x).numel())
            .map(|_| if rng.uniform() < rate { 0.0 } else { scale })
            .collect();
        let src = self.value(x);
        let data: Vec<f64> = src.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(src.shape().to_vec(), data)?;
        Ok(self.push(Op::Dropout { x, mask }, value))
    }

    /// Mean over all entries (scalar output).
    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let value = Tensor::scalar(t.data().iter().sum::<f64>() / t.numel() as f64);
        self.push(Op::Mean(x), value)
    }

    /// Sum over all entries (scalar output).
    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).data().iter().sum());
        self.push(Op::Sum(x), value)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.same_shape(tb) {
            return Err(Error::shape("mul", format!("{:?} vs {:?}", ta.shape(), tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(Op::Mul(a, b), value))
    }

    pub fn scalar_mul(&mut self, x: Var, c: f64) -> Var {
        let value = self.value(x).map(|v| c * v);
        self.push(Op::ScalarMul(x, c), value)
    }

    pub fn square(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v * v);
        self.push(Op::Square(x), value)
    }

    /// Elementwise natural log; the domain is strictly positive inputs.
    pub fn log(&mut self, x: Var) -> Var {
        let value = self.value(x).map(f64::ln);
        self.push(Op::Log(x), value)
    }

    /// Elementwise `x·ln(max(x, eps))` with `0·log 0 = 0` semantics, the
    /// kernel behind entropy and KL terms.
    pub fn xlogx(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v * v.max(XLOGX_EPS).ln());
        self.push(Op::XLogX(x), value)
    }

    /// Reverse sweep from a scalar root. Returns the gradient of the root
    /// with respect to every registered parameter; parameters the root does
    /// not depend on get zero gradients.
    pub fn backward(&mut self, root: Var) -> Result<Gradients> {
        if !self.value(root).is_scalar() {
            return Err(Error::shape(
                "backward",
                format!("root must be scalar, got {:?}", self.value(root).shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(1.0));

        for id in (0..self.nodes.len()).rev() {
            let Some(g) = grads[id].take() else { continue };
            match &self.nodes[id].op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::Matmul(a, b) => {
                    let (a, b) = (*a, *b);
                    let da = tensor::matmul_a_bt(&g, self.value(b));
                    let db = tensor::matmul_at_b(self.value(a), &g);
                    accumulate(&mut grads, a, da);
                    accumulate(&mut grads, b, db);
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut grads, a, g.clone());
                    accumulate(&mut grads, b, g);
                }
                Op::AddRow(a, b) => {
                    let (a, b) = (*a, *b);
                    let c = g.cols();
                    let mut db = Tensor::zeros(vec![c]);
                    for row in g.data().chunks_exact(c) {
                        for (o, v) in db.data_mut().iter_mut().zip(row) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, a, g);
                    accumulate(&mut grads, b, db);
                }
                Op::Relu(x) => {
                    let x = *x;
                    let dx = zip_map(&g, self.value(x), |gv, xv| if xv > 0.0 { gv } else { 0.0 });
                    accumulate(&mut grads, x, dx);
                }
                Op::SoftmaxRows(x) => {
                    let x = *x;
                    let s = &self.nodes[id].value;
                    let c = s.cols();
                    let mut dx = Tensor::zeros(vec![s.rows(), c]);
                    for ((drow, grow), srow) in dx
                        .data_mut()
                        .chunks_exact_mut(c)
                        .zip(g.data().chunks_exact(c))
                        .zip(s.data().chunks_exact(c))
                    {
                        let dot: f64 = grow.iter().zip(srow).map(|(gv, sv)| gv * sv).sum();
                        for ((d, gv), sv) in drow.iter_mut().zip(grow).zip(srow) {
                            *d = sv * (gv - dot);
                        }
                    }
                    accumulate(&mut grads, x, dx);
                }
                Op::LogSoftmaxRows(x) => {
                    let x = *x;
                    let ls = &self.nodes[id].value;
                    let c = ls.cols();
                    let mut dx = Tensor::zeros(vec![ls.rows(), c]);
                    for ((drow, grow), lrow) in dx
                        .data_mut()
                        .chunks_exact_mut(c)
                        .zip(g.data().chunks_exact(c))
                        .zip(ls.data().chunks_exact(c))
                    {
                        let gsum: f64 = grow.iter().sum();
                        for ((d, gv), lv) in drow.iter_mut().zip(grow).zip(lrow) {
                            *d = gv - lv.exp() * gsum;
                        }
                    }
                    accumulate(&mut grads, x, dx);
                }
                Op::Dropout { x, mask } => {
                    let x = *x;
                    let data: Vec<f64> =
                        g.data().iter().zip(mask).map(|(gv, m)| gv * m).collect();
                    let dx = Tensor::new(g.shape().to_vec(), data)?;
                    accumulate(&mut grads, x, dx);
                }
                Op::Mean(x) => {
                    let x = *x;
                    let n = self.value(x).numel() as f64;
                    let gv = g.item() / n;
                    let dx = self.value(x).map(|_| gv);
                    accumulate(&mut grads, x, dx);
                }
                Op::Sum(x) => {
                    let x = *x;
                    let gv = g.item();
                    let dx = self.value(x).map(|_| gv);
                    accumulate(&mut grads, x, dx);
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let da = zip_map(&g, self.value(b), |gv, bv| gv * bv);
                    let db = zip_map(&g, self.value(a), |gv, av| gv * av);
                    accumulate(&mut grads, a, da);
                    accumulate(&mut grads, b, db);
                }
                Op::ScalarMul(x, c) => {
                    let (x, c) = (*x, *c);
                    accumulate(&mut grads, x, g.map(|gv| c * gv));
                }
                Op::Square(x) => {
                    let x = *x;
                    let dx = zip_map(&g, self.value(x), |gv, xv| 2.0 * xv * gv);
                    accumulate(&mut grads, x, dx);
                }
                Op::Log(x) => {
                    let x = *x;
                    let dx = zip_map(&g, self.value(x), |gv, xv| gv / xv);
                    accumulate(&mut grads, x, dx);
                }
                Op::XLogX(x) => {
                    let x = *x;
                    let dx = zip_map(&g, self.value(x), |gv, xv| {
                        gv * (xv.max(XLOGX_EPS).ln() + 1.0)
                    });
                    accumulate(&mut grads, x, dx);
                }
            }
        }

        let params: Vec<(usize, Vec<usize>)> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_param)
            .map(|(i, n)| (i, n.value.shape().to_vec()))
            .collect();
        let mut by_id = vec![None; self.nodes.len()];
        for (i, shape) in params {
            by_id[i] = Some(match grads[i].take() {
                Some(g) => g,
                None => Tensor::zeros(shape),
            });
        }
        Ok(Gradients { by_id })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, n) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += n;
            }
        }
        slot => *slot = Some(g),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    debug_assert!(a.same_shape(b));
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("shapes already agree")
}

/// Gradient map produced by [`Tape::backward`].
pub struct Gradients {
    by_id: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a parameter leaf; `None` for non-parameters.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.by_id.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradients for a list of parameter leaves, in order.
    pub fn collect(mut self, params: &[Var]) -> Result<Vec<Tensor>> {
        params
            .iter()
            .map(|v| {
                self.by_id
                    .get_mut(v.0)
                    .and_then(Option::take)
                    .ok_or_else(|| Error::InvalidArgument("not a parameter leaf".into()))
            })
            .collect()
    }
}

// ── gradient checking ────────────────────────────────────────────────

/// Outcome of [`grad_check`]: the worst coordinate over all parameters.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub worst_coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tol
    }
}

/// Compare [`Tape::backward`] against central finite differences, coordinate
/// by coordinate. `f` must rebuild the same scalar computation on every call
/// (dropout in train mode needs a fixed mask or a reseeded stream); this is
/// verified by evaluating twice and demanding bit-equal roots.
///
/// Relative error uses the denominator `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(f: &F, params: &[Tensor], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if h <= 0.0 {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }

    let eval = |params: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.param(p)).collect();
        let root = f(&mut tape, &vars)?;
        if !tape.value(root).is_scalar() {
            return Err(Error::shape("grad_check", "objective must be scalar"));
        }
        Ok(tape.value(root).item())
    };

    let v1 = eval(params)?;
    let v2 = eval(params)?;
    if v1.to_bits() != v2.to_bits() {
        return Err(Error::InvalidArgument(
            "objective is not deterministic across evaluations; \
             fix the dropout mask (or rng seed) before gradient checking"
                .into(),
        ));
    }

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p)).collect();
    let root = f(&mut tape, &vars)?;
    let analytic = tape.backward(root)?.collect(&vars)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: 0,
        worst_coord: 0,
        analytic: 0.0,
        numeric: 0.0,
        tol,
    };
    let mut work: Vec<Tensor> = params.to_vec();
    for (pi, grad) in analytic.iter().enumerate() {
        for ci in 0..grad.numel() {
            let orig = work[pi].data()[ci];
            work[pi].data_mut()[ci] = orig + h;
            let plus = eval(&work)?;
            work[pi].data_mut()[ci] = orig - h;
            let minus = eval(&work)?;
            work[pi].data_mut()[ci] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let a = grad.data()[ci];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            let rel = (a - numeric).abs() / denom;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_param = pi;
                report.worst_coord = ci;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
