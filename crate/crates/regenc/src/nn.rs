//! Multilayer perceptrons: direct regressors (`output_dim = m`) or
//! classifier logits (`output_dim = k`). Hidden layers are affine → ReLU →
//! dropout; the output layer is affine with no nonlinearity.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tape::{Mode, Tape, Var};
use crate::tensor::{self, Tensor};
use serde::{Deserialize, Serialize};

/// Architecture of an MLP. Defaults mirror the tabular setup: two hidden
/// layers of width 128 with dropout 0.3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub dropout_rate: f64,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Self {
        MlpSpec { input_dim, hidden_dims, output_dim, dropout_rate: 0.3 }
    }

    /// Default tabular architecture for the given in/out dims.
    pub fn tabular(input_dim: usize, output_dim: usize) -> Self {
        MlpSpec::new(input_dim, vec![128, 128], output_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "MLP dims must be positive: {self:?}"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Layer dimensions as (fan_in, fan_out) pairs.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// An MLP's parameters: `[w0, b0, w1, b1, ...]` with `w` of shape
/// `[fan_in, fan_out]` and `b` of shape `[fan_out]`.
#[derive(Clone, Debug)]
pub struct MlpModel {
    pub spec: MlpSpec,
    pub params: Vec<Tensor>,
}

impl MlpModel {
    /// Initialize weights from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` and
    /// biases at zero. Deterministic given the rng stream.
    pub fn init(spec: &MlpSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let mut params = Vec::new();
        for (fan_in, fan_out) in spec.layer_dims() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = Tensor::new(
                vec![fan_in, fan_out],
                (0..fan_in * fan_out).map(|_| rng.uniform_in(-bound, bound)).collect(),
            )?;
            params.push(w);
            params.push(Tensor::zeros(vec![fan_out]));
        }
        Ok(MlpModel { spec: spec.clone(), params })
    }

    /// Parameter names aligned with `params` order.
    pub fn param_names(&self) -> Vec<String> {
        (0..self.params.len() / 2)
            .flat_map(|l| [format!("mlp.w{l}"), format!("mlp.b{l}")])
            .collect()
    }

    /// Register all parameters on a tape, in order.
    pub fn register(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|p| tape.param(p)).collect()
    }

    /// Forward pass on a tape; `vars` must come from [`MlpModel::register`]
    /// (or hold the same shapes). Returns pre-activation outputs (logits).
    pub fn forward(
        spec: &MlpSpec,
        tape: &mut Tape,
        vars: &[Var],
        x: Var,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<Var> {
        let layers = spec.hidden_dims.len() + 1;
        if vars.len() != 2 * layers {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameter vars, got {}",
                2 * layers,
                vars.len()
            )));
        }
        if tape.value(x).shape().get(1) != Some(&spec.input_dim) {
            return Err(Error::shape(
                "mlp_forward",
                format!("input {:?} vs input_dim {}", tape.value(x).shape(), spec.input_dim),
            ));
        }
        let mut h = x;
        for l in 0..layers {
            let wx = tape.matmul(h, vars[2 * l])?;
            h = tape.add(wx, vars[2 * l + 1])?;
            if l + 1 < layers {
                h = tape.relu(h);
                h = tape.dropout(h, spec.dropout_rate, mode, rng)?;
            }
        }
        Ok(h)
    }

    /// Deterministic eval-mode forward pass (pure function of params and x;
    /// dropout is the identity). Uses the same kernels as the tape path.
    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        if x.shape().get(1) != Some(&self.spec.input_dim) {
            return Err(Error::shape(
                "mlp_forward",
                format!("input {:?} vs input_dim {}", x.shape(), self.spec.input_dim),
            ));
        }
        let layers = self.spec.hidden_dims.len() + 1;
        let mut h = x.clone();
        for l in 0..layers {
            let wx = tensor::matmul(&h, &self.params[2 * l])?;
            h = tensor::add_row_broadcast(&wx, &self.params[2 * l + 1])?;
            if l + 1 < layers {
                h = tensor::relu(&h);
            }
        }
        Ok(h)
    }
}
