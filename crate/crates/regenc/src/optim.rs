//! Adam with coupled L2 weight decay, global gradient-norm clipping, and
//! learning-rate schedules.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Schedule {
    Constant,
    Cosine,
}

/// Training hyperparameters shared by every method.
///
/// `weight_decay_model` applies to MLP parameters, `weight_decay_codec` to
/// encoder/decoder parameters; both default to 1e-4. `grad_clip` is the
/// global L2 norm bound (default 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay_model: f64,
    pub weight_decay_codec: f64,
    pub grad_clip: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: Schedule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_lr: 1e-3,
            epochs: 200,
            batch_size: 256,
            weight_decay_model: 1e-4,
            weight_decay_codec: 1e-4,
            grad_clip: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            schedule: Schedule::Cosine,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_lr < 0.0
            || self.epochs == 0
            || self.batch_size == 0
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.eps <= 0.0
            || self.grad_clip <= 0.0
        {
            return Err(Error::InvalidArgument(format!("invalid train config: {self:?}")));
        }
        Ok(())
    }
}

/// Per-parameter Adam moments plus the step counter.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect(),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// Scale all gradients by `max_norm / norm` when the global L2 norm exceeds
/// `max_norm`. Returns the pre-clip norm.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> Result<f64> {
    if max_norm <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "max_norm must be positive, got {max_norm}"
        )));
    }
    let norm = grads.iter().map(Tensor::sq_norm).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
    }
    Ok(norm)
}

/// One Adam update: `g <- g + wd*theta` (coupled L2), then the standard
/// bias-corrected step `theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)`.
///
/// `weight_decay[i]` applies to `params[i]`; pass per-group values.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [Tensor],
    grads: &[Tensor],
    weight_decay: &[f64],
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != weight_decay.len() {
        return Err(Error::InvalidArgument(format!(
            "parameter/gradient/decay count mismatch: {} vs {} vs {}",
            params.len(),
            grads.len(),
            weight_decay.len()
        )));
    }
    if lr < 0.0 {
        return Err(Error::InvalidArgument(format!("learning rate must be >= 0, got {lr}")));
    }
    for (i, g) in grads.iter().enumerate() {
        if g.data().iter().any(|v| v.is_nan()) {
            return Err(Error::Training(format!(
                "NaN gradient for parameter #{i} (shape {:?})",
                g.shape()
            )));
        }
        if !g.same_shape(&params[i]) {
            return Err(Error::shape(
                "adam_step",
                format!("grad {:?} vs param {:?}", g.shape(), params[i].shape()),
            ));
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        let wd = weight_decay[i];
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for ((pv, &gv), (mv, vv)) in
            p.data_mut().iter_mut().zip(grads[i].data()).zip(m.iter_mut().zip(v.iter_mut()))
        {
            let g = gv + wd * *pv;
            *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * g;
            *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * g * g;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *pv -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Learning rate at `step` of `total_steps`: constant, or cosine decay
/// `max_lr * 0.5 * (1 + cos(pi * step / total_steps))`.
pub fn lr_at(cfg: &TrainConfig, step: usize, total_steps: usize) -> Result<f64> {
    if step >= total_steps {
        return Err(Error::InvalidArgument(format!(
            "step {step} out of range for {total_steps} total steps"
        )));
    }
    Ok(match cfg.schedule {
        Schedule::Constant => cfg.max_lr,
        Schedule::Cosine => {
            cfg.max_lr * 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / total_steps as f64).cos())
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::scalar(v)
    }

    #[test]
    fn clip_examples() {
        let mut grads = vec![Tensor::new(vec![2], vec![3.0, 4.0]).unwrap()];
        let norm = clip_grad_norm(&mut grads, 1.0).unwrap();
        assert!((norm - 5.0).abs() < 1e-15);
        assert!((grads[0].data()[0] - 0.6).abs() < 1e-12);
        assert!((grads[0].data()[1] - 0.8).abs() < 1e-12);

        let mut grads = vec![Tensor::new(vec![2], vec![0.3, 0.4]).unwrap()];
        clip_grad_norm(&mut grads, 1.0).unwrap();
        assert_eq!(grads[0].data(), &[0.3, 0.4]);
    }

    #[test]
    fn clip_postnorm_is_min_of_norm_and_max() {
        let mut rng = crate::rng::Rng::from_seed(13);
        for _ in 0..100 {
            let n = 1 + rng.index(20);
            let mut grads =
                vec![Tensor::new(vec![n], (0..n).map(|_| rng.normal() * 3.0).collect()).unwrap()];
            let max_norm = 0.1 + rng.uniform() * 5.0;
            let pre = grads.iter().map(Tensor::sq_norm).sum::<f64>().sqrt();
            clip_grad_norm(&mut grads, max_norm).unwrap();
            let post = grads.iter().map(Tensor::sq_norm).sum::<f64>().sqrt();
            assert!((post - pre.min(max_norm)).abs() < 1e-12 * pre.max(1.0));
        }
    }

    #[test]
    fn adam_first_step_example() {
        // Oracle (30-digit arithmetic): theta after one step = -0.0999999995.
        let cfg = TrainConfig { max_lr: 0.1, ..TrainConfig::default() };
        let mut state = AdamState::new(&[scalar(0.0)]);
        let mut params = vec![scalar(0.0)];
        adam_step(&mut state, &mut params, &[scalar(2.0)], &[0.0], 0.1, &cfg).unwrap();
        assert!((params[0].item() - (-0.0999999995)).abs() < 1e-15);
    }

    #[test]
    fn zero_lr_leaves_params_but_updates_moments() {
        let cfg = TrainConfig::default();
        let mut state = AdamState::new(&[scalar(1.5)]);
        let mut params = vec![scalar(1.5)];
        adam_step(&mut state, &mut params, &[scalar(2.0)], &[0.0], 0.0, &cfg).unwrap();
        assert_eq!(params[0].item(), 1.5);
        assert!(state.m[0].item() != 0.0);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn constant_gradient_step_magnitude_approaches_lr() {
        // With g constant, m_hat -> g and v_hat -> g^2, so the displacement
        // per step tends to lr.
        let cfg = TrainConfig::default();
        let mut state = AdamState::new(&[scalar(0.0)]);
        let mut params = vec![scalar(0.0)];
        let lr = 0.05;
        let mut prev = 0.0;
        let mut last_step = 0.0;
        for _ in 0..500 {
            adam_step(&mut state, &mut params, &[scalar(2.0)], &[0.0], lr, &cfg).unwrap();
            last_step = (params[0].item() - prev).abs();
            prev = params[0].item();
        }
        assert!((last_step - lr).abs() < 1e-6, "step {last_step} vs lr {lr}");
    }

    #[test]
    fn nan_gradient_is_reported_with_parameter() {
        let cfg = TrainConfig::default();
        let mut state = AdamState::new(&[scalar(0.0), scalar(0.0)]);
        let mut params = vec![scalar(0.0), scalar(0.0)];
        let grads = vec![scalar(1.0), scalar(f64::NAN)];
        let err = adam_step(&mut state, &mut params, &grads, &[0.0, 0.0], 0.1, &cfg).unwrap_err();
        assert!(err.to_string().contains("#1"), "{err}");
    }

    #[test]
    fn quadratic_converges_to_minimizer() {
        // d/dx of (x - 3)^2 is 2(x - 3); Adam at lr 0.01 reaches the
        // minimizer within 1e-3 in at most 2000 steps.
        let cfg = TrainConfig::default();
        let mut state = AdamState::new(&[scalar(0.0)]);
        let mut params = vec![scalar(0.0)];
        for _ in 0..2000 {
            let g = 2.0 * (params[0].item() - 3.0);
            adam_step(&mut state, &mut params, &[scalar(g)], &[0.0], 0.01, &cfg).unwrap();
        }
        assert!((params[0].item() - 3.0).abs() < 1e-3, "x = {}", params[0].item());
    }

    #[test]
    fn coupled_decay_shrinks_norm_monotonically() {
        let cfg = TrainConfig::default();
        let mut state = AdamState::new(&[scalar(2.0)]);
        let mut params = vec![scalar(2.0)];
        let mut prev = params[0].item().abs();
        for _ in 0..100 {
            adam_step(&mut state, &mut params, &[scalar(0.0)], &[1e-2], 0.01, &cfg).unwrap();
            let now = params[0].item().abs();
            assert!(now < prev, "norm should shrink: {now} vs {prev}");
            prev = now;
        }
    }

    #[test]
    fn lr_schedule_examples() {
        let cosine = TrainConfig { max_lr: 0.4, schedule: Schedule::Cosine, ..Default::default() };
        assert_eq!(lr_at(&cosine, 0, 100).unwrap(), 0.4);
        assert!((lr_at(&cosine, 50, 100).unwrap() - 0.2).abs() < 1e-15);
        let constant =
            TrainConfig { max_lr: 0.4, schedule: Schedule::Constant, ..Default::default() };
        for s in 0..10 {
            assert_eq!(lr_at(&constant, s, 10).unwrap(), 0.4);
        }
        assert!(lr_at(&cosine, 100, 100).is_err());
    }
}
