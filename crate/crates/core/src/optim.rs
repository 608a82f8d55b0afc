//! Adam and the piecewise-exponential learning-rate schedule.

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelConfig, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.99, beta2: 0.999, eps: 1e-3 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let open = |b: f64| b > 0.0 && b < 1.0;
        if !open(self.beta1) || !open(self.beta2) || !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "adam needs 0 < beta1, beta2 < 1 and eps > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// First and second moments, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first: ModelParams,
    pub second: ModelParams,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        Ok(Self { first: ModelParams::zeros(cfg)?, second: ModelParams::zeros(cfg)?, step: 0 })
    }
}

/// One bias-corrected Adam update over a flat slice. `step` is the
/// already-incremented step count.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    first: &mut [f64],
    second: &mut [f64],
    step: u64,
    lr: f64,
    cfg: &AdamConfig,
) {
    let c1 = 1.0 - libm::pow(cfg.beta1, step as f64);
    let c2 = 1.0 - libm::pow(cfg.beta2, step as f64);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(first.iter_mut()).zip(second.iter_mut()) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (libm::sqrt(v_hat) + cfg.eps);
    }
}

/// Adam step over every tensor. Fails before touching anything if a
/// gradient is non-finite, naming the offending parameter.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut OptimizerState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.first) || !params.same_shape(&state.second) {
        return Err(Error::ShapeMismatch("gradients or optimizer state do not match parameters".into()));
    }
    for (name, t) in grads.tensors() {
        if let Some(i) = t.iter().position(|g| !g.is_finite()) {
            let path: String = format!("{name}[{i}]");
            return Err(Error::NonFinite(path));
        }
    }
    state.step += 1;
    let step = state.step;
    let gs = grads.tensors();
    let ps = params.tensors_mut();
    let ms = state.first.tensors_mut();
    let vs = state.second.tensors_mut();
    for (((p, (_, g)), m), v) in ps.into_iter().zip(gs).zip(ms).zip(vs) {
        adam_update(p, g, m, v, step, lr, cfg);
    }
    Ok(())
}

/// Constant `base_lr` up to `breakpoint`, then
/// `base_lr · 10^(-3 (t - breakpoint) / breakpoint)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub breakpoint: usize,
    pub epochs: usize,
}

impl LrSchedule {
    /// `t` is a 1-based epoch index in `1..=epochs`.
    pub fn lr_at(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.epochs {
            return Err(Error::OutOfRange(format!("epoch {t} outside 1..={}", self.epochs)));
        }
        if t <= self.breakpoint {
            return Ok(self.base_lr);
        }
        let exponent = -3.0 * (t - self.breakpoint) as f64 / self.breakpoint as f64;
        Ok(self.base_lr * libm::pow(10.0, exponent))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_schedule() -> LrSchedule {
        LrSchedule { base_lr: 2e-4, breakpoint: 150, epochs: 300 }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs()
    }

    #[test]
    fn lr_examples() {
        let s = paper_schedule();
        assert_eq!(s.lr_at(150).unwrap(), 2e-4);
        assert!(close(s.lr_at(300).unwrap(), 2e-7));
        assert!(close(s.lr_at(225).unwrap(), 2e-4 * libm::pow(10.0, -1.5)));
        assert!((s.lr_at(225).unwrap() - 6.325e-6).abs() < 1e-9);
        assert!(s.lr_at(0).is_err());
        assert!(s.lr_at(301).is_err());
    }

    #[test]
    fn lr_constant_then_decreasing() {
        let s = paper_schedule();
        for t in 2..=150 {
            assert_eq!(s.lr_at(t).unwrap(), s.lr_at(t - 1).unwrap());
        }
        for t in 151..=300 {
            assert!(s.lr_at(t).unwrap() < s.lr_at(t - 1).unwrap());
        }
        // Continuity: the first decayed step is one 1/150 decade below base.
        assert!(close(s.lr_at(151).unwrap(), 2e-4 * libm::pow(10.0, -3.0 / 150.0)));
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let cfg = ModelConfig { hidden_dims: alloc::vec![3, 3], d_emb: 2, stages: 1, ..ModelConfig::new(2) };
        let mut params = crate::model::init_params(&cfg, &mut crate::RandomSource::new(1)).unwrap();
        let before = params.clone();
        let mut state = OptimizerState::new(&cfg).unwrap();
        let zeros = ModelParams::zeros(&cfg).unwrap();
        adam_step(&mut params, &zeros, &mut state, 1e-2, &AdamConfig::default()).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let cfg = ModelConfig { hidden_dims: alloc::vec![3, 3], d_emb: 2, stages: 1, ..ModelConfig::new(2) };
        let mut params = ModelParams::zeros(&cfg).unwrap();
        let mut grads = ModelParams::zeros(&cfg).unwrap();
        grads.base.bias[1] = f64::NAN;
        let mut state = OptimizerState::new(&cfg).unwrap();
        let err = adam_step(&mut params, &grads, &mut state, 1e-2, &AdamConfig::default()).unwrap_err();
        assert_eq!(err, Error::NonFinite("base.bias[1]".into()));
        assert_eq!(state.step, 0);
    }
}
