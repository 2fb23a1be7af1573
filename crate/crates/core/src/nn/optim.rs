use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Learning rate, moment accumulators and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub lr: f64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    beta1: f64,
    beta2: f64,
    eps: f64,
    clip_norm: Option<f64>,
    state: OptimizerState,
}

impl Optimizer {
    pub fn sgd(lr: f64) -> Self {
        Self::new(OptimizerKind::Sgd, lr)
    }

    pub fn adam(lr: f64) -> Self {
        Self::new(OptimizerKind::Adam, lr)
    }

    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: None,
            state: OptimizerState {
                lr,
                first_moment: Vec::new(),
                second_moment: Vec::new(),
                step: 0,
            },
        }
    }

    /// Rescale gradients whose global norm exceeds `max_norm`.
    pub fn with_clip_norm(mut self, max_norm: f64) -> Self {
        self.clip_norm = Some(max_norm);
        self
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn lr(&self) -> f64 {
        self.state.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.state.lr = lr;
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn steps(&self) -> u64 {
        self.state.step
    }

    fn ensure_moments(&mut self, params: &ParamSet) -> Result<()> {
        if self.state.first_moment.is_empty() && self.state.step == 0 {
            self.state.first_moment = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.state.second_moment = self.state.first_moment.clone();
            return Ok(());
        }
        crate::error::check_len(
            "optimizer moments",
            self.state.first_moment.len(),
            params.len(),
        )?;
        for (m, p) in self.state.first_moment.iter().zip(params.iter()) {
            crate::error::check_len("optimizer moment shape", m.len(), p.len())?;
        }
        Ok(())
    }

    /// Applies one update from the gradients stored in `params`.
    ///
    /// Non-finite gradients leave parameters, moments and the step counter untouched.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        let norm = params.grad_norm();
        if !norm.is_finite() {
            return Err(Error::PoisonedUpdate("gradient"));
        }
        let scale = match self.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        let lr = self.state.lr;
        match self.kind {
            OptimizerKind::Sgd => {
                for p in params.iter_mut() {
                    for (v, g) in p.value.iter_mut().zip(&p.grad) {
                        *v -= lr * scale * g;
                    }
                }
            }
            OptimizerKind::Adam => {
                self.ensure_moments(params)?;
                let t = (self.state.step + 1) as i32;
                let bc1 = 1.0 - self.beta1.powi(t);
                let bc2 = 1.0 - self.beta2.powi(t);
                let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
                for ((p, m), s) in params
                    .iter_mut()
                    .zip(&mut self.state.first_moment)
                    .zip(&mut self.state.second_moment)
                {
                    for i in 0..p.value.len() {
                        let g = scale * p.grad[i];
                        m[i] = b1 * m[i] + (1.0 - b1) * g;
                        s[i] = b2 * s[i] + (1.0 - b2) * g * g;
                        let m_hat = m[i] / bc1;
                        let s_hat = s[i] / bc2;
                        p.value[i] -= lr * m_hat / (s_hat.sqrt() + eps);
                    }
                }
            }
        }
        self.state.step += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64, g: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        let id = ps.add("w", &[1], vec![v]).unwrap();
        ps.get_mut(id).grad[0] = g;
        ps
    }

    #[test]
    fn sgd_single_step() {
        let mut ps = scalar(0.0, 1.0);
        let mut opt = Optimizer::sgd(0.1);
        opt.step(&mut ps).unwrap();
        assert_eq!(ps.flat_values(), vec![-0.1]);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        for mut opt in [Optimizer::sgd(0.3), Optimizer::adam(0.3)] {
            let mut ps = scalar(1.25, 0.0);
            for _ in 0..5 {
                opt.step(&mut ps).unwrap();
            }
            assert_eq!(ps.flat_values(), vec![1.25]);
        }
    }

    #[test]
    fn adam_step_magnitude_tends_to_lr_under_constant_gradient() {
        // With g constant, m̂ → g and v̂ → g², so each step → lr·g/(|g| + eps).
        let lr = 0.01;
        let g = 3.0;
        let mut ps = scalar(0.0, g);
        let mut opt = Optimizer::adam(lr);
        let mut prev = 0.0;
        let mut last_step = 0.0;
        for _ in 0..500 {
            opt.step(&mut ps).unwrap();
            let v = ps.flat_values()[0];
            last_step = prev - v;
            prev = v;
        }
        let limit = lr * g / (g + 1e-8);
        assert!((last_step - limit).abs() < 1e-9, "{last_step} vs {limit}");
    }

    #[test]
    fn non_finite_gradient_is_skipped() {
        let mut ps = scalar(2.0, f64::NAN);
        let mut opt = Optimizer::adam(0.1);
        assert!(matches!(opt.step(&mut ps), Err(Error::PoisonedUpdate(_))));
        assert_eq!(opt.steps(), 0);
        ps.get_mut(crate::nn::ParamId(0)).grad[0] = 0.0;
        assert_eq!(ps.flat_values(), vec![2.0]);
    }

    #[test]
    fn global_norm_clip_rescales() {
        let mut ps = ParamSet::new();
        let id = ps.add("w", &[2], vec![0.0, 0.0]).unwrap();
        ps.get_mut(id).grad.copy_from_slice(&[30.0, 40.0]);
        let mut opt = Optimizer::sgd(1.0).with_clip_norm(5.0);
        opt.step(&mut ps).unwrap();
        assert_eq!(ps.flat_values(), vec![-3.0, -4.0]);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut ps = ParamSet::new();
            let id = ps.add("w", &[3], vec![0.1, -0.2, 0.3]).unwrap();
            let mut opt = Optimizer::adam(0.05).with_clip_norm(5.0);
            for k in 0..50 {
                let vals = ps.value(id).to_vec();
                let g = &mut ps.get_mut(id).grad;
                for (gi, v) in g.iter_mut().zip(vals) {
                    *gi = (v * 3.0 + k as f64 * 0.01).sin();
                }
                opt.step(&mut ps).unwrap();
            }
            ps.flat_values()
        };
        assert_eq!(run(), run());
    }
}
