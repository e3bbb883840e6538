//! Adam, NAdam, and RMSprop with per-parameter moment buffers.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::{ParamId, Parameter};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    NAdam,
    RmsProp,
}

/// Hyperparameters; `beta2` doubles as the RMSprop decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        Self { kind: OptimizerKind::Adam, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn nadam(lr: f64) -> Self {
        Self { kind: OptimizerKind::NAdam, ..Self::adam(lr) }
    }

    pub fn rmsprop(lr: f64) -> Self {
        Self { kind: OptimizerKind::RmsProp, lr, beta1: 0.0, beta2: 0.99, eps: 1e-8 }
    }

    pub fn with_kind(kind: OptimizerKind, lr: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Self::adam(lr),
            OptimizerKind::NAdam => Self::nadam(lr),
            OptimizerKind::RmsProp => Self::rmsprop(lr),
        }
    }
}

#[derive(Debug, Clone)]
struct Moments<S> {
    m: Vec<S>,
    v: Vec<S>,
}

/// Optimizer bound to a fixed set of parameters.
#[derive(Debug, Clone)]
pub struct Optimizer<S = f32> {
    config: OptimizerConfig,
    step: u64,
    state: BTreeMap<ParamId, Moments<S>>,
}

impl<S: Real> Optimizer<S> {
    /// Allocates zeroed moment buffers for every parameter in `params`.
    pub fn new<'a>(config: OptimizerConfig, params: impl IntoIterator<Item = &'a Parameter<S>>) -> Self {
        let state = params
            .into_iter()
            .map(|p| {
                let n = p.value().len();
                (p.id(), Moments { m: vec![S::zero(); n], v: vec![S::zero(); n] })
            })
            .collect();
        Self { config, step: 0, state }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// Applies one update from the accumulated gradients. Gradients are left
    /// in place.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Parameter<S>>) -> Result<()> {
        let params: Vec<&mut Parameter<S>> = params.into_iter().collect();
        for p in &params {
            match self.state.get(&p.id()) {
                None => return Err(Error::UnknownParameter(p.id().index())),
                Some(st) if st.m.len() != p.value().len() => {
                    return Err(Error::ShapeMismatch {
                        op: "optimizer_step",
                        detail: alloc::format!("{} accumulator length", p.name()),
                    })
                }
                _ => {}
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as f64;
        let lr = S::of(c.lr);
        let (b1, b2, eps) = (S::of(c.beta1), S::of(c.beta2), S::of(c.eps));
        let bc1 = S::of(1.0 - libm::pow(c.beta1, t));
        let bc2 = S::of(1.0 - libm::pow(c.beta2, t));
        let one = S::one();

        for p in params {
            let st = self.state.get_mut(&p.id()).expect("checked above");
            let grad = p.grad().data().to_vec();
            let value = p.value_mut();
            for (i, g) in grad.into_iter().enumerate() {
                match c.kind {
                    OptimizerKind::Adam | OptimizerKind::NAdam => {
                        st.m[i] = b1 * st.m[i] + (one - b1) * g;
                        st.v[i] = b2 * st.v[i] + (one - b2) * g * g;
                        let v_hat = st.v[i] / bc2;
                        let m_hat = if c.kind == OptimizerKind::Adam {
                            st.m[i] / bc1
                        } else {
                            // Nesterov look-ahead on the first moment
                            b1 * st.m[i] / bc1 + (one - b1) * g / bc1
                        };
                        value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                    OptimizerKind::RmsProp => {
                        st.v[i] = b2 * st.v[i] + (one - b2) * g * g;
                        value[i] -= lr * g / (st.v[i].sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn scalar_param(v: f64, g: f64) -> Parameter<f64> {
        let mut p = Parameter::new("p", Tensor::new(vec![1], vec![v]).unwrap());
        p.accumulate(&Tensor::new(vec![1], vec![g]).unwrap());
        p
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        for kind in [OptimizerKind::Adam, OptimizerKind::NAdam, OptimizerKind::RmsProp] {
            let mut p = scalar_param(1.5, 0.0);
            let mut opt = Optimizer::new(OptimizerConfig::with_kind(kind, 0.1), [&p]);
            for _ in 0..5 {
                opt.step([&mut p]).unwrap();
            }
            assert_eq!(p.value().item(), 1.5);
            assert_eq!(opt.steps(), 5);
        }
    }

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        let lr = 1e-3;
        for g in [0.37, -2.5, 1e-3] {
            let mut p = scalar_param(0.0, g);
            let mut opt = Optimizer::new(OptimizerConfig::adam(lr), [&p]);
            opt.step([&mut p]).unwrap();
            // m_hat = g, v_hat = g^2
            let expected = -lr * g / (g.abs() + 1e-8);
            assert!((p.value().item() - expected).abs() <= lr * 1e-6);
            assert!((p.value().item() + lr * g.signum()).abs() <= lr * 1e-4);
            assert_eq!(p.grad().item(), g);
        }
    }

    #[test]
    fn unregistered_parameter_is_an_error() {
        let a = scalar_param(0.0, 1.0);
        let mut b = scalar_param(0.0, 1.0);
        let mut opt = Optimizer::new(OptimizerConfig::adam(0.1), [&a]);
        assert!(matches!(opt.step([&mut b]), Err(Error::UnknownParameter(_))));
    }

    #[test]
    fn rmsprop_first_step() {
        let mut p = scalar_param(0.0, 2.0);
        let mut opt = Optimizer::new(OptimizerConfig::rmsprop(0.01), [&p]);
        opt.step([&mut p]).unwrap();
        // v = 0.01 * 4
        let expected = -0.01 * 2.0 / (0.04f64.sqrt() + 1e-8);
        assert!((p.value().item() - expected).abs() < 1e-12);
    }
}
