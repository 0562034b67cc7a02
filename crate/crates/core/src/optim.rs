//! Adam and Adadelta.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::array::Array;
use crate::error::{Error, Result};
use crate::math;

/// Optimizer hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
    Adadelta { lr: f64, rho: f64, eps: f64 },
}

impl OptimizerConfig {
    pub const fn adam(lr: f64) -> Self {
        Self::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub const fn adadelta(lr: f64) -> Self {
        Self::Adadelta {
            lr,
            rho: 0.9,
            eps: 1e-6,
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Self::Adam { lr, .. } | Self::Adadelta { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Adam { lr, beta1, beta2, eps } => {
                lr > 0.0 && lr.is_finite() && (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0
            }
            Self::Adadelta { lr, rho, eps } => lr > 0.0 && lr.is_finite() && (0.0..1.0).contains(&rho) && eps > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Optimizer with its per-parameter accumulators.
///
/// For Adam the two slots hold the first and second moment; for Adadelta the
/// running averages of squared gradients and squared updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    pub step: u64,
    slots: Vec<[Vec<f64>; 2]>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step: 0,
            slots: Vec::new(),
        })
    }

    /// Restores an optimizer from saved accumulators.
    pub fn from_parts(config: OptimizerConfig, step: u64, slots: Vec<[Vec<f64>; 2]>) -> Result<Self> {
        config.validate()?;
        if slots.iter().any(|[a, b]| a.len() != b.len()) {
            return Err(Error::Contract("optimizer slot pairs differ in length".into()));
        }
        Ok(Self { config, step, slots })
    }

    /// Accumulators per parameter; empty before the first step.
    pub fn slots(&self) -> &[[Vec<f64>; 2]] {
        &self.slots
    }

    /// Applies one update to every parameter in place.
    pub fn step(&mut self, params: &mut [Array], grads: &[Array]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Contract(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.slots.is_empty() {
            self.slots = params
                .iter()
                .map(|p| [vec![0.0; p.len()], vec![0.0; p.len()]])
                .collect();
        }
        if self.slots.len() != params.len() {
            return Err(Error::Contract(format!(
                "optimizer holds state for {} parameters, got {}",
                self.slots.len(),
                params.len()
            )));
        }
        for (i, ((p, g), slot)) in params.iter().zip(grads).zip(&self.slots).enumerate() {
            if p.shape() != g.shape() || slot[0].len() != p.len() {
                return Err(Error::Shape {
                    op: "optimizer",
                    detail: format!(
                        "parameter {i}: value {:?}, gradient {:?}, state {}",
                        p.shape(),
                        g.shape(),
                        slot[0].len()
                    ),
                });
            }
        }

        self.step += 1;
        match self.config {
            OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1 = 1.0 - math::powi(beta1, t);
                let c2 = 1.0 - math::powi(beta2, t);
                for ((p, g), [m, v]) in params.iter_mut().zip(grads).zip(&mut self.slots) {
                    for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                        *mi = beta1 * *mi + (1.0 - beta1) * gi;
                        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *w -= lr * m_hat / (math::sqrt(v_hat) + eps);
                    }
                }
            }
            OptimizerConfig::Adadelta { lr, rho, eps } => {
                for ((p, g), [sq_grad, sq_delta]) in params.iter_mut().zip(grads).zip(&mut self.slots) {
                    for (((w, &gi), eg), ed) in p.data_mut().iter_mut().zip(g.data()).zip(sq_grad).zip(sq_delta) {
                        *eg = rho * *eg + (1.0 - rho) * gi * gi;
                        let delta = math::sqrt(*ed + eps) / math::sqrt(*eg + eps) * gi;
                        *ed = rho * *ed + (1.0 - rho) * delta * delta;
                        *w -= lr * delta;
                    }
                }
            }
        }
        Ok(())
    }
}
