//! Mini-batch training and evaluation.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::array::Array;
use crate::data::{Dataset, Normalization};
use crate::error::{Error, Result};
use crate::model::{classify, Architecture, ModelSpec, ModelState};
use crate::optim::{Optimizer, OptimizerConfig};
use crate::rng;
use crate::tape::Mode;

const ORDER_STREAM: u64 = 0x0de5;
const DROPOUT_STREAM: u64 = 0xd50f;
const EVAL_BATCH: usize = 64;

pub const DEFAULT_BATCH_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub activation: ActivationKind,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub normalization: Normalization,
    pub norm_enabled: bool,
}

impl TrainConfig {
    /// MLP: Adadelta (lr 1.0) for 1000 epochs. FCN: Adam (lr 0.001) for 2000 epochs.
    pub fn standard(architecture: Architecture, activation: ActivationKind) -> Self {
        let (optimizer, epochs) = match architecture {
            Architecture::Fcn => (OptimizerConfig::adam(0.001), 2000),
            Architecture::Mlp | Architecture::Custom => (OptimizerConfig::adadelta(1.0), 1000),
        };
        Self {
            architecture,
            activation,
            optimizer,
            epochs,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
            normalization: Normalization::PerSeries,
            norm_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        self.activation.validate()?;
        self.optimizer.validate()
    }

    pub fn spec_for(&self, input_length: usize, n_classes: usize) -> Result<ModelSpec> {
        ModelSpec::build(
            self.architecture,
            input_length,
            n_classes,
            self.activation,
            self.norm_enabled,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Diverged,
    Failed,
}

/// Where training hit its first non-finite value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub epoch: usize,
    pub batch: usize,
    pub detail: alloc::string::String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub state: ModelState,
    pub optimizer: Optimizer,
    /// Mean training loss of every finished epoch.
    pub history: Vec<f64>,
    pub status: RunStatus,
    pub divergence: Option<Divergence>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> Option<f64> {
        self.history.last().copied()
    }
}

/// Visiting order of the training set in `epoch`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(seed, &[ORDER_STREAM, epoch as u64]);
    order.shuffle(&mut r);
    order
}

/// Trains from the seeded initialization of `spec`.
pub fn train(spec: &ModelSpec, dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    let state = spec.init_params(config.seed)?;
    train_from(spec, state, dataset, config)
}

/// Trains for the full epoch budget starting from `state`.
///
/// The first non-finite value (forward, gradient or updated parameter) ends
/// the run with [`RunStatus::Diverged`]; the returned state is the last one
/// that was entirely finite.
pub fn train_from(
    spec: &ModelSpec,
    mut state: ModelState,
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.series_len() != spec.input_length {
        return Err(Error::Contract(format!(
            "dataset series have length {}, model expects {}",
            dataset.series_len(),
            spec.input_length
        )));
    }
    if dataset.n_classes() != spec.n_classes {
        return Err(Error::Contract(format!(
            "dataset has {} classes, model expects {}",
            dataset.n_classes(),
            spec.n_classes
        )));
    }
    let mut optimizer = Optimizer::new(config.optimizer)?;
    let mut history = Vec::with_capacity(config.epochs);
    let n = dataset.len();

    for epoch in 0..config.epochs {
        let order = epoch_order(n, config.seed, epoch);
        let mut total = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            match train_step(
                spec,
                &mut state,
                &mut optimizer,
                dataset,
                idx,
                config.seed,
                epoch,
                batch,
            ) {
                Ok(loss) => total += loss * idx.len() as f64,
                Err(Error::Numeric { node, op, quantity }) => {
                    return Ok(TrainOutcome {
                        state,
                        optimizer,
                        history,
                        status: RunStatus::Diverged,
                        divergence: Some(Divergence {
                            epoch,
                            batch,
                            detail: format!("non-finite {quantity} at node {node} ({op})"),
                        }),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        history.push(total / n as f64);
    }
    Ok(TrainOutcome {
        state,
        optimizer,
        history,
        status: RunStatus::Completed,
        divergence: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn train_step(
    spec: &ModelSpec,
    state: &mut ModelState,
    optimizer: &mut Optimizer,
    dataset: &Dataset,
    idx: &[usize],
    seed: u64,
    epoch: usize,
    batch: usize,
) -> Result<f64> {
    let x = dataset.series().select_rows(idx);
    let labels: Vec<usize> = idx.iter().map(|&i| dataset.labels()[i]).collect();
    let mut dropout_rng = rng::stream(seed, &[DROPOUT_STREAM, epoch as u64, batch as u64]);
    let mut fwd = spec.forward(state, &x, Mode::Train, &mut dropout_rng)?;
    let loss = fwd.loss(spec.head, &labels)?;
    let loss_value = fwd.tape.value(loss).data()[0];
    let mut grads = fwd.tape.backward(loss)?;
    let grads: Vec<Array> = fwd
        .params
        .iter()
        .zip(&state.params)
        .map(|(&id, p)| grads.take_or_zeros(id, p.shape()))
        .collect();

    let mut next = state.params.clone();
    let saved = optimizer.clone();
    optimizer.step(&mut next, &grads)?;
    if let Some(bad) = next.iter().position(|p| !p.is_finite()) {
        *optimizer = saved;
        return Err(Error::Numeric {
            node: fwd.params[bad].index(),
            op: "optimizer",
            quantity: "parameter",
        });
    }
    state.params = next;
    if let Some(running) = fwd.running {
        state.running = running;
    }
    Ok(loss_value)
}

/// Predicted classes for every series of `dataset`.
pub fn predict(spec: &ModelSpec, state: &ModelState, dataset: &Dataset) -> Result<Vec<usize>> {
    if dataset.series_len() != spec.input_length {
        return Err(Error::Contract(format!(
            "dataset series have length {}, model expects {}",
            dataset.series_len(),
            spec.input_length
        )));
    }
    let mut out = Vec::with_capacity(dataset.len());
    let rows: Vec<usize> = (0..dataset.len()).collect();
    for chunk in rows.chunks(EVAL_BATCH) {
        let x = dataset.series().select_rows(chunk);
        let mut unused = rng::stream(0, &[]);
        let fwd = spec.forward(state, &x, Mode::Inference, &mut unused)?;
        out.extend(classify(spec.head, fwd.output())?);
    }
    Ok(out)
}

/// Fraction of correctly classified series.
pub fn evaluate(spec: &ModelSpec, state: &ModelState, dataset: &Dataset) -> Result<f64> {
    let predicted = predict(spec, state, dataset)?;
    Ok(accuracy(&predicted, dataset.labels()))
}

pub fn accuracy(predicted: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sine_vs_flat;

    fn small_config(arch: Architecture, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            ..TrainConfig::standard(arch, ActivationKind::LeakySineLu)
        }
    }

    #[test]
    fn defaults_follow_recipe() {
        let mlp = TrainConfig::standard(Architecture::Mlp, ActivationKind::Relu);
        assert_eq!(mlp.optimizer, OptimizerConfig::adadelta(1.0));
        assert_eq!(mlp.epochs, 1000);
        let fcn = TrainConfig::standard(Architecture::Fcn, ActivationKind::Relu);
        assert_eq!(fcn.optimizer, OptimizerConfig::adam(0.001));
        assert_eq!(fcn.epochs, 2000);
        assert_eq!(fcn.batch_size, 16);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = sine_vs_flat(4, 16, 0.0, 0).unwrap();
        let cfg = small_config(Architecture::Mlp, 0);
        let spec = cfg.spec_for(16, 2).unwrap();
        let out = train(&spec, &data, &cfg).unwrap();
        assert_eq!(out.state, spec.init_params(cfg.seed).unwrap());
        assert!(out.history.is_empty());
        assert_eq!(out.status, RunStatus::Completed);
    }

    #[test]
    fn training_is_deterministic() {
        let data = sine_vs_flat(5, 16, 0.1, 3).unwrap();
        let cfg = small_config(Architecture::Mlp, 3);
        let spec = cfg.spec_for(16, 2).unwrap();
        let a = train(&spec, &data, &cfg).unwrap();
        let b = train(&spec, &data, &cfg).unwrap();
        assert_eq!(a.final_loss().unwrap().to_bits(), b.final_loss().unwrap().to_bits());
        assert_eq!(a.state, b.state);
    }

    #[test]
    fn epoch_order_is_a_permutation() {
        let mut o = epoch_order(50, 1, 7);
        assert_ne!(o, (0..50).collect::<Vec<_>>());
        assert_eq!(o, epoch_order(50, 1, 7));
        o.sort_unstable();
        assert_eq!(o, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn length_mismatch_is_contract_error() {
        let data = sine_vs_flat(2, 16, 0.0, 0).unwrap();
        let cfg = small_config(Architecture::Mlp, 1);
        let spec = cfg.spec_for(17, 2).unwrap();
        assert!(matches!(train(&spec, &data, &cfg), Err(Error::Contract(_))));
        let init = spec.init_params(0).unwrap();
        assert!(matches!(evaluate(&spec, &init, &data), Err(Error::Contract(_))));
    }

    #[test]
    fn overflow_diverges_with_last_finite_state() {
        let data = sine_vs_flat(4, 8, 0.0, 0).unwrap();
        let cfg = TrainConfig {
            optimizer: OptimizerConfig::adadelta(1e300),
            ..small_config(Architecture::Mlp, 3)
        };
        let spec = cfg.spec_for(8, 2).unwrap();
        let out = train(&spec, &data, &cfg).unwrap();
        assert_eq!(out.status, RunStatus::Diverged);
        let at = out.divergence.as_ref().unwrap();
        assert_eq!(out.history.len(), at.epoch);
        assert!(out.state.is_finite());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]), 1.0);
        assert_eq!(accuracy(&[1, 0], &[0, 1]), 0.0);
    }
}
