//! Semi-periodic activations for time-series classification.
//!
//! This crate is the IO-free half of the workspace: it builds with `no_std`
//! (plus `alloc`) and holds everything that is pure computation.
//!
//! * [`activation`]: the ten activations, their derivatives, sub-differentials
//!   and the static property catalog.
//! * [`tape`] and [`optim`]: a minimal reverse-mode tape over [`Array`]s with
//!   exactly the operators the two reference classifiers need, plus Adam and
//!   Adadelta.
//! * [`model`] and [`train`]: the MLP and FCN classifiers, initialization,
//!   the training loop and evaluation.
//! * [`data`]: labelled datasets, label encoding and z-normalization.
//! * [`gradcheck`]: finite-difference checks of activations and whole models.
//! * [`property`]: numeric probes for boundedness, monotonicity,
//!   semi-periodicity, affine collapse, Fourier fitting and dead regions.
//! * [`stats`]: average ranks, Friedman, Wilcoxon signed-rank, Holm and the
//!   critical-difference / multi-comparison data.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod activation;
pub mod array;
pub mod data;
mod error;
pub mod gradcheck;
pub mod math;
pub mod model;
pub mod optim;
pub mod property;
pub mod rng;
pub mod stats;
pub mod tape;
pub mod train;

pub use activation::{ActivationKind, Limit, Param, PropertyRecord, Subdifferential};
pub use array::Array;
pub use data::{Dataset, LabelMap, Normalization, Split};
pub use error::{Error, Result};
pub use model::{Architecture, Head, Layer, ModelSpec, ModelState};
pub use optim::{Optimizer, OptimizerConfig};
pub use tape::{Gradients, Mode, NodeId, Tape};
pub use train::{RunStatus, TrainConfig, TrainOutcome};
