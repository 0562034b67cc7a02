//! The MLP and FCN reference classifiers.
//!
//! A [`ModelSpec`] is a declarative layer list; a [`ModelState`] holds the
//! named parameter arrays and batch-norm running statistics for one spec.
//! [`ModelSpec::forward`] records a forward pass on a fresh [`Tape`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::array::Array;
use crate::error::{Error, Result};
use crate::rng;
use crate::tape::{Mode, NodeId, RunningStats, Tape};

pub const MLP_HIDDEN: usize = 500;
pub const MLP_DROPOUT: [f64; 3] = [0.1, 0.2, 0.3];
pub const FCN_CHANNELS: [usize; 3] = [128, 256, 128];
pub const FCN_KERNELS: [usize; 3] = [8, 5, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Mlp,
    Fcn,
    /// Plain dense stack without activations, used by the affine-collapse probe.
    Custom,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Mlp => "mlp",
            Architecture::Fcn => "fcn",
            Architecture::Custom => "custom",
        }
    }
}

impl core::fmt::Display for Architecture {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(Architecture::Mlp),
            "fcn" => Ok(Architecture::Fcn),
            _ => Err(Error::Config(format!(
                "unknown architecture `{s}` (expected mlp or fcn)"
            ))),
        }
    }
}

/// Output layer interpretation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Head {
    /// One logit, class 1 iff `sigmoid(z) > 0.5`.
    Sigmoid,
    Softmax {
        classes: usize,
    },
    /// Raw outputs with no classification semantics.
    Linear {
        units: usize,
    },
}

impl Head {
    pub fn for_classes(n_classes: usize) -> Self {
        if n_classes == 2 {
            Head::Sigmoid
        } else {
            Head::Softmax { classes: n_classes }
        }
    }

    pub fn units(self) -> usize {
        match self {
            Head::Sigmoid => 1,
            Head::Softmax { classes } => classes,
            Head::Linear { units } => units,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Dropout { p: f64 },
    Dense { units: usize },
    Conv { channels: usize, kernel: usize },
    BatchNorm,
    Activation,
    GlobalAvgPool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub layers: Vec<Layer>,
    pub activation: ActivationKind,
    pub n_classes: usize,
    pub input_length: usize,
    pub head: Head,
    pub norm_enabled: bool,
}

/// Trainable parameters plus batch-norm running statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub names: Vec<String>,
    pub params: Vec<Array>,
    pub running: Vec<RunningStats>,
}

impl ModelState {
    pub fn get(&self, name: &str) -> Option<&Array> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Array::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(Array::is_finite)
            && self
                .running
                .iter()
                .all(|r| r.mean.iter().chain(&r.var).all(|v| v.is_finite()))
    }
}

/// Shape and initialization rule of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform on `±sqrt(6 / fan_in)`, i.e. variance `2 / fan_in`.
    KaimingUniform {
        fan_in: usize,
    },
    Constant(f64),
}

/// Result of a recorded forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub tape: Tape,
    pub input: NodeId,
    pub output: NodeId,
    /// One leaf per entry of [`ModelState::params`], in the same order.
    pub params: Vec<NodeId>,
    /// Input node of every activation layer.
    pub pre_activations: Vec<NodeId>,
    /// Updated batch-norm statistics (training mode only).
    pub running: Option<Vec<RunningStats>>,
}

impl Forward {
    /// Appends the classification loss for `labels` and returns its node.
    pub fn loss(&mut self, head: Head, labels: &[usize]) -> Result<NodeId> {
        match head {
            Head::Sigmoid => self.tape.sigmoid_bce(self.output, labels),
            Head::Softmax { .. } => self.tape.softmax_xent(self.output, labels),
            Head::Linear { .. } => Err(Error::Contract("a linear head has no classification loss".into())),
        }
    }

    pub fn output(&self) -> &Array {
        self.tape.value(self.output)
    }
}

fn check_sizes(input_length: usize, n_classes: usize) -> Result<()> {
    if input_length == 0 {
        return Err(Error::Config("input length must be at least 1".into()));
    }
    if n_classes < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {n_classes}")));
    }
    Ok(())
}

impl ModelSpec {
    /// Three dropout/dense blocks: 500 units, 500 units, then the head.
    pub fn mlp(input_length: usize, n_classes: usize, activation: ActivationKind) -> Result<Self> {
        check_sizes(input_length, n_classes)?;
        activation.validate()?;
        let head = Head::for_classes(n_classes);
        let layers = vec![
            Layer::Dropout { p: MLP_DROPOUT[0] },
            Layer::Dense { units: MLP_HIDDEN },
            Layer::Activation,
            Layer::Dropout { p: MLP_DROPOUT[1] },
            Layer::Dense { units: MLP_HIDDEN },
            Layer::Activation,
            Layer::Dropout { p: MLP_DROPOUT[2] },
            Layer::Dense { units: head.units() },
        ];
        Ok(Self {
            architecture: Architecture::Mlp,
            layers,
            activation,
            n_classes,
            input_length,
            head,
            norm_enabled: false,
        })
    }

    /// Three same-padded convolution blocks, global average pooling, dense head.
    pub fn fcn(input_length: usize, n_classes: usize, activation: ActivationKind, norm_enabled: bool) -> Result<Self> {
        check_sizes(input_length, n_classes)?;
        activation.validate()?;
        let head = Head::for_classes(n_classes);
        let mut layers = Vec::new();
        for (channels, kernel) in FCN_CHANNELS.into_iter().zip(FCN_KERNELS) {
            layers.push(Layer::Conv { channels, kernel });
            if norm_enabled {
                layers.push(Layer::BatchNorm);
            }
            layers.push(Layer::Activation);
        }
        layers.push(Layer::GlobalAvgPool);
        layers.push(Layer::Dense { units: head.units() });
        Ok(Self {
            architecture: Architecture::Fcn,
            layers,
            activation,
            n_classes,
            input_length,
            head,
            norm_enabled,
        })
    }

    pub fn build(
        architecture: Architecture,
        input_length: usize,
        n_classes: usize,
        activation: ActivationKind,
        norm_enabled: bool,
    ) -> Result<Self> {
        match architecture {
            Architecture::Mlp => Self::mlp(input_length, n_classes, activation),
            Architecture::Fcn => Self::fcn(input_length, n_classes, activation, norm_enabled),
            Architecture::Custom => Err(Error::Config(
                "custom architectures are built with ModelSpec::dense_stack".into(),
            )),
        }
    }

    /// Dense layers of the given widths with no activation or dropout in between.
    pub fn dense_stack(input_length: usize, widths: &[usize]) -> Result<Self> {
        if input_length == 0 || widths.is_empty() || widths.contains(&0) {
            return Err(Error::Config(format!(
                "invalid dense stack {input_length} -> {widths:?}"
            )));
        }
        let units = *widths.last().unwrap_or(&1);
        Ok(Self {
            architecture: Architecture::Custom,
            layers: widths.iter().map(|&units| Layer::Dense { units }).collect(),
            activation: ActivationKind::Relu,
            n_classes: units,
            input_length,
            head: Head::Linear { units },
            norm_enabled: false,
        })
    }

    pub fn dense_widths(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Dense { units } => Some(*units),
                _ => None,
            })
            .collect()
    }

    pub fn dropout_probs(&self) -> Vec<f64> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Dropout { p } => Some(*p),
                _ => None,
            })
            .collect()
    }

    pub fn conv_layers(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Conv { channels, kernel } => Some((*channels, *kernel)),
                _ => None,
            })
            .collect()
    }

    /// Per-example activation shapes after each layer, starting with the input.
    pub fn shape_trace(&self) -> Result<Vec<Vec<usize>>> {
        let mut shape = vec![self.input_length];
        let mut trace = vec![shape.clone()];
        for layer in &self.layers {
            if matches!(layer, Layer::Conv { .. }) && shape.len() == 1 {
                // The raw series enters as a single input channel.
                shape = vec![1, shape[0]];
                trace.push(shape.clone());
            }
            shape = match (*layer, shape.as_slice()) {
                (Layer::Dense { units }, [_]) => vec![units],
                (Layer::Conv { channels, .. }, [_, len]) => vec![channels, *len],
                (Layer::GlobalAvgPool, [c, _]) => vec![*c],
                (Layer::Dropout { .. } | Layer::Activation | Layer::BatchNorm, s) => s.to_vec(),
                (l, s) => return Err(Error::Config(format!("layer {l:?} cannot follow shape {s:?}"))),
            };
            trace.push(shape.clone());
        }
        Ok(trace)
    }

    /// Parameter names, shapes and initializers in storage order.
    pub fn param_infos(&self) -> Result<Vec<ParamInfo>> {
        let mut infos = Vec::new();
        let mut shape = vec![self.input_length];
        for (i, layer) in self.layers.iter().enumerate() {
            match (*layer, shape.as_slice()) {
                (Layer::Dense { units }, [n]) => {
                    infos.push(ParamInfo {
                        name: format!("{i}.dense.weight"),
                        shape: vec![*n, units],
                        init: Init::KaimingUniform { fan_in: *n },
                    });
                    infos.push(ParamInfo {
                        name: format!("{i}.dense.bias"),
                        shape: vec![units],
                        init: Init::Constant(0.0),
                    });
                    shape = vec![units];
                }
                (Layer::Conv { channels, kernel }, s @ ([_] | [_, _])) => {
                    if kernel == 0 {
                        return Err(Error::Config("kernel size must be at least 1".into()));
                    }
                    let (c_in, len) = match s {
                        [len] => (1, *len),
                        [c, len] => (*c, *len),
                        _ => unreachable!(),
                    };
                    infos.push(ParamInfo {
                        name: format!("{i}.conv.weight"),
                        shape: vec![channels, c_in, kernel],
                        init: Init::KaimingUniform { fan_in: c_in * kernel },
                    });
                    infos.push(ParamInfo {
                        name: format!("{i}.conv.bias"),
                        shape: vec![channels],
                        init: Init::Constant(0.0),
                    });
                    shape = vec![channels, len];
                }
                (Layer::BatchNorm, [c, _] | [c]) => {
                    let c = *c;
                    infos.push(ParamInfo {
                        name: format!("{i}.bn.gamma"),
                        shape: vec![c],
                        init: Init::Constant(1.0),
                    });
                    infos.push(ParamInfo {
                        name: format!("{i}.bn.beta"),
                        shape: vec![c],
                        init: Init::Constant(0.0),
                    });
                }
                (Layer::Activation, s) => {
                    if self.activation.has_learnable_param() {
                        let width = s[0];
                        infos.push(ParamInfo {
                            name: format!("{i}.act.{}", param_label(&self.activation)),
                            shape: vec![width],
                            init: Init::Constant(self.activation.param_value()),
                        });
                    }
                }
                (Layer::GlobalAvgPool, [c, _]) => shape = vec![*c],
                (Layer::Dropout { p }, _) => {
                    if !(0.0..1.0).contains(&p) {
                        return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
                    }
                }
                (l, s) => return Err(Error::Config(format!("layer {l:?} cannot follow shape {s:?}"))),
            }
        }
        if shape != [self.head.units()] {
            return Err(Error::Config(format!(
                "model ends with shape {shape:?}, head expects {}",
                self.head.units()
            )));
        }
        Ok(infos)
    }

    pub fn parameter_count(&self) -> Result<usize> {
        Ok(self
            .param_infos()?
            .iter()
            .map(|p| p.shape.iter().product::<usize>())
            .sum())
    }

    fn batch_norm_channels(&self) -> Result<Vec<usize>> {
        Ok(self
            .param_infos()?
            .iter()
            .filter(|p| p.name.ends_with(".bn.gamma"))
            .map(|p| p.shape[0])
            .collect())
    }

    /// Deterministic initialization; each parameter draws from its own stream.
    pub fn init_params(&self, seed: u64) -> Result<ModelState> {
        let infos = self.param_infos()?;
        let mut names = Vec::with_capacity(infos.len());
        let mut params = Vec::with_capacity(infos.len());
        for (i, info) in infos.into_iter().enumerate() {
            let len: usize = info.shape.iter().product();
            let data = match info.init {
                Init::Constant(v) => vec![v; len],
                Init::KaimingUniform { fan_in } => {
                    let bound = crate::math::sqrt(6.0 / fan_in as f64);
                    let mut r = rng::stream(seed, &[0x1417, i as u64]);
                    (0..len).map(|_| r.random_range(-bound..bound)).collect()
                }
            };
            names.push(info.name);
            params.push(Array::new(info.shape, data)?);
        }
        let running = self.batch_norm_channels()?.into_iter().map(RunningStats::new).collect();
        Ok(ModelState { names, params, running })
    }

    fn check_state(&self, state: &ModelState) -> Result<()> {
        let infos = self.param_infos()?;
        let channels = self.batch_norm_channels()?;
        let ok = infos.len() == state.params.len()
            && infos.iter().zip(&state.params).all(|(i, p)| i.shape == p.shape())
            && channels.len() == state.running.len()
            && channels
                .iter()
                .zip(&state.running)
                .all(|(&c, r)| r.mean.len() == c && r.var.len() == c);
        if ok {
            Ok(())
        } else {
            Err(Error::Contract("model state does not match its spec".into()))
        }
    }

    /// Records a forward pass of `x: [B, input_length]`.
    ///
    /// Dropout masks are drawn from `rng` in layer order; inference mode
    /// draws nothing.
    pub fn forward<R: rand::RngCore>(&self, state: &ModelState, x: &Array, mode: Mode, rng: &mut R) -> Result<Forward> {
        self.check_state(state)?;
        let xs = x.shape();
        if xs.len() != 2 || xs[1] != self.input_length || xs[0] == 0 {
            return Err(Error::Contract(format!(
                "input shape {xs:?} does not match model input length {}",
                self.input_length
            )));
        }
        let batch = xs[0];
        let mut tape = Tape::new();
        let params = state
            .params
            .iter()
            .map(|p| tape.leaf(p.clone()))
            .collect::<Result<Vec<_>>>()?;
        let input = tape.leaf(x.clone())?;
        let mut h = input;
        let mut cursor = 0;
        let mut bn = 0;
        let mut pre_activations = Vec::new();
        let mut running = Vec::new();
        let learnable = self.activation.has_learnable_param();

        for layer in &self.layers {
            match *layer {
                Layer::Dropout { p } => h = tape.dropout(h, p, mode, rng)?,
                Layer::Dense { .. } => {
                    h = tape.affine(h, params[cursor], params[cursor + 1])?;
                    cursor += 2;
                }
                Layer::Conv { .. } => {
                    if tape.value(h).ndim() == 2 {
                        let len = tape.value(h).shape()[1];
                        h = tape.reshape(h, &[batch, 1, len])?;
                    }
                    h = tape.conv1d_same(h, params[cursor], params[cursor + 1])?;
                    cursor += 2;
                }
                Layer::BatchNorm => {
                    let (out, updated) =
                        tape.batch_norm1d(h, params[cursor], params[cursor + 1], &state.running[bn], mode)?;
                    h = out;
                    if let Some(u) = updated {
                        running.push(u);
                    }
                    cursor += 2;
                    bn += 1;
                }
                Layer::Activation => {
                    pre_activations.push(h);
                    let param = if learnable {
                        cursor += 1;
                        Some(params[cursor - 1])
                    } else {
                        None
                    };
                    h = tape.activation(h, self.activation, param)?;
                }
                Layer::GlobalAvgPool => h = tape.global_avg_pool(h)?,
            }
        }
        Ok(Forward {
            tape,
            input,
            output: h,
            params,
            pre_activations,
            running: (mode == Mode::Train).then_some(running),
        })
    }

    /// Class predictions for `x`, with dropout off and batch norm in inference mode.
    pub fn predict(&self, state: &ModelState, x: &Array) -> Result<Vec<usize>> {
        let mut unused = rng::stream(0, &[]);
        let fwd = self.forward(state, x, Mode::Inference, &mut unused)?;
        classify(self.head, fwd.output())
    }
}

fn param_label(kind: &ActivationKind) -> &'static str {
    match kind {
        ActivationKind::Snake { .. } => "a",
        _ => "alpha",
    }
}

/// Turns head outputs into class indices.
///
/// Softmax heads take the argmax (lowest index on ties); the sigmoid head
/// predicts class 1 iff the logit is positive, i.e. probability above 0.5.
pub fn classify(head: Head, logits: &Array) -> Result<Vec<usize>> {
    let s = logits.shape();
    if s.len() != 2 || s[1] != head.units() {
        return Err(Error::Contract(format!("logits {s:?} do not match head {head:?}")));
    }
    Ok(match head {
        Head::Sigmoid => logits.data().iter().map(|&z| usize::from(z > 0.0)).collect(),
        Head::Softmax { classes } | Head::Linear { units: classes } => logits
            .data()
            .chunks_exact(classes)
            .map(|row| {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_binary_parameter_count() {
        let spec = ModelSpec::mlp(24, 2, ActivationKind::LeakySineLu).unwrap();
        assert_eq!(spec.head, Head::Sigmoid);
        let closed = 500 * 24 + 500 + 500 * 500 + 500 + 500 + 1;
        assert_eq!(closed, 263_501);
        assert_eq!(spec.parameter_count().unwrap(), closed);
    }

    #[test]
    fn mlp_multiclass_layout() {
        let spec = ModelSpec::mlp(24, 3, ActivationKind::Relu).unwrap();
        assert_eq!(spec.head, Head::Softmax { classes: 3 });
        assert_eq!(spec.dense_widths(), vec![500, 500, 3]);
        assert_eq!(spec.dropout_probs(), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn fcn_layout_and_trace() {
        let spec = ModelSpec::fcn(96, 5, ActivationKind::SNAKE_DEFAULT, true).unwrap();
        assert_eq!(spec.conv_layers(), vec![(128, 8), (256, 5), (128, 3)]);
        assert_eq!(spec.head, Head::Softmax { classes: 5 });
        let trace = spec.shape_trace().unwrap();
        assert_eq!(
            trace,
            vec![
                vec![96],
                vec![1, 96],
                vec![128, 96],
                vec![128, 96],
                vec![128, 96],
                vec![256, 96],
                vec![256, 96],
                vec![256, 96],
                vec![128, 96],
                vec![128, 96],
                vec![128, 96],
                vec![128],
                vec![5],
            ]
        );
        assert_eq!(trace.last().unwrap(), &vec![5]);

        let state = spec.init_params(0).unwrap();
        let x = Array::zeros(&[4, 96]);
        let mut r = rng::stream(0, &[]);
        let fwd = spec.forward(&state, &x, Mode::Inference, &mut r).unwrap();
        assert_eq!(fwd.output().shape(), &[4, 5]);
        let shapes: Vec<_> = fwd
            .pre_activations
            .iter()
            .map(|&n| fwd.tape.value(n).shape().to_vec())
            .collect();
        assert_eq!(shapes, vec![vec![4, 128, 96], vec![4, 256, 96], vec![4, 128, 96]]);
    }

    #[test]
    fn fcn_without_norm() {
        let spec = ModelSpec::fcn(16, 2, ActivationKind::Relu, false).unwrap();
        assert!(!spec.layers.contains(&Layer::BatchNorm));
        assert!(spec.init_params(1).unwrap().running.is_empty());
    }

    #[test]
    fn invalid_sizes() {
        assert!(matches!(
            ModelSpec::mlp(0, 2, ActivationKind::Relu),
            Err(Error::Config(_))
        ));
        assert!(ModelSpec::fcn(10, 1, ActivationKind::Relu, true).is_err());
    }

    #[test]
    fn init_is_deterministic_and_scaled() {
        let spec = ModelSpec::mlp(500, 2, ActivationKind::PRELU_DEFAULT).unwrap();
        let a = spec.init_params(7).unwrap();
        let b = spec.init_params(7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, spec.init_params(8).unwrap());

        let w = a.get("4.dense.weight").unwrap();
        assert_eq!(w.shape(), &[500, 500]);
        let n = w.len() as f64;
        let mean = w.data().iter().sum::<f64>() / n;
        let var = w.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let target = 2.0 / 500.0;
        assert!((var / target - 1.0).abs() < 0.2, "{var}");

        for (name, p) in a.names.iter().zip(&a.params) {
            if name.ends_with("bias") {
                assert!(p.data().iter().all(|&v| v == 0.0));
            }
            if name.ends_with("act.alpha") {
                assert!(p.data().iter().all(|&v| v == 0.25));
                assert_eq!(p.shape(), &[500]);
            }
        }
    }

    #[test]
    fn tie_breaks_to_lowest_class() {
        let logits = Array::new(vec![1, 2], vec![0.0, 0.0]).unwrap();
        assert_eq!(classify(Head::Softmax { classes: 2 }, &logits).unwrap(), vec![0]);
        let z = Array::new(vec![2, 1], vec![0.0, 1e-9]).unwrap();
        assert_eq!(classify(Head::Sigmoid, &z).unwrap(), vec![0, 1]);
    }

    #[test]
    fn spec_json_round_trip() {
        for spec in [
            ModelSpec::mlp(24, 2, ActivationKind::LeakySineLu).unwrap(),
            ModelSpec::fcn(24, 4, ActivationKind::PRELU_DEFAULT, false).unwrap(),
        ] {
            let text = serde_json::to_string(&spec).unwrap();
            let back: ModelSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn state_mismatch_is_contract_error() {
        let spec = ModelSpec::mlp(8, 2, ActivationKind::Relu).unwrap();
        let other = ModelSpec::mlp(9, 2, ActivationKind::Relu).unwrap();
        let state = other.init_params(0).unwrap();
        assert!(matches!(
            spec.predict(&state, &Array::zeros(&[1, 8])),
            Err(Error::Contract(_))
        ));
    }
}
