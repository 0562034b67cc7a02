//! Minimal reverse-mode differentiation.
//!
//! A [`Tape`] records each operator together with the forward values its
//! backward rule needs. Nodes are appended in evaluation order, so every
//! operand of node `k` has an index below `k` and a single reverse sweep in
//! [`Tape::backward`] visits each node once.
//!
//! Only the operators used by the MLP and FCN classifiers (and the Fourier
//! demonstration) exist: affine maps, same-padded 1-D convolution, global
//! average pooling, batch normalization, dropout, elementwise activations,
//! reshape and three losses.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::array::{matmul, matmul_a_bt, matmul_at_b, Array};
use crate::error::{Error, Result};
use crate::math;

/// Index of a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Train/inference switch for dropout and batch normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Inference,
}

/// Per-channel running mean and (unbiased) variance of a batch-norm layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }
}

pub const BATCH_NORM_EPS: f64 = 1e-5;
pub const BATCH_NORM_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Affine {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    Conv1d {
        x: NodeId,
        kernel: NodeId,
        bias: NodeId,
        /// im2col buffer `[B·L, C_in·K]`
        cols: Vec<f64>,
    },
    GlobalAvgPool {
        x: NodeId,
    },
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        /// Batch statistics flow into the gradient only in training mode.
        batch_stats: bool,
    },
    Dropout {
        x: NodeId,
        mask: Vec<f64>,
    },
    Activation {
        x: NodeId,
        kind: ActivationKind,
        param: Option<NodeId>,
    },
    Reshape {
        x: NodeId,
    },
    SoftmaxXent {
        logits: NodeId,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    SigmoidBce {
        logits: NodeId,
        targets: Vec<f64>,
    },
    Mse {
        pred: NodeId,
        target: Vec<f64>,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Affine { .. } => "affine",
            Op::Conv1d { .. } => "conv1d_same",
            Op::GlobalAvgPool { .. } => "global_avg_pool",
            Op::BatchNorm { .. } => "batch_norm1d",
            Op::Dropout { .. } => "dropout",
            Op::Activation { .. } => "activation",
            Op::Reshape { .. } => "reshape",
            Op::SoftmaxXent { .. } => "softmax_xent",
            Op::SigmoidBce { .. } => "sigmoid_bce",
            Op::Mse { .. } => "mse",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Array,
    op: Op,
}

/// Recorded computation graph in topological order.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node of a tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Array>>,
}

impl Gradients {
    /// Gradient for `id`, or `None` when the loss does not depend on it.
    pub fn get(&self, id: NodeId) -> Option<&Array> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Takes ownership of the gradient for `id`, falling back to zeros of `shape`.
    pub fn take_or_zeros(&mut self, id: NodeId, shape: &[usize]) -> Array {
        self.grads[id.0].take().unwrap_or_else(|| Array::zeros(shape))
    }
}

fn shape_err(op: &'static str, detail: alloc::string::String) -> Error {
    Error::Shape { op, detail }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Array, op: Op) -> Result<NodeId> {
        let id = NodeId(self.nodes.len());
        if !value.is_finite() {
            return Err(Error::Numeric {
                node: id.0,
                op: op.name(),
                quantity: "value",
            });
        }
        self.nodes.push(Node { value, op });
        Ok(id)
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Array) -> Result<NodeId> {
        self.push(value, Op::Leaf)
    }

    /// `out[i, j] = Σ_k x[i, k] · w[k, j] + b[j]` for `x: [B, n]`, `w: [n, m]`, `b: [m]`.
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xs, ws, bs) = (self.value(x).shape(), self.value(w).shape(), self.value(b).shape());
        if xs.len() != 2 || ws.len() != 2 || bs.len() != 1 || xs[1] != ws[0] || ws[1] != bs[0] {
            return Err(shape_err("affine", format!("x {xs:?}, w {ws:?}, b {bs:?}")));
        }
        let (batch, n, m) = (xs[0], xs[1], ws[1]);
        let bias = self.value(b).data();
        let mut out = Vec::with_capacity(batch * m);
        for _ in 0..batch {
            out.extend_from_slice(bias);
        }
        matmul(self.value(x).data(), self.value(w).data(), &mut out, batch, n, m);
        let value = Array::new(vec![batch, m], out)?;
        self.push(value, Op::Affine { x, w, b })
    }

    /// Stride-1 cross-correlation with zero "same" padding.
    ///
    /// `x: [B, C_in, L]`, `kernel: [C_out, C_in, K]`, `bias: [C_out]`. The
    /// input is padded with `(K-1)/2` zeros on the left and the remainder on
    /// the right, so the output length equals `L`.
    pub fn conv1d_same(&mut self, x: NodeId, kernel: NodeId, bias: NodeId) -> Result<NodeId> {
        let (xs, ks, bs) = (
            self.value(x).shape(),
            self.value(kernel).shape(),
            self.value(bias).shape(),
        );
        if xs.len() != 3 || ks.len() != 3 || bs.len() != 1 || xs[1] != ks[1] || ks[0] != bs[0] {
            return Err(shape_err(
                "conv1d_same",
                format!("x {xs:?}, kernel {ks:?}, bias {bs:?}"),
            ));
        }
        let (batch, c_in, len) = (xs[0], xs[1], xs[2]);
        let (c_out, k) = (ks[0], ks[2]);
        if k == 0 || len == 0 {
            return Err(shape_err("conv1d_same", "empty kernel or series".into()));
        }
        let cols = im2col(self.value(x).data(), batch, c_in, len, k);
        let width = c_in * k;
        // rows[b·L + t][o] = Σ cols[b·L + t][j] · kernel[o][j]
        let mut rows = vec![0.0; batch * len * c_out];
        matmul_a_bt(&cols, self.value(kernel).data(), &mut rows, batch * len, width, c_out);
        let b_data = self.value(bias).data();
        let mut out = vec![0.0; batch * c_out * len];
        for bi in 0..batch {
            for t in 0..len {
                let src = &rows[(bi * len + t) * c_out..(bi * len + t + 1) * c_out];
                for (o, &v) in src.iter().enumerate() {
                    out[(bi * c_out + o) * len + t] = v + b_data[o];
                }
            }
        }
        let value = Array::new(vec![batch, c_out, len], out)?;
        self.push(value, Op::Conv1d { x, kernel, bias, cols })
    }

    /// Mean over the last axis: `[B, C, L] -> [B, C]`.
    pub fn global_avg_pool(&mut self, x: NodeId) -> Result<NodeId> {
        let xs = self.value(x).shape();
        if xs.len() != 3 || xs[2] == 0 {
            return Err(shape_err("global_avg_pool", format!("x {xs:?}")));
        }
        let (batch, ch, len) = (xs[0], xs[1], xs[2]);
        let inv = 1.0 / len as f64;
        let out = self
            .value(x)
            .data()
            .chunks_exact(len)
            .map(|row| row.iter().sum::<f64>() * inv)
            .collect();
        let value = Array::new(vec![batch, ch], out)?;
        self.push(value, Op::GlobalAvgPool { x })
    }

    /// Per-channel batch normalization of `x: [B, C, L]` (or `[B, C]`).
    ///
    /// Training mode standardizes with the batch mean and biased variance and
    /// returns updated running statistics (momentum 0.1, unbiased variance).
    /// Inference mode uses `running` and returns `None`.
    pub fn batch_norm1d(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        running: &RunningStats,
        mode: Mode,
    ) -> Result<(NodeId, Option<RunningStats>)> {
        let xs = self.value(x).shape().to_vec();
        if xs.len() < 2 || xs.len() > 3 {
            return Err(shape_err("batch_norm1d", format!("x {xs:?}")));
        }
        let (batch, ch) = (xs[0], xs[1]);
        let len = xs.get(2).copied().unwrap_or(1);
        let (gs, bs) = (self.value(gamma).shape(), self.value(beta).shape());
        if gs != [ch] || bs != [ch] || running.mean.len() != ch || running.var.len() != ch {
            return Err(shape_err(
                "batch_norm1d",
                format!("{ch} channels but gamma {gs:?}, beta {bs:?}"),
            ));
        }
        let count = batch * len;
        let data = self.value(x).data();
        let at = |b: usize, c: usize| (b * ch + c) * len;

        let (mean, var, updated) = match mode {
            Mode::Train => {
                if count < 2 {
                    return Err(Error::Contract(
                        "batch_norm1d needs more than one value per channel in training mode".into(),
                    ));
                }
                let mut mean = vec![0.0; ch];
                let mut var = vec![0.0; ch];
                for c in 0..ch {
                    let mut s = 0.0;
                    for b in 0..batch {
                        s += data[at(b, c)..at(b, c) + len].iter().sum::<f64>();
                    }
                    let mu = s / count as f64;
                    let mut sq = 0.0;
                    for b in 0..batch {
                        sq += data[at(b, c)..at(b, c) + len]
                            .iter()
                            .map(|v| (v - mu) * (v - mu))
                            .sum::<f64>();
                    }
                    mean[c] = mu;
                    var[c] = sq / count as f64;
                }
                let unbias = count as f64 / (count as f64 - 1.0);
                let updated = RunningStats {
                    mean: running
                        .mean
                        .iter()
                        .zip(&mean)
                        .map(|(r, m)| (1.0 - BATCH_NORM_MOMENTUM) * r + BATCH_NORM_MOMENTUM * m)
                        .collect(),
                    var: running
                        .var
                        .iter()
                        .zip(&var)
                        .map(|(r, v)| (1.0 - BATCH_NORM_MOMENTUM) * r + BATCH_NORM_MOMENTUM * v * unbias)
                        .collect(),
                };
                (mean, var, Some(updated))
            }
            Mode::Inference => (running.mean.clone(), running.var.clone(), None),
        };

        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / math::sqrt(v + BATCH_NORM_EPS)).collect();
        let g = self.value(gamma).data();
        let be = self.value(beta).data();
        let mut xhat = vec![0.0; data.len()];
        let mut out = vec![0.0; data.len()];
        for b in 0..batch {
            for c in 0..ch {
                let base = at(b, c);
                for i in base..base + len {
                    let h = (data[i] - mean[c]) * inv_std[c];
                    xhat[i] = h;
                    out[i] = g[c] * h + be[c];
                }
            }
        }
        let value = Array::new(xs, out)?;
        let id = self.push(
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats: mode == Mode::Train,
            },
        )?;
        Ok((id, updated))
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `p` and survivors are scaled by `1 / (1 - p)`. Inference
    /// mode (or `p = 0`) is the identity and draws nothing from `rng`.
    pub fn dropout<R: rand::RngCore>(&mut self, x: NodeId, p: f64, mode: Mode, rng: &mut R) -> Result<NodeId> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
        }
        let n = self.value(x).len();
        let mask: Vec<f64> = if mode == Mode::Inference || p == 0.0 {
            vec![1.0; n]
        } else {
            let scale = 1.0 / (1.0 - p);
            (0..n)
                .map(|_| if rng.random::<f64>() < p { 0.0 } else { scale })
                .collect()
        };
        let src = self.value(x);
        let out = src.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Array::new(src.shape().to_vec(), out)?;
        self.push(value, Op::Dropout { x, mask })
    }

    /// Elementwise activation.
    ///
    /// With `param = Some(id)` the parameter is a learnable vector with one
    /// entry per index of axis 1 (neuron for `[B, F]`, channel for
    /// `[B, C, L]`); otherwise the kind's own parameter value is used.
    pub fn activation(&mut self, x: NodeId, kind: ActivationKind, param: Option<NodeId>) -> Result<NodeId> {
        kind.validate()?;
        let xs = self.value(x).shape();
        let params = self.param_lookup(xs, param, &kind)?;
        let inner = inner_size(xs);
        let width = xs.get(1).copied().unwrap_or(1);
        let src = self.value(x);
        let out = src
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| kind.forward_raw(v, params.at(i, inner, width)))
            .collect();
        let value = Array::new(src.shape().to_vec(), out)?;
        self.push(value, Op::Activation { x, kind, param })
    }

    fn param_lookup(&self, xs: &[usize], param: Option<NodeId>, kind: &ActivationKind) -> Result<ParamValues<'_>> {
        match param {
            None => Ok(ParamValues::Constant(kind.param_value())),
            Some(id) => {
                let ps = self.value(id).shape();
                if xs.len() < 2 || ps != [xs[1]] {
                    return Err(shape_err(
                        "activation",
                        format!("parameter {ps:?} does not match input {xs:?}"),
                    ));
                }
                Ok(ParamValues::PerChannel(self.value(id).data()))
            }
        }
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.value(x).clone().reshaped(shape)?;
        self.push(value, Op::Reshape { x })
    }

    /// Mean softmax cross-entropy of `logits: [B, C]` against class indices.
    pub fn softmax_xent(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let ls = self.value(logits).shape();
        if ls.len() != 2 || ls[0] != labels.len() || ls[0] == 0 {
            return Err(shape_err(
                "softmax_xent",
                format!("logits {ls:?} for {} labels", labels.len()),
            ));
        }
        let (batch, classes) = (ls[0], ls[1]);
        if classes < 2 {
            return Err(Error::Config("softmax head needs at least two classes".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Data(format!("label {bad} out of range for {classes} classes")));
        }
        let data = self.value(logits).data();
        let mut probs = vec![0.0; data.len()];
        let mut loss = 0.0;
        for (i, &label) in labels.iter().enumerate() {
            let row = &data[i * classes..(i + 1) * classes];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, &z) in row.iter().enumerate() {
                let e = math::exp(z - max);
                probs[i * classes + j] = e;
                sum += e;
            }
            for p in &mut probs[i * classes..(i + 1) * classes] {
                *p /= sum;
            }
            loss += math::ln(sum) + max - row[label];
        }
        let value = Array::scalar(loss / batch as f64);
        self.push(
            value,
            Op::SoftmaxXent {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        )
    }

    /// Mean binary cross-entropy of `logits: [B, 1]` against 0/1 targets.
    pub fn sigmoid_bce(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let ls = self.value(logits).shape();
        if ls.len() != 2 || ls[1] != 1 || ls[0] != labels.len() || ls[0] == 0 {
            return Err(shape_err(
                "sigmoid_bce",
                format!("logits {ls:?} for {} labels", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Data(format!("binary label must be 0 or 1, got {bad}")));
        }
        let targets: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        let loss: f64 = self
            .value(logits)
            .data()
            .iter()
            .zip(&targets)
            .map(|(&z, &y)| z.max(0.0) - z * y + math::ln_1p(math::exp(-math::abs(z))))
            .sum();
        let value = Array::scalar(loss / labels.len() as f64);
        self.push(value, Op::SigmoidBce { logits, targets })
    }

    /// Mean squared error against a fixed target of the same size.
    pub fn mse(&mut self, pred: NodeId, target: &[f64]) -> Result<NodeId> {
        let p = self.value(pred);
        if p.len() != target.len() || p.is_empty() {
            return Err(shape_err(
                "mse",
                format!("prediction {:?} vs {} targets", p.shape(), target.len()),
            ));
        }
        let loss: f64 = p.data().iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / target.len() as f64;
        self.push(
            Array::scalar(loss),
            Op::Mse {
                pred,
                target: target.to_vec(),
            },
        )
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, node {} has shape {:?}",
                loss.0,
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            for (target, contribution) in self.node_backward(node, &g)? {
                if contribution.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric {
                        node: idx,
                        op: node.op.name(),
                        quantity: "gradient",
                    });
                }
                accumulate(&mut grads[target.0], contribution);
            }
            grads[idx] = Some(g);
        }

        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| g.map(|d| Array::new(n.value.shape().to_vec(), d)).transpose())
            .collect::<Result<Vec<_>>>()?;
        Ok(Gradients { grads })
    }

    fn node_backward(&self, node: &Node, g: &[f64]) -> Result<Vec<(NodeId, Vec<f64>)>> {
        let mut out = Vec::new();
        match &node.op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                let (batch, n) = (self.value(*x).shape()[0], self.value(*x).shape()[1]);
                let m = self.value(*w).shape()[1];
                let mut dx = vec![0.0; batch * n];
                matmul_a_bt(g, self.value(*w).data(), &mut dx, batch, m, n);
                let mut dw = vec![0.0; n * m];
                matmul_at_b(self.value(*x).data(), g, &mut dw, batch, n, m);
                let mut db = vec![0.0; m];
                for row in g.chunks_exact(m) {
                    for (d, v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                out.push((*x, dx));
                out.push((*w, dw));
                out.push((*b, db));
            }
            Op::Conv1d { x, kernel, bias, cols } => {
                let xs = self.value(*x).shape();
                let (batch, c_in, len) = (xs[0], xs[1], xs[2]);
                let ks = self.value(*kernel).shape();
                let (c_out, k) = (ks[0], ks[2]);
                let width = c_in * k;
                // g is [B, C_out, L]; regroup as rows [B·L, C_out].
                let mut g_rows = vec![0.0; batch * len * c_out];
                let mut db = vec![0.0; c_out];
                for bi in 0..batch {
                    for o in 0..c_out {
                        let src = &g[(bi * c_out + o) * len..(bi * c_out + o + 1) * len];
                        for (t, &v) in src.iter().enumerate() {
                            g_rows[(bi * len + t) * c_out + o] = v;
                            db[o] += v;
                        }
                    }
                }
                let mut dk = vec![0.0; c_out * width];
                matmul_at_b(&g_rows, cols, &mut dk, batch * len, c_out, width);
                let mut dcols = vec![0.0; batch * len * width];
                matmul(
                    &g_rows,
                    self.value(*kernel).data(),
                    &mut dcols,
                    batch * len,
                    c_out,
                    width,
                );
                let dx = col2im(&dcols, batch, c_in, len, k);
                out.push((*x, dx));
                out.push((*kernel, dk));
                out.push((*bias, db));
            }
            Op::GlobalAvgPool { x } => {
                let len = self.value(*x).shape()[2];
                let inv = 1.0 / len as f64;
                let mut dx = Vec::with_capacity(g.len() * len);
                for &v in g {
                    dx.extend(core::iter::repeat_n(v * inv, len));
                }
                out.push((*x, dx));
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let xs = self.value(*x).shape();
                let (batch, ch) = (xs[0], xs[1]);
                let len = xs.get(2).copied().unwrap_or(1);
                let count = (batch * len) as f64;
                let gam = self.value(*gamma).data();
                let mut dgamma = vec![0.0; ch];
                let mut dbeta = vec![0.0; ch];
                let mut dx = vec![0.0; g.len()];
                for c in 0..ch {
                    let mut sum_dy = 0.0;
                    let mut sum_dy_xhat = 0.0;
                    for b in 0..batch {
                        let base = (b * ch + c) * len;
                        for i in base..base + len {
                            sum_dy += g[i];
                            sum_dy_xhat += g[i] * xhat[i];
                        }
                    }
                    dgamma[c] = sum_dy_xhat;
                    dbeta[c] = sum_dy;
                    let scale = gam[c] * inv_std[c];
                    for b in 0..batch {
                        let base = (b * ch + c) * len;
                        for i in base..base + len {
                            dx[i] = if *batch_stats {
                                scale * (g[i] - sum_dy / count - xhat[i] * sum_dy_xhat / count)
                            } else {
                                scale * g[i]
                            };
                        }
                    }
                }
                out.push((*x, dx));
                out.push((*gamma, dgamma));
                out.push((*beta, dbeta));
            }
            Op::Dropout { x, mask } => {
                out.push((*x, g.iter().zip(mask).map(|(a, m)| a * m).collect()));
            }
            Op::Activation { x, kind, param } => {
                let xv = self.value(*x);
                let xs = xv.shape();
                let inner = inner_size(xs);
                let width = xs.get(1).copied().unwrap_or(1);
                let params = self.param_lookup(xs, *param, kind)?;
                let p_at = |i: usize| params.at(i, inner, width);
                let dx = xv
                    .data()
                    .iter()
                    .zip(g)
                    .enumerate()
                    .map(|(i, (&v, &gi))| gi * kind.derivative_raw(v, p_at(i)))
                    .collect();
                out.push((*x, dx));
                if let Some(pid) = param {
                    let mut dp = vec![0.0; width];
                    for (i, (&v, &gi)) in xv.data().iter().zip(g).enumerate() {
                        dp[(i / inner) % width] += gi * kind.param_derivative_raw(v, p_at(i));
                    }
                    out.push((*pid, dp));
                }
            }
            Op::Reshape { x } => out.push((*x, g.to_vec())),
            Op::SoftmaxXent { logits, labels, probs } => {
                let classes = self.value(*logits).shape()[1];
                let scale = g[0] / labels.len() as f64;
                let mut d: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                for (i, &l) in labels.iter().enumerate() {
                    d[i * classes + l] -= scale;
                }
                out.push((*logits, d));
            }
            Op::SigmoidBce { logits, targets } => {
                let scale = g[0] / targets.len() as f64;
                let d = self
                    .value(*logits)
                    .data()
                    .iter()
                    .zip(targets)
                    .map(|(&z, &y)| (math::logistic(z) - y) * scale)
                    .collect();
                out.push((*logits, d));
            }
            Op::Mse { pred, target } => {
                let scale = 2.0 * g[0] / target.len() as f64;
                let d = self
                    .value(*pred)
                    .data()
                    .iter()
                    .zip(target)
                    .map(|(a, b)| (a - b) * scale)
                    .collect();
                out.push((*pred, d));
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy)]
enum ParamValues<'a> {
    Constant(f64),
    PerChannel(&'a [f64]),
}

impl ParamValues<'_> {
    #[inline]
    fn at(&self, i: usize, inner: usize, width: usize) -> f64 {
        match self {
            ParamValues::Constant(v) => *v,
            ParamValues::PerChannel(p) => p[(i / inner) % width],
        }
    }
}

fn inner_size(shape: &[usize]) -> usize {
    shape.iter().skip(2).product::<usize>().max(1)
}

fn accumulate(slot: &mut Option<Vec<f64>>, contribution: Vec<f64>) {
    match slot {
        Some(acc) => {
            for (a, c) in acc.iter_mut().zip(contribution) {
                *a += c;
            }
        }
        None => *slot = Some(contribution),
    }
}

fn pad_left(k: usize) -> usize {
    (k - 1) / 2
}

/// `cols[(b·L + t)][(c·K + j)] = x[b, c, t + j - pad_left]` (zero outside).
fn im2col(x: &[f64], batch: usize, c_in: usize, len: usize, k: usize) -> Vec<f64> {
    let width = c_in * k;
    let pad = pad_left(k) as isize;
    let mut cols = vec![0.0; batch * len * width];
    for b in 0..batch {
        for t in 0..len {
            let row = &mut cols[(b * len + t) * width..(b * len + t + 1) * width];
            for c in 0..c_in {
                let src = &x[(b * c_in + c) * len..(b * c_in + c + 1) * len];
                for j in 0..k {
                    let pos = t as isize + j as isize - pad;
                    if pos >= 0 && (pos as usize) < len {
                        row[c * k + j] = src[pos as usize];
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], batch: usize, c_in: usize, len: usize, k: usize) -> Vec<f64> {
    let width = c_in * k;
    let pad = pad_left(k) as isize;
    let mut x = vec![0.0; batch * c_in * len];
    for b in 0..batch {
        for t in 0..len {
            let row = &cols[(b * len + t) * width..(b * len + t + 1) * width];
            for c in 0..c_in {
                let dst = &mut x[(b * c_in + c) * len..(b * c_in + c + 1) * len];
                for j in 0..k {
                    let pos = t as isize + j as isize - pad;
                    if pos >= 0 && (pos as usize) < len {
                        dst[pos as usize] += row[c * k + j];
                    }
                }
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn arr(shape: &[usize], data: &[f64]) -> Array {
        Array::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn affine_examples() {
        let mut t = Tape::new();
        let x = t.leaf(arr(&[1, 2], &[1.0, 2.0])).unwrap();
        let w = t.leaf(arr(&[2, 1], &[1.0, 1.0])).unwrap();
        let b = t.leaf(arr(&[1], &[0.0])).unwrap();
        let y = t.affine(x, w, b).unwrap();
        assert_eq!(t.value(y).data(), &[3.0]);

        let mut t = Tape::new();
        let x = t.leaf(arr(&[1, 1], &[1.0])).unwrap();
        let w = t.leaf(arr(&[1, 1], &[2.0])).unwrap();
        let b = t.leaf(arr(&[1], &[1.0])).unwrap();
        let y = t.affine(x, w, b).unwrap();
        assert_eq!(t.value(y).data(), &[3.0]);
    }

    #[test]
    fn affine_rejects_mismatched_shapes() {
        let mut t = Tape::new();
        let x = t.leaf(Array::zeros(&[1, 3])).unwrap();
        let w = t.leaf(Array::zeros(&[2, 1])).unwrap();
        let b = t.leaf(Array::zeros(&[1])).unwrap();
        assert!(matches!(t.affine(x, w, b), Err(Error::Shape { .. })));
    }

    #[test]
    fn conv_same_padding_examples() {
        let mut t = Tape::new();
        let x = t.leaf(arr(&[1, 1, 3], &[1.0, 2.0, 3.0])).unwrap();
        let k = t.leaf(arr(&[1, 1, 3], &[1.0, 1.0, 1.0])).unwrap();
        let b = t.leaf(arr(&[1], &[0.0])).unwrap();
        let y = t.conv1d_same(x, k, b).unwrap();
        assert_eq!(t.value(y).data(), &[3.0, 6.0, 5.0]);

        let id = t.leaf(arr(&[1, 1, 3], &[0.0, 1.0, 0.0])).unwrap();
        let y = t.conv1d_same(x, id, b).unwrap();
        assert_eq!(t.value(y).data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn conv_even_kernel_pads_asymmetrically() {
        // K = 2: no left padding, one zero on the right.
        let mut t = Tape::new();
        let x = t.leaf(arr(&[1, 1, 3], &[1.0, 2.0, 3.0])).unwrap();
        let k = t.leaf(arr(&[1, 1, 2], &[1.0, 10.0])).unwrap();
        let b = t.leaf(arr(&[1], &[0.0])).unwrap();
        let y = t.conv1d_same(x, k, b).unwrap();
        assert_eq!(t.value(y).data(), &[21.0, 32.0, 3.0]);
    }

    #[test]
    fn pooling_and_its_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(arr(&[1, 2, 3], &[1.0, 2.0, 3.0, 5.0, 5.0, 5.0])).unwrap();
        let y = t.global_avg_pool(x).unwrap();
        assert_eq!(t.value(y).data(), &[2.0, 5.0]);
        let r = t.reshape(y, &[1, 2]).unwrap();
        let loss = t.mse(r, &[0.0, 0.0]).unwrap();
        let g = t.backward(loss).unwrap();
        // d/dy of mean((y)^2) = y; then 1/L broadcast.
        let gx = g.get(x).unwrap().data();
        assert!((gx[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((gx[5] - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn batch_norm_examples() {
        let mut t = Tape::new();
        let x = t.leaf(arr(&[2, 1, 1], &[-1.0, 1.0])).unwrap();
        let gamma = t.leaf(arr(&[1], &[1.0])).unwrap();
        let beta = t.leaf(arr(&[1], &[0.0])).unwrap();
        let (y, stats) = t
            .batch_norm1d(x, gamma, beta, &RunningStats::new(1), Mode::Train)
            .unwrap();
        let scale = 1.0 / (1.0f64 + BATCH_NORM_EPS).sqrt();
        assert!((t.value(y).data()[0] + scale).abs() < 1e-15);
        assert!((t.value(y).data()[1] - scale).abs() < 1e-15);
        let stats = stats.unwrap();
        assert!((stats.var[0] - (0.9 + 0.1 * 2.0)).abs() < 1e-15);

        let zero = t.leaf(arr(&[1], &[0.0])).unwrap();
        let shift = t.leaf(arr(&[1], &[0.7])).unwrap();
        let (y, _) = t
            .batch_norm1d(x, zero, shift, &RunningStats::new(1), Mode::Train)
            .unwrap();
        assert_eq!(t.value(y).data(), &[0.7, 0.7]);
    }

    #[test]
    fn dropout_modes() {
        let mut r = rng::stream(0, &[]);
        let mut t = Tape::new();
        let x = t.leaf(Array::filled(&[100], 2.0)).unwrap();
        let y = t.dropout(x, 0.0, Mode::Train, &mut r).unwrap();
        assert_eq!(t.value(y), t.value(x));
        let y = t.dropout(x, 0.9, Mode::Inference, &mut r).unwrap();
        assert_eq!(t.value(y), t.value(x));
        assert!(matches!(t.dropout(x, 1.0, Mode::Train, &mut r), Err(Error::Config(_))));
        assert!(t.dropout(x, -0.1, Mode::Train, &mut r).is_err());
    }

    #[test]
    fn dropout_zero_fraction() {
        let mut r = rng::stream(42, &[]);
        let mut t = Tape::new();
        let x = t.leaf(Array::filled(&[100_000], 1.0)).unwrap();
        let y = t.dropout(x, 0.5, Mode::Train, &mut r).unwrap();
        let zeros = t.value(y).data().iter().filter(|&&v| v == 0.0).count();
        let frac = zeros as f64 / 100_000.0;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
        assert!(t.value(y).data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn softmax_xent_examples() {
        let mut t = Tape::new();
        let z = t.leaf(arr(&[1, 2], &[0.0, 0.0])).unwrap();
        let l = t.softmax_xent(z, &[0]).unwrap();
        assert!((t.value(l).data()[0] - core::f64::consts::LN_2).abs() < 1e-15);
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(z).unwrap().data(), &[-0.5, 0.5]);

        let z = t.leaf(arr(&[1, 2], &[1000.0, 0.0])).unwrap();
        let l = t.softmax_xent(z, &[0]).unwrap();
        assert!(t.value(l).data()[0].abs() < 1e-300);

        assert!(matches!(t.softmax_xent(z, &[2]), Err(Error::Data(_))));
        let one = t.leaf(arr(&[1, 1], &[0.0])).unwrap();
        assert!(matches!(t.softmax_xent(one, &[0]), Err(Error::Config(_))));
    }

    #[test]
    fn sigmoid_bce_examples() {
        let mut t = Tape::new();
        let z = t.leaf(arr(&[1, 1], &[0.0])).unwrap();
        let l1 = t.sigmoid_bce(z, &[1]).unwrap();
        let l0 = t.sigmoid_bce(z, &[0]).unwrap();
        assert!((t.value(l1).data()[0] - core::f64::consts::LN_2).abs() < 1e-15);
        assert!((t.value(l0).data()[0] - core::f64::consts::LN_2).abs() < 1e-15);
        let g = t.backward(l1).unwrap();
        assert_eq!(g.get(z).unwrap().data(), &[-0.5]);

        let big = t.leaf(arr(&[2, 1], &[800.0, -800.0])).unwrap();
        let l = t.sigmoid_bce(big, &[1, 0]).unwrap();
        assert!(t.value(l).data()[0].abs() < 1e-300);
        assert!(t.sigmoid_bce(big, &[1, 2]).is_err());
    }

    #[test]
    fn affine_weight_gradient_equals_input() {
        let mut t = Tape::new();
        let x = t.leaf(arr(&[1, 3], &[0.5, -1.5, 2.0])).unwrap();
        let w = t.leaf(arr(&[3, 1], &[0.1, 0.2, 0.3])).unwrap();
        let b = t.leaf(arr(&[1], &[0.0])).unwrap();
        let y = t.affine(x, w, b).unwrap();
        let loss = t.reshape(y, &[]).unwrap();
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get(w).unwrap().data(), &[0.5, -1.5, 2.0]);
        assert_eq!(g.get(b).unwrap().data(), &[1.0]);
    }

    #[test]
    fn non_finite_forward_is_reported_with_node() {
        let mut t = Tape::new();
        let x = t.leaf(arr(&[1, 1], &[1e300])).unwrap();
        let w = t.leaf(arr(&[1, 1], &[1e300])).unwrap();
        let b = t.leaf(arr(&[1], &[0.0])).unwrap();
        match t.affine(x, w, b) {
            Err(Error::Numeric { node, op, .. }) => {
                assert_eq!(node, 3);
                assert_eq!(op, "affine");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn backward_requires_scalar() {
        let mut t = Tape::new();
        let x = t.leaf(Array::zeros(&[2])).unwrap();
        assert!(matches!(t.backward(x), Err(Error::Contract(_))));
    }
}
