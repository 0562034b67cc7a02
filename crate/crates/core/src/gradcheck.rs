//! Central finite-difference checks of analytic derivatives.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::activation::ActivationKind;
use crate::array::Array;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, ModelState};
use crate::rng;
use crate::tape::Mode;

/// Derivatives smaller than this are compared on an absolute scale.
///
/// A central difference with `h = 1e-5` of a function of magnitude ~10 is
/// only good to ~3e-10 absolute, so relative error is meaningless far below it.
pub const ACTIVATION_FLOOR: f64 = 1e-3;

/// Same idea for a whole network's loss at `h = 1e-4`.
pub const MODEL_FLOOR: f64 = 1e-6;

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Worst {
    pub error: f64,
    pub at: String,
    pub checked: usize,
    pub skipped: usize,
}

impl Worst {
    fn new() -> Self {
        Self {
            error: 0.0,
            at: String::new(),
            checked: 0,
            skipped: 0,
        }
    }

    fn record(&mut self, error: f64, at: impl FnOnce() -> String) {
        self.checked += 1;
        if error > self.error || self.checked == 1 {
            self.error = error;
            self.at = at();
        }
    }
}

/// Compares `σ′` with `(σ(x+h) − σ(x−h)) / 2h` on `points`, skipping any
/// point within `kink_radius` of a kink.
pub fn activation_check(kind: &ActivationKind, points: &[f64], h: f64, kink_radius: f64) -> Result<Worst> {
    let mut worst = Worst::new();
    for &x in points {
        if kind.kinks().iter().any(|&k| (x - k).abs() < kink_radius) {
            worst.skipped += 1;
            continue;
        }
        let numeric = (kind.eval(x + h)? - kind.eval(x - h)?) / (2.0 * h);
        let analytic = kind.derivative(x)?;
        let e = relative_error(analytic, numeric, ACTIVATION_FLOOR);
        worst.record(e, || format!("x = {x}: analytic {analytic}, numeric {numeric}"));
    }
    Ok(worst)
}

/// Options for [`model_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelCheck {
    pub h: f64,
    /// Random coordinates per tensor, on top of its largest-gradient coordinate.
    pub samples: usize,
    pub seed: u64,
}

impl Default for ModelCheck {
    fn default() -> Self {
        Self {
            h: 1e-4,
            samples: 6,
            seed: 0,
        }
    }
}

struct Eval {
    loss: f64,
    pre: Vec<Vec<f64>>,
}

fn evaluate(spec: &ModelSpec, state: &ModelState, x: &Array, labels: &[usize], dropout_seed: u64) -> Result<Eval> {
    let mut r = rng::stream(dropout_seed, &[]);
    let mut f = spec.forward(state, x, Mode::Train, &mut r)?;
    let loss = f.loss(spec.head, labels)?;
    let pre = f
        .pre_activations
        .iter()
        .map(|&n| f.tape.value(n).data().to_vec())
        .collect();
    Ok(Eval {
        loss: f.tape.value(loss).data()[0],
        pre,
    })
}

fn sign_changed(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.iter()
        .zip(b)
        .any(|(u, v)| u.iter().zip(v).any(|(p, q)| (*p > 0.0) != (*q > 0.0)))
}

/// Checks the tape's parameter gradients of the training loss of `spec`
/// against central differences.
///
/// Training mode is used with a dropout mask that is identical for every
/// evaluation. Coordinates whose perturbation moves any pre-activation across
/// a kink of the activation are skipped.
pub fn model_check(
    spec: &ModelSpec,
    state: &ModelState,
    x: &Array,
    labels: &[usize],
    opts: ModelCheck,
) -> Result<Worst> {
    let dropout_seed = rng::derive_seed(opts.seed, &[0xd0]);
    let mut r = rng::stream(dropout_seed, &[]);
    let mut fwd = spec.forward(state, x, Mode::Train, &mut r)?;
    let loss = fwd.loss(spec.head, labels)?;
    let grads = fwd.tape.backward(loss)?;
    let base = evaluate(spec, state, x, labels, dropout_seed)?;
    let kinked = !spec.activation.kinks().is_empty();

    let mut pick = rng::stream(opts.seed, &[0x9c]);
    let mut worst = Worst::new();
    for (i, name) in state.names.iter().enumerate() {
        let g = grads
            .get(fwd.params[i])
            .ok_or_else(|| Error::Contract(format!("no gradient for {name}")))?
            .data()
            .to_vec();
        let largest = (0..g.len())
            .max_by(|&a, &b| g[a].abs().total_cmp(&g[b].abs()))
            .unwrap_or(0);
        let mut coords: Vec<usize> = (0..opts.samples).map(|_| pick.random_range(0..g.len())).collect();
        coords.push(largest);
        for c in coords {
            let mut plus = state.clone();
            plus.params[i].data_mut()[c] += opts.h;
            let mut minus = state.clone();
            minus.params[i].data_mut()[c] -= opts.h;
            let p = evaluate(spec, &plus, x, labels, dropout_seed)?;
            let m = evaluate(spec, &minus, x, labels, dropout_seed)?;
            if kinked && (sign_changed(&p.pre, &base.pre) || sign_changed(&m.pre, &base.pre)) {
                worst.skipped += 1;
                continue;
            }
            let numeric = (p.loss - m.loss) / (2.0 * opts.h);
            let e = relative_error(g[c], numeric, MODEL_FLOOR);
            worst.record(e, || format!("{name}[{c}]: analytic {}, numeric {numeric}", g[c]));
        }
    }
    Ok(worst)
}
