//! Numeric probes for the analytic claims about activations.
//!
//! Every probe samples the closed forms in [`crate::activation`] on fixed
//! grids, so results are deterministic. A negative verdict always carries
//! the point that produced it.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::Serialize;

use crate::activation::{ActivationKind, Limit};
use crate::array::{matmul, Array};
use crate::error::{Error, Result};
use crate::model::{Layer, ModelSpec, ModelState};
use crate::optim::{Optimizer, OptimizerConfig};
use crate::tape::Tape;
use crate::{math, rng};

pub const LIMIT_MAGNITUDES: [f64; 3] = [1e3, 1e6, 1e9];
/// Successive probes closer than this count as a converged limit.
pub const CONVERGED_TOL: f64 = 1e-9;
/// Probes at `1e6` and `1e6 + 1` further apart than this count as oscillation.
pub const OSCILLATION_TOL: f64 = 1e-3;
pub const MONOTONE_TOL: f64 = 1e-12;
pub const SEMI_PERIODIC_TOL: f64 = 1e-12;
/// Outputs below this magnitude (for inputs at least this large) are dead.
pub const DEAD_TOL: f64 = 1e-12;
/// Finite limits must agree with the catalog to this tolerance.
pub const LIMIT_MATCH_TOL: f64 = 1e-12;

/// Behaviour of σ along one tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum TailVerdict {
    Converges {
        value: f64,
    },
    Diverges {
        sign: i8,
    },
    Oscillates {
        x: f64,
        value: f64,
        x_next: f64,
        value_next: f64,
    },
    /// None of the above; the probes are listed for inspection.
    Undetermined {
        probes: [f64; 3],
    },
}

impl TailVerdict {
    pub fn as_limit(&self) -> Limit {
        match *self {
            TailVerdict::Converges { value } => Limit::Finite(value),
            TailVerdict::Diverges { sign } if sign < 0 => Limit::NegInfinity,
            TailVerdict::Diverges { .. } => Limit::PosInfinity,
            TailVerdict::Oscillates { .. } => Limit::NoLimit,
            TailVerdict::Undetermined { .. } => Limit::NoLimit,
        }
    }

    pub fn matches(&self, expected: Limit) -> bool {
        if let TailVerdict::Undetermined { .. } = self {
            return false;
        }
        match (self.as_limit(), expected) {
            (Limit::Finite(a), Limit::Finite(b)) => math::abs(a - b) <= LIMIT_MATCH_TOL,
            (a, b) => a == b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitProbe {
    pub negative: TailVerdict,
    pub positive: TailVerdict,
}

/// Classifies both tails of σ from probes at `±magnitudes` (ascending).
pub fn check_limits(kind: &ActivationKind, magnitudes: &[f64]) -> Result<LimitProbe> {
    if magnitudes.len() < 2 || magnitudes.windows(2).any(|w| !(w[0] > 0.0 && w[1] > w[0])) {
        return Err(Error::Config(
            "limit probes need at least two increasing positive magnitudes".into(),
        ));
    }
    Ok(LimitProbe {
        negative: tail(kind, -1.0, magnitudes)?,
        positive: tail(kind, 1.0, magnitudes)?,
    })
}

fn tail(kind: &ActivationKind, sign: f64, magnitudes: &[f64]) -> Result<TailVerdict> {
    let values = magnitudes
        .iter()
        .map(|m| kind.eval(sign * m))
        .collect::<Result<Vec<_>>>()?;
    if values.windows(2).all(|w| math::abs(w[1] - w[0]) < CONVERGED_TOL) {
        return Ok(TailVerdict::Converges {
            value: values[values.len() - 1],
        });
    }
    let growing = values
        .windows(2)
        .all(|w| math::abs(w[1]) > 10.0 * math::abs(w[0]) && w[0].signum() == w[1].signum());
    if growing {
        let last = values[values.len() - 1];
        return Ok(TailVerdict::Diverges {
            sign: if last < 0.0 { -1 } else { 1 },
        });
    }
    let x = sign * 1e6;
    let x_next = sign * (1e6 + 1.0);
    let (value, value_next) = (kind.eval(x)?, kind.eval(x_next)?);
    if math::abs(value_next - value) > OSCILLATION_TOL {
        return Ok(TailVerdict::Oscillates {
            x,
            value,
            x_next,
            value_next,
        });
    }
    let mut probes = [f64::NAN; 3];
    for (p, v) in probes.iter_mut().zip(&values) {
        *p = *v;
    }
    Ok(TailVerdict::Undetermined { probes })
}

/// `n` evenly spaced points on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemiPeriodicProbe {
    pub period: f64,
    pub max_deviation: f64,
    /// Grid point attaining the maximum deviation.
    pub witness: f64,
    pub holds: bool,
}

/// Largest `|σ′(x + T) − σ′(x)|` over `grid`.
pub fn check_semi_periodicity(kind: &ActivationKind, period: f64, grid: &[f64]) -> Result<SemiPeriodicProbe> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::Config(format!("period must be positive, got {period}")));
    }
    if grid.is_empty() {
        return Err(Error::Config("semi-periodicity grid is empty".into()));
    }
    let mut max_deviation = 0.0;
    let mut witness = grid[0];
    for &x in grid {
        let d = math::abs(kind.derivative(x + period)? - kind.derivative(x)?);
        if d > max_deviation {
            max_deviation = d;
            witness = x;
        }
    }
    Ok(SemiPeriodicProbe {
        period,
        max_deviation,
        witness,
        holds: max_deviation < SEMI_PERIODIC_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotoneProbe {
    pub monotone: bool,
    pub min_derivative: f64,
    /// Grid point with the smallest derivative.
    pub witness: f64,
}

/// Non-decreasing iff σ′ ≥ −1e-12 on `grid`.
pub fn check_monotone(kind: &ActivationKind, grid: &[f64]) -> Result<MonotoneProbe> {
    let mut min_derivative = f64::INFINITY;
    let mut witness = f64::NAN;
    for &x in grid {
        let d = kind.derivative(x)?;
        if d < min_derivative {
            min_derivative = d;
            witness = x;
        }
    }
    if grid.is_empty() {
        return Err(Error::Config("monotonicity grid is empty".into()));
    }
    Ok(MonotoneProbe {
        monotone: min_derivative >= -MONOTONE_TOL,
        min_derivative,
        witness,
    })
}

/// The default monotonicity grid: 10⁴ points on `[−20, 20]`.
pub fn monotone_grid() -> Vec<f64> {
    linspace(-20.0, 20.0, 10_000)
}

/// Smallest value of σ on `grid` and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub x: f64,
    pub value: f64,
}

pub fn empirical_infimum(kind: &ActivationKind, grid: &[f64]) -> Result<Extremum> {
    let mut best = Extremum {
        x: f64::NAN,
        value: f64::INFINITY,
    };
    for &x in grid {
        let v = kind.eval(x)?;
        if v < best.value {
            best = Extremum { x, value: v };
        }
    }
    Ok(best)
}

/// Everything the probes say about one activation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub kind: ActivationKind,
    pub limits: LimitProbe,
    pub monotone: MonotoneProbe,
    /// Present when the catalog claims a derivative period.
    pub semi_periodic: Vec<SemiPeriodicProbe>,
    pub infimum: Extremum,
    pub matches_catalog: bool,
    /// Disagreements between probes and the catalog.
    pub mismatches: Vec<String>,
    /// Known, documented catalog departures (not counted as mismatches).
    pub documented_deviation: Option<String>,
}

/// Semi-periodicity grids for `kind`: one per smooth region of the derivative.
fn period_grids(kind: &ActivationKind, period: f64) -> Vec<Vec<f64>> {
    if kind.kinks().is_empty() {
        return vec![linspace(-20.0, 20.0, 1000)];
    }
    // (0, 20] and [-20, -T) keep x and x + T on the same side of the kink at 0.
    let pos = (1..=1000).map(|i| 20.0 * i as f64 / 1000.0).collect();
    let neg = (0..1000).map(|i| -20.0 + (20.0 - period) * i as f64 / 1000.0).collect();
    vec![pos, neg]
}

/// Runs every probe for `kind` and compares against its catalog record.
pub fn analyze(kind: &ActivationKind) -> Result<PropertyReport> {
    let record = kind.catalog();
    let limits = check_limits(kind, &LIMIT_MAGNITUDES)?;
    let grid = monotone_grid();
    let monotone = check_monotone(kind, &grid)?;
    let infimum = empirical_infimum(kind, &grid)?;
    let semi_periodic = match record.semi_periodic_period {
        Some(t) => period_grids(kind, t)
            .iter()
            .map(|g| check_semi_periodicity(kind, t, g))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };

    let mut mismatches = Vec::new();
    if !limits.negative.matches(record.lower_limit) {
        mismatches.push(format!(
            "lower limit: probe {:?}, catalog {}",
            limits.negative, record.lower_limit
        ));
    }
    if !limits.positive.matches(record.upper_limit) {
        mismatches.push(format!(
            "upper limit: probe {:?}, catalog {}",
            limits.positive, record.upper_limit
        ));
    }
    if monotone.monotone != record.monotonic {
        mismatches.push(format!(
            "monotonic: probe {} (min derivative {} at x = {}), catalog {}",
            monotone.monotone, monotone.min_derivative, monotone.witness, record.monotonic
        ));
    }
    for p in &semi_periodic {
        if !p.holds {
            mismatches.push(format!(
                "semi-periodicity with T = {}: deviation {} at x = {}",
                p.period, p.max_deviation, p.witness
            ));
        }
    }
    let documented_deviation = record
        .deviation
        .map(|d| format!("listed limits {} / {}; {}", d.listed_lower, d.listed_upper, d.reason));
    Ok(PropertyReport {
        kind: *kind,
        limits,
        monotone,
        semi_periodic,
        infimum,
        matches_catalog: mismatches.is_empty(),
        mismatches,
        documented_deviation,
    })
}

/// Affine map `x ↦ x·W + b` with `W: [n_in, n_out]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineMap {
    pub weight: Array,
    pub bias: Array,
}

impl AffineMap {
    pub fn new(weight: Array, bias: Array) -> Result<Self> {
        let (ws, bs) = (weight.shape(), bias.shape());
        if ws.len() != 2 || bs.len() != 1 || ws[1] != bs[0] {
            return Err(Error::Shape {
                op: "affine_map",
                detail: format!("weight {ws:?}, bias {bs:?}"),
            });
        }
        Ok(Self { weight, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[1]
    }

    /// `self` followed by `next`: `W = W_self·W_next`, `b = b_self·W_next + b_next`.
    pub fn then(&self, next: &AffineMap) -> Result<AffineMap> {
        if self.outputs() != next.inputs() {
            return Err(Error::Shape {
                op: "affine_map",
                detail: format!(
                    "cannot compose {} outputs with {} inputs",
                    self.outputs(),
                    next.inputs()
                ),
            });
        }
        let (n, k, m) = (self.inputs(), self.outputs(), next.outputs());
        let mut w = vec![0.0; n * m];
        matmul(self.weight.data(), next.weight.data(), &mut w, n, k, m);
        let mut b = next.bias.data().to_vec();
        matmul(self.bias.data(), next.weight.data(), &mut b, 1, k, m);
        AffineMap::new(Array::new(vec![n, m], w)?, Array::new(vec![m], b)?)
    }

    /// Applies the map to a `[B, n_in]` batch.
    pub fn apply(&self, x: &Array) -> Result<Array> {
        let xs = x.shape();
        if xs.len() != 2 || xs[1] != self.inputs() {
            return Err(Error::Shape {
                op: "affine_map",
                detail: format!("input {xs:?} for {} inputs", self.inputs()),
            });
        }
        let m = self.outputs();
        let mut out = Vec::with_capacity(xs[0] * m);
        for _ in 0..xs[0] {
            out.extend_from_slice(self.bias.data());
        }
        matmul(x.data(), self.weight.data(), &mut out, xs[0], xs[1], m);
        Array::new(vec![xs[0], m], out)
    }
}

/// The dense layers of an activation-free stack, in order.
pub fn dense_layers(spec: &ModelSpec, state: &ModelState) -> Result<Vec<AffineMap>> {
    if let Some(l) = spec.layers.iter().find(|l| !matches!(l, Layer::Dense { .. })) {
        return Err(Error::Contract(format!(
            "affine collapse needs a dense-only stack, found {l:?}"
        )));
    }
    if state.params.len() != 2 * spec.layers.len() {
        return Err(Error::Contract("model state does not match its spec".into()));
    }
    state
        .params
        .chunks_exact(2)
        .map(|p| AffineMap::new(p[0].clone(), p[1].clone()))
        .collect()
}

/// Collapses a stack of affine maps into one.
pub fn collapse(layers: &[AffineMap]) -> Result<AffineMap> {
    let (first, rest) = layers
        .split_first()
        .ok_or_else(|| Error::Contract("cannot collapse an empty stack".into()))?;
    rest.iter().try_fold(first.clone(), |acc, l| acc.then(l))
}

/// Collapses an identity-activation dense model into a single affine map.
pub fn affine_collapse(spec: &ModelSpec, state: &ModelState) -> Result<AffineMap> {
    collapse(&dense_layers(spec, state)?)
}

/// Truncated Fourier series `a₀/2 + Σ aₙ cos(2πnt/T) + bₙ sin(2πnt/T)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierSeries {
    pub a0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub period: f64,
}

impl FourierSeries {
    pub fn terms(&self) -> usize {
        self.a.len()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let w = 2.0 * math::PI / self.period;
        let mut y = self.a0 / 2.0;
        for (n, (an, bn)) in self.a.iter().zip(&self.b).enumerate() {
            let arg = w * (n + 1) as f64 * t;
            y += an * math::cos(arg) + bn * math::sin(arg);
        }
        y
    }

    /// `terms` harmonics with every coefficient uniform on `[-1, 1]`.
    pub fn random(terms: usize, period: f64, seed: u64) -> Self {
        let mut r = rng::stream(seed, &[0xf0f0]);
        let mut draw = || r.random_range(-1.0..=1.0);
        let a0 = draw();
        let a = (0..terms).map(|_| draw()).collect();
        let b = (0..terms).map(|_| draw()).collect();
        Self { a0, a, b, period }
    }
}

/// Fixed training recipe for [`fourier_fit_demo`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FourierRecipe {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    /// Evenly spaced sample points on `[0, 2T]`.
    pub samples: usize,
}

impl Default for FourierRecipe {
    fn default() -> Self {
        Self {
            steps: 5000,
            lr: 0.01,
            seed: 0,
            samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierFit {
    pub mse: f64,
    pub steps: usize,
    pub diverged: bool,
    /// Learned angular frequencies and phases of the sine units.
    pub frequencies: Vec<f64>,
    pub phases: Vec<f64>,
}

pub const MAX_FOURIER_TERMS: usize = 8;

/// Fits `target` with one hidden layer of `2N` sine units.
///
/// The network is `y = c + Σ wⱼ sin(ωⱼ t + φⱼ)` with every parameter
/// learnable. Frequencies start on the harmonic grid `2πn/T`, each paired
/// with phases 0 and π/2 so the initial features are the sine and cosine
/// basis; output weights start small and random.
pub fn fourier_fit_demo(target: &FourierSeries, recipe: &FourierRecipe) -> Result<FourierFit> {
    let n = target.terms();
    if n == 0 || n > MAX_FOURIER_TERMS || target.b.len() != n {
        return Err(Error::Config(format!(
            "Fourier demo needs 1..={MAX_FOURIER_TERMS} terms with matching coefficients"
        )));
    }
    if !(target.period > 0.0 && target.period.is_finite()) || recipe.samples < 2 {
        return Err(Error::Config(
            "Fourier demo needs a positive period and ≥ 2 samples".into(),
        ));
    }
    let units = 2 * n;
    let ts = linspace(0.0, 2.0 * target.period, recipe.samples);
    let ys: Vec<f64> = ts.iter().map(|&t| target.eval(t)).collect();
    let x = Array::new(vec![ts.len(), 1], ts)?;

    let w0 = 2.0 * math::PI / target.period;
    let freq: Vec<f64> = (0..units).map(|j| w0 * (j / 2 + 1) as f64).collect();
    let phase: Vec<f64> = (0..units)
        .map(|j| if j % 2 == 0 { 0.0 } else { math::PI / 2.0 })
        .collect();
    let mut r = rng::stream(recipe.seed, &[0xf1]);
    let out_w: Vec<f64> = (0..units).map(|_| r.random_range(-0.01..0.01)).collect();
    let mut params = vec![
        Array::new(vec![1, units], freq)?,
        Array::new(vec![units], phase)?,
        Array::new(vec![units, 1], out_w)?,
        Array::zeros(&[1]),
    ];
    let mut opt = Optimizer::new(OptimizerConfig::adam(recipe.lr))?;

    let loss_of = |params: &[Array]| -> Result<(Tape, [crate::tape::NodeId; 4], crate::tape::NodeId)> {
        let mut tape = Tape::new();
        let input = tape.leaf(x.clone())?;
        let ids = [
            tape.leaf(params[0].clone())?,
            tape.leaf(params[1].clone())?,
            tape.leaf(params[2].clone())?,
            tape.leaf(params[3].clone())?,
        ];
        let z = tape.affine(input, ids[0], ids[1])?;
        let h = tape.activation(z, ActivationKind::Sine, None)?;
        let y = tape.affine(h, ids[2], ids[3])?;
        let loss = tape.mse(y, &ys)?;
        Ok((tape, ids, loss))
    };

    let mut steps = 0;
    let mut diverged = false;
    for _ in 0..recipe.steps {
        let (tape, ids, loss) = match loss_of(&params) {
            Ok(v) => v,
            Err(Error::Numeric { .. }) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let mut g = match tape.backward(loss) {
            Ok(g) => g,
            Err(Error::Numeric { .. }) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let grads: Vec<Array> = ids
            .iter()
            .zip(&params)
            .map(|(&id, p)| g.take_or_zeros(id, p.shape()))
            .collect();
        opt.step(&mut params, &grads)?;
        steps += 1;
    }
    let mse = match loss_of(&params) {
        Ok((tape, _, loss)) => tape.value(loss).data()[0],
        Err(Error::Numeric { .. }) => {
            diverged = true;
            f64::INFINITY
        }
        Err(e) => return Err(e),
    };
    Ok(FourierFit {
        mse,
        steps,
        diverged: diverged || !mse.is_finite(),
        frequencies: params[0].data().to_vec(),
        phases: params[1].data().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeadRegion {
    pub input: Vec<f64>,
    pub activated: Vec<f64>,
    pub derivative: Vec<f64>,
    /// Fraction of points where a non-zero input produced a zero output.
    pub dead_fraction: f64,
}

/// Applies σ to `series` and measures how much of it is silenced.
pub fn dead_region_trace(kind: &ActivationKind, series: &[f64]) -> Result<DeadRegion> {
    let activated = series.iter().map(|&x| kind.eval(x)).collect::<Result<Vec<_>>>()?;
    let derivative = series.iter().map(|&x| kind.derivative(x)).collect::<Result<Vec<_>>>()?;
    let dead = series
        .iter()
        .zip(&activated)
        .filter(|(x, y)| math::abs(**y) < DEAD_TOL && math::abs(**x) >= DEAD_TOL)
        .count();
    let dead_fraction = if series.is_empty() {
        0.0
    } else {
        dead as f64 / series.len() as f64
    };
    Ok(DeadRegion {
        input: series.to_vec(),
        activated,
        derivative,
        dead_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_examples() {
        let p = check_limits(&ActivationKind::LeakySineLu, &LIMIT_MAGNITUDES).unwrap();
        assert_eq!(p.negative, TailVerdict::Diverges { sign: -1 });
        assert_eq!(p.positive, TailVerdict::Diverges { sign: 1 });

        let p = check_limits(&ActivationKind::Sigmoid, &LIMIT_MAGNITUDES).unwrap();
        assert!(p.negative.matches(Limit::Finite(0.0)));
        assert!(p.positive.matches(Limit::Finite(1.0)));

        let p = check_limits(&ActivationKind::Sine, &LIMIT_MAGNITUDES).unwrap();
        assert!(matches!(p.negative, TailVerdict::Oscillates { .. }));
        assert!(matches!(p.positive, TailVerdict::Oscillates { .. }));
    }

    #[test]
    fn semi_periodicity_examples() {
        let pos: Vec<f64> = (1..=1000).map(|i| 20.0 * i as f64 / 1000.0).collect();
        let p = check_semi_periodicity(&ActivationKind::LeakySineLu, math::PI, &pos).unwrap();
        assert!(p.max_deviation < 1e-12);
        let all = linspace(-20.0, 20.0, 1000);
        let p = check_semi_periodicity(&ActivationKind::SNAKE_DEFAULT, math::PI, &all).unwrap();
        assert!(p.max_deviation < 1e-12);
        let p = check_semi_periodicity(&ActivationKind::Sigmoid, math::PI, &all).unwrap();
        assert!(p.max_deviation > 0.01 && !p.holds);
    }

    #[test]
    fn monotone_examples() {
        let grid = monotone_grid();
        assert!(check_monotone(&ActivationKind::LeakySineLu, &grid).unwrap().monotone);
        assert!(check_monotone(&ActivationKind::Relu, &grid).unwrap().monotone);
        let g = check_monotone(&ActivationKind::Gelu, &grid).unwrap();
        assert!(!g.monotone);
        // σ″ = φ(x)(2 − x²) vanishes at −√2, the global minimum of σ′.
        let root2 = core::f64::consts::SQRT_2;
        assert!((g.witness + root2).abs() < 5e-3, "{}", g.witness);
        let expected = 0.078_649_603_525_142_58 - root2 * 0.146_762_663_173_739_6;
        assert!((g.min_derivative - expected).abs() < 1e-5, "{}", g.min_derivative);
    }

    #[test]
    fn collapse_by_hand() {
        let l1 = AffineMap::new(Array::filled(&[1, 1], 2.0), Array::filled(&[1], 1.0)).unwrap();
        let l2 = AffineMap::new(Array::filled(&[1, 1], 3.0), Array::filled(&[1], 0.0)).unwrap();
        let c = collapse(&[l1.clone(), l2]).unwrap();
        assert_eq!(c.weight.data(), &[6.0]);
        assert_eq!(c.bias.data(), &[3.0]);
        assert_eq!(collapse(core::slice::from_ref(&l1)).unwrap(), l1);
    }

    #[test]
    fn collapse_rejects_non_dense() {
        let spec = ModelSpec::mlp(4, 2, ActivationKind::Relu).unwrap();
        let state = spec.init_params(0).unwrap();
        assert!(matches!(affine_collapse(&spec, &state), Err(Error::Contract(_))));
    }

    #[test]
    fn dead_region_examples() {
        let series = [-1.0, -2.0, 1.0, 2.0, 3.0];
        let relu = dead_region_trace(&ActivationKind::Relu, &series).unwrap();
        assert_eq!(relu.dead_fraction, 0.4);
        let lsl = dead_region_trace(&ActivationKind::LeakySineLu, &series).unwrap();
        assert_eq!(lsl.dead_fraction, 0.0);
        let pos = dead_region_trace(&ActivationKind::Relu, &[1.0, 2.0]).unwrap();
        assert_eq!(pos.dead_fraction, 0.0);
        let zero = dead_region_trace(&ActivationKind::Relu, &[0.0]).unwrap();
        assert_eq!(zero.dead_fraction, 0.0);
    }

    #[test]
    fn fourier_series_eval() {
        let s = FourierSeries {
            a0: 2.0,
            a: vec![0.0],
            b: vec![1.0],
            period: 2.0 * math::PI,
        };
        assert!((s.eval(math::PI / 2.0) - 2.0).abs() < 1e-15);
    }
}
