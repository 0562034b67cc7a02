//! The activation zoo.
//!
//! Ten elementwise nonlinearities with closed-form values, analytic
//! derivatives, sub-differentials at their kinks and a static property
//! catalog (tail limits, monotonicity, derivative period).
//!
//! LeakySineLU is `sin²(x) + x` for `x > 0` and `(sin²(x) + x) / 2` otherwise.
//! Its derivative `sin(2x) + 1` (halved on the non-positive side) is periodic
//! with period π on each half-line, never negative, and jumps from 0.5 to 1
//! at the origin.

use alloc::format;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// A scalar activation parameter and whether training may update it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub value: f64,
    pub learnable: bool,
}

impl Param {
    pub const fn fixed(value: f64) -> Self {
        Self {
            value,
            learnable: false,
        }
    }

    pub const fn learnable(value: f64) -> Self {
        Self { value, learnable: true }
    }
}

/// One of the ten supported activations together with its parameters.
///
/// Non-parametric variants carry nothing. ELU's `alpha` is fixed, PReLU's
/// `alpha` is learnable by default (one value per neuron or channel once
/// placed in a model) and Snake's `a` is fixed at 1 unless configured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum ActivationKind {
    Sigmoid,
    Tanh,
    Sine,
    Relu,
    Elu { alpha: f64 },
    Prelu { alpha: Param },
    Gelu,
    Silu,
    Snake { a: Param },
    LeakySineLu,
}

/// Canonical lowercase names, in catalog order.
pub const NAMES: [&str; 10] = [
    "sigmoid",
    "tanh",
    "sine",
    "relu",
    "elu",
    "prelu",
    "gelu",
    "silu",
    "snake",
    "leakysinelu",
];

impl ActivationKind {
    pub const ELU_DEFAULT: Self = Self::Elu { alpha: 1.0 };
    pub const PRELU_DEFAULT: Self = Self::Prelu {
        alpha: Param::learnable(0.25),
    };
    pub const SNAKE_DEFAULT: Self = Self::Snake { a: Param::fixed(1.0) };

    /// All ten activations with default parameters, in catalog order.
    pub fn all() -> [Self; 10] {
        [
            Self::Sigmoid,
            Self::Tanh,
            Self::Sine,
            Self::Relu,
            Self::ELU_DEFAULT,
            Self::PRELU_DEFAULT,
            Self::Gelu,
            Self::Silu,
            Self::SNAKE_DEFAULT,
            Self::LeakySineLu,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sigmoid => "sigmoid",
            Self::Tanh => "tanh",
            Self::Sine => "sine",
            Self::Relu => "relu",
            Self::Elu { .. } => "elu",
            Self::Prelu { .. } => "prelu",
            Self::Gelu => "gelu",
            Self::Silu => "silu",
            Self::Snake { .. } => "snake",
            Self::LeakySineLu => "leakysinelu",
        }
    }

    /// Display label as used in result tables.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Sigmoid => "Sigmoid",
            Self::Tanh => "TanH",
            Self::Sine => "Sine",
            Self::Relu => "ReLU",
            Self::Elu { .. } => "ELU",
            Self::Prelu { .. } => "PReLU",
            Self::Gelu => "GeLU",
            Self::Silu => "SiLU",
            Self::Snake { .. } => "Snake",
            Self::LeakySineLu => "LeakySineLU",
        }
    }

    /// The scalar parameter of parametric kinds.
    pub fn param(&self) -> Option<Param> {
        match *self {
            Self::Elu { alpha } => Some(Param::fixed(alpha)),
            Self::Prelu { alpha } => Some(alpha),
            Self::Snake { a } => Some(a),
            _ => None,
        }
    }

    /// The parameter value used by the raw kernels (0 for non-parametric kinds).
    pub fn param_value(&self) -> f64 {
        self.param().map_or(0.0, |p| p.value)
    }

    /// True when training keeps a per-neuron/per-channel copy of the parameter.
    pub fn has_learnable_param(&self) -> bool {
        self.param().is_some_and(|p| p.learnable)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Elu { alpha } if !(alpha.is_finite() && alpha > 0.0) => {
                Err(Error::Config(format!("ELU alpha must be finite and > 0, got {alpha}")))
            }
            Self::Prelu { alpha } if !alpha.value.is_finite() => Err(Error::Config(format!(
                "PReLU alpha must be finite, got {}",
                alpha.value
            ))),
            Self::Snake { a } if !(a.value.is_finite() && a.value != 0.0) => Err(Error::Config(format!(
                "Snake a must be finite and non-zero, got {}",
                a.value
            ))),
            _ => Ok(()),
        }
    }

    fn check(&self, x: f64) -> Result<()> {
        self.validate()?;
        if x.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain {
                what: self.name(),
                value: x,
            })
        }
    }

    /// σ(x).
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.forward_raw(x, self.param_value()))
    }

    /// σ′(x), with the canonical sub-gradient at kinks: 1 for LeakySineLU,
    /// 0 for ReLU and 1 for PReLU.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(self.derivative_raw(x, self.param_value()))
    }

    /// The derivative at smooth points, or the set of one-sided derivatives
    /// spanning the sub-differential at a kink.
    pub fn subdifferential(&self, x: f64) -> Result<Subdifferential> {
        self.check(x)?;
        if x != 0.0 {
            return Ok(Subdifferential::Point(self.derivative_raw(x, self.param_value())));
        }
        let (left, right) = match *self {
            Self::Relu => (0.0, 1.0),
            Self::Prelu { alpha } => (alpha.value, 1.0),
            Self::Elu { alpha } => (alpha, 1.0),
            Self::LeakySineLu => (0.5, 1.0),
            _ => return Ok(Subdifferential::Point(self.derivative_raw(x, self.param_value()))),
        };
        Ok(if left == right {
            Subdifferential::Point(left)
        } else {
            Subdifferential::Interval { left, right }
        })
    }

    /// Non-differentiable points for the current parameters.
    pub fn kinks(&self) -> &'static [f64] {
        match *self {
            Self::Relu | Self::LeakySineLu => &[0.0],
            Self::Prelu { alpha } if alpha.value != 1.0 => &[0.0],
            Self::Elu { alpha } if alpha != 1.0 => &[0.0],
            _ => &[],
        }
    }

    /// σ(x) with an explicit parameter value `p`, no validation.
    #[inline]
    pub fn forward_raw(&self, x: f64, p: f64) -> f64 {
        match self {
            Self::Sigmoid => math::logistic(x),
            Self::Tanh => math::tanh(x),
            Self::Sine => math::sin(x),
            Self::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Self::Elu { .. } => {
                if x > 0.0 {
                    x
                } else {
                    p * math::expm1(x)
                }
            }
            Self::Prelu { .. } => {
                if x >= 0.0 {
                    x
                } else {
                    p * x
                }
            }
            Self::Gelu => x * math::normal_cdf(x),
            Self::Silu => x * math::logistic(x),
            Self::Snake { .. } => {
                let s = math::sin(p * x);
                x + s * s / p
            }
            Self::LeakySineLu => {
                let s = math::sin(x);
                let y = s * s + x;
                if x > 0.0 {
                    y
                } else {
                    0.5 * y
                }
            }
        }
    }

    /// σ′(x) with an explicit parameter value `p`, no validation.
    #[inline]
    pub fn derivative_raw(&self, x: f64, p: f64) -> f64 {
        match self {
            Self::Sigmoid => {
                let s = math::logistic(x);
                s * (1.0 - s)
            }
            Self::Tanh => {
                let t = math::tanh(x);
                1.0 - t * t
            }
            Self::Sine => math::cos(x),
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Elu { .. } => {
                if x > 0.0 {
                    1.0
                } else {
                    p * math::exp(x)
                }
            }
            Self::Prelu { .. } => {
                if x >= 0.0 {
                    1.0
                } else {
                    p
                }
            }
            Self::Gelu => math::normal_cdf(x) + x * math::normal_pdf(x),
            Self::Silu => {
                let s = math::logistic(x);
                s * (1.0 + x * (1.0 - s))
            }
            Self::Snake { .. } => 1.0 + math::sin(2.0 * p * x),
            Self::LeakySineLu => {
                let d = math::sin(2.0 * x) + 1.0;
                if x >= 0.0 {
                    d
                } else {
                    0.5 * d
                }
            }
        }
    }

    /// ∂σ/∂p for parametric kinds (0 otherwise).
    #[inline]
    pub fn param_derivative_raw(&self, x: f64, p: f64) -> f64 {
        match self {
            Self::Elu { .. } if x <= 0.0 => math::expm1(x),
            Self::Prelu { .. } if x < 0.0 => x,
            Self::Snake { .. } => {
                let s = math::sin(p * x);
                x * math::sin(2.0 * p * x) / p - s * s / (p * p)
            }
            _ => 0.0,
        }
    }

    /// The static property record for this kind.
    pub fn catalog(&self) -> PropertyRecord {
        use Limit::{Finite, NegInfinity, NoLimit, PosInfinity};
        let (lower, upper, monotonic, period) = match *self {
            Self::Sigmoid => (Finite(0.0), Finite(1.0), true, None),
            Self::Tanh => (Finite(-1.0), Finite(1.0), true, None),
            Self::Sine => (NoLimit, NoLimit, false, None),
            Self::Relu => (Finite(0.0), PosInfinity, true, None),
            Self::Elu { alpha } => (Finite(-alpha), PosInfinity, true, None),
            Self::Prelu { .. } => (NegInfinity, PosInfinity, true, None),
            Self::Gelu => (Finite(0.0), PosInfinity, false, None),
            Self::Silu => (Finite(0.0), PosInfinity, false, None),
            Self::Snake { a } => (NegInfinity, PosInfinity, true, Some(math::PI / math::abs(a.value))),
            Self::LeakySineLu => (NegInfinity, PosInfinity, true, Some(math::PI)),
        };
        let deviation = match self {
            Self::Sine => Some(LimitDeviation {
                listed_lower: Finite(0.0),
                listed_upper: Finite(1.0),
                reason: "sin(x) has no limit as x tends to either infinity; its range is [-1, 1]",
            }),
            _ => None,
        };
        PropertyRecord {
            kind: *self,
            lower_limit: lower,
            upper_limit: upper,
            monotonic,
            semi_periodic_period: period,
            deviation,
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    /// Parses a canonical lowercase name into the kind with default parameters.
    fn from_str(s: &str) -> Result<Self> {
        let name = s.trim().to_ascii_lowercase();
        ActivationKind::all()
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown activation `{s}`; expected one of: {}",
                    NAMES.join(", ")
                ))
            })
    }
}

/// Derivative information at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Subdifferential {
    /// The function is differentiable here.
    Point(f64),
    /// A kink: the one-sided derivatives and every value between them.
    Interval { left: f64, right: f64 },
}

impl Subdifferential {
    pub fn lower(&self) -> f64 {
        match *self {
            Self::Point(v) => v,
            Self::Interval { left, right } => left.min(right),
        }
    }

    pub fn upper(&self) -> f64 {
        match *self {
            Self::Point(v) => v,
            Self::Interval { left, right } => left.max(right),
        }
    }

    pub fn contains(&self, g: f64) -> bool {
        self.lower() <= g && g <= self.upper()
    }
}

/// Limit of an activation as its input tends to ±∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    Finite(f64),
    NegInfinity,
    PosInfinity,
    /// The limit does not exist (oscillation).
    NoLimit,
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::Finite(v) => write!(f, "{}", v + 0.0),
            Limit::NegInfinity => f.write_str("-inf"),
            Limit::PosInfinity => f.write_str("+inf"),
            Limit::NoLimit => f.write_str("none"),
        }
    }
}

/// Records where the catalog knowingly departs from the commonly listed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitDeviation {
    pub listed_lower: Limit,
    pub listed_upper: Limit,
    pub reason: &'static str,
}

/// Static properties of an activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropertyRecord {
    pub kind: ActivationKind,
    pub lower_limit: Limit,
    pub upper_limit: Limit,
    pub monotonic: bool,
    /// Period of the derivative for semi-periodic kinds.
    pub semi_periodic_period: Option<f64>,
    pub deviation: Option<LimitDeviation>,
}

/// Canonical names joined for messages.
pub fn name_list() -> String {
    NAMES.join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn leakysinelu_values() {
        let k = ActivationKind::LeakySineLu;
        assert_eq!(k.eval(0.0).unwrap(), 0.0);
        assert!(close(k.eval(FRAC_PI_2).unwrap(), 1.0 + FRAC_PI_2, 1e-15));
        assert!(close(k.eval(-FRAC_PI_2).unwrap(), (1.0 - FRAC_PI_2) / 2.0, 1e-15));
        assert!(close(k.eval(-FRAC_PI_2).unwrap(), -0.285_398_163_397_448_3, 1e-15));
    }

    #[test]
    fn leakysinelu_derivative_and_kink() {
        let k = ActivationKind::LeakySineLu;
        assert!(close(k.derivative(FRAC_PI_4).unwrap(), 2.0, 1e-15));
        assert_eq!(k.derivative(0.0).unwrap(), 1.0);
        assert_eq!(
            k.subdifferential(0.0).unwrap(),
            Subdifferential::Interval { left: 0.5, right: 1.0 }
        );
    }

    #[test]
    fn other_scalar_examples() {
        assert!(close(ActivationKind::SNAKE_DEFAULT.eval(PI).unwrap(), PI, 1e-15));
        assert_eq!(ActivationKind::Relu.eval(-2.0).unwrap(), 0.0);
        assert_eq!(ActivationKind::Sine.derivative(0.0).unwrap(), 1.0);
        assert_eq!(ActivationKind::Relu.derivative(0.0).unwrap(), 0.0);
        assert_eq!(ActivationKind::PRELU_DEFAULT.derivative(0.0).unwrap(), 1.0);
        assert_eq!(
            ActivationKind::Sigmoid.subdifferential(0.0).unwrap(),
            Subdifferential::Point(0.25)
        );
        assert_eq!(
            ActivationKind::Relu.subdifferential(0.0).unwrap(),
            Subdifferential::Interval { left: 0.0, right: 1.0 }
        );
        // ELU with alpha = 1 is continuously differentiable at the origin.
        assert_eq!(
            ActivationKind::ELU_DEFAULT.subdifferential(0.0).unwrap(),
            Subdifferential::Point(1.0)
        );
    }

    #[test]
    fn elu_uses_standard_piecewise_form() {
        let k = ActivationKind::ELU_DEFAULT;
        assert_eq!(k.eval(2.0).unwrap(), 2.0);
        assert!(close(k.eval(-1.0).unwrap(), (-1.0f64).exp() - 1.0, 1e-15));
    }

    #[test]
    fn gelu_dips_below_zero_derivative() {
        // Φ(−2) − 2φ(2) from standard normal tables.
        let expected = 0.022_750_131_948_179_2 - 2.0 * 0.053_990_966_513_188_06;
        let d = ActivationKind::Gelu.derivative(-2.0).unwrap();
        assert!(close(d, expected, 1e-12), "{d}");
        assert!(close(d, -0.085, 1e-3));
    }

    #[test]
    fn rejects_non_finite_input_and_bad_params() {
        assert!(matches!(ActivationKind::Relu.eval(f64::NAN), Err(Error::Domain { .. })));
        assert!(matches!(
            ActivationKind::Tanh.derivative(f64::INFINITY),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            ActivationKind::Elu { alpha: 0.0 }.eval(1.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ActivationKind::Snake { a: Param::fixed(0.0) }.eval(1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn names_round_trip() {
        for k in ActivationKind::all() {
            assert_eq!(k.name().parse::<ActivationKind>().unwrap(), k);
        }
        assert_eq!(NAMES.len(), 10);
        assert!("swish".parse::<ActivationKind>().is_err());
        assert_eq!(
            "LeakySineLU".parse::<ActivationKind>().unwrap(),
            ActivationKind::LeakySineLu
        );
    }

    #[test]
    fn catalog_rows() {
        let r = ActivationKind::LeakySineLu.catalog();
        assert_eq!(r.lower_limit, Limit::NegInfinity);
        assert_eq!(r.upper_limit, Limit::PosInfinity);
        assert!(r.monotonic);
        assert_eq!(r.semi_periodic_period, Some(PI));
        let s = ActivationKind::Sigmoid.catalog();
        assert_eq!((s.lower_limit, s.upper_limit), (Limit::Finite(0.0), Limit::Finite(1.0)));
        assert!(!ActivationKind::Gelu.catalog().monotonic);
        assert!(ActivationKind::Sine.catalog().deviation.is_some());
    }

    #[test]
    fn param_derivatives_match_finite_differences() {
        let h = 1e-6;
        for (kind, p) in [
            (ActivationKind::PRELU_DEFAULT, 0.25),
            (ActivationKind::SNAKE_DEFAULT, 1.3),
            (ActivationKind::ELU_DEFAULT, 0.7),
        ] {
            for x in [-2.3, -0.4, 0.6, 1.9] {
                let fd = (kind.forward_raw(x, p + h) - kind.forward_raw(x, p - h)) / (2.0 * h);
                let an = kind.param_derivative_raw(x, p);
                assert!(close(fd, an, 1e-8), "{kind} x={x}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn serde_uses_lowercase_names() {
        let json = serde_json::to_string(&ActivationKind::LeakySineLu).unwrap();
        assert_eq!(json, r#"{"name":"leakysinelu"}"#);
        let back: ActivationKind =
            serde_json::from_str(r#"{"name":"prelu","alpha":{"value":0.25,"learnable":true}}"#).unwrap();
        assert_eq!(back, ActivationKind::PRELU_DEFAULT);
    }
}
