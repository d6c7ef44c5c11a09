//! Exact double-precision activation functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

/// sqrt(2 / pi)
const GELU_SCALE: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

#[inline]
fn gelu_arg(x: f64) -> f64 {
    GELU_SCALE * (x + GELU_CUBIC * x * x * x)
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Functions that can be approximated. `Identity` is a test target only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationKind {
    /// Tanh-form GELU: `0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))`.
    GeluTanh,
    Exp,
    Identity,
}

impl ActivationKind {
    /// Infallible evaluation; callers guarantee a finite input.
    #[inline]
    pub fn value(self, x: f64) -> f64 {
        match self {
            // 0.5 (1 + tanh u) = 1 / (1 + e^(-2u)), which avoids the
            // cancellation in 1 + tanh u for negative x
            ActivationKind::GeluTanh => x * sigmoid(2.0 * gelu_arg(x)),
            ActivationKind::Exp => x.exp(),
            ActivationKind::Identity => x,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            // with s = sigmoid(2u): d/dx [x s] = s + 2 x s (1 - s) u'
            ActivationKind::GeluTanh => {
                let u = gelu_arg(x);
                let s = sigmoid(2.0 * u);
                let sc = sigmoid(-2.0 * u);
                let du = GELU_SCALE * (1.0 + 3.0 * GELU_CUBIC * x * x);
                s + 2.0 * x * s * sc * du
            }
            ActivationKind::Exp => x.exp(),
            ActivationKind::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::GeluTanh => "gelu-tanh",
            ActivationKind::Exp => "exp",
            ActivationKind::Identity => "identity",
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

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gelu-tanh" | "gelu" => Ok(ActivationKind::GeluTanh),
            "exp" => Ok(ActivationKind::Exp),
            "identity" => Ok(ActivationKind::Identity),
            other => Err(Error::Parse(format!("unknown activation kind {other:?}"))),
        }
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { index: 0, value: x })
    }
}

pub fn eval_exact(kind: ActivationKind, x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(kind.value(x))
}

/// Closed-form derivative of the exact function.
pub fn eval_exact_derivative(kind: ActivationKind, x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(kind.derivative(x))
}

/// Max-shifted softmax: `exp(v_i - max) / sum_j exp(v_j - max)`.
pub fn softmax_exact(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some((index, &value)) = v.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let total = numeric::sum(exps.iter().copied());
    Ok(exps.into_iter().map(|e| e / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn values_at_origin() {
        assert_eq!(eval_exact(ActivationKind::GeluTanh, 0.0).unwrap(), 0.0);
        assert_eq!(eval_exact(ActivationKind::Exp, 0.0).unwrap(), 1.0);
        assert_eq!(eval_exact_derivative(ActivationKind::GeluTanh, 0.0).unwrap(), 0.5);
        assert_eq!(eval_exact_derivative(ActivationKind::Exp, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn gelu_matches_high_precision_values() {
        // 60-digit evaluations of the tanh formula
        let cases = [
            (1.0, 0.8411919906082767047819958),
            (-1.0, -0.1588080093917232952180042),
            (2.5, 2.484915733910001417920508),
            (-3.0, -0.003637392081773018837816466),
            (0.1, 0.05398275104543516437121984),
        ];
        for (x, want) in cases {
            let got = eval_exact(ActivationKind::GeluTanh, x).unwrap();
            assert!((got - want).abs() <= 4.0 * f64::EPSILON * want.abs().max(1e-3), "{x}: {got} vs {want}");
        }
        let dcases = [
            (1.0, 1.082964083845782555139642),
            (-1.0, -0.08296408384578255513964242),
            (2.5, 1.037951576212666182634176),
            (-3.0, -0.01158416663096972620354646),
        ];
        for (x, want) in dcases {
            let got = eval_exact_derivative(ActivationKind::GeluTanh, x).unwrap();
            assert!((got - want).abs() < 1e-14, "{x}: {got} vs {want}");
        }
    }

    #[test]
    fn gelu_asymptotes() {
        assert!((ActivationKind::GeluTanh.value(10.0) - 10.0).abs() < 1e-9);
        assert!(ActivationKind::GeluTanh.value(-10.0).abs() < 1e-9);
    }

    #[test]
    fn derivative_matches_central_differences_on_grid() {
        let h = 1e-5;
        for kind in [ActivationKind::GeluTanh, ActivationKind::Exp, ActivationKind::Identity] {
            for i in 0..=1600 {
                let x = -8.0 + i as f64 * 0.01;
                let fd = (kind.value(x + h) - kind.value(x - h)) / (2.0 * h);
                let scale = if kind == ActivationKind::Exp { x.exp().max(1.0) } else { 1.0 };
                assert!((kind.derivative(x) - fd).abs() < 1e-6 * scale, "{kind} at {x}");
            }
        }
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        assert!(eval_exact(ActivationKind::Exp, f64::NAN).is_err());
        assert!(eval_exact_derivative(ActivationKind::GeluTanh, f64::INFINITY).is_err());
        assert_eq!(softmax_exact(&[]), Err(Error::EmptyInput));
        assert!(softmax_exact(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn softmax_simple_cases() {
        let s = softmax_exact(&[0.0, 0.0, 0.0]).unwrap();
        for p in s {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        for c in [-50.0, 0.0, 3.7, 700.0] {
            let s = softmax_exact(&[c, c + 2f64.ln()]).unwrap();
            assert!((s[0] - 1.0 / 3.0).abs() < 1e-12);
            assert!((s[1] - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_matches_extended_precision_naive_form() {
        let v = [
            0.3, -1.2, 2.5, 0.0, 4.1, -3.3, 1.7, 0.9, -0.4, 2.2, -2.8, 3.6, 0.05, -0.75, 1.25, -5.0,
        ];
        // unshifted exp(v_i) / sum exp(v_j), 60 digits
        let want = [
            0.01003468020421591207203024,
            0.002239039801004975001289983,
            0.0905631243055529478277722,
            0.007433873933997289252359528,
            0.4485620911399290649180433,
            0.0002741848167473366148010854,
            0.04069263483143327905057803,
            0.01828437945600828532534376,
            0.004983074717660201964346874,
            0.06709081260741697077145365,
            0.000452054339474350600315696,
            0.2720666610611795756659218,
            0.007815016800914477240620759,
            0.003511513403713585017585887,
            0.02594676953218659196672318,
            0.00005008904856515671081396798,
        ];
        let got = softmax_exact(&v).unwrap();
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("gelu-tanh".parse::<ActivationKind>().unwrap(), ActivationKind::GeluTanh);
        assert_eq!("exp".parse::<ActivationKind>().unwrap(), ActivationKind::Exp);
        assert!("relu".parse::<ActivationKind>().is_err());
        assert_eq!(serde_json::to_string(&ActivationKind::GeluTanh).unwrap(), "\"gelu-tanh\"");
    }

    proptest! {
        #[test]
        fn softmax_is_shift_invariant(
            v in prop::collection::vec(-20.0f64..20.0, 1..32),
            c in -100.0f64..100.0,
        ) {
            let a = softmax_exact(&v).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let b = softmax_exact(&shifted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((numeric::sum(a.iter().copied()) - 1.0).abs() < 1e-12);
            prop_assert!(a.iter().all(|&p| p > 0.0 && p <= 1.0));
        }
    }
}
