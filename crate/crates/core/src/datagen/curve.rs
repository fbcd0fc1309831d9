use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A function on `[0, 1]`, used for the conditional grade probabilities
/// `g_j(s) = Pr(Y = y_j | canonical score = s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Curve {
    /// `intercept + slope * s`
    Affine { intercept: f64, slope: f64 },
    /// Linear interpolation through `(s, value)` knots; the first knot sits
    /// at `s = 0`, the last at `s = 1`, abscissae strictly increasing.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    /// `sum_k coeffs[k] * s^k`
    Polynomial { coeffs: Vec<f64> },
    /// `1 - sum of the listed curves`.
    Complement { of: Vec<Curve> },
}

impl Curve {
    pub fn constant(value: f64) -> Self {
        Curve::Affine {
            intercept: value,
            slope: 0.0,
        }
    }

    pub fn affine(intercept: f64, slope: f64) -> Self {
        Curve::Affine { intercept, slope }
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        let c = Curve::PiecewiseLinear { knots };
        c.validate_shape()?;
        Ok(c)
    }

    pub fn complement(of: Vec<Curve>) -> Self {
        Curve::Complement { of }
    }

    pub(crate) fn validate_shape(&self) -> Result<()> {
        match self {
            Curve::Affine { intercept, slope } => {
                if !intercept.is_finite() || !slope.is_finite() {
                    return Err(Error::invalid("affine curve parameters must be finite"));
                }
            }
            Curve::PiecewiseLinear { knots } => {
                if knots.len() < 2 {
                    return Err(Error::invalid(
                        "piecewise-linear curve needs at least two knots",
                    ));
                }
                if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
                    return Err(Error::invalid(
                        "piecewise-linear knots must span exactly [0, 1]",
                    ));
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::invalid(
                        "piecewise-linear knots must be strictly increasing in s",
                    ));
                }
                if knots.iter().any(|k| !k.1.is_finite()) {
                    return Err(Error::invalid("piecewise-linear values must be finite"));
                }
            }
            Curve::Polynomial { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::invalid("polynomial needs finite coefficients"));
                }
            }
            Curve::Complement { of } => {
                for c in of {
                    c.validate_shape()?;
                }
            }
        }
        Ok(())
    }

    /// Value at `s`, clamped into `[0, 1]`.
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match self {
            Curve::Affine { intercept, slope } => intercept + slope * s,
            Curve::PiecewiseLinear { knots } => {
                let i = knots.partition_point(|k| k.0 <= s);
                if i == 0 {
                    return knots[0].1;
                }
                if i == knots.len() {
                    return knots[i - 1].1;
                }
                let (s0, v0) = knots[i - 1];
                let (s1, v1) = knots[i];
                v0 + (s - s0) / (s1 - s0) * (v1 - v0)
            }
            Curve::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c),
            Curve::Complement { of } => 1.0 - of.iter().map(|c| c.eval(s)).sum::<f64>(),
        }
    }

    /// `integral_0^1 curve(s) ds`, exact for every family.
    pub fn integral(&self) -> f64 {
        match self {
            Curve::Affine { intercept, slope } => intercept + 0.5 * slope,
            Curve::PiecewiseLinear { knots } => knots
                .windows(2)
                .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
                .sum(),
            Curve::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c / (k + 1) as f64)
                .sum(),
            Curve::Complement { of } => 1.0 - of.iter().map(Curve::integral).sum::<f64>(),
        }
    }

    /// Abscissae where the curve may have a kink.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Curve::PiecewiseLinear { knots } => knots.iter().map(|k| k.0).collect(),
            Curve::Complement { of } => of.iter().flat_map(Curve::kinks).collect(),
            _ => Vec::new(),
        }
    }
}
