//! Discount functions `D(r)`, their partial sums and antiderivatives, the
//! offset logarithmic integral, and the feasibility classification.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_geometric, Tolerance};

/// Weight assigned to a rank position in a list of `n` items.
///
/// Implemented by [`Discount`]; the metrics are generic over it so that
/// rescaled or otherwise wrapped discounts can be plugged in.
pub trait DiscountFn {
    /// Weight of rank `r` (1-based) in a list of `n` items.
    fn weight(&self, r: usize, n: usize) -> f64;

    /// Number of leading ranks that carry weight in a list of `n` items.
    fn effective_len(&self, n: usize) -> usize {
        n
    }
}

/// Tail continuation of a tabulated discount beyond its last value.
#[derive(Debug, Clone, PartialEq)]
pub enum TailRule {
    /// `D(r) = D(m) * (m / r)^exponent` for `r > m`.
    Power { exponent: f64 },
    /// `D(r) = D(m) * ratio^(r - m)` for `r > m`.
    Geometric { ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomDiscount {
    values: Vec<f64>,
    tail: TailRule,
}

impl CustomDiscount {
    pub fn new(values: Vec<f64>, tail: TailRule) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("custom discount needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid(
                "custom discount values must be finite and positive",
            ));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid(
                "custom discount values must be nonincreasing",
            ));
        }
        match tail {
            TailRule::Power { exponent } if !(exponent > 0.0 && exponent.is_finite()) => {
                return Err(Error::invalid("power tail exponent must be positive"));
            }
            TailRule::Geometric { ratio } if !(ratio > 0.0 && ratio < 1.0) => {
                return Err(Error::invalid("geometric tail ratio must lie in (0, 1)"));
            }
            _ => {}
        }
        Ok(CustomDiscount { values, tail })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> &TailRule {
        &self.tail
    }

    fn last(&self) -> (f64, f64) {
        (self.values.len() as f64, *self.values.last().unwrap())
    }

    fn eval_real(&self, t: f64) -> f64 {
        let (m, vm) = self.last();
        if t <= 1.0 {
            return self.values[0];
        }
        if t < m {
            // linear interpolation between tabulated integer ranks
            let i = t.floor();
            let frac = t - i;
            let lo = self.values[i as usize - 1];
            let hi = self.values[i as usize];
            return lo + frac * (hi - lo);
        }
        match self.tail {
            TailRule::Power { exponent } => vm * (m / t).powf(exponent),
            TailRule::Geometric { ratio } => vm * ratio.powf(t - m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `1 / ln(1 + r)`, the standard discount.
    LogInverse,
    /// `r^-beta` with `beta` in (0, 1).
    Power {
        beta: f64,
    },
    /// `1 / r`.
    Zipfian,
    /// `base^-r` with `base > 1`.
    Exponential {
        base: f64,
    },
    Custom(CustomDiscount),
}

impl Family {
    pub fn power(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid(format!(
                "power discount needs beta in (0,1), got {beta}"
            )));
        }
        Ok(Family::Power { beta })
    }

    pub fn exponential(base: f64) -> Result<Self> {
        if !(base > 1.0 && base.is_finite()) {
            return Err(Error::invalid(format!(
                "exponential discount needs base > 1, got {base}"
            )));
        }
        Ok(Family::Exponential { base })
    }

    /// `D(r)` at an integer rank `r >= 1`.
    pub fn eval(&self, r: usize) -> f64 {
        debug_assert!(r >= 1);
        match self {
            Family::LogInverse => 1.0 / (r as f64).ln_1p(),
            Family::Power { beta } => (r as f64).powf(-beta),
            Family::Zipfian => 1.0 / r as f64,
            Family::Exponential { base } => base.powf(-(r as f64)),
            Family::Custom(c) => {
                if r <= c.values.len() {
                    c.values[r - 1]
                } else {
                    c.eval_real(r as f64)
                }
            }
        }
    }

    /// `D(t)` on the real line, `t >= 1`.
    pub fn eval_real(&self, t: f64) -> f64 {
        match self {
            Family::LogInverse => 1.0 / t.ln_1p(),
            Family::Power { beta } => t.powf(-beta),
            Family::Zipfian => 1.0 / t,
            Family::Exponential { base } => base.powf(-t),
            Family::Custom(c) => c.eval_real(t),
        }
    }

    /// `sum_{r=1}^{k} D(r)`.
    pub fn partial_sum(&self, k: usize) -> f64 {
        (1..=k).map(|r| self.eval(r)).sum()
    }

    /// `F(t) = integral_1^t D(s) ds`, closed form where one exists.
    pub fn antiderivative(&self, t: f64) -> Result<f64> {
        if !(t >= 1.0) {
            return Err(Error::invalid(format!(
                "antiderivative needs t >= 1, got {t}"
            )));
        }
        if t == 1.0 {
            return Ok(0.0);
        }
        Ok(match self {
            Family::Power { beta } => (t.powf(1.0 - beta) - 1.0) / (1.0 - beta),
            Family::Zipfian => t.ln(),
            Family::Exponential { base } => (1.0 / base - base.powf(-t)) / base.ln(),
            // integral_1^t ds / ln(1+s) = integral_2^{1+t} dtau / ln(tau)
            Family::LogInverse => li_offset(1.0 + t)? - li_offset(2.0)?,
            Family::Custom(_) => self.antiderivative_quadrature(t)?,
        })
    }

    /// `F(t)` by adaptive quadrature regardless of family.
    pub fn antiderivative_quadrature(&self, t: f64) -> Result<f64> {
        if !(t >= 1.0) {
            return Err(Error::invalid(format!(
                "antiderivative needs t >= 1, got {t}"
            )));
        }
        let tol = Tolerance::absolute(1e-10).with_rel(1e-14);
        Ok(integrate_geometric(|s| self.eval_real(s), 1.0, t, tol).value)
    }

    pub fn classify(&self) -> Feasibility {
        match self {
            Family::LogInverse | Family::Power { .. } => {
                Feasibility::exact(FeasibilityClass::Feasible)
            }
            Family::Zipfian => Feasibility::exact(FeasibilityClass::Borderline),
            Family::Exponential { .. } => Feasibility::exact(FeasibilityClass::Infeasible),
            Family::Custom(c) => classify_tail(c),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::LogInverse => "log",
            Family::Power { .. } => "power",
            Family::Zipfian => "zipfian",
            Family::Exponential { .. } => "exp",
            Family::Custom(_) => "custom",
        }
    }
}

/// Slack around the critical log-log slope of 1 inside which a tabulated
/// tail is reported as ambiguous.
const TAIL_SLOPE_MARGIN: f64 = 0.1;

// Heuristic: the local log-log slope of the tail between two far ranks,
// compared with the r^-1 and r^-(1+eps) envelopes.
fn classify_tail(c: &CustomDiscount) -> Feasibility {
    let r1 = (c.values.len() as f64).max(1e3) * 1e3;
    let r2 = r1 * 1e3;
    let d1 = c.eval_real(r1);
    let d2 = c.eval_real(r2);
    let slope = if d2 <= 0.0 {
        f64::INFINITY
    } else {
        -(d2 / d1).ln() / (r2 / r1).ln()
    };
    let (class, warning) = if slope < 1.0 - TAIL_SLOPE_MARGIN {
        (FeasibilityClass::Feasible, None)
    } else if slope > 1.0 + TAIL_SLOPE_MARGIN {
        (FeasibilityClass::Infeasible, None)
    } else {
        (
            FeasibilityClass::Borderline,
            Some(format!(
                "ambiguous tail: log-log slope {slope:.4} is within {TAIL_SLOPE_MARGIN} of 1"
            )),
        )
    };
    Feasibility {
        class,
        heuristic: true,
        tail_slope: Some(slope),
        warning,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityClass {
    Feasible,
    Borderline,
    Infeasible,
}

impl fmt::Display for FeasibilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeasibilityClass::Feasible => "feasible",
            FeasibilityClass::Borderline => "borderline",
            FeasibilityClass::Infeasible => "infeasible",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    pub class: FeasibilityClass,
    /// True when the class came from the numeric tail test rather than
    /// from the family.
    pub heuristic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl Feasibility {
    fn exact(class: FeasibilityClass) -> Self {
        Feasibility {
            class,
            heuristic: false,
            tail_slope: None,
            warning: None,
        }
    }
}

/// Resolves the cut-off rank `k(n)` for a dataset of size `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutoffRule {
    FixedK(usize),
    /// `k = ceil(c * n)`.
    LinearFraction(f64),
    /// `k = ceil(n^gamma)`.
    SublinearPower(f64),
}

impl CutoffRule {
    pub fn fixed(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("fixed cutoff needs k >= 1"));
        }
        Ok(CutoffRule::FixedK(k))
    }

    pub fn linear(c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::invalid(format!(
                "linear cutoff needs c in (0,1), got {c}"
            )));
        }
        Ok(CutoffRule::LinearFraction(c))
    }

    pub fn sublinear(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::invalid(format!(
                "sublinear cutoff needs gamma in (0,1), got {gamma}"
            )));
        }
        Ok(CutoffRule::SublinearPower(gamma))
    }

    /// `k(n)`, at least 1. Not clamped to `n`.
    pub fn resolve(&self, n: usize) -> usize {
        // the small shave keeps products like 0.2 * 100 from ceiling to 21
        let ceil = |x: f64| (x * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        match *self {
            CutoffRule::FixedK(k) => k,
            CutoffRule::LinearFraction(c) => ceil(c * n as f64),
            CutoffRule::SublinearPower(gamma) => ceil((n as f64).powf(gamma)),
        }
    }
}

/// A discount family with an optional cut-off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiscountConfig", into = "DiscountConfig")]
pub struct Discount {
    pub family: Family,
    pub cutoff: Option<CutoffRule>,
}

impl Discount {
    pub fn new(family: Family) -> Self {
        Discount {
            family,
            cutoff: None,
        }
    }

    pub fn log() -> Self {
        Discount::new(Family::LogInverse)
    }

    pub fn zipfian() -> Self {
        Discount::new(Family::Zipfian)
    }

    pub fn power(beta: f64) -> Result<Self> {
        Family::power(beta).map(Discount::new)
    }

    pub fn exponential(base: f64) -> Result<Self> {
        Family::exponential(base).map(Discount::new)
    }

    pub fn with_cutoff(mut self, cutoff: CutoffRule) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    /// Number of ranks with nonzero weight in a list of `n` items.
    pub fn cutoff_at(&self, n: usize) -> usize {
        match self.cutoff {
            Some(rule) => rule.resolve(n).min(n),
            None => n,
        }
    }

    /// `D(r)` for a dataset of size `n`; zero beyond the cut-off.
    pub fn eval(&self, r: usize, n: usize) -> f64 {
        assert!(r >= 1, "ranks are 1-based");
        match self.cutoff {
            Some(rule) if r > rule.resolve(n) => 0.0,
            _ => self.family.eval(r),
        }
    }

    /// `sum_{r=1}^{k} D(r)` of the underlying family.
    pub fn partial_sum(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::invalid("partial sum needs k >= 1"));
        }
        if let Some(CutoffRule::FixedK(k0)) = self.cutoff {
            if k0 < k {
                return Err(Error::invalid(format!(
                    "cutoff at {k0} is active below k = {k}"
                )));
            }
        }
        Ok(self.family.partial_sum(k))
    }

    pub fn antiderivative(&self, t: f64) -> Result<f64> {
        if self.cutoff.is_some() {
            return Err(Error::invalid(
                "antiderivative is defined for discounts without a cutoff",
            ));
        }
        self.family.antiderivative(t)
    }

    pub fn classify(&self) -> Feasibility {
        match self.cutoff {
            // a constant cutoff leaves a bounded partial sum
            Some(CutoffRule::FixedK(_)) => Feasibility::exact(FeasibilityClass::Infeasible),
            _ => self.family.classify(),
        }
    }

    /// Whether `sum_r D(r)` stays bounded as `n` grows.
    pub fn is_summable(&self) -> bool {
        self.classify().class == FeasibilityClass::Infeasible
    }

    /// `D(1), ..., D(len)` of the family, ignoring the cut-off.
    pub fn table(&self, len: usize) -> Vec<f64> {
        (1..=len).map(|r| self.family.eval(r)).collect()
    }
}

impl DiscountFn for Discount {
    fn weight(&self, r: usize, n: usize) -> f64 {
        self.eval(r, n)
    }

    fn effective_len(&self, n: usize) -> usize {
        self.cutoff_at(n)
    }
}

impl fmt::Display for Discount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::LogInverse => write!(f, "1/ln(1+r)")?,
            Family::Power { beta } => write!(f, "r^-{beta}")?,
            Family::Zipfian => write!(f, "1/r")?,
            Family::Exponential { base } => write!(f, "{base}^-r")?,
            Family::Custom(c) => write!(f, "custom[{} values]", c.values.len())?,
        }
        match self.cutoff {
            Some(CutoffRule::FixedK(k)) => write!(f, " @k={k}"),
            Some(CutoffRule::LinearFraction(c)) => write!(f, " @k={c}n"),
            Some(CutoffRule::SublinearPower(g)) => write!(f, " @k=n^{g}"),
            None => Ok(()),
        }
    }
}

/// `li(t) = integral_2^t dtau / ln(tau)`, the offset logarithmic integral.
///
/// Absolute tolerance 1e-10, loosened to 1e-14 relative for large `t`
/// where the absolute target is below f64 resolution.
pub fn li_offset(t: f64) -> Result<f64> {
    if !(t >= 2.0) {
        return Err(Error::invalid(format!("li_offset needs t >= 2, got {t}")));
    }
    if t == 2.0 {
        return Ok(0.0);
    }
    let tol = Tolerance::absolute(1e-10).with_rel(1e-14);
    Ok(integrate_geometric(|x: f64| 1.0 / x.ln(), 2.0, t, tol).value)
}

// ---------------------------------------------------------------------------
// config representation

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscountConfig {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<CutoffConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

fn required<T>(value: Option<T>, field: &str, family: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("discount family `{family}` requires `{field}`")))
}

impl TryFrom<DiscountConfig> for Discount {
    type Error = Error;

    fn try_from(cfg: DiscountConfig) -> Result<Self> {
        let fam = cfg.family.as_str();
        let family = match fam {
            "log" => Family::LogInverse,
            "zipfian" => Family::Zipfian,
            "power" => Family::power(required(cfg.beta, "beta", fam)?)?,
            "exp" => Family::exponential(required(cfg.base, "base", fam)?)?,
            "custom" => {
                let values = required(cfg.values, "values", fam)?;
                let tail =
                    match (cfg.tail_exponent, cfg.tail_ratio) {
                        (Some(exponent), None) => TailRule::Power { exponent },
                        (None, Some(ratio)) => TailRule::Geometric { ratio },
                        _ => return Err(Error::Config(
                            "custom discount needs exactly one of `tail_exponent` or `tail_ratio`"
                                .into(),
                        )),
                    };
                Family::Custom(CustomDiscount::new(values, tail)?)
            }
            other => return Err(Error::Config(format!(
                "unknown discount family `{other}` (expected log, power, zipfian, exp or custom)"
            ))),
        };
        let cutoff =
            match cfg.cutoff {
                None => None,
                Some(c) => Some(match c.kind.as_str() {
                    "fixed" => CutoffRule::fixed(
                        c.k.ok_or_else(|| Error::Config("fixed cutoff requires `k`".into()))?,
                    )?,
                    "linear" => CutoffRule::linear(
                        c.c.ok_or_else(|| Error::Config("linear cutoff requires `c`".into()))?,
                    )?,
                    "sublinear" => CutoffRule::sublinear(c.gamma.ok_or_else(|| {
                        Error::Config("sublinear cutoff requires `gamma`".into())
                    })?)?,
                    other => {
                        return Err(Error::Config(format!(
                            "unknown cutoff kind `{other}` (expected fixed, linear or sublinear)"
                        )))
                    }
                }),
            };
        Ok(Discount { family, cutoff })
    }
}

impl From<Discount> for DiscountConfig {
    fn from(d: Discount) -> Self {
        let mut cfg = DiscountConfig {
            family: d.family.name().to_string(),
            beta: None,
            base: None,
            values: None,
            tail_exponent: None,
            tail_ratio: None,
            cutoff: None,
        };
        match d.family {
            Family::Power { beta } => cfg.beta = Some(beta),
            Family::Exponential { base } => cfg.base = Some(base),
            Family::Custom(c) => {
                match c.tail {
                    TailRule::Power { exponent } => cfg.tail_exponent = Some(exponent),
                    TailRule::Geometric { ratio } => cfg.tail_ratio = Some(ratio),
                }
                cfg.values = Some(c.values);
            }
            Family::LogInverse | Family::Zipfian => {}
        }
        cfg.cutoff = d.cutoff.map(|rule| {
            let mut c = CutoffConfig {
                kind: String::new(),
                k: None,
                c: None,
                gamma: None,
            };
            match rule {
                CutoffRule::FixedK(k) => {
                    c.kind = "fixed".into();
                    c.k = Some(k);
                }
                CutoffRule::LinearFraction(x) => {
                    c.kind = "linear".into();
                    c.c = Some(x);
                }
                CutoffRule::SublinearPower(g) => {
                    c.kind = "sublinear".into();
                    c.gamma = Some(g);
                }
            }
            c
        });
        cfg
    }
}
