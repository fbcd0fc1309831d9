//! Closed-form large-sample limits of NDCG and pseudo-expectations.
//!
//! Every function takes a [`DistributionSpec`] whose curves are the
//! conditional grade probabilities *on the scorer's canonical scale*: the
//! world's own curves for order-preserving scorers, or the output of
//! [`calibrate_scorer`](crate::datagen::calibrate_scorer) otherwise.
//!
//! Grades enter through their gains `v_j`, so `m(s) = sum_j v_j g_j(s)` is the
//! expected gain at canonical score `s` and `R_j` are the cumulative grade
//! masses from the top.

use serde::{Deserialize, Serialize};

use crate::datagen::{Curve, DistributionSpec};
use crate::discount::{CutoffRule, Discount, Family, FeasibilityClass};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_geometric, Quadrature, Tolerance};

const LIMIT_TOL: Tolerance = Tolerance {
    abs: 1e-12,
    rel: 1e-12,
    max_depth: 50,
};

/// The closed-form result a limit came from. Serialized as the short tags
/// `Thm1` .. `Thm13` used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitRule {
    /// Logarithmic discount: every scorer tends to 1.
    #[serde(rename = "Thm1")]
    LogDiscount,
    #[serde(rename = "Thm3")]
    PowerBinary,
    /// `r^-1`; the limit is the top-of-list expected gain.
    #[serde(rename = "Thm5")]
    Zipfian,
    /// Summable discount or constant cut-off: no limit exists.
    #[serde(rename = "Thm6")]
    NoLimit,
    #[serde(rename = "Thm7")]
    SublinearTopKBinary,
    #[serde(rename = "Thm8")]
    LinearTopKLogBinary,
    #[serde(rename = "Thm9")]
    LinearTopKPowerBinary,
    #[serde(rename = "Thm10")]
    PowerGraded,
    #[serde(rename = "Thm11")]
    SublinearTopKGraded,
    #[serde(rename = "Thm12")]
    LinearTopKLogGraded,
    #[serde(rename = "Thm13")]
    LinearTopKPowerGraded,
}

impl LimitRule {
    pub fn tag(self) -> &'static str {
        match self {
            LimitRule::LogDiscount => "Thm1",
            LimitRule::PowerBinary => "Thm3",
            LimitRule::Zipfian => "Thm5",
            LimitRule::NoLimit => "Thm6",
            LimitRule::SublinearTopKBinary => "Thm7",
            LimitRule::LinearTopKLogBinary => "Thm8",
            LimitRule::LinearTopKPowerBinary => "Thm9",
            LimitRule::PowerGraded => "Thm10",
            LimitRule::SublinearTopKGraded => "Thm11",
            LimitRule::LinearTopKLogGraded => "Thm12",
            LimitRule::LinearTopKPowerGraded => "Thm13",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitResult {
    /// `None` when NDCG has no limit.
    pub value: Option<f64>,
    pub theorem: LimitRule,
    pub assumptions: Vec<AssumptionCheck>,
    pub quadrature_error_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl LimitResult {
    pub fn is_limit(&self) -> bool {
        self.value.is_some()
    }
}

/// `(R_0, ..., R_|Y|)`: `R_0 = 0`, `R_j = Pr(Y >= y_j)`, `R_|Y| = 1`.
pub fn grade_masses(spec: &DistributionSpec) -> Vec<f64> {
    spec.grade_masses()
}

/// Binary in the sense of the two-grade results: two grades, the lower with
/// zero gain.
fn is_binary(spec: &DistributionSpec) -> bool {
    let v = spec.grade_set().gains();
    v.len() == 2 && v[1] == 0.0
}

struct Checklist(Vec<AssumptionCheck>);

impl Checklist {
    fn new() -> Self {
        Checklist(Vec::new())
    }

    fn check(&mut self, name: &str, passed: bool) -> Result<()> {
        self.0.push(AssumptionCheck {
            name: name.to_string(),
            passed,
        });
        if passed {
            Ok(())
        } else {
            Err(Error::assumption(name))
        }
    }

    /// Positive mass on every grade and a positive top gain; the curves are
    /// continuous by construction.
    fn common(spec: &DistributionSpec) -> Result<Self> {
        let mut c = Checklist::new();
        let p = spec.marginals();
        c.check(
            "every grade has positive probability",
            p.iter().all(|&pj| pj > 0.0),
        )?;
        c.check(
            "top grade has positive gain",
            spec.grade_set().gains()[0] > 0.0,
        )?;
        c.check("conditional grade curves are continuous", true)?;
        Ok(c)
    }
}

fn mean_gain(spec: &DistributionSpec) -> impl Fn(f64) -> f64 + '_ {
    move |s| spec.mean_gain(s)
}

/// `int_lo^hi f`, split at the curves' kinks.
fn integrate_split<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, mut breaks: Vec<f64>) -> Quadrature {
    breaks.retain(|&b| b > lo && b < hi);
    breaks.push(lo);
    breaks.push(hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut out = Quadrature {
        value: 0.0,
        error_estimate: 0.0,
        depth_exhausted: false,
        evaluations: 0,
    };
    for w in breaks.windows(2) {
        let q = integrate(&f, w[0], w[1], LIMIT_TOL);
        out.value += q.value;
        out.error_estimate += q.error_estimate;
        out.depth_exhausted |= q.depth_exhausted;
        out.evaluations += q.evaluations;
    }
    out
}

fn kinks(spec: &DistributionSpec) -> Vec<f64> {
    spec.curves().iter().flat_map(Curve::kinks).collect()
}

/// `(1 - beta) int_{1-c}^1 m(s) (1-s)^-beta ds` via `u = (1-s)^(1-beta)`,
/// which turns it into `int_0^{c^(1-beta)} m(1 - u^(1/(1-beta))) du`.
fn power_weighted_top(spec: &DistributionSpec, beta: f64, c: f64) -> Quadrature {
    let e = 1.0 - beta;
    let m = mean_gain(spec);
    let breaks = kinks(spec).into_iter().map(|s| (1.0 - s).powf(e)).collect();
    integrate_split(|u: f64| m(1.0 - u.powf(1.0 / e)), 0.0, c.powf(e), breaks)
}

/// `int_{1-c}^1 m(s) ds`.
fn plain_top(spec: &DistributionSpec, c: f64) -> Quadrature {
    integrate_split(mean_gain(spec), 1.0 - c, 1.0, kinks(spec))
}

/// `sum_{j<=t} v_j (h(R_j) - h(R_{j-1})) + v_{t+1} (h(c) - h(R_t))` with
/// `R_t < c <= R_{t+1}`; `c = 1` gives the full ideal mass.
fn ideal_mass(spec: &DistributionSpec, c: f64, h: impl Fn(f64) -> f64) -> f64 {
    let v = spec.grade_set().gains();
    let r = spec.grade_masses();
    let mut total = 0.0;
    for j in 1..r.len() {
        if r[j] < c {
            total += v[j - 1] * (h(r[j]) - h(r[j - 1]));
        } else {
            total += v[j - 1] * (h(c) - h(r[j - 1]));
            break;
        }
    }
    total
}

fn finish(
    value: f64,
    q: Option<Quadrature>,
    theorem: LimitRule,
    checks: Checklist,
    note: Option<String>,
) -> LimitResult {
    let mut note = note;
    if q.is_some_and(|q| q.depth_exhausted) {
        note = Some(
            note.map_or(String::new(), |n| n + "; ")
                + "quadrature hit its depth limit; the error bound is unreliable",
        );
    }
    LimitResult {
        value: Some(value),
        theorem,
        assumptions: checks.0,
        quadrature_error_bound: q.map_or(0.0, |q| q.error_estimate),
        note,
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "power discount needs beta in (0,1), got {beta}"
        )))
    }
}

/// Limit under `D(r) = r^-beta` with no cut-off.
pub fn limit_power(spec: &DistributionSpec, beta: f64) -> Result<LimitResult> {
    check_beta(beta)?;
    let checks = Checklist::common(spec)?;
    let e = 1.0 - beta;
    let q = power_weighted_top(spec, beta, 1.0);
    let denom = ideal_mass(spec, 1.0, |x| x.powf(e));
    let rule = if is_binary(spec) {
        LimitRule::PowerBinary
    } else {
        LimitRule::PowerGraded
    };
    Ok(finish(q.value / denom, Some(q), rule, checks, None))
}

/// `m(1) / v_1`: the limit under `r^-1`, and under any divergent discount
/// cut at `k = o(n)`.
fn top_value(spec: &DistributionSpec) -> f64 {
    spec.mean_gain(1.0) / spec.grade_set().gains()[0]
}

/// Limit under the Zipfian discount `1/r` with no cut-off.
pub fn limit_zipfian(spec: &DistributionSpec) -> Result<LimitResult> {
    let checks = Checklist::common(spec)?;
    let note = (!is_binary(spec)).then(|| "graded form E[gain | s = 1] / v_1".to_string());
    Ok(finish(
        top_value(spec),
        None,
        LimitRule::Zipfian,
        checks,
        note,
    ))
}

/// Limit of NDCG@k for `family` cut by `cutoff`.
pub fn limit_topk(
    spec: &DistributionSpec,
    family: &Family,
    cutoff: CutoffRule,
) -> Result<LimitResult> {
    let binary = is_binary(spec);
    match cutoff {
        CutoffRule::FixedK(k) => Err(Error::assumption(format!(
            "a constant cut-off (k = {k}) leaves a bounded discount sum, so NDCG@k has no limit"
        ))),
        CutoffRule::SublinearPower(_) => {
            let mut checks = Checklist::common(spec)?;
            checks.check(
                "discount sum diverges",
                family.classify().class != FeasibilityClass::Infeasible,
            )?;
            checks.check("cut-off grows without bound and k/n -> 0", true)?;
            let rule = if binary {
                LimitRule::SublinearTopKBinary
            } else {
                LimitRule::SublinearTopKGraded
            };
            Ok(finish(top_value(spec), None, rule, checks, None))
        }
        CutoffRule::LinearFraction(c) => {
            let mut checks = Checklist::common(spec)?;
            checks.check("cut-off fraction c lies in (0, 1)", c > 0.0 && c < 1.0)?;
            match *family {
                Family::LogInverse => {
                    let q = plain_top(spec, c);
                    let denom = ideal_mass(spec, c, |x| x);
                    let rule = if binary {
                        LimitRule::LinearTopKLogBinary
                    } else {
                        LimitRule::LinearTopKLogGraded
                    };
                    Ok(finish(q.value / denom, Some(q), rule, checks, None))
                }
                Family::Power { beta } => {
                    let q = power_weighted_top(spec, beta, c);
                    let denom = ideal_mass(spec, c, |x| x.powf(1.0 - beta));
                    let rule = if binary {
                        LimitRule::LinearTopKPowerBinary
                    } else {
                        LimitRule::LinearTopKPowerGraded
                    };
                    Ok(finish(q.value / denom, Some(q), rule, checks, None))
                }
                _ => Err(Error::assumption(format!(
                    "no closed form for a {} discount cut at k = c*n",
                    family.name()
                ))),
            }
        }
    }
}

fn no_limit(reason: String) -> LimitResult {
    LimitResult {
        value: None,
        theorem: LimitRule::NoLimit,
        assumptions: vec![AssumptionCheck {
            name: "discount sum diverges".into(),
            passed: false,
        }],
        quadrature_error_bound: 0.0,
        note: Some(reason),
    }
}

/// Picks the applicable closed form for `discount`.
///
/// Summable discounts and constant cut-offs give a `NoLimit` result rather
/// than an error.
pub fn limit(spec: &DistributionSpec, discount: &Discount) -> Result<LimitResult> {
    if let Some(CutoffRule::FixedK(k)) = discount.cutoff {
        return Ok(no_limit(format!(
            "constant cut-off k = {k}: the discount sum stays bounded, so NDCG@k keeps \
             fluctuating with the top labels and no limit exists"
        )));
    }
    if discount.is_summable() {
        return Ok(no_limit(format!(
            "summable discount {discount}: NDCG is dominated by the top few labels and \
             does not converge"
        )));
    }
    if let Some(cutoff) = discount.cutoff {
        return limit_topk(spec, &discount.family, cutoff);
    }
    match discount.family {
        Family::LogInverse => {
            let checks = Checklist::common(spec)?;
            Ok(finish(1.0, None, LimitRule::LogDiscount, checks, None))
        }
        Family::Power { beta } => limit_power(spec, beta),
        Family::Zipfian => limit_zipfian(spec),
        _ => Err(Error::assumption(format!(
            "no closed-form limit is known for the {} discount",
            discount.family.name()
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoExpectation {
    pub n: f64,
    /// `int_1^n ybar(1 - s/n) D(s) ds`.
    pub unnormalized: f64,
    /// `unnormalized / F(n p)`.
    pub normalized: f64,
    pub error_estimate: f64,
}

/// Quadrature surrogate for the expected NDCG at size `n`.
pub fn pseudo_expectation(ybar: &Curve, d: &Discount, n: f64, p: f64) -> Result<PseudoExpectation> {
    if !(n >= 2.0 && n.is_finite()) {
        return Err(Error::invalid(format!(
            "pseudo-expectation needs n >= 2, got {n}"
        )));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!(
            "pseudo-expectation needs p in (0, 1], got {p}"
        )));
    }
    if d.cutoff.is_some() {
        return Err(Error::invalid(
            "pseudo-expectation is defined for discounts without a cutoff",
        ));
    }
    if d.is_summable() {
        return Err(Error::assumption(format!(
            "pseudo-expectation needs a divergent discount sum; {d} is summable"
        )));
    }
    if n * p < 1.0 {
        return Err(Error::invalid(format!("n * p = {} is below 1", n * p)));
    }
    let tol = Tolerance::relative(1e-8);
    let f = |s: f64| ybar.eval(1.0 - s / n) * d.family.eval_real(s);
    let mut breaks: Vec<f64> = ybar
        .kinks()
        .into_iter()
        .map(|k| n * (1.0 - k))
        .filter(|&s| s > 1.0 && s < n)
        .collect();
    breaks.push(1.0);
    breaks.push(n);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut value = 0.0;
    let mut err = 0.0;
    for w in breaks.windows(2) {
        let q = integrate_geometric(f, w[0], w[1], tol);
        value += q.value;
        err += q.error_estimate;
    }
    let denom = d.family.antiderivative(n * p)?;
    Ok(PseudoExpectation {
        n,
        unnormalized: value,
        normalized: value / denom,
        error_estimate: err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{Gain, GradeSet};

    fn binary(c: Curve) -> DistributionSpec {
        DistributionSpec::binary(c).unwrap()
    }

    #[test]
    fn masses() {
        assert_eq!(
            grade_masses(&binary(Curve::affine(0.0, 1.0))),
            vec![0.0, 0.5, 1.0]
        );
        let gs = GradeSet::new(vec![2.0, 1.0, 0.0], Gain::Identity).unwrap();
        let s =
            DistributionSpec::new(gs, vec![Curve::constant(0.2), Curve::constant(0.3)]).unwrap();
        let r = grade_masses(&s);
        assert!((r[1] - 0.2).abs() < 1e-15 && (r[2] - 0.5).abs() < 1e-15 && r[3] == 1.0);
        let gs = GradeSet::new(vec![3.0, 2.0, 1.0, 0.0], Gain::Identity).unwrap();
        let q = Curve::constant(0.25);
        let s = DistributionSpec::new(gs, vec![q.clone(), q.clone(), q]).unwrap();
        assert_eq!(grade_masses(&s), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn power_limit_for_identity_curve() {
        let r = limit_power(&binary(Curve::affine(0.0, 1.0)), 0.5).unwrap();
        assert!((r.value.unwrap() - 2.0 * 2f64.sqrt() / 3.0).abs() < 1e-9);
        assert_eq!(r.theorem.tag(), "Thm3");
        assert!(r.assumptions.iter().all(|a| a.passed));
    }

    #[test]
    fn power_limit_for_constant_curve() {
        // (1-beta) p / (1-beta) / p^(1-beta) = p^beta
        for (p, beta) in [(0.3, 0.5), (0.5, 0.2), (0.8, 0.9)] {
            let r = limit_power(&binary(Curve::constant(p)), beta).unwrap();
            assert!((r.value.unwrap() - f64::powf(p, beta)).abs() < 1e-9);
        }
    }

    #[test]
    fn ideal_curve_attains_one() {
        let p = 0.3;
        let ideal = Curve::piecewise_linear(vec![
            (0.0, 0.0),
            (1.0 - p, 0.0),
            (1.0 - p + 1e-9, 1.0),
            (1.0, 1.0),
        ])
        .unwrap();
        let w = binary(ideal);
        for beta in [0.2, 0.5, 0.8] {
            assert!((limit_power(&w, beta).unwrap().value.unwrap() - 1.0).abs() < 1e-6);
            for c in [0.1, 0.3, 0.6] {
                let v = limit_topk(&w, &Family::Power { beta }, CutoffRule::LinearFraction(c))
                    .unwrap()
                    .value
                    .unwrap();
                assert!((v - 1.0).abs() < 1e-6, "beta {beta} c {c}: {v}");
            }
        }
        for c in [0.1, 0.3, 0.6] {
            let v = limit_topk(&w, &Family::LogInverse, CutoffRule::LinearFraction(c)).unwrap();
            assert!((v.value.unwrap() - 1.0).abs() < 1e-6);
        }
        assert_eq!(limit_zipfian(&w).unwrap().value, Some(1.0));
    }

    #[test]
    fn zipfian_examples() {
        assert_eq!(
            limit_zipfian(&binary(Curve::affine(0.0, 1.0)))
                .unwrap()
                .value,
            Some(1.0)
        );
        let r = limit_zipfian(&binary(Curve::affine(0.3, 0.4))).unwrap();
        assert!((r.value.unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(r.theorem.tag(), "Thm5");
        assert_eq!(
            limit_zipfian(&binary(Curve::constant(0.4))).unwrap().value,
            Some(0.4)
        );
    }

    #[test]
    fn topk_examples() {
        let w = binary(Curve::affine(0.0, 1.0));
        let r = limit_topk(&w, &Family::LogInverse, CutoffRule::LinearFraction(0.2)).unwrap();
        assert!((r.value.unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(r.theorem.tag(), "Thm8");
        let r = limit_topk(&w, &Family::LogInverse, CutoffRule::SublinearPower(0.5)).unwrap();
        assert_eq!(r.value, Some(1.0));
        assert_eq!(r.theorem.tag(), "Thm7");
        assert!(matches!(
            limit_topk(&w, &Family::LogInverse, CutoffRule::FixedK(10)),
            Err(Error::AssumptionViolated(_))
        ));
        assert!(limit_topk(&w, &Family::Zipfian, CutoffRule::LinearFraction(0.2)).is_err());
        assert!(limit_topk(
            &w,
            &Family::Exponential { base: 2.0 },
            CutoffRule::SublinearPower(0.5)
        )
        .is_err());
    }

    #[test]
    fn power_topk_constant_curve() {
        // c >= p: (1-beta) p int_{1-c}^1 (1-s)^-beta / p^(1-beta) = p^beta c^(1-beta)
        let (p, beta, c) = (0.3, 0.5, 0.6);
        let w = binary(Curve::constant(p));
        let v = limit_topk(&w, &Family::Power { beta }, CutoffRule::LinearFraction(c))
            .unwrap()
            .value
            .unwrap();
        assert!((v - p.powf(beta) * c.powf(1.0 - beta)).abs() < 1e-9);
        // c < p: denominator c^(1-beta), limit p
        let v = limit_topk(&w, &Family::Power { beta }, CutoffRule::LinearFraction(0.1))
            .unwrap()
            .value
            .unwrap();
        assert!((v - p).abs() < 1e-9);
    }

    #[test]
    fn linear_topk_approaches_full_limit() {
        let w = binary(Curve::affine(0.1, 0.6));
        for beta in [0.3, 0.5, 0.7] {
            let full = limit_power(&w, beta).unwrap().value.unwrap();
            let cut = limit_topk(
                &w,
                &Family::Power { beta },
                CutoffRule::LinearFraction(0.999),
            )
            .unwrap()
            .value
            .unwrap();
            assert!((full - cut).abs() < 5e-3);
        }
        let cut = limit_topk(&w, &Family::LogInverse, CutoffRule::LinearFraction(0.999)).unwrap();
        // full log limit is 1 and the cut form is p / min(c, p) * mean = 1 as c -> 1
        assert!((cut.value.unwrap() - 1.0).abs() < 5e-3);
    }

    #[test]
    fn graded_power_limit_matches_direct_formula() {
        let gs = GradeSet::new(vec![2.0, 1.0, 0.0], Gain::Identity).unwrap();
        let w = DistributionSpec::new(gs, vec![Curve::affine(0.0, 0.4), Curve::affine(0.2, 0.2)])
            .unwrap();
        let beta: f64 = 0.5;
        // m(s) = 2 * 0.4 s + (0.2 + 0.2 s) = 0.2 + s
        // (1-beta) int (0.2 + s)(1-s)^-1/2 = 0.5 (0.4 + 4/3)
        let num = 0.5 * (0.4 + 4.0 / 3.0);
        let (r1, r2) = (0.2f64, 0.5f64);
        let den = 2.0 * r1.sqrt() + (r2.sqrt() - r1.sqrt());
        let r = limit_power(&w, beta).unwrap();
        assert!((r.value.unwrap() - num / den).abs() < 1e-9);
        assert_eq!(r.theorem.tag(), "Thm10");

        // Thm12 at c = 0.3: t = 1, num int_{0.7}^1 (0.2 + s) = 0.06 + 0.255
        let v = limit_topk(&w, &Family::LogInverse, CutoffRule::LinearFraction(0.3)).unwrap();
        let den = 2.0 * 0.2 + 1.0 * (0.3 - 0.2);
        assert!((v.value.unwrap() - 0.315 / den).abs() < 1e-12);
        assert_eq!(v.theorem.tag(), "Thm12");

        let z = limit_zipfian(&w).unwrap();
        assert!((z.value.unwrap() - 1.2 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn graded_rescaling() {
        // doubling every gain leaves the ratio unchanged
        let curves = vec![Curve::affine(0.1, 0.3), Curve::affine(0.3, -0.1)];
        let a = DistributionSpec::new(
            GradeSet::new(vec![2.0, 1.0, 0.0], Gain::Identity).unwrap(),
            curves.clone(),
        )
        .unwrap();
        let b = DistributionSpec::new(
            GradeSet::new(vec![4.0, 2.0, 0.0], Gain::Identity).unwrap(),
            curves,
        )
        .unwrap();
        for beta in [0.25, 0.75] {
            let va = limit_power(&a, beta).unwrap().value.unwrap();
            let vb = limit_power(&b, beta).unwrap().value.unwrap();
            assert!((va - vb).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mass_grade_is_rejected() {
        let gs = GradeSet::new(vec![2.0, 1.0, 0.0], Gain::Identity).unwrap();
        let w =
            DistributionSpec::new(gs, vec![Curve::affine(0.0, 0.5), Curve::constant(0.0)]).unwrap();
        assert!(matches!(
            limit_power(&w, 0.5),
            Err(Error::AssumptionViolated(_))
        ));
        assert!(matches!(
            limit_zipfian(&binary(Curve::constant(0.0))),
            Err(Error::AssumptionViolated(_))
        ));
    }

    #[test]
    fn dispatcher() {
        let w = binary(Curve::affine(0.0, 1.0));
        assert_eq!(limit(&w, &Discount::log()).unwrap().theorem.tag(), "Thm1");
        let r = limit(&w, &Discount::exponential(2.0).unwrap()).unwrap();
        assert_eq!((r.value, r.theorem.tag()), (None, "Thm6"));
        let r = limit(&w, &Discount::log().with_cutoff(CutoffRule::FixedK(10))).unwrap();
        assert_eq!((r.value, r.theorem.tag()), (None, "Thm6"));
        assert!(r.note.unwrap().contains("k = 10"));
        let r = limit(&w, &Discount::power(0.5).unwrap()).unwrap();
        assert_eq!(r.theorem, LimitRule::PowerBinary);
        assert_eq!(serde_json::to_string(&r.theorem).unwrap(), "\"Thm3\"");
    }

    // Gauss-Legendre on log-spaced panels, independent of the adaptive rule.
    fn gauss_oracle(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        const X: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let panels = 4000;
        let (la, lb) = (a.ln(), b.ln());
        let h = (lb - la) / panels as f64;
        let mut total = 0.0;
        for i in 0..panels {
            let mid = la + (i as f64 + 0.5) * h;
            for (x, w) in X.iter().zip(W) {
                let t = mid + 0.5 * h * x;
                let s = t.exp();
                total += w * 0.5 * h * f(s) * s;
            }
        }
        total
    }

    #[test]
    fn pseudo_expectation_examples() {
        let d = Discount::log();
        let one = pseudo_expectation(&Curve::constant(1.0), &d, 1e4, 0.5).unwrap();
        let f = d.antiderivative(1e4).unwrap();
        assert!((one.unnormalized - f).abs() < 1e-8 * f);

        let y = Curve::affine(0.0, 1.0);
        let pe = pseudo_expectation(&y, &d, 1e4, 0.5).unwrap();
        let oracle = gauss_oracle(|s| (1.0 - s / 1e4) / s.ln_1p(), 1.0, 1e4);
        assert!(
            (pe.unnormalized - oracle).abs() < 1e-6,
            "{} vs {oracle}",
            pe.unnormalized
        );
        assert!(pe.normalized <= 1.0 + d.family.eval(1) / d.antiderivative(5e3).unwrap());

        let mut prev = 0.0;
        let mut last = 0.0;
        for k in 3..=7 {
            let n = 10f64.powi(k);
            let v = pseudo_expectation(&y, &d, n, 0.5).unwrap().normalized;
            assert!(v + 1e-3 >= prev, "n = {n}: {v} after {prev}");
            prev = v;
            last = v;
        }
        assert!(
            (last - 1.0).abs()
                < (pseudo_expectation(&y, &d, 1e3, 0.5).unwrap().normalized - 1.0).abs()
        );

        assert!(matches!(
            pseudo_expectation(&y, &Discount::exponential(2.0).unwrap(), 1e3, 0.5),
            Err(Error::AssumptionViolated(_))
        ));
    }
}
