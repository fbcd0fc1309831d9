//! Monte Carlo runners: convergence curves, limit gaps, non-convergence
//! frequencies and pairwise distinguishability.
//!
//! Each trial draws one stream of `max(n_grid)` items and evaluates every
//! scorer on its prefixes, so all sizes within a trial lie on one sample
//! path and all scorers see the same labelled instances. Trials run on a
//! rayon pool and are merged in trial order; results do not depend on the
//! number of threads.

mod eval;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{check_grid, DistributionSpec, SampleStream, ScorerSpec};
use crate::discount::{Discount, FeasibilityClass};
use crate::error::{Error, Result};
use crate::limits::LimitResult;
use crate::metrics::TieBreak;

use crate::datagen::Sample;
use eval::{EvalScratch, PrefixEvaluator};

/// A discount plus the tie rule used when ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Measure {
    pub discount: Discount,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl Measure {
    pub fn new(discount: Discount) -> Self {
        Measure {
            discount,
            tie_break: TieBreak::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedScorer {
    pub name: String,
    #[serde(flatten)]
    pub spec: ScorerSpec,
}

impl NamedScorer {
    pub fn new(name: impl Into<String>, spec: ScorerSpec) -> Self {
        NamedScorer {
            name: name.into(),
            spec,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub master_seed: u64,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn seeded(master_seed: u64) -> Self {
        RunOptions {
            master_seed,
            threads: None,
        }
    }
}

/// `values[trial][scorer][grid index]`, `None` for degenerate prefixes.
pub type TrialValues = Vec<Vec<Vec<Option<f64>>>>;

/// Per-trial NDCG of every scorer on every prefix size.
pub fn ndcg_paths(
    world: &DistributionSpec,
    scorers: &[NamedScorer],
    measure: &Measure,
    n_grid: &[usize],
    trials: usize,
    opts: RunOptions,
) -> Result<TrialValues> {
    check_grid(n_grid)?;
    if scorers.is_empty() {
        return Err(Error::invalid("at least one scorer is required"));
    }
    for s in scorers {
        s.spec.validate()?;
    }
    let specs: Vec<ScorerSpec> = scorers.iter().map(|s| s.spec.clone()).collect();
    let ev = PrefixEvaluator::new(
        &measure.discount,
        measure.tie_break,
        world.grade_set(),
        n_grid,
    );
    let max = *n_grid.last().unwrap();
    let stream = SampleStream::new(opts.master_seed, world, &specs);
    let run_trial = |(sample, scratch): &mut (Sample, EvalScratch), t: usize| {
        stream
            .clone()
            .for_trial(t as u64)
            .generate_range_into(0, max, sample);
        sample
            .scores
            .iter()
            .map(|scores| ev.evaluate(scores, &sample.grades, scratch))
            .collect::<Vec<_>>()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map_init(|| (Sample::default(), EvalScratch::default()), run_trial)
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub scorer: String,
    pub mean: f64,
    pub sd: f64,
    /// 95% normal half-width, `1.96 sd / sqrt(trials)`.
    pub ci: f64,
    /// Trials that contributed (degenerate prefixes excluded).
    pub trials: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Summary {
    mean: f64,
    sd: f64,
    used: usize,
    skipped: usize,
}

fn summarize(values: impl Iterator<Item = Option<f64>>) -> Summary {
    let mut xs = Vec::new();
    let mut skipped = 0;
    for v in values {
        match v {
            Some(x) => xs.push(x),
            None => skipped += 1,
        }
    }
    let used = xs.len();
    let mean = if used > 0 {
        xs.iter().sum::<f64>() / used as f64
    } else {
        f64::NAN
    };
    let sd = if used > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (used - 1) as f64).sqrt()
    } else {
        0.0
    };
    Summary {
        mean,
        sd,
        used,
        skipped,
    }
}

pub const MIN_CURVE_TRIALS: usize = 30;

/// Mean NDCG per (scorer, n) over independent trials.
pub fn convergence_curve(
    world: &DistributionSpec,
    scorers: &[NamedScorer],
    measure: &Measure,
    n_grid: &[usize],
    trials: usize,
    opts: RunOptions,
) -> Result<Vec<CurvePoint>> {
    if trials < MIN_CURVE_TRIALS {
        return Err(Error::invalid(format!(
            "convergence curves need at least {MIN_CURVE_TRIALS} trials, got {trials}"
        )));
    }
    let paths = ndcg_paths(world, scorers, measure, n_grid, trials, opts)?;
    Ok(curve_from_paths(&paths, scorers, n_grid))
}

pub fn curve_from_paths(
    paths: &TrialValues,
    scorers: &[NamedScorer],
    n_grid: &[usize],
) -> Vec<CurvePoint> {
    let mut out = Vec::with_capacity(n_grid.len() * scorers.len());
    for (gi, &n) in n_grid.iter().enumerate() {
        for (si, scorer) in scorers.iter().enumerate() {
            let s = summarize(paths.iter().map(|t| t[si][gi]));
            out.push(CurvePoint {
                n,
                scorer: scorer.name.clone(),
                mean: s.mean,
                sd: s.sd,
                ci: if s.used > 0 {
                    1.96 * s.sd / (s.used as f64).sqrt()
                } else {
                    0.0
                },
                trials: s.used,
                skipped: s.skipped,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitGap {
    pub scorer: String,
    pub limit: f64,
    /// `(n, |mean(n) - limit|)` in grid order.
    pub residuals: Vec<(usize, f64)>,
    pub nonincreasing: bool,
}

/// Residuals of a scorer's curve against a closed-form limit.
pub fn limit_gap(points: &[CurvePoint], scorer: &str, limit: &LimitResult) -> Result<LimitGap> {
    let value = limit.value.ok_or_else(|| {
        Error::assumption(format!("{} gives no limit value", limit.theorem.tag()))
    })?;
    let residuals: Vec<(usize, f64)> = points
        .iter()
        .filter(|p| p.scorer == scorer)
        .map(|p| (p.n, (p.mean - value).abs()))
        .collect();
    let nonincreasing = residuals.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(LimitGap {
        scorer: scorer.to_string(),
        limit: value,
        residuals,
        nonincreasing,
    })
}

/// Geometric size grid for the distinguishability estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricGrid {
    pub n_min: usize,
    pub n_max: usize,
    #[serde(default = "default_points_per_decade")]
    pub points_per_decade: usize,
}

fn default_points_per_decade() -> usize {
    12
}

impl GeometricGrid {
    pub fn sizes(&self) -> Result<Vec<usize>> {
        if self.n_min == 0 || self.n_max < self.n_min || self.points_per_decade == 0 {
            return Err(Error::invalid(
                "grid needs 1 <= n_min <= n_max and points_per_decade >= 1",
            ));
        }
        let decades = (self.n_max as f64 / self.n_min as f64).log10();
        let steps = (decades * self.points_per_decade as f64 + 1e-9).floor() as usize;
        let mut out: Vec<usize> = (0..=steps)
            .map(|i| {
                let x = self.n_min as f64 * 10f64.powf(i as f64 / self.points_per_decade as f64);
                (x.round() as usize).clamp(self.n_min, self.n_max)
            })
            .collect();
        out.push(self.n_max);
        out.dedup();
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    F0,
    F1,
    Undecided,
}

impl Winner {
    pub fn as_str(self) -> &'static str {
        match self {
            Winner::F0 => "f0",
            Winner::F1 => "f1",
            Winner::Undecided => "undecided",
        }
    }
}

/// Share of trials one sign needs for a winner to be declared.
pub const MAJORITY: f64 = 0.55;

pub const MIN_DISTINGUISH_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishRow {
    #[serde(rename = "N")]
    pub n: usize,
    /// Trials whose sign of `NDCG(f0) - NDCG(f1)` changes somewhere on the
    /// grid at or beyond `N`. Ties are not sign changes.
    pub flip_rate: f64,
    /// Share of exact ties among all comparisons at or beyond `N`.
    pub ties: f64,
    /// Majority sign at `N`.
    pub winner: Winner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishReport {
    pub rows: Vec<DistinguishRow>,
    /// Majority sign at the largest grid size.
    pub winner: Winner,
    /// Least-squares slope of `ln flip_rate` against `ln N` over rows with
    /// positive flip rate, when there are at least two.
    pub decay_slope: Option<f64>,
    pub trials: usize,
    /// Comparisons where a prefix was degenerate; counted as ties.
    pub degenerate: usize,
}

/// Estimates how consistently `measure` orders the pair `[f0, f1]`.
pub fn distinguish(
    world: &DistributionSpec,
    pair: &[NamedScorer; 2],
    measure: &Measure,
    grid: GeometricGrid,
    trials: usize,
    opts: RunOptions,
) -> Result<DistinguishReport> {
    if trials < MIN_DISTINGUISH_TRIALS {
        return Err(Error::invalid(format!(
            "distinguishability needs at least {MIN_DISTINGUISH_TRIALS} trials, got {trials}"
        )));
    }
    let sizes = grid.sizes()?;
    let paths = ndcg_paths(world, pair, measure, &sizes, trials, opts)?;
    let mut degenerate = 0;
    // sign[t][g] in {-1, 0, 1}
    let signs: Vec<Vec<i8>> = paths
        .iter()
        .map(|t| {
            t[0].iter()
                .zip(&t[1])
                .map(|(a, b)| match (a, b) {
                    (Some(a), Some(b)) => match a.partial_cmp(b) {
                        Some(std::cmp::Ordering::Greater) => 1,
                        Some(std::cmp::Ordering::Less) => -1,
                        _ => 0,
                    },
                    _ => {
                        degenerate += 1;
                        0
                    }
                })
                .collect()
        })
        .collect();
    Ok(report_from_signs(&sizes, &signs, degenerate))
}

fn majority(signs: impl Iterator<Item = i8>, trials: usize) -> Winner {
    let (mut pos, mut neg) = (0usize, 0usize);
    for s in signs {
        match s {
            1 => pos += 1,
            -1 => neg += 1,
            _ => {}
        }
    }
    if pos as f64 >= MAJORITY * trials as f64 {
        Winner::F0
    } else if neg as f64 >= MAJORITY * trials as f64 {
        Winner::F1
    } else {
        Winner::Undecided
    }
}

fn report_from_signs(sizes: &[usize], signs: &[Vec<i8>], degenerate: usize) -> DistinguishReport {
    let trials = signs.len();
    let g = sizes.len();
    let rows: Vec<DistinguishRow> = (0..g)
        .map(|start| {
            let mut flips = 0;
            let mut ties = 0;
            for t in signs {
                let tail = &t[start..];
                ties += tail.iter().filter(|&&s| s == 0).count();
                if tail.contains(&1) && tail.contains(&-1) {
                    flips += 1;
                }
            }
            DistinguishRow {
                n: sizes[start],
                flip_rate: flips as f64 / trials as f64,
                ties: ties as f64 / (trials * (g - start)) as f64,
                winner: majority(signs.iter().map(|t| t[start]), trials),
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.flip_rate > 0.0)
        .map(|r| ((r.n as f64).ln(), r.flip_rate.ln()))
        .collect();
    let decay_slope = (pts.len() >= 2).then(|| {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    DistinguishReport {
        winner: rows.last().map_or(Winner::Undecided, |r| r.winner),
        rows,
        decay_slope,
        trials,
        degenerate,
    }
}

/// Event thresholds and the frequency floors they must clear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonconvergenceThresholds {
    pub theta_hi: f64,
    pub theta_lo: f64,
    pub floor_hi: f64,
    pub floor_lo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonconvergenceRow {
    pub n: usize,
    /// Share of trials with NDCG >= theta_hi.
    pub freq_high: f64,
    /// Share of trials with NDCG <= theta_lo.
    pub freq_low: f64,
    pub mean: f64,
    pub sd: f64,
    pub trials: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NonConvergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonconvergenceReport {
    pub scorer: String,
    pub thresholds: NonconvergenceThresholds,
    pub rows: Vec<NonconvergenceRow>,
    /// `NonConvergent` iff both frequencies clear their floors at the two
    /// largest sizes.
    pub verdict: Verdict,
    /// Whether the spread at the largest size is at least the spread at the
    /// smallest size minus three standard errors.
    pub sd_not_shrinking: bool,
}

/// Frequencies of high and low NDCG values under a summable discount.
pub fn nonconvergence_test(
    world: &DistributionSpec,
    scorer: &NamedScorer,
    measure: &Measure,
    n_grid: &[usize],
    trials: usize,
    thresholds: NonconvergenceThresholds,
    opts: RunOptions,
) -> Result<NonconvergenceReport> {
    if measure.discount.classify().class != FeasibilityClass::Infeasible {
        return Err(Error::assumption(format!(
            "non-convergence needs a summable discount; {} is not",
            measure.discount
        )));
    }
    if world.min_conditional_ratio().is_none() {
        return Err(Error::assumption(
            "non-convergence needs a minimum conditional ratio delta on the world",
        ));
    }
    if trials < 2 {
        return Err(Error::invalid("non-convergence needs at least two trials"));
    }
    let paths = ndcg_paths(
        world,
        std::slice::from_ref(scorer),
        measure,
        n_grid,
        trials,
        opts,
    )?;
    let rows: Vec<NonconvergenceRow> = n_grid
        .iter()
        .enumerate()
        .map(|(gi, &n)| {
            let vals: Vec<Option<f64>> = paths.iter().map(|t| t[0][gi]).collect();
            let s = summarize(vals.iter().copied());
            let used = s.used.max(1) as f64;
            let hi = vals
                .iter()
                .flatten()
                .filter(|&&v| v >= thresholds.theta_hi)
                .count();
            let lo = vals
                .iter()
                .flatten()
                .filter(|&&v| v <= thresholds.theta_lo)
                .count();
            NonconvergenceRow {
                n,
                freq_high: hi as f64 / used,
                freq_low: lo as f64 / used,
                mean: s.mean,
                sd: s.sd,
                trials: s.used,
                skipped: s.skipped,
            }
        })
        .collect();
    let tail = &rows[rows.len().saturating_sub(2)..];
    let verdict = if tail
        .iter()
        .all(|r| r.freq_high > thresholds.floor_hi && r.freq_low > thresholds.floor_lo)
    {
        Verdict::NonConvergent
    } else {
        Verdict::Inconclusive
    };
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let se = |r: &NonconvergenceRow| r.sd / (2.0 * (r.trials.max(2) - 1) as f64).sqrt();
    let sd_not_shrinking = last.sd >= first.sd - 3.0 * se(first).hypot(se(last));
    Ok(NonconvergenceReport {
        scorer: scorer.name.clone(),
        thresholds,
        rows,
        verdict,
        sd_not_shrinking,
    })
}
