//! Synthetic i.i.d. (score, grade) streams and click-log ingestion.
//!
//! Instances are drawn directly on the canonical scale: `s ~ U[0, 1]` is the
//! canonical score of the instance, its grade is drawn from the conditional
//! probabilities `g_j(s)`, and each scorer turns `s` (plus, for noisy
//! scorers, its own fresh randomness) into a score. All scorers see the same
//! `(s, y)` pairs.
//!
//! Randomness is addressed by `(master_seed, trial, lane, item index)`:
//! ChaCha8 keyed by the master seed, one stream per `(trial, lane)`, and a
//! fixed number of words per item. Any index range can be generated on its
//! own and prefixes of a stream are prefixes of longer streams.

mod clicklog;
mod curve;

pub use clicklog::{
    grade_for_clicks, ingest_click_log, read_click_log, ClickThresholds, QueryDataset,
};
pub use curve::Curve;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{rank_indices, Dataset, GradeSet, TieBreak};

/// Largest stream length handed out by [`sample_prefixes`].
pub const MAX_STREAM_LEN: usize = 100_000_000;

const GRID_POINTS: usize = 10_000;
const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Holder {
    pub alpha: f64,
    pub c: f64,
}

/// Joint law of (canonical score, grade).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionConfig", into = "DistributionConfig")]
pub struct DistributionSpec {
    grade_set: GradeSet,
    /// One curve per grade, best grade first.
    curves: Vec<Curve>,
    holder: Option<Holder>,
    min_conditional_ratio: Option<f64>,
    marginals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionConfig {
    #[serde(default = "default_grades")]
    pub grades: Vec<f64>,
    #[serde(default)]
    pub gain: crate::metrics::Gain,
    /// Either one curve per grade, or one per grade except the lowest, which
    /// then takes the remaining probability.
    pub curves: Vec<Curve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder: Option<Holder>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

fn default_grades() -> Vec<f64> {
    vec![1.0, 0.0]
}

impl TryFrom<DistributionConfig> for DistributionSpec {
    type Error = Error;

    fn try_from(c: DistributionConfig) -> Result<Self> {
        let gs = GradeSet::new(c.grades, c.gain)?;
        let mut spec = DistributionSpec::new(gs, c.curves)?;
        if let Some(h) = c.holder {
            spec = spec.with_holder(h)?;
        }
        if let Some(d) = c.delta {
            spec = spec.with_min_conditional_ratio(d)?;
        }
        Ok(spec)
    }
}

impl From<DistributionSpec> for DistributionConfig {
    fn from(s: DistributionSpec) -> Self {
        let mut curves = s.curves;
        // the lowest grade is written back in its compact form
        if matches!(curves.last(), Some(Curve::Complement { of }) if *of == curves[..curves.len() - 1])
        {
            curves.pop();
        }
        DistributionConfig {
            grades: s.grade_set.grades().to_vec(),
            gain: s.grade_set.gain_kind(),
            curves,
            holder: s.holder,
            delta: s.min_conditional_ratio,
        }
    }
}

impl DistributionSpec {
    /// `curves` lists `g_1, ..., g_|Y|` best grade first, or omits the last,
    /// which is then `1 - sum(others)`.
    pub fn new(grade_set: GradeSet, mut curves: Vec<Curve>) -> Result<Self> {
        let m = grade_set.len();
        if curves.len() + 1 == m {
            curves.push(Curve::complement(curves.clone()));
        }
        if curves.len() != m {
            return Err(Error::invalid(format!(
                "{} grades need {} or {} curves, got {}",
                m,
                m - 1,
                m,
                curves.len()
            )));
        }
        for c in &curves {
            c.validate_shape()?;
        }
        for i in 0..=GRID_POINTS {
            let s = i as f64 / GRID_POINTS as f64;
            let mut total = 0.0;
            for (j, c) in curves.iter().enumerate() {
                let g = c.eval(s);
                if !(-SUM_TOLERANCE..=1.0 + SUM_TOLERANCE).contains(&g) {
                    return Err(Error::invalid(format!(
                        "conditional probability of grade {} is {g} at s = {s}",
                        grade_set.grades()[j]
                    )));
                }
                total += g;
            }
            if (total - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::invalid(format!(
                    "conditional probabilities sum to {total} at s = {s}"
                )));
            }
        }
        let marginals = curves.iter().map(Curve::integral).collect();
        Ok(DistributionSpec {
            grade_set,
            curves,
            holder: None,
            min_conditional_ratio: None,
            marginals,
        })
    }

    /// Binary grades `{1, 0}` with `Pr(Y = 1 | s) = curve(s)`.
    pub fn binary(curve: Curve) -> Result<Self> {
        DistributionSpec::new(GradeSet::binary(), vec![curve])
    }

    /// Records Hölder constants after spot-checking them on random pairs.
    pub fn with_holder(mut self, h: Holder) -> Result<Self> {
        if !(h.alpha > 0.0 && h.alpha <= 1.0 && h.c > 0.0) {
            return Err(Error::invalid(
                "Hölder constants need alpha in (0,1] and C > 0",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f40_1de7);
        for _ in 0..2000 {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            if a == b {
                continue;
            }
            let bound = h.c * (a - b).abs().powf(h.alpha) + 1e-12;
            for c in &self.curves {
                if (c.eval(a) - c.eval(b)).abs() > bound {
                    return Err(Error::invalid(format!(
                        "Hölder condition (alpha = {}, C = {}) fails between s = {a} and s = {b}",
                        h.alpha, h.c
                    )));
                }
            }
        }
        self.holder = Some(h);
        Ok(self)
    }

    /// Records `delta` after checking `g_j(s) >= delta * max_i g_i(s)` on a grid.
    pub fn with_min_conditional_ratio(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1]"));
        }
        let observed = self.observed_min_conditional_ratio();
        if observed + 1e-12 < delta {
            return Err(Error::invalid(format!(
                "conditional ratio drops to {observed} below delta = {delta}"
            )));
        }
        self.min_conditional_ratio = Some(delta);
        Ok(self)
    }

    /// `min_{s, j} g_j(s) / max_i g_i(s)` over the validation grid.
    pub fn observed_min_conditional_ratio(&self) -> f64 {
        (0..=GRID_POINTS)
            .map(|i| {
                let p = self.conditional(i as f64 / GRID_POINTS as f64);
                let max = p.iter().copied().fold(0.0, f64::max);
                p.iter().copied().fold(f64::INFINITY, f64::min) / max
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn grade_set(&self) -> &GradeSet {
        &self.grade_set
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn holder(&self) -> Option<Holder> {
        self.holder
    }

    pub fn min_conditional_ratio(&self) -> Option<f64> {
        self.min_conditional_ratio
    }

    /// `p_j = Pr(Y = y_j)`, best grade first.
    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    /// `R_j = p_1 + ... + p_j`, with `R_0 = 0` first and `R_|Y| = 1` last.
    pub fn grade_masses(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.marginals.len() + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for p in &self.marginals {
            acc += p;
            out.push(acc.min(1.0));
        }
        *out.last_mut().unwrap() = 1.0;
        out
    }

    /// `(g_1(s), ..., g_|Y|(s))`.
    pub fn conditional(&self, s: f64) -> Vec<f64> {
        self.curves.iter().map(|c| c.eval(s)).collect()
    }

    /// `E[gain(Y) | canonical score = s]`.
    pub fn mean_gain(&self, s: f64) -> f64 {
        self.grade_set
            .gains()
            .iter()
            .zip(&self.curves)
            .map(|(v, c)| v * c.eval(s))
            .sum()
    }

    /// Grade index (0 = best) for canonical score `s` and uniform draw `u`.
    #[inline]
    pub(crate) fn draw_grade(&self, s: f64, u: f64) -> u8 {
        // the number of cumulative thresholds at or below u, without branches
        let last = self.curves.len() - 1;
        let mut acc = 0.0;
        let mut grade = 0u8;
        for c in &self.curves[..last] {
            acc += c.eval(s).max(0.0);
            grade += (u >= acc) as u8;
        }
        grade
    }
}

/// Monotone transform applied by [`ScorerSpec::MonotoneDistort`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distortion {
    Exp,
    Cube,
    Affine { scale: f64, shift: f64 },
}

impl Distortion {
    pub fn apply(self, s: f64) -> f64 {
        match self {
            Distortion::Exp => s.exp(),
            Distortion::Cube => s * s * s,
            Distortion::Affine { scale, shift } => scale * s + shift,
        }
    }
}

/// How a synthetic ranking function scores an instance with canonical score `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScorerSpec {
    /// Score `s` itself.
    Canonical,
    /// Score `phi(s)` for strictly increasing `phi`; ranks like `Canonical`.
    MonotoneDistort { phi: Distortion },
    /// Order reversed inside each interval: `s -> a + b - s` on `[a, b]`.
    PartialCorrupt { intervals: Vec<(f64, f64)> },
    /// Score `(1 - weight) * s + weight * v` with fresh `v ~ U[0, 1]`.
    IndependentNoise { weight: f64 },
}

impl ScorerSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScorerSpec::Canonical => Ok(()),
            ScorerSpec::MonotoneDistort { phi } => match phi {
                Distortion::Affine { scale, .. } if !(*scale > 0.0) => {
                    Err(Error::invalid("affine distortion needs a positive scale"))
                }
                _ => Ok(()),
            },
            ScorerSpec::PartialCorrupt { intervals } => {
                let mut prev = 0.0;
                for &(a, b) in intervals {
                    if !(a >= prev && a < b && b <= 1.0) {
                        return Err(Error::invalid(
                            "corruption intervals must be disjoint, ascending and inside [0, 1]",
                        ));
                    }
                    prev = b;
                }
                Ok(())
            }
            ScorerSpec::IndependentNoise { weight } => {
                if (0.0..=1.0).contains(weight) {
                    Ok(())
                } else {
                    Err(Error::invalid("noise weight must lie in [0, 1]"))
                }
            }
        }
    }

    pub fn needs_noise(&self) -> bool {
        matches!(self, ScorerSpec::IndependentNoise { .. })
    }

    /// Whether the scorer induces the canonical ranking on every sample.
    pub fn is_order_preserving(&self) -> bool {
        matches!(
            self,
            ScorerSpec::Canonical | ScorerSpec::MonotoneDistort { .. }
        )
    }

    pub fn score(&self, s: f64, noise: f64) -> f64 {
        match self {
            ScorerSpec::Canonical => s,
            ScorerSpec::MonotoneDistort { phi } => phi.apply(s),
            ScorerSpec::PartialCorrupt { intervals } => intervals
                .iter()
                .find(|(a, b)| (*a..=*b).contains(&s))
                .map_or(s, |(a, b)| a + b - s),
            ScorerSpec::IndependentNoise { weight } => (1.0 - weight) * s + weight * noise,
        }
    }
}

// stream lanes: 0 carries (s, label draw), 1 + j carries scorer j's noise
const LANES_PER_TRIAL: u64 = 256;
const WORDS_PER_BASE_ITEM: u128 = 4;
const WORDS_PER_NOISE_ITEM: u128 = 2;

/// Uniform on `[0, 1)` from the top 53 bits, as `rand` does.
#[inline]
fn unit(x: u64) -> f64 {
    // signed conversion is a single instruction; the value fits in 53 bits
    ((x >> 11) as i64) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Generated items `[start, end)` of a stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sample {
    pub start: usize,
    /// Canonical scores.
    pub s: Vec<f64>,
    /// Grade index per item, 0 = best grade.
    pub grades: Vec<u8>,
    /// One score vector per scorer.
    pub scores: Vec<Vec<f64>>,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// An index-addressable i.i.d. stream for one trial.
#[derive(Debug, Clone)]
pub struct SampleStream<'a> {
    pub master_seed: u64,
    pub trial: u64,
    pub spec: &'a DistributionSpec,
    pub scorers: &'a [ScorerSpec],
}

impl<'a> SampleStream<'a> {
    pub fn new(master_seed: u64, spec: &'a DistributionSpec, scorers: &'a [ScorerSpec]) -> Self {
        SampleStream {
            master_seed,
            trial: 0,
            spec,
            scorers,
        }
    }

    pub fn for_trial(mut self, trial: u64) -> Self {
        self.trial = trial;
        self
    }

    fn lane(&self, lane: u64, word_pos: u128) -> ChaCha8Rng {
        assert!(lane < LANES_PER_TRIAL, "too many scorers for one stream");
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.trial.wrapping_mul(LANES_PER_TRIAL) + lane);
        rng.set_word_pos(word_pos);
        rng
    }

    /// Items `[start, end)`.
    pub fn generate_range(&self, start: usize, end: usize) -> Sample {
        let mut out = Sample::default();
        self.generate_range_into(start, end, &mut out);
        out
    }

    /// As [`generate_range`](Self::generate_range), reusing `out`'s buffers.
    pub fn generate_range_into(&self, start: usize, end: usize, out: &mut Sample) {
        let len = end.saturating_sub(start);
        out.start = start;
        out.s.clear();
        out.grades.clear();
        out.s.reserve(len);
        out.grades.reserve(len);
        let mut rng = self.lane(0, start as u128 * WORDS_PER_BASE_ITEM);
        for _ in 0..len {
            let si = unit(rng.next_u64());
            let u = unit(rng.next_u64());
            out.s.push(si);
            out.grades.push(self.spec.draw_grade(si, u));
        }
        out.scores.resize_with(self.scorers.len(), Vec::new);
        for (j, (scorer, scores)) in self.scorers.iter().zip(out.scores.iter_mut()).enumerate() {
            scores.clear();
            if scorer.needs_noise() {
                let mut noise = self.lane(1 + j as u64, start as u128 * WORDS_PER_NOISE_ITEM);
                scores.extend(
                    out.s
                        .iter()
                        .map(|&si| scorer.score(si, unit(noise.next_u64()))),
                );
            } else {
                scores.extend(out.s.iter().map(|&si| scorer.score(si, 0.0)));
            }
        }
    }

    /// The first `n` items.
    pub fn generate(&self, n: usize) -> Sample {
        self.generate_range(0, n)
    }
}

/// Datasets for every size in `n_grid` (ascending), one list per scorer.
/// The dataset at size `n` is the first `n` items of the stream.
pub fn sample_prefixes(stream: &SampleStream<'_>, n_grid: &[usize]) -> Result<Vec<Vec<Dataset>>> {
    check_grid(n_grid)?;
    let max = *n_grid.last().unwrap();
    let sample = stream.generate(max);
    let gs = stream.spec.grade_set();
    let values: Vec<f64> = sample
        .grades
        .iter()
        .map(|&g| gs.grades()[g as usize])
        .collect();
    sample
        .scores
        .iter()
        .map(|scores| {
            n_grid
                .iter()
                .map(|&n| Dataset::new(scores[..n].to_vec(), values[..n].to_vec(), gs))
                .collect()
        })
        .collect()
}

pub(crate) fn check_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.is_empty() {
        return Err(Error::invalid("size grid is empty"));
    }
    if n_grid[0] == 0 || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "size grid must be positive and strictly ascending",
        ));
    }
    let max = *n_grid.last().unwrap();
    if max > MAX_STREAM_LEN {
        return Err(Error::ResourceLimit {
            requested: max as u64,
            cap: MAX_STREAM_LEN as u64,
        });
    }
    Ok(())
}

/// Numerically recovers a scorer's conditional grade curves on its own
/// canonical scale.
///
/// Draws `calibration_n` items, maps each to its empirical canonical value
/// `(#items scored lower) / n`, and tabulates grade frequencies in `bins`
/// equal-width bins. The result is a piecewise-linear spec through the bin
/// centres, flat out to 0 and 1.
pub fn calibrate_scorer(
    spec: &DistributionSpec,
    scorer: &ScorerSpec,
    calibration_n: usize,
    bins: usize,
    seed: u64,
) -> Result<DistributionSpec> {
    if calibration_n < 100_000 {
        return Err(Error::invalid("calibration needs at least 1e5 samples"));
    }
    if !(50..=1000).contains(&bins) {
        return Err(Error::invalid("calibration bins must lie in [50, 1000]"));
    }
    scorer.validate()?;
    let scorers = std::slice::from_ref(scorer);
    let sample = SampleStream::new(seed, spec, scorers).generate(calibration_n);
    let scores = &sample.scores[0];
    // descending rank r (0-based) has canonical value (n - 1 - r) / n
    let order = rank_indices(scores, &sample.grades, TieBreak::ByIndex);
    let m = spec.grade_set().len();
    let mut counts = vec![vec![0u64; m]; bins];
    let n = calibration_n;
    for (r, &i) in order.iter().enumerate() {
        let ascending = n - 1 - r;
        let b = (ascending * bins / n).min(bins - 1);
        counts[b][sample.grades[i as usize] as usize] += 1;
    }
    let curves = (0..m)
        .map(|j| {
            let mut knots = Vec::with_capacity(bins + 2);
            let freq = |b: usize| {
                let total: u64 = counts[b].iter().sum();
                counts[b][j] as f64 / total as f64
            };
            knots.push((0.0, freq(0)));
            for b in 0..bins {
                knots.push(((b as f64 + 0.5) / bins as f64, freq(b)));
            }
            knots.push((1.0, freq(bins - 1)));
            Curve::piecewise_linear(knots)
        })
        .collect::<Result<Vec<_>>>()?;
    DistributionSpec::new(spec.grade_set().clone(), curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{rank, Gain};

    fn affine_world() -> DistributionSpec {
        DistributionSpec::binary(Curve::affine(0.0, 1.0)).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(DistributionSpec::binary(Curve::affine(0.5, 0.6)).is_err());
        let gs = GradeSet::new(vec![2.0, 1.0, 0.0], Gain::Identity).unwrap();
        let bad = vec![
            Curve::constant(0.5),
            Curve::constant(0.4),
            Curve::constant(0.2),
        ];
        assert!(DistributionSpec::new(gs.clone(), bad).is_err());
        let ok =
            DistributionSpec::new(gs, vec![Curve::constant(0.2), Curve::constant(0.3)]).unwrap();
        let p = ok.marginals();
        assert!(
            (p[0] - 0.2).abs() < 1e-15 && (p[1] - 0.3).abs() < 1e-15 && (p[2] - 0.5).abs() < 1e-15
        );
    }

    #[test]
    fn holder_and_delta_checks() {
        let w = DistributionSpec::binary(Curve::affine(0.3, 0.4)).unwrap();
        assert!(w.clone().with_holder(Holder { alpha: 1.0, c: 0.4 }).is_ok());
        assert!(w
            .clone()
            .with_holder(Holder { alpha: 1.0, c: 0.3 })
            .is_err());
        // min ratio is min(0.3/0.7, ...) = 0.3/0.7
        assert!((w.observed_min_conditional_ratio() - 3.0 / 7.0).abs() < 1e-12);
        assert!(w.clone().with_min_conditional_ratio(0.4).is_ok());
        assert!(w.with_min_conditional_ratio(0.5).is_err());
        assert_eq!(affine_world().observed_min_conditional_ratio(), 0.0);
    }

    #[test]
    fn streams_are_deterministic_and_addressable() {
        let w = affine_world();
        let scorers = [
            ScorerSpec::Canonical,
            ScorerSpec::IndependentNoise { weight: 0.5 },
        ];
        let stream = SampleStream::new(42, &w, &scorers).for_trial(3);
        let full = stream.generate(1000);
        assert_eq!(full, stream.generate(1000));
        let tail = stream.generate_range(600, 1000);
        assert_eq!(tail.s, full.s[600..]);
        assert_eq!(tail.grades, full.grades[600..]);
        assert_eq!(tail.scores[1], full.scores[1][600..]);
        let other_trial = SampleStream::new(42, &w, &scorers)
            .for_trial(4)
            .generate(10);
        assert_ne!(other_trial.s, full.s[..10]);
        // the base lane does not depend on which scorers are attached
        let alone = SampleStream::new(42, &w, &[]).for_trial(3).generate(1000);
        assert_eq!(alone.s, full.s);
        assert_eq!(alone.grades, full.grades);
    }

    #[test]
    fn prefixes_share_items_and_labels() {
        let w = affine_world();
        let scorers = [
            ScorerSpec::Canonical,
            ScorerSpec::MonotoneDistort {
                phi: Distortion::Exp,
            },
        ];
        let stream = SampleStream::new(7, &w, &scorers);
        let sets = sample_prefixes(&stream, &[2, 4, 500]).unwrap();
        assert_eq!(sets[0][0].scores(), &sets[0][1].scores()[..2]);
        assert_eq!(sets[0][0].grades(), &sets[0][1].grades()[..2]);
        assert_eq!(sets[0][2].grades(), sets[1][2].grades());
        for (a, b) in sets[0].iter().zip(&sets[1]) {
            assert_eq!(rank(a, TieBreak::ByIndex), rank(b, TieBreak::ByIndex));
        }
        assert!(sample_prefixes(&stream, &[4, 2]).is_err());
        assert!(matches!(
            sample_prefixes(&stream, &[MAX_STREAM_LEN + 1]),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn sample_mean_tracks_marginal() {
        let w = affine_world();
        let sample = SampleStream::new(11, &w, &[]).generate(1_000_000);
        let mean = sample.grades.iter().filter(|&&g| g == 0).count() as f64 / 1e6;
        assert!((mean - 0.5).abs() < 3e-3, "mean {mean}");
    }

    #[test]
    fn canonical_scores_are_uniform() {
        let w = affine_world();
        let mut s = SampleStream::new(3, &w, &[]).generate(100_000).s;
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        let ks = s
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
            .fold(0.0, f64::max);
        // 1% critical value 1.628 / sqrt(n)
        assert!(ks < 1.628 / n.sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn grade_fractions_converge() {
        let gs = GradeSet::new(vec![2.0, 1.0, 0.0], Gain::Identity).unwrap();
        let w = DistributionSpec::new(gs, vec![Curve::affine(0.1, 0.2), Curve::affine(0.3, -0.1)])
            .unwrap();
        let p = w.marginals().to_vec();
        let mut passes = 0;
        let mut total = 0;
        for seed in 0..20 {
            for n in [10_000usize, 1_000_000] {
                if n == 1_000_000 && seed >= 5 {
                    continue;
                }
                let grades = SampleStream::new(seed, &w, &[]).generate(n).grades;
                for (j, pj) in p.iter().enumerate() {
                    let frac =
                        grades.iter().filter(|&&g| g as usize == j).count() as f64 / n as f64;
                    total += 1;
                    if (frac - pj).abs() <= 4.0 * (pj / n as f64).sqrt() {
                        passes += 1;
                    }
                }
            }
        }
        assert!(passes as f64 >= 0.99 * total as f64, "{passes}/{total}");
        let r = w.grade_masses();
        assert_eq!(r.len(), 4);
        assert!((r[1] - 0.2).abs() < 1e-15 && (r[2] - 0.45).abs() < 1e-15 && r[3] == 1.0);
    }

    #[test]
    fn partial_corrupt_reverses_inside_intervals() {
        let sc = ScorerSpec::PartialCorrupt {
            intervals: vec![(0.2, 0.4)],
        };
        assert!((sc.score(0.25, 0.0) - 0.35).abs() < 1e-15);
        assert_eq!(sc.score(0.5, 0.0), 0.5);
        assert!(sc.score(0.21, 0.0) > sc.score(0.39, 0.0));
        assert!(ScorerSpec::PartialCorrupt {
            intervals: vec![(0.4, 0.5), (0.2, 0.3)]
        }
        .validate()
        .is_err());
    }

    #[test]
    fn calibration_recovers_curves() {
        let w = affine_world();
        let canon = calibrate_scorer(&w, &ScorerSpec::Canonical, 1_000_000, 200, 5).unwrap();
        let gap = (0..=1000)
            .map(|i| i as f64 / 1000.0)
            .map(|s| (canon.curves()[0].eval(s) - s).abs())
            .fold(0.0, f64::max);
        assert!(gap < 0.02, "sup gap {gap}");
        assert!((canon.marginals()[0] - 0.5).abs() < 2e-3);

        let distorted = calibrate_scorer(
            &w,
            &ScorerSpec::MonotoneDistort {
                phi: Distortion::Exp,
            },
            1_000_000,
            200,
            5,
        )
        .unwrap();
        for s in [0.0, 0.1, 0.33, 0.5, 0.9, 1.0] {
            assert!((distorted.curves()[0].eval(s) - canon.curves()[0].eval(s)).abs() < 1e-12);
        }

        let noise = calibrate_scorer(
            &w,
            &ScorerSpec::IndependentNoise { weight: 1.0 },
            1_000_000,
            200,
            5,
        )
        .unwrap();
        let gap = (0..=1000)
            .map(|i| (noise.curves()[0].eval(i as f64 / 1000.0) - 0.5).abs())
            .fold(0.0, f64::max);
        assert!(gap < 0.02, "noise sup gap {gap}");
        assert!((noise.marginals()[0] - 0.5).abs() < 2e-3);

        assert!(calibrate_scorer(&w, &ScorerSpec::Canonical, 1000, 200, 5).is_err());
        assert!(calibrate_scorer(&w, &ScorerSpec::Canonical, 100_000, 10, 5).is_err());
    }

    #[test]
    fn config_round_trip() {
        let text = r#"
            grades = [2.0, 1.0, 0.0]
            curves = [
              { family = "affine", intercept = 0.1, slope = 0.2 },
              { family = "polynomial", coeffs = [0.3, 0.0, 0.1] },
            ]
        "#;
        let spec: DistributionSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.curves().len(), 3);
        let back: DistributionSpec = toml::from_str(&toml::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
