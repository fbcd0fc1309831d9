//! DCG, ideal DCG and NDCG on concrete datasets.

use std::cmp::Ordering;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::discount::DiscountFn;
use crate::error::{Error, Result};

/// Monotone gain applied to a grade before summation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gain {
    #[default]
    Identity,
    /// `y -> 2^y - 1`
    Exponential2,
}

impl Gain {
    pub fn apply(self, y: f64) -> f64 {
        match self {
            Gain::Identity => y,
            Gain::Exponential2 => y.exp2() - 1.0,
        }
    }
}

/// Relevance grades, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GradeSetConfig", into = "GradeSetConfig")]
pub struct GradeSet {
    grades: Vec<f64>,
    gain: Gain,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradeSetConfig {
    pub grades: Vec<f64>,
    #[serde(default)]
    pub gain: Gain,
}

impl TryFrom<GradeSetConfig> for GradeSet {
    type Error = Error;
    fn try_from(c: GradeSetConfig) -> Result<Self> {
        GradeSet::new(c.grades, c.gain)
    }
}

impl From<GradeSet> for GradeSetConfig {
    fn from(g: GradeSet) -> Self {
        GradeSetConfig {
            grades: g.grades,
            gain: g.gain,
        }
    }
}

impl GradeSet {
    pub fn new(grades: Vec<f64>, gain: Gain) -> Result<Self> {
        if grades.len() < 2 {
            return Err(Error::invalid("a grade set needs at least two grades"));
        }
        if grades.len() > u8::MAX as usize {
            return Err(Error::invalid("too many grades"));
        }
        if grades.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid("grades must be finite"));
        }
        if grades.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::invalid(
                "grades must be listed in strictly decreasing order",
            ));
        }
        Ok(GradeSet { grades, gain })
    }

    /// `{1, 0}` with identity gain.
    pub fn binary() -> Self {
        GradeSet {
            grades: vec![1.0, 0.0],
            gain: Gain::Identity,
        }
    }

    pub fn grades(&self) -> &[f64] {
        &self.grades
    }

    pub fn gain_kind(&self) -> Gain {
        self.gain
    }

    pub fn len(&self) -> usize {
        self.grades.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn gain(&self, y: f64) -> f64 {
        self.gain.apply(y)
    }

    /// Gains indexed like `grades()`, best first.
    pub fn gains(&self) -> Vec<f64> {
        self.grades.iter().map(|&y| self.gain(y)).collect()
    }

    /// Position of `y` in `grades()`.
    pub fn index_of(&self, y: f64) -> Option<usize> {
        self.grades.iter().position(|&g| g == y)
    }
}

/// Items to rank: a score and a grade per item, indexed by original position.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    scores: Vec<f64>,
    grades: Vec<f64>,
}

impl Dataset {
    pub fn new(scores: Vec<f64>, grades: Vec<f64>, gs: &GradeSet) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::invalid("dataset must be nonempty"));
        }
        if scores.len() != grades.len() {
            return Err(Error::invalid(format!(
                "{} scores but {} grades",
                scores.len(),
                grades.len()
            )));
        }
        if scores.len() > u32::MAX as usize {
            return Err(Error::ResourceLimit {
                requested: scores.len() as u64,
                cap: u32::MAX as u64,
            });
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("score at index {i} is not finite")));
        }
        if let Some(i) = grades.iter().position(|&y| gs.index_of(y).is_none()) {
            return Err(Error::invalid(format!(
                "grade {} at index {i} is not in the grade set",
                grades[i]
            )));
        }
        Ok(Dataset { scores, grades })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn grades(&self) -> &[f64] {
        &self.grades
    }

    /// The first `n` items.
    pub fn prefix(&self, n: usize) -> Dataset {
        let n = n.clamp(1, self.len());
        Dataset {
            scores: self.scores[..n].to_vec(),
            grades: self.grades[..n].to_vec(),
        }
    }
}

/// Ordering among items with equal scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Ascending original index.
    #[default]
    ByIndex,
    /// Lowest grade first: the worst NDCG over tie orderings.
    Pessimistic,
    /// Highest grade first: the best NDCG over tie orderings.
    Optimistic,
}

/// Item indices in nonincreasing score order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    pub order: Vec<usize>,
    pub tie_break: TieBreak,
}

impl RankedList {
    pub fn grades(&self, data: &Dataset) -> Vec<f64> {
        self.order.iter().map(|&i| data.grades[i]).collect()
    }
}

/// Reusable buffers for [`sort_descending_into`].
#[derive(Debug, Default)]
pub(crate) struct SortScratch {
    starts: Vec<u32>,
    fill: Vec<u32>,
    pairs: Vec<(f64, u32)>,
}

/// Mean bucket occupancy in [`sort_descending_into`].
const BUCKET_LOAD: usize = 4;

pub(crate) fn sort_descending<C>(scores: &[f64], cmp: C) -> Vec<u32>
where
    C: Fn(u32, u32) -> Ordering,
{
    let mut out = Vec::new();
    sort_descending_into(scores, cmp, &mut SortScratch::default(), &mut out);
    out
}

/// Sorts item indices by descending score under a full comparator.
///
/// `cmp` must order by descending score first; it settles ties. Items are
/// bucketed over the score range and the (score, index) pairs sorted within
/// each bucket, so the common case (smooth score distributions) costs
/// linear time. Every comparator here is a total order on indices, so the
/// result does not depend on the algorithm.
pub(crate) fn sort_descending_into<C>(
    scores: &[f64],
    cmp: C,
    scratch: &mut SortScratch,
    out: &mut Vec<u32>,
) where
    C: Fn(u32, u32) -> Ordering,
{
    let n = scores.len();
    out.clear();
    let (lo, hi) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    let span = hi - lo;
    if n < 64 || !(span > 0.0 && span.is_finite()) {
        out.extend(0..n as u32);
        out.sort_unstable_by(|&a, &b| cmp(a, b));
        return;
    }
    let buckets = n / BUCKET_LOAD;
    let scale = (buckets - 1) as f64 / span;
    // largest scores land in bucket 0; the map is weakly monotone
    let bucket_of = |s: f64| (((hi - s) * scale) as usize).min(buckets - 1);

    let SortScratch {
        starts,
        fill,
        pairs,
    } = scratch;
    starts.clear();
    starts.resize(buckets + 1, 0);
    for &s in scores {
        starts[bucket_of(s) + 1] += 1;
    }
    for b in 0..buckets {
        starts[b + 1] += starts[b];
    }
    fill.clear();
    fill.extend_from_slice(starts);
    pairs.resize(n, (0.0, 0));
    for (i, &s) in scores.iter().enumerate() {
        let slot = &mut fill[bucket_of(s)];
        pairs[*slot as usize] = (s, i as u32);
        *slot += 1;
    }
    // buckets are already in order, so one insertion pass only moves items
    // within their own bucket
    insertion_sort(pairs, |x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| cmp(x.1, y.1))
    });
    out.extend(pairs.iter().map(|p| p.1));
}

fn insertion_sort<T: Copy>(v: &mut [T], cmp: impl Fn(&T, &T) -> Ordering) {
    for i in 1..v.len() {
        let x = v[i];
        let mut j = i;
        while j > 0 && cmp(&v[j - 1], &x) == Ordering::Greater {
            v[j] = v[j - 1];
            j -= 1;
        }
        v[j] = x;
    }
}

fn descending(scores: &[f64], a: u32, b: u32) -> Ordering {
    // scores are finite, so partial_cmp is total here (and -0.0 ties 0.0)
    scores[b as usize]
        .partial_cmp(&scores[a as usize])
        .unwrap_or(Ordering::Equal)
}

/// Orders by descending score with the given tie rule. `grade_rank[i]` is the
/// position of item `i`'s grade in its grade set (0 = best).
pub(crate) fn rank_indices(scores: &[f64], grade_rank: &[u8], tie_break: TieBreak) -> Vec<u32> {
    let mut out = Vec::new();
    rank_indices_into(
        scores,
        grade_rank,
        tie_break,
        &mut SortScratch::default(),
        &mut out,
    );
    out
}

pub(crate) fn rank_indices_into(
    scores: &[f64],
    grade_rank: &[u8],
    tie_break: TieBreak,
    scratch: &mut SortScratch,
    out: &mut Vec<u32>,
) {
    match tie_break {
        TieBreak::ByIndex => sort_descending_into(
            scores,
            |a, b| descending(scores, a, b).then(a.cmp(&b)),
            scratch,
            out,
        ),
        TieBreak::Pessimistic => sort_descending_into(
            scores,
            |a, b| {
                descending(scores, a, b)
                    .then(grade_rank[b as usize].cmp(&grade_rank[a as usize]))
                    .then(a.cmp(&b))
            },
            scratch,
            out,
        ),
        TieBreak::Optimistic => sort_descending_into(
            scores,
            |a, b| {
                descending(scores, a, b)
                    .then(grade_rank[a as usize].cmp(&grade_rank[b as usize]))
                    .then(a.cmp(&b))
            },
            scratch,
            out,
        ),
    }
}

pub fn rank(data: &Dataset, tie_break: TieBreak) -> RankedList {
    let grades = &data.grades;
    let order = match tie_break {
        TieBreak::ByIndex => sort_descending(&data.scores, |a, b| {
            descending(&data.scores, a, b).then(a.cmp(&b))
        }),
        // gains are increasing in the grade, so grade order is gain order
        TieBreak::Pessimistic => sort_descending(&data.scores, |a, b| {
            descending(&data.scores, a, b)
                .then(grades[a as usize].total_cmp(&grades[b as usize]))
                .then(a.cmp(&b))
        }),
        TieBreak::Optimistic => sort_descending(&data.scores, |a, b| {
            descending(&data.scores, a, b)
                .then(grades[b as usize].total_cmp(&grades[a as usize]))
                .then(a.cmp(&b))
        }),
    };
    RankedList {
        order: order.into_iter().map(|i| i as usize).collect(),
        tie_break,
    }
}

/// `sum_r gain(y_(r)) D(r)` over grades listed in rank order; the list
/// length is the dataset size used to resolve any cut-off.
pub fn dcg<D: DiscountFn + ?Sized>(ranked_grades: &[f64], d: &D, gs: &GradeSet) -> f64 {
    let n = ranked_grades.len();
    let k = d.effective_len(n).min(n);
    let mut acc = CompensatedSum::default();
    for (i, &y) in ranked_grades[..k].iter().enumerate() {
        acc.add(gs.gain(y) * d.weight(i + 1, n));
    }
    acc.value()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// DCG of the grades sorted best first. Both the gain order and `D` are
/// nonincreasing, so this is the maximum over all orderings.
pub fn idcg<D: DiscountFn + ?Sized>(grades: &[f64], d: &D, gs: &GradeSet) -> f64 {
    let mut sorted = grades.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    dcg(&sorted, d, gs)
}

pub fn ndcg<D: DiscountFn + ?Sized>(
    data: &Dataset,
    d: &D,
    gs: &GradeSet,
    tie_break: TieBreak,
) -> Result<f64> {
    let ideal = idcg(&data.grades, d, gs);
    if !(ideal > 0.0) {
        return Err(Error::DegenerateDataset);
    }
    let ranked = rank(data, tie_break).grades(data);
    Ok(dcg(&ranked, d, gs) / ideal)
}

pub const BRUTE_FORCE_MAX_ITEMS: usize = 10;

/// Maximum DCG over every permutation of `grades`.
pub fn brute_force_idcg<D: DiscountFn + ?Sized>(
    grades: &[f64],
    d: &D,
    gs: &GradeSet,
) -> Result<f64> {
    let n = grades.len();
    if n == 0 {
        return Err(Error::invalid("brute-force IDCG needs at least one grade"));
    }
    if n > BRUTE_FORCE_MAX_ITEMS {
        return Err(Error::ResourceLimit {
            requested: n as u64,
            cap: BRUTE_FORCE_MAX_ITEMS as u64,
        });
    }
    Ok(grades
        .iter()
        .copied()
        .permutations(n)
        .map(|perm| dcg(&perm, d, gs))
        .fold(f64::NEG_INFINITY, f64::max))
}
