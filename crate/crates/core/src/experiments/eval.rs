use crate::discount::Discount;
use crate::metrics::{rank_indices_into, CompensatedSum, GradeSet, SortScratch, TieBreak};

/// NDCG on every prefix size of a grid from one ranking of the largest prefix.
///
/// Sorting the largest prefix once and filtering it down to `index < n`
/// yields the ranking of the first `n` items, since every tie rule is a total
/// order on indices. Sums run in rank order with the same compensation as
/// [`crate::metrics::dcg`] and skip zero gains, which keeps
/// the results bit-identical to [`crate::metrics::ndcg`].
#[derive(Debug, Clone)]
pub(crate) struct PrefixEvaluator {
    discount: Discount,
    tie_break: TieBreak,
    table: Vec<f64>,
    /// Gain per grade index, best first.
    gains: Vec<f64>,
    n_grid: Vec<usize>,
}

/// Per-worker buffers for [`PrefixEvaluator::evaluate`].
#[derive(Debug, Default)]
pub(crate) struct EvalScratch {
    sort: SortScratch,
    order: Vec<u32>,
}

impl PrefixEvaluator {
    pub fn new(discount: &Discount, tie_break: TieBreak, gs: &GradeSet, n_grid: &[usize]) -> Self {
        let max = *n_grid.last().expect("nonempty grid");
        let len = discount.cutoff_at(max);
        PrefixEvaluator {
            discount: discount.clone(),
            tie_break,
            table: discount.table(len),
            gains: gs.gains(),
            n_grid: n_grid.to_vec(),
        }
    }

    /// NDCG per grid size, `None` where the prefix has zero ideal DCG.
    /// `grades` holds grade indices (0 = best).
    pub fn evaluate(
        &self,
        scores: &[f64],
        grades: &[u8],
        scratch: &mut EvalScratch,
    ) -> Vec<Option<f64>> {
        let max = *self.n_grid.last().unwrap();
        let order = &mut scratch.order;
        rank_indices_into(
            &scores[..max],
            &grades[..max],
            self.tie_break,
            &mut scratch.sort,
            order,
        );

        let mut counts = vec![0usize; self.gains.len()];
        let mut seen = 0;
        let ideals: Vec<f64> = self
            .n_grid
            .iter()
            .map(|&n| {
                for &g in &grades[seen..n] {
                    counts[g as usize] += 1;
                }
                seen = n;
                self.ideal(&counts, n)
            })
            .collect();

        let mut out = vec![None; self.n_grid.len()];
        for (slot, &n) in self.n_grid.iter().enumerate().rev() {
            if order.len() > n {
                order.retain(|&i| (i as usize) < n);
            }
            let ideal = ideals[slot];
            if ideal > 0.0 {
                out[slot] = Some(self.dcg(order, grades, n) / ideal);
            }
        }
        out
    }

    fn dcg(&self, order: &[u32], grades: &[u8], n: usize) -> f64 {
        let k = self.discount.cutoff_at(n);
        let mut acc = CompensatedSum::default();
        for (r, &i) in order[..k].iter().enumerate() {
            let v = self.gains[grades[i as usize] as usize];
            if v != 0.0 {
                acc.add(v * self.table[r]);
            }
        }
        acc.value()
    }

    fn ideal(&self, counts: &[usize], n: usize) -> f64 {
        let k = self.discount.cutoff_at(n);
        let mut acc = CompensatedSum::default();
        let mut r = 0;
        for (&v, &c) in self.gains.iter().zip(counts) {
            let end = (r + c).min(k);
            if v != 0.0 {
                for w in &self.table[r..end] {
                    acc.add(v * w);
                }
            }
            r = end;
            if r >= k {
                break;
            }
        }
        acc.value()
    }
}
