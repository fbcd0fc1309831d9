//! Acceptance criteria, one pass/fail line each. Exits nonzero on any failure.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use itertools::Itertools;
use ndcg_core::config::RunConfig;
use ndcg_core::datagen::{Curve, Distortion};
use ndcg_core::discount::{li_offset, CutoffRule, Discount, DiscountFn, Family};
use ndcg_core::experiments::{
    convergence_curve, distinguish, limit_gap, nonconvergence_test, RunOptions, Winner,
};
use ndcg_core::limits::{limit, pseudo_expectation};
use ndcg_core::metrics::{brute_force_idcg, idcg, ndcg, Dataset, Gain, GradeSet, TieBreak};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, Duration, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn config(name: &str) -> RunConfig {
    let path = configs_dir().join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn curve_means(cfg: &RunConfig) -> Vec<(usize, f64)> {
    let c = cfg.curve.as_ref().unwrap();
    let points = convergence_curve(
        cfg.world().unwrap(),
        &cfg.scorers,
        &cfg.measure(),
        &c.n_grid,
        c.trials,
        RunOptions::seeded(cfg.seed),
    )
    .unwrap();
    points.iter().map(|p| (p.n, p.mean)).collect()
}

fn log_ndcg_converges_to_one() -> Outcome {
    let cfg = config("curve_log.toml");
    let means = curve_means(&cfg);
    let increasing = means.windows(2).all(|w| w[1].1 > w[0].1);
    let (n, last) = *means.last().unwrap();
    let pe = pseudo_expectation(&Curve::affine(0.0, 1.0), &Discount::log(), n as f64, 0.5)
        .unwrap()
        .normalized;
    let gap = (last - pe).abs();
    Outcome {
        passed: increasing && gap <= 0.02,
        detail: format!(
            "means {:?}, strictly increasing {increasing}, |mean(1e5) - pseudo {pe:.5}| = {gap:.5} <= 0.02",
            means.iter().map(|m| format!("{:.5}", m.1)).collect::<Vec<_>>()
        ),
    }
}

fn power_limit() -> Outcome {
    let cfg = config("curve_power.toml");
    let target = 2.0 * 2f64.sqrt() / 3.0;
    let closed = limit(cfg.world().unwrap(), &cfg.discount)
        .unwrap()
        .value
        .unwrap();
    let (_, last) = *curve_means(&cfg).last().unwrap();
    let gap = (last - target).abs();
    Outcome {
        passed: gap <= 0.02 && (closed - target).abs() < 1e-9,
        detail: format!(
            "mean(1e5) = {last:.5}, limit {closed:.9} vs 2*sqrt(2)/3, gap {gap:.5} <= 0.02"
        ),
    }
}

fn zipfian_residuals() -> Outcome {
    let cfg = config("curve_zipfian.toml");
    let c = cfg.curve.as_ref().unwrap();
    let lim = limit(cfg.world().unwrap(), &cfg.discount).unwrap();
    let points = convergence_curve(
        cfg.world().unwrap(),
        &cfg.scorers,
        &cfg.measure(),
        &c.n_grid,
        c.trials,
        RunOptions::seeded(cfg.seed),
    )
    .unwrap();
    let gap = limit_gap(&points, &cfg.scorers[0].name, &lim).unwrap();
    let last = gap.residuals.last().unwrap().1;
    Outcome {
        passed: gap.nonincreasing && last <= 0.1 && (gap.limit - 0.7).abs() < 1e-12,
        detail: format!(
            "limit {:.6}, residuals {:?} over {} trials, nonincreasing {}, final <= 0.1",
            gap.limit,
            gap.residuals
                .iter()
                .map(|r| format!("{:.5}", r.1))
                .collect::<Vec<_>>(),
            c.trials,
            gap.nonincreasing
        ),
    }
}

/// Probabilities that `sum_r y_r 2^-r` is at least `hi` and at most `lo`,
/// enumerating the top `k` ranks with `Pr(y_r = 1) = 0.3 + 0.4 (1 - r/(n+1))`.
/// Ranks past `k` are bounded by `2^-k` in the unfavourable direction.
fn top_rank_oracle(n: usize, k: usize, hi: f64, lo: f64) -> (f64, f64) {
    let p: Vec<f64> = (1..=k)
        .map(|r| 0.3 + 0.4 * (1.0 - r as f64 / (n as f64 + 1.0)))
        .collect();
    let tail = 2f64.powi(-(k as i32));
    let (mut q_hi, mut q_lo) = (0.0, 0.0);
    for mask in 0u32..(1 << k) {
        let mut prob = 1.0;
        let mut dcg = 0.0;
        for (r, &pr) in p.iter().enumerate() {
            if mask >> r & 1 == 1 {
                prob *= pr;
                dcg += 2f64.powi(-(r as i32 + 1));
            } else {
                prob *= 1.0 - pr;
            }
        }
        if dcg >= hi {
            q_hi += prob;
        }
        if dcg + tail <= lo {
            q_lo += prob;
        }
    }
    (q_hi, q_lo)
}

fn exponential_nonconvergence() -> Outcome {
    let cfg = config("nonconverge_exp2.toml");
    let s = cfg.nonconverge.as_ref().unwrap();
    let t = s.thresholds;
    let (q_hi, q_lo) = top_rank_oracle(10_000, 20, t.theta_hi, t.theta_lo);
    let floor = |q: f64| q - 4.0 * (q * (1.0 - q) / s.trials as f64).sqrt();
    let floors_match = t.floor_hi <= floor(q_hi)
        && floor(q_hi) - t.floor_hi < 0.005
        && t.floor_lo <= floor(q_lo)
        && floor(q_lo) - t.floor_lo < 0.005;
    let report = nonconvergence_test(
        cfg.world().unwrap(),
        &cfg.scorers[0],
        &cfg.measure(),
        &s.n_grid,
        s.trials,
        t,
        RunOptions::seeded(cfg.seed),
    )
    .unwrap();
    let row = report.rows.iter().find(|r| r.n == 10_000).unwrap();
    let freq_ok = row.freq_high > t.floor_hi && row.freq_low > t.floor_lo;
    Outcome {
        passed: floors_match && freq_ok && report.sd_not_shrinking,
        detail: format!(
            "oracle q_hi {q_hi:.4}, q_lo {q_lo:.4}; freq_high {:.3} > {}, freq_low {:.3} > {}; sd {:.4} (1e3) -> {:.4} (1e4), not shrinking {}",
            row.freq_high, t.floor_hi, row.freq_low, t.floor_lo, report.rows[0].sd, row.sd, report.sd_not_shrinking
        ),
    }
}

fn linear_topk_limit() -> Outcome {
    let cfg = config("curve_topk.toml");
    let closed = limit(cfg.world().unwrap(), &cfg.discount)
        .unwrap()
        .value
        .unwrap();
    let (_, last) = *curve_means(&cfg).last().unwrap();
    let gap = (last - 0.9).abs();
    Outcome {
        passed: gap <= 0.02 && (closed - 0.9).abs() < 1e-9,
        detail: format!(
            "mean(1e5) = {last:.5}, limit {closed:.9}, |mean - 0.9| = {gap:.5} <= 0.02"
        ),
    }
}

fn distinguishability() -> Outcome {
    let cfg = config("distinguish.toml");
    let d = cfg.distinguish.as_ref().unwrap();
    let pair = [cfg.scorers[0].clone(), cfg.scorers[1].clone()];
    let report = distinguish(
        cfg.world().unwrap(),
        &pair,
        &cfg.measure(),
        d.grid,
        d.trials,
        RunOptions::seeded(cfg.seed),
    )
    .unwrap();
    let first = &report.rows[0];
    Outcome {
        passed: first.n == 10_000 && first.flip_rate <= 0.05 && report.winner == Winner::F0,
        detail: format!(
            "flip_rate(N=1e4) = {} <= 0.05 over {} trials, winner {}",
            first.flip_rate,
            report.trials,
            report.winner.as_str()
        ),
    }
}

fn idcg_matches_brute_force() -> Outcome {
    let discounts = [
        Discount::log(),
        Discount::power(0.5).unwrap(),
        Discount::zipfian(),
        Discount::exponential(2.0).unwrap(),
    ];
    let mut checked = 0;
    let mut mismatches = 0;
    for gain in [Gain::Identity, Gain::Exponential2] {
        let gs = GradeSet::new(vec![2.0, 1.0, 0.0], gain).unwrap();
        for n in 1..=8 {
            for multiset in [0.0, 1.0, 2.0].into_iter().combinations_with_replacement(n) {
                for d in &discounts {
                    let fast = idcg(&multiset, d, &gs);
                    let slow = brute_force_idcg(&multiset, d, &gs).unwrap();
                    checked += 1;
                    if fast.to_bits() != slow.to_bits() {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    Outcome {
        passed: mismatches == 0,
        detail: format!("{checked} (multiset, discount, gain) cases, {mismatches} mismatches"),
    }
}

struct Scaled<'a>(&'a Discount, f64);

impl DiscountFn for Scaled<'_> {
    fn weight(&self, r: usize, n: usize) -> f64 {
        self.1 * self.0.weight(r, n)
    }

    fn effective_len(&self, n: usize) -> usize {
        self.0.effective_len(n)
    }
}

fn invariance_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gs = GradeSet::new(vec![2.0, 1.0, 0.0], Gain::Identity).unwrap();
    let discounts = [
        Discount::log(),
        Discount::power(0.5).unwrap(),
        Discount::zipfian(),
    ];
    let phis = [
        Distortion::Affine {
            scale: 3.0,
            shift: 1.0,
        },
        Distortion::Exp,
        Distortion::Cube,
    ];
    let (mut order_fail, mut scale_fail, mut cutoff_fail, mut datasets) = (0, 0, 0, 0);
    let mut worst_scale: f64 = 0.0;
    while datasets < 1000 {
        let n = rng.random_range(1..=200);
        // scores on a 1/1024 lattice, so ties occur and every distortion stays injective
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..1024) as f64 / 1024.0)
            .collect();
        let grades: Vec<f64> = (0..n).map(|_| rng.random_range(0..3) as f64).collect();
        if grades.iter().all(|&g| g == 0.0) {
            continue;
        }
        datasets += 1;
        let data = Dataset::new(scores.clone(), grades.clone(), &gs).unwrap();
        let d = &discounts[datasets % discounts.len()];
        for tie in [
            TieBreak::ByIndex,
            TieBreak::Pessimistic,
            TieBreak::Optimistic,
        ] {
            let base = ndcg(&data, d, &gs, tie).unwrap();
            for phi in phis {
                let moved = Dataset::new(
                    scores.iter().map(|&s| phi.apply(s)).collect(),
                    grades.clone(),
                    &gs,
                )
                .unwrap();
                if ndcg(&moved, d, &gs, tie).unwrap().to_bits() != base.to_bits() {
                    order_fail += 1;
                }
            }
            let c = rng.random_range(0.01..100.0);
            let scaled = ndcg(&data, &Scaled(d, c), &gs, tie).unwrap();
            let rel = ((scaled - base) / base).abs();
            worst_scale = worst_scale.max(rel);
            if rel > 1e-15 {
                scale_fail += 1;
            }
            let at_n = d.clone().with_cutoff(CutoffRule::FixedK(n));
            if ndcg(&data, &at_n, &gs, tie).unwrap().to_bits() != base.to_bits() {
                cutoff_fail += 1;
            }
        }
    }
    Outcome {
        passed: order_fail == 0 && scale_fail == 0 && cutoff_fail == 0,
        detail: format!(
            "{datasets} datasets x 3 tie rules: order {order_fail} fails, scaling {scale_fail} fails (worst rel {worst_scale:.1e}), NDCG@n {cutoff_fail} fails"
        ),
    }
}

/// Composite 16-point Gauss-Legendre on `panels` equal panels.
fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 8] = [
        0.0950125098376374,
        0.2816035507792589,
        0.4580167776572274,
        0.6178762444026438,
        0.755404408355003,
        0.8656312023878318,
        0.9445750230732326,
        0.9894009349916499,
    ];
    const W: [f64; 8] = [
        0.1894506104550685,
        0.1826034150449236,
        0.1691565193950025,
        0.1495959888165767,
        0.1246289712555339,
        0.0951585116824928,
        0.0622535239386479,
        0.0271524594117541,
    ];
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        let mid = a + (i as f64 + 0.5) * h;
        for (x, w) in X.iter().zip(W) {
            acc += w * (f(mid - 0.5 * h * x) + f(mid + 0.5 * h * x));
        }
    }
    acc * 0.5 * h
}

fn numerical_core() -> Outcome {
    let mut worst: f64 = 0.0;
    for fam in [
        Family::power(0.5).unwrap(),
        Family::power(0.2).unwrap(),
        Family::Zipfian,
    ] {
        for t in [2.0, 10.0, 1e3, 1e6] {
            let closed = fam.antiderivative(t).unwrap();
            let quad = fam.antiderivative_quadrature(t).unwrap();
            worst = worst.max(((closed - quad) / closed).abs());
        }
    }
    let li10 = li_offset(10.0).unwrap();
    let oracle = gauss_legendre(|x| 1.0 / x.ln(), 2.0, 10.0, 64);
    let li_err = (li10 - oracle).abs();
    let t = 1e8;
    let ratio = li_offset(t).unwrap() / (t / t.ln());
    Outcome {
        passed: worst <= 1e-9 && li_err <= 1e-8 && (ratio - 1.0).abs() <= 0.07,
        detail: format!(
            "worst F rel err {worst:.1e} <= 1e-9; li(10) = {li10:.12}, |li - oracle| = {li_err:.1e} <= 1e-8; li(1e8) ln(1e8)/1e8 = {ratio:.4}"
        ),
    }
}

fn reproducibility() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_ndcg");
    let cfg = configs_dir().join("distinguish.toml");
    let root = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = root.path().join(format!("t{threads}"));
        let status = Command::new(exe)
            .args(["distinguish", "--config"])
            .arg(&cfg)
            .args(["--seed", "99", "--threads", threads, "--out"])
            .arg(&out)
            .env("RUST_LOG", "warn")
            .status()
            .unwrap();
        assert!(status.success(), "ndcg exited with {status}");
        let read = |f: &str| std::fs::read(out.join(f)).unwrap();
        (read("distinguish.csv"), read("manifest.json"))
    };
    let a = run("1");
    let b = run("4");
    Outcome {
        passed: a == b,
        detail: format!(
            "--threads 1 vs 4: csv identical {}, manifest identical {}",
            a.0 == b.0,
            a.1 == b.1
        ),
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "1 log discount: NDCG -> 1",
            Duration::from_secs(120),
            log_ndcg_converges_to_one,
        ),
        (
            "2 power discount limit",
            Duration::from_secs(120),
            power_limit,
        ),
        (
            "3 Zipfian residuals",
            Duration::from_secs(300),
            zipfian_residuals,
        ),
        (
            "4 summable discount non-convergence",
            Duration::from_secs(120),
            exponential_nonconvergence,
        ),
        (
            "5 NDCG@0.2n limit",
            Duration::from_secs(120),
            linear_topk_limit,
        ),
        (
            "6 consistent distinguishability",
            Duration::from_secs(600),
            distinguishability,
        ),
        (
            "7 idcg vs brute force",
            Duration::from_secs(60),
            idcg_matches_brute_force,
        ),
        (
            "8 invariance suite",
            Duration::from_secs(60),
            invariance_suite,
        ),
        ("9 numerical core", Duration::from_secs(10), numerical_core),
        (
            "10 reproducibility across thread counts",
            Duration::from_secs(600),
            reproducibility,
        ),
    ];
    let only: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, budget, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.split(' ').next() == Some(o)) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = outcome.passed && in_time;
        if !passed {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.1}s of {}s]",
            if passed { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
