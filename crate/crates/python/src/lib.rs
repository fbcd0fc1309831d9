//! Python bindings: metrics, closed-form limits and convergence curves.

use ndcg_core::config::RunConfig;
use ndcg_core::discount::{CutoffConfig, DiscountConfig, DiscountFn};
use ndcg_core::error::Error;
use ndcg_core::experiments::{convergence_curve, RunOptions};
use ndcg_core::limits;
use ndcg_core::metrics::{self, Dataset, Gain, GradeSet, TieBreak};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(ndcg_py, AssumptionViolated, pyo3::exceptions::PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::AssumptionViolated(_) | Error::DegenerateDataset => {
            AssumptionViolated::new_err(e.to_string())
        }
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, value: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} '{value}'")))
}

#[pyclass(frozen, module = "ndcg_py")]
struct Discount(ndcg_core::discount::Discount);

#[pymethods]
impl Discount {
    /// `family` is one of log, power, zipfian, exp; `cutoff` one of fixed
    /// (with `k`), linear (with `c`) or sublinear (with `gamma`).
    #[new]
    #[pyo3(signature = (family, beta=None, base=None, cutoff=None, k=None, c=None, gamma=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        family: &str,
        beta: Option<f64>,
        base: Option<f64>,
        cutoff: Option<&str>,
        k: Option<usize>,
        c: Option<f64>,
        gamma: Option<f64>,
    ) -> PyResult<Self> {
        let cfg = DiscountConfig {
            family: family.to_string(),
            beta,
            base,
            values: None,
            tail_exponent: None,
            tail_ratio: None,
            cutoff: cutoff.map(|kind| CutoffConfig {
                kind: kind.to_string(),
                k,
                c,
                gamma,
            }),
        };
        ndcg_core::discount::Discount::try_from(cfg)
            .map(Discount)
            .map_err(to_py)
    }

    /// Weight of rank `r` (1-based) in a list of `n` items.
    fn weight(&self, r: usize, n: usize) -> f64 {
        self.0.weight(r, n)
    }

    /// "feasible", "borderline" or "infeasible".
    fn feasibility(&self) -> String {
        self.0.classify().class.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Discount({})", self.0)
    }
}

fn grade_set(values: Option<Vec<f64>>, gain: &str) -> PyResult<GradeSet> {
    let gain: Gain = parse("gain", gain)?;
    GradeSet::new(values.unwrap_or_else(|| vec![1.0, 0.0]), gain).map_err(to_py)
}

/// NDCG of `scores` against `grades`. Raises `AssumptionViolated` when no
/// item has positive gain.
#[pyfunction]
#[pyo3(signature = (scores, grades, discount, grade_values=None, gain="identity", tie_break="by_index"))]
fn ndcg(
    scores: Vec<f64>,
    grades: Vec<f64>,
    discount: &Discount,
    grade_values: Option<Vec<f64>>,
    gain: &str,
    tie_break: &str,
) -> PyResult<f64> {
    let gs = grade_set(grade_values, gain)?;
    let tie: TieBreak = parse("tie_break", tie_break)?;
    let data = Dataset::new(scores, grades, &gs).map_err(to_py)?;
    metrics::ndcg(&data, &discount.0, &gs, tie).map_err(to_py)
}

/// Ideal DCG of `grades`.
#[pyfunction]
#[pyo3(signature = (grades, discount, grade_values=None, gain="identity"))]
fn idcg(
    grades: Vec<f64>,
    discount: &Discount,
    grade_values: Option<Vec<f64>>,
    gain: &str,
) -> PyResult<f64> {
    let gs = grade_set(grade_values, gain)?;
    for &g in &grades {
        if gs.index_of(g).is_none() {
            return Err(PyValueError::new_err(format!(
                "grade {g} is not in the grade set"
            )));
        }
    }
    Ok(metrics::idcg(&grades, &discount.0, &gs))
}

fn load(config: &str) -> PyResult<RunConfig> {
    let cfg = RunConfig::from_toml_str(config).map_err(to_py)?;
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// Closed-form limit for the `[world]` and `[discount]` of a TOML config.
/// Returns a dict with `value` (None without a limit), `theorem` and `note`.
#[pyfunction]
fn limit<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = load(config)?;
    let world = cfg.world().map_err(to_py)?;
    let res = limits::limit(world, &cfg.discount).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("value", res.value)?;
    out.set_item("theorem", res.theorem.tag())?;
    out.set_item("note", res.note)?;
    out.set_item("quadrature_error_bound", res.quadrature_error_bound)?;
    Ok(out)
}

/// Runs the `[curve]` section of a TOML config; one dict per (n, scorer).
#[pyfunction]
#[pyo3(signature = (config, threads=None))]
fn curve<'py>(
    py: Python<'py>,
    config: &str,
    threads: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = load(config)?;
    let world = cfg.world().map_err(to_py)?.clone();
    let section = cfg
        .curve
        .clone()
        .ok_or_else(|| PyValueError::new_err("missing [curve] section"))?;
    let opts = RunOptions {
        master_seed: cfg.seed,
        threads,
    };
    let measure = cfg.measure();
    let scorers = cfg.scorers.clone();
    let points = py
        .detach(|| {
            convergence_curve(
                &world,
                &scorers,
                &measure,
                &section.n_grid,
                section.trials,
                opts,
            )
        })
        .map_err(to_py)?;
    points
        .into_iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("n", p.n)?;
            d.set_item("scorer", p.scorer)?;
            d.set_item("mean", p.mean)?;
            d.set_item("sd", p.sd)?;
            d.set_item("ci", p.ci)?;
            d.set_item("trials", p.trials)?;
            d.set_item("skipped", p.skipped)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn ndcg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Discount>()?;
    m.add_function(wrap_pyfunction!(ndcg, m)?)?;
    m.add_function(wrap_pyfunction!(idcg, m)?)?;
    m.add_function(wrap_pyfunction!(limit, m)?)?;
    m.add_function(wrap_pyfunction!(curve, m)?)?;
    m.add(
        "AssumptionViolated",
        m.py().get_type::<AssumptionViolated>(),
    )?;
    Ok(())
}
