//! Python bindings for `evppi-core`.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use evppi_core::analytic::{self, GaussianLinearModel};
use evppi_core::harness::{self, EstimatorKind, EstimatorSettings, ExperimentPlan};
use evppi_core::levels::{self, LevelLaw};
use evppi_core::{Error, RngStream, Split};

create_exception!(evppi, BudgetExhausted, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::BudgetExhausted { .. } => BudgetExhausted::new_err(e.to_string()),
        Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn settings(b: u32, r: Option<f64>, gamma: f64) -> EstimatorSettings {
    EstimatorSettings {
        base: b,
        ratio: r.unwrap_or_else(|| levels::default_ratio(b)),
        gamma,
    }
}

#[pyfunction]
fn normal_pdf(z: f64) -> f64 {
    analytic::std_normal_pdf(z)
}

#[pyfunction]
fn normal_cdf(z: f64) -> f64 {
    analytic::std_normal_cdf(z)
}

#[pyfunction]
fn optimal_ratio(b: u32, q: f64) -> PyResult<f64> {
    levels::optimal_ratio(b, q).map_err(to_py)
}

/// Returns `(M, N)` for a nested EVPPI run with total budget `budget`.
#[pyfunction]
#[pyo3(signature = (budget, gamma = 1.0))]
fn nested_allocation(budget: u64, gamma: f64) -> PyResult<(usize, usize)> {
    evppi_core::estimators::nested_allocation(budget, gamma).map_err(to_py)
}

/// Geometric level law `p(l) = (1 - r) r^(l - 1)`.
#[pyclass(frozen, module = "evppi")]
struct LevelDistribution {
    inner: evppi_core::LevelDistribution,
}

#[pymethods]
impl LevelDistribution {
    #[new]
    #[pyo3(signature = (base = 2, ratio = None))]
    fn new(base: u32, ratio: Option<f64>) -> PyResult<Self> {
        let inner = match ratio {
            Some(r) => evppi_core::LevelDistribution::new(base, r),
            None => evppi_core::LevelDistribution::with_default_ratio(base),
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn base(&self) -> u32 {
        self.inner.base()
    }

    #[getter]
    fn ratio(&self) -> f64 {
        self.inner.ratio()
    }

    fn pmf(&self, level: u32) -> PyResult<f64> {
        self.inner.pmf(level).map_err(to_py)
    }

    fn tail(&self, level: u32) -> PyResult<f64> {
        self.inner.tail(level).map_err(to_py)
    }

    fn expected_cost_per_draw(&self) -> f64 {
        self.inner.expected_cost_per_draw()
    }

    #[pyo3(signature = (n, seed = 0))]
    fn sample(&self, n: usize, seed: u64) -> Vec<u32> {
        let mut rng = RngStream::new(seed, 0);
        (0..n).map(|_| self.inner.sample(&mut rng)).collect()
    }

    /// Level sequence accepted by the budget rule.
    #[pyo3(signature = (budget, seed = 0))]
    fn draws_for_budget(&self, budget: u64, seed: u64) -> PyResult<Vec<u32>> {
        let mut rng = RngStream::new(seed, 0);
        Ok(levels::draws_for_budget(&self.inner, budget, &mut rng)
            .map_err(to_py)?
            .items)
    }

    fn __repr__(&self) -> String {
        format!("LevelDistribution(base={}, ratio={})", self.inner.base(), self.inner.ratio())
    }
}

#[pyclass(frozen, get_all, module = "evppi")]
struct EstimateResult {
    estimate: f64,
    n_draws: usize,
    cost_used: u64,
    term_variance: f64,
    standard_error: f64,
    /// level -> (count, mean, second moment)
    per_level: BTreeMap<u32, (u64, f64, f64)>,
}

#[pymethods]
impl EstimateResult {
    fn __repr__(&self) -> String {
        format!(
            "EstimateResult(estimate={}, n_draws={}, cost_used={})",
            self.estimate, self.n_draws, self.cost_used
        )
    }
}

impl From<evppi_core::EstimateResult> for EstimateResult {
    fn from(r: evppi_core::EstimateResult) -> Self {
        Self {
            estimate: r.estimate,
            n_draws: r.n_draws,
            cost_used: r.cost_used,
            term_variance: r.term_variance,
            standard_error: r.standard_error(),
            per_level: r
                .per_level
                .iter()
                .map(|(&l, s)| (l, (s.count, s.mean, s.second_moment)))
                .collect(),
        }
    }
}

/// Linear Gaussian two-decision model with a closed-form EVPPI.
#[pyclass(frozen, module = "evppi")]
struct ToyModel {
    config: GaussianLinearModel,
    subset: Split,
    toy: analytic::ToyModel,
}

#[pymethods]
impl ToyModel {
    /// `subset` holds 1-based indices of the revealed coordinates; `None`
    /// reveals everything.
    #[new]
    #[pyo3(signature = (w, mu, sigma, w0 = 0.0, subset = None))]
    fn new(w: Vec<f64>, mu: Vec<f64>, sigma: Vec<f64>, w0: f64, subset: Option<Vec<usize>>) -> PyResult<Self> {
        let config = GaussianLinearModel::new(w0, w, mu, sigma).map_err(to_py)?;
        Self::build(config, subset)
    }

    #[staticmethod]
    #[pyo3(signature = (s = 5, subset = None))]
    fn standard(s: usize, subset: Option<Vec<usize>>) -> PyResult<Self> {
        Self::build(GaussianLinearModel::standard(s), subset)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let cfg = analytic::ToyConfig::from_json_str(text).map_err(to_py)?;
        let config = cfg.model().map_err(to_py)?;
        let subset = cfg.split().map_err(to_py)?.unwrap_or_else(|| Split::full(config.dimension()));
        Self::assemble(config, subset)
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.config.dimension()
    }

    #[getter]
    fn subset(&self) -> Vec<usize> {
        self.subset.one_based()
    }

    fn payoff_vector(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.toy.model.payoff_vector(&x).map_err(to_py)
    }

    /// `(value, decision name)` of the best decision at `x`.
    fn max_payoff(&self, x: Vec<f64>) -> PyResult<(f64, String)> {
        let m = self.toy.model.max_payoff(&x).map_err(to_py)?;
        Ok((m.value, self.toy.model.decisions()[m.decision].clone()))
    }

    fn evppi(&self) -> f64 {
        analytic::analytic_evppi(&self.config, &self.subset)
    }

    fn evpi(&self) -> f64 {
        analytic::analytic_evpi(&self.config)
    }

    /// One run of `estimator` (e.g. "evppi-coupled") with total budget `budget`.
    #[pyo3(signature = (estimator, budget, seed = 0, b = 2, r = None, gamma = 1.0))]
    #[allow(clippy::too_many_arguments)]
    fn estimate(
        &self,
        py: Python<'_>,
        estimator: &str,
        budget: u64,
        seed: u64,
        b: u32,
        r: Option<f64>,
        gamma: f64,
    ) -> PyResult<EstimateResult> {
        let kind: EstimatorKind = estimator.parse().map_err(to_py)?;
        let s = settings(b, r, gamma);
        let rng = harness::replication_stream(seed, budget, 0);
        py.detach(|| harness::run_estimator(kind, &self.toy, budget, &s, &rng))
            .map(Into::into)
            .map_err(to_py)
    }

    /// Replicated study; returns the CSV text and the fitted RMSE slope.
    #[pyo3(signature = (estimator, budgets = None, reps = 100, seed = 0, b = 2, r = None, gamma = 1.0))]
    #[allow(clippy::too_many_arguments)]
    fn study(
        &self,
        py: Python<'_>,
        estimator: &str,
        budgets: Option<Vec<u64>>,
        reps: usize,
        seed: u64,
        b: u32,
        r: Option<f64>,
        gamma: f64,
    ) -> PyResult<(String, Option<f64>)> {
        let plan = ExperimentPlan {
            estimator: estimator.parse().map_err(to_py)?,
            budgets: budgets.unwrap_or_else(harness::default_budgets),
            replications: reps,
            model: self.config.clone(),
            subset: self.subset.clone(),
            settings: settings(b, r, gamma),
            seed,
        };
        let report = py.detach(|| harness::run_plan(&plan)).map_err(to_py)?;
        let mut buf = Vec::new();
        harness::write_report_csv(&report, &mut buf).map_err(|e| to_py(e.into()))?;
        Ok((String::from_utf8(buf).expect("csv is ascii"), report.slope))
    }

    fn __repr__(&self) -> String {
        format!(
            "ToyModel(dimension={}, subset={:?})",
            self.config.dimension(),
            self.subset.one_based()
        )
    }
}

impl ToyModel {
    fn build(config: GaussianLinearModel, subset: Option<Vec<usize>>) -> PyResult<Self> {
        let s = config.dimension();
        let subset = match subset {
            Some(u) => Split::from_one_based(s, &u).map_err(to_py)?,
            None => Split::full(s),
        };
        Self::assemble(config, subset)
    }

    fn assemble(config: GaussianLinearModel, subset: Split) -> PyResult<Self> {
        let toy = analytic::make_toy_model(&config, &subset).map_err(to_py)?;
        Ok(Self { config, subset, toy })
    }
}

/// Boxplot statistics as a dict; `outliers` is a list.
#[pyfunction]
fn summarize(py: Python<'_>, estimates: Vec<f64>, truth: f64) -> PyResult<Py<pyo3::types::PyDict>> {
    let s = harness::summarize(&estimates, truth).map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    for (k, v) in [
        ("min", s.min),
        ("q1", s.q1),
        ("median", s.median),
        ("q3", s.q3),
        ("max", s.max),
        ("mean", s.mean),
        ("rmse", s.rmse),
        ("whisker_low", s.whisker_low),
        ("whisker_high", s.whisker_high),
    ] {
        d.set_item(k, v)?;
    }
    d.set_item("count", s.count)?;
    d.set_item("outliers", s.outliers)?;
    Ok(d.unbind())
}

/// Negated least-squares slope of log(rmse) on log(budget).
#[pyfunction]
fn fit_slope(budgets: Vec<f64>, rmse: Vec<f64>) -> PyResult<f64> {
    if budgets.len() != rmse.len() {
        return Err(PyValueError::new_err("budgets and rmse differ in length"));
    }
    let points: Vec<(f64, f64)> = budgets.into_iter().zip(rmse).collect();
    harness::fit_slope(&points).map_err(to_py)
}

#[pymodule]
pub fn evppi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BudgetExhausted", m.py().get_type::<BudgetExhausted>())?;
    m.add("ESTIMATORS", EstimatorKind::ALL.map(EstimatorKind::name).to_vec())?;
    m.add_class::<LevelDistribution>()?;
    m.add_class::<EstimateResult>()?;
    m.add_class::<ToyModel>()?;
    m.add_function(wrap_pyfunction!(normal_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(nested_allocation, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(fit_slope, m)?)?;
    Ok(())
}
