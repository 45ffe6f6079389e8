//! Python bindings for the Boolean-expression regression engine.
//!
//! The module mirrors the command-line workflow: `simulate` produces a
//! [`Dataset`], `fit` searches it and returns a [`FitResult`] whose report
//! lists expressions with marginal inclusion probabilities, and
//! [`FitResult::predict`] / [`ridge_predict`] / `score` cover the
//! prediction benchmark. [`Expression`] wraps a single logic tree for
//! parsing, canonicalization, and truth-table comparison.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use boolreg::metrics::generate_study_data;
use boolreg::{
    aggregate_chains, predict_bma, predict_single, report_expressions, ridge_baseline, run_chains,
    score_predictions, AggregateReport, AggregationMode, CovariateGenerator, GeneticMap, GmjConfig,
    LogicTree, PredictionResult, Scenario, SelectionRule, VisitedRegistry,
};

/// Invalid input maps to `ValueError`; numerical/search failures to
/// `RuntimeError`.
fn to_py(e: boolreg::Error) -> PyErr {
    use boolreg::Error as E;
    match e {
        E::Parse { .. }
        | E::LeafOutOfRange { .. }
        | E::TooManyLeaves { .. }
        | E::NotBinary { .. }
        | E::ShapeMismatch { .. }
        | E::Config { .. }
        | E::UnknownColumn { .. }
        | E::InsufficientColumns { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// A logic tree over binary columns: and/or/not combinations of leaves
/// named `X1`, `X2`, ... (one-based in the text form).
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Expression {
    inner: LogicTree,
}

#[pymethods]
impl Expression {
    /// Parse an expression such as `"(X1&!(X2|X7))"`.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Expression {
            inner: boolreg::expr::parse(text).map_err(to_py)?,
        })
    }

    /// The canonical (operand-sorted) text form.
    #[getter]
    fn canonical(&self) -> String {
        self.inner.canonical()
    }

    #[getter]
    fn leaf_count(&self) -> usize {
        self.inner.leaf_count()
    }

    #[getter]
    fn operator_count(&self) -> usize {
        self.inner.operator_count()
    }

    /// Zero-based column indices appearing in the expression.
    fn distinct_leaves(&self) -> Vec<usize> {
        self.inner.distinct_leaves().into_iter().collect()
    }

    /// Evaluate against a dataset's binary columns, returning one 0/1 per row.
    fn evaluate(&self, data: &Dataset) -> PyResult<Vec<u32>> {
        let column = self.inner.evaluate(&data.inner.x).map_err(to_py)?;
        Ok(column.into_iter().map(u32::from).collect())
    }

    /// Compare truth tables: returns `(equivalent, complementary)`.
    fn compare(&self, other: &Expression) -> PyResult<(bool, bool)> {
        let eq = boolreg::expr::truth_equivalent(&self.inner, &other.inner).map_err(to_py)?;
        Ok((eq.equivalent, eq.complement))
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expression({:?})", self.inner.to_string())
    }
}

/// Binary covariates plus a numeric response, with optional fixed
/// (non-binary) covariates and simulation ground truth.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: boolreg::Dataset,
}

#[pymethods]
impl Dataset {
    /// Read a CSV whose columns are binary covariates, the named fixed
    /// covariates, and the named response.
    #[staticmethod]
    #[pyo3(signature = (path, response="Y", fixed=vec![]))]
    fn read_csv(path: &str, response: &str, fixed: Vec<String>) -> PyResult<Self> {
        Ok(Dataset {
            inner: boolreg::Dataset::read_csv(path, response, &fixed).map_err(to_py)?,
        })
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        self.inner.write_csv(path).map_err(to_py)
    }

    /// Number of rows.
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Number of binary covariate columns.
    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn column_names(&self) -> Vec<String> {
        self.inner.x_names.clone()
    }

    #[getter]
    fn fixed_names(&self) -> Vec<String> {
        self.inner.fixed.iter().map(|f| f.name.clone()).collect()
    }

    #[getter]
    fn response_name(&self) -> String {
        self.inner.response_name.clone()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.y.clone()
    }

    /// Canonical names of the data-generating trees and fixed covariates,
    /// when this dataset was simulated.
    #[getter]
    fn truth(&self) -> Option<Vec<String>> {
        self.inner.truth.as_ref().map(|t| {
            t.trees
                .iter()
                .map(|tree| tree.canonical())
                .chain(t.fixed.iter().cloned())
                .collect()
        })
    }

    /// Split rows into a leading part and the rest (train/test style).
    fn split_at_row(&self, n_head: usize) -> PyResult<(Dataset, Dataset)> {
        let (head, tail) = self.inner.split_at_row(n_head).map_err(to_py)?;
        Ok((Dataset { inner: head }, Dataset { inner: tail }))
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, p={}, fixed={}, response={:?})",
            self.inner.n(),
            self.inner.p(),
            self.inner.n_fixed(),
            self.inner.response_name
        )
    }
}

/// Simulate one of the built-in benchmark scenarios
/// (`"scenario4"`, `"scenario4age"`, `"scenario5"`).
///
/// With `backcross=False` the covariates are thresholded correlated
/// normals; otherwise they are back-cross genotypes on the default
/// five-chromosome map (and `p` is ignored).
#[pyfunction]
#[pyo3(signature = (scenario, n, seed, p=50, alphad=2.5, margprob=0.5, backcross=false, permute=false, noise_sd=1.0))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    scenario: &str,
    n: usize,
    seed: u64,
    p: usize,
    alphad: f64,
    margprob: f64,
    backcross: bool,
    permute: bool,
    noise_sd: f64,
) -> PyResult<Dataset> {
    let scenario = Scenario::parse_name(scenario).map_err(to_py)?;
    let generator = if backcross {
        CovariateGenerator::Backcross {
            map: GeneticMap::default_map(),
            permute,
        }
    } else {
        CovariateGenerator::General {
            p,
            alphad,
            margprob,
        }
    };
    let (data, _) = generate_study_data(scenario, &generator, n, noise_sd, seed).map_err(to_py)?;
    Ok(Dataset { inner: data })
}

/// A fitted search: the merged registry of visited models plus the
/// aggregated marginal inclusion probabilities.
#[pyclass]
struct FitResult {
    registry: VisitedRegistry,
    train: boolreg::Dataset,
    aggregate: AggregateReport,
}

#[pymethods]
impl FitResult {
    /// All expressions and fixed covariates with their aggregated marginal
    /// inclusion probabilities, best first. Raw view: written forms that
    /// carry the same signal are listed separately (`report` pools them).
    #[getter]
    fn inclusions(&self) -> Vec<(String, f64)> {
        let mut rows: Vec<(String, f64)> = self
            .aggregate
            .inclusions
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        rows
    }

    /// Normalized cross-chain weights used by the aggregation.
    #[getter]
    fn chain_weights(&self) -> Vec<f64> {
        self.aggregate.chain_weights.clone()
    }

    /// Number of distinct models the search retained.
    #[getter]
    fn visited(&self) -> usize {
        self.registry.len()
    }

    /// The inclusions at or above a probability threshold, with same-signal
    /// written forms pooled into one entry.
    #[pyo3(signature = (threshold=0.5))]
    fn report(&self, threshold: f64) -> Vec<(String, f64)> {
        report_expressions(&self.aggregate, threshold)
    }

    /// The highest-posterior model, as `term+term+...` (or `(intercept)`).
    #[getter]
    fn best_model(&self) -> PyResult<String> {
        let record = self
            .registry
            .best()
            .ok_or_else(|| PyRuntimeError::new_err("empty fit"))?;
        Ok(record.key.to_string())
    }

    /// Predict the response on new rows. `method` is `"bma"` (model
    /// averaging over the `num_best` highest-posterior models),
    /// `"median"` (refit the median-probability model), or `"map"`
    /// (refit the best model). Returns `(values, note)`.
    #[pyo3(signature = (test, method="bma", num_best=100))]
    fn predict(
        &self,
        test: &Dataset,
        method: &str,
        num_best: usize,
    ) -> PyResult<(Vec<f64>, Option<String>)> {
        let result: PredictionResult = match method {
            "bma" => predict_bma(&self.registry, &test.inner, num_best).map_err(to_py)?,
            "median" => predict_single(
                &self.registry,
                &self.train,
                &test.inner,
                SelectionRule::MedianProbability,
            )
            .map_err(to_py)?,
            "map" => predict_single(&self.registry, &self.train, &test.inner, SelectionRule::Map)
                .map_err(to_py)?,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown method {other:?} (expected bma, median, or map)"
                )))
            }
        };
        Ok((result.values, result.note))
    }

    fn __repr__(&self) -> String {
        format!(
            "FitResult(visited={}, terms={})",
            self.registry.len(),
            self.aggregate.inclusions.len()
        )
    }
}

/// Search a dataset for Boolean-expression regressors.
///
/// Every keyword defaults to the engine's standard setting; pass only what
/// you want to change. `aggregation` is `"weighted"` (mass-weighted
/// average of per-chain inclusions) or `"union"` (renormalize once over
/// the union of visited models).
#[pyfunction]
#[pyo3(signature = (data, *, d=None, c_max=None, k_max=None, p_and=None, p_not=None,
    rho_min=None, fresh_leaf_prob=None, t_max=None, explore_iters=None, final_iters=None,
    m_fin=None, chains=None, seed=None, log_penalty=None, aggregation=None))]
#[allow(clippy::too_many_arguments)]
fn fit(
    data: &Dataset,
    d: Option<usize>,
    c_max: Option<usize>,
    k_max: Option<usize>,
    p_and: Option<f64>,
    p_not: Option<f64>,
    rho_min: Option<f64>,
    fresh_leaf_prob: Option<f64>,
    t_max: Option<usize>,
    explore_iters: Option<usize>,
    final_iters: Option<usize>,
    m_fin: Option<usize>,
    chains: Option<usize>,
    seed: Option<u64>,
    log_penalty: Option<f64>,
    aggregation: Option<&str>,
) -> PyResult<FitResult> {
    let mut cfg = GmjConfig::default();
    macro_rules! apply {
        ($($field:ident),*) => {
            $(if let Some(v) = $field { cfg.$field = v; })*
        };
    }
    apply!(
        d,
        c_max,
        k_max,
        p_and,
        p_not,
        rho_min,
        fresh_leaf_prob,
        t_max,
        explore_iters,
        final_iters,
        m_fin,
        chains,
        seed
    );
    if log_penalty.is_some() {
        cfg.log_penalty = log_penalty;
    }
    let mode = match aggregation.unwrap_or("weighted") {
        "weighted" => AggregationMode::WeightedMass,
        "union" => AggregationMode::UnionRenormalized,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown aggregation {other:?} (expected weighted or union)"
            )))
        }
    };
    let results = run_chains(&data.inner, &cfg).map_err(to_py)?;
    let aggregate = aggregate_chains(&results, mode).map_err(to_py)?;
    let mut registry = VisitedRegistry::new(
        results
            .iter()
            .map(|r| r.registry.len())
            .sum::<usize>()
            .max(1),
    );
    for r in &results {
        registry.merge_from(&r.registry);
    }
    Ok(FitResult {
        registry,
        train: data.inner.clone(),
        aggregate,
    })
}

/// Ridge baseline on the raw columns with AIC-selected penalty.
/// Returns `(values, lambda, degrees_of_freedom)`.
#[pyfunction]
fn ridge_predict(train: &Dataset, test: &Dataset) -> PyResult<(Vec<f64>, f64, f64)> {
    let outcome = ridge_baseline(&train.inner, &test.inner, None).map_err(to_py)?;
    Ok((
        outcome.prediction.values,
        outcome.lambda,
        outcome.degrees_of_freedom,
    ))
}

/// Root mean squared error and mean absolute error of predictions.
#[pyfunction]
fn score(predictions: Vec<f64>, actual: Vec<f64>) -> PyResult<(f64, f64)> {
    let s = score_predictions(&predictions, &actual).map_err(to_py)?;
    Ok((s.rmse, s.mae))
}

#[pymodule]
fn boolreg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Expression>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<FitResult>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(ridge_predict, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    Ok(())
}
