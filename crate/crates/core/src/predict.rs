//! Out-of-sample prediction from a fitted model registry.
//!
//! Model-averaged predictions weight each retained model's least-squares
//! fit by its renormalized posterior probability over the top-scoring
//! records. Single-model prediction refits either the median-probability
//! model (terms with inclusion at least one half) or the highest-scoring
//! model. A ridge baseline with AIC-selected penalty provides the
//! comparison point.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::expr::parse;
use crate::marglik::{fit_gaussian, DesignMatrix};
use crate::registry::{marginal_inclusions, ModelKey, VisitedRegistry};
use crate::stats;

/// How a prediction was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictionMethod {
    /// Posterior-weighted average over the top retained models.
    Bma,
    MedianProbability,
    /// The single highest-scoring model.
    Map,
    Ridge,
}

/// Single-model selection rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionRule {
    MedianProbability,
    Map,
}

/// Predicted values plus provenance.
#[derive(Clone, Debug)]
pub struct PredictionResult {
    pub values: Vec<f64>,
    pub method: PredictionMethod,
    /// Set when something noteworthy happened (e.g. an empty model fell
    /// back to the training mean).
    pub note: Option<String>,
}

/// Prediction quality: root-mean-squared error and mean absolute error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionScores {
    pub rmse: f64,
    pub mae: f64,
}

/// Design columns a model key implies on a dataset: intercept, then each
/// expression, then each fixed covariate (already sorted inside the key).
fn design_columns(key: &ModelKey, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(1 + key.n_terms());
    columns.push(vec![1.0; data.n()]);
    for expr in key.exprs() {
        let tree = parse(expr)?;
        columns.push(tree.evaluate(&data.x)?.into_iter().map(f64::from).collect());
    }
    for name in key.fixed() {
        let idx = data
            .fixed_index(name)
            .ok_or_else(|| Error::UnknownColumn { name: name.clone() })?;
        columns.push(data.fixed[idx].values.clone());
    }
    Ok(columns)
}

fn linear_prediction(columns: &[Vec<f64>], coefficients: &[f64]) -> Result<Vec<f64>> {
    if columns.len() != coefficients.len() {
        return Err(Error::ShapeMismatch {
            what: format!(
                "{} design columns but {} coefficients",
                columns.len(),
                coefficients.len()
            ),
        });
    }
    let n = columns.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for (column, beta) in columns.iter().zip(coefficients) {
        for (o, v) in out.iter_mut().zip(column) {
            *o += beta * v;
        }
    }
    Ok(out)
}

/// Bayesian model averaging over the `num_best` highest-scoring records,
/// with probabilities renormalized over that subset. Requires coefficients
/// to have been retained during fitting.
pub fn predict_bma(
    registry: &VisitedRegistry,
    test: &Dataset,
    num_best: usize,
) -> Result<PredictionResult> {
    if registry.is_empty() || num_best == 0 {
        return Err(Error::EmptyRegistry);
    }
    let top = registry.top_records(num_best);
    let max_target = top
        .iter()
        .map(|r| r.log_target())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max_target.is_finite() {
        return Err(Error::EmptyRegistry);
    }
    let raw: Vec<f64> = top
        .iter()
        .map(|r| (r.log_target() - max_target).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    let mut values = vec![0.0; test.n()];
    for (record, weight) in top.iter().zip(raw) {
        let coefficients =
            record
                .coefficients
                .as_ref()
                .ok_or_else(|| Error::MissingCoefficients {
                    key: record.key.to_string(),
                })?;
        let columns = design_columns(&record.key, test)?;
        let prediction = linear_prediction(&columns, coefficients)?;
        let w = weight / total;
        for (v, p) in values.iter_mut().zip(prediction) {
            *v += w * p;
        }
    }
    Ok(PredictionResult {
        values,
        method: PredictionMethod::Bma,
        note: None,
    })
}

/// Refit one model key on training data and predict test rows with it.
fn refit_and_predict(key: &ModelKey, train: &Dataset, test: &Dataset) -> Result<Vec<f64>> {
    let train_columns = design_columns(key, train)?;
    let design = DesignMatrix::new(train_columns)?;
    let fit = fit_gaussian(&design, &train.y)?;
    let test_columns = design_columns(key, test)?;
    linear_prediction(&test_columns, &fit.coefficients)
}

/// Predict with a single selected model, refit on the training data.
pub fn predict_single(
    registry: &VisitedRegistry,
    train: &Dataset,
    test: &Dataset,
    rule: SelectionRule,
) -> Result<PredictionResult> {
    let (key, method, note) = match rule {
        SelectionRule::Map => {
            let best = registry.best().ok_or(Error::EmptyRegistry)?;
            (best.key.clone(), PredictionMethod::Map, None)
        }
        SelectionRule::MedianProbability => {
            let inclusions = marginal_inclusions(&registry.posterior_renormalized()?);
            let mut exprs = Vec::new();
            let mut fixed = Vec::new();
            for (term, inclusion) in &inclusions {
                if *inclusion < 0.5 {
                    continue;
                }
                if train.fixed.iter().any(|f| &f.name == term) {
                    fixed.push(term.clone());
                } else {
                    parse(term)?;
                    exprs.push(term.clone());
                }
            }
            let note = if exprs.is_empty() && fixed.is_empty() {
                Some("median-probability model is empty; predicting the training mean".to_string())
            } else {
                None
            };
            (
                ModelKey::new(exprs, fixed),
                PredictionMethod::MedianProbability,
                note,
            )
        }
    };
    let values = refit_and_predict(&key, train, test)?;
    Ok(PredictionResult {
        values,
        method,
        note,
    })
}

/// RMSE and MAE of predictions against observed values.
pub fn score_predictions(predicted: &[f64], actual: &[f64]) -> Result<PredictionScores> {
    if predicted.len() != actual.len() || predicted.is_empty() {
        return Err(Error::ShapeMismatch {
            what: format!(
                "{} predictions against {} observations",
                predicted.len(),
                actual.len()
            ),
        });
    }
    let n = predicted.len() as f64;
    let mut sq = 0.0;
    let mut abs = 0.0;
    for (p, a) in predicted.iter().zip(actual) {
        let d = p - a;
        sq += d * d;
        abs += d.abs();
    }
    Ok(PredictionScores {
        rmse: (sq / n).sqrt(),
        mae: abs / n,
    })
}

/// The default ridge penalty grid: 100 log-spaced multiples of the response
/// variance, from 1e-4 to 1e4.
pub fn default_lambda_grid(var_y: f64) -> Vec<f64> {
    let scale = var_y.max(1e-12);
    let (lo, hi) = (1e-4f64.ln(), 1e4f64.ln());
    (0..100)
        .map(|i| (lo + (hi - lo) * i as f64 / 99.0).exp() * scale)
        .collect()
}

/// A ridge fit's outcome.
#[derive(Clone, Debug)]
pub struct RidgeOutcome {
    pub prediction: PredictionResult,
    /// The AIC-selected penalty.
    pub lambda: f64,
    /// Effective degrees of freedom at the selected penalty.
    pub degrees_of_freedom: f64,
}

/// Ridge regression on all covariates (binary columns and fixed covariates,
/// standardized; intercept unpenalized), with the penalty chosen by AIC over
/// the grid and predictions on the test rows.
pub fn ridge_baseline(
    train: &Dataset,
    test: &Dataset,
    grid: Option<&[f64]>,
) -> Result<RidgeOutcome> {
    if test.x.p() != train.x.p() || test.fixed.len() != train.fixed.len() {
        return Err(Error::ShapeMismatch {
            what: format!(
                "test data has {} binary and {} fixed columns, training data {} and {}",
                test.x.p(),
                test.fixed.len(),
                train.x.p(),
                train.fixed.len()
            ),
        });
    }
    let n = train.x.n();
    let raw_columns = |data: &Dataset| -> Vec<Vec<f64>> {
        let mut cols: Vec<Vec<f64>> = data
            .x
            .columns()
            .iter()
            .map(|c| c.iter().map(|&v| v as f64).collect())
            .collect();
        cols.extend(data.fixed.iter().map(|f| f.values.clone()));
        cols
    };
    let train_cols = raw_columns(train);
    // standardize by training moments, dropping constant columns
    let mut kept = Vec::new();
    let mut means = Vec::new();
    let mut sds = Vec::new();
    for (j, col) in train_cols.iter().enumerate() {
        let m = stats::mean(col);
        let sd = stats::variance(col).sqrt();
        if sd > 1e-12 {
            kept.push(j);
            means.push(m);
            sds.push(sd);
        }
    }
    let m = kept.len();
    let y_bar = stats::mean(&train.y);
    let y_centered = DVector::from_iterator(n, train.y.iter().map(|&v| v - y_bar));
    if m == 0 {
        // nothing to regress on: every prediction is the training mean
        return Ok(RidgeOutcome {
            prediction: PredictionResult {
                values: vec![y_bar; test.x.n()],
                method: PredictionMethod::Ridge,
                note: Some("all covariates are constant".to_string()),
            },
            lambda: 0.0,
            degrees_of_freedom: 1.0,
        });
    }
    let x = DMatrix::from_fn(n, m, |i, jj| {
        (train_cols[kept[jj]][i] - means[jj]) / sds[jj]
    });
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let alpha = u.transpose() * &y_centered;

    let default_grid;
    let grid = match grid {
        Some(g) if !g.is_empty() => g,
        _ => {
            default_grid = default_lambda_grid(stats::variance(&train.y));
            &default_grid
        }
    };
    let mut best: Option<(f64, f64, f64)> = None; // (aic, lambda, df)
    let mut grid_sorted: Vec<f64> = grid.to_vec();
    grid_sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite lambda"));
    for &lambda in &grid_sorted {
        if !(lambda >= 0.0) {
            return Err(Error::Config {
                what: format!("ridge penalty must be non-negative, got {lambda}"),
            });
        }
        let (fitted, df) = ridge_fit(&svd.singular_values, u, &alpha, lambda);
        let residual = &y_centered - fitted;
        let rss = residual.norm_squared().max(1e-300);
        let aic = n as f64 * (rss / n as f64).ln() + 2.0 * (df + 1.0);
        if best.map_or(true, |(b, _, _)| aic < b) {
            best = Some((aic, lambda, df + 1.0));
        }
    }
    let (_, lambda, df) = best.expect("non-empty grid");
    // coefficients at the chosen penalty, mapped back to raw scale
    let shrink = DVector::from_iterator(
        svd.singular_values.len(),
        svd.singular_values.iter().map(|&s| {
            if s * s + lambda < 1e-300 {
                0.0
            } else {
                s / (s * s + lambda)
            }
        }),
    );
    let scaled = DVector::from_iterator(
        alpha.len(),
        alpha.iter().zip(shrink.iter()).map(|(a, d)| a * d),
    );
    let beta = v_t.transpose() * scaled;
    let test_cols = raw_columns(test);
    let mut values = vec![y_bar; test.x.n()];
    for jj in 0..m {
        let col = &test_cols[kept[jj]];
        for (v, &raw) in values.iter_mut().zip(col) {
            *v += beta[jj] * (raw - means[jj]) / sds[jj];
        }
    }
    Ok(RidgeOutcome {
        prediction: PredictionResult {
            values,
            method: PredictionMethod::Ridge,
            note: None,
        },
        lambda,
        degrees_of_freedom: df,
    })
}

/// Fitted values (centered scale) and penalized degrees of freedom for one
/// ridge penalty, from the training SVD.
fn ridge_fit(
    singular_values: &DVector<f64>,
    u: &DMatrix<f64>,
    alpha: &DVector<f64>,
    lambda: f64,
) -> (DVector<f64>, f64) {
    let k = singular_values.len();
    let mut df = 0.0;
    let mut scaled = DVector::zeros(k);
    for i in 0..k {
        let s2 = singular_values[i] * singular_values[i];
        if s2 + lambda < 1e-300 {
            continue;
        }
        let h = s2 / (s2 + lambda);
        df += h;
        scaled[i] = h * alpha[i];
    }
    (u * scaled, df)
}
