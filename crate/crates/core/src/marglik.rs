//! Gaussian model fitting and the default marginal-likelihood approximating
//! score.
//!
//! Models are fit by least squares through a column-pivoted Householder QR
//! that tolerates rank deficiency: collinear columns are detected at a
//! relative tolerance and their coefficients set to zero, so duplicated or
//! linearly dependent features never poison a fit. The default model score
//! is the BIC-based approximation to the log marginal likelihood under a
//! Jeffreys-style parameter prior:
//!
//! ```text
//! log m(y | M) ~ -(n log(RSS/n) + k_eff log n) / 2
//! ```
//!
//! with `k_eff` the rank of the design (intercept included, variance not
//! counted). Alternative scores plug in through [`MarglikEstimator`].

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{active_sorted, Model};
use crate::population::Population;
use crate::stats;

/// Relative tolerance deciding when a pivoted column is linearly dependent
/// on the ones before it.
pub const RANK_REL_TOL: f64 = 1e-10;

/// A dense design matrix stored column-major; the first column is the
/// intercept (all ones).
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    columns: Vec<Vec<f64>>,
    n: usize,
}

impl DesignMatrix {
    pub fn new(columns: Vec<Vec<f64>>) -> Result<DesignMatrix> {
        let first = columns.first().ok_or_else(|| Error::ShapeMismatch {
            what: "design matrix needs at least the intercept column".to_string(),
        })?;
        let n = first.len();
        if n == 0 {
            return Err(Error::ShapeMismatch {
                what: "design matrix needs at least one row".to_string(),
            });
        }
        if first.iter().any(|&v| v != 1.0) {
            return Err(Error::ShapeMismatch {
                what: "first design column must be the intercept (all ones)".to_string(),
            });
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::ShapeMismatch {
                    what: format!("design column {j} has {} rows, expected {n}", col.len()),
                });
            }
        }
        Ok(DesignMatrix { columns, n })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }
}

/// Assemble the design for a model: intercept, then the selected trees'
/// columns ordered by canonical name, then the selected fixed covariates
/// ordered by name. The ordering matches [`active_sorted`], which is also
/// how stored coefficients and registry keys are laid out.
pub fn build_design(m: &Model, pop: &Population, data: &Dataset) -> Result<DesignMatrix> {
    if m.n_trees() != pop.size() || m.n_fixed() != data.n_fixed() {
        return Err(Error::ShapeMismatch {
            what: format!(
                "model over {} trees / {} fixed against population of {} and data with {}",
                m.n_trees(),
                m.n_fixed(),
                pop.size(),
                data.n_fixed()
            ),
        });
    }
    let (trees, fixed) = active_sorted(m, pop, data);
    let n = data.n();
    let mut columns = Vec::with_capacity(1 + trees.len() + fixed.len());
    columns.push(vec![1.0; n]);
    for i in trees {
        columns.push(pop.column(i).iter().map(|&v| v as f64).collect());
    }
    for i in fixed {
        columns.push(data.fixed[i].values.clone());
    }
    DesignMatrix::new(columns)
}

/// Least-squares fit summary.
#[derive(Clone, Debug)]
pub struct FitResult {
    /// One coefficient per design column (zero for columns dropped as
    /// linearly dependent), in design order.
    pub coefficients: Vec<f64>,
    /// Residual sum of squares.
    pub rss: f64,
    pub n: usize,
    /// Numerical rank of the design.
    pub rank: usize,
}

/// Least squares via column-pivoted Householder QR.
///
/// At each step the remaining column with the largest residual norm is
/// chosen (first index wins ties); elimination stops when that norm falls
/// below [`RANK_REL_TOL`] times the largest initial pivot, and every column
/// not yet eliminated gets coefficient zero. Requires strictly more rows
/// than columns.
pub fn fit_gaussian(design: &DesignMatrix, y: &[f64]) -> Result<FitResult> {
    let n = design.n_rows();
    let k = design.n_cols();
    if y.len() != n {
        return Err(Error::ShapeMismatch {
            what: format!("{} response values for {} design rows", y.len(), n),
        });
    }
    if n <= k {
        return Err(Error::Underdetermined {
            parameters: k,
            observations: n,
        });
    }

    let mut a: Vec<Vec<f64>> = design.columns.clone();
    let mut qty = y.to_vec();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut rdiag = vec![0.0f64; k];
    let mut rank = k;
    let mut first_pivot = 0.0f64;

    let tail_norm2 = |col: &[f64], from: usize| -> f64 { col[from..].iter().map(|v| v * v).sum() };

    for j in 0..k {
        // pivot: remaining column with the largest norm below row j
        let mut best = j;
        let mut best_norm2 = tail_norm2(&a[j], j);
        for c in (j + 1)..k {
            let norm2 = tail_norm2(&a[c], j);
            if norm2 > best_norm2 {
                best = c;
                best_norm2 = norm2;
            }
        }
        a.swap(j, best);
        perm.swap(j, best);
        let norm = best_norm2.sqrt();
        if j == 0 {
            first_pivot = norm;
        }
        if norm <= RANK_REL_TOL * first_pivot {
            rank = j;
            break;
        }

        // Householder reflector for column j
        let mut v: Vec<f64> = a[j][j..].to_vec();
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        rdiag[j] = alpha;
        if vnorm2 > 0.0 {
            for c in (j + 1)..k {
                let dot: f64 = v.iter().zip(&a[c][j..]).map(|(u, w)| u * w).sum();
                let scale = 2.0 * dot / vnorm2;
                for (u, w) in v.iter().zip(a[c][j..].iter_mut()) {
                    *w -= scale * u;
                }
            }
            let dot: f64 = v.iter().zip(&qty[j..]).map(|(u, w)| u * w).sum();
            let scale = 2.0 * dot / vnorm2;
            for (u, w) in v.iter().zip(qty[j..].iter_mut()) {
                *w -= scale * u;
            }
        }
    }

    // back-substitute on the leading rank x rank triangle; the dropped
    // (pivoted-out) columns keep coefficient zero
    let mut w = vec![0.0f64; k];
    for j in (0..rank).rev() {
        let mut s = qty[j];
        for c in (j + 1)..rank {
            s -= a[c][j] * w[c];
        }
        w[j] = s / rdiag[j];
    }
    let mut coefficients = vec![0.0f64; k];
    for j in 0..rank {
        coefficients[perm[j]] = w[j];
    }

    // residuals from the original, unfactored design
    let mut rss = 0.0;
    for i in 0..n {
        let mut fit = 0.0;
        for c in 0..k {
            fit += design.columns[c][i] * coefficients[c];
        }
        let r = y[i] - fit;
        rss += r * r;
    }

    Ok(FitResult {
        coefficients,
        rss,
        n,
        rank,
    })
}

/// The BIC-based log marginal likelihood value for a fit with the given
/// residual sum of squares and effective parameter count. `rss` is floored
/// at `rss_floor` so that perfect fits stay finite.
pub fn log_marglik_from_rss(n: usize, rss: f64, k_eff: usize, rss_floor: f64) -> f64 {
    let nf = n as f64;
    let r = rss.max(rss_floor);
    -0.5 * (nf * (r / nf).ln() + k_eff as f64 * nf.ln())
}

/// Fitted score and coefficients for one model.
#[derive(Clone, Debug)]
pub struct ModelFit {
    pub log_marglik: f64,
    /// Design-ordered coefficients (intercept first).
    pub coefficients: Vec<f64>,
    /// Effective parameter count used in the score.
    pub rank: usize,
}

/// Anything that can score a model on data. Implementations must be usable
/// from parallel chains, hence `Sync`.
pub trait MarglikEstimator: Sync {
    fn evaluate(&self, m: &Model, pop: &Population, data: &Dataset) -> Result<ModelFit>;
}

/// The default estimator: Gaussian least squares plus the BIC approximation.
#[derive(Clone, Copy, Debug)]
pub struct JeffreysBic {
    /// The RSS floor is `n * rss_rel_tol * var(y)`.
    pub rss_rel_tol: f64,
}

impl Default for JeffreysBic {
    fn default() -> Self {
        JeffreysBic { rss_rel_tol: 1e-12 }
    }
}

impl MarglikEstimator for JeffreysBic {
    fn evaluate(&self, m: &Model, pop: &Population, data: &Dataset) -> Result<ModelFit> {
        let design = build_design(m, pop, data)?;
        let fit = fit_gaussian(&design, &data.y)?;
        let var_y = stats::variance(&data.y);
        let mut floor = fit.n as f64 * self.rss_rel_tol * var_y;
        if !(floor > 0.0) {
            floor = 1e-300; // constant response: any positive floor keeps logs finite
        }
        let log_marglik = log_marglik_from_rss(fit.n, fit.rss, fit.rank, floor);
        Ok(ModelFit {
            log_marglik,
            coefficients: fit.coefficients,
            rank: fit.rank,
        })
    }
}
