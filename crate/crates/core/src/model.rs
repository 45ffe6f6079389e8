//! Model indicator vectors and the complexity-penalizing model prior.
//!
//! A model selects a subset of the current tree population plus a subset of
//! the fixed covariates. Its prior mass decays geometrically in total
//! complexity: log p(M) = log_penalty * sum of complexities of the selected
//! terms (fixed covariates count 1 each), with models beyond `k_max` terms
//! excluded outright.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::population::Population;

/// How a tree's complexity is counted in the prior.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ComplexityMeasure {
    /// Number of leaf occurrences (a single leaf costs 1).
    #[default]
    Leaves,
    /// Number of AND/OR operators (a single leaf costs 0).
    Operators,
}

/// Prior settings: penalty strength, size truncation, complexity measure.
#[derive(Clone, Copy, Debug)]
pub struct PriorConfig {
    /// log a in p(M) proportional to a^complexity; must be negative so that
    /// larger expressions are penalized.
    pub log_penalty: f64,
    /// Hard cap on the number of selected terms (trees plus fixed).
    pub k_max: usize,
    pub measure: ComplexityMeasure,
}

impl PriorConfig {
    pub fn new(log_penalty: f64, k_max: usize, measure: ComplexityMeasure) -> Result<PriorConfig> {
        if !log_penalty.is_finite() || log_penalty >= 0.0 {
            return Err(Error::Config {
                what: format!("log penalty must be negative and finite, got {log_penalty}"),
            });
        }
        if k_max == 0 {
            return Err(Error::Config {
                what: "k_max must be at least 1".to_string(),
            });
        }
        Ok(PriorConfig {
            log_penalty,
            k_max,
            measure,
        })
    }

    /// Default penalty a = 1/p^2 for data with `p` covariate columns, i.e.
    /// log_penalty = -2 ln p (p is floored at 2 to keep the penalty
    /// negative).
    pub fn default_for_columns(p: usize, k_max: usize) -> Result<PriorConfig> {
        let p_eff = p.max(2) as f64;
        PriorConfig::new(-2.0 * p_eff.ln(), k_max, ComplexityMeasure::default())
    }
}

/// Inclusion indicators over a population's trees and the fixed covariates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Model {
    logic: Vec<bool>,
    fixed: Vec<bool>,
}

impl Model {
    pub fn empty(n_trees: usize, n_fixed: usize) -> Model {
        Model {
            logic: vec![false; n_trees],
            fixed: vec![false; n_fixed],
        }
    }

    pub fn new(logic: Vec<bool>, fixed: Vec<bool>) -> Model {
        Model { logic, fixed }
    }

    pub fn logic(&self) -> &[bool] {
        &self.logic
    }

    pub fn fixed(&self) -> &[bool] {
        &self.fixed
    }

    pub fn n_trees(&self) -> usize {
        self.logic.len()
    }

    pub fn n_fixed(&self) -> usize {
        self.fixed.len()
    }

    /// Combined indicator length: trees first, then fixed covariates.
    pub fn dim(&self) -> usize {
        self.logic.len() + self.fixed.len()
    }

    /// Number of selected terms of both kinds.
    pub fn n_active(&self) -> usize {
        self.logic.iter().filter(|b| **b).count() + self.fixed.iter().filter(|b| **b).count()
    }

    /// Read indicator `i` in the combined coordinate system (trees first).
    pub fn bit(&self, i: usize) -> bool {
        if i < self.logic.len() {
            self.logic[i]
        } else {
            self.fixed[i - self.logic.len()]
        }
    }

    pub fn set_bit(&mut self, i: usize, value: bool) {
        if i < self.logic.len() {
            self.logic[i] = value;
        } else {
            self.fixed[i - self.logic.len()] = value;
        }
    }

    pub fn with_flipped_bit(&self, i: usize) -> Model {
        let mut m = self.clone();
        m.set_bit(i, !m.bit(i));
        m
    }

    pub fn with_flipped_bits<I: IntoIterator<Item = usize>>(&self, bits: I) -> Model {
        let mut m = self.clone();
        for i in bits {
            m.set_bit(i, !m.bit(i));
        }
        m
    }

    /// Indices of selected trees.
    pub fn active_logic(&self) -> impl Iterator<Item = usize> + '_ {
        self.logic
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
    }

    /// Indices of selected fixed covariates.
    pub fn active_fixed(&self) -> impl Iterator<Item = usize> + '_ {
        self.fixed
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
    }

    /// Number of coordinates where two same-shaped models differ.
    pub fn hamming(&self, other: &Model) -> usize {
        debug_assert_eq!(self.logic.len(), other.logic.len());
        debug_assert_eq!(self.fixed.len(), other.fixed.len());
        self.logic
            .iter()
            .zip(&other.logic)
            .chain(self.fixed.iter().zip(&other.fixed))
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// A model is admissible when its total number of selected terms is within
/// the prior's truncation bound.
pub fn is_admissible(m: &Model, cfg: &PriorConfig) -> bool {
    m.n_active() <= cfg.k_max
}

/// Log prior mass up to the normalizing constant:
/// log_penalty * (sum of tree complexities + number of selected fixed
/// covariates).
pub fn log_model_prior(m: &Model, pop: &Population, cfg: &PriorConfig) -> Result<f64> {
    if m.n_trees() != pop.size() {
        return Err(Error::ShapeMismatch {
            what: format!(
                "model over {} trees scored against population of {}",
                m.n_trees(),
                pop.size()
            ),
        });
    }
    if !is_admissible(m, cfg) {
        return Err(Error::Config {
            what: format!(
                "model with {} terms exceeds k_max = {}",
                m.n_active(),
                cfg.k_max
            ),
        });
    }
    let mut total: usize = m
        .active_logic()
        .map(|i| pop.complexity(i, cfg.measure))
        .sum();
    total += m.active_fixed().count();
    Ok(cfg.log_penalty * total as f64)
}

/// Selected tree indices sorted by canonical name, and selected fixed
/// indices sorted by covariate name. This single ordering underlies design
/// matrix columns, stored coefficients, and registry keys, keeping them
/// aligned.
pub fn active_sorted(m: &Model, pop: &Population, data: &Dataset) -> (Vec<usize>, Vec<usize>) {
    let mut trees: Vec<usize> = m.active_logic().collect();
    trees.sort_by(|&a, &b| pop.name(a).cmp(pop.name(b)));
    let mut fixed: Vec<usize> = m.active_fixed().collect();
    fixed.sort_by(|&a, &b| data.fixed[a].name.cmp(&data.fixed[b].name));
    (trees, fixed)
}
