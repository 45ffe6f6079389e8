//! Bookkeeping of every model a chain has evaluated, and the posterior
//! estimates built from that set.
//!
//! Two estimators are provided. The renormalized estimate divides each
//! visited model's (unnormalized) posterior mass by the total mass of the
//! visited set; it is exact whenever the visited set covers the whole model
//! space. The frequency estimate counts occurrences in the chain trace after
//! burn-in, which is the classical MCMC route and is used mainly as a
//! diagnostic.
//!
//! The registry is capacity-bounded: when full, the lowest-mass entry other
//! than the incumbent best is dropped, so the best model found is never
//! forgotten.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{active_sorted, Model};
use crate::population::Population;
use crate::stats;

/// Population-independent identity of a model: the canonical strings of its
/// trees plus the names of its fixed covariates, each list sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelKey {
    exprs: Vec<String>,
    fixed: Vec<String>,
}

impl ModelKey {
    pub fn new(mut exprs: Vec<String>, mut fixed: Vec<String>) -> ModelKey {
        exprs.sort();
        fixed.sort();
        ModelKey { exprs, fixed }
    }

    /// Key of a model relative to its population and data.
    pub fn from_model(m: &Model, pop: &Population, data: &Dataset) -> ModelKey {
        let (trees, fixed) = active_sorted(m, pop, data);
        ModelKey {
            exprs: trees.iter().map(|&i| pop.name(i).to_string()).collect(),
            fixed: fixed.iter().map(|&i| data.fixed[i].name.clone()).collect(),
        }
    }

    /// Sorted canonical expression strings.
    pub fn exprs(&self) -> &[String] {
        &self.exprs
    }

    /// Sorted fixed covariate names.
    pub fn fixed(&self) -> &[String] {
        &self.fixed
    }

    pub fn n_terms(&self) -> usize {
        self.exprs.len() + self.fixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exprs.is_empty() && self.fixed.is_empty()
    }

    pub fn contains_expr(&self, canonical: &str) -> bool {
        self.exprs
            .binary_search_by(|e| e.as_str().cmp(canonical))
            .is_ok()
    }
}

impl fmt::Display for ModelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("(intercept)");
        }
        let mut first = true;
        for part in self.exprs.iter().chain(self.fixed.iter()) {
            if !first {
                f.write_str("+")?;
            }
            f.write_str(part)?;
            first = false;
        }
        Ok(())
    }
}

/// Everything remembered about one visited model.
#[derive(Clone, Debug)]
pub struct ModelRecord {
    pub key: ModelKey,
    pub log_marglik: f64,
    pub log_prior: f64,
    /// Design-ordered coefficients (intercept, then trees by name, then
    /// fixed by name); absent when coefficient retention is off.
    pub coefficients: Option<Vec<f64>>,
    /// How many times any chain evaluated or revisited this model.
    pub visits: u64,
}

impl ModelRecord {
    /// Unnormalized log posterior mass.
    pub fn log_target(&self) -> f64 {
        self.log_marglik + self.log_prior
    }
}

/// Capacity-bounded map from model keys to their records.
#[derive(Clone, Debug)]
pub struct VisitedRegistry {
    map: HashMap<ModelKey, ModelRecord>,
    capacity: usize,
    best: Option<ModelKey>,
}

impl VisitedRegistry {
    /// `capacity` is the maximum number of retained records (at least 1).
    pub fn new(capacity: usize) -> VisitedRegistry {
        VisitedRegistry {
            map: HashMap::new(),
            capacity: capacity.max(1),
            best: None,
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, key: &ModelKey) -> Option<&ModelRecord> {
        self.map.get(key)
    }

    /// Register a revisit: bump the counter and return the stored mass.
    pub fn touch(&mut self, key: &ModelKey) -> Option<f64> {
        self.map.get_mut(key).map(|rec| {
            rec.visits += 1;
            rec.log_target()
        })
    }

    /// Record with the highest mass seen so far (survives eviction).
    pub fn best(&self) -> Option<&ModelRecord> {
        self.best.as_ref().and_then(|k| self.map.get(k))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ModelRecord> {
        self.map.values()
    }

    /// Insert a record. An existing record under the same key only absorbs
    /// the new visit count. May evict the lowest-mass non-best record when
    /// over capacity; ties are resolved by key order so the outcome never
    /// depends on map iteration order.
    pub fn insert(&mut self, record: ModelRecord) {
        if let Some(existing) = self.map.get_mut(&record.key) {
            existing.visits += record.visits;
            return;
        }
        let is_better = match self.best().map(|b| (b.log_target(), b.key.clone())) {
            None => true,
            Some((best_t, best_k)) => {
                let t = record.log_target();
                t > best_t || (t == best_t && record.key < best_k)
            }
        };
        if is_better {
            self.best = Some(record.key.clone());
        }
        self.map.insert(record.key.clone(), record);
        while self.map.len() > self.capacity {
            self.evict_worst();
        }
    }

    fn evict_worst(&mut self) {
        let mut worst: Option<(f64, &ModelKey)> = None;
        for (key, rec) in &self.map {
            if Some(key) == self.best.as_ref() {
                continue;
            }
            let t = rec.log_target();
            worst = match worst {
                None => Some((t, key)),
                // lower mass is worse; on equal mass the larger key goes
                Some((wt, wk)) if t < wt || (t == wt && key > wk) => Some((t, key)),
                keep => keep,
            };
        }
        if let Some((_, key)) = worst {
            let key = key.clone();
            self.map.remove(&key);
        }
    }

    /// Merge every record of `other` into this registry (summing visit
    /// counts for shared keys). Subject to this registry's capacity.
    pub fn merge_from(&mut self, other: &VisitedRegistry) {
        let mut records: Vec<&ModelRecord> = other.map.values().collect();
        records.sort_by(|a, b| a.key.cmp(&b.key));
        for rec in records {
            self.insert(rec.clone());
        }
    }

    /// Log of the total unnormalized mass over the visited set.
    pub fn log_mass(&self) -> f64 {
        // summed in key order so the result is independent of hash layout
        let mut entries: Vec<(&ModelKey, f64)> =
            self.map.iter().map(|(k, r)| (k, r.log_target())).collect();
        entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
        let targets: Vec<f64> = entries.into_iter().map(|(_, t)| t).collect();
        stats::log_sum_exp(&targets)
    }

    /// Posterior probabilities renormalized over the visited set.
    pub fn posterior_renormalized(&self) -> Result<BTreeMap<ModelKey, f64>> {
        if self.map.is_empty() {
            return Err(Error::EmptyRegistry);
        }
        let mut entries: Vec<(&ModelKey, f64)> =
            self.map.iter().map(|(k, r)| (k, r.log_target())).collect();
        entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
        let max = entries
            .iter()
            .map(|(_, t)| *t)
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::EmptyRegistry);
        }
        let mut sum = 0.0;
        for (_, t) in entries.iter_mut() {
            *t = (*t - max).exp();
            sum += *t;
        }
        Ok(entries
            .into_iter()
            .map(|(k, w)| (k.clone(), w / sum))
            .collect())
    }

    /// Records ordered by descending mass (key order on ties), truncated to
    /// `limit`.
    pub fn top_records(&self, limit: usize) -> Vec<&ModelRecord> {
        let mut records: Vec<&ModelRecord> = self.map.values().collect();
        records.sort_by(|a, b| {
            b.log_target()
                .partial_cmp(&a.log_target())
                .expect("finite log target")
                .then_with(|| a.key.cmp(&b.key))
        });
        records.truncate(limit);
        records
    }
}

/// Frequency-based posterior estimate from a chain trace, discarding the
/// first `burn_in` states (clamped so at least one state remains).
pub fn posterior_mc(trace: &[ModelKey], burn_in: usize) -> Result<BTreeMap<ModelKey, f64>> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let skip = burn_in.min(trace.len() - 1);
    let kept = &trace[skip..];
    let mut counts: BTreeMap<ModelKey, f64> = BTreeMap::new();
    for key in kept {
        *counts.entry(key.clone()).or_insert(0.0) += 1.0;
    }
    let total = kept.len() as f64;
    for v in counts.values_mut() {
        *v /= total;
    }
    Ok(counts)
}

/// Marginal inclusion probabilities of expressions and fixed covariates:
/// for each term, the summed probability of the models containing it.
/// Values are clipped to 1 to absorb floating-point accumulation.
pub fn marginal_inclusions(probabilities: &BTreeMap<ModelKey, f64>) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for (key, p) in probabilities {
        for term in key.exprs().iter().chain(key.fixed().iter()) {
            *out.entry(term.clone()).or_insert(0.0) += p;
        }
    }
    for v in out.values_mut() {
        if *v > 1.0 {
            *v = 1.0;
        }
    }
    out
}
