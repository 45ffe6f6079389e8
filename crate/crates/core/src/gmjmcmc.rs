//! The genetically modified search over expression populations.
//!
//! One chain alternates sampling and evolution: the mode-jumping sampler
//! explores models over the current tree population, marginal inclusion
//! probabilities are computed by renormalization over everything visited so
//! far, and those inclusions steer which trees survive into the next
//! population. The final generation gets a longer sampling budget, and the
//! single registry spanning all generations yields the reported posterior.
//!
//! Multiple chains run independently from derived seeds. Their inclusion
//! estimates combine either by weighting each chain by its share of total
//! visited mass, or by renormalizing over the union of everything any chain
//! visited.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::expr::{parse, truth_equivalent};
use crate::marglik::{JeffreysBic, MarglikEstimator};
use crate::mjmcmc::{run_mjmcmc_with, MjParams, ModelScorer};
use crate::model::{ComplexityMeasure, Model, PriorConfig};
use crate::population::{evolve_population, init_population, Population};
use crate::registry::{marginal_inclusions, VisitedRegistry};
use crate::stats;

/// Full search configuration.
#[derive(Clone, Debug)]
pub struct GmjConfig {
    /// Population size (number of candidate trees per generation).
    pub d: usize,
    /// Leading trees never dropped during evolution.
    pub protected: usize,
    /// Per-tree leaf budget.
    pub c_max: usize,
    /// Maximum number of terms in a model.
    pub k_max: usize,
    /// Crossover joins with AND with this probability, else OR.
    pub p_and: f64,
    /// Negation probability in crossover and modification.
    pub p_not: f64,
    /// Inclusion threshold below which a tree's survival is stochastic.
    pub rho_min: f64,
    /// Probability that a vacancy is filled by a fresh single leaf.
    pub fresh_leaf_prob: f64,
    /// Number of generations.
    pub t_max: usize,
    /// Sampler iterations per exploratory generation.
    pub explore_iters: usize,
    /// Sampler iterations in the final generation.
    pub final_iters: usize,
    /// Sampler tuning shared by all generations (its `n_iter` is ignored in
    /// favour of the per-generation budgets above).
    pub mj: MjParams,
    /// Registry capacity (maximum retained model records per chain).
    pub m_fin: usize,
    /// Number of independent chains.
    pub chains: usize,
    /// Master seed; per-chain seeds derive from it.
    pub seed: u64,
    /// Prior log penalty; `None` selects the default -2 ln p.
    pub log_penalty: Option<f64>,
    pub measure: ComplexityMeasure,
    /// Keep fitted coefficients in the registry (needed for prediction).
    pub retain_coefficients: bool,
    /// Attempt budget for candidate generation and vacancy filling.
    pub candidate_retries: usize,
}

impl Default for GmjConfig {
    fn default() -> GmjConfig {
        GmjConfig {
            d: 15,
            protected: 0,
            c_max: 5,
            k_max: 15,
            p_and: 0.9,
            p_not: 0.1,
            rho_min: 0.2,
            fresh_leaf_prob: 0.2,
            t_max: 20,
            explore_iters: 250,
            final_iters: 10_000,
            mj: MjParams::default(),
            m_fin: 10_000,
            chains: 1,
            seed: 0,
            log_penalty: None,
            measure: ComplexityMeasure::Leaves,
            retain_coefficients: true,
            candidate_retries: 100,
        }
    }
}

impl GmjConfig {
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, what: String) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config { what })
            }
        }
        check(
            self.d >= 1,
            format!("population size must be positive, got {}", self.d),
        )?;
        check(
            self.protected <= self.d,
            format!(
                "protected prefix {} exceeds population size {}",
                self.protected, self.d
            ),
        )?;
        check(
            self.c_max >= 1,
            format!("leaf budget must be positive, got {}", self.c_max),
        )?;
        check(
            self.k_max >= 1,
            format!("k_max must be positive, got {}", self.k_max),
        )?;
        check(
            (0.0..=1.0).contains(&self.p_and),
            format!("p_and must lie in [0, 1], got {}", self.p_and),
        )?;
        check(
            (0.0..1.0).contains(&self.p_not),
            format!("p_not must lie in [0, 1), got {}", self.p_not),
        )?;
        check(
            self.rho_min > 0.0 && self.rho_min < 1.0,
            format!("rho_min must lie in (0, 1), got {}", self.rho_min),
        )?;
        check(
            (0.0..=1.0).contains(&self.fresh_leaf_prob),
            format!(
                "fresh leaf probability must lie in [0, 1], got {}",
                self.fresh_leaf_prob
            ),
        )?;
        check(
            self.t_max >= 1,
            format!("t_max must be positive, got {}", self.t_max),
        )?;
        check(
            self.chains >= 1,
            format!("chain count must be positive, got {}", self.chains),
        )?;
        check(
            self.m_fin >= 1,
            format!("registry capacity must be positive, got {}", self.m_fin),
        )?;
        if let Some(lp) = self.log_penalty {
            check(
                lp.is_finite() && lp < 0.0,
                format!("log penalty must be negative and finite, got {lp}"),
            )?;
        }
        self.mj.validate()?;
        if self.d.saturating_sub(self.protected) < self.k_max {
            log::warn!(
                "free population ({} trees) is smaller than k_max = {}; \
                 large models cannot be reached",
                self.d - self.protected,
                self.k_max
            );
        }
        Ok(())
    }

    /// Prior settings for data with `p` binary columns.
    pub fn prior_config(&self, p: usize) -> Result<PriorConfig> {
        match self.log_penalty {
            Some(lp) => PriorConfig::new(lp, self.k_max, self.measure),
            None => {
                let mut cfg = PriorConfig::default_for_columns(p, self.k_max)?;
                cfg.measure = self.measure;
                Ok(cfg)
            }
        }
    }
}

/// One chain's outcome.
#[derive(Clone, Debug)]
pub struct ChainResult {
    /// The final-generation population.
    pub population: Population,
    /// Every model record the chain retained.
    pub registry: VisitedRegistry,
    /// Renormalized marginal inclusions of expressions and fixed covariates.
    pub inclusions: BTreeMap<String, f64>,
    /// Log of the chain's total visited mass (the renormalization
    /// denominator), used for cross-chain weighting.
    pub log_mass: f64,
}

/// Express the registry's best model in the coordinates of a (possibly new)
/// population; terms that no longer exist are dropped.
fn remap_best(registry: &VisitedRegistry, pop: &Population, data: &Dataset) -> Model {
    let mut m = Model::empty(pop.size(), data.n_fixed());
    if let Some(best) = registry.best() {
        for (i, name) in pop.names().iter().enumerate() {
            if best.key.contains_expr(name) {
                m.set_bit(i, true);
            }
        }
        for (j, f) in data.fixed.iter().enumerate() {
            if best.key.fixed().binary_search(&f.name).is_ok() {
                m.set_bit(pop.size() + j, true);
            }
        }
    }
    m
}

/// Run one chain with the default estimator.
pub fn run_gmjmcmc(data: &Dataset, cfg: &GmjConfig, seed: u64) -> Result<ChainResult> {
    run_gmjmcmc_with_estimator(data, cfg, seed, &JeffreysBic::default())
}

/// Run one chain with a custom marginal-likelihood estimator.
pub fn run_gmjmcmc_with_estimator(
    data: &Dataset,
    cfg: &GmjConfig,
    seed: u64,
    estimator: &dyn MarglikEstimator,
) -> Result<ChainResult> {
    cfg.validate()?;
    let prior = cfg.prior_config(data.p())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pop = init_population(data, cfg, &mut rng)?;
    let mut registry = VisitedRegistry::new(cfg.m_fin);
    let mut initial = Model::empty(pop.size(), data.n_fixed());
    for t in 1..=cfg.t_max {
        let n_iter = if t == cfg.t_max {
            cfg.final_iters
        } else {
            cfg.explore_iters
        };
        let params = MjParams { n_iter, ..cfg.mj };
        {
            let mut scorer = ModelScorer::new(
                &pop,
                data,
                &prior,
                estimator,
                &mut registry,
                cfg.retain_coefficients,
            );
            run_mjmcmc_with(&mut scorer, &params, initial.clone(), &mut rng)?;
        }
        if t == cfg.t_max {
            break;
        }
        let probs = registry.posterior_renormalized()?;
        let inclusions = marginal_inclusions(&probs);
        let pop_inclusions: Vec<f64> = pop
            .names()
            .iter()
            .map(|name| inclusions.get(name).copied().unwrap_or(0.0))
            .collect();
        let next = evolve_population(&pop, &pop_inclusions, &data.x, cfg, &mut rng)?;
        // restart the sampler at the best model found so far, re-expressed
        // in the new population's coordinates
        initial = remap_best(&registry, &next, data);
        pop = next;
    }
    let probs = registry.posterior_renormalized()?;
    let inclusions = marginal_inclusions(&probs);
    let log_mass = registry.log_mass();
    Ok(ChainResult {
        population: pop,
        registry,
        inclusions,
        log_mass,
    })
}

/// splitmix64 finalizer: decorrelates derived chain seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Seed of chain `index` under master seed `master`.
pub fn chain_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_mul(0x9E3779B97F4A7C15)))
}

/// Run `cfg.chains` independent chains (in parallel where supported).
pub fn run_chains(data: &Dataset, cfg: &GmjConfig) -> Result<Vec<ChainResult>> {
    run_chains_with_estimator(data, cfg, &JeffreysBic::default())
}

pub fn run_chains_with_estimator(
    data: &Dataset,
    cfg: &GmjConfig,
    estimator: &dyn MarglikEstimator,
) -> Result<Vec<ChainResult>> {
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.chains as u64)
        .map(|i| chain_seed(cfg.seed, i))
        .collect();
    seeds
        .into_par_iter()
        .map(|seed| run_gmjmcmc_with_estimator(data, cfg, seed, estimator))
        .collect()
}

/// How chain results are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggregationMode {
    /// Weight each chain's inclusions by exp(log_mass), normalized across
    /// chains: chains that found more posterior mass count for more.
    WeightedMass,
    /// Merge all registries and renormalize once over the union.
    UnionRenormalized,
}

/// Combined inclusions plus the per-chain weights that produced them.
#[derive(Clone, Debug)]
pub struct AggregateReport {
    pub inclusions: BTreeMap<String, f64>,
    pub chain_weights: Vec<f64>,
    pub mode: AggregationMode,
}

/// Combine per-chain inclusion estimates.
pub fn aggregate_chains(results: &[ChainResult], mode: AggregationMode) -> Result<AggregateReport> {
    if results.is_empty() {
        return Err(Error::NoChains);
    }
    let masses: Vec<f64> = results.iter().map(|r| r.log_mass).collect();
    let lse = stats::log_sum_exp(&masses);
    if !lse.is_finite() {
        return Err(Error::EmptyRegistry);
    }
    let chain_weights: Vec<f64> = masses.iter().map(|m| (m - lse).exp()).collect();
    let inclusions = match mode {
        AggregationMode::WeightedMass => {
            let mut acc: BTreeMap<String, f64> = BTreeMap::new();
            for (result, w) in results.iter().zip(&chain_weights) {
                for (term, rho) in &result.inclusions {
                    *acc.entry(term.clone()).or_insert(0.0) += w * rho;
                }
            }
            for v in acc.values_mut() {
                if *v > 1.0 {
                    *v = 1.0;
                }
            }
            acc
        }
        AggregationMode::UnionRenormalized => {
            let capacity: usize = results.iter().map(|r| r.registry.len()).sum();
            let mut merged = VisitedRegistry::new(capacity.max(1));
            for result in results {
                merged.merge_from(&result.registry);
            }
            marginal_inclusions(&merged.posterior_renormalized()?)
        }
    };
    Ok(AggregateReport {
        inclusions,
        chain_weights,
        mode,
    })
}

/// Pool probabilities across expressions that carry the same signal: trees
/// whose truth tables agree everywhere or disagree everywhere (a negated
/// column spans the same regression space). Population screening never
/// admits two such trees at once, so no visited model contains two members
/// of one class and the class probability is exactly the sum over members.
/// Each class keeps its most probable member's name (smallest string on
/// ties). Terms that do not parse as expressions (fixed covariates) pass
/// through unchanged.
fn pool_equivalent(inclusions: &BTreeMap<String, f64>) -> Vec<(String, f64)> {
    let mut rows: Vec<(String, f64)> = Vec::with_capacity(inclusions.len());
    // same-signal trees use exactly the same leaves, so bucket by leaf set
    let mut buckets: BTreeMap<Vec<usize>, Vec<(crate::expr::LogicTree, String, f64)>> =
        BTreeMap::new();
    for (name, p) in inclusions {
        match parse(name) {
            Ok(tree) => {
                let leaves: Vec<usize> = tree.distinct_leaves().into_iter().collect();
                buckets
                    .entry(leaves)
                    .or_default()
                    .push((tree, name.clone(), *p));
            }
            Err(_) => rows.push((name.clone(), *p)),
        }
    }
    for members in buckets.values() {
        let mut class: Vec<Option<usize>> = vec![None; members.len()];
        let mut next_class = 0usize;
        for i in 0..members.len() {
            if class[i].is_some() {
                continue;
            }
            class[i] = Some(next_class);
            for j in (i + 1)..members.len() {
                if class[j].is_some() {
                    continue;
                }
                // oversized trees stay unpooled rather than failing the report
                if let Ok(eq) = truth_equivalent(&members[i].0, &members[j].0) {
                    if eq.equivalent || eq.complement {
                        class[j] = Some(next_class);
                    }
                }
            }
            next_class += 1;
        }
        for c in 0..next_class {
            let mut total = 0.0;
            let mut best: Option<(&String, f64)> = None;
            for (k, member) in members.iter().enumerate() {
                if class[k] != Some(c) {
                    continue;
                }
                total += member.2;
                let better = match best {
                    None => true,
                    Some((name, p)) => {
                        member.2 > p || (member.2 == p && member.1.as_str() < name.as_str())
                    }
                };
                if better {
                    best = Some((&member.1, member.2));
                }
            }
            let (name, _) = best.expect("class has a member");
            rows.push((name.clone(), total.min(1.0)));
        }
    }
    rows
}

/// Terms at or above the reporting threshold, most probable first (name
/// order on ties). Same-signal expressions are pooled first, so a class
/// split across several written forms reports once with its full
/// probability.
pub fn report_expressions(report: &AggregateReport, threshold: f64) -> Vec<(String, f64)> {
    let mut rows: Vec<(String, f64)> = pool_equivalent(&report.inclusions)
        .into_iter()
        .filter(|(_, p)| *p >= threshold)
        .collect();
    rows.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite probability")
            .then_with(|| a.0.cmp(&b.0))
    });
    rows
}

/// Write a report as TSV: `expression<TAB>probability`, probabilities with
/// 15 digits after the decimal point.
pub fn write_report_tsv<W: Write>(writer: &mut W, rows: &[(String, f64)]) -> Result<()> {
    writeln!(writer, "expression\tprobability")?;
    for (name, p) in rows {
        writeln!(writer, "{name}\t{p:.15}")?;
    }
    Ok(())
}

/// Parse a TSV produced by [`write_report_tsv`].
pub fn read_report_tsv<R: std::io::BufRead>(reader: R) -> Result<Vec<(String, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "expression\tprobability" {
                return Err(Error::Parse {
                    input: line,
                    position: 0,
                    reason: "expected header 'expression<TAB>probability'".to_string(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (name, prob) = line.split_once('\t').ok_or_else(|| Error::Parse {
            input: line.clone(),
            position: 0,
            reason: format!("line {}: expected two tab-separated fields", i + 1),
        })?;
        let p: f64 = prob.trim().parse().map_err(|_| Error::Parse {
            input: line.clone(),
            position: 0,
            reason: format!("line {}: bad probability {prob:?}", i + 1),
        })?;
        rows.push((name.to_string(), p));
    }
    Ok(rows)
}
