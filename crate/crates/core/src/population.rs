//! Populations of candidate expression trees and the operators that renew
//! them between search generations.
//!
//! A population is the finite feature set one sampling generation works
//! with: each tree carries its evaluated data column, and no two members may
//! be column-identical or column-complementary (that screening is what keeps
//! tautologies and duplicated features out of the search space). Renewal
//! keeps well-supported trees, drops poorly supported ones stochastically,
//! and refills vacancies with crossover / modification / reduction products
//! or fresh single leaves.

use std::sync::Arc;

use rand::Rng;

use crate::dataset::{BinaryMatrix, Dataset};
use crate::error::{Error, Result};
use crate::expr::{self, BoolOp, DataEquivalence, LogicTree};
use crate::gmjmcmc::GmjConfig;
use crate::model::ComplexityMeasure;
use crate::stats;

/// An ordered set of candidate trees with their evaluated columns.
#[derive(Clone, Debug)]
pub struct Population {
    trees: Vec<Arc<LogicTree>>,
    names: Vec<String>,
    columns: Vec<Vec<u8>>,
    protected: usize,
    generation: usize,
}

impl Population {
    /// Assemble a population, enforcing the structural invariants: at least
    /// one tree, every tree within the leaf budget, no constant columns, and
    /// no pair of columns identical or complementary.
    pub fn from_trees(
        trees: Vec<LogicTree>,
        x: &BinaryMatrix,
        protected: usize,
        generation: usize,
        max_leaves: usize,
    ) -> Result<Population> {
        if trees.is_empty() {
            return Err(Error::Population {
                what: "population must hold at least one tree".to_string(),
            });
        }
        if protected > trees.len() {
            return Err(Error::Population {
                what: format!(
                    "protected prefix {} exceeds population size {}",
                    protected,
                    trees.len()
                ),
            });
        }
        let mut names = Vec::with_capacity(trees.len());
        let mut columns = Vec::with_capacity(trees.len());
        for tree in &trees {
            if tree.leaf_count() > max_leaves {
                return Err(Error::Population {
                    what: format!(
                        "tree {} has {} leaves, budget is {}",
                        tree.canonical(),
                        tree.leaf_count(),
                        max_leaves
                    ),
                });
            }
            let col = tree.evaluate(x)?;
            if expr::is_constant(&col) {
                return Err(Error::Population {
                    what: format!("tree {} is constant on the data", tree.canonical()),
                });
            }
            names.push(tree.canonical());
            columns.push(col);
        }
        for i in 0..columns.len() {
            for j in (i + 1)..columns.len() {
                if expr::column_equivalence(&columns[i], &columns[j]) != DataEquivalence::Distinct {
                    return Err(Error::Population {
                        what: format!("trees {} and {} are data-equivalent", names[i], names[j]),
                    });
                }
            }
        }
        Ok(Population {
            trees: trees.into_iter().map(Arc::new).collect(),
            names,
            columns,
            protected,
            generation,
        })
    }

    pub fn size(&self) -> usize {
        self.trees.len()
    }

    pub fn tree(&self, i: usize) -> &Arc<LogicTree> {
        &self.trees[i]
    }

    pub fn trees(&self) -> &[Arc<LogicTree>] {
        &self.trees
    }

    /// Canonical string of tree `i`; unique within the population.
    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Evaluated 0/1 column of tree `i` on the training matrix.
    pub fn column(&self, i: usize) -> &[u8] {
        &self.columns[i]
    }

    pub fn complexity(&self, i: usize, measure: ComplexityMeasure) -> usize {
        match measure {
            ComplexityMeasure::Leaves => self.trees[i].leaf_count(),
            ComplexityMeasure::Operators => self.trees[i].operator_count(),
        }
    }

    /// Length of the prefix never dropped during renewal.
    pub fn protected(&self) -> usize {
        self.protected
    }

    /// 1-based generation counter.
    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// The three ways a replacement tree can be built from the current
/// population.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateKind {
    /// Join two parents with AND (probability `p_and`) or OR, negating the
    /// result with probability `p_not`.
    Crossover,
    /// Toggle a negation (probability `p_not`) or swap an AND/OR at a
    /// uniformly chosen node of one parent.
    Modification,
    /// Delete a uniformly chosen leaf occurrence from one parent.
    Reduction,
}

/// Draw an index with probability proportional to `weights` (all positive).
fn weighted_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Generate one candidate tree with the given operator.
///
/// Parents are chosen with probability proportional to `inclusion[i] + 0.01`
/// so that even unsupported trees keep a small chance of breeding. Crossover
/// products exceeding the leaf budget are redrawn, up to
/// `cfg.candidate_retries` attempts. The result is *not* screened against
/// the population; callers do that with the evaluated column in hand.
pub fn generate_candidate<R: Rng>(
    kind: CandidateKind,
    pop: &Population,
    inclusion: &[f64],
    cfg: &GmjConfig,
    rng: &mut R,
) -> Result<LogicTree> {
    debug_assert_eq!(inclusion.len(), pop.size());
    let weights: Vec<f64> = inclusion.iter().map(|v| v + 0.01).collect();
    for _ in 0..cfg.candidate_retries.max(1) {
        match kind {
            CandidateKind::Crossover => {
                let i = weighted_index(&weights, rng);
                let j = weighted_index(&weights, rng);
                if pop.tree(i).leaf_count() + pop.tree(j).leaf_count() > cfg.c_max {
                    continue;
                }
                let op = if rng.random::<f64>() < cfg.p_and {
                    BoolOp::And
                } else {
                    BoolOp::Or
                };
                let joined =
                    LogicTree::branch(op, Arc::clone(pop.tree(i)), Arc::clone(pop.tree(j)));
                let joined = if rng.random::<f64>() < cfg.p_not {
                    joined.negate()
                } else {
                    joined
                };
                return Ok(joined);
            }
            CandidateKind::Modification => {
                let i = weighted_index(&weights, rng);
                let tree = pop.tree(i);
                let mutated = if rng.random::<f64>() < cfg.p_not || tree.operator_count() == 0 {
                    let node = rng.random_range(0..tree.node_count());
                    tree.with_negation_toggled(node)
                        .expect("node index in range")
                } else {
                    let node = rng.random_range(0..tree.operator_count());
                    tree.with_operator_toggled(node)
                        .expect("branch index in range")
                };
                return Ok(mutated);
            }
            CandidateKind::Reduction => {
                let eligible: Vec<usize> = (0..pop.size())
                    .filter(|&i| pop.tree(i).leaf_count() >= 2)
                    .collect();
                if eligible.is_empty() {
                    // retrying cannot help: no tree has a removable leaf
                    break;
                }
                let w: Vec<f64> = eligible.iter().map(|&i| weights[i]).collect();
                let pick = eligible[weighted_index(&w, rng)];
                let tree = pop.tree(pick);
                let occ = rng.random_range(0..tree.leaf_count());
                return Ok(tree
                    .with_leaf_removed(occ)
                    .expect("tree has at least two leaves"));
            }
        }
    }
    Err(Error::NoCandidate {
        attempts: cfg.candidate_retries.max(1),
    })
}

/// Result of screening a proposed tree against columns already in use.
fn column_is_usable(candidate: &[u8], existing: &[&[u8]]) -> bool {
    if expr::is_constant(candidate) {
        return false;
    }
    existing
        .iter()
        .all(|col| expr::column_equivalence(candidate, col) == DataEquivalence::Distinct)
}

/// Renew a population given per-tree inclusion probabilities.
///
/// The protected prefix always survives; any other tree with inclusion below
/// `rho_min` survives only with probability equal to its inclusion.
/// Vacancies are refilled with fresh single leaves (probability
/// `fresh_leaf_prob`) or products of a uniformly chosen generation operator,
/// each screened for degeneracy and data-equivalence against all trees
/// already accepted. If a vacancy cannot be filled within the retry budget
/// the population shrinks for this generation, with a warning.
pub fn evolve_population<R: Rng>(
    pop: &Population,
    inclusion: &[f64],
    x: &BinaryMatrix,
    cfg: &GmjConfig,
    rng: &mut R,
) -> Result<Population> {
    if inclusion.len() != pop.size() {
        return Err(Error::ShapeMismatch {
            what: format!(
                "{} inclusion values for population of {}",
                inclusion.len(),
                pop.size()
            ),
        });
    }
    let mut kept: Vec<LogicTree> = Vec::with_capacity(cfg.d);
    let mut kept_cols: Vec<Vec<u8>> = Vec::with_capacity(cfg.d);
    for i in 0..pop.size() {
        let survives = i < pop.protected()
            || inclusion[i] >= cfg.rho_min
            || rng.random::<f64>() < inclusion[i];
        if survives {
            kept.push((**pop.tree(i)).clone());
            kept_cols.push(pop.column(i).to_vec());
        }
    }

    while kept.len() < cfg.d {
        let mut filled = false;
        for _ in 0..cfg.candidate_retries.max(1) {
            let candidate = if rng.random::<f64>() < cfg.fresh_leaf_prob {
                LogicTree::leaf(rng.random_range(0..x.p()))
            } else {
                let kind = match rng.random_range(0..3u8) {
                    0 => CandidateKind::Crossover,
                    1 => CandidateKind::Modification,
                    _ => CandidateKind::Reduction,
                };
                match generate_candidate(kind, pop, inclusion, cfg, rng) {
                    Ok(t) => t,
                    Err(_) => continue,
                }
            };
            let col = candidate.evaluate(x)?;
            let existing: Vec<&[u8]> = kept_cols.iter().map(|c| c.as_slice()).collect();
            if column_is_usable(&col, &existing) {
                kept.push(candidate);
                kept_cols.push(col);
                filled = true;
                break;
            }
        }
        if !filled {
            log::warn!(
                "no admissible replacement tree after {} attempts; population shrinks to {}",
                cfg.candidate_retries.max(1),
                kept.len()
            );
            break;
        }
    }

    Population::from_trees(
        kept,
        x,
        pop.protected().min(cfg.d),
        pop.generation() + 1,
        cfg.c_max,
    )
}

/// Build the first generation from the data: single-leaf trees ranked by
/// absolute correlation with the response.
///
/// Constant and column-duplicate leaves are skipped. When fewer usable
/// leaves exist than the population size calls for (and the leaf budget
/// allows), random two-leaf conjunctions pad the remainder.
pub fn init_population<R: Rng>(data: &Dataset, cfg: &GmjConfig, rng: &mut R) -> Result<Population> {
    let y = &data.y;
    let mut scored: Vec<(usize, f64)> = Vec::new();
    for j in 0..data.p() {
        let col: Vec<f64> = data.x.column(j).iter().map(|&v| v as f64).collect();
        if let Some(r) = stats::pearson(&col, y) {
            scored.push((j, r.abs()));
        }
    }
    if scored.is_empty() {
        return Err(Error::Population {
            what: "every covariate column is constant".to_string(),
        });
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite correlation")
            .then(a.0.cmp(&b.0))
    });

    let mut trees: Vec<LogicTree> = Vec::with_capacity(cfg.d);
    let mut cols: Vec<Vec<u8>> = Vec::with_capacity(cfg.d);
    for &(j, _) in &scored {
        if trees.len() == cfg.d {
            break;
        }
        let col = data.x.column(j).to_vec();
        let existing: Vec<&[u8]> = cols.iter().map(|c| c.as_slice()).collect();
        if column_is_usable(&col, &existing) {
            trees.push(LogicTree::leaf(j));
            cols.push(col);
        }
    }

    // pad with random conjunctions when the data offers fewer usable leaves
    // than the population wants
    if trees.len() < cfg.d && cfg.c_max >= 2 && data.p() >= 2 {
        'vacancy: while trees.len() < cfg.d {
            for _ in 0..cfg.candidate_retries.max(1) {
                let a = rng.random_range(0..data.p());
                let b = rng.random_range(0..data.p());
                if a == b {
                    continue;
                }
                let t = LogicTree::and(LogicTree::leaf(a), LogicTree::leaf(b));
                let col = t.evaluate(&data.x)?;
                let existing: Vec<&[u8]> = cols.iter().map(|c| c.as_slice()).collect();
                if column_is_usable(&col, &existing) {
                    trees.push(t);
                    cols.push(col);
                    continue 'vacancy;
                }
            }
            break;
        }
    }
    if trees.len() < cfg.d {
        log::warn!(
            "initial population holds {} trees instead of {}",
            trees.len(),
            cfg.d
        );
    }

    let protected = cfg.protected.min(trees.len());
    if protected < cfg.protected {
        log::warn!(
            "protected prefix reduced from {} to {}",
            cfg.protected,
            protected
        );
    }
    Population::from_trees(trees, &data.x, protected, 1, cfg.c_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matrix_4() -> BinaryMatrix {
        BinaryMatrix::from_columns(vec![
            vec![0, 0, 1, 1, 0, 1, 0, 1],
            vec![0, 1, 0, 1, 1, 0, 0, 1],
            vec![1, 1, 0, 1, 1, 0, 1, 0],
            vec![0, 1, 1, 0, 0, 1, 1, 0],
        ])
        .unwrap()
    }

    fn config() -> GmjConfig {
        GmjConfig {
            d: 4,
            c_max: 4,
            ..GmjConfig::default()
        }
    }

    #[test]
    fn from_trees_enforces_invariants() {
        let x = matrix_4();
        let ok = Population::from_trees(vec![LogicTree::leaf(0), LogicTree::leaf(1)], &x, 1, 1, 5)
            .unwrap();
        assert_eq!(ok.size(), 2);
        assert_eq!(ok.name(0), "X1");
        assert_eq!(ok.protected(), 1);

        // leaf budget
        let big = LogicTree::and(
            LogicTree::and(LogicTree::leaf(0), LogicTree::leaf(1)),
            LogicTree::leaf(2),
        );
        let err = Population::from_trees(vec![big], &x, 0, 1, 2).unwrap_err();
        assert!(matches!(err, Error::Population { .. }));

        // duplicated column
        let err = Population::from_trees(vec![LogicTree::leaf(0), LogicTree::leaf(0)], &x, 0, 1, 5)
            .unwrap_err();
        assert!(matches!(err, Error::Population { .. }));

        // complementary columns count as equivalent too
        let err = Population::from_trees(
            vec![LogicTree::leaf(0), LogicTree::leaf(0).negate()],
            &x,
            0,
            1,
            5,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Population { .. }));

        // tautologies evaluate constant and are rejected
        let taut = LogicTree::or(LogicTree::leaf(0), LogicTree::leaf(0).negate());
        let err = Population::from_trees(vec![taut], &x, 0, 1, 5).unwrap_err();
        assert!(matches!(err, Error::Population { .. }));
    }

    #[test]
    fn crossover_respects_leaf_budget_and_flags() {
        let x = matrix_4();
        let pop = Population::from_trees(
            vec![LogicTree::leaf(0), LogicTree::leaf(1), LogicTree::leaf(2)],
            &x,
            0,
            1,
            5,
        )
        .unwrap();
        let incl = vec![0.5, 0.5, 0.5];
        let mut cfg = config();
        cfg.c_max = 2;
        cfg.p_and = 1.0;
        cfg.p_not = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let t =
                generate_candidate(CandidateKind::Crossover, &pop, &incl, &cfg, &mut rng).unwrap();
            assert_eq!(t.leaf_count(), 2);
            assert!(!t.is_negated());
            assert!(t.canonical().contains('&'));
        }
    }

    #[test]
    fn crossover_fails_when_budget_is_impossible() {
        let x = matrix_4();
        let two_leaf = LogicTree::and(LogicTree::leaf(0), LogicTree::leaf(1));
        let pop = Population::from_trees(vec![two_leaf], &x, 0, 1, 2).unwrap();
        let mut cfg = config();
        cfg.c_max = 2; // any crossover would have 4 leaves
        cfg.candidate_retries = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err =
            generate_candidate(CandidateKind::Crossover, &pop, &[1.0], &cfg, &mut rng).unwrap_err();
        assert!(matches!(err, Error::NoCandidate { attempts: 10 }));
    }

    #[test]
    fn modification_changes_one_flag_or_operator() {
        let x = matrix_4();
        let tree = LogicTree::and(LogicTree::leaf(0), LogicTree::leaf(1));
        let pop = Population::from_trees(vec![tree.clone()], &x, 0, 1, 4).unwrap();
        let cfg = config();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut saw_negation = false;
        let mut saw_operator = false;
        for _ in 0..100 {
            let t = generate_candidate(CandidateKind::Modification, &pop, &[1.0], &cfg, &mut rng)
                .unwrap();
            assert_eq!(t.leaf_count(), 2);
            let s = t.canonical();
            if s.contains('|') {
                saw_operator = true;
            }
            if s.contains('!') {
                saw_negation = true;
            }
            assert_ne!(s, tree.canonical(), "modification must change the tree");
        }
        assert!(saw_negation && saw_operator);
    }

    #[test]
    fn modification_of_single_leaf_always_negates() {
        let x = matrix_4();
        let pop = Population::from_trees(vec![LogicTree::leaf(2)], &x, 0, 1, 4).unwrap();
        let mut cfg = config();
        cfg.p_not = 0.0; // operator swap is impossible on a leaf; negation is the fallback
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t =
            generate_candidate(CandidateKind::Modification, &pop, &[1.0], &cfg, &mut rng).unwrap();
        assert_eq!(t.canonical(), "!X3");
    }

    #[test]
    fn reduction_removes_exactly_one_leaf() {
        let x = matrix_4();
        let tree = LogicTree::and(
            LogicTree::leaf(0),
            LogicTree::or(LogicTree::leaf(1), LogicTree::leaf(2)),
        );
        let pop = Population::from_trees(vec![tree], &x, 0, 1, 4).unwrap();
        let cfg = config();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let t =
                generate_candidate(CandidateKind::Reduction, &pop, &[1.0], &cfg, &mut rng).unwrap();
            assert_eq!(t.leaf_count(), 2);
        }
    }

    #[test]
    fn reduction_without_eligible_parent_errors() {
        let x = matrix_4();
        let pop = Population::from_trees(vec![LogicTree::leaf(0)], &x, 0, 1, 4).unwrap();
        let cfg = config();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let err =
            generate_candidate(CandidateKind::Reduction, &pop, &[1.0], &cfg, &mut rng).unwrap_err();
        assert!(matches!(err, Error::NoCandidate { .. }));
    }

    #[test]
    fn evolution_keeps_protected_and_high_inclusion_trees() {
        let x = matrix_4();
        let pop = Population::from_trees(
            vec![
                LogicTree::leaf(0),
                LogicTree::leaf(1),
                LogicTree::leaf(2),
                LogicTree::leaf(3),
            ],
            &x,
            1,
            1,
            4,
        )
        .unwrap();
        let mut cfg = config();
        cfg.rho_min = 0.2;
        cfg.d = 4;
        // protected tree 0 has zero inclusion but must survive; tree 2 is
        // above the survival threshold
        let inclusion = vec![0.0, 0.0, 0.9, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let next = evolve_population(&pop, &inclusion, &x, &cfg, &mut rng).unwrap();
            let names: Vec<&str> = (0..next.size()).map(|i| next.name(i)).collect();
            assert!(names.contains(&"X1"), "protected tree dropped: {names:?}");
            assert!(
                names.contains(&"X3"),
                "high-inclusion tree dropped: {names:?}"
            );
            assert_eq!(next.generation(), 2);
        }
    }

    #[test]
    fn evolution_refills_to_target_size_with_distinct_columns() {
        let x = matrix_4();
        let pop = Population::from_trees(vec![LogicTree::leaf(0), LogicTree::leaf(1)], &x, 0, 3, 4)
            .unwrap();
        let mut cfg = config();
        cfg.d = 4;
        let inclusion = vec![0.8, 0.8];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let next = evolve_population(&pop, &inclusion, &x, &cfg, &mut rng).unwrap();
        assert_eq!(next.size(), 4);
        assert_eq!(next.generation(), 4);
        // survivors keep their order at the front
        assert_eq!(next.name(0), "X1");
        assert_eq!(next.name(1), "X2");
    }

    #[test]
    fn init_population_ranks_by_absolute_correlation() {
        // y tracks column 2 exactly, column 0 weakly, column 3 not at all
        let x = BinaryMatrix::from_columns(vec![
            vec![0, 0, 1, 1, 0, 1],
            vec![1, 0, 1, 0, 0, 1],
            vec![0, 1, 1, 0, 1, 0],
            vec![0, 1, 0, 1, 1, 0],
        ])
        .unwrap();
        let y: Vec<f64> = x.column(2).iter().map(|&v| v as f64 * 2.0 - 0.5).collect();
        let data = Dataset::new(x, y).unwrap();
        let mut cfg = config();
        cfg.d = 2;
        cfg.protected = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pop = init_population(&data, &cfg, &mut rng).unwrap();
        assert_eq!(pop.size(), 2);
        assert_eq!(pop.name(0), "X3");
        assert_eq!(pop.protected(), 1);
        assert_eq!(pop.generation(), 1);
    }

    #[test]
    fn init_population_pads_with_conjunctions_when_leaves_run_out() {
        let x = BinaryMatrix::from_columns(vec![
            vec![0, 0, 1, 1, 0, 1, 1, 0],
            vec![1, 0, 1, 0, 0, 1, 0, 1],
        ])
        .unwrap();
        let y: Vec<f64> = (0..8).map(|i| i as f64 * 0.3).collect();
        let data = Dataset::new(x, y).unwrap();
        let mut cfg = config();
        cfg.d = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let pop = init_population(&data, &cfg, &mut rng).unwrap();
        assert_eq!(pop.size(), 3);
        let padded = pop.name(2);
        assert!(padded.contains('&'), "expected a conjunction, got {padded}");
    }

    #[test]
    fn init_population_skips_constant_and_duplicate_columns() {
        let x = BinaryMatrix::from_columns(vec![
            vec![1, 1, 1, 1], // constant
            vec![0, 1, 0, 1],
            vec![0, 1, 0, 1], // duplicate of column 2
            vec![1, 0, 1, 0], // complement of column 2
        ])
        .unwrap();
        let y = vec![0.0, 1.0, 0.5, 1.5];
        let data = Dataset::new(x, y).unwrap();
        let mut cfg = config();
        cfg.d = 4;
        cfg.c_max = 1; // no padding possible
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pop = init_population(&data, &cfg, &mut rng).unwrap();
        assert_eq!(pop.size(), 1);
        assert_eq!(pop.name(0), "X2");
    }
}
