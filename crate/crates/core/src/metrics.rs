//! Scoring discovered expressions against a known ground truth, and the
//! replication-study driver that aggregates scores over many simulated
//! datasets.
//!
//! Strict scoring accepts a report only if it is truth-table equivalent (or
//! complement-equivalent — a negated tree carries the same signal in a
//! linear model) to a true tree. Windowed scoring additionally accepts leaf
//! substitutions by markers within a centiMorgan window on the same
//! chromosome, the usual convention for linked genetic markers.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::expr::{parse, truth_equivalent, LogicTree};
use crate::gmjmcmc::{
    aggregate_chains, chain_seed, report_expressions, run_chains, AggregationMode, GmjConfig,
};
use crate::sim::{
    random_correlation_matrix, sample_correlated_binary, scenario_response, simulate_backcross,
    GeneticMap, MarkerPosition, Scenario,
};

/// How reported expressions are matched to true trees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MatchMode {
    /// Truth-table equivalence (or complement) only.
    Strict,
    /// Also accept leaf substitutions within this window on the same
    /// chromosome.
    Windowed { window_cm: f64 },
}

/// Outcome of scoring one report list against one truth list.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreCard {
    /// Hit flag per true tree, in the order the truth was given.
    pub hits: Vec<bool>,
    /// Number of reported expressions.
    pub reports: usize,
    /// Reported expressions matched to no true tree.
    pub false_positives: usize,
    /// Reported leaf occurrences that represent no true leaf.
    pub wrong_leaves: usize,
    pub mode: MatchMode,
}

impl ScoreCard {
    pub fn matched(&self) -> usize {
        self.hits.iter().filter(|&&h| h).count()
    }

    /// Fraction of true trees recovered.
    pub fn power(&self) -> f64 {
        if self.hits.is_empty() {
            return 0.0;
        }
        self.matched() as f64 / self.hits.len() as f64
    }

    /// False discoveries over total discoveries (0 when nothing was
    /// reported).
    pub fn fdr(&self) -> f64 {
        self.false_positives as f64 / (self.reports.max(1)) as f64
    }
}

fn parse_all(exprs: &[String]) -> Result<Vec<LogicTree>> {
    exprs.iter().map(|s| parse(s)).collect()
}

/// Does `report` match `truth` exactly (up to truth-table equivalence or
/// complement)?
fn strict_match(report: &LogicTree, truth: &LogicTree) -> Result<bool> {
    let eq = truth_equivalent(report, truth)?;
    Ok(eq.equivalent || eq.complement)
}

/// Does `report` match `truth` after substituting reported leaves by true
/// leaves within the window?
fn windowed_match(
    report: &LogicTree,
    truth: &LogicTree,
    window_cm: f64,
    positions: &[MarkerPosition],
) -> Result<bool> {
    let report_leaves: Vec<usize> = report.distinct_leaves().into_iter().collect();
    let truth_leaves: Vec<usize> = truth.distinct_leaves().into_iter().collect();
    let candidates: Vec<Vec<usize>> = report_leaves
        .iter()
        .map(|&l| {
            let mut c = vec![l];
            for &t in &truth_leaves {
                if t != l
                    && positions[t].chromosome == positions[l].chromosome
                    && (positions[t].position_cm - positions[l].position_cm).abs() <= window_cm
                {
                    c.push(t);
                }
            }
            c
        })
        .collect();
    let total: usize = candidates.iter().map(Vec::len).product();
    if total > 100_000 {
        log::warn!(
            "windowed matching would enumerate {total} substitutions for {}; \
             testing the identity assignment only",
            report.canonical()
        );
        return strict_match(report, truth);
    }
    for code in 0..total {
        let mut rem = code;
        let mut assignment = BTreeMap::new();
        for (slot, c) in candidates.iter().enumerate() {
            assignment.insert(report_leaves[slot], c[rem % c.len()]);
            rem /= c.len();
        }
        let mapped = report.map_leaves(&|l| assignment.get(&l).copied().unwrap_or(l));
        if strict_match(&mapped, truth)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Score reported expressions against the true trees.
///
/// Matching is a maximum bipartite matching, so the result does not depend
/// on report order; each true tree is matched at most once. `positions`
/// gives the genomic location of each data column and is required in
/// windowed mode.
pub fn match_discoveries(
    reported: &[String],
    truth: &[String],
    mode: MatchMode,
    positions: Option<&[MarkerPosition]>,
) -> Result<ScoreCard> {
    let truth_trees = parse_all(truth)?;
    let mut report_trees = parse_all(reported)?;
    for t in report_trees.iter_mut() {
        *t = t.canonicalized();
    }
    // canonical-order processing makes scoring a function of the report set
    report_trees.sort_by_key(|t| t.canonical());

    let window = match mode {
        MatchMode::Strict => None,
        MatchMode::Windowed { window_cm } => {
            if !(window_cm >= 0.0) {
                return Err(Error::Config {
                    what: format!("window must be non-negative, got {window_cm}"),
                });
            }
            Some(window_cm)
        }
    };
    let positions = match (window, positions) {
        (Some(_), None) => {
            return Err(Error::Config {
                what: "windowed scoring requires marker positions for every column".to_string(),
            })
        }
        (_, p) => p,
    };
    if let Some(pos) = positions {
        let max_leaf = report_trees
            .iter()
            .chain(&truth_trees)
            .flat_map(|t| t.distinct_leaves())
            .max();
        if let Some(max_leaf) = max_leaf {
            if max_leaf >= pos.len() {
                return Err(Error::ShapeMismatch {
                    what: format!(
                        "expression uses column {} but only {} marker positions were given",
                        max_leaf + 1,
                        pos.len()
                    ),
                });
            }
        }
    }

    let mut compatible = vec![vec![false; truth_trees.len()]; report_trees.len()];
    for (r, report) in report_trees.iter().enumerate() {
        for (t, truth_tree) in truth_trees.iter().enumerate() {
            compatible[r][t] = match window {
                None => strict_match(report, truth_tree)?,
                Some(w) => windowed_match(report, truth_tree, w, positions.unwrap())?,
            };
        }
    }

    // maximum bipartite matching (augmenting paths over true trees)
    fn augment(
        t: usize,
        compatible: &[Vec<bool>],
        assigned: &mut [Option<usize>],
        visited: &mut [bool],
    ) -> bool {
        for r in 0..compatible.len() {
            if compatible[r][t] && !visited[r] {
                visited[r] = true;
                let free = match assigned[r] {
                    None => true,
                    Some(prev) => augment(prev, compatible, assigned, visited),
                };
                if free {
                    assigned[r] = Some(t);
                    return true;
                }
            }
        }
        false
    }
    let mut assigned: Vec<Option<usize>> = vec![None; report_trees.len()];
    let mut hits = vec![false; truth_trees.len()];
    for t in 0..truth_trees.len() {
        let mut visited = vec![false; report_trees.len()];
        hits[t] = augment(t, &compatible, &mut assigned, &mut visited);
    }
    let matched = assigned.iter().filter(|a| a.is_some()).count();

    // wrong leaves: occurrences representing no true leaf
    let truth_leaf_set: std::collections::BTreeSet<usize> = truth_trees
        .iter()
        .flat_map(|t| t.distinct_leaves())
        .collect();
    let mut wrong_leaves = 0usize;
    for report in &report_trees {
        for leaf in report.leaf_indices() {
            let ok = match window {
                None => truth_leaf_set.contains(&leaf),
                Some(w) => {
                    let pos = positions.unwrap();
                    truth_leaf_set.iter().any(|&t| {
                        pos[t].chromosome == pos[leaf].chromosome
                            && (pos[t].position_cm - pos[leaf].position_cm).abs() <= w
                    })
                }
            };
            if !ok {
                wrong_leaves += 1;
            }
        }
    }

    Ok(ScoreCard {
        hits,
        reports: report_trees.len(),
        false_positives: report_trees.len() - matched,
        wrong_leaves,
        mode,
    })
}

/// How each replicate's binary covariates are produced.
#[derive(Clone, Debug)]
pub enum CovariateGenerator {
    /// Random-correlation binaries: vine correlation matrix with parameter
    /// `alphad`, thresholded at constant marginal probability.
    General {
        p: usize,
        alphad: f64,
        margprob: f64,
    },
    /// Back-cross markers on a genetic map, optionally column-permuted.
    Backcross { map: GeneticMap, permute: bool },
}

/// Full replication-study configuration.
#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub scenario: Scenario,
    pub generator: CovariateGenerator,
    /// Observations per replicate.
    pub n: usize,
    pub replicates: usize,
    /// Search settings; the per-replicate seed is derived from `seed`.
    pub gmj: GmjConfig,
    /// Reporting threshold on marginal inclusion.
    pub threshold: f64,
    /// When set (and the generator is a back-cross), also score with this
    /// window.
    pub window_cm: Option<f64>,
    pub aggregation: AggregationMode,
    pub noise_sd: f64,
    pub seed: u64,
}

/// One replicate's report and scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateOutcome {
    pub seed: u64,
    /// The thresholded report (expressions and fixed covariates).
    pub reported: Vec<(String, f64)>,
    pub strict: ScoreCard,
    pub windowed: Option<ScoreCard>,
}

/// Score aggregates over all replicates for one matching mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSummary {
    /// Canonical names of the true trees.
    pub truth: Vec<String>,
    /// Fraction of replicates recovering each true tree.
    pub per_tree_power: Vec<f64>,
    /// Unweighted mean of the per-tree powers.
    pub overall_power: f64,
    pub mean_false_positives: f64,
    pub mean_fdr: f64,
    /// Wrong-leaf occurrences summed over the whole study.
    pub total_wrong_leaves: u64,
}

/// Everything a replication study produces.
#[derive(Clone, Debug, PartialEq)]
pub struct StudySummary {
    pub strict: ScoreSummary,
    pub windowed: Option<ScoreSummary>,
    pub outcomes: Vec<ReplicateOutcome>,
}

fn summarize(
    truth: &[String],
    cards: impl Iterator<Item = ScoreCard> + Clone,
    replicates: usize,
) -> ScoreSummary {
    let mut per_tree = vec![0.0; truth.len()];
    let mut fp = 0.0;
    let mut fdr = 0.0;
    let mut wl = 0u64;
    for card in cards {
        for (acc, hit) in per_tree.iter_mut().zip(&card.hits) {
            *acc += f64::from(*hit);
        }
        fp += card.false_positives as f64;
        fdr += card.fdr();
        wl += card.wrong_leaves as u64;
    }
    let n = replicates.max(1) as f64;
    for p in per_tree.iter_mut() {
        *p /= n;
    }
    let overall = if per_tree.is_empty() {
        0.0
    } else {
        per_tree.iter().sum::<f64>() / per_tree.len() as f64
    };
    ScoreSummary {
        truth: truth.to_vec(),
        per_tree_power: per_tree,
        overall_power: overall,
        mean_false_positives: fp / n,
        mean_fdr: fdr / n,
        total_wrong_leaves: wl,
    }
}

/// Simulate, fit, report, and score `cfg.replicates` independent datasets.
pub fn replicate_study(cfg: &StudyConfig) -> Result<StudySummary> {
    if cfg.replicates == 0 {
        return Err(Error::Config {
            what: "study needs at least one replicate".to_string(),
        });
    }
    if !(0.0..=1.0).contains(&cfg.threshold) {
        return Err(Error::Config {
            what: format!("report threshold must lie in [0,1], got {}", cfg.threshold),
        });
    }
    if let CovariateGenerator::General {
        p,
        alphad,
        margprob,
    } = &cfg.generator
    {
        if *p < cfg.scenario.min_columns() {
            return Err(Error::InsufficientColumns {
                required: cfg.scenario.min_columns(),
                got: *p,
            });
        }
        if !(*alphad > 0.0) || !(*margprob > 0.0 && *margprob < 1.0) {
            return Err(Error::Config {
                what: format!("invalid generator parameters alphad={alphad}, margprob={margprob}"),
            });
        }
    }
    let truth_names: Vec<String> = cfg
        .scenario
        .truth_trees()
        .iter()
        .map(|t| t.canonical())
        .collect();
    let mut outcomes = Vec::with_capacity(cfg.replicates);
    for r in 0..cfg.replicates {
        let data_seed = chain_seed(cfg.seed, 2 * r as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
        let (x, positions) = match &cfg.generator {
            CovariateGenerator::General {
                p,
                alphad,
                margprob,
            } => {
                let corr = random_correlation_matrix(*p, *alphad, &mut rng)?;
                let x = sample_correlated_binary(cfg.n, &corr, &vec![*margprob; *p], &mut rng)?;
                (x, None)
            }
            CovariateGenerator::Backcross { map, permute } => {
                let (x, pos) = simulate_backcross(cfg.n, map, *permute, &mut rng)?;
                (x, Some(pos))
            }
        };
        let data = scenario_response(x, cfg.scenario, cfg.noise_sd, &mut rng)?;
        let mut gmj = cfg.gmj.clone();
        gmj.seed = chain_seed(cfg.seed, 2 * r as u64 + 1);
        let results = run_chains(&data, &gmj)?;
        let aggregate = aggregate_chains(&results, cfg.aggregation)?;
        let reported = report_expressions(&aggregate, cfg.threshold);
        // fixed covariates are not trees; score expressions only
        let expressions: Vec<String> = reported
            .iter()
            .map(|(name, _)| name.clone())
            .filter(|name| parse(name).is_ok())
            .collect();
        let strict = match_discoveries(&expressions, &truth_names, MatchMode::Strict, None)?;
        let windowed = match (cfg.window_cm, &positions) {
            (Some(window_cm), Some(pos)) => Some(match_discoveries(
                &expressions,
                &truth_names,
                MatchMode::Windowed { window_cm },
                Some(pos),
            )?),
            _ => None,
        };
        outcomes.push(ReplicateOutcome {
            seed: data_seed,
            reported,
            strict,
            windowed,
        });
    }
    let strict = summarize(
        &truth_names,
        outcomes.iter().map(|o| o.strict.clone()),
        cfg.replicates,
    );
    let windowed = if outcomes.iter().all(|o| o.windowed.is_some()) && !outcomes.is_empty() {
        Some(summarize(
            &truth_names,
            outcomes
                .iter()
                .map(|o| o.windowed.clone().expect("checked")),
            cfg.replicates,
        ))
    } else {
        None
    };
    Ok(StudySummary {
        strict,
        windowed,
        outcomes,
    })
}

fn mode_label(mode: &ScoreSummary, windowed_cm: Option<f64>) -> String {
    match windowed_cm {
        Some(w) => format!("windowed({w}cM)"),
        None => {
            let _ = mode;
            "strict".to_string()
        }
    }
}

/// Serialize a study summary as TSV: `mode<TAB>metric<TAB>value`.
pub fn write_study_tsv<W: std::io::Write>(
    writer: &mut W,
    summary: &StudySummary,
    window_cm: Option<f64>,
) -> Result<()> {
    writeln!(writer, "mode\tmetric\tvalue")?;
    let mut emit = |label: &str, s: &ScoreSummary| -> Result<()> {
        for (name, p) in s.truth.iter().zip(&s.per_tree_power) {
            writeln!(writer, "{label}\tpower[{name}]\t{p:.6}")?;
        }
        writeln!(writer, "{label}\toverall_power\t{:.6}", s.overall_power)?;
        writeln!(writer, "{label}\tmean_fp\t{:.6}", s.mean_false_positives)?;
        writeln!(writer, "{label}\tmean_fdr\t{:.6}", s.mean_fdr)?;
        writeln!(writer, "{label}\ttotal_wl\t{}", s.total_wrong_leaves)?;
        Ok(())
    };
    emit("strict", &summary.strict)?;
    if let Some(w) = &summary.windowed {
        emit(&mode_label(w, window_cm.or(Some(f64::NAN))), w)?;
    }
    Ok(())
}

/// Human-readable aligned table of a study summary.
pub fn format_study_table(summary: &StudySummary, window_cm: Option<f64>) -> String {
    let mut rows: Vec<(String, String, String)> = Vec::new();
    let fmt_header = match (&summary.windowed, window_cm) {
        (Some(_), Some(w)) => format!("windowed({w}cM)"),
        (Some(_), None) => "windowed".to_string(),
        _ => String::new(),
    };
    let s = &summary.strict;
    let w = summary.windowed.as_ref();
    let cell = |v: f64| format!("{v:.3}");
    for (i, name) in s.truth.iter().enumerate() {
        rows.push((
            format!("power[{name}]"),
            cell(s.per_tree_power[i]),
            w.map(|w| cell(w.per_tree_power[i])).unwrap_or_default(),
        ));
    }
    rows.push((
        "overall_power".to_string(),
        cell(s.overall_power),
        w.map(|w| cell(w.overall_power)).unwrap_or_default(),
    ));
    rows.push((
        "mean_fp".to_string(),
        cell(s.mean_false_positives),
        w.map(|w| cell(w.mean_false_positives)).unwrap_or_default(),
    ));
    rows.push((
        "mean_fdr".to_string(),
        cell(s.mean_fdr),
        w.map(|w| cell(w.mean_fdr)).unwrap_or_default(),
    ));
    rows.push((
        "total_wl".to_string(),
        s.total_wrong_leaves.to_string(),
        w.map(|w| w.total_wrong_leaves.to_string())
            .unwrap_or_default(),
    ));
    let metric_width = rows
        .iter()
        .map(|(m, _, _)| m.len())
        .max()
        .unwrap_or(6)
        .max("metric".len());
    let strict_width = rows
        .iter()
        .map(|(_, s, _)| s.len())
        .max()
        .unwrap_or(6)
        .max("strict".len());
    let mut out = String::new();
    out.push_str(&format!(
        "{:metric_width$}  {:>strict_width$}",
        "metric", "strict"
    ));
    if summary.windowed.is_some() {
        out.push_str(&format!("  {fmt_header:>12}"));
    }
    out.push('\n');
    for (metric, strict_v, windowed_v) in rows {
        out.push_str(&format!(
            "{metric:metric_width$}  {strict_v:>strict_width$}"
        ));
        if summary.windowed.is_some() {
            out.push_str(&format!("  {windowed_v:>12}"));
        }
        out.push('\n');
    }
    out
}

/// Datasets produced inside [`replicate_study`]; exposed for callers that
/// need the same generation path (e.g. the command line).
pub fn generate_study_data(
    scenario: Scenario,
    generator: &CovariateGenerator,
    n: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<(Dataset, Option<Vec<MarkerPosition>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x, positions) = match generator {
        CovariateGenerator::General {
            p,
            alphad,
            margprob,
        } => {
            let corr = random_correlation_matrix(*p, *alphad, &mut rng)?;
            let x = sample_correlated_binary(n, &corr, &vec![*margprob; *p], &mut rng)?;
            (x, None)
        }
        CovariateGenerator::Backcross { map, permute } => {
            let (x, pos) = simulate_backcross(n, map, *permute, &mut rng)?;
            (x, Some(pos))
        }
    };
    let data = scenario_response(x, scenario, noise_sd, &mut rng)?;
    Ok((data, positions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_report_scores_perfectly() {
        let truth = strings(&["(X1&X2)", "X7"]);
        let reported = strings(&["(X2&X1)", "X7"]);
        let card = match_discoveries(&reported, &truth, MatchMode::Strict, None).unwrap();
        assert_eq!(card.hits, vec![true, true]);
        assert_eq!(card.false_positives, 0);
        assert_eq!(card.wrong_leaves, 0);
        assert_relative_eq!(card.fdr(), 0.0);
        assert_relative_eq!(card.power(), 1.0);
    }

    #[test]
    fn de_morgan_and_complement_forms_count_as_hits() {
        let truth = strings(&["(X2&X9)"]);
        for form in ["!(!X2|!X9)", "(!X2|!X9)", "!(X2&X9)"] {
            let card =
                match_discoveries(&strings(&[form]), &truth, MatchMode::Strict, None).unwrap();
            assert_eq!(card.hits, vec![true], "{form} should match");
            assert_eq!(card.wrong_leaves, 0);
        }
    }

    #[test]
    fn one_spurious_report_among_four_hits_gives_fdr_one_fifth() {
        let truth = strings(&["X37", "(X2&X9)", "(X20&(X7&X12))", "((X4&X10)&(X17&X30))"]);
        let mut reported = truth.clone();
        reported.push("(X19&X25)".to_string());
        let card = match_discoveries(&reported, &truth, MatchMode::Strict, None).unwrap();
        assert_eq!(card.matched(), 4);
        assert_eq!(card.false_positives, 1);
        assert_relative_eq!(card.fdr(), 0.2);
        // X19 and X25 are not truth leaves
        assert_eq!(card.wrong_leaves, 2);
    }

    #[test]
    fn each_true_tree_matches_at_most_once() {
        let truth = strings(&["(X1&X2)"]);
        let reported = strings(&["(X1&X2)", "(X2&X1)"]);
        let card = match_discoveries(&reported, &truth, MatchMode::Strict, None).unwrap();
        assert_eq!(card.matched(), 1);
        assert_eq!(card.false_positives, 1);
        // the duplicate's leaves are still true leaves
        assert_eq!(card.wrong_leaves, 0);
    }

    #[test]
    fn wrong_leaves_count_occurrences_not_distinct_columns() {
        let truth = strings(&["(X1&X2)"]);
        let reported = strings(&["((X3|X3)&X4)"]);
        let card = match_discoveries(&reported, &truth, MatchMode::Strict, None).unwrap();
        assert_eq!(card.false_positives, 1);
        assert_eq!(card.wrong_leaves, 3);
    }

    fn line_positions(cms: &[f64]) -> Vec<MarkerPosition> {
        cms.iter()
            .map(|&position_cm| MarkerPosition {
                chromosome: 0,
                position_cm,
            })
            .collect()
    }

    #[test]
    fn windowed_matching_accepts_nearby_leaf_substitutions() {
        // columns at 0, 10, 30 cM on one chromosome
        let positions = line_positions(&[0.0, 10.0, 30.0]);
        let truth = strings(&["(X1&X3)"]);
        let reported = strings(&["(X2&X3)"]);
        let wide = match_discoveries(
            &reported,
            &truth,
            MatchMode::Windowed { window_cm: 15.0 },
            Some(&positions),
        )
        .unwrap();
        assert_eq!(wide.hits, vec![true]);
        assert_eq!(wide.wrong_leaves, 0);
        let narrow = match_discoveries(
            &reported,
            &truth,
            MatchMode::Windowed { window_cm: 5.0 },
            Some(&positions),
        )
        .unwrap();
        assert_eq!(narrow.hits, vec![false]);
        assert_eq!(narrow.false_positives, 1);
        // X2 sits 10 cM from X1 and 20 cM from X3: wrong under a 5 cM window
        assert_eq!(narrow.wrong_leaves, 1);
        let strict = match_discoveries(&reported, &truth, MatchMode::Strict, None).unwrap();
        assert_eq!(strict.wrong_leaves, 1);
        assert!(wide.wrong_leaves <= strict.wrong_leaves);
    }

    #[test]
    fn windowed_matching_respects_chromosome_boundaries() {
        let positions = vec![
            MarkerPosition {
                chromosome: 0,
                position_cm: 0.0,
            },
            MarkerPosition {
                chromosome: 1,
                position_cm: 0.0,
            },
        ];
        let truth = strings(&["X1"]);
        let reported = strings(&["X2"]);
        let card = match_discoveries(
            &reported,
            &truth,
            MatchMode::Windowed { window_cm: 1000.0 },
            Some(&positions),
        )
        .unwrap();
        assert_eq!(card.hits, vec![false]);
        assert_eq!(card.wrong_leaves, 1);
    }

    #[test]
    fn maximum_matching_resolves_overlapping_candidates() {
        // X2 could represent either true leaf; X3 only the second. Both
        // truths must be credited.
        let positions = line_positions(&[0.0, 4.0, 8.0]);
        let truth = strings(&["X1", "X2"]);
        let reported = strings(&["X2", "X3"]);
        let card = match_discoveries(
            &reported,
            &truth,
            MatchMode::Windowed { window_cm: 5.0 },
            Some(&positions),
        )
        .unwrap();
        assert_eq!(card.hits, vec![true, true]);
        assert_eq!(card.false_positives, 0);
    }

    #[test]
    fn scoring_is_invariant_to_report_order() {
        let positions = line_positions(&[0.0, 4.0, 8.0, 50.0]);
        let truth = strings(&["X1", "X2"]);
        let a = strings(&["X2", "X3", "X4"]);
        let b = strings(&["X4", "X2", "X3"]);
        let mode = MatchMode::Windowed { window_cm: 5.0 };
        let card_a = match_discoveries(&a, &truth, mode, Some(&positions)).unwrap();
        let card_b = match_discoveries(&b, &truth, mode, Some(&positions)).unwrap();
        assert_eq!(card_a, card_b);
        let strict_a = match_discoveries(&a, &truth, MatchMode::Strict, None).unwrap();
        let strict_b = match_discoveries(&b, &truth, MatchMode::Strict, None).unwrap();
        assert_eq!(strict_a, strict_b);
    }

    #[test]
    fn unparseable_expressions_are_named_in_the_error() {
        let err = match_discoveries(
            &strings(&["(X1&"]),
            &strings(&["X1"]),
            MatchMode::Strict,
            None,
        )
        .unwrap_err();
        match err {
            Error::Parse { input, .. } => assert_eq!(input, "(X1&"),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn windowed_mode_requires_positions_and_enough_of_them() {
        let err = match_discoveries(
            &strings(&["X1"]),
            &strings(&["X2"]),
            MatchMode::Windowed { window_cm: 15.0 },
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
        let short = line_positions(&[0.0]);
        let err = match_discoveries(
            &strings(&["X1"]),
            &strings(&["X2"]),
            MatchMode::Windowed { window_cm: 15.0 },
            Some(&short),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn widening_the_window_is_monotone() {
        let positions = line_positions(&[0.0, 7.0, 14.0, 60.0]);
        let truth = strings(&["(X1&X3)"]);
        let reported = strings(&["(X2&X3)", "(X2&X4)"]);
        let mut last_hits = 0;
        let mut last_wl = usize::MAX;
        for window in [0.0, 7.0, 14.0, 100.0] {
            let card = match_discoveries(
                &reported,
                &truth,
                MatchMode::Windowed { window_cm: window },
                Some(&positions),
            )
            .unwrap();
            assert!(
                card.matched() >= last_hits,
                "hits shrank at window {window}"
            );
            assert!(card.wrong_leaves <= last_wl, "WL grew at window {window}");
            last_hits = card.matched();
            last_wl = card.wrong_leaves;
        }
    }

    fn tiny_study(seed: u64) -> StudyConfig {
        StudyConfig {
            scenario: Scenario::Scenario4,
            generator: CovariateGenerator::General {
                p: 12,
                alphad: 2.5,
                margprob: 0.5,
            },
            n: 250,
            replicates: 2,
            gmj: GmjConfig {
                d: 8,
                c_max: 2,
                k_max: 6,
                t_max: 3,
                explore_iters: 100,
                final_iters: 400,
                chains: 1,
                ..GmjConfig::default()
            },
            threshold: 0.5,
            window_cm: None,
            aggregation: AggregationMode::WeightedMass,
            noise_sd: 1.0,
            seed,
        }
    }

    #[test]
    fn replicate_study_runs_and_is_deterministic() {
        let cfg = tiny_study(41);
        let a = replicate_study(&cfg).unwrap();
        let b = replicate_study(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.outcomes.len(), 2);
        assert_eq!(a.strict.truth, vec!["(X5&X9)", "(X8&X11)", "(X1&X4)"]);
        assert_eq!(a.strict.per_tree_power.len(), 3);
        assert!(a
            .strict
            .per_tree_power
            .iter()
            .all(|p| (0.0..=1.0).contains(p)));
        assert!(a.windowed.is_none());
        let expected_overall = a.strict.per_tree_power.iter().sum::<f64>() / 3.0;
        assert_relative_eq!(a.strict.overall_power, expected_overall);
    }

    #[test]
    fn study_config_validation() {
        let mut cfg = tiny_study(1);
        cfg.replicates = 0;
        assert!(replicate_study(&cfg).is_err());
        let mut cfg = tiny_study(1);
        cfg.threshold = 1.5;
        assert!(replicate_study(&cfg).is_err());
        let mut cfg = tiny_study(1);
        cfg.generator = CovariateGenerator::General {
            p: 5,
            alphad: 2.5,
            margprob: 0.5,
        };
        assert!(matches!(
            replicate_study(&cfg),
            Err(Error::InsufficientColumns {
                required: 11,
                got: 5
            })
        ));
    }

    #[test]
    fn study_summary_serialization_matches_snapshot() {
        let strict_card = ScoreCard {
            hits: vec![true, false],
            reports: 2,
            false_positives: 1,
            wrong_leaves: 2,
            mode: MatchMode::Strict,
        };
        let summary = StudySummary {
            strict: summarize(
                &strings(&["(X5&X9)", "(X1&X4)"]),
                std::iter::once(strict_card.clone()),
                1,
            ),
            windowed: None,
            outcomes: vec![ReplicateOutcome {
                seed: 1,
                reported: vec![("(X5&X9)".to_string(), 0.99)],
                strict: strict_card,
                windowed: None,
            }],
        };
        let mut buf = Vec::new();
        write_study_tsv(&mut buf, &summary, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "mode\tmetric\tvalue\n\
             strict\tpower[(X5&X9)]\t1.000000\n\
             strict\tpower[(X1&X4)]\t0.000000\n\
             strict\toverall_power\t0.500000\n\
             strict\tmean_fp\t1.000000\n\
             strict\tmean_fdr\t0.500000\n\
             strict\ttotal_wl\t2\n"
        );
        let table = format_study_table(&summary, None);
        assert!(table.contains("power[(X5&X9)]"));
        assert!(table.starts_with("metric"));
    }
}
