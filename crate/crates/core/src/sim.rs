//! Synthetic data for benchmark studies.
//!
//! Three generators: random correlation matrices via the partial-correlation
//! vine construction, correlated binary covariates obtained by thresholding
//! a latent multivariate normal, and genetic back-cross markers whose
//! correlation decays with map distance. Scenario responses plant known
//! logic trees into a Gaussian linear model, so recovery can be scored
//! against ground truth.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, Poisson, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal as Gaussian};

use crate::dataset::{BinaryMatrix, Dataset, FixedCovariate, GroundTruth};
use crate::error::{Error, Result};
use crate::expr::LogicTree;

/// Smallest eigenvalue accepted as "positive definite".
const PD_TOL: f64 = 1e-10;
/// Eigenvalue floor used when projecting an indefinite latent matrix.
const PD_CLIP: f64 = 1e-6;

/// A validated correlation matrix: symmetric, unit diagonal, positive
/// definite.
#[derive(Clone, Debug)]
pub struct CorrelationMatrix(DMatrix<f64>);

impl CorrelationMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<CorrelationMatrix> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::ShapeMismatch {
                what: format!(
                    "correlation matrix must be square, got {}x{}",
                    m.nrows(),
                    m.ncols()
                ),
            });
        }
        for i in 0..m.nrows() {
            if (m[(i, i)] - 1.0).abs() > 1e-8 {
                return Err(Error::ShapeMismatch {
                    what: format!("diagonal entry ({i},{i}) is {}, expected 1", m[(i, i)]),
                });
            }
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-8 {
                    return Err(Error::ShapeMismatch {
                        what: format!("asymmetric entries at ({i},{j})"),
                    });
                }
            }
        }
        let min_eig = SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig <= PD_TOL {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min_eig,
            });
        }
        Ok(CorrelationMatrix(m))
    }

    pub fn identity(dim: usize) -> CorrelationMatrix {
        CorrelationMatrix(DMatrix::identity(dim, dim))
    }

    /// Constant off-diagonal correlation; positive definite for
    /// `rho` in (-1/(dim-1), 1).
    pub fn equicorrelated(dim: usize, rho: f64) -> Result<CorrelationMatrix> {
        let m = DMatrix::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { rho });
        CorrelationMatrix::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

/// Draw a random correlation matrix by the partial-correlation vine: level-k
/// partials are Beta(b,b) on (-1,1) with b = alphad + (p-2-k)/2, composed
/// into raw correlations layer by layer. Each pairwise marginal is then
/// Beta(a,a) on (-1,1) with a = alphad + (p-2)/2.
pub fn random_correlation_matrix<R: Rng + ?Sized>(
    p: usize,
    alphad: f64,
    rng: &mut R,
) -> Result<CorrelationMatrix> {
    if p < 2 {
        return Err(Error::Config {
            what: format!("correlation matrix needs at least 2 columns, got {p}"),
        });
    }
    if !(alphad > 0.0) {
        return Err(Error::Config {
            what: format!("alphad must be positive, got {alphad}"),
        });
    }
    let mut partial = DMatrix::<f64>::zeros(p, p);
    let mut full = DMatrix::<f64>::identity(p, p);
    for k in 0..p - 1 {
        let b = alphad + (p as f64 - 2.0 - k as f64) / 2.0;
        let beta = Beta::new(b, b).map_err(|e| Error::Config {
            what: format!("invalid Beta({b},{b}) parameter: {e}"),
        })?;
        for i in k + 1..p {
            let pc = 2.0 * beta.sample(rng) - 1.0;
            partial[(k, i)] = pc;
            let mut rho = pc;
            for l in (0..k).rev() {
                rho = rho
                    * ((1.0 - partial[(l, i)].powi(2)) * (1.0 - partial[(l, k)].powi(2))).sqrt()
                    + partial[(l, i)] * partial[(l, k)];
            }
            full[(k, i)] = rho;
            full[(i, k)] = rho;
        }
    }
    CorrelationMatrix::new(full)
}

/// Standard bivariate normal CDF P(Z1 < h, Z2 < k) at correlation `rho`,
/// via the single integral over the correlation parameter (composite
/// Simpson; the integrand is smooth for |rho| < 1).
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    let std = Gaussian::standard();
    let independent = std.cdf(h) * std.cdf(k);
    if rho == 0.0 {
        return independent;
    }
    let f = |t: f64| {
        let denom = 1.0 - t * t;
        (-(h * h - 2.0 * t * h * k + k * k) / (2.0 * denom)).exp() / denom.sqrt()
    };
    let panels = 2048;
    let step = rho / panels as f64;
    let mut acc = f(0.0) + f(rho);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(step * i as f64);
    }
    independent + acc * step / 3.0 / (2.0 * PI)
}

/// Latent normal correlation that produces binary correlation `target`
/// after thresholding at marginal probabilities `p_i`, `p_j`. Exact arcsine
/// identity at the median threshold, bisection on the orthant probability
/// otherwise (tolerance 1e-6).
pub fn latent_correlation_for_binary(target: f64, p_i: f64, p_j: f64) -> Result<f64> {
    for (label, p) in [("first", p_i), ("second", p_j)] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Config {
                what: format!("{label} marginal probability must lie in (0,1), got {p}"),
            });
        }
    }
    if !(-1.0..=1.0).contains(&target) {
        return Err(Error::Config {
            what: format!("target correlation must lie in [-1,1], got {target}"),
        });
    }
    if (p_i - 0.5).abs() < 1e-12 && (p_j - 0.5).abs() < 1e-12 {
        return Ok((PI * target / 2.0).sin());
    }
    let sd = (p_i * (1.0 - p_i) * p_j * (1.0 - p_j)).sqrt();
    let p11_target = p_i * p_j + target * sd;
    // joint-probability bounds for the given margins
    let lower = (p_i + p_j - 1.0).max(0.0);
    let upper = p_i.min(p_j);
    let tol = 1e-9;
    if p11_target >= upper - tol {
        return Ok(1.0);
    }
    if p11_target <= lower + tol {
        return Ok(-1.0);
    }
    let std = Gaussian::standard();
    let h = std.inverse_cdf(p_i);
    let k = std.inverse_cdf(p_j);
    let (mut lo, mut hi) = (-1.0 + 1e-9, 1.0 - 1e-9);
    // orthant probability is increasing in the latent correlation
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if bivariate_normal_cdf(h, k, mid) < p11_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Latent matrix matching a target binary correlation matrix at the given
/// margins; projected back to positive definite (eigenvalue clipping) with
/// a warning if the pairwise solution is indefinite.
fn latent_matrix(target: &CorrelationMatrix, margprob: &[f64]) -> Result<DMatrix<f64>> {
    let p = target.dim();
    let median_margins = margprob.iter().all(|&m| (m - 0.5).abs() < 1e-12);
    let mut latent = DMatrix::<f64>::identity(p, p);
    for i in 0..p {
        for j in 0..i {
            let r = if median_margins {
                (PI * target.get(i, j) / 2.0).sin()
            } else {
                latent_correlation_for_binary(target.get(i, j), margprob[i], margprob[j])?
            };
            latent[(i, j)] = r;
            latent[(j, i)] = r;
        }
    }
    let eigen = SymmetricEigen::new(latent.clone());
    let min_eig = eigen
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig <= PD_TOL {
        log::warn!(
            "latent correlation matrix is not positive definite \
             (min eigenvalue {min_eig:.3e}); clipping eigenvalues"
        );
        let clipped = DVector::from_iterator(p, eigen.eigenvalues.iter().map(|&l| l.max(PD_CLIP)));
        let q = &eigen.eigenvectors;
        let mut projected = q * DMatrix::from_diagonal(&clipped) * q.transpose();
        // restore the unit diagonal
        let scale: Vec<f64> = (0..p).map(|i| projected[(i, i)].sqrt()).collect();
        for i in 0..p {
            for j in 0..p {
                projected[(i, j)] /= scale[i] * scale[j];
            }
        }
        return Ok(projected);
    }
    Ok(latent)
}

/// Threshold a latent multivariate normal to produce binary columns whose
/// pairwise correlations match `corr` at marginal probabilities `margprob`.
pub fn sample_correlated_binary<R: Rng + ?Sized>(
    n: usize,
    corr: &CorrelationMatrix,
    margprob: &[f64],
    rng: &mut R,
) -> Result<BinaryMatrix> {
    let p = corr.dim();
    if margprob.len() != p {
        return Err(Error::ShapeMismatch {
            what: format!(
                "{} marginal probabilities for a {p}-column correlation matrix",
                margprob.len()
            ),
        });
    }
    for &m in margprob {
        if !(m > 0.0 && m < 1.0) {
            return Err(Error::Config {
                what: format!("marginal probabilities must lie in (0,1), got {m}"),
            });
        }
    }
    let latent = latent_matrix(corr, margprob)?;
    let eigen = SymmetricEigen::new(latent);
    let root = DVector::from_iterator(p, eigen.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()));
    let factor = &eigen.eigenvectors * DMatrix::from_diagonal(&root);
    let std = Gaussian::standard();
    let thresholds: Vec<f64> = margprob.iter().map(|&m| std.inverse_cdf(m)).collect();
    let mut columns = vec![vec![0u8; n]; p];
    let mut u = DVector::<f64>::zeros(p);
    for row in 0..n {
        for v in u.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let z = &factor * &u;
        for j in 0..p {
            columns[j][row] = u8::from(z[j] < thresholds[j]);
        }
    }
    BinaryMatrix::from_columns(columns)
}

/// Marker layout: chromosomes with positions in centiMorgan.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneticMap {
    chromosomes: Vec<Vec<f64>>,
}

/// Where a data column sits on the genome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkerPosition {
    pub chromosome: usize,
    pub position_cm: f64,
}

impl GeneticMap {
    pub fn new(chromosomes: Vec<Vec<f64>>) -> Result<GeneticMap> {
        if chromosomes.is_empty() || chromosomes.iter().any(|c| c.is_empty()) {
            return Err(Error::Config {
                what: "genetic map needs at least one marker per chromosome".to_string(),
            });
        }
        for (c, positions) in chromosomes.iter().enumerate() {
            for w in positions.windows(2) {
                if !(w[1] >= w[0]) {
                    return Err(Error::Config {
                        what: format!("chromosome {c} positions must be non-decreasing"),
                    });
                }
            }
            if positions.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return Err(Error::Config {
                    what: format!("chromosome {c} has a negative or non-finite position"),
                });
            }
        }
        Ok(GeneticMap { chromosomes })
    }

    /// Evenly spaced markers spanning each chromosome length.
    pub fn equidistant(lengths_cm: &[f64], markers_per_chromosome: usize) -> Result<GeneticMap> {
        if markers_per_chromosome == 0 {
            return Err(Error::Config {
                what: "markers_per_chromosome must be positive".to_string(),
            });
        }
        let chromosomes = lengths_cm
            .iter()
            .map(|&len| {
                if markers_per_chromosome == 1 {
                    vec![0.0]
                } else {
                    (0..markers_per_chromosome)
                        .map(|i| len * i as f64 / (markers_per_chromosome - 1) as f64)
                        .collect()
                }
            })
            .collect();
        GeneticMap::new(chromosomes)
    }

    /// Five chromosomes from 100 cM down to 40 cM, ten equidistant markers
    /// each (50 markers total).
    pub fn default_map() -> GeneticMap {
        GeneticMap::equidistant(&[100.0, 85.0, 70.0, 55.0, 40.0], 10)
            .expect("default map parameters are valid")
    }

    pub fn chromosomes(&self) -> &[Vec<f64>] {
        &self.chromosomes
    }

    pub fn total_markers(&self) -> usize {
        self.chromosomes.iter().map(Vec::len).sum()
    }

    /// Positions in map order (chromosome by chromosome).
    pub fn positions(&self) -> Vec<MarkerPosition> {
        self.chromosomes
            .iter()
            .enumerate()
            .flat_map(|(chromosome, positions)| {
                positions.iter().map(move |&position_cm| MarkerPosition {
                    chromosome,
                    position_cm,
                })
            })
            .collect()
    }
}

/// Haldane map function: recombination probability for a distance in cM.
pub fn haldane_recombination(distance_cm: f64) -> f64 {
    0.5 * (1.0 - (-2.0 * distance_cm / 100.0).exp())
}

/// Simulate back-cross genotypes: along each chromosome the genotype is a
/// Markov chain that flips between markers with the Haldane recombination
/// probability; chromosomes are independent. With `permute`, the columns
/// are shuffled. Returns the matrix and the genomic position of each column.
pub fn simulate_backcross<R: Rng + ?Sized>(
    n: usize,
    map: &GeneticMap,
    permute: bool,
    rng: &mut R,
) -> Result<(BinaryMatrix, Vec<MarkerPosition>)> {
    let p = map.total_markers();
    let mut columns = vec![vec![0u8; n]; p];
    for row in 0..n {
        let mut j = 0;
        for positions in &map.chromosomes {
            let mut allele = u8::from(rng.random::<bool>());
            columns[j][row] = allele;
            j += 1;
            for w in positions.windows(2) {
                let r = haldane_recombination(w[1] - w[0]);
                if rng.random::<f64>() < r {
                    allele ^= 1;
                }
                columns[j][row] = allele;
                j += 1;
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    if permute {
        order.shuffle(rng);
    }
    let map_positions = map.positions();
    let mut shuffled = Vec::with_capacity(p);
    let mut positions = Vec::with_capacity(p);
    let mut by_index: Vec<Option<Vec<u8>>> = columns.into_iter().map(Some).collect();
    for &original in &order {
        shuffled.push(by_index[original].take().expect("each column moved once"));
        positions.push(map_positions[original]);
    }
    Ok((BinaryMatrix::from_columns(shuffled)?, positions))
}

/// Benchmark response scenarios with known ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// Three two-way interactions with effects 1.43 / 0.89 / 0.7.
    Scenario4,
    /// Scenario 4 plus a fixed covariate `age ~ Poisson(34)` with effect 2.
    Scenario4Age,
    /// One leaf and three interactions of orders 2, 3, 4 with effects
    /// 1.5 / 3.5 / 9 / 7.
    Scenario5,
}

impl Scenario {
    pub fn parse_name(s: &str) -> Result<Scenario> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "scenario4" => Ok(Scenario::Scenario4),
            "scenario4age" => Ok(Scenario::Scenario4Age),
            "scenario5" => Ok(Scenario::Scenario5),
            _ => Err(Error::Config {
                what: format!(
                    "unknown scenario {s:?} (expected scenario4, scenario4age, or scenario5)"
                ),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Scenario4 => "scenario4",
            Scenario::Scenario4Age => "scenario4age",
            Scenario::Scenario5 => "scenario5",
        }
    }

    /// The data-generating trees, in effect order.
    pub fn truth_trees(self) -> Vec<LogicTree> {
        let and = LogicTree::and;
        let leaf = LogicTree::leaf;
        match self {
            Scenario::Scenario4 | Scenario::Scenario4Age => vec![
                and(leaf(4), leaf(8)),
                and(leaf(7), leaf(10)),
                and(leaf(0), leaf(3)),
            ],
            Scenario::Scenario5 => vec![
                leaf(36),
                and(leaf(1), leaf(8)),
                and(and(leaf(6), leaf(11)), leaf(19)),
                and(and(leaf(3), leaf(9)), and(leaf(16), leaf(29))),
            ],
        }
    }

    /// Fixed-covariate names in the generating model.
    pub fn truth_fixed(self) -> Vec<&'static str> {
        match self {
            Scenario::Scenario4Age => vec!["age"],
            _ => vec![],
        }
    }

    /// (intercept, per-tree effects) in `truth_trees` order.
    pub fn effects(self) -> (f64, Vec<f64>) {
        match self {
            Scenario::Scenario4 | Scenario::Scenario4Age => (1.0, vec![1.43, 0.89, 0.7]),
            Scenario::Scenario5 => (1.0, vec![1.5, 3.5, 9.0, 7.0]),
        }
    }

    /// Effects of the fixed covariates, aligned with `truth_fixed`.
    pub fn fixed_effects(self) -> Vec<f64> {
        match self {
            Scenario::Scenario4Age => vec![2.0],
            _ => vec![],
        }
    }

    /// Minimum number of binary columns the scenario's leaves require.
    pub fn min_columns(self) -> usize {
        match self {
            Scenario::Scenario4 | Scenario::Scenario4Age => 11,
            Scenario::Scenario5 => 37,
        }
    }

    /// The noiseless response mean, row by row.
    pub fn mean_vector(self, x: &BinaryMatrix, fixed: &[FixedCovariate]) -> Result<Vec<f64>> {
        if x.p() < self.min_columns() {
            return Err(Error::InsufficientColumns {
                required: self.min_columns(),
                got: x.p(),
            });
        }
        let (intercept, effects) = self.effects();
        let mut mu = vec![intercept; x.n()];
        for (tree, effect) in self.truth_trees().iter().zip(&effects) {
            let col = tree.evaluate(x)?;
            for (m, v) in mu.iter_mut().zip(&col) {
                *m += effect * *v as f64;
            }
        }
        for (name, effect) in self.truth_fixed().iter().zip(self.fixed_effects()) {
            let covariate =
                fixed
                    .iter()
                    .find(|f| f.name == *name)
                    .ok_or_else(|| Error::UnknownColumn {
                        name: (*name).to_string(),
                    })?;
            if covariate.values.len() != x.n() {
                return Err(Error::ShapeMismatch {
                    what: format!(
                        "fixed covariate {name} has {} rows, data has {}",
                        covariate.values.len(),
                        x.n()
                    ),
                });
            }
            for (m, v) in mu.iter_mut().zip(&covariate.values) {
                *m += effect * v;
            }
        }
        Ok(mu)
    }
}

/// Build a full dataset for a scenario: draw any fixed covariates, add
/// Gaussian noise with the given standard deviation, and attach the ground
/// truth for later scoring.
pub fn scenario_response<R: Rng + ?Sized>(
    x: BinaryMatrix,
    scenario: Scenario,
    noise_sd: f64,
    rng: &mut R,
) -> Result<Dataset> {
    if !(noise_sd >= 0.0) {
        return Err(Error::Config {
            what: format!("noise standard deviation must be non-negative, got {noise_sd}"),
        });
    }
    let n = x.n();
    let mut fixed = Vec::new();
    if scenario == Scenario::Scenario4Age {
        let poisson = Poisson::new(34.0).expect("positive rate");
        let values: Vec<f64> = (0..n).map(|_| poisson.sample(rng)).collect();
        fixed.push(FixedCovariate {
            name: "age".to_string(),
            values,
        });
    }
    let mu = scenario.mean_vector(&x, &fixed)?;
    let y: Vec<f64> = mu
        .into_iter()
        .map(|m| m + noise_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut data = Dataset::new(x, y)?;
    if !fixed.is_empty() {
        data = data.with_fixed(fixed)?;
    }
    data.truth = Some(GroundTruth {
        trees: scenario.truth_trees(),
        fixed: scenario
            .truth_fixed()
            .iter()
            .map(|s| s.to_string())
            .collect(),
    });
    Ok(data)
}

/// Write marker positions as TSV (`chromosome<TAB>position_cm`), one row
/// per data column in column order.
pub fn write_positions_to<W: std::io::Write>(
    writer: &mut W,
    positions: &[MarkerPosition],
) -> Result<()> {
    writeln!(writer, "chromosome\tposition_cm")?;
    for p in positions {
        writeln!(writer, "{}\t{}", p.chromosome, p.position_cm)?;
    }
    Ok(())
}

/// Write a positions sidecar file next to a simulated back-cross dataset.
pub fn write_positions_file<P: AsRef<std::path::Path>>(
    positions: &[MarkerPosition],
    path: P,
) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    write_positions_to(&mut file, positions)
}

/// Read a sidecar produced by [`write_positions_file`].
pub fn read_positions_from<R: std::io::BufRead>(reader: R) -> Result<Vec<MarkerPosition>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if i == 0 {
            if trimmed != "chromosome\tposition_cm" {
                return Err(Error::Parse {
                    input: line,
                    position: 0,
                    reason: "expected header 'chromosome<TAB>position_cm'".to_string(),
                });
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let bad = |reason: &str| Error::Parse {
            input: trimmed.to_string(),
            position: 0,
            reason: format!("line {}: {reason}", i + 1),
        };
        let (chrom, pos) = trimmed
            .split_once('\t')
            .ok_or_else(|| bad("expected two tab-separated fields"))?;
        out.push(MarkerPosition {
            chromosome: chrom
                .trim()
                .parse()
                .map_err(|_| bad("chromosome is not an integer"))?,
            position_cm: pos
                .trim()
                .parse()
                .map_err(|_| bad("position is not a number"))?,
        });
    }
    Ok(out)
}

/// Read marker positions from a file path.
pub fn read_positions_file<P: AsRef<std::path::Path>>(path: P) -> Result<Vec<MarkerPosition>> {
    let file = std::fs::File::open(path)?;
    read_positions_from(std::io::BufReader::new(file))
}
