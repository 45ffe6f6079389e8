//! The mode-jumping Metropolis-Hastings sampler over model indicator
//! vectors.
//!
//! Two move types drive the chain. A *local step* flips a few uniformly
//! chosen indicators and accepts by the plain Metropolis ratio (the proposal
//! is symmetric). A *mode jump* makes a large uniform flip, walks greedily
//! uphill to a nearby mode, then randomizes every indicator independently
//! with a small probability epsilon; a mirrored backward pass from the
//! proposal yields the auxiliary mode that makes the move reversible. With
//! flip count H between a state and its mode, the randomization density is
//! epsilon^H (1-epsilon)^(D-H), so the log acceptance ratio is
//!
//! ```text
//! log r = [log p(M*) - log p(M)] + (H(M, M_k) - H(M*, M_k*)) (log eps - log(1-eps))
//! ```
//!
//! Every model evaluation is memoized through the visited registry, so a
//! model's marginal likelihood is computed once per chain no matter how
//! often the walk returns to it.

use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::marglik::MarglikEstimator;
use crate::model::{is_admissible, log_model_prior, Model, PriorConfig};
use crate::population::Population;
use crate::registry::{ModelKey, ModelRecord, VisitedRegistry};

/// Sampler tuning knobs.
#[derive(Clone, Copy, Debug)]
pub struct MjParams {
    /// Number of Markov chain iterations.
    pub n_iter: usize,
    /// Probability that an iteration attempts a mode jump instead of a
    /// local step.
    pub jump_prob: f64,
    /// Local steps flip between `min_flip` and `max_flip` indicators.
    pub min_flip: usize,
    pub max_flip: usize,
    /// Mode jumps start by flipping between `min_jump` and `max_jump`
    /// indicators.
    pub min_jump: usize,
    pub max_jump: usize,
    /// Per-indicator randomization probability epsilon after the greedy
    /// climb.
    pub rand_flip_prob: f64,
    /// Cap on greedy ascent steps.
    pub greedy_max_steps: usize,
}

impl Default for MjParams {
    fn default() -> Self {
        MjParams {
            n_iter: 1000,
            jump_prob: 0.05,
            min_flip: 1,
            max_flip: 3,
            min_jump: 5,
            max_jump: 10,
            rand_flip_prob: 0.05,
            greedy_max_steps: 50,
        }
    }
}

impl MjParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_flip == 0 || self.min_flip > self.max_flip {
            return Err(Error::Config {
                what: format!(
                    "local flip range [{}, {}] invalid",
                    self.min_flip, self.max_flip
                ),
            });
        }
        if self.min_jump == 0 || self.min_jump > self.max_jump {
            return Err(Error::Config {
                what: format!(
                    "jump flip range [{}, {}] invalid",
                    self.min_jump, self.max_jump
                ),
            });
        }
        if !(self.rand_flip_prob > 0.0 && self.rand_flip_prob < 0.5) {
            return Err(Error::Config {
                what: format!(
                    "randomization probability must lie in (0, 0.5), got {}",
                    self.rand_flip_prob
                ),
            });
        }
        if !(0.0..=1.0).contains(&self.jump_prob) {
            return Err(Error::Config {
                what: format!(
                    "jump probability must lie in [0, 1], got {}",
                    self.jump_prob
                ),
            });
        }
        Ok(())
    }
}

/// Memoizing evaluator of the unnormalized log posterior. Inadmissible
/// models score negative infinity and are never stored.
pub struct ModelScorer<'a> {
    pop: &'a Population,
    data: &'a Dataset,
    prior: &'a PriorConfig,
    estimator: &'a dyn MarglikEstimator,
    registry: &'a mut VisitedRegistry,
    retain_coefficients: bool,
}

impl<'a> ModelScorer<'a> {
    pub fn new(
        pop: &'a Population,
        data: &'a Dataset,
        prior: &'a PriorConfig,
        estimator: &'a dyn MarglikEstimator,
        registry: &'a mut VisitedRegistry,
        retain_coefficients: bool,
    ) -> ModelScorer<'a> {
        ModelScorer {
            pop,
            data,
            prior,
            estimator,
            registry,
            retain_coefficients,
        }
    }

    pub fn population(&self) -> &Population {
        self.pop
    }

    pub fn registry(&self) -> &VisitedRegistry {
        self.registry
    }

    pub fn key_of(&self, m: &Model) -> ModelKey {
        ModelKey::from_model(m, self.pop, self.data)
    }

    /// Unnormalized log posterior of `m`; computed at most once per model.
    pub fn log_target(&mut self, m: &Model) -> Result<f64> {
        if !is_admissible(m, self.prior) {
            return Ok(f64::NEG_INFINITY);
        }
        let key = self.key_of(m);
        if let Some(t) = self.registry.touch(&key) {
            return Ok(t);
        }
        let log_prior = log_model_prior(m, self.pop, self.prior)?;
        let fit = self.estimator.evaluate(m, self.pop, self.data)?;
        let record = ModelRecord {
            key,
            log_marglik: fit.log_marglik,
            log_prior,
            coefficients: self.retain_coefficients.then_some(fit.coefficients),
            visits: 1,
        };
        let t = record.log_target();
        self.registry.insert(record);
        Ok(t)
    }
}

/// Which move an iteration made.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveKind {
    Local,
    Jump,
}

/// Outcome of one iteration.
#[derive(Clone, Copy, Debug)]
pub struct StepInfo {
    pub kind: MoveKind,
    pub accepted: bool,
    /// Log target of the state the chain is in after the step.
    pub log_target: f64,
}

fn clamp_range(lo: usize, hi: usize, dim: usize) -> (usize, usize) {
    let hi = hi.min(dim).max(1);
    let lo = lo.min(hi).max(1);
    (lo, hi)
}

fn flip_uniform_subset<R: Rng>(m: &Model, count: usize, rng: &mut R) -> Model {
    let picks = rand::seq::index::sample(rng, m.dim(), count);
    m.with_flipped_bits(picks.iter())
}

/// Flip every indicator independently with probability `eps`.
fn randomize_bits<R: Rng>(m: &Model, eps: f64, rng: &mut R) -> Model {
    let flips: Vec<usize> = (0..m.dim()).filter(|_| rng.random::<f64>() < eps).collect();
    m.with_flipped_bits(flips)
}

/// Metropolis accept/reject for a symmetric proposal.
fn metropolis_accept<R: Rng>(log_ratio: f64, rng: &mut R) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// One symmetric local move: flip a uniform set of `min_flip..=max_flip`
/// indicators and accept by the target ratio.
pub fn local_step<R: Rng>(
    scorer: &mut ModelScorer,
    state: &Model,
    params: &MjParams,
    rng: &mut R,
) -> Result<(Model, StepInfo)> {
    let (lo, hi) = clamp_range(params.min_flip, params.max_flip, state.dim());
    let count = rng.random_range(lo..=hi);
    let proposal = flip_uniform_subset(state, count, rng);
    let current_t = scorer.log_target(state)?;
    let proposal_t = scorer.log_target(&proposal)?;
    if metropolis_accept(proposal_t - current_t, rng) {
        Ok((
            proposal,
            StepInfo {
                kind: MoveKind::Local,
                accepted: true,
                log_target: proposal_t,
            },
        ))
    } else {
        Ok((
            state.clone(),
            StepInfo {
                kind: MoveKind::Local,
                accepted: false,
                log_target: current_t,
            },
        ))
    }
}

/// Deterministic greedy ascent: repeatedly apply the single-bit flip with
/// the largest target improvement (lowest index on ties) until no flip
/// improves or `max_steps` is exhausted.
pub fn greedy_optimize(scorer: &mut ModelScorer, start: &Model, max_steps: usize) -> Result<Model> {
    let mut current = start.clone();
    let mut current_t = scorer.log_target(&current)?;
    for _ in 0..max_steps {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..current.dim() {
            let candidate = current.with_flipped_bit(i);
            let t = scorer.log_target(&candidate)?;
            // strict comparisons keep the first index on ties
            if t > current_t && best.map_or(true, |(_, bt)| t > bt) {
                best = Some((i, t));
            }
        }
        match best {
            Some((i, t)) => {
                current = current.with_flipped_bit(i);
                current_t = t;
            }
            None => break,
        }
    }
    Ok(current)
}

/// Log acceptance ratio of a mode jump given the two target values and the
/// flip distances to the forward and backward modes.
pub fn mode_jump_log_ratio(
    proposal_log_target: f64,
    current_log_target: f64,
    dist_current_to_backward_mode: usize,
    dist_proposal_to_forward_mode: usize,
    eps: f64,
) -> f64 {
    let log_odds = eps.ln() - (1.0 - eps).ln();
    (proposal_log_target - current_log_target)
        + (dist_current_to_backward_mode as f64 - dist_proposal_to_forward_mode as f64) * log_odds
}

/// One mode-jumping move: large flip, greedy climb, epsilon-randomization,
/// then the mirrored backward pass and the acceptance test.
pub fn mode_jump_step<R: Rng>(
    scorer: &mut ModelScorer,
    state: &Model,
    params: &MjParams,
    rng: &mut R,
) -> Result<(Model, StepInfo)> {
    let (lo, hi) = clamp_range(params.min_jump, params.max_jump, state.dim());
    let eps = params.rand_flip_prob;

    // forward pass
    let jump_size = rng.random_range(lo..=hi);
    let jumped = flip_uniform_subset(state, jump_size, rng);
    let forward_mode = greedy_optimize(scorer, &jumped, params.greedy_max_steps)?;
    let proposal = randomize_bits(&forward_mode, eps, rng);

    let current_t = scorer.log_target(state)?;
    let proposal_t = scorer.log_target(&proposal)?;
    if proposal_t == f64::NEG_INFINITY {
        // inadmissible proposal: rejected outright, no backward pass needed
        return Ok((
            state.clone(),
            StepInfo {
                kind: MoveKind::Jump,
                accepted: false,
                log_target: current_t,
            },
        ));
    }

    // backward pass mirrors the forward one, starting from the proposal
    let back_size = rng.random_range(lo..=hi);
    let back_jumped = flip_uniform_subset(&proposal, back_size, rng);
    let backward_mode = greedy_optimize(scorer, &back_jumped, params.greedy_max_steps)?;

    let log_r = mode_jump_log_ratio(
        proposal_t,
        current_t,
        state.hamming(&backward_mode),
        proposal.hamming(&forward_mode),
        eps,
    );
    if metropolis_accept(log_r, rng) {
        Ok((
            proposal,
            StepInfo {
                kind: MoveKind::Jump,
                accepted: true,
                log_target: proposal_t,
            },
        ))
    } else {
        Ok((
            state.clone(),
            StepInfo {
                kind: MoveKind::Jump,
                accepted: false,
                log_target: current_t,
            },
        ))
    }
}

/// A finished chain: the per-iteration state keys (initial state first) and
/// step diagnostics.
#[derive(Clone, Debug)]
pub struct MjRun {
    pub trace: Vec<ModelKey>,
    pub steps: Vec<StepInfo>,
    pub final_model: Model,
    pub final_log_target: f64,
}

/// Run the sampler against an existing scorer, continuing from `initial`.
/// The scorer's registry keeps whatever it already holds, which is how
/// successive generations of a larger search share one model record store.
pub fn run_mjmcmc_with<R: Rng>(
    scorer: &mut ModelScorer,
    params: &MjParams,
    initial: Model,
    rng: &mut R,
) -> Result<MjRun> {
    params.validate()?;
    if initial.n_trees() != scorer.pop.size() || initial.n_fixed() != scorer.data.n_fixed() {
        return Err(Error::ShapeMismatch {
            what: format!(
                "initial model over {} trees / {} fixed, expected {} / {}",
                initial.n_trees(),
                initial.n_fixed(),
                scorer.pop.size(),
                scorer.data.n_fixed()
            ),
        });
    }
    let mut state = initial;
    let mut state_t = scorer.log_target(&state)?;
    if state_t == f64::NEG_INFINITY {
        return Err(Error::Config {
            what: "initial model is inadmissible under the prior truncation".to_string(),
        });
    }
    let mut trace = Vec::with_capacity(params.n_iter + 1);
    trace.push(scorer.key_of(&state));
    let mut steps = Vec::with_capacity(params.n_iter);
    for _ in 0..params.n_iter {
        let use_jump = rng.random::<f64>() < params.jump_prob;
        let (next, info) = if use_jump {
            mode_jump_step(scorer, &state, params, rng)?
        } else {
            local_step(scorer, &state, params, rng)?
        };
        state = next;
        state_t = info.log_target;
        trace.push(scorer.key_of(&state));
        steps.push(info);
    }
    Ok(MjRun {
        trace,
        steps,
        final_model: state,
        final_log_target: state_t,
    })
}

/// Run a fresh single chain from the empty model with its own registry.
pub fn run_mjmcmc(
    pop: &Population,
    data: &Dataset,
    params: &MjParams,
    prior: &PriorConfig,
    estimator: &dyn MarglikEstimator,
    registry_capacity: usize,
    seed: u64,
) -> Result<(MjRun, VisitedRegistry)> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut registry = VisitedRegistry::new(registry_capacity);
    let initial = Model::empty(pop.size(), data.n_fixed());
    let run = {
        let mut scorer = ModelScorer::new(pop, data, prior, estimator, &mut registry, true);
        run_mjmcmc_with(&mut scorer, params, initial, &mut rng)?
    };
    Ok((run, registry))
}
