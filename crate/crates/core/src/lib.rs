//! Bayesian regression on Boolean expressions of binary covariates.
//!
//! Models are linear regressions whose regressors are logic trees —
//! and/or/not combinations of binary input columns — plus optional fixed
//! covariates. The posterior over this combinatorial model space is explored
//! with a mode-jumping sampler embedded in a genetic population loop
//! ([`gmjmcmc`]), and posterior quantities are estimated by renormalizing
//! marginal likelihoods over every model visited ([`registry`]).
//!
//! [`sim`] generates the synthetic benchmark data (correlated binaries and
//! genetic backcross markers), [`metrics`] scores discovery performance
//! against a known ground truth, and [`predict`] turns fitted registries
//! into point predictions.

pub mod dataset;
pub mod error;
pub mod expr;
pub mod gmjmcmc;
pub mod marglik;
pub mod metrics;
pub mod mjmcmc;
pub mod model;
pub mod population;
pub mod predict;
pub mod registry;
pub mod sim;
pub mod stats;

pub use dataset::{BinaryMatrix, Dataset, FixedCovariate, GroundTruth};
pub use error::{Error, Result};
pub use expr::{BoolOp, LogicTree};
pub use gmjmcmc::{
    aggregate_chains, chain_seed, report_expressions, run_chains, run_gmjmcmc, AggregateReport,
    AggregationMode, ChainResult, GmjConfig,
};
pub use marglik::{JeffreysBic, MarglikEstimator, ModelFit};
pub use metrics::{
    match_discoveries, replicate_study, CovariateGenerator, MatchMode, ReplicateOutcome, ScoreCard,
    ScoreSummary, StudyConfig, StudySummary,
};
pub use mjmcmc::{run_mjmcmc, MjParams, MjRun, ModelScorer};
pub use model::{ComplexityMeasure, Model, PriorConfig};
pub use population::Population;
pub use predict::{
    predict_bma, predict_single, ridge_baseline, score_predictions, PredictionMethod,
    PredictionResult, PredictionScores, RidgeOutcome, SelectionRule,
};
pub use registry::{marginal_inclusions, ModelKey, ModelRecord, VisitedRegistry};
pub use sim::{
    random_correlation_matrix, read_positions_file, sample_correlated_binary, scenario_response,
    simulate_backcross, write_positions_file, CorrelationMatrix, GeneticMap, MarkerPosition,
    Scenario,
};
