//! Risk-minimizing trajectory sub-sampling for ensembles of motion predictors.
//!
//! The proposals of `M` predictors are pooled into one categorical mixture.
//! [`optimize`] then searches, by subgradient descent with Adam, for the `S`
//! trajectories that minimize the expected minADE_k (or minFDE_k) under that
//! mixture. The baseline samplers (uniform, categorical, Topk, KMeans,
//! NMS+KMeans), a synthetic ensemble generator, an evaluation harness and a set
//! of verification oracles are included for benchmarking. [`io`] and
//! [`config`] hold the file formats and run configuration used by the
//! `trajsample` binary.

pub mod adam;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod optimizer;
pub mod oracles;
pub mod risk;
pub mod samplers;
pub mod seeding;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use metrics::{ade, aggregate, fde, min_ade_k, min_fde_k, score_scenario, MetricReport, ScenarioScore};
pub use optimizer::{
    optimize, optimize_from, random_init, EarlyStop, InitStrategy, OptimizationTrace, OptimizerConfig,
};
pub use risk::{risk, risk_subgradient, LossKind, LossSpec};
pub use samplers::{
    kmeans_select, nms_kmeans_select, nms_select, sample_categorical, sample_topk, sample_uniform, KMeansConfig,
    KMeansInit, NmsConfig,
};
pub use types::{
    build_mixture, normalize_model_weights, CandidateSet, ModelPrediction, Point, ProposalMixture, Scenario,
    Trajectory, WeightedProposal,
};
