//! Benchmark runs: one sampler over a dataset, sampler comparisons, and the
//! proposal-count and NMS-threshold sweeps.
//!
//! Scenarios are processed in parallel. Each scenario's seed is derived from
//! the master seed and the scenario id, and results are collected in dataset
//! order, so reports do not depend on the thread count or on scheduling. All
//! samplers in a comparison share those per-scenario seeds.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{aggregate, score_scenario, MetricReport};
use crate::optimizer::{optimize, OptimizerConfig};
use crate::risk::{LossKind, LossSpec};
use crate::samplers::{
    kmeans_select, nms_kmeans_select, nms_select, sample_categorical, sample_topk, sample_uniform, KMeansConfig,
    KMeansInit, NmsConfig,
};
use crate::seeding::derive_seed_from_label;
use crate::synth::{generate_dataset, EnsembleEmulation, WorldConfig};
use crate::types::{CandidateSet, ProposalMixture, Scenario};

/// Master seed of the shipped benchmark.
pub const DEFAULT_MASTER_SEED: u64 = 2024;
/// Scenarios in the default comparison benchmark. The per-scenario spread of
/// minADE_10 differences between samplers is about 0.6 m, so this many are
/// needed before a 0.5% gap in dataset means rises above the standard error.
pub const DEFAULT_SCENARIOS: usize = 10_000;
/// Scenarios per point of the proposal-count and NMS-threshold sweeps.
pub const DEFAULT_SWEEP_SCENARIOS: usize = 2_000;
/// Candidates drawn per scenario in comparisons.
pub const DEFAULT_COUNT: usize = 10;
/// Candidates drawn per scenario in sweeps, scored as minADE_5 / minFDE_5.
pub const DEFAULT_SWEEP_COUNT: usize = 5;
pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];
pub const DEFAULT_PROPOSAL_COUNTS: [usize; 3] = [30, 60, 90];
pub const DEFAULT_NMS_THRESHOLDS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// The default synthetic benchmark: default world and ensemble,
/// [`DEFAULT_SCENARIOS`] scenarios under [`DEFAULT_MASTER_SEED`].
pub fn default_benchmark() -> Result<Vec<Scenario>> {
    generate_dataset(
        &WorldConfig::default(),
        &EnsembleEmulation::default(),
        DEFAULT_SCENARIOS,
        DEFAULT_MASTER_SEED,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Uniform,
    Categorical,
    Topk,
    Kmeans,
    Nms,
    NmsKmeans,
    Ours,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 7] = [
        SamplerKind::Uniform,
        SamplerKind::Categorical,
        SamplerKind::Topk,
        SamplerKind::Kmeans,
        SamplerKind::Nms,
        SamplerKind::NmsKmeans,
        SamplerKind::Ours,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Uniform => "uniform",
            SamplerKind::Categorical => "categorical",
            SamplerKind::Topk => "topk",
            SamplerKind::Kmeans => "kmeans",
            SamplerKind::Nms => "nms",
            SamplerKind::NmsKmeans => "nms-kmeans",
            SamplerKind::Ours => "ours",
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SamplerKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown sampler `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Parameters shared by all samplers of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub nms: NmsConfig,
    pub kmeans_max_iters: usize,
    pub optimizer: OptimizerConfig,
    /// Loss the optimizer minimizes.
    pub loss: LossKind,
    /// `k` of the optimized loss; the candidate count when unset.
    pub loss_k: Option<usize>,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            nms: NmsConfig::default(),
            kmeans_max_iters: KMeansConfig::default().max_iters,
            optimizer: OptimizerConfig::default(),
            loss: LossKind::MinAde,
            loss_k: None,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self, count: usize) -> Result<()> {
        self.nms.validate()?;
        self.optimizer.validate()?;
        if let Some(k) = self.loss_k {
            if k == 0 || k > count {
                return Err(Error::config("loss_k", format!("must lie in 1..={count}")));
            }
        }
        Ok(())
    }

    pub fn loss_spec(&self, count: usize) -> LossSpec {
        LossSpec {
            kind: self.loss,
            k: self.loss_k.unwrap_or(count),
        }
    }
}

/// Runs one sampler on one mixture. `seed` drives every random choice.
pub fn run_sampler(
    kind: SamplerKind,
    settings: &SamplerSettings,
    mixture: &ProposalMixture,
    count: usize,
    seed: u64,
) -> Result<CandidateSet> {
    let kmeans = KMeansConfig {
        k: count,
        max_iters: settings.kmeans_max_iters,
        init: KMeansInit::PlusPlus,
        seed,
    };
    match kind {
        SamplerKind::Uniform => sample_uniform(mixture, count, seed),
        SamplerKind::Categorical => sample_categorical(mixture, count, seed),
        SamplerKind::Topk => sample_topk(mixture, count),
        SamplerKind::Kmeans => kmeans_select(mixture, &kmeans),
        SamplerKind::Nms => nms_select(mixture, count, &settings.nms),
        SamplerKind::NmsKmeans => nms_kmeans_select(mixture, count, &settings.nms, &kmeans),
        SamplerKind::Ours => {
            let config = OptimizerConfig {
                seed,
                ..settings.optimizer.clone()
            };
            optimize(mixture, count, settings.loss_spec(count), &config).map(|(set, _)| set)
        }
    }
}

/// Execution options of a harness run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub master_seed: u64,
    /// Worker threads; `None` uses the global pool, `Some(1)` runs serially.
    pub threads: Option<usize>,
}

impl EvalOptions {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            threads: None,
        }
    }

    fn install<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            None => Ok(job()),
            Some(0) => Err(Error::config("threads", "must be at least 1")),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::config("threads", e.to_string()))?;
                Ok(pool.install(job))
            }
        }
    }
}

/// Seed of one scenario, shared by every sampler.
pub fn scenario_seed(master_seed: u64, scenario: &Scenario) -> u64 {
    derive_seed_from_label(master_seed, &scenario.scenario_id)
}

fn check_run(dataset: &[Scenario], count: usize, ks: &[usize]) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::config("dataset", "contains no scenarios"));
    }
    if count == 0 {
        return Err(Error::EmptyCandidateSet);
    }
    if ks.is_empty() {
        return Err(Error::config("ks", "must list at least one k"));
    }
    for (i, &k) in ks.iter().enumerate() {
        if k == 0 || k > count {
            return Err(Error::config(format!("ks[{i}]"), format!("must lie in 1..={count}")));
        }
    }
    if let Some(s) = dataset.iter().find(|s| s.ground_truth.is_none()) {
        return Err(Error::MissingGroundTruth {
            scenario_id: s.scenario_id.clone(),
        });
    }
    Ok(())
}

/// Runs `kind` with `count` outputs on every scenario and scores the k-prefixes.
pub fn evaluate_sampler(
    dataset: &[Scenario],
    kind: SamplerKind,
    settings: &SamplerSettings,
    count: usize,
    ks: &[usize],
    options: &EvalOptions,
) -> Result<MetricReport> {
    check_run(dataset, count, ks)?;
    settings.validate(count)?;
    let scores = options.install(|| {
        dataset
            .par_iter()
            .map(|scenario| {
                let seed = scenario_seed(options.master_seed, scenario);
                let set = run_sampler(kind, settings, &scenario.mixture, count, seed)?;
                score_scenario(scenario, &set, ks)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    aggregate(scores, ks)
}

/// Candidate sets of one sampler for every scenario, in dataset order.
pub fn sample_dataset(
    dataset: &[Scenario],
    kind: SamplerKind,
    settings: &SamplerSettings,
    count: usize,
    options: &EvalOptions,
) -> Result<Vec<CandidateSet>> {
    settings.validate(count)?;
    options.install(|| {
        dataset
            .par_iter()
            .map(|scenario| {
                let seed = scenario_seed(options.master_seed, scenario);
                run_sampler(kind, settings, &scenario.mixture, count, seed)
            })
            .collect::<Result<Vec<_>>>()
    })?
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub sampler: SamplerKind,
    pub report: MetricReport,
    pub wall_clock: Duration,
}

/// One row per sampler, minADE_k and minFDE_k for each k.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub ks: Vec<usize>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, sampler: SamplerKind) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.sampler == sampler)
    }

    /// `sampler,minADE_<k>...,minFDE_<k>...`, values with 6 decimals.
    ///
    /// Contains no timing, so identical runs give identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sampler");
        for k in &self.ks {
            let _ = write!(out, ",minADE_{k}");
        }
        for k in &self.ks {
            let _ = write!(out, ",minFDE_{k}");
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(row.sampler.name());
            for v in row.report.mean_min_ade.iter().chain(&row.report.mean_min_fde) {
                let _ = write!(out, ",{v:.6}");
            }
            out.push('\n');
        }
        out
    }

    /// `sampler,wall_clock_s`.
    pub fn timing_csv(&self) -> String {
        let mut out = String::from("sampler,wall_clock_s\n");
        for row in &self.rows {
            let _ = writeln!(out, "{},{:.6}", row.sampler.name(), row.wall_clock.as_secs_f64());
        }
        out
    }
}

/// Evaluates every sampler on the same scenarios with the same seeds.
pub fn compare_samplers(
    dataset: &[Scenario],
    samplers: &[SamplerKind],
    settings: &SamplerSettings,
    count: usize,
    ks: &[usize],
    options: &EvalOptions,
) -> Result<ComparisonTable> {
    if samplers.is_empty() {
        return Err(Error::config("samplers", "must list at least one sampler"));
    }
    let rows = samplers
        .iter()
        .map(|&sampler| {
            let start = Instant::now();
            let report = evaluate_sampler(dataset, sampler, settings, count, ks, options)?;
            Ok(ComparisonRow {
                sampler,
                report,
                wall_clock: start.elapsed(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTable { ks: ks.to_vec(), rows })
}

/// One metric of one sampler along the sweep axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub sampler: String,
    pub metric: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: String,
    pub xs: Vec<f64>,
    pub curves: Vec<SweepCurve>,
}

impl SweepResult {
    pub fn curve(&self, sampler: &str, metric: &str) -> Option<&SweepCurve> {
        self.curves.iter().find(|c| c.sampler == sampler && c.metric == metric)
    }

    /// Long format: `x,sampler,metric,value`, one line per point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,sampler,metric,value\n");
        for curve in &self.curves {
            for (x, v) in self.xs.iter().zip(&curve.values) {
                let _ = writeln!(out, "{x},{},{},{v:.6}", curve.sampler, curve.metric);
            }
        }
        out
    }
}

fn push_report_curves(curves: &mut Vec<SweepCurve>, sampler: &str, reports: &[MetricReport], ks: &[usize]) {
    for (i, k) in ks.iter().enumerate() {
        for (name, pick) in [
            ("minADE", (|r: &MetricReport, i: usize| r.mean_min_ade[i]) as fn(&MetricReport, usize) -> f64),
            ("minFDE", |r: &MetricReport, i: usize| r.mean_min_fde[i]),
        ] {
            let values: Vec<f64> = reports.iter().map(|r| pick(r, i)).collect();
            let base = values[0];
            curves.push(SweepCurve {
                sampler: sampler.to_string(),
                metric: format!("{name}_{k}"),
                values: values.clone(),
            });
            curves.push(SweepCurve {
                sampler: sampler.to_string(),
                metric: format!("{name}_{k}_delta"),
                values: values.iter().map(|v| v - base).collect(),
            });
        }
    }
}

/// Re-generates the dataset with `count / M` proposals per emulated model for
/// each total proposal count, and evaluates each sampler.
///
/// Because every model draws its proposals from its own seeded stream, a larger
/// count extends the proposal list of the smaller one instead of replacing it.
/// Curves come as absolute means and as deltas against the first count.
#[allow(clippy::too_many_arguments)]
pub fn proposal_count_sweep(
    world: &WorldConfig,
    ensemble: &EnsembleEmulation,
    scenarios: usize,
    counts: &[usize],
    samplers: &[SamplerKind],
    settings: &SamplerSettings,
    count: usize,
    ks: &[usize],
    options: &EvalOptions,
) -> Result<SweepResult> {
    if counts.is_empty() {
        return Err(Error::config("counts", "must list at least one proposal count"));
    }
    let models = ensemble.models.len();
    for (i, &c) in counts.iter().enumerate() {
        if models == 0 || c == 0 || c % models != 0 {
            return Err(Error::config(format!("counts[{i}]"), format!("must be a positive multiple of {models}")));
        }
    }
    let mut per_sampler: Vec<Vec<MetricReport>> = vec![Vec::new(); samplers.len()];
    for &c in counts {
        let variant = EnsembleEmulation {
            proposals_per_model: c / models,
            ..ensemble.clone()
        };
        let dataset = generate_dataset(world, &variant, scenarios, options.master_seed)?;
        let table = compare_samplers(&dataset, samplers, settings, count, ks, options)?;
        for (slot, row) in per_sampler.iter_mut().zip(table.rows) {
            slot.push(row.report);
        }
    }
    let mut curves = Vec::new();
    for (sampler, reports) in samplers.iter().zip(&per_sampler) {
        push_report_curves(&mut curves, sampler.name(), reports, ks);
    }
    Ok(SweepResult {
        axis: "proposals".into(),
        xs: counts.iter().map(|&c| c as f64).collect(),
        curves,
    })
}

/// NMS+KMeans evaluated at each NMS threshold.
pub fn nms_threshold_sweep(
    dataset: &[Scenario],
    thresholds: &[f64],
    settings: &SamplerSettings,
    count: usize,
    ks: &[usize],
    options: &EvalOptions,
) -> Result<SweepResult> {
    if thresholds.is_empty() {
        return Err(Error::config("thresholds", "must list at least one threshold"));
    }
    let reports = thresholds
        .iter()
        .enumerate()
        .map(|(i, &threshold)| {
            if !(threshold > 0.0 && threshold.is_finite()) {
                return Err(Error::config(format!("thresholds[{i}]"), "must be positive and finite"));
            }
            let settings = SamplerSettings {
                nms: NmsConfig { threshold },
                ..settings.clone()
            };
            evaluate_sampler(dataset, SamplerKind::NmsKmeans, &settings, count, ks, options)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut curves = Vec::new();
    push_report_curves(&mut curves, SamplerKind::NmsKmeans.name(), &reports, ks);
    Ok(SweepResult {
        axis: "nms_threshold".into(),
        xs: thresholds.to_vec(),
        curves,
    })
}
