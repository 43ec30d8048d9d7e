//! Command-line front end: generate synthetic scenarios, run samplers, compare
//! them, sweep proposal counts and NMS thresholds, and run the oracle suite.
//!
//! Settings come from a TOML file (`--config`, or the file named by
//! `TRAJSAMPLE_CONFIG`) and are overridden by flags. Exit codes: 0 on success,
//! 1 for usage and configuration errors, 2 for data, I/O and verification
//! failures. Every failure prints one JSON object on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::{DeserializeOwned, IntoDeserializer};
use serde_json::json;

use trajsample::config::{ConfigError, RunConfig};
use trajsample::harness::{
    compare_samplers, nms_threshold_sweep, proposal_count_sweep, sample_dataset, EvalOptions, SamplerKind,
};
use trajsample::io::{parse_scenario_file, read_scenarios, write_candidates, write_output, write_scenarios, CandidateRecord, IoError};
use trajsample::oracles::run_oracle_suite;
use trajsample::synth::generate_dataset;
use trajsample::{Error, InitStrategy, LossKind, Scenario};

/// Small scenarios checked by `verify` when no input is given.
const BUNDLED_FIXTURE: &str = include_str!("../../fixtures/small.jsonl");

#[derive(Debug, Parser)]
#[command(name = "trajsample", version, about = "Risk-minimizing trajectory sub-sampling")]
struct Cli {
    /// TOML run configuration; defaults to $TRAJSAMPLE_CONFIG when set.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic scenario file.
    Generate,
    /// Run one sampler and write its candidate sets as JSON lines.
    Sample {
        #[arg(long, default_value = "ours")]
        sampler: String,
    },
    /// Score every configured sampler and write a CSV table.
    Compare,
    /// Re-generate the benchmark at several proposal counts and score each.
    SweepProposals,
    /// Score NMS+KMeans at several NMS thresholds.
    SweepNms,
    /// Check the optimizer and subgradient against the reference oracles.
    Verify,
}

/// Flags overriding the configuration file, one per setting.
#[derive(Debug, Args)]
struct Overrides {
    /// Candidates per scenario.
    #[arg(long, global = true)]
    count: Option<usize>,
    /// k values scored, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// Samplers compared, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    samplers: Option<Vec<String>>,
    #[arg(long = "seed", global = true)]
    master_seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Scenarios generated when no input file is given.
    #[arg(long, global = true)]
    scenarios: Option<usize>,
    #[arg(long, global = true, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Output file; `-` writes to stdout.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_name = "PATH")]
    timing_output: Option<PathBuf>,

    /// `min-ade` or `min-fde`.
    #[arg(long, global = true, value_parser = kebab::<LossKind>)]
    loss: Option<LossKind>,
    #[arg(long, global = true)]
    loss_k: Option<usize>,
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    beta1: Option<f64>,
    #[arg(long, global = true)]
    beta2: Option<f64>,
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// `risk-seeding`, `categorical-draw`, `uniform-draw` or `gaussian-noise`.
    #[arg(long, global = true, value_parser = kebab::<InitStrategy>)]
    init: Option<InitStrategy>,
    #[arg(long, global = true)]
    jitter_sigma: Option<f64>,
    #[arg(long, global = true)]
    keep_best_iterate: Option<bool>,
    #[arg(long, global = true)]
    snap: Option<bool>,
    #[arg(long, global = true)]
    relocate_every: Option<usize>,
    #[arg(long, global = true)]
    nms_threshold: Option<f64>,
    #[arg(long, global = true)]
    kmeans_max_iters: Option<usize>,

    #[arg(long, global = true)]
    horizon: Option<usize>,
    #[arg(long, global = true)]
    timestep: Option<f64>,
    #[arg(long, global = true)]
    gt_noise_sigma: Option<f64>,
    #[arg(long, global = true)]
    proposals_per_model: Option<usize>,

    #[arg(long, global = true)]
    sweep_scenarios: Option<usize>,
    #[arg(long, global = true)]
    sweep_count: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    sweep_samplers: Option<Vec<String>>,
    #[arg(long, global = true, value_delimiter = ',')]
    proposal_counts: Option<Vec<usize>>,
    #[arg(long, global = true, value_delimiter = ',')]
    nms_thresholds: Option<Vec<f64>>,
}

/// Parses a kebab-case enum name the same way the config file does.
fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    T::deserialize(s.into_deserializer()).map_err(|e: serde::de::value::Error| e.to_string())
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Overrides {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.count, self.count);
        set(&mut cfg.ks, self.ks);
        set(&mut cfg.samplers, self.samplers);
        set(&mut cfg.master_seed, self.master_seed);
        set(&mut cfg.scenarios, self.scenarios);
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if self.input.is_some() {
            cfg.input = self.input;
        }
        if self.output.is_some() {
            cfg.output = self.output;
        }
        if self.timing_output.is_some() {
            cfg.timing_output = self.timing_output;
        }

        let sampling = &mut cfg.sampling;
        set(&mut sampling.loss, self.loss);
        if self.loss_k.is_some() {
            sampling.loss_k = self.loss_k;
        }
        let opt = &mut sampling.optimizer;
        set(&mut opt.learning_rate, self.learning_rate);
        set(&mut opt.steps, self.steps);
        set(&mut opt.beta1, self.beta1);
        set(&mut opt.beta2, self.beta2);
        set(&mut opt.epsilon, self.epsilon);
        set(&mut opt.init, self.init);
        set(&mut opt.jitter_sigma, self.jitter_sigma);
        set(&mut opt.keep_best_iterate, self.keep_best_iterate);
        set(&mut opt.snap_to_proposals, self.snap);
        set(&mut opt.relocate_every, self.relocate_every);
        set(&mut sampling.nms.threshold, self.nms_threshold);
        set(&mut sampling.kmeans_max_iters, self.kmeans_max_iters);

        set(&mut cfg.world.horizon, self.horizon);
        set(&mut cfg.world.timestep, self.timestep);
        set(&mut cfg.world.gt_noise_sigma, self.gt_noise_sigma);
        set(&mut cfg.ensemble.proposals_per_model, self.proposals_per_model);

        set(&mut cfg.sweep.scenarios, self.sweep_scenarios);
        set(&mut cfg.sweep.count, self.sweep_count);
        set(&mut cfg.sweep.samplers, self.sweep_samplers);
        set(&mut cfg.sweep.proposal_counts, self.proposal_counts);
        set(&mut cfg.sweep.nms_thresholds, self.nms_thresholds);
    }
}

/// A failure and the exit code it maps to.
struct Failure {
    kind: &'static str,
    message: String,
    field: Option<String>,
    line: Option<usize>,
    code: u8,
}

impl Failure {
    fn new(kind: &'static str, code: u8, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            field: None,
            line: None,
            code,
        }
    }

    fn report(&self) -> ExitCode {
        let mut line = json!({ "error": self.kind, "message": self.message });
        if let Some(field) = &self.field {
            line["field"] = json!(field);
        }
        if let Some(n) = self.line {
            line["line"] = json!(n);
        }
        eprintln!("{line}");
        ExitCode::from(self.code)
    }
}

impl From<ConfigError> for Failure {
    fn from(err: ConfigError) -> Self {
        let field = err.field().map(str::to_string);
        Self {
            field,
            ..Failure::new("config", 1, err.to_string())
        }
    }
}

impl From<IoError> for Failure {
    fn from(err: IoError) -> Self {
        let kind = if err.line().is_some() { "data" } else { "io" };
        Self {
            line: err.line(),
            ..Failure::new(kind, 2, err.to_string())
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::InvalidConfig { ref field, .. } => Self {
                field: Some(field.clone()),
                ..Failure::new("config", 1, err.to_string())
            },
            other => Failure::new("data", 2, other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if !err.use_stderr() => {
            // --help and --version
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let rendered = err.to_string();
            let message = rendered.lines().next().unwrap_or_default().trim_start_matches("error: ");
            return Failure::new("usage", 1, message).report();
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => failure.report(),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = RunConfig::resolve(cli.config.as_deref())?;
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    let options = EvalOptions {
        master_seed: cfg.master_seed,
        threads: cfg.threads,
    };
    let output = cfg.output.as_deref();
    match cli.command {
        Command::Generate => {
            let dataset = generate_dataset(&cfg.world, &cfg.ensemble, cfg.scenarios, cfg.master_seed)?;
            write_output(output, |w| write_scenarios(w, &dataset))?;
        }
        Command::Sample { sampler } => {
            let kind: SamplerKind = sampler.parse().map_err(|e: String| ConfigError::invalid("sampler", e))?;
            let dataset = load_dataset(&cfg, cfg.scenarios)?;
            let sets = sample_dataset(&dataset, kind, &cfg.sampling, cfg.count, &options)?;
            let records: Vec<_> = dataset
                .iter()
                .zip(&sets)
                .map(|(s, set)| CandidateRecord::new(&s.scenario_id, kind.name(), set))
                .collect();
            write_output(output, |w| write_candidates(w, &records))?;
        }
        Command::Compare => {
            let dataset = load_dataset(&cfg, cfg.scenarios)?;
            let samplers = cfg.sampler_kinds()?;
            let table = compare_samplers(&dataset, &samplers, &cfg.sampling, cfg.count, &cfg.ks, &options)?;
            write_output(output, |w| w.write_all(table.to_csv().as_bytes()))?;
            if let Some(path) = cfg.timing_output.as_deref() {
                write_output(Some(path), |w| w.write_all(table.timing_csv().as_bytes()))?;
            }
        }
        Command::SweepProposals => {
            let samplers = cfg.sweep_sampler_kinds()?;
            let result = proposal_count_sweep(
                &cfg.world,
                &cfg.ensemble,
                cfg.sweep.scenarios,
                &cfg.sweep.proposal_counts,
                &samplers,
                &cfg.sampling,
                cfg.sweep.count,
                &[cfg.sweep.count],
                &options,
            )?;
            write_output(output, |w| w.write_all(result.to_csv().as_bytes()))?;
        }
        Command::SweepNms => {
            let dataset = load_dataset(&cfg, cfg.sweep.scenarios)?;
            let result = nms_threshold_sweep(
                &dataset,
                &cfg.sweep.nms_thresholds,
                &cfg.sampling,
                cfg.sweep.count,
                &[cfg.sweep.count],
                &options,
            )?;
            write_output(output, |w| w.write_all(result.to_csv().as_bytes()))?;
        }
        Command::Verify => {
            let dataset = match cfg.input.as_deref() {
                Some(path) => read_input(path)?,
                None => read_scenarios(BUNDLED_FIXTURE.as_bytes(), Path::new("<bundled fixture>"))?,
            };
            let report = run_oracle_suite(&dataset, cfg.master_seed, &cfg.sampling.optimizer)?;
            write_output(output, |w| w.write_all(report.to_text().as_bytes()))?;
            if !report.all_passed() {
                let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed_all()).map(|c| c.name).collect();
                return Err(Failure::new(
                    "verification",
                    2,
                    format!("oracle checks failed: {}", failed.join(", ")),
                ));
            }
        }
    }
    Ok(())
}

fn read_input(path: &Path) -> Result<Vec<Scenario>, Failure> {
    let dataset = parse_scenario_file(path)?;
    let renormalized: Vec<_> = dataset
        .iter()
        .filter(|s| s.mixture.weights_renormalized())
        .map(|s| s.scenario_id.as_str())
        .collect();
    if let Some(first) = renormalized.first() {
        eprintln!(
            "warning: proposal weights of {} scenario(s) did not sum to 1 per model and were renormalized (first: {first})",
            renormalized.len()
        );
    }
    Ok(dataset)
}

/// The input file when configured, else `scenarios` generated scenarios.
fn load_dataset(cfg: &RunConfig, scenarios: usize) -> Result<Vec<Scenario>, Failure> {
    match cfg.input.as_deref() {
        Some(path) => read_input(path),
        None => Ok(generate_dataset(&cfg.world, &cfg.ensemble, scenarios, cfg.master_seed)?),
    }
}
