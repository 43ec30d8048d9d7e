//! Scenario files and sampler output files.
//!
//! Both are JSON lines: one record per line, blank lines ignored. Numbers are
//! written in the shortest form that parses back to the same `f64`, so a
//! written file re-reads bit-exactly.
//!
//! A scenario record:
//!
//! ```text
//! {"scenario_id":"scn-00000","horizon":12,"ground_truth":[[x,y],...],
//!  "models":[{"model_id":"sharp","proposals":[{"weight":0.4,"points":[[x,y],...]}]}]}
//! ```
//!
//! `ground_truth` may be omitted or `null`. Weights are normalized per model
//! on load; [`ProposalMixture::weights_renormalized`] reports whether any model
//! needed it.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;
use crate::types::{build_mixture, CandidateSet, ModelPrediction, Point, Scenario, Trajectory, WeightedProposal};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("line {line}: malformed record: {cause}")]
    Malformed { line: usize, cause: String },

    #[error("line {line}: inconsistent horizon: expected {expected} points, found {found}")]
    InconsistentHorizon { line: usize, expected: usize, found: usize },

    #[error("line {line}: scenario has no models")]
    EmptyEnsemble { line: usize },
}

impl IoError {
    fn io(path: &Path, err: impl fmt::Display) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }

    /// 1-based line of the offending record, for data errors.
    pub fn line(&self) -> Option<usize> {
        match self {
            IoError::Io { .. } => None,
            IoError::Malformed { line, .. }
            | IoError::InconsistentHorizon { line, .. }
            | IoError::EmptyEnsemble { line } => Some(*line),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProposalRecord {
    weight: f64,
    points: Vec<Point>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    model_id: String,
    proposals: Vec<ProposalRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioRecord {
    scenario_id: String,
    horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<Vec<Point>>,
    models: Vec<ModelRecord>,
}

fn trajectory_at(line: usize, horizon: usize, points: Vec<Point>) -> Result<Trajectory, IoError> {
    if points.len() != horizon {
        return Err(IoError::InconsistentHorizon {
            line,
            expected: horizon,
            found: points.len(),
        });
    }
    Trajectory::new(points).map_err(|e| malformed(line, e))
}

fn malformed(line: usize, cause: impl fmt::Display) -> IoError {
    IoError::Malformed {
        line,
        cause: cause.to_string(),
    }
}

fn scenario_from_record(line: usize, record: ScenarioRecord) -> Result<Scenario, IoError> {
    if record.horizon == 0 {
        return Err(malformed(line, "horizon must be at least 1"));
    }
    if record.models.is_empty() {
        return Err(IoError::EmptyEnsemble { line });
    }
    let mut models = Vec::with_capacity(record.models.len());
    for model in record.models {
        let proposals = model
            .proposals
            .into_iter()
            .map(|p| {
                let trajectory = trajectory_at(line, record.horizon, p.points)?;
                WeightedProposal::new(p.weight, trajectory).map_err(|e| malformed(line, e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        models.push(ModelPrediction::new(model.model_id, proposals).map_err(|e| malformed(line, e))?);
    }
    let mixture = build_mixture(models).map_err(|e| match e {
        Error::EmptyEnsemble => IoError::EmptyEnsemble { line },
        other => malformed(line, other),
    })?;
    let ground_truth = record
        .ground_truth
        .map(|points| trajectory_at(line, record.horizon, points))
        .transpose()?;
    Scenario::new(record.scenario_id, mixture, ground_truth).map_err(|e| malformed(line, e))
}

/// Parses scenario records from `reader`. `path` is only used in messages.
pub fn read_scenarios(reader: impl Read, path: &Path) -> Result<Vec<Scenario>, IoError> {
    let mut out = Vec::new();
    for (index, line) in BufReader::new(reader).lines().enumerate() {
        let number = index + 1;
        let line = line.map_err(|e| IoError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ScenarioRecord = serde_json::from_str(&line).map_err(|e| malformed(number, e))?;
        out.push(scenario_from_record(number, record)?);
    }
    Ok(out)
}

pub fn parse_scenario_file(path: &Path) -> Result<Vec<Scenario>, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    read_scenarios(file, path)
}

fn scenario_to_record(scenario: &Scenario) -> ScenarioRecord {
    ScenarioRecord {
        scenario_id: scenario.scenario_id.clone(),
        horizon: scenario.horizon(),
        ground_truth: scenario.ground_truth.as_ref().map(|t| t.points().to_vec()),
        models: scenario
            .mixture
            .models()
            .iter()
            .map(|m| ModelRecord {
                model_id: m.model_id().to_string(),
                proposals: m
                    .proposals()
                    .iter()
                    .map(|p| ProposalRecord {
                        weight: p.weight(),
                        points: p.trajectory().points().to_vec(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// One JSON line per scenario. Model weights are written as normalized.
pub fn write_scenarios(mut writer: impl Write, scenarios: &[Scenario]) -> std::io::Result<()> {
    for scenario in scenarios {
        serde_json::to_writer(&mut writer, &scenario_to_record(scenario))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Sampler output for one scenario: candidates in rank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub scenario_id: String,
    pub sampler: String,
    pub candidates: Vec<Vec<Point>>,
}

impl CandidateRecord {
    pub fn new(scenario_id: &str, sampler: &str, set: &CandidateSet) -> Self {
        Self {
            scenario_id: scenario_id.to_string(),
            sampler: sampler.to_string(),
            candidates: set.trajectories().iter().map(|t| t.points().to_vec()).collect(),
        }
    }
}

pub fn write_candidates(mut writer: impl Write, records: &[CandidateRecord]) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn read_candidates(reader: impl Read) -> Result<Vec<CandidateRecord>, IoError> {
    let mut out = Vec::new();
    for (index, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| malformed(index + 1, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| malformed(index + 1, e))?);
    }
    Ok(out)
}

/// Writes `contents` to `path`, or to stdout when `path` is `None` or `-`.
pub fn write_output(path: Option<&Path>, contents: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), IoError> {
    match path {
        Some(p) if p != Path::new("-") => {
            let file = File::create(p).map_err(|e| IoError::io(p, e))?;
            let mut writer = BufWriter::new(file);
            contents(&mut writer).map_err(|e| IoError::io(p, e))
        }
        _ => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            contents(&mut lock).map_err(|e| IoError::io(Path::new("<stdout>"), e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<Scenario>, IoError> {
        read_scenarios(text.as_bytes(), Path::new("test.jsonl"))
    }

    const GOOD: &str = r#"{"scenario_id":"a","horizon":2,"ground_truth":[[0,0],[1,0]],"models":[{"model_id":"m","proposals":[{"weight":2,"points":[[0,0],[1,1]]},{"weight":2,"points":[[0,1],[1,2]]}]}]}"#;

    #[test]
    fn parses_and_normalizes() {
        let ds = parse(GOOD).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].mixture.effective_weights(), &[0.5, 0.5]);
        assert!(ds[0].mixture.weights_renormalized());
        assert_eq!(ds[0].ground_truth.as_ref().unwrap().points(), &[[0.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn empty_and_blank_input_is_an_empty_dataset() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn short_trajectory_reports_its_line() {
        let bad = GOOD.replace(r#""points":[[0,1],[1,2]]"#, r#""points":[[0,1]]"#);
        let err = parse(&format!("{GOOD}\n\n{bad}\n")).unwrap_err();
        assert!(matches!(
            err,
            IoError::InconsistentHorizon {
                line: 3,
                expected: 2,
                found: 1
            }
        ));
    }

    #[test]
    fn no_models_is_an_empty_ensemble() {
        let err = parse(r#"{"scenario_id":"a","horizon":1,"models":[]}"#).unwrap_err();
        assert!(matches!(err, IoError::EmptyEnsemble { line: 1 }));
    }

    #[test]
    fn unknown_fields_and_bad_values_are_malformed() {
        let extra = GOOD.replacen(r#""horizon":2"#, r#""horizon":2,"extra":1"#, 1);
        assert!(matches!(parse(&extra).unwrap_err(), IoError::Malformed { line: 1, .. }));
        let negative = GOOD.replacen(r#""weight":2"#, r#""weight":-1"#, 1);
        let err = parse(&negative).unwrap_err();
        assert!(err.to_string().contains("line 1") && err.to_string().contains("weight"));
        let zero = GOOD.replace(r#""weight":2"#, r#""weight":0"#);
        assert!(matches!(parse(&zero).unwrap_err(), IoError::Malformed { line: 1, .. }));
        assert!(matches!(parse("{not json").unwrap_err(), IoError::Malformed { line: 1, .. }));
    }

    #[test]
    fn round_trip_is_exact() {
        let mut ds = parse(GOOD).unwrap();
        ds.push(
            Scenario::new(
                "b",
                crate::types::ProposalMixture::from_weighted(vec![(
                    1.0,
                    Trajectory::new(vec![[0.1 + 0.2, -1e-300], [std::f64::consts::PI, 1.0 / 3.0]]).unwrap(),
                )])
                .unwrap(),
                None,
            )
            .unwrap(),
        );
        let mut buf = Vec::new();
        write_scenarios(&mut buf, &ds).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, ds);
        let mut again = Vec::new();
        write_scenarios(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn candidate_records_round_trip() {
        let set = CandidateSet::new(vec![Trajectory::new(vec![[1.5, 2.0]]).unwrap()]).unwrap();
        let records = vec![CandidateRecord::new("a", "ours", &set)];
        let mut buf = Vec::new();
        write_candidates(&mut buf, &records).unwrap();
        assert_eq!(read_candidates(buf.as_slice()).unwrap(), records);
    }
}
