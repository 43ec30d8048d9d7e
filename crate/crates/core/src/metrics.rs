//! Displacement-error metrics.
//!
//! `min_ade_k` / `min_fde_k` score the first `k` entries of a rank-ordered
//! candidate set, so a single set of `S` outputs can be scored at every `k <= S`.

use crate::error::{Error, Result};
use crate::types::{CandidateSet, Point, Scenario, Trajectory};

#[inline]
pub(crate) fn dist(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Mean per-timestep distance between two interleaved coordinate slices of equal length.
#[inline]
pub(crate) fn ade_flat(a: &[f64], b: &[f64]) -> f64 {
    let horizon = a.len() / 2;
    let mut sum = 0.0;
    for (pa, pb) in a.chunks_exact(2).zip(b.chunks_exact(2)) {
        let dx = pa[0] - pb[0];
        let dy = pa[1] - pb[1];
        sum += (dx * dx + dy * dy).sqrt();
    }
    sum / horizon as f64
}

#[inline]
pub(crate) fn fde_flat(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let dx = a[n - 2] - b[n - 2];
    let dy = a[n - 1] - b[n - 1];
    (dx * dx + dy * dy).sqrt()
}

fn check_horizons(reference: &Trajectory, candidate: &Trajectory) -> Result<()> {
    if reference.horizon() != candidate.horizon() {
        return Err(Error::HorizonMismatch {
            left: reference.horizon(),
            right: candidate.horizon(),
        });
    }
    Ok(())
}

/// Average displacement error: `(1/T) Σ_t ‖reference_t − candidate_t‖₂`.
pub fn ade(reference: &Trajectory, candidate: &Trajectory) -> Result<f64> {
    check_horizons(reference, candidate)?;
    let sum: f64 = reference
        .points()
        .iter()
        .zip(candidate.points())
        .map(|(&a, &b)| dist(a, b))
        .sum();
    Ok(sum / reference.horizon() as f64)
}

/// Final displacement error: distance between the last points.
pub fn fde(reference: &Trajectory, candidate: &Trajectory) -> Result<f64> {
    check_horizons(reference, candidate)?;
    Ok(dist(reference.final_point(), candidate.final_point()))
}

fn min_over_prefix(
    reference: &Trajectory,
    candidates: &CandidateSet,
    k: usize,
    metric: fn(&Trajectory, &Trajectory) -> Result<f64>,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroK);
    }
    if k > candidates.len() {
        return Err(Error::KExceedsSetSize {
            k,
            size: candidates.len(),
        });
    }
    let mut best = f64::INFINITY;
    for c in &candidates.trajectories()[..k] {
        best = best.min(metric(reference, c)?);
    }
    Ok(best)
}

/// Minimum ADE between `reference` and the first `k` candidates.
pub fn min_ade_k(reference: &Trajectory, candidates: &CandidateSet, k: usize) -> Result<f64> {
    min_over_prefix(reference, candidates, k, ade)
}

/// Minimum FDE between `reference` and the first `k` candidates.
pub fn min_fde_k(reference: &Trajectory, candidates: &CandidateSet, k: usize) -> Result<f64> {
    min_over_prefix(reference, candidates, k, fde)
}

/// minADE_k / minFDE_k of one scenario's candidate set for each requested k.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioScore {
    pub scenario_id: String,
    pub min_ade: Vec<f64>,
    pub min_fde: Vec<f64>,
}

/// Scores `candidates` against the scenario's ground truth at each `k` in `ks`.
pub fn score_scenario(
    scenario: &Scenario,
    candidates: &CandidateSet,
    ks: &[usize],
) -> Result<ScenarioScore> {
    let gt = scenario
        .ground_truth
        .as_ref()
        .ok_or_else(|| Error::MissingGroundTruth {
            scenario_id: scenario.scenario_id.clone(),
        })?;
    let min_ade = ks
        .iter()
        .map(|&k| min_ade_k(gt, candidates, k))
        .collect::<Result<Vec<_>>>()?;
    let min_fde = ks
        .iter()
        .map(|&k| min_fde_k(gt, candidates, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioScore {
        scenario_id: scenario.scenario_id.clone(),
        min_ade,
        min_fde,
    })
}

/// Per-scenario values and dataset means of minADE_k and minFDE_k.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub ks: Vec<usize>,
    pub scores: Vec<ScenarioScore>,
    pub mean_min_ade: Vec<f64>,
    pub mean_min_fde: Vec<f64>,
}

impl MetricReport {
    pub fn count(&self) -> usize {
        self.scores.len()
    }

    fn column(&self, means: &[f64], k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| means[i])
    }

    pub fn mean_ade_at(&self, k: usize) -> Option<f64> {
        self.column(&self.mean_min_ade, k)
    }

    pub fn mean_fde_at(&self, k: usize) -> Option<f64> {
        self.column(&self.mean_min_fde, k)
    }
}

/// Arithmetic means per `k`, summed in scenario order.
///
/// An empty score list yields NaN means; callers validate non-empty datasets.
pub fn aggregate(scores: Vec<ScenarioScore>, ks: &[usize]) -> Result<MetricReport> {
    for s in &scores {
        if s.min_ade.len() != ks.len() || s.min_fde.len() != ks.len() {
            return Err(Error::ShapeMismatch {
                expected: ks.len(),
                found: s.min_ade.len().min(s.min_fde.len()),
            });
        }
    }
    let n = scores.len() as f64;
    let mean = |select: fn(&ScenarioScore) -> &[f64], i: usize| {
        scores.iter().map(|s| select(s)[i]).sum::<f64>() / n
    };
    let mean_min_ade = (0..ks.len()).map(|i| mean(|s| &s.min_ade, i)).collect();
    let mean_min_fde = (0..ks.len()).map(|i| mean(|s| &s.min_fde, i)).collect();
    Ok(MetricReport {
        ks: ks.to_vec(),
        scores,
        mean_min_ade,
        mean_min_fde,
    })
}
