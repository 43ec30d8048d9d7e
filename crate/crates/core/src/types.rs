//! Domain types: trajectories, weighted proposals, per-model predictions and the
//! pooled proposal mixture.
//!
//! The mixture is the categorical distribution over all proposals of all models,
//! where proposal `n` of model `m` carries the effective weight `w[m][n] / M`.
//! Per-model weights are normalized to the simplex before pooling.

use crate::error::{Error, Result};

/// A 2-D position in meters, top-down frame.
pub type Point = [f64; 2];

/// Deviation of a model's raw weight sum from 1 above which the mixture records
/// that it had to renormalize.
pub const RENORMALIZATION_TOLERANCE: f64 = 1e-6;

/// `T` timesteps of 2-D positions. Always non-empty and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<Point>,
}

impl Trajectory {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if let Some(timestep) = points
            .iter()
            .position(|p| !(p[0].is_finite() && p[1].is_finite()))
        {
            return Err(Error::NonFiniteCoordinate { timestep });
        }
        Ok(Self { points })
    }

    /// Builds a trajectory from interleaved `x0, y0, x1, y1, ...` coordinates.
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if !coords.len().is_multiple_of(2) {
            return Err(Error::ShapeMismatch {
                expected: coords.len() + 1,
                found: coords.len(),
            });
        }
        Self::new(coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
    }

    pub fn horizon(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn final_point(&self) -> Point {
        self.points[self.points.len() - 1]
    }

    pub fn translated(&self, offset: Point) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| [p[0] + offset[0], p[1] + offset[1]])
                .collect(),
        }
    }

    pub(crate) fn extend_flat(&self, out: &mut Vec<f64>) {
        for p in &self.points {
            out.extend_from_slice(p);
        }
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }
}

/// One `(weight, trajectory)` pair emitted by a base model.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedProposal {
    weight: f64,
    trajectory: Trajectory,
}

impl WeightedProposal {
    pub fn new(weight: f64, trajectory: Trajectory) -> Result<Self> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(Error::InvalidWeight { weight });
        }
        Ok(Self { weight, trajectory })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }
}

/// The weighted proposals of a single ensemble member.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPrediction {
    model_id: String,
    proposals: Vec<WeightedProposal>,
}

impl ModelPrediction {
    /// Requires at least one proposal and a common horizon across proposals.
    pub fn new(model_id: impl Into<String>, proposals: Vec<WeightedProposal>) -> Result<Self> {
        let model_id = model_id.into();
        let Some(first) = proposals.first() else {
            return Err(Error::EmptyModel { model_id });
        };
        let expected = first.trajectory.horizon();
        for p in &proposals {
            let found = p.trajectory.horizon();
            if found != expected {
                return Err(Error::InconsistentHorizon { expected, found });
            }
        }
        Ok(Self {
            model_id,
            proposals,
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn proposals(&self) -> &[WeightedProposal] {
        &self.proposals
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.proposals[0].trajectory.horizon()
    }

    pub fn weight_sum(&self) -> f64 {
        self.proposals.iter().map(|p| p.weight).sum()
    }
}

/// Weights summing to 1 within this are already normalized up to rounding
/// and are kept bit for bit, so normalizing twice changes nothing.
const NORMALIZED_SUM_SLACK: f64 = 64.0 * f64::EPSILON;

/// Rescales the weights of `prediction` onto the simplex, preserving proportions.
pub fn normalize_model_weights(prediction: &ModelPrediction) -> Result<ModelPrediction> {
    let total = prediction.weight_sum();
    if total <= 0.0 {
        return Err(Error::AllZeroWeights {
            model_id: prediction.model_id.clone(),
        });
    }
    if (total - 1.0).abs() <= NORMALIZED_SUM_SLACK {
        return Ok(prediction.clone());
    }
    Ok(ModelPrediction {
        model_id: prediction.model_id.clone(),
        proposals: prediction
            .proposals
            .iter()
            .map(|p| WeightedProposal {
                weight: p.weight / total,
                trajectory: p.trajectory.clone(),
            })
            .collect(),
    })
}

/// The pooled categorical distribution over all proposals of all models.
///
/// Proposals are addressed by a flat index in `(model, proposal)` order.
#[derive(Debug, Clone)]
pub struct ProposalMixture {
    models: Vec<ModelPrediction>,
    effective_weights: Vec<f64>,
    model_offsets: Vec<usize>,
    coords: Vec<f64>,
    horizon: usize,
    renormalized: bool,
}

impl PartialEq for ProposalMixture {
    fn eq(&self, other: &Self) -> bool {
        self.models == other.models
    }
}

/// Pools `models` into a mixture; each model is normalized before pooling.
///
/// Zero-weight proposals are retained so flat indices match the input order.
pub fn build_mixture(models: Vec<ModelPrediction>) -> Result<ProposalMixture> {
    let Some(first) = models.first() else {
        return Err(Error::EmptyEnsemble);
    };
    let horizon = first.horizon();
    let model_count = models.len() as f64;

    let mut normalized = Vec::with_capacity(models.len());
    let mut renormalized = false;
    for model in &models {
        if model.horizon() != horizon {
            return Err(Error::InconsistentHorizon {
                expected: horizon,
                found: model.horizon(),
            });
        }
        if (model.weight_sum() - 1.0).abs() > RENORMALIZATION_TOLERANCE {
            renormalized = true;
        }
        normalized.push(normalize_model_weights(model)?);
    }

    let total: usize = normalized.iter().map(ModelPrediction::len).sum();
    let mut effective_weights = Vec::with_capacity(total);
    let mut model_offsets = Vec::with_capacity(normalized.len() + 1);
    let mut coords = Vec::with_capacity(total * horizon * 2);
    for model in &normalized {
        model_offsets.push(effective_weights.len());
        for p in &model.proposals {
            effective_weights.push(p.weight / model_count);
            p.trajectory.extend_flat(&mut coords);
        }
    }
    model_offsets.push(effective_weights.len());

    Ok(ProposalMixture {
        models: normalized,
        effective_weights,
        model_offsets,
        coords,
        horizon,
        renormalized,
    })
}

impl ProposalMixture {
    /// Single-model mixture from raw `(weight, trajectory)` pairs.
    pub fn from_weighted(pairs: Vec<(f64, Trajectory)>) -> Result<Self> {
        let proposals = pairs
            .into_iter()
            .map(|(w, t)| WeightedProposal::new(w, t))
            .collect::<Result<Vec<_>>>()?;
        build_mixture(vec![ModelPrediction::new("model-0", proposals)?])
    }

    pub fn models(&self) -> &[ModelPrediction] {
        &self.models
    }

    pub fn num_models(&self) -> usize {
        self.models.len()
    }

    /// Total number of pooled proposals.
    pub fn len(&self) -> usize {
        self.effective_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effective_weights.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn effective_weights(&self) -> &[f64] {
        &self.effective_weights
    }

    /// True when at least one model's raw weights were off the simplex by more
    /// than [`RENORMALIZATION_TOLERANCE`].
    pub fn weights_renormalized(&self) -> bool {
        self.renormalized
    }

    /// `(model, proposal)` position of a flat index.
    pub fn locate(&self, index: usize) -> (usize, usize) {
        let model = self.model_offsets.partition_point(|&o| o <= index) - 1;
        (model, index - self.model_offsets[model])
    }

    pub fn trajectory(&self, index: usize) -> &Trajectory {
        let (m, n) = self.locate(index);
        &self.models[m].proposals[n].trajectory
    }

    /// `(effective weight, trajectory)` for every proposal in flat order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, &Trajectory)> + '_ {
        self.models
            .iter()
            .flat_map(|m| m.proposals.iter().map(|p| &p.trajectory))
            .zip(self.effective_weights.iter())
            .map(|(t, &w)| (w, t))
    }

    /// Interleaved coordinates of proposal `index`, length `2T`.
    pub(crate) fn coords_of(&self, index: usize) -> &[f64] {
        let stride = self.horizon * 2;
        &self.coords[index * stride..(index + 1) * stride]
    }

    /// The proposals at `indices`, in that order.
    pub fn candidates_from(&self, indices: &[usize]) -> CandidateSet {
        CandidateSet {
            trajectories: indices.iter().map(|&i| self.trajectory(i).clone()).collect(),
        }
    }

    /// The same proposals translated by `offset`.
    pub fn translated(&self, offset: Point) -> Self {
        let models = self
            .models
            .iter()
            .map(|m| ModelPrediction {
                model_id: m.model_id.clone(),
                proposals: m
                    .proposals
                    .iter()
                    .map(|p| WeightedProposal {
                        weight: p.weight,
                        trajectory: p.trajectory.translated(offset),
                    })
                    .collect(),
            })
            .collect();
        build_mixture(models).expect("translation preserves validity")
    }
}

/// The `S` trajectories being optimized or selected, in rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    trajectories: Vec<Trajectory>,
}

impl CandidateSet {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        let Some(first) = trajectories.first() else {
            return Err(Error::EmptyCandidateSet);
        };
        let expected = first.horizon();
        for t in &trajectories {
            if t.horizon() != expected {
                return Err(Error::InconsistentHorizon {
                    expected,
                    found: t.horizon(),
                });
            }
        }
        Ok(Self { trajectories })
    }

    /// Rebuilds `count` trajectories of `horizon` points from interleaved coordinates.
    pub fn from_flat(coords: &[f64], count: usize, horizon: usize) -> Result<Self> {
        let expected = count * horizon * 2;
        if coords.len() != expected || count == 0 {
            return Err(Error::ShapeMismatch {
                expected,
                found: coords.len(),
            });
        }
        let trajectories = coords
            .chunks_exact(horizon * 2)
            .map(Trajectory::from_flat)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { trajectories })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.trajectories[0].horizon()
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn get(&self, index: usize) -> Option<&Trajectory> {
        self.trajectories.get(index)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * self.horizon() * 2);
        for t in &self.trajectories {
            t.extend_flat(&mut out);
        }
        out
    }

    pub fn into_trajectories(self) -> Vec<Trajectory> {
        self.trajectories
    }
}

/// One prediction instance: a mixture plus the optional observed future.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scenario_id: String,
    pub mixture: ProposalMixture,
    pub ground_truth: Option<Trajectory>,
}

impl Scenario {
    pub fn new(
        scenario_id: impl Into<String>,
        mixture: ProposalMixture,
        ground_truth: Option<Trajectory>,
    ) -> Result<Self> {
        if let Some(gt) = &ground_truth {
            if gt.horizon() != mixture.horizon() {
                return Err(Error::InconsistentHorizon {
                    expected: mixture.horizon(),
                    found: gt.horizon(),
                });
            }
        }
        Ok(Self {
            scenario_id: scenario_id.into(),
            mixture,
            ground_truth,
        })
    }

    pub fn horizon(&self) -> usize {
        self.mixture.horizon()
    }
}
