//! Synthetic scenarios from an emulated ensemble of predictors.
//!
//! Each scenario draws context logits over six maneuvers; the true maneuver is
//! sampled from their softmax, so the shared context is a calibrated forecast.
//! The ground truth is a kinematic unicycle rollout of that maneuver plus noise.
//! Each emulated model sees the agent's initial speed and a privately perturbed
//! copy of the context, and emits `N` weighted proposals: one rollout per
//! maneuver it covers, most believed first, then variants with perturbed
//! intensity cycling through the covered maneuvers. A proposal's weight is the
//! tempered belief in its maneuver, so extra variants repeat the favorite
//! maneuver's high weight. Models differ in coverage, positional bias, noise and
//! temperature, so the pooled proposals are heterogeneous the way a real
//! ensemble's are.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::{derive_seed, rng_from_seed, weighted_with_replacement, SeededRng};
use crate::types::{build_mixture, ModelPrediction, Point, Scenario, Trajectory, WeightedProposal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Maneuver {
    Straight,
    LeftTurn,
    RightTurn,
    LaneChangeLeft,
    LaneChangeRight,
    Brake,
}

impl Maneuver {
    pub const ALL: [Maneuver; 6] = [
        Maneuver::Straight,
        Maneuver::LeftTurn,
        Maneuver::RightTurn,
        Maneuver::LaneChangeLeft,
        Maneuver::LaneChangeRight,
        Maneuver::Brake,
    ];
}

/// Yaw rate of a full-intensity turn (rad/s).
const TURN_RATE: f64 = 0.3;
/// Lateral offset of a full-intensity lane change (m).
const LANE_WIDTH: f64 = 3.5;
/// Duration of a lane change (s).
const LANE_CHANGE_TIME: f64 = 4.0;
/// Deceleration of a full-intensity brake (m/s²).
const BRAKE_DECEL: f64 = 2.5;
/// Integration substeps per output timestep.
const SUBSTEPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub horizon: usize,
    /// Seconds between output points.
    pub timestep: f64,
    /// Prior over [`Maneuver::ALL`], in that order.
    pub maneuver_prior: Vec<f64>,
    /// Initial speed range in m/s, `[min, max]`.
    pub speed_range: [f64; 2],
    /// Std-dev (m) of the ground truth's deviation from its rollout at the horizon.
    pub gt_noise_sigma: f64,
    /// Relative std-dev of the maneuver intensity (turn rate, lane offset, braking).
    pub intensity_spread: f64,
    /// Std-dev of the per-scenario context logits around the log prior; larger
    /// values make individual scenarios more predictable.
    pub context_spread: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            horizon: 12,
            timestep: 0.5,
            maneuver_prior: vec![0.35, 0.15, 0.15, 0.1, 0.1, 0.15],
            speed_range: [4.0, 12.0],
            gt_noise_sigma: 0.3,
            intensity_spread: 0.2,
            context_spread: 1.5,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::config("world.horizon", "must be at least 2"));
        }
        if !(self.timestep > 0.0 && self.timestep.is_finite()) {
            return Err(Error::config("world.timestep", "must be positive and finite"));
        }
        if self.maneuver_prior.len() != Maneuver::ALL.len() {
            return Err(Error::config("world.maneuver_prior", "needs one entry per maneuver (6)"));
        }
        if self.maneuver_prior.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::config("world.maneuver_prior", "entries must be nonnegative and finite"));
        }
        if (self.maneuver_prior.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::config("world.maneuver_prior", "must sum to 1"));
        }
        let [lo, hi] = self.speed_range;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::config("world.speed_range", "must satisfy 0 <= min <= max"));
        }
        for (field, v) in [
            ("world.gt_noise_sigma", self.gt_noise_sigma),
            ("world.intensity_spread", self.intensity_spread),
            ("world.context_spread", self.context_spread),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be nonnegative and finite"));
            }
        }
        Ok(())
    }
}

/// Behaviour of one emulated predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelEmulation {
    pub model_id: String,
    /// Chance that the model emits a rollout of any given maneuver.
    pub coverage: f64,
    /// Offset (m) reached at the horizon, growing linearly from zero.
    pub bias: Point,
    /// Std-dev (m) of each proposal's deviation from its rollout at the horizon.
    pub noise_sigma: f64,
    /// Softmax temperature of the weights; low values give overconfident weights.
    pub temperature: f64,
    /// Std-dev of the model's private perturbation of the context logits.
    pub belief_noise: f64,
}

impl Default for ModelEmulation {
    fn default() -> Self {
        Self {
            model_id: "model".into(),
            coverage: 0.8,
            bias: [0.0, 0.0],
            noise_sigma: 0.4,
            temperature: 1.0,
            belief_noise: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleEmulation {
    pub proposals_per_model: usize,
    pub models: Vec<ModelEmulation>,
}

impl Default for EnsembleEmulation {
    fn default() -> Self {
        Self {
            proposals_per_model: 10,
            models: vec![
                ModelEmulation {
                    model_id: "sharp".into(),
                    coverage: 0.7,
                    bias: [0.4, 0.0],
                    noise_sigma: 0.3,
                    temperature: 0.5,
                    belief_noise: 0.6,
                },
                ModelEmulation {
                    model_id: "broad".into(),
                    coverage: 0.9,
                    bias: [-0.2, 0.3],
                    noise_sigma: 0.5,
                    temperature: 1.5,
                    belief_noise: 0.8,
                },
                ModelEmulation {
                    model_id: "drift".into(),
                    coverage: 0.8,
                    bias: [0.0, -0.4],
                    noise_sigma: 0.4,
                    temperature: 1.0,
                    belief_noise: 1.0,
                },
            ],
        }
    }
}

impl EnsembleEmulation {
    pub fn validate(&self) -> Result<()> {
        if self.proposals_per_model == 0 {
            return Err(Error::config("ensemble.proposals_per_model", "must be at least 1"));
        }
        if self.models.is_empty() {
            return Err(Error::config("ensemble.models", "needs at least one model"));
        }
        for (i, m) in self.models.iter().enumerate() {
            let field = |name: &str| format!("ensemble.models[{i}].{name}");
            if !(0.0..=1.0).contains(&m.coverage) {
                return Err(Error::config(field("coverage"), "must lie in [0, 1]"));
            }
            if !(m.noise_sigma >= 0.0 && m.noise_sigma.is_finite()) {
                return Err(Error::config(field("noise_sigma"), "must be nonnegative and finite"));
            }
            if !(m.belief_noise >= 0.0 && m.belief_noise.is_finite()) {
                return Err(Error::config(field("belief_noise"), "must be nonnegative and finite"));
            }
            if !(m.temperature > 0.0 && m.temperature.is_finite()) {
                return Err(Error::config(field("temperature"), "must be positive and finite"));
            }
            if !m.bias.iter().all(|b| b.is_finite()) {
                return Err(Error::config(field("bias"), "must be finite"));
            }
        }
        Ok(())
    }
}

/// Unicycle rollout from the origin heading along +x, without the start point.
pub fn rollout(maneuver: Maneuver, speed: f64, intensity: f64, horizon: usize, timestep: f64) -> Vec<Point> {
    let dt = timestep / SUBSTEPS as f64;
    let (mut x, mut y, mut heading, mut v) = (0.0f64, 0.0f64, 0.0f64, speed);
    let mut points = Vec::with_capacity(horizon);
    for step in 0..horizon * SUBSTEPS {
        let t = (step as f64 + 0.5) * dt;
        let (yaw_rate, accel) = match maneuver {
            Maneuver::Straight => (0.0, 0.0),
            Maneuver::LeftTurn => (TURN_RATE * intensity, 0.0),
            Maneuver::RightTurn => (-TURN_RATE * intensity, 0.0),
            Maneuver::LaneChangeLeft | Maneuver::LaneChangeRight => {
                // one sine period of yaw rate shifts the lane by ≈ v·A·τ²/(2π)
                let sign = if maneuver == Maneuver::LaneChangeLeft { 1.0 } else { -1.0 };
                let amplitude = 2.0 * std::f64::consts::PI * LANE_WIDTH * intensity
                    / (speed.max(1.0) * LANE_CHANGE_TIME * LANE_CHANGE_TIME);
                let rate = if t < LANE_CHANGE_TIME {
                    amplitude * (2.0 * std::f64::consts::PI * t / LANE_CHANGE_TIME).sin()
                } else {
                    0.0
                };
                (sign * rate, 0.0)
            }
            Maneuver::Brake => (0.0, -BRAKE_DECEL * intensity),
        };
        // midpoint heading keeps turns accurate at coarse substeps
        let mid = heading + 0.5 * yaw_rate * dt;
        let v_next = (v + accel * dt).max(0.0);
        let v_mid = 0.5 * (v + v_next);
        x += v_mid * mid.cos() * dt;
        y += v_mid * mid.sin() * dt;
        heading += yaw_rate * dt;
        v = v_next;
        if (step + 1) % SUBSTEPS == 0 {
            points.push([x, y]);
        }
    }
    points
}

fn normal(rng: &mut SeededRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Adds a Gaussian random walk whose marginal std-dev reaches `sigma` at the horizon.
fn add_walk(points: &mut [Point], sigma: f64, rng: &mut SeededRng) {
    if sigma == 0.0 {
        return;
    }
    let step_sigma = sigma / (points.len() as f64).sqrt();
    let mut offset = [0.0, 0.0];
    for p in points.iter_mut() {
        offset[0] += step_sigma * normal(rng);
        offset[1] += step_sigma * normal(rng);
        p[0] += offset[0];
        p[1] += offset[1];
    }
}

fn intensity(spread: f64, rng: &mut SeededRng) -> f64 {
    (1.0 + spread * normal(rng)).clamp(0.2, 2.0)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// One model's proposals. Drawn from its own generator so that the first
/// proposals do not depend on how many are requested.
fn emulate_model(
    world: &WorldConfig,
    model: &ModelEmulation,
    count: usize,
    speed: f64,
    context: &[f64],
    rng: &mut SeededRng,
) -> Result<ModelPrediction> {
    let logits: Vec<f64> = context
        .iter()
        .map(|l| l + model.belief_noise * normal(rng))
        .collect();
    let coverage: Vec<bool> = (0..Maneuver::ALL.len()).map(|_| rng.random::<f64>() < model.coverage).collect();
    let mut covered: Vec<usize> = (0..Maneuver::ALL.len()).filter(|&j| coverage[j]).collect();
    if covered.is_empty() {
        // a model always predicts something: fall back to its favorite maneuver
        let favorite = (0..logits.len()).max_by(|&a, &b| logits[a].total_cmp(&logits[b])).expect("six maneuvers");
        covered.push(favorite);
    }
    covered.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));

    let horizon = world.horizon;
    let mut proposals = Vec::with_capacity(count);
    let mut proposal_logits = Vec::with_capacity(count);
    for slot in 0..count {
        let (maneuver, strength) = if slot < covered.len() {
            (covered[slot], 1.0)
        } else {
            let cycle = (slot - covered.len()) % covered.len();
            (covered[cycle], intensity(world.intensity_spread.max(0.15), rng))
        };
        let mut points = rollout(Maneuver::ALL[maneuver], speed, strength, horizon, world.timestep);
        for (t, p) in points.iter_mut().enumerate() {
            let ramp = (t + 1) as f64 / horizon as f64;
            p[0] += model.bias[0] * ramp;
            p[1] += model.bias[1] * ramp;
        }
        add_walk(&mut points, model.noise_sigma, rng);
        proposal_logits.push(logits[maneuver] / model.temperature);
        proposals.push(points);
    }
    let weights = softmax(&proposal_logits);
    let proposals = proposals
        .into_iter()
        .zip(weights)
        .map(|(points, w)| WeightedProposal::new(w, Trajectory::new(points)?))
        .collect::<Result<Vec<_>>>()?;
    ModelPrediction::new(model.model_id.clone(), proposals)
}

/// One scenario, fully determined by `seed`.
pub fn generate_scenario(
    world: &WorldConfig,
    ensemble: &EnsembleEmulation,
    scenario_id: impl Into<String>,
    seed: u64,
) -> Result<Scenario> {
    world.validate()?;
    ensemble.validate()?;
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let context: Vec<f64> = world
        .maneuver_prior
        .iter()
        .map(|&p| p.max(1e-12).ln() + world.context_spread * normal(&mut rng))
        .collect();
    let truth = weighted_with_replacement(&softmax(&context), 1, &mut rng)[0];
    let [lo, hi] = world.speed_range;
    let speed = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let strength = intensity(world.intensity_spread, &mut rng);
    let mut gt = rollout(Maneuver::ALL[truth], speed, strength, world.horizon, world.timestep);
    add_walk(&mut gt, world.gt_noise_sigma, &mut rng);

    let models = ensemble
        .models
        .iter()
        .enumerate()
        .map(|(m, model)| {
            let mut model_rng = rng_from_seed(derive_seed(seed, m as u64 + 1));
            emulate_model(world, model, ensemble.proposals_per_model, speed, &context, &mut model_rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Scenario::new(scenario_id, build_mixture(models)?, Some(Trajectory::new(gt)?))
}

/// Identifier of scenario `index` in a generated dataset.
pub fn scenario_id(index: usize) -> String {
    format!("scn-{index:05}")
}

/// `count` scenarios; scenario `i` uses seed `derive_seed(master_seed, i)`.
pub fn generate_dataset(
    world: &WorldConfig,
    ensemble: &EnsembleEmulation,
    count: usize,
    master_seed: u64,
) -> Result<Vec<Scenario>> {
    if count == 0 {
        return Err(Error::config("count", "must be at least 1"));
    }
    (0..count)
        .map(|i| generate_scenario(world, ensemble, scenario_id(i), derive_seed(master_seed, i as u64)))
        .collect()
}
