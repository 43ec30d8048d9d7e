//! Model-based risk minimization: gradient descent on the candidate coordinates
//! against the mixture risk.
//!
//! The loop runs a fixed number of Adam steps (256 at learning rate 0.1 by
//! default) from a seeded start spread over the mixture like k-means++ seeding, and by default returns the iterate with
//! the lowest risk seen. A greedy polish then moves candidate points onto
//! proposal points where that lowers the risk, since minima on a proposal
//! point are kinks that a fixed-step Adam only circles. The output is ranked
//! so that the candidates whose removal would raise the risk the most come
//! first.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::metrics::{ade_flat, fde_flat};
use crate::risk::{evaluate, LossKind, LossSpec, NORM_FLOOR};
use crate::seeding::{rng_from_seed, SeededRng, weighted_with_replacement, weighted_without_replacement};
use crate::types::{CandidateSet, ProposalMixture};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Proposals drawn from the mixture's categorical distribution, plus jitter.
    CategoricalDraw,
    /// Proposals drawn uniformly, plus jitter.
    UniformDraw,
    /// Weighted centroid plus Gaussian noise scaled by the proposal spread.
    GaussianNoise,
    /// First proposal drawn by weight, each further one with probability
    /// proportional to its current risk contribution (weight times distance to
    /// the nearest pick), plus jitter.
    RiskSeeding,
}

/// Stop once the risk improved by less than `rel_tol` (relative) over `window` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub window: usize,
    pub rel_tol: f64,
}

impl Default for EarlyStop {
    fn default() -> Self {
        Self {
            window: 32,
            rel_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub init: InitStrategy,
    /// Std-dev (meters) of the per-coordinate jitter added to drawn proposals.
    pub jitter_sigma: f64,
    pub seed: u64,
    pub keep_best_iterate: bool,
    pub early_stop: Option<EarlyStop>,
    /// After the Adam steps, move single candidate points onto nearby proposal
    /// points whenever that lowers the risk.
    pub snap_to_proposals: bool,
    /// After the Adam steps, alternate between assigning proposals to their
    /// nearest candidate and moving each candidate to the weighted geometric
    /// median of its proposals, while that lowers the risk.
    pub refine_medians: bool,
    /// Every this many steps, replace prefix rows by whole proposal
    /// trajectories while that lowers the risk, then restart Adam. 0 disables.
    pub relocate_every: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            learning_rate: adam.learning_rate,
            steps: 256,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            init: InitStrategy::RiskSeeding,
            jitter_sigma: 0.01,
            seed: 0,
            keep_best_iterate: true,
            early_stop: None,
            snap_to_proposals: true,
            refine_medians: true,
            relocate_every: 64,
        }
    }
}

impl OptimizerConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("optimizer.learning_rate", "must be positive and finite"));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::config("optimizer.beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("optimizer.beta2", "must lie in [0, 1)"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::config("optimizer.epsilon", "must be positive"));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::config("optimizer.jitter_sigma", "must be nonnegative and finite"));
        }
        if let Some(es) = &self.early_stop {
            if es.window == 0 {
                return Err(Error::config("optimizer.early_stop.window", "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Risk history of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationTrace {
    /// Risk of the initial candidates followed by the risk after each step.
    pub risks: Vec<f64>,
    /// Index into `risks` of the lowest value seen.
    pub best_step: usize,
    /// Risk of the returned candidate set.
    pub final_risk: f64,
}

impl OptimizationTrace {
    pub fn initial_risk(&self) -> f64 {
        self.risks[0]
    }

    pub fn steps_run(&self) -> usize {
        self.risks.len() - 1
    }
}

/// Draws the starting candidate set.
pub fn random_init(mixture: &ProposalMixture, count: usize, config: &OptimizerConfig) -> Result<CandidateSet> {
    if count == 0 {
        return Err(Error::EmptyCandidateSet);
    }
    let mut rng = rng_from_seed(config.seed);
    let horizon = mixture.horizon();
    let proposals = mixture.len();
    let mut coords = Vec::with_capacity(count * horizon * 2);

    match config.init {
        InitStrategy::CategoricalDraw | InitStrategy::UniformDraw | InitStrategy::RiskSeeding => {
            let picks = match config.init {
                InitStrategy::RiskSeeding => risk_seeding(mixture, count, &mut rng),
                InitStrategy::CategoricalDraw => draw(mixture.effective_weights(), count, &mut rng),
                _ => draw(&vec![1.0; proposals], count, &mut rng),
            };
            for i in picks {
                coords.extend_from_slice(mixture.coords_of(i));
            }
            if config.jitter_sigma > 0.0 {
                for c in &mut coords {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *c += config.jitter_sigma * z;
                }
            }
        }
        InitStrategy::GaussianNoise => {
            let (centroid, spread) = weighted_centroid_and_spread(mixture);
            for _ in 0..count {
                let zx: f64 = StandardNormal.sample(&mut rng);
                let zy: f64 = StandardNormal.sample(&mut rng);
                for t in 0..horizon {
                    let scale = spread[t].max(config.jitter_sigma);
                    coords.push(centroid[2 * t] + scale * zx);
                    coords.push(centroid[2 * t + 1] + scale * zy);
                }
            }
        }
    }
    CandidateSet::from_flat(&coords, count, horizon)
}

/// Without replacement while the pool lasts, with replacement beyond it.
fn draw(weights: &[f64], count: usize, rng: &mut SeededRng) -> Vec<usize> {
    if count <= weights.len() {
        weighted_without_replacement(weights, count, rng)
    } else {
        weighted_with_replacement(weights, count, rng)
    }
}

/// D-weighted seeding for the minADE risk; falls back to weighted draws with
/// replacement once every proposal is covered exactly.
fn risk_seeding(mixture: &ProposalMixture, count: usize, rng: &mut SeededRng) -> Vec<usize> {
    let weights = mixture.effective_weights();
    let first = weighted_with_replacement(weights, 1, rng)[0];
    let mut picks = vec![first];
    let mut nearest: Vec<f64> = (0..mixture.len())
        .map(|i| ade_flat(mixture.coords_of(i), mixture.coords_of(first)))
        .collect();
    while picks.len() < count {
        let scores: Vec<f64> = weights.iter().zip(&nearest).map(|(w, d)| w * d).collect();
        let next = if scores.iter().any(|&s| s > 0.0) {
            weighted_with_replacement(&scores, 1, rng)[0]
        } else {
            weighted_with_replacement(weights, 1, rng)[0]
        };
        picks.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(ade_flat(mixture.coords_of(i), mixture.coords_of(next)));
        }
    }
    picks
}

/// Per-timestep weighted centroid (interleaved) and RMS per-axis spread around it.
fn weighted_centroid_and_spread(mixture: &ProposalMixture) -> (Vec<f64>, Vec<f64>) {
    let horizon = mixture.horizon();
    let mut centroid = vec![0.0; horizon * 2];
    for (i, &w) in mixture.effective_weights().iter().enumerate() {
        for (c, &y) in centroid.iter_mut().zip(mixture.coords_of(i)) {
            *c += w * y;
        }
    }
    let mut spread = vec![0.0; horizon];
    for (i, &w) in mixture.effective_weights().iter().enumerate() {
        let y = mixture.coords_of(i);
        for t in 0..horizon {
            let dx = y[2 * t] - centroid[2 * t];
            let dy = y[2 * t + 1] - centroid[2 * t + 1];
            spread[t] += w * (dx * dx + dy * dy) / 2.0;
        }
    }
    spread.iter_mut().for_each(|s| *s = s.sqrt());
    (centroid, spread)
}

/// Optimizes `count` candidates against the mixture risk.
///
/// Runs exactly `config.steps` Adam steps unless early stopping is enabled.
pub fn optimize(
    mixture: &ProposalMixture,
    count: usize,
    loss: LossSpec,
    config: &OptimizerConfig,
) -> Result<(CandidateSet, OptimizationTrace)> {
    config.validate()?;
    loss.validate(count)?;
    let init = random_init(mixture, count, config)?;
    optimize_from(mixture, init, loss, config)
}

/// Like [`optimize`] but starting from caller-provided candidates.
pub fn optimize_from(
    mixture: &ProposalMixture,
    init: CandidateSet,
    loss: LossSpec,
    config: &OptimizerConfig,
) -> Result<(CandidateSet, OptimizationTrace)> {
    config.validate()?;
    loss.validate(init.len())?;
    if init.horizon() != mixture.horizon() {
        return Err(Error::HorizonMismatch {
            left: mixture.horizon(),
            right: init.horizon(),
        });
    }
    let count = init.len();
    let mut params = init.to_flat();
    let mut grad = vec![0.0; params.len()];
    let mut adam = Adam::new(config.adam(), params.len());

    let mut current = evaluate(mixture, &params, loss, Some(&mut grad));
    let mut risks = Vec::with_capacity(config.steps + 1);
    risks.push(current);
    let mut best = (current, params.clone(), 0);

    for step in 1..=config.steps {
        adam.step(&mut params, &grad)?;
        grad.iter_mut().for_each(|g| *g = 0.0);
        current = evaluate(mixture, &params, loss, Some(&mut grad));
        if config.relocate_every > 0 && step % config.relocate_every == 0 && step < config.steps {
            if let Some(r) = relocate_rows(mixture, &mut params, loss, current) {
                adam = Adam::new(config.adam(), params.len());
                grad.iter_mut().for_each(|g| *g = 0.0);
                current = evaluate(mixture, &params, loss, Some(&mut grad));
                debug_assert!(current <= r + 1e-9);
            }
        }
        risks.push(current);
        if current < best.0 {
            best = (current, params.clone(), step);
        }
        if let Some(es) = &config.early_stop {
            if step >= es.window {
                let before = risks[step - es.window];
                if before - current <= es.rel_tol * before.abs().max(f64::MIN_POSITIVE) {
                    break;
                }
            }
        }
    }

    let best_step = best.2;
    let (mut final_risk, mut chosen) = if config.keep_best_iterate {
        (best.0, best.1)
    } else {
        (current, params.clone())
    };
    if config.relocate_every > 0 {
        if let Some(r) = relocate_rows(mixture, &mut chosen, loss, final_risk) {
            final_risk = r;
        }
    }
    let polishing = config.snap_to_proposals || config.refine_medians;
    if polishing {
        final_risk = polish(mixture, &mut chosen, loss, final_risk, config);
        // The best iterate is picked by total risk, which near the end is
        // dominated by the points still circling a kink; the last iterate can
        // be further along on the smooth parts, so polish it too.
        if config.keep_best_iterate && best_step != risks.len() - 1 {
            let last_risk = polish(mixture, &mut params, loss, current, config);
            if last_risk < final_risk {
                final_risk = last_risk;
                chosen = params;
            }
        }
    }
    let ranked = rank_by_contribution(mixture, &chosen, count, loss);
    let candidates = CandidateSet::from_flat(&ranked, count, mixture.horizon())?;
    Ok((
        candidates,
        OptimizationTrace {
            risks,
            best_step,
            final_risk,
        },
    ))
}

/// Best-improvement swap search: repeatedly replaces the prefix row whose
/// replacement by a whole proposal trajectory lowers the risk the most.
///
/// Gradient steps only move a candidate within its own basin, so a candidate
/// stuck sharing a mode with another never reaches an uncovered one; this is
/// the swap move of k-median local search. Returns the new risk if any row
/// moved.
fn relocate_rows(mixture: &ProposalMixture, coords: &mut [f64], loss: LossSpec, current: f64) -> Option<f64> {
    let stride = mixture.horizon() * 2;
    let weights = mixture.effective_weights();
    let active: Vec<usize> = (0..mixture.len()).filter(|&i| weights[i] > 0.0).collect();
    let distance = |a: &[f64], b: &[f64]| match loss.kind {
        LossKind::MinAde => ade_flat(a, b),
        LossKind::MinFde => fde_flat(a, b),
    };
    let n = active.len();
    let mut pairwise = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..a {
            let d = distance(mixture.coords_of(active[a]), mixture.coords_of(active[b]));
            pairwise[a * n + b] = d;
            pairwise[b * n + a] = d;
        }
    }

    let k = loss.k;
    let mut best_risk = current;
    let mut moved = false;
    let mut dist = vec![0.0; n * k];
    let mut others = vec![0.0; n];
    for _ in 0..k {
        for (a, &i) in active.iter().enumerate() {
            for row in 0..k {
                dist[a * k + row] = distance(mixture.coords_of(i), &coords[row * stride..(row + 1) * stride]);
            }
        }
        let mut swap: Option<(f64, usize, usize)> = None;
        for row in 0..k {
            for (a, slot) in others.iter_mut().enumerate() {
                *slot = (0..k)
                    .filter(|&r| r != row)
                    .map(|r| dist[a * k + r])
                    .fold(f64::INFINITY, f64::min);
            }
            for target in 0..n {
                let r: f64 = (0..n)
                    .map(|a| weights[active[a]] * pairwise[a * n + target].min(others[a]))
                    .sum();
                if r < swap.map_or(best_risk, |s| s.0) {
                    swap = Some((r, row, target));
                }
            }
        }
        let Some((_, row, target)) = swap else { break };
        let saved = coords[row * stride..(row + 1) * stride].to_vec();
        coords[row * stride..(row + 1) * stride].copy_from_slice(mixture.coords_of(active[target]));
        let exact = evaluate(mixture, coords, loss, None);
        if exact < best_risk {
            best_risk = exact;
            moved = true;
        } else {
            coords[row * stride..(row + 1) * stride].copy_from_slice(&saved);
            break;
        }
    }
    moved.then_some(best_risk)
}

fn polish(mixture: &ProposalMixture, coords: &mut [f64], loss: LossSpec, mut current: f64, config: &OptimizerConfig) -> f64 {
    if config.refine_medians {
        current = refine_medians(mixture, coords, loss, current);
    }
    if config.snap_to_proposals {
        current = snap_to_proposals(mixture, coords, loss, current);
    }
    current
}

/// Rounds of assignment and median update in [`refine_medians`].
const MEDIAN_ROUNDS: usize = 20;
/// Weiszfeld iterations per timestep and round.
const WEISZFELD_ITERS: usize = 100;
/// Weiszfeld stops once a step moves less than this (meters); the objective
/// is flat to first order at the median, so the residual is negligible.
const WEISZFELD_STEP_TOL: f64 = 1e-10;

/// k-medians refinement of the prefix rows. With the assignment of proposals
/// to rows fixed, the risk splits into one weighted geometric median problem
/// per row and timestep (only the final timestep for minFDE), each solved by
/// Weiszfeld iterations from the current point. A round is kept only if the
/// exact risk drops.
fn refine_medians(mixture: &ProposalMixture, coords: &mut [f64], loss: LossSpec, mut current: f64) -> f64 {
    let horizon = mixture.horizon();
    let stride = horizon * 2;
    let weights = mixture.effective_weights();
    let timesteps = match loss.kind {
        LossKind::MinAde => 0..horizon,
        LossKind::MinFde => horizon - 1..horizon,
    };
    let mut previous: Option<Vec<Vec<usize>>> = None;
    for _ in 0..MEDIAN_ROUNDS {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); loss.k];
        for i in (0..mixture.len()).filter(|&i| weights[i] > 0.0) {
            let y = mixture.coords_of(i);
            let row = (0..loss.k)
                .map(|r| {
                    let c = &coords[r * stride..(r + 1) * stride];
                    match loss.kind {
                        LossKind::MinAde => ade_flat(y, c),
                        LossKind::MinFde => fde_flat(y, c),
                    }
                })
                .enumerate()
                .fold((0, f64::INFINITY), |best, (r, d)| if d < best.1 { (r, d) } else { best })
                .0;
            members[row].push(i);
        }
        // same assignment as last round: the medians are already converged
        if previous.as_ref() == Some(&members) {
            break;
        }
        let saved = coords.to_vec();
        for (row, group) in members.iter().enumerate() {
            if group.is_empty() {
                continue;
            }
            for t in timesteps.clone() {
                let at = row * stride + 2 * t;
                let points: Vec<(f64, [f64; 2])> = group
                    .iter()
                    .map(|&i| {
                        let y = mixture.coords_of(i);
                        (weights[i], [y[2 * t], y[2 * t + 1]])
                    })
                    .collect();
                let start = [coords[at], coords[at + 1]];
                let refined = weiszfeld(&points, start);
                if median_objective(&points, refined) < median_objective(&points, start) {
                    coords[at] = refined[0];
                    coords[at + 1] = refined[1];
                }
            }
        }
        previous = Some(members);
        let refined = evaluate(mixture, coords, loss, None);
        if refined < current {
            let gain = current - refined;
            current = refined;
            if gain <= 1e-15 * current.max(1.0) {
                break;
            }
        } else {
            coords.copy_from_slice(&saved);
            break;
        }
    }
    current
}

fn norm(dx: f64, dy: f64) -> f64 {
    (dx * dx + dy * dy).sqrt()
}

fn median_objective(points: &[(f64, [f64; 2])], x: [f64; 2]) -> f64 {
    points.iter().map(|(w, p)| w * norm(x[0] - p[0], x[1] - p[1])).sum()
}

/// Weighted Weiszfeld iterations from `x`. Points within [`NORM_FLOOR`] of the
/// iterate are left out of the update, so the iteration cannot divide by zero;
/// the caller keeps the result only if it improves on the start.
fn weiszfeld(points: &[(f64, [f64; 2])], mut x: [f64; 2]) -> [f64; 2] {
    for _ in 0..WEISZFELD_ITERS {
        let (mut num, mut den) = ([0.0, 0.0], 0.0);
        for (w, p) in points {
            let d = norm(x[0] - p[0], x[1] - p[1]);
            if d < NORM_FLOOR {
                continue;
            }
            num[0] += w * p[0] / d;
            num[1] += w * p[1] / d;
            den += w / d;
        }
        if den == 0.0 {
            break;
        }
        let next = [num[0] / den, num[1] / den];
        let step = norm(next[0] - x[0], next[1] - x[1]);
        x = next;
        if step < WEISZFELD_STEP_TOL {
            break;
        }
    }
    x
}

/// Nearest proposal points tried for each candidate point.
const SNAP_NEIGHBORS: usize = 8;
/// Sweeps over all candidate points; stops early once a sweep changes nothing.
const SNAP_PASSES: usize = 4;

/// Greedy polish at the kinks of the risk.
///
/// Adam with a fixed step size keeps circling a minimum that sits exactly on a
/// proposal point (where the risk is not differentiable) at a distance of
/// order the step size. Each candidate point of the k-prefix is tentatively
/// moved onto each of its nearest proposal points at the same timestep, and
/// the move is kept only if the risk strictly drops. Returns the new risk.
fn snap_to_proposals(mixture: &ProposalMixture, coords: &mut [f64], loss: LossSpec, mut current: f64) -> f64 {
    let horizon = mixture.horizon();
    let stride = horizon * 2;
    let weights = mixture.effective_weights();
    let active: Vec<usize> = (0..mixture.len()).filter(|&i| weights[i] > 0.0).collect();
    let (timesteps, scale) = match loss.kind {
        LossKind::MinAde => (0..horizon, 1.0 / horizon as f64),
        LossKind::MinFde => (horizon - 1..horizon, 1.0),
    };
    let distance = |i: usize, cand: &[f64]| match loss.kind {
        LossKind::MinAde => ade_flat(mixture.coords_of(i), cand),
        LossKind::MinFde => fde_flat(mixture.coords_of(i), cand),
    };
    let point_gap = |i: usize, t: usize, q: [f64; 2]| {
        let y = &mixture.coords_of(i)[2 * t..2 * t + 2];
        ((q[0] - y[0]).powi(2) + (q[1] - y[1]).powi(2)).sqrt()
    };

    // dist[a * k + row]: loss of active proposal `a` against prefix row `row`
    let k = loss.k;
    let mut dist = vec![0.0; active.len() * k];
    for (a, &i) in active.iter().enumerate() {
        for row in 0..k {
            dist[a * k + row] = distance(i, &coords[row * stride..(row + 1) * stride]);
        }
    }
    let mut others = vec![0.0; active.len()];
    let mut near: Vec<(f64, usize)> = Vec::with_capacity(active.len());

    for _ in 0..SNAP_PASSES {
        let mut changed = false;
        for row in 0..k {
            for (a, slot) in others.iter_mut().enumerate() {
                *slot = (0..k)
                    .filter(|&r| r != row)
                    .map(|r| dist[a * k + r])
                    .fold(f64::INFINITY, f64::min);
            }
            for t in timesteps.clone() {
                let at = row * stride + 2 * t;
                let original = [coords[at], coords[at + 1]];
                near.clear();
                near.extend(active.iter().map(|&i| (point_gap(i, t, original), i)));
                near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut kept = original;
                for &(_, i) in near.iter().take(SNAP_NEIGHBORS) {
                    let y = &mixture.coords_of(i)[2 * t..2 * t + 2];
                    let target = [y[0], y[1]];
                    if target == kept {
                        continue;
                    }
                    // cheap screen from the cached distances, exact check before keeping
                    let screened: f64 = active
                        .iter()
                        .enumerate()
                        .map(|(a, &j)| {
                            let moved = dist[a * k + row] + scale * (point_gap(j, t, target) - point_gap(j, t, kept));
                            weights[j] * moved.min(others[a])
                        })
                        .sum();
                    if screened >= current {
                        continue;
                    }
                    coords[at] = target[0];
                    coords[at + 1] = target[1];
                    let r = evaluate(mixture, coords, loss, None);
                    if r < current {
                        current = r;
                        kept = target;
                        changed = true;
                        let cand = &coords[row * stride..(row + 1) * stride];
                        for (a, &j) in active.iter().enumerate() {
                            dist[a * k + row] = distance(j, cand);
                        }
                    } else {
                        coords[at] = kept[0];
                        coords[at + 1] = kept[1];
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    current
}

/// Reorders candidate rows by descending drop-one contribution: how much the
/// mixture loss over the full set would rise if the row were removed.
///
/// The first `loss.k` rows and the remainder are sorted separately, so the
/// k-prefix (and therefore the risk) is unchanged.
fn rank_by_contribution(mixture: &ProposalMixture, coords: &[f64], count: usize, loss: LossSpec) -> Vec<f64> {
    let stride = mixture.horizon() * 2;
    let contributions = drop_one_contributions(mixture, coords, count, loss.kind);
    let by_contribution = |a: &usize, b: &usize| {
        contributions[*b]
            .total_cmp(&contributions[*a])
            .then(a.cmp(b))
    };
    let mut order: Vec<usize> = (0..count).collect();
    order[..loss.k].sort_by(by_contribution);
    order[loss.k..].sort_by(by_contribution);

    let mut out = Vec::with_capacity(coords.len());
    for row in order {
        out.extend_from_slice(&coords[row * stride..(row + 1) * stride]);
    }
    out
}

/// `Σ_p w_p · (second-best − best)` credited to each proposal's best row.
pub(crate) fn drop_one_contributions(
    mixture: &ProposalMixture,
    coords: &[f64],
    count: usize,
    kind: LossKind,
) -> Vec<f64> {
    let stride = mixture.horizon() * 2;
    let mut contributions = vec![0.0; count];
    if count < 2 {
        return contributions;
    }
    for (index, &weight) in mixture.effective_weights().iter().enumerate() {
        let reference = mixture.coords_of(index);
        let (mut best, mut second, mut best_row) = (f64::INFINITY, f64::INFINITY, 0);
        for (row, cand) in coords.chunks_exact(stride).enumerate() {
            let d = match kind {
                LossKind::MinAde => ade_flat(reference, cand),
                LossKind::MinFde => fde_flat(reference, cand),
            };
            if d < best {
                second = best;
                best = d;
                best_row = row;
            } else if d < second {
                second = d;
            }
        }
        contributions[best_row] += weight * (second - best);
    }
    contributions
}
