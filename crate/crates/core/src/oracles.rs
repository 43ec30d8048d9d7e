//! Independent reference computations used to check the optimizer and the
//! subgradient: exhaustive subset search, a per-timestep Weiszfeld solver, and
//! central finite differences. [`run_oracle_suite`] applies all three to a
//! dataset of small scenarios.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::{ade, fde};
use crate::optimizer::{optimize, OptimizerConfig};
use crate::risk::{risk, risk_subgradient, LossKind, LossSpec};
use crate::seeding::{derive_seed, derive_seed_from_label, rng_from_seed};
use crate::types::{CandidateSet, Point, ProposalMixture, Scenario, Trajectory};

/// Largest proposal count the exhaustive subset search accepts.
pub const SUBSET_ORACLE_LIMIT: usize = 16;

/// Best `size`-subset of the proposals under `loss`, by exhaustive enumeration.
///
/// Returns the subset's flat indices (ascending) and its risk. Ties keep the
/// lexicographically first subset.
pub fn brute_force_subset_oracle(
    mixture: &ProposalMixture,
    size: usize,
    loss: LossSpec,
) -> Result<(Vec<usize>, f64)> {
    let n = mixture.len();
    if n > SUBSET_ORACLE_LIMIT {
        return Err(Error::TooManyProposals {
            count: n,
            limit: SUBSET_ORACLE_LIMIT,
        });
    }
    if size == 0 {
        return Err(Error::EmptyCandidateSet);
    }
    if size > n {
        return Err(Error::KExceedsProposals { k: size, available: n });
    }
    let mut subset: Vec<usize> = (0..size).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let r = risk(mixture, &mixture.candidates_from(&subset), loss)?;
        if best.as_ref().is_none_or(|(_, b)| r < *b) {
            best = Some((subset.clone(), r));
        }
        // next combination in lexicographic order
        let Some(pos) = (0..size).rev().find(|&i| subset[i] < n - size + i) else {
            break;
        };
        subset[pos] += 1;
        for j in pos + 1..size {
            subset[j] = subset[j - 1] + 1;
        }
    }
    Ok(best.expect("at least one subset"))
}

/// Maximum Weiszfeld iterations per timestep.
pub const WEISZFELD_MAX_ITERS: usize = 10_000;
/// Stop once an iteration moves the estimate by less than this (meters).
pub const WEISZFELD_TOL: f64 = 1e-9;

/// Per-timestep weighted geometric median of the proposal points, using the
/// effective weights. This is the exact minimizer of the minADE_1 risk for a
/// single candidate.
pub fn geometric_median_oracle(mixture: &ProposalMixture) -> Trajectory {
    let horizon = mixture.horizon();
    let points = (0..horizon)
        .map(|t| {
            let sites: Vec<(Point, f64)> = mixture
                .iter()
                .filter(|(w, _)| *w > 0.0)
                .map(|(w, traj)| (traj.points()[t], w))
                .collect();
            weighted_geometric_median(&sites)
        })
        .collect();
    Trajectory::new(points).expect("median of finite points is finite")
}

/// `Σ w_i ‖x − p_i‖`.
pub fn weighted_distance_sum(x: Point, sites: &[(Point, f64)]) -> f64 {
    sites
        .iter()
        .map(|&(p, w)| w * ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt())
        .sum()
}

/// Weiszfeld iteration with an explicit optimality test at the data points.
pub fn weighted_geometric_median(sites: &[(Point, f64)]) -> Point {
    // merge exact duplicates so the vertex test sees the full weight
    let mut merged: Vec<(Point, f64)> = Vec::with_capacity(sites.len());
    for &(p, w) in sites {
        match merged.iter_mut().find(|(q, _)| *q == p) {
            Some(slot) => slot.1 += w,
            None => merged.push((p, w)),
        }
    }
    if merged.len() == 1 {
        return merged[0].0;
    }

    // A data point p_j is the median iff ‖Σ_{i≠j} w_i (p_j − p_i)/‖p_j − p_i‖‖ ≤ w_j.
    for (j, &(pj, wj)) in merged.iter().enumerate() {
        let mut pull = [0.0, 0.0];
        for (i, &(pi, wi)) in merged.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = ((pj[0] - pi[0]).powi(2) + (pj[1] - pi[1]).powi(2)).sqrt();
            pull[0] += wi * (pj[0] - pi[0]) / d;
            pull[1] += wi * (pj[1] - pi[1]) / d;
        }
        if (pull[0] * pull[0] + pull[1] * pull[1]).sqrt() <= wj {
            return pj;
        }
    }

    let total: f64 = merged.iter().map(|s| s.1).sum();
    let mut x = [0.0, 0.0];
    for &(p, w) in &merged {
        x[0] += w * p[0] / total;
        x[1] += w * p[1] / total;
    }
    for _ in 0..WEISZFELD_MAX_ITERS {
        let mut num = [0.0, 0.0];
        let mut den = 0.0;
        for &(p, w) in &merged {
            let mut d = ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt();
            if d < 1e-12 {
                // landed on a non-optimal data point; nudge off it
                x[0] += 1e-9;
                d = ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt();
            }
            num[0] += w * p[0] / d;
            num[1] += w * p[1] / d;
            den += w / d;
        }
        let next = [num[0] / den, num[1] / den];
        let step = ((next[0] - x[0]).powi(2) + (next[1] - x[1]).powi(2)).sqrt();
        x = next;
        if step < WEISZFELD_TOL {
            break;
        }
    }
    x
}

/// Central finite differences of [`risk`] with step `h` on every coordinate.
pub fn finite_difference_gradient(
    mixture: &ProposalMixture,
    candidates: &CandidateSet,
    loss: LossSpec,
    h: f64,
) -> Result<Vec<Vec<[f64; 2]>>> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::config("h", "must be positive"));
    }
    let count = candidates.len();
    let horizon = candidates.horizon();
    let base = candidates.to_flat();
    let mut grad = vec![0.0; base.len()];
    let mut probe = base.clone();
    for i in 0..base.len() {
        probe[i] = base[i] + h;
        let up = risk(mixture, &CandidateSet::from_flat(&probe, count, horizon)?, loss)?;
        probe[i] = base[i] - h;
        let down = risk(mixture, &CandidateSet::from_flat(&probe, count, horizon)?, loss)?;
        probe[i] = base[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    Ok(crate::risk::unflatten(&grad, horizon))
}

/// Outcome of one oracle check over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub checked: usize,
    pub passed: usize,
    /// Largest error seen (relative error, risk gap or risk excess).
    pub worst: f64,
    /// Scenarios the check could not be applied to.
    pub skipped: usize,
}

impl OracleCheck {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checked: 0,
            passed: 0,
            worst: 0.0,
            skipped: 0,
        }
    }

    fn record(&mut self, error: f64, ok: bool) {
        self.checked += 1;
        self.passed += usize::from(ok);
        self.worst = self.worst.max(error);
    }

    pub fn passed_all(&self) -> bool {
        self.passed == self.checked
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(OracleCheck::passed_all)
    }

    /// One line per check: `name: PASS|FAIL passed/checked worst=... skipped=...`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let verdict = if c.passed_all() { "PASS" } else { "FAIL" };
            let _ = writeln!(
                out,
                "{}: {verdict} {}/{} worst={:.3e} skipped={}",
                c.name, c.passed, c.checked, c.worst, c.skipped
            );
        }
        out
    }
}

/// Tolerances of the suite.
pub const GRADIENT_REL_TOL: f64 = 1e-4;
pub const GRADIENT_STEP: f64 = 1e-5;
/// Relative errors use `max(|analytic|, |numeric|, floor)` as denominator.
pub const GRADIENT_DENOMINATOR_FLOOR: f64 = 1e-6;
/// Required gap between the best and second-best candidate for a gradient check.
pub const ARGMIN_MARGIN: f64 = 1e-3;
pub const RISK_TOL: f64 = 1e-6;

/// Random candidates inside the per-timestep bounding box of the proposals,
/// kept only if every proposal's nearest prefix candidate is strict.
fn strict_candidates(mixture: &ProposalMixture, count: usize, loss: LossSpec, seed: u64) -> Option<CandidateSet> {
    let horizon = mixture.horizon();
    let mut lo = vec![[f64::INFINITY; 2]; horizon];
    let mut hi = vec![[f64::NEG_INFINITY; 2]; horizon];
    for (_, traj) in mixture.iter() {
        for (t, p) in traj.points().iter().enumerate() {
            for c in 0..2 {
                lo[t][c] = lo[t][c].min(p[c] - 1.0);
                hi[t][c] = hi[t][c].max(p[c] + 1.0);
            }
        }
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..50 {
        let rows = (0..count)
            .map(|_| {
                let points = (0..horizon)
                    .map(|t| [rng.random_range(lo[t][0]..hi[t][0]), rng.random_range(lo[t][1]..hi[t][1])])
                    .collect();
                Trajectory::new(points).expect("finite")
            })
            .collect();
        let set = CandidateSet::new(rows).expect("same horizon");
        if is_strict(mixture, &set, loss) {
            return Some(set);
        }
    }
    None
}

fn is_strict(mixture: &ProposalMixture, set: &CandidateSet, loss: LossSpec) -> bool {
    let prefix = &set.trajectories()[..loss.k];
    mixture.iter().filter(|(w, _)| *w > 0.0).all(|(_, y)| {
        let mut d: Vec<f64> = prefix
            .iter()
            .map(|c| match loss.kind {
                LossKind::MinAde => ade(y, c).expect("same horizon"),
                LossKind::MinFde => fde(y, c).expect("same horizon"),
            })
            .collect();
        d.sort_by(f64::total_cmp);
        let points_apart = prefix.iter().all(|c| {
            c.points()
                .iter()
                .zip(y.points())
                .all(|(p, q)| (p[0] - q[0]).hypot(p[1] - q[1]) > ARGMIN_MARGIN)
        });
        (d.len() < 2 || d[1] - d[0] > ARGMIN_MARGIN) && points_apart
    })
}

/// Subgradient vs finite differences, single-candidate optimum vs the
/// Weiszfeld median, and optimized risk vs the best proposal subset, on every
/// scenario of `dataset`. The subset check skips mixtures with more than
/// [`SUBSET_ORACLE_LIMIT`] proposals.
pub fn run_oracle_suite(dataset: &[Scenario], master_seed: u64, config: &OptimizerConfig) -> Result<OracleReport> {
    let mut gradient = OracleCheck::new("gradient");
    let mut median = OracleCheck::new("geometric-median");
    let mut subset = OracleCheck::new("subset-dominance");
    for (index, scenario) in dataset.iter().enumerate() {
        let mixture = &scenario.mixture;
        let seed = derive_seed_from_label(master_seed, &scenario.scenario_id);

        let count = mixture.len().min(3);
        let loss = if index % 2 == 0 {
            LossSpec::min_ade(count)
        } else {
            LossSpec::min_fde(count)
        };
        match strict_candidates(mixture, count, loss, derive_seed(seed, 0)) {
            Some(set) => {
                let analytic = risk_subgradient(mixture, &set, loss)?;
                let numeric = finite_difference_gradient(mixture, &set, loss, GRADIENT_STEP)?;
                let mut worst: f64 = 0.0;
                for (a, n) in analytic.iter().flatten().zip(numeric.iter().flatten()) {
                    for c in 0..2 {
                        let denominator = a[c].abs().max(n[c].abs()).max(GRADIENT_DENOMINATOR_FLOOR);
                        worst = worst.max((a[c] - n[c]).abs() / denominator);
                    }
                }
                gradient.record(worst, worst <= GRADIENT_REL_TOL);
            }
            None => gradient.skipped += 1,
        }

        let single = OptimizerConfig {
            seed: derive_seed(seed, 1),
            ..config.clone()
        };
        let (out, _) = optimize(mixture, 1, LossSpec::min_ade(1), &single)?;
        let oracle = CandidateSet::new(vec![geometric_median_oracle(mixture)])?;
        let gap = risk(mixture, &out, LossSpec::min_ade(1))? - risk(mixture, &oracle, LossSpec::min_ade(1))?;
        median.record(gap, gap <= RISK_TOL);

        if mixture.len() > SUBSET_ORACLE_LIMIT {
            subset.skipped += 1;
            continue;
        }
        for size in 1..=mixture.len().min(3) {
            let loss = LossSpec::min_ade(size);
            let cfg = OptimizerConfig {
                seed: derive_seed(seed, 1 + size as u64),
                ..config.clone()
            };
            let (out, _) = optimize(mixture, size, loss, &cfg)?;
            let (_, best) = brute_force_subset_oracle(mixture, size, loss)?;
            let excess = risk(mixture, &out, loss)? - best;
            subset.record(excess, excess <= RISK_TOL);
        }
    }
    Ok(OracleReport {
        checks: vec![gradient, median, subset],
    })
}
