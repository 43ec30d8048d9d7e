//! Expected minADE_k / minFDE_k risk under the proposal mixture, and its subgradient.
//!
//! Every proposal acts as a reference trajectory; the risk is
//!
//! ```text
//! R(ŷ) = Σ_m Σ_n (w[m][n] / M) · minADE_k(y[m][n], ŷ)
//! ```
//!
//! Each proposal pulls only on its closest candidate within the k-prefix. Ties
//! go to the lowest candidate index, and per-timestep norms below
//! [`NORM_FLOOR`] contribute a zero subgradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{ade_flat, fde_flat};
use crate::types::{CandidateSet, ProposalMixture};

/// Below this distance a point-to-point norm is treated as a kink at zero.
pub const NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    MinAde,
    MinFde,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::MinAde => "minADE",
            LossKind::MinFde => "minFDE",
        }
    }
}

/// The optimization target: minADE_k or minFDE_k for a given `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LossSpec {
    pub kind: LossKind,
    pub k: usize,
}

impl LossSpec {
    pub fn min_ade(k: usize) -> Self {
        Self {
            kind: LossKind::MinAde,
            k,
        }
    }

    pub fn min_fde(k: usize) -> Self {
        Self {
            kind: LossKind::MinFde,
            k,
        }
    }

    pub(crate) fn validate(&self, set_size: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::ZeroK);
        }
        if self.k > set_size {
            return Err(Error::KExceedsSetSize {
                k: self.k,
                size: set_size,
            });
        }
        Ok(())
    }
}

fn check_shapes(mixture: &ProposalMixture, candidates: &CandidateSet, loss: &LossSpec) -> Result<()> {
    loss.validate(candidates.len())?;
    if candidates.horizon() != mixture.horizon() {
        return Err(Error::HorizonMismatch {
            left: mixture.horizon(),
            right: candidates.horizon(),
        });
    }
    Ok(())
}

/// Expected loss of `candidates` under the mixture.
pub fn risk(mixture: &ProposalMixture, candidates: &CandidateSet, loss: LossSpec) -> Result<f64> {
    check_shapes(mixture, candidates, &loss)?;
    Ok(evaluate(mixture, &candidates.to_flat(), loss, None))
}

/// Subgradient of [`risk`] with respect to every candidate coordinate.
///
/// Returned as `S` rows of `T` points, laid out like the candidate set.
/// Rows outside the k-prefix are zero.
pub fn risk_subgradient(
    mixture: &ProposalMixture,
    candidates: &CandidateSet,
    loss: LossSpec,
) -> Result<Vec<Vec<[f64; 2]>>> {
    check_shapes(mixture, candidates, &loss)?;
    let flat = candidates.to_flat();
    let mut grad = vec![0.0; flat.len()];
    evaluate(mixture, &flat, loss, Some(&mut grad));
    Ok(unflatten(&grad, mixture.horizon()))
}

pub(crate) fn unflatten(flat: &[f64], horizon: usize) -> Vec<Vec<[f64; 2]>> {
    flat.chunks_exact(horizon * 2)
        .map(|row| row.chunks_exact(2).map(|p| [p[0], p[1]]).collect())
        .collect()
}

/// Risk over interleaved candidate coordinates, optionally accumulating the
/// subgradient into `grad` (same layout, caller zeroes it).
///
/// Shapes are assumed validated; `candidates.len()` must be a multiple of `2T`
/// with at least `loss.k` rows.
pub(crate) fn evaluate(
    mixture: &ProposalMixture,
    candidates: &[f64],
    loss: LossSpec,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let stride = mixture.horizon() * 2;
    let inv_horizon = 1.0 / mixture.horizon() as f64;
    let prefix = &candidates[..loss.k * stride];
    let mut total = 0.0;

    for (index, &weight) in mixture.effective_weights().iter().enumerate() {
        if weight == 0.0 {
            continue;
        }
        let reference = mixture.coords_of(index);
        let mut best = f64::INFINITY;
        let mut best_row = 0;
        for (row, cand) in prefix.chunks_exact(stride).enumerate() {
            let d = match loss.kind {
                LossKind::MinAde => ade_flat(reference, cand),
                LossKind::MinFde => fde_flat(reference, cand),
            };
            if d < best {
                best = d;
                best_row = row;
            }
        }
        total += weight * best;

        if let Some(grad) = grad.as_deref_mut() {
            let cand = &prefix[best_row * stride..(best_row + 1) * stride];
            let out = &mut grad[best_row * stride..(best_row + 1) * stride];
            match loss.kind {
                LossKind::MinAde => {
                    let scale = weight * inv_horizon;
                    for t in 0..mixture.horizon() {
                        accumulate_unit(&cand[2 * t..2 * t + 2], &reference[2 * t..2 * t + 2], scale, &mut out[2 * t..2 * t + 2]);
                    }
                }
                LossKind::MinFde => {
                    let t = mixture.horizon() - 1;
                    accumulate_unit(&cand[2 * t..2 * t + 2], &reference[2 * t..2 * t + 2], weight, &mut out[2 * t..2 * t + 2]);
                }
            }
        }
    }
    total
}

#[inline]
fn accumulate_unit(cand: &[f64], reference: &[f64], scale: f64, out: &mut [f64]) {
    let dx = cand[0] - reference[0];
    let dy = cand[1] - reference[1];
    let norm = (dx * dx + dy * dy).sqrt();
    if norm >= NORM_FLOOR {
        out[0] += scale * dx / norm;
        out[1] += scale * dy / norm;
    }
}
