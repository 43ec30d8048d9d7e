//! Baseline samplers that pick `k` members of the pooled proposal set.
//!
//! Every sampler returns distinct proposal indices in rank order (most
//! preferred first), plus a `CandidateSet` convenience wrapper.
//!
//! Cost: Topk is a sort. KMeans is `O(P·k·T)` per Lloyd iteration for `P`
//! proposals. NMS is `O(P)` when everything overlaps (one step suppresses the
//! rest) and `O(P²)` in the worst case, when each step discards only the
//! selected trajectory; NMS+KMeans therefore costs `O(P·k·T + P²)`.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ade_flat;
use crate::seeding::{rng_from_seed, weighted_without_replacement, SeededRng};
use crate::types::{CandidateSet, ProposalMixture};

/// Suppression radius for NMS, as an ADE in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmsConfig {
    pub threshold: f64,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self { threshold: 1.0 }
    }
}

impl NmsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::config("nms.threshold", "must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KMeansInit {
    PlusPlus,
    FromNms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub init: KMeansInit,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 1,
            max_iters: 100,
            init: KMeansInit::PlusPlus,
            seed: 0,
        }
    }
}

fn check_k(mixture: &ProposalMixture, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::ZeroK);
    }
    if k > mixture.len() {
        return Err(Error::KExceedsProposals {
            k,
            available: mixture.len(),
        });
    }
    Ok(())
}

/// `k` distinct proposals, uniformly without replacement.
pub fn uniform_indices(mixture: &ProposalMixture, k: usize, seed: u64) -> Result<Vec<usize>> {
    check_k(mixture, k)?;
    let mut rng = rng_from_seed(seed);
    Ok(index::sample(&mut rng, mixture.len(), k).into_vec())
}

pub fn sample_uniform(mixture: &ProposalMixture, k: usize, seed: u64) -> Result<CandidateSet> {
    uniform_indices(mixture, k, seed).map(|ix| mixture.candidates_from(&ix))
}

/// `k` distinct proposals by successive draws from the effective-weight
/// categorical distribution, renormalized after each draw.
pub fn categorical_indices(mixture: &ProposalMixture, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::ZeroK);
    }
    let positive = mixture.effective_weights().iter().filter(|&&w| w > 0.0).count();
    if k > positive {
        return Err(Error::KExceedsPositiveSupport {
            k,
            available: positive,
        });
    }
    let mut rng = rng_from_seed(seed);
    Ok(weighted_without_replacement(mixture.effective_weights(), k, &mut rng))
}

pub fn sample_categorical(mixture: &ProposalMixture, k: usize, seed: u64) -> Result<CandidateSet> {
    categorical_indices(mixture, k, seed).map(|ix| mixture.candidates_from(&ix))
}

/// All proposal indices by descending effective weight, ties by flat index.
fn by_weight(mixture: &ProposalMixture) -> Vec<usize> {
    let w = mixture.effective_weights();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    order
}

/// The `k` highest-weight proposals, descending.
pub fn topk_indices(mixture: &ProposalMixture, k: usize) -> Result<Vec<usize>> {
    check_k(mixture, k)?;
    let mut order = by_weight(mixture);
    order.truncate(k);
    Ok(order)
}

pub fn sample_topk(mixture: &ProposalMixture, k: usize) -> Result<CandidateSet> {
    topk_indices(mixture, k).map(|ix| mixture.candidates_from(&ix))
}

/// Greedy non-maximum suppression on ADE.
///
/// Repeatedly takes the highest-weight proposal left in the pool and removes
/// every pooled proposal within `threshold` ADE of it. If the pool empties
/// before `k` picks, suppressed proposals are re-admitted in descending weight
/// order.
pub fn nms_indices(mixture: &ProposalMixture, k: usize, config: &NmsConfig) -> Result<Vec<usize>> {
    check_k(mixture, k)?;
    config.validate()?;
    let mut pool = by_weight(mixture);
    let mut selected = Vec::with_capacity(k);
    let mut suppressed = Vec::new();

    while selected.len() < k && !pool.is_empty() {
        let pick = pool.remove(0);
        let anchor = mixture.coords_of(pick);
        selected.push(pick);
        pool.retain(|&other| {
            let keep = ade_flat(anchor, mixture.coords_of(other)) >= config.threshold;
            if !keep {
                suppressed.push(other);
            }
            keep
        });
    }
    if selected.len() < k {
        let w = mixture.effective_weights();
        suppressed.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
        selected.extend(suppressed.into_iter().take(k - selected.len()));
    }
    Ok(selected)
}

pub fn nms_select(mixture: &ProposalMixture, k: usize, config: &NmsConfig) -> Result<CandidateSet> {
    nms_indices(mixture, k, config).map(|ix| mixture.candidates_from(&ix))
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding over the flattened proposals: returns initial centroid
/// proposal indices.
fn plus_plus_seeds(mixture: &ProposalMixture, k: usize, rng: &mut SeededRng) -> Vec<usize> {
    use rand::Rng;
    let n = mixture.len();
    let mut seeds = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(mixture.coords_of(i), mixture.coords_of(seeds[0])))
        .collect();
    while seeds.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            weighted_without_replacement(&nearest, 1, rng)[0]
        } else {
            // every point coincides with a seed; any unused index will do
            (0..n).find(|i| !seeds.contains(i)).unwrap()
        };
        seeds.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(mixture.coords_of(i), mixture.coords_of(next)));
        }
    }
    seeds
}

/// Lloyd iterations from the given seed proposals; returns the centroids
/// (flattened, one row per cluster) and the final assignment.
fn lloyd(mixture: &ProposalMixture, seeds: &[usize], max_iters: usize) -> (Vec<f64>, Vec<usize>) {
    let stride = mixture.horizon() * 2;
    let k = seeds.len();
    let n = mixture.len();
    let mut centroids: Vec<f64> = seeds.iter().flat_map(|&i| mixture.coords_of(i).to_vec()).collect();
    let mut assignment = vec![usize::MAX; n];

    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let point = mixture.coords_of(i);
            let mut best = (f64::INFINITY, 0);
            for (c, centroid) in centroids.chunks_exact(stride).enumerate() {
                let d = sq_dist(point, centroid);
                if d < best.0 {
                    best = (d, c);
                }
            }
            if *slot != best.1 {
                *slot = best.1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k * stride];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for (s, &x) in sums[c * stride..(c + 1) * stride].iter_mut().zip(mixture.coords_of(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            // empty clusters keep their previous centroid
            if counts[c] > 0 {
                for (dst, &s) in centroids[c * stride..(c + 1) * stride]
                    .iter_mut()
                    .zip(&sums[c * stride..(c + 1) * stride])
                {
                    *dst = s / counts[c] as f64;
                }
            }
        }
    }
    (centroids, assignment)
}

/// Maps each centroid to a distinct proposal, greedily in ascending
/// centroid-to-proposal distance. Returns the proposal per centroid.
fn distinct_representatives(mixture: &ProposalMixture, centroids: &[f64]) -> Vec<usize> {
    let stride = mixture.horizon() * 2;
    let k = centroids.len() / stride;
    let n = mixture.len();
    let mut pairs = Vec::with_capacity(k * n);
    for (c, centroid) in centroids.chunks_exact(stride).enumerate() {
        for i in 0..n {
            pairs.push((sq_dist(centroid, mixture.coords_of(i)), c, i));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut rep = vec![usize::MAX; k];
    let mut taken = vec![false; n];
    let mut remaining = k;
    for (_, c, i) in pairs {
        if rep[c] == usize::MAX && !taken[i] {
            rep[c] = i;
            taken[i] = true;
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
    }
    rep
}

/// KMeans from explicit seed proposals, keeping the seed order.
pub fn kmeans_from_seeds(mixture: &ProposalMixture, seeds: &[usize], max_iters: usize) -> Result<Vec<usize>> {
    check_k(mixture, seeds.len())?;
    let (centroids, _) = lloyd(mixture, seeds, max_iters);
    Ok(distinct_representatives(mixture, &centroids))
}

/// Lloyd's algorithm on the flattened (unweighted) proposals, then one distinct
/// proposal per centroid.
///
/// With `PlusPlus` seeding, the output is ordered by descending cluster mass
/// (sum of member effective weights). With `FromNms`, it keeps the NMS order.
pub fn kmeans_indices(mixture: &ProposalMixture, config: &KMeansConfig, nms: &NmsConfig) -> Result<Vec<usize>> {
    check_k(mixture, config.k)?;
    match config.init {
        KMeansInit::FromNms => {
            let seeds = nms_indices(mixture, config.k, nms)?;
            kmeans_from_seeds(mixture, &seeds, config.max_iters)
        }
        KMeansInit::PlusPlus => {
            let mut rng = rng_from_seed(config.seed);
            let seeds = plus_plus_seeds(mixture, config.k, &mut rng);
            let (centroids, assignment) = lloyd(mixture, &seeds, config.max_iters);
            let reps = distinct_representatives(mixture, &centroids);
            let mut mass = vec![0.0; config.k];
            for (i, &c) in assignment.iter().enumerate() {
                mass[c] += mixture.effective_weights()[i];
            }
            let mut order: Vec<usize> = (0..config.k).collect();
            order.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]).then(a.cmp(&b)));
            Ok(order.into_iter().map(|c| reps[c]).collect())
        }
    }
}

pub fn kmeans_select(mixture: &ProposalMixture, config: &KMeansConfig) -> Result<CandidateSet> {
    let plus_plus = KMeansConfig {
        init: KMeansInit::PlusPlus,
        ..*config
    };
    kmeans_indices(mixture, &plus_plus, &NmsConfig::default()).map(|ix| mixture.candidates_from(&ix))
}

/// NMS picks the initial centroids, Lloyd refines, and each centroid maps back
/// to a distinct proposal.
pub fn nms_kmeans_select(
    mixture: &ProposalMixture,
    k: usize,
    nms: &NmsConfig,
    kmeans: &KMeansConfig,
) -> Result<CandidateSet> {
    let config = KMeansConfig {
        k,
        init: KMeansInit::FromNms,
        ..*kmeans
    };
    kmeans_indices(mixture, &config, nms).map(|ix| mixture.candidates_from(&ix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{build_mixture, ModelPrediction, Trajectory, WeightedProposal};

    fn line(y: f64) -> Trajectory {
        Trajectory::new((0..3).map(|t| [t as f64, y]).collect()).unwrap()
    }

    fn mix(pairs: &[(f64, f64)]) -> ProposalMixture {
        ProposalMixture::from_weighted(pairs.iter().map(|&(w, y)| (w, line(y))).collect()).unwrap()
    }

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    #[test]
    fn uniform_examples() {
        let m = mix(&[(0.2, 0.0), (0.3, 1.0), (0.5, 2.0)]);
        assert_eq!(sorted(uniform_indices(&m, 3, 9).unwrap()), vec![0, 1, 2]);
        assert_eq!(uniform_indices(&mix(&[(1.0, 0.0)]), 1, 1).unwrap(), vec![0]);
        assert_eq!(uniform_indices(&m, 2, 77).unwrap(), uniform_indices(&m, 2, 77).unwrap());
        assert_eq!(
            uniform_indices(&m, 4, 0),
            Err(Error::KExceedsProposals { k: 4, available: 3 })
        );
    }

    #[test]
    fn categorical_examples() {
        assert_eq!(categorical_indices(&mix(&[(1.0, 0.0)]), 1, 3).unwrap(), vec![0]);
        let m = mix(&[(1.0, 0.0), (0.0, 1.0)]);
        for seed in 0..50 {
            assert_eq!(categorical_indices(&m, 1, seed).unwrap(), vec![0]);
        }
        assert_eq!(
            categorical_indices(&m, 2, 0),
            Err(Error::KExceedsPositiveSupport { k: 2, available: 1 })
        );
    }

    #[test]
    fn topk_examples() {
        let m = mix(&[(0.5, 0.0), (0.3, 1.0), (0.2, 2.0)]);
        assert_eq!(topk_indices(&m, 2).unwrap(), vec![0, 1]);
        assert_eq!(topk_indices(&m, 3).unwrap(), vec![0, 1, 2]);
        let flat = mix(&[(1.0, 0.0), (1.0, 1.0), (1.0, 2.0)]);
        assert_eq!(topk_indices(&flat, 2).unwrap(), vec![0, 1]);
        let rising = mix(&[(0.1, 0.0), (0.2, 1.0), (0.7, 2.0)]);
        assert_eq!(topk_indices(&rising, 3).unwrap(), vec![2, 1, 0]);
    }

    #[test]
    fn topk_ties_follow_model_then_proposal_order() {
        let model = |id: &str, ys: &[f64]| {
            ModelPrediction::new(id, ys.iter().map(|&y| WeightedProposal::new(1.0, line(y)).unwrap()).collect()).unwrap()
        };
        let m = build_mixture(vec![model("a", &[0.0, 1.0]), model("b", &[2.0, 3.0])]).unwrap();
        assert_eq!(topk_indices(&m, 4).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn nms_examples() {
        let spread = mix(&[(0.4, 0.0), (0.3, 5.0), (0.2, 10.0), (0.1, 15.0)]);
        let tiny = NmsConfig { threshold: 1e-9 };
        assert_eq!(nms_indices(&spread, 3, &tiny).unwrap(), topk_indices(&spread, 3).unwrap());

        let dupes = mix(&[(0.4, 1.0), (0.6, 1.0)]);
        assert_eq!(nms_indices(&dupes, 1, &NmsConfig::default()).unwrap(), vec![1]);

        // equilateral offsets of side 0.5 at every timestep: mutual ADE 0.5
        let h = 0.25 * 3f64.sqrt();
        let close = ProposalMixture::from_weighted(vec![
            (0.2, line(0.0)),
            (0.5, line(0.0).translated([0.5, 0.0])),
            (0.3, line(0.0).translated([0.25, h])),
        ])
        .unwrap();
        assert_eq!(nms_indices(&close, 2, &NmsConfig::default()).unwrap(), vec![1, 2]);
    }

    #[test]
    fn nms_rejects_nonpositive_threshold() {
        let m = mix(&[(1.0, 0.0)]);
        assert!(nms_indices(&m, 1, &NmsConfig { threshold: 0.0 }).is_err());
    }

    #[test]
    fn kmeans_with_k_equal_to_count_is_a_permutation() {
        let m = mix(&[(0.1, 0.0), (0.2, 3.0), (0.3, 7.0), (0.4, -4.0)]);
        let cfg = KMeansConfig {
            k: 4,
            seed: 5,
            ..Default::default()
        };
        let out = kmeans_indices(&m, &cfg, &NmsConfig::default()).unwrap();
        assert_eq!(sorted(out), vec![0, 1, 2, 3]);
    }

    #[test]
    fn kmeans_finds_one_representative_per_group() {
        let m = mix(&[(0.2, 0.0), (0.2, 0.0), (0.1, 0.0), (0.2, 20.0), (0.3, 20.0)]);
        for seed in 0..20 {
            let cfg = KMeansConfig {
                k: 2,
                seed,
                ..Default::default()
            };
            let out = kmeans_indices(&m, &cfg, &NmsConfig::default()).unwrap();
            let groups: Vec<usize> = out.iter().map(|&i| usize::from(i >= 3)).collect();
            assert_eq!(sorted(groups), vec![0, 1]);
        }
    }

    #[test]
    fn nms_kmeans_fixed_point_matches_nms() {
        // three tight, well separated groups
        let m = mix(&[
            (0.30, 0.0),
            (0.05, 0.05),
            (0.25, 10.0),
            (0.05, 10.05),
            (0.30, 20.0),
            (0.05, 20.05),
        ]);
        let nms = NmsConfig::default();
        let expected = nms_select(&m, 3, &nms).unwrap();
        let out = nms_kmeans_select(&m, 3, &nms, &KMeansConfig::default()).unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn nms_kmeans_full_k_is_permutation() {
        let m = mix(&[(0.1, 0.0), (0.2, 0.3), (0.3, 0.6), (0.4, 0.9)]);
        let out = kmeans_indices(
            &m,
            &KMeansConfig {
                k: 4,
                init: KMeansInit::FromNms,
                ..Default::default()
            },
            &NmsConfig::default(),
        )
        .unwrap();
        assert_eq!(sorted(out), vec![0, 1, 2, 3]);
    }
}
