//! Seed derivation and the weighted draws shared by samplers and initializers.
//!
//! All randomness flows through `ChaCha8Rng`, whose stream is fixed across
//! platforms, so seeded runs reproduce bit-for-bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a parent seed with a child index into an independent child seed.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Child seed keyed by a string label (FNV-1a over the bytes).
pub fn derive_seed_from_label(parent: u64, label: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    derive_seed(parent, h)
}

/// Draws `count` distinct indices by successive weighted draws, renormalizing
/// over the remaining indices after each draw.
///
/// Once the remaining positive mass is exhausted, the rest are drawn uniformly
/// from the remaining zero-weight indices. Panics if `count > weights.len()`.
pub fn weighted_without_replacement<R: Rng>(
    weights: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<usize> {
    assert!(count <= weights.len());
    let mut remaining: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let total: f64 = remaining.iter().map(|&(_, w)| w).sum();
        let pos = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (pos, &(_, w)) in remaining.iter().enumerate() {
                acc += w;
                if w > 0.0 && target < acc {
                    chosen = Some(pos);
                    break;
                }
            }
            // Rounding can leave `target` at the very top of the range.
            chosen.unwrap_or_else(|| remaining.iter().rposition(|&(_, w)| w > 0.0).unwrap())
        } else {
            rng.random_range(0..remaining.len())
        };
        out.push(remaining.remove(pos).0);
    }
    out
}

/// Draws `count` indices with replacement from the categorical distribution
/// given by `weights` (uniform when all are zero).
pub fn weighted_with_replacement<R: Rng>(weights: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    (0..count)
        .map(|_| {
            if total <= 0.0 {
                return rng.random_range(0..weights.len());
            }
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            for (i, &w) in weights.iter().enumerate() {
                acc += w;
                if w > 0.0 && target < acc {
                    return i;
                }
            }
            weights.iter().rposition(|&w| w > 0.0).unwrap()
        })
        .collect()
}
