//! Uniform negative undersampling.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SampleError {
    #[error("cannot draw {wanted} negatives: only {available} unjudged-relevant candidates")]
    TooSmall { wanted: usize, available: usize },
}

/// Mixes a base seed with a stream index (splitmix64), giving every query its
/// own reproducible random stream.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws `k` distinct ids uniformly without replacement from `candidates`
/// minus `relevant`.
pub fn undersample_negatives<'a, S: AsRef<str>>(
    candidates: &'a [S],
    relevant: &HashSet<&str>,
    k: usize,
    seed: u64,
) -> Result<Vec<&'a str>, SampleError> {
    let pool: Vec<&str> = candidates
        .iter()
        .map(AsRef::as_ref)
        .filter(|id| !relevant.contains(id))
        .collect();
    if pool.len() < k {
        return Err(SampleError::TooSmall {
            wanted: k,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}
