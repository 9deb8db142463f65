//! Seed derivation for replicated experiments.
//!
//! Every replication draws from its own ChaCha8 stream whose seed is a hash
//! of the master seed and a list of tags (rung index, trend index,
//! replication index, ...). Streams can therefore be created in any order
//! and on any thread without coordination.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
  z = z.wrapping_add(GOLDEN);
  z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
  z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
  z ^ (z >> 31)
}

/// Folds `tags` into `master`, one SplitMix64 round per tag.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
  tags
    .iter()
    .fold(splitmix64(master), |acc, &tag| splitmix64(acc ^ splitmix64(tag.wrapping_add(GOLDEN))))
}

pub fn stream(seed: u64) -> ChaCha8Rng {
  ChaCha8Rng::seed_from_u64(seed)
}
