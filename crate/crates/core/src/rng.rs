//! Seeded generators.
//!
//! All randomness flows from a master seed. Independent runs (or Monte Carlo
//! trials) get their own ChaCha stream: same key, stream id = run index. The
//! derivation is counter-based, so run `k` is reproducible in isolation and
//! independent of how many workers execute the batch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn master_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for run (or trial) `index` under `seed`.
pub fn stream_rng(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
