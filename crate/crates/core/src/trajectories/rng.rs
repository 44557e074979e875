//! Per-trajectory random streams.
//!
//! Every trajectory draws from its own ChaCha8 stream selected by
//! `(seed, trajectory index)`; draws inside a trajectory are consumed in a
//! fixed order, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrajectoryRng = ChaCha8Rng;

pub fn trajectory_rng(seed: u64, index: u64) -> TrajectoryRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
