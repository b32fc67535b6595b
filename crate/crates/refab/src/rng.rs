//! Seeded generators with one independent stream per named stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Generator for `stage` under `seed`; distinct stages never share a stream.
pub fn stage_rng(seed: u64, stage: &str) -> StageRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(stage));
    rng
}

/// Generator for the `attempt`-th retry of `stage`.
pub fn retry_rng(seed: u64, stage: &str, attempt: u64) -> StageRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(fnv1a(stage));
    rng
}
