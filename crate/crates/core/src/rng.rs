//! Seeded random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream keyed by the
//! experiment seed and the episode index, so adding draws in one place never
//! shifts the numbers seen elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent purposes that draw random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Arrivals = 1,
    Travel = 2,
    Exploration = 3,
    NetworkInit = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of episode `episode` derived from the experiment seed.
pub fn episode_seed(seed: u64, episode: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ episode.wrapping_mul(0xd134_2543_de82_ef95))
}

/// Seed of evaluation run `run`; disjoint from the training episodes.
pub fn evaluation_seed(seed: u64, run: u64) -> u64 {
    episode_seed(seed ^ 0x5eed_e7a1_0000_0000, run)
}

pub fn stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (k, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(seed.wrapping_add(k as u64)).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream as u64);
    rng
}
