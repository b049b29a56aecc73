//! Counter-keyed random streams.
//!
//! Every consumer draws from a ChaCha8 generator whose 256-bit key is built
//! from `(seed, stream, index)`. Streams never overlap, and any draw can be
//! reproduced from its key alone, so resuming a run needs only the seed and
//! the iteration counter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Crop = 2,
    Noise = 3,
    Eval = 4,
}

/// Generator for `(seed, stream, index)`.
pub fn keyed(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    keyed2(seed, stream, index, 0)
}

/// Generator for a two-level index such as `(iteration, sample)`.
pub fn keyed2(seed: u64, stream: Stream, major: u64, minor: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    key[16..24].copy_from_slice(&major.to_le_bytes());
    key[24..].copy_from_slice(&minor.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
