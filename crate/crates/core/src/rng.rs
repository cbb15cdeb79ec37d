//! Seeded random streams.
//!
//! One master seed fans out into independent ChaCha8 streams (same key,
//! different stream ids), so parameter initialization, dropout masks and
//! synthetic data never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Dropout = 2,
    Data = 3,
}

/// Generator for stream `stream` under `seed`.
pub fn stream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// The three independent generators of one run.
#[derive(Clone, Debug)]
pub struct SeedBundle {
    pub seed: u64,
    pub init: Rng,
    pub dropout: Rng,
    pub data: Rng,
}

/// Derives all random streams of a run from `seed`.
pub fn set_seed(seed: u64) -> SeedBundle {
    SeedBundle {
        seed,
        init: stream(seed, Stream::Init),
        dropout: stream(seed, Stream::Dropout),
        data: stream(seed, Stream::Data),
    }
}
