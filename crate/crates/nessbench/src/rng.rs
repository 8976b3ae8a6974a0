//! Seeded random-number streams.
//!
//! Every source of randomness in the toolkit is derived from a single master
//! seed through named substreams, so that independent stages (splitting,
//! partitioning, drop-edge, negative sampling, weight init, dynamic samplers)
//! never share or perturb each other's state. Stream derivation is fixed:
//! ChaCha8 seeded with the master seed, with the substream id as the ChaCha
//! stream number.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named substreams of the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Split = 1,
    Partition = 2,
    DropEdge = 3,
    NegSample = 4,
    Init = 5,
    Sampler = 6,
    SbmEdges = 7,
    SbmFeatures = 8,
}

/// Derive the RNG for a named substream of `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
