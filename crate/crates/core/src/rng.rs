//! Seed derivation. Every random stream in a run is derived from the run
//! seed plus a stream tag and index, so streams never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    mix64(mix64(seed ^ (stream as u64).wrapping_mul(0xA24B_AED4_963E_E407)) ^ index)
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, stream: Stream, index: u64) -> Rng {
    seeded(derive_seed(seed, stream, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    EncoderInit = 1,
    DecoderInit = 2,
    Batches = 3,
    PrototypeDraw = 4,
    HeadInit = 5,
}
