//! Deterministic random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream keyed
//! by `(seed, stage, index)`. ChaCha is counter based, so a stream can be
//! opened directly for any bootstrap draw or Monte Carlo replication and
//! the result does not depend on how the work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which part of the pipeline a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stage {
    /// Plug-in bootstrap draws (also the first RMS stage).
    Pia = 1,
    /// Second-stage RMS bootstrap draws.
    Rms = 2,
    /// The uniform draw of the randomized decision.
    Decision = 3,
    /// Data generation inside a Monte Carlo replication.
    Data = 4,
    /// Probe simulations.
    Probe = 5,
}

const INDEX_BITS: u32 = 48;

/// Opens the stream for `(seed, stage, index)`.
///
/// `index` must fit in 48 bits.
pub fn stream(seed: u64, stage: Stage, index: u64) -> ChaCha8Rng {
    debug_assert!(index < 1 << INDEX_BITS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stage as u64) << INDEX_BITS) | index);
    rng
}

/// Derives a child seed, used to give each Monte Carlo replication its own
/// independent pipeline seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
