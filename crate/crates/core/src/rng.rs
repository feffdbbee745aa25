//! Seeded random streams.
//!
//! Every chain draws from its own ChaCha stream keyed by `(seed, purpose)` and
//! selected by the chain index, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purposes get distinct keys so that, e.g., initialization noise and
/// integration noise of the same chain never share a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Init = 1,
    Sde = 2,
    Langevin = 3,
    Projection = 4,
    Instance = 5,
    Bootstrap = 6,
    Exact = 7,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix(seed ^ splitmix(tag.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Independent stream `stream` of generator keyed by `(seed, purpose)`.
pub fn stream_rng(seed: u64, purpose: Purpose, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, purpose as u64));
    rng.set_stream(stream);
    rng
}

/// Generator used by every sampler in the crate.
pub type SimRng = ChaCha8Rng;
