//! Seeded random streams.
//!
//! Every stochastic routine draws from ChaCha20 (RFC 7539 block function, as
//! implemented by `rand_chacha`) keyed by a 64-bit seed. ChaCha is counter
//! based: a stream id selects an independent keystream for the same key, which
//! is how one seed fans out into non-overlapping sub-streams. Gaussian variates
//! come from `rand_distr::StandardNormal` (ziggurat), so a path is a pure
//! function of `(seed, stream, parameters)`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

/// Sub-stream identifiers. Keep these stable: changing one changes every
/// reproducible output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Fbm = 0,
    PriceShock = 1,
}

impl RngSeed {
    pub fn rng(self, stream: Stream) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.0);
        rng.set_stream(stream as u64);
        rng
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

pub(crate) fn standard_normals(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}
