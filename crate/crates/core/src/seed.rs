//! Deterministic seeding.
//!
//! Every randomized operation in the crate is driven by a [`Seed`]. Identical
//! seeds plus identical inputs give bit-identical outputs, which substitutes
//! for averaging over repeated runs. Parallel code derives one sub-seed per
//! work unit (user, category, epoch, ...) so results do not depend on worker
//! count or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Root of a deterministic random stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

// SplitMix64 step; used only to spread seed material, not as the
// generator itself.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Seed {
    /// Derive an independent sub-seed for a named stream (a stage tag, a
    /// user id, an epoch index, ...). Derivation is order-insensitive in the
    /// sense that `s.derive(a)` and `s.derive(b)` are unrelated streams.
    pub fn derive(self, stream: u64) -> Seed {
        Seed(mix(self.0 ^ mix(stream)))
    }

    /// A deterministic generator for this seed.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(value: u64) -> Self {
        Seed(value)
    }
}
