//! Keyed random substreams.
//!
//! Every random draw in a simulation comes from a ChaCha stream whose seed is
//! a hash of the master seed and a key path such as `(trial, link, tap)`.
//! Results therefore do not depend on the order in which trials run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A position in the substream tree. Cheap to copy and extend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn root(seed: u64) -> Self {
        StreamKey(splitmix64(seed ^ 0x5249_535f_5047_4131))
    }

    /// Derive a child key. Distinct labels give statistically independent streams.
    pub fn child(self, label: u64) -> Self {
        StreamKey(splitmix64(self.0 ^ splitmix64(label.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    pub fn path(self, labels: &[u64]) -> Self {
        labels.iter().fold(self, |k, &l| k.child(l))
    }

    pub fn rng(self) -> SimRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

/// Stable labels for the top-level draws of one trial.
pub mod labels {
    pub const BLOCKAGE: u64 = 1;
    pub const LINK: u64 = 2;
    pub const PHASES: u64 = 3;
    pub const NOISE: u64 = 4;
}
