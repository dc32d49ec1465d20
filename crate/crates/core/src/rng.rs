//! Seedable, splittable random streams.
//!
//! Every consumer of randomness receives an [`RngStream`] derived from the
//! root seed by a path of labels (e.g. `root / "batch" / step / item`). The
//! stream key is a SplitMix64 hash of that path and seeds a ChaCha8
//! counter-based generator, so results never depend on thread scheduling or
//! on how many draws sibling streams made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    key: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { key: splitmix(seed) }
    }

    /// Child stream for an integer label (item index, step number, ...).
    pub fn split(&self, label: u64) -> Self {
        Self { key: splitmix(self.key ^ splitmix(label.wrapping_add(GOLDEN))) }
    }

    /// Child stream for a string label.
    pub fn named(&self, name: &str) -> Self {
        self.split(fnv1a(name))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key)
    }
}
