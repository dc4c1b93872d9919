//! Named random substreams derived from a single master seed.
//!
//! Every consumer of randomness gets its own ChaCha stream keyed by the
//! master seed, so adding a new consumer never shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Users,
    Fading,
    Placement,
    RandomAssociation,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Users => 1,
            Stream::Fading => 2,
            Stream::Placement => 3,
            Stream::RandomAssociation => 4,
        }
    }
}

pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// SplitMix64 finalizer; maps (master, index) to well-separated child seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
