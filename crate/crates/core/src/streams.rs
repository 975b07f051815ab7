//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by
//! `(seed, kind, replica)` and positioned on stream `index`. ChaCha streams
//! are independent by construction, so the increments of particle `n` in
//! replica `r` depend only on `(seed, r, n)` and the step number, never on
//! how many other particles or replicas were simulated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose of a stream; part of the key so unrelated draws never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKind {
    Common,
    Idiosyncratic,
    Initial,
    FeynmanKac,
    Subsample,
    Validation,
    Search,
}

impl StreamKind {
    fn tag(self) -> u64 {
        match self {
            StreamKind::Common => 0x11,
            StreamKind::Idiosyncratic => 0x22,
            StreamKind::Initial => 0x33,
            StreamKind::FeynmanKac => 0x44,
            StreamKind::Subsample => 0x55,
            StreamKind::Validation => 0x66,
            StreamKind::Search => 0x77,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for `(seed, kind, replica)` positioned on stream `index`.
pub fn stream(seed: u64, kind: StreamKind, replica: u64, index: u64) -> ChaCha8Rng {
    let key = splitmix(splitmix(splitmix(seed) ^ kind.tag()) ^ replica);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
