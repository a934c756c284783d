//! Seeded random substreams.
//!
//! Each unit of work (a case, an epoch, a batch) derives its own ChaCha
//! stream from `(seed, domain, index)`, so results do not depend on the
//! order in which work items are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream domains. Distinct constants keep substreams of different
/// purposes disjoint even when they share a seed and index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    OperatingCondition = 1,
    Schedule = 2,
    SplitTrain = 10,
    SplitVal = 11,
    SplitTest = 12,
    Init = 20,
    Shuffle = 21,
    Dropout = 22,
    Generalization = 30,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a domain tag and an index into a new 64-bit seed.
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    let a = splitmix64(seed ^ splitmix64(domain as u64));
    splitmix64(a ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn substream(seed: u64, domain: Domain, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, domain, index))
}
