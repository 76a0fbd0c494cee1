//! Deterministic stream derivation.
//!
//! Every random quantity in a run is drawn from a ChaCha stream whose seed is
//! a SplitMix64 hash of the master seed and a list of context words (domain
//! tag, drop index, PRB, BS, user, ...). Streams are therefore independent of
//! scheduling order and thread count, which is what makes runs bit-identical
//! under any parallelism level.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain separation tags for derived streams.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum StreamKind {
    Drop = 0x01,
    LargeScale = 0x02,
    UserAttrs = 0x03,
    FadingMu = 0x04,
    FadingSu = 0x05,
    PilotNoise = 0x06,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Hash the master seed with a sequence of context words.
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &w in words {
        h = splitmix64(h ^ w);
    }
    h
}

/// ChaCha stream for `(master, kind, words...)`.
pub fn stream(master: u64, kind: StreamKind, words: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix64(master ^ (kind as u64).rotate_left(17));
    for &w in words {
        h = splitmix64(h ^ w);
    }
    ChaCha8Rng::seed_from_u64(h)
}
