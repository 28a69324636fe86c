//! Seed derivation.
//!
//! Every stochastic component draws from its own ChaCha8 stream whose seed
//! is `splitmix64(master ^ fnv1a64(label))`. Component labels are fixed
//! strings ("theta", "rr", "noise", ...), so enabling or disabling one
//! generator never shifts the stream of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_seed(master: u64, label: &str) -> u64 {
    splitmix64(master ^ fnv1a64(label.as_bytes()))
}

/// Seed for the `index`-th item of a batch (e.g. one output file).
pub fn derive_indexed(master: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive_seed(master, label).wrapping_add(splitmix64(index)))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
