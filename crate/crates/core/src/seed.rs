//! Stable seed derivation and the project-wide RNG type.
//!
//! Child seeds are a pure function of `(master, label, index)`. The hash is
//! FNV-1a over the little-endian encoding followed by the SplitMix64
//! finalizer, so values are identical on every platform and toolchain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG used by every simulator. ChaCha output is value-stable across releases.
pub type SimRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed, a stream label and an index.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &master.to_le_bytes());
    h = fnv1a(h, label.as_bytes());
    // separator so ("ab", 1) and ("a", ...) cannot collide through concatenation
    h = fnv1a(h, &[0xff]);
    h = fnv1a(h, &index.to_le_bytes());
    splitmix_finalize(h)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Shorthand for `rng_from_seed(derive_seed(master, label, index))`.
pub fn child_rng(master: u64, label: &str, index: u64) -> SimRng {
    rng_from_seed(derive_seed(master, label, index))
}
