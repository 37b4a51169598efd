//! Keyed random streams.
//!
//! Every independent unit of work (one walk, one permutation replicate, one
//! training shard) draws from its own ChaCha stream addressed by a
//! `(seed, domain, key)` triple, so results never depend on how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains; keep them distinct so two subsystems sharing a seed never
/// see correlated streams.
pub mod domain {
    pub const WALK: u64 = 0x5741_4c4b;
    pub const TRAIN: u64 = 0x5452_4149;
    pub const SYNTH: u64 = 0x5359_4e54;
    pub const AUDIT: u64 = 0x4155_4449;
    pub const WIGGLE: u64 = 0x5749_4747;
    pub const PAIRS: u64 = 0x5041_4952;
    pub const PROBE: u64 = 0x5052_4f42;
    pub const TASKS: u64 = 0x5441_534b;
}

pub type StreamRng = ChaCha8Rng;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `key` within `domain`.
pub fn keyed(seed: u64, domain: u64, key: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(domain)));
    rng.set_stream(key);
    rng
}

/// Packs two 32-bit indices into one stream key.
#[inline]
pub fn pair_key(a: u64, b: u64) -> u64 {
    (a << 32) | (b & 0xFFFF_FFFF)
}

/// FNV-1a over a byte slice; used for content fingerprints.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

/// Incremental fingerprint over numeric slices.
#[derive(Debug, Clone, Copy)]
pub struct Fingerprint(u64);

impl Default for Fingerprint {
    fn default() -> Self {
        Fingerprint(0xcbf2_9ce4_8422_2325)
    }
}

impl Fingerprint {
    pub fn u64(mut self, v: u64) -> Self {
        for b in v.to_le_bytes() {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x100_0000_01b3);
        }
        self
    }

    pub fn u32s(self, vs: &[u32]) -> Self {
        vs.iter().fold(self, |f, &v| f.u64(u64::from(v)))
    }

    pub fn f32s(self, vs: &[f32]) -> Self {
        vs.iter().fold(self, |f, &v| f.u64(u64::from(v.to_bits())))
    }

    pub fn f64s(self, vs: &[f64]) -> Self {
        vs.iter().fold(self, |f, &v| f.u64(v.to_bits()))
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn keyed_streams_are_reproducible_and_distinct() {
        let a: u64 = keyed(7, domain::WALK, 3).random();
        let b: u64 = keyed(7, domain::WALK, 3).random();
        let c: u64 = keyed(7, domain::WALK, 4).random();
        let d: u64 = keyed(7, domain::TRAIN, 3).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
