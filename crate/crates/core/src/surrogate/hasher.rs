use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::tokenize;

pub const DEFAULT_BUCKETS: usize = 1 << 18;
pub const DEFAULT_HASH_SEED: u64 = 0x5115_e7c0_de00_0001;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Maps word unigrams and bigrams to embedding rows with seeded FNV-1a.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureHasher {
    pub n_buckets: usize,
    pub seed: u64,
}

impl Default for FeatureHasher {
    fn default() -> Self {
        FeatureHasher {
            n_buckets: DEFAULT_BUCKETS,
            seed: DEFAULT_HASH_SEED,
        }
    }
}

fn fnv1a(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET ^ seed;
    for part in parts {
        for b in *part {
            h ^= u64::from(*b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    // final avalanche so low bits depend on every byte
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

impl FeatureHasher {
    pub fn new(n_buckets: usize, seed: u64) -> Result<Self> {
        let h = FeatureHasher { n_buckets, seed };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_buckets.is_power_of_two() || self.n_buckets > u32::MAX as usize {
            return Err(Error::Validation(format!(
                "n_buckets must be a power of two below 2^32, got {}",
                self.n_buckets
            )));
        }
        Ok(())
    }

    fn bucket(&self, parts: &[&[u8]]) -> u32 {
        (fnv1a(self.seed, parts) & (self.n_buckets as u64 - 1)) as u32
    }

    /// Bucket indices of every unigram then every bigram, with repeats.
    pub fn features(&self, text: &str) -> Vec<u32> {
        let tokens = tokenize(text);
        let mut out = Vec::with_capacity(tokens.len() * 2);
        for t in &tokens {
            out.push(self.bucket(&[b"1\x1f", t.as_bytes()]));
        }
        for pair in tokens.windows(2) {
            out.push(self.bucket(&[b"2\x1f", pair[0].as_bytes(), b"\x1f", pair[1].as_bytes()]));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_and_in_range() {
        let h = FeatureHasher::new(1 << 10, 7).unwrap();
        let a = h.features("No pleural effusion.");
        assert_eq!(a, h.features("no  PLEURAL effusion ."));
        assert_eq!(a.len(), 4 + 3);
        assert!(a.iter().all(|b| (*b as usize) < 1 << 10));
        assert!(h.features("").is_empty());
    }

    #[test]
    fn seed_changes_buckets() {
        let a = FeatureHasher::new(1 << 18, 1).unwrap().features("edema");
        let b = FeatureHasher::new(1 << 18, 2).unwrap().features("edema");
        assert_ne!(a, b);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(FeatureHasher::new(1000, 0).is_err());
    }
}
