//! Seeded PRNG used everywhere determinism matters: parameter init, dataset
//! shuffles, batch-order shuffles, synthetic fixtures.
//!
//! xoshiro256++ seeded through splitmix64. Self-contained so that model
//! checkpoints and dataset splits stay bit-stable across dependency upgrades.

/// splitmix64: seeds the main generator and derives independent substreams.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// xoshiro256++ main generator.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    pub fn seed_from(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        Self {
            s: [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()],
        }
    }

    /// Independent substream for a named purpose, so e.g. parameter init for
    /// one tensor does not depend on how many values another tensor consumed.
    pub fn substream(seed: u64, label: &str) -> Self {
        Self::seed_from(derive_seed(seed, label))
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[0]
            .wrapping_add(self.s[3])
            .rotate_left(23)
            .wrapping_add(self.s[0]);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n) without modulo bias.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Stable derived seed for a named purpose (epoch shuffles, substreams).
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    seed ^ fnv1a(label.as_bytes())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix64_reference_vector() {
        // Published reference outputs for seed 0.
        let mut sm = SplitMix64::new(0);
        assert_eq!(sm.next_u64(), 0xE220A8397B1DCDAF);
        assert_eq!(sm.next_u64(), 0x6E789E6AA1B965F4);
        assert_eq!(sm.next_u64(), 0x06C45D188009454F);
        assert_eq!(sm.next_u64(), 0xF88BB8A8724C81EC);
    }

    #[test]
    fn xoshiro_matches_frozen_vector() {
        // Frozen against an independent evaluation of the reference algorithm.
        let mut rng = Rng::seed_from(7);
        assert_eq!(rng.next_u64(), 0x0E2C1A002AAE913D);
        assert_eq!(rng.next_u64(), 0x2C0FC8DDFA4E9E14);
        assert_eq!(rng.next_u64(), 0xB7B311B3B0D45872);
        assert_eq!(rng.next_u64(), 0x6D5D9F6A6318013C);
    }

    #[test]
    fn f64_draws_are_in_unit_interval() {
        let mut rng = Rng::seed_from(123);
        for _ in 0..10_000 {
            let x = rng.next_f64();
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn shuffle_is_seed_deterministic() {
        let mut a: Vec<u32> = (0..50).collect();
        let mut b: Vec<u32> = (0..50).collect();
        Rng::seed_from(9).shuffle(&mut a);
        Rng::seed_from(9).shuffle(&mut b);
        assert_eq!(a, b);
        let sorted = {
            let mut s = a.clone();
            s.sort_unstable();
            s
        };
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn substreams_differ_by_label() {
        let a = Rng::substream(1, "alpha").next_u64();
        let b = Rng::substream(1, "beta").next_u64();
        assert_ne!(a, b);
    }

    #[test]
    fn below_covers_range() {
        let mut rng = Rng::seed_from(4);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            seen[rng.below(7)] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
