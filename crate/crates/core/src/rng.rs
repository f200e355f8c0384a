//! Deterministic, portable randomness.
//!
//! Every random draw in the simulator comes from a [`SeededRng`], a ChaCha8
//! stream whose key is derived from the experiment seed plus a path of
//! stream tags (module, round, node, ...). Two draws that live on different
//! paths never share a stream, so changing one scenario knob leaves unrelated
//! draws untouched.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream tags for sub-stream derivation.
pub mod stream {
    pub const PROFILES: u64 = 0x01;
    pub const HASH_POWER: u64 = 0x02;
    pub const LATENCY: u64 = 0x03;
    pub const TOPOLOGY: u64 = 0x04;
    pub const ROUND: u64 = 0x05;
    pub const REWIRE: u64 = 0x06;
    pub const ORDER: u64 = 0x07;
    pub const ADOPTERS: u64 = 0x08;
    pub const RELAY_TREE: u64 = 0x09;
    pub const EMBEDDING: u64 = 0x0a;
    pub const STRETCH_PAIRS: u64 = 0x0b;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// ChaCha8 generator with explicit seed-path derivation.
#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::derive(seed, &[])
    }

    /// Independent stream for `(seed, path...)`.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        let mut state = seed;
        let mut acc = splitmix64(&mut state);
        for &tag in path {
            state ^= acc.rotate_left(17) ^ tag.wrapping_mul(GOLDEN);
            acc = splitmix64(&mut state);
        }
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self {
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    /// Uniform `f64` in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform `f64` in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform index in `0..n`, unbiased (Lemire's widening multiply).
    /// Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index range must be nonempty");
        let n = n as u64;
        loop {
            let x = self.inner.next_u64();
            let m = (x as u128) * (n as u128);
            let lo = m as u64;
            if lo >= n || lo >= n.wrapping_neg() % n {
                return (m >> 64) as usize;
            }
        }
    }

    /// Exp(1) variate by inversion.
    pub fn exp1(&mut self) -> f64 {
        -libm::log(1.0 - self.unit())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Fisher-Yates shuffle built on [`SeededRng::index`].
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> alloc::vec::Vec<usize> {
        assert!(k <= n);
        let mut pool: alloc::vec::Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::derive(7, &[stream::ROUND, 3]);
        let mut b = SeededRng::derive(7, &[stream::ROUND, 3]);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn paths_are_independent() {
        let mut a = SeededRng::derive(7, &[stream::ROUND, 3]);
        let mut b = SeededRng::derive(7, &[stream::ROUND, 4]);
        let mut c = SeededRng::derive(7, &[3, stream::ROUND]);
        let x = a.next_u64();
        assert_ne!(x, b.next_u64());
        assert_ne!(x, c.next_u64());
    }

    #[test]
    fn pinned_first_draw_is_platform_stable() {
        const PINNED: u64 = 15_545_712_258_050_882_650;
        const PINNED_PATH: u64 = 2_667_805_114_202_441_353;
        // Freeze the stream so an accidental change to derivation is caught.
        assert_eq!(SeededRng::new(42).next_u64(), PINNED);
        assert_eq!(SeededRng::derive(42, &[stream::ROUND, 3]).next_u64(), PINNED_PATH);
    }

    #[test]
    fn index_is_in_range_and_roughly_uniform() {
        let mut r = SeededRng::new(1);
        let mut counts = [0usize; 7];
        for _ in 0..70_000 {
            counts[r.index(7)] += 1;
        }
        for c in counts {
            assert!((9_400..10_600).contains(&c), "{c}");
        }
    }

    #[test]
    fn sample_indices_are_distinct() {
        let mut r = SeededRng::new(3);
        let mut s: Vec<usize> = r.sample_indices(50, 20);
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 20);
    }

    #[test]
    fn unit_in_range() {
        let mut r = SeededRng::new(9);
        for _ in 0..10_000 {
            let u = r.unit();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
