//! Deterministic seeded randomness.
//!
//! One ChaCha12 generator per (seed, stream) pair; every randomized step in
//! the pipeline draws from its own named stream so adding a consumer never
//! shifts the values another consumer sees. Output is stable across
//! platforms and thread counts.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Stream identifiers. The numeric values are part of the reproducibility
/// contract: changing them changes every seeded artifact.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    SynthCells = 1,
    SynthMacros = 2,
    SynthNets = 3,
    SynthFences = 4,
    GlobalScatter = 5,
    DwShuffle = 6,
    RowParity = 7,
    CellScatter = 8,
    BufferInsert = 9,
    AttackSla = 10,
    AttackCpa = 11,
    AttackAra = 12,
}

#[derive(Debug, Clone)]
pub struct DetRng(ChaCha12Rng);

impl DetRng {
    pub fn new(seed: u64, stream: Stream) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        DetRng(rng)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform value in `[0, n)`. Widening multiply keeps the draw branch-free
    /// and identical everywhere; the bias at 64 bits is negligible for
    /// simulation purposes.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Uniform integer in `[lo, hi]` inclusive.
    pub fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        lo + self.below((hi - lo + 1) as u64) as i64
    }

    /// Uniform float in `[0, 1)`.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn coin(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// First `k` elements of a shuffle of `0..n` (sample without replacement).
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx.truncate(k.min(n));
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_independent_and_stable() {
        let mut a = DetRng::new(7, Stream::DwShuffle);
        let mut b = DetRng::new(7, Stream::DwShuffle);
        let mut c = DetRng::new(7, Stream::RowParity);
        let xs: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, (0..4).map(|_| c.next_u64()).collect::<Vec<_>>());
    }

    #[test]
    fn below_stays_in_range() {
        let mut r = DetRng::new(1, Stream::SynthCells);
        for _ in 0..1000 {
            assert!(r.below(7) < 7);
        }
    }
}
