//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(seed, stream, counter)`: the triple is
//! folded through the SplitMix64 finalizer, so element `i` of a noise field
//! never depends on how many other elements were generated or in which
//! order. Gaussian variates use the Box–Muller transform over two such
//! draws. The algorithm is fixed; changing it changes every seeded output.

use std::f64::consts::PI;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A keyed generator; `stream` separates independent uses of one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        CounterRng {
            key: splitmix64(splitmix64(seed) ^ stream.wrapping_mul(GOLDEN)),
        }
    }

    #[inline]
    pub fn bits(&self, counter: u64) -> u64 {
        splitmix64(self.key ^ splitmix64(counter))
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&self, counter: u64) -> f64 {
        (self.bits(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`.
    #[inline]
    pub fn uniform_open0(&self, counter: u64) -> f64 {
        ((self.bits(counter) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box–Muller on counters `2i` and `2i+1`.
    #[inline]
    pub fn normal(&self, index: u64) -> f64 {
        let u1 = self.uniform_open0(index.wrapping_mul(2));
        let u2 = self.uniform(index.wrapping_mul(2).wrapping_add(1));
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    /// Uniform in `[lo, hi]`.
    #[inline]
    pub fn uniform_range(&self, counter: u64, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform(counter)
    }
}
