//! Counter-based random number generation.
//!
//! Every random draw in the library comes from [`CounterRng`], a SplitMix64
//! generator written in its counter form: the `n`-th output of a stream with
//! key `k` is
//!
//! ```text
//! x      = k + n * 0x9E3779B97F4A7C15          (wrapping, n starts at 1)
//! z      = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
//! z      = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output = z ^ (z >> 31)
//! ```
//!
//! so any output can be recomputed from `(key, n)` alone. Uniform doubles take
//! the top 53 bits (`(output >> 11) * 2^-53`), normals use the Box-Muller
//! cosine branch on two consecutive uniforms `u1, u2` with `u1` mapped to
//! `(0, 1]` by `1 - u`. Sub-streams are keyed by `mix(key ^ mix(id + 1))`
//! where `mix` is the finaliser above applied to its argument directly.
//!
//! The algorithm is spelled out so other implementations can reproduce the
//! exact streams behind a seed.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 in counter form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { key: seed, counter: 0 }
    }

    /// Independent stream derived from this generator's key (the counter is
    /// not consulted, so the result does not depend on how many draws have
    /// been made).
    pub fn stream(&self, id: u64) -> Self {
        Self {
            key: mix64(self.key ^ mix64(id.wrapping_add(1))),
            counter: 0,
        }
    }

    /// Output number `n` (1-based) of the stream with this key.
    pub fn at(&self, n: u64) -> u64 {
        mix64(self.key.wrapping_add(n.wrapping_mul(GOLDEN_GAMMA)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        self.at(self.counter)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller (cosine branch only).
    pub fn next_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniform integer in `0..n` by multiply-shift on the high 64 bits.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
