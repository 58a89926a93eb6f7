//! SplitMix64 (Steele, Lea & Flood 2014), the generator behind every seeded
//! draw in this crate.
//!
//! ```text
//! state = state + 0x9E3779B97F4A7C15            (mod 2^64)
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9      (mod 2^64)
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB      (mod 2^64)
//! return z ^ (z >> 31)
//! ```
//!
//! Derived draws:
//! - `next_f64`: `(next_u64 >> 11) * 2^-53`, uniform on `[0, 1)`.
//! - `below(n)`: `floor(next_f64 * n)`, uniform index on `0..n`.
//! - `gaussian`: Box-Muller cosine branch, `sqrt(-2 ln(1 - u1)) * cos(2π u2)`,
//!   consuming two uniforms per sample.

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Independent stream for `(seed, stream)`, e.g. one per class id.
    pub fn for_stream(seed: u64, stream: u64) -> Self {
        let mut mixer = Self::new(seed ^ stream.wrapping_mul(GOLDEN_GAMMA));
        Self::new(mixer.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Chooses `min(n, len)` distinct indices from `0..len` by a partial
/// Fisher-Yates shuffle: for `i` in `0..n`, swap slot `i` with slot
/// `i + below(len - i)`. Returns the first `n` slots in draw order.
pub fn sample_indices(len: usize, n: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let take = n.min(len);
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..take {
        let j = i + rng.below(len - i);
        idx.swap(i, j);
    }
    idx.truncate(take);
    idx
}
