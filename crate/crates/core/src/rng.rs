//! Seeded Gaussian streams.
//!
//! Stream seeds come from [`derive_stream`], a SplitMix64-style mix of `(seed, index)`.
//! Draws come from the ChaCha8 keystream, which is counter based, so a stream is a
//! pure function of its seed. Normals use the Box–Muller transform.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Weyl increment of SplitMix64 (odd, ⌊2⁶⁴/φ⌋).
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
pub const MIX_MUL_1: u64 = 0xBF58_476D_1CE4_E5B9;
pub const MIX_MUL_2: u64 = 0x94D0_49BB_1331_11EB;

/// SplitMix64 finalizer; a bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_MUL_1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_MUL_2);
    z ^ (z >> 31)
}

/// `mix64(seed + mix64(γ·(index + 1)))`. Every step is a bijection in `index`, so
/// distinct indices never collide for a fixed seed.
pub fn derive_stream(seed: u64, index: u64) -> u64 {
    let salt = mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    mix64(seed.wrapping_add(salt))
}

#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}
