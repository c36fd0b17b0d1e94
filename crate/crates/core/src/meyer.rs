//! Lemarié–Meyer wavelet and scaling filters in the Fourier domain.
//!
//! Transforms use `ψ̂(ξ) = ∫ ψ(y) e^{iyξ} dy`. With the phase `e^{iξ/2}` the
//! wavelet is real and symmetric about `t = 1/2`.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rustfft::FftPlanner;

const TWO_PI_3: f64 = 2.0 * PI / 3.0;
const FOUR_PI_3: f64 = 4.0 * PI / 3.0;
const EIGHT_PI_3: f64 = 8.0 * PI / 3.0;

/// Transition polynomial `ν(x) = x⁴(35 − 84x + 70x² − 20x³)`, clamped to `[0, 1]`.
pub fn nu(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    let x2 = x * x;
    x2 * x2 * (35.0 - 84.0 * x + 70.0 * x2 - 20.0 * x2 * x)
}

/// Filter bank with per-grid caches of sampled level filters.
#[derive(Debug, Default)]
pub struct MeyerFilterBank {
    cache: RwLock<HashMap<(usize, i32), Arc<[Complex64]>>>,
}

impl Clone for MeyerFilterBank {
    fn clone(&self) -> Self {
        Self::new()
    }
}

impl MeyerFilterBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn aux_polynomial(&self, x: f64) -> f64 {
        nu(x)
    }

    /// `|ψ̂(ξ)|`: real, even, supported on `2π/3 ≤ |ξ| ≤ 8π/3`.
    pub fn psi_modulus(&self, xi: f64) -> f64 {
        let a = xi.abs();
        if a <= TWO_PI_3 || a >= EIGHT_PI_3 {
            0.0
        } else if a <= FOUR_PI_3 {
            (FRAC_PI_2 * nu(3.0 * a / (2.0 * PI) - 1.0)).sin()
        } else {
            (FRAC_PI_2 * nu(3.0 * a / (4.0 * PI) - 1.0)).cos()
        }
    }

    pub fn psi_hat(&self, xi: f64) -> Complex64 {
        let b = self.psi_modulus(xi);
        if b == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(b, 0.5 * xi)
    }

    pub fn phi_hat(&self, xi: f64) -> f64 {
        let a = xi.abs();
        if a <= TWO_PI_3 {
            1.0
        } else if a >= FOUR_PI_3 {
            0.0
        } else {
            (FRAC_PI_2 * nu(3.0 * a / (2.0 * PI) - 1.0)).cos()
        }
    }

    /// Level filter on the unit-period DFT grid of length `n`: entry `m` holds
    /// `ψ̂(2^{-j}·2πm̃)` (or `φ̂(2πm̃)` for `j = -1`), `m̃` the signed bin index.
    pub fn level_filter(&self, n: usize, j: i32) -> Arc<[Complex64]> {
        if let Some(f) = self.cache.read().expect("filter cache poisoned").get(&(n, j)) {
            return Arc::clone(f);
        }
        let filter: Arc<[Complex64]> = (0..n)
            .map(|m| {
                let omega = 2.0 * PI * signed_bin(m, n) as f64;
                if j < 0 {
                    Complex64::new(self.phi_hat(omega), 0.0)
                } else {
                    self.psi_hat(omega / f64::from(1u32 << j))
                }
            })
            .collect();
        self.cache
            .write()
            .expect("filter cache poisoned")
            .insert((n, j), Arc::clone(&filter));
        filter
    }

    /// Samples of ψ on a periodic grid of `len` points with the given spacing.
    /// Entry `i` is ψ at `t = i·spacing` for `i < len/2` and `(i − len)·spacing` otherwise.
    pub fn psi_samples(&self, len: usize, spacing: f64) -> Vec<f64> {
        let period = len as f64 * spacing;
        let mut buf: Vec<Complex64> = (0..len)
            .map(|m| self.psi_hat(2.0 * PI * signed_bin(m, len) as f64 / period) / period)
            .collect();
        FftPlanner::new().plan_fft_forward(len).process(&mut buf);
        buf.iter().map(|z| z.re).collect()
    }
}

/// Signed frequency index of DFT bin `m` for length `n`, in `(-n/2, n/2]`.
pub fn signed_bin(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}
