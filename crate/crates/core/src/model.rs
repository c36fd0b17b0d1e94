//! Spectral density root, harmonizable kernel and quadrature oracles for the
//! second-order structure of the field.
//!
//! Every second moment reduces to the rectangular-increment variance
//! `V(h₁,h₂) = 16 ∫ sin²(h₁ξ₁/2) sin²(h₂ξ₂/2) φ⁻² dξ`. Splitting the plane at the
//! diagonal and writing `ξ_min = u·ξ_max` turns `V` into
//! `64 ∫₀¹ u^{-(2H⁻+1)} [J(u; h₁, h₂) + J(u; h₂, h₁)] du`, where the inner radial
//! integral `J` has a closed form. The remaining integral in the angular variable
//! `u` is done adaptively on dyadic bands toward the axis `u = 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::meyer::MeyerFilterBank;
use crate::quad::{integrate, integrate_pieces, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct FieldParams {
    alpha: f64,
    hurst: f64,
    h_plus: f64,
    h_minus: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    alpha: f64,
    hurst: f64,
}

impl TryFrom<RawParams> for FieldParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        FieldParams::new(raw.alpha, raw.hurst)
    }
}

impl From<FieldParams> for RawParams {
    fn from(p: FieldParams) -> Self {
        RawParams {
            alpha: p.alpha,
            hurst: p.hurst,
        }
    }
}

impl FieldParams {
    pub fn new(alpha: f64, hurst: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(invalid("alpha", format!("{alpha} is outside [0, 1]")));
        }
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(invalid("hurst", format!("{hurst} is outside (0, 1)")));
        }
        Ok(Self {
            alpha,
            hurst,
            h_plus: (1.0 + alpha) * hurst,
            h_minus: (1.0 - alpha) * hurst,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn hurst(&self) -> f64 {
        self.hurst
    }
    pub fn h_plus(&self) -> f64 {
        self.h_plus
    }
    pub fn h_minus(&self) -> f64 {
        self.h_minus
    }

    /// Exponent of `φ⁻²` along the smaller frequency coordinate.
    pub(crate) fn min_exponent(&self) -> f64 {
        2.0 * self.h_minus + 1.0
    }
    /// Exponent of `φ⁻²` along the larger frequency coordinate.
    pub(crate) fn max_exponent(&self) -> f64 {
        2.0 * self.h_plus + 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: u32,
    /// Angular half-width `u = ξ_min/ξ_max` below which dyadic bands take over.
    pub axis_exclusion: f64,
    /// Number of dyadic bands toward the axes; derived from the tolerance when `None`.
    pub ring_depth: Option<u32>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            max_subdivisions: 40,
            axis_exclusion: 0.5,
            ring_depth: None,
        }
    }
}

impl QuadratureSpec {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_ring_depth(mut self, depth: u32) -> Self {
        self.ring_depth = Some(depth);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(invalid("rel_tol", "must be positive"));
        }
        if !(self.abs_tol > 0.0) {
            return Err(invalid("abs_tol", "must be positive"));
        }
        if self.max_subdivisions < 1 {
            return Err(invalid("max_subdivisions", "must be at least 1"));
        }
        if !(self.axis_exclusion > 0.0 && self.axis_exclusion <= 1.0) {
            return Err(invalid("axis_exclusion", "must lie in (0, 1]"));
        }
        if self.ring_depth == Some(0) {
            return Err(invalid("ring_depth", "must be at least 1"));
        }
        Ok(())
    }
}

fn check_frequency(xi1: f64, xi2: f64) -> Result<()> {
    if xi1 == 0.0 || xi2 == 0.0 {
        return Err(Error::Domain(format!(
            "spectral density root undefined on the axes (ξ = ({xi1}, {xi2}))"
        )));
    }
    Ok(())
}

/// `φ(ξ) = min(|ξ₁|,|ξ₂|)^{H⁻+1/2} · max(|ξ₁|,|ξ₂|)^{H⁺+1/2}`.
pub fn spectral_density_root(params: &FieldParams, xi1: f64, xi2: f64) -> Result<f64> {
    check_frequency(xi1, xi2)?;
    let (lo, hi) = min_max(xi1.abs(), xi2.abs());
    Ok(lo.powf(params.h_minus + 0.5) * hi.powf(params.h_plus + 0.5))
}

/// `K_x(ξ) = (e^{ix₁ξ₁} − 1)(e^{ix₂ξ₂} − 1) / φ(ξ)`.
pub fn kernel(params: &FieldParams, x1: f64, x2: f64, xi1: f64, xi2: f64) -> Result<Complex64> {
    let phi = spectral_density_root(params, xi1, xi2)?;
    let e1 = Complex64::from_polar(1.0, x1 * xi1) - 1.0;
    let e2 = Complex64::from_polar(1.0, x2 * xi2) - 1.0;
    Ok(e1 * e2 / phi)
}

fn min_max(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// `(e^{εL} − 1)/ε`, continuous at `ε = 0`.
fn expm1_ratio(eps: f64, l: f64) -> f64 {
    let y = eps * l;
    if y.abs() < 1e-5 {
        l * (1.0 + y * (0.5 + y / 6.0))
    } else {
        y.exp_m1() / eps
    }
}

/// `(k^β − k²)/ε` with `ε = β − 2`.
fn shifted_power(k: f64, eps: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k * k * expm1_ratio(eps, k.ln())
    }
}

/// `∫₀^∞ sin²(at/2) sin²(bt/2) t^{-1-β} dt` for `a, b ≥ 0`, `0 < β < 4`.
///
/// Uses `∫₀^∞ (1 − cos kt) t^{-1-β} dt = π|k|^β / (2Γ(1+β) sin(πβ/2))`, continued
/// analytically through `β = 2`: the four-term combination has vanishing zeroth and
/// second moments in `k`, so the pole cancels.
pub(crate) fn pair_kernel(a: f64, b: f64, beta: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let eps = beta - 2.0;
    let half_eps = 0.5 * PI * eps;
    let sin_ratio = if eps.abs() < 1e-6 {
        0.5 * PI * (1.0 - half_eps * half_eps / 6.0)
    } else {
        half_eps.sin() / eps
    };
    let prefactor = -PI / (8.0 * gamma(1.0 + beta) * sin_ratio);

    let (lo, hi) = min_max(a, b);
    let x = lo / hi;
    let sum = if x < 0.25 {
        // Binomial series in x avoids the cancellation among hi, hi(1+x), hi(1-x).
        let hi_beta = hi.powf(beta);
        let x2 = x * x;
        let mut series = x2 * (0.5 * (beta + 1.0) * hi_beta + shifted_power(hi, eps));
        // T_n = hi^β β(β−1) Π_{i=3}^{2n−1} (β − i) / (2n)! for n ≥ 2.
        let mut coeff = hi_beta * beta * (beta - 1.0) * (beta - 3.0) / 24.0;
        let mut xp = x2 * x2;
        series += coeff * xp;
        for n in 3..64 {
            let m = (2 * n) as f64;
            coeff *= (beta - (m - 2.0)) * (beta - (m - 1.0)) / ((m - 1.0) * m);
            xp *= x2;
            let term = coeff * xp;
            series += term;
            if term.abs() <= 1e-18 * series.abs() {
                break;
            }
        }
        shifted_power(lo, eps) - series
    } else {
        shifted_power(a, eps) + shifted_power(b, eps)
            - 0.5 * shifted_power(a + b, eps)
            - 0.5 * shifted_power((a - b).abs(), eps)
    };
    prefactor * sum
}

/// Angular integral `∫₀¹ u^{-a} J(u; p, q) du` on dyadic bands toward `u = 0`.
fn angular_integral(params: &FieldParams, p: f64, q: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    let beta = 4.0 * params.hurst;
    let a = params.min_exponent();
    let depth = ring_depth(params, p, q, quad);
    let f = |u: f64| u.powf(-a) * pair_kernel(p * u, q, beta);

    let kink = q / p;
    let mut total = Estimate::ZERO;
    // Band errors add up, so each band gets a share of the budget.
    let max_bands = if quad.ring_depth.is_some() { depth } else { depth + 400 };
    let band_abs = 0.1 * quad.abs_tol / (max_bands as f64 + 2.0);
    let band_rel = 0.25 * quad.rel_tol;
    let band = |lo: f64, hi: f64| -> Result<Estimate> {
        if kink > lo && kink < hi {
            integrate_pieces(f, &[lo, kink, hi], band_rel, band_abs, quad.max_subdivisions)
        } else {
            integrate(f, lo, hi, band_rel, band_abs, quad.max_subdivisions)
        }
    };
    total = total + band(quad.axis_exclusion, 1.0)?;
    let mut hi = quad.axis_exclusion;
    // Below the last band the integrand is a power law in u (times a logarithm in
    // borderline cases); extrapolate geometrically and take the spread between the last
    // two band ratios as the error of the tail.
    let geometric = |r: f64, last: f64| {
        if r.is_finite() && r > 0.0 && r < 1.0 {
            Some(last * r / (1.0 - r))
        } else {
            None
        }
    };
    let tail_of = |b: &[f64; 3]| -> (f64, f64) {
        match geometric(b[2] / b[1], b[2]) {
            Some(tail) => (tail, (tail - geometric(b[1] / b[0], b[2]).unwrap_or(0.0)).abs()),
            None => (0.0, 0.0),
        }
    };
    let mut bands = [0.0f64; 3];
    // With an automatic depth, keep halving while the tail is still uncertain.
    let mut count = 0;
    loop {
        let lo = 0.5 * hi;
        let est = band(lo, hi)?;
        total = total + est;
        bands = [bands[1], bands[2], est.value];
        hi = lo;
        count += 1;
        if count >= max_bands || (count >= depth && {
            let (tail, err) = tail_of(&bands);
            err <= 0.05 * quad.abs_tol.max(quad.rel_tol * (total.value + tail).abs())
        }) {
            break;
        }
    }
    let (tail, err) = tail_of(&bands);
    total.value += tail;
    total.error += err;
    Ok(total)
}

/// Number of dyadic bands toward the axis: enough that the neglected power-law tail
/// is far below `rel_tol`, plus the octaves needed to pass the kink at `u = q/p`.
fn ring_depth(params: &FieldParams, p: f64, q: f64, quad: &QuadratureSpec) -> u32 {
    let aspect = (p / q).max(q / p).log2().ceil().max(0.0) as u32;
    let base = quad.ring_depth.unwrap_or_else(|| {
        let beta = 4.0 * params.hurst;
        let decay = 1.0 + beta.min(2.0) - params.min_exponent();
        ((1e3 / quad.rel_tol).log2() / decay).ceil().clamp(10.0, 400.0) as u32
    });
    base + aspect
}

/// `E[(ΔX_{(h₁,h₂);x})²] = 16 ∫ sin²(h₁ξ₁/2) sin²(h₂ξ₂/2) φ⁻² dξ`.
pub fn increment_variance(params: &FieldParams, h1: f64, h2: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    quad.validate()?;
    if !h1.is_finite() || !h2.is_finite() {
        return Err(invalid("step", "must be finite"));
    }
    let (p, q) = (h1.abs(), h2.abs());
    if p == 0.0 || q == 0.0 {
        return Ok(Estimate::ZERO);
    }
    let total = angular_integral(params, p, q, quad)? + angular_integral(params, q, p, quad)?;
    let total = total.scale(64.0);
    if total.error > quad.abs_tol.max(quad.rel_tol * total.value.abs()) {
        return Err(Error::Quadrature {
            estimate: total.value,
            error: total.error,
        });
    }
    Ok(total)
}

/// `Var X_x = ‖K_x‖²_{L²}`; the field is the increment over the rectangle `[0, x]`.
pub fn field_variance(params: &FieldParams, x1: f64, x2: f64, quad: &QuadratureSpec) -> Result<Estimate> {
    increment_variance(params, x1, x2, quad)
}

/// `Re ∫ K_x conj(K_y) dξ`, assembled from increment variances:
/// `(1/4) Σ σ_a σ_b V(|a|, |b|)` over `a ∈ {x₁, y₁, x₁−y₁}`, `b ∈ {x₂, y₂, x₂−y₂}`,
/// signs `(+, +, −)` in each coordinate.
pub fn covariance(params: &FieldParams, x: (f64, f64), y: (f64, f64), quad: &QuadratureSpec) -> Result<Estimate> {
    covariance_with(x, y, |a, b| increment_variance(params, a, b, quad))
}

pub(crate) fn covariance_with<F>(x: (f64, f64), y: (f64, f64), mut v: F) -> Result<Estimate>
where
    F: FnMut(f64, f64) -> Result<Estimate>,
{
    // A point on an axis has an identically vanishing kernel.
    if x.0 == 0.0 || x.1 == 0.0 || y.0 == 0.0 || y.1 == 0.0 {
        return Ok(Estimate::ZERO);
    }
    let first = [(x.0, 1.0), (y.0, 1.0), (x.0 - y.0, -1.0)];
    let second = [(x.1, 1.0), (y.1, 1.0), (x.1 - y.1, -1.0)];
    let mut total = Estimate::ZERO;
    for &(a, sa) in &first {
        if a == 0.0 {
            continue;
        }
        for &(b, sb) in &second {
            if b == 0.0 {
                continue;
            }
            total = total + v(a.abs(), b.abs())?.scale(0.25 * sa * sb);
        }
    }
    Ok(total)
}

fn check_level(name: &'static str, j: i32) -> Result<()> {
    if !(0..=30).contains(&j) {
        return Err(invalid(name, format!("level {j} outside 0..=30")));
    }
    Ok(())
}

/// `E|c_{j̄,k̄}|² = ∫ |ψ̂(2^{-j₁}ξ₁)|² |ψ̂(2^{-j₂}ξ₂)|² φ⁻² dξ`.
pub fn coeff_variance_exact(
    params: &FieldParams,
    j1: i32,
    j2: i32,
    bank: &MeyerFilterBank,
    quad: &QuadratureSpec,
) -> Result<Estimate> {
    quad.validate()?;
    check_level("j1", j1)?;
    check_level("j2", j2)?;
    let s1 = f64::from(1u32 << j1);
    let s2 = f64::from(1u32 << j2);
    let lo = 2.0 * PI / 3.0;
    let mid = 4.0 * PI / 3.0;
    let hi = 8.0 * PI / 3.0;
    let (a, b) = (params.min_exponent(), params.max_exponent());
    let density = |x: f64, y: f64| {
        let (m, n) = min_max(x, y);
        m.powf(-a) * n.powf(-b)
    };
    let inner_rel = 0.1 * quad.rel_tol;
    let mut failure = None;
    let outer = |eta1: f64| -> f64 {
        let w1 = bank.psi_modulus(eta1).powi(2);
        if w1 == 0.0 {
            return 0.0;
        }
        let xi1 = s1 * eta1;
        let diag = xi1 / s2;
        let mut breaks = vec![lo, mid, hi];
        if diag > lo && diag < hi {
            breaks.push(diag);
            breaks.sort_by(f64::total_cmp);
        }
        let inner = integrate_pieces(
            |eta2: f64| bank.psi_modulus(eta2).powi(2) * density(xi1, s2 * eta2),
            &breaks,
            inner_rel,
            0.0,
            quad.max_subdivisions,
        );
        match inner {
            Ok(e) => w1 * e.value,
            Err(err) => {
                failure.get_or_insert(err);
                f64::NAN
            }
        }
    };
    let est = integrate_pieces(outer, &[lo, mid, hi], quad.rel_tol, 0.0, quad.max_subdivisions);
    if let Some(err) = failure {
        return Err(err);
    }
    // Four sign quadrants; dξ = s₁s₂ dη.
    Ok(est?.scale(4.0 * s1 * s2))
}

/// `∫_ℝ |ψ̂(η)|² |η|^{-(2γ+1)} dη`.
pub fn wavelet_moment(gamma_exp: f64, bank: &MeyerFilterBank, quad: &QuadratureSpec) -> Result<Estimate> {
    let e = 2.0 * gamma_exp + 1.0;
    let est = integrate_pieces(
        |eta: f64| bank.psi_modulus(eta).powi(2) * eta.powf(-e),
        &[2.0 * PI / 3.0, 4.0 * PI / 3.0, 8.0 * PI / 3.0],
        quad.rel_tol,
        0.0,
        quad.max_subdivisions,
    )?;
    Ok(est.scale(2.0))
}

/// Constant `c₁` of the off-diagonal law `E|c_{j̄,k̄}|² = c₁ 2^{-2(max(j̄)H⁺ + min(j̄)H⁻)}`.
pub fn scaling_constant_c1(params: &FieldParams, bank: &MeyerFilterBank, quad: &QuadratureSpec) -> Result<f64> {
    let plus = wavelet_moment(params.h_plus, bank, quad)?;
    let minus = wavelet_moment(params.h_minus, bank, quad)?;
    Ok(plus.value * minus.value)
}

/// Off-diagonal closed form of the coefficient variance, valid for `|j₁ − j₂| > 1`.
pub fn coeff_variance_power_law(params: &FieldParams, j1: i32, j2: i32, c1: f64) -> f64 {
    let (lo, hi) = (j1.min(j2) as f64, j1.max(j2) as f64);
    c1 * (-2.0 * (hi * params.h_plus + lo * params.h_minus)).exp2()
}
