//! Weighted tensorized Besov norms and their mixed and hyperbolic relatives.
//!
//! Level exponents use `ĵ = max(j, 0)`, so the scaling blocks at level `−1` are
//! weighted like level `0`. Coefficients are in `L∞` normalization.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::grid::{FieldRealization, GridSpec};
use crate::hyperbolic::{lp_block_hyperbolic, max_lp_level, HyperbolicCoeffs};
use crate::meyer::MeyerFilterBank;

/// `(s, α, p, q)`; `p` and `q` may be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesovSpec {
    pub s: f64,
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
}

impl BesovSpec {
    pub fn new(s: f64, alpha: f64, p: f64, q: f64) -> Result<Self> {
        let spec = Self { s, alpha, p, q };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.s.is_finite() {
            return Err(invalid("s", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha", format!("{} is outside [0, 1]", self.alpha)));
        }
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(v > 0.0) {
                return Err(invalid(name, format!("{v} must be positive or infinite")));
            }
        }
        Ok(())
    }
}

/// Smoothness scales compared by the embeddings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    /// Exponent `(1+α)max(ĵ) + (1−α)min(ĵ)`.
    Tensorized { alpha: f64 },
    /// Exponent `ĵ₁ + ĵ₂`.
    Mixed,
    /// Exponent `max(ĵ)`.
    Hyperbolic,
}

impl Scale {
    pub fn exponent(self, j1: i32, j2: i32) -> f64 {
        let (a, b) = (f64::from(j1.max(0)), f64::from(j2.max(0)));
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        match self {
            Scale::Tensorized { alpha } => (1.0 + alpha) * hi + (1.0 - alpha) * lo,
            Scale::Mixed => a + b,
            Scale::Hyperbolic => hi,
        }
    }
}

/// `2^{((1+α)max(j̄) + (1−α)min(j̄))·s}`.
pub fn weight(spec: &BesovSpec, j1: i32, j2: i32) -> f64 {
    (Scale::Tensorized { alpha: spec.alpha }.exponent(j1, j2) * spec.s).exp2()
}

/// `(Σ_k |c|^p)^{1/p}`, or `max |c|` for `p = ∞`.
fn lp_sum<'a>(values: impl Iterator<Item = &'a f64>, p: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0f64, |m, v| m.max(v.abs()))
    } else {
        values.map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `(Σ_j̄ (2^{σ·e(j̄)·r} · a_j̄)^q)^{1/q}`, or the max-form for `q = ∞`.
fn lq_levels(levels: impl Iterator<Item = ((i32, i32), f64)>, scale: Scale, r: f64, sign: f64, q: f64) -> f64 {
    let weighted = levels.map(|((j1, j2), a)| {
        if a == 0.0 {
            0.0
        } else {
            (sign * scale.exponent(j1, j2) * r).exp2() * a
        }
    });
    if q.is_infinite() {
        weighted.fold(0.0f64, f64::max)
    } else {
        weighted.map(|w| w.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

fn coefficient_norm(coeffs: &HyperbolicCoeffs, scale: Scale, r: f64, p: f64, q: f64, sign: f64) -> f64 {
    let levels = coeffs.iter_blocks().map(|((j1, j2), b)| {
        let dims = f64::from(j1.max(0) + j2.max(0));
        let factor = if p.is_infinite() { 1.0 } else { (-dims / p).exp2() };
        ((j1, j2), factor * lp_sum(b.iter(), p))
    });
    lq_levels(levels, scale, r, sign, q)
}

/// Sequence quasi-norm with the smoothness factor `2^{−(…)sq}` as printed:
/// `(Σ_j̄ 2^{−(j₁+j₂)q/p} 2^{−((1+α)max+(1−α)min)sq} (Σ_k |c|^p)^{q/p})^{1/q}`.
pub fn sequence_norm(coeffs: &HyperbolicCoeffs, spec: &BesovSpec) -> f64 {
    coefficient_norm(coeffs, Scale::Tensorized { alpha: spec.alpha }, spec.s, spec.p, spec.q, -1.0)
}

/// Sequence norm of `t^{s,α}_{p,q}b` with the smoothness weight `2^{+(…)s}`, the
/// convention under which the embeddings and the Hölder characterization hold.
pub fn smoothness_norm(coeffs: &HyperbolicCoeffs, spec: &BesovSpec) -> f64 {
    scale_norm(coeffs, Scale::Tensorized { alpha: spec.alpha }, spec.s, spec.p, spec.q)
}

/// Sequence norm on an arbitrary scale at smoothness `r`, positive weight.
pub fn scale_norm(coeffs: &HyperbolicCoeffs, scale: Scale, r: f64, p: f64, q: f64) -> f64 {
    coefficient_norm(coeffs, scale, r, p, q, 1.0)
}

/// `(Σ_j̄ 2^{((1+α)max+(1−α)min)sq} ‖Δ_j̄ f‖_p^q)^{1/q}` over `0 ≤ j₁, j₂ ≤ J`, with
/// `‖g‖_p = ((1/(n₁n₂)) Σ |g|^p)^{1/p}`.
pub fn lp_norm(field: &FieldRealization, spec: &BesovSpec, max_level: i32, bank: &MeyerFilterBank) -> Result<f64> {
    spec.validate()?;
    let (n1, n2) = field.values.dim();
    let cells = (n1 * n2) as f64;
    let mut levels = Vec::new();
    for j1 in 0..=max_level {
        for j2 in 0..=max_level {
            let block = lp_block_hyperbolic(field, j1, j2, bank)?;
            let norm = if spec.p.is_infinite() {
                lp_sum(block.values.iter(), spec.p)
            } else {
                lp_sum(block.values.iter(), spec.p) * cells.powf(-1.0 / spec.p)
            };
            levels.push(((j1, j2), norm));
        }
    }
    Ok(lq_levels(
        levels.into_iter(),
        Scale::Tensorized { alpha: spec.alpha },
        spec.s,
        1.0,
        spec.q,
    ))
}

/// Deepest level accepted by [`lp_norm`] on a grid.
pub fn max_lp_norm_level(grid: &GridSpec) -> i32 {
    max_lp_level(grid.n1.min(grid.n2))
}

/// Growth allowed for the running maximum over the top three levels.
pub const MEMBERSHIP_GROWTH: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderVerdict {
    pub is_member: bool,
    /// `sup_j̄,k̄ 2^{((1+α)max+(1−α)min)s} |c_{j̄,k̄}|`.
    pub sup_constant: f64,
    /// Running maximum of the weighted coefficients over levels with `max(ĵ) ≤ ℓ`.
    pub running_max: Vec<f64>,
}

/// Weighted sup of the coefficients and the finite-depth verdict
/// `M(J) ≤ 1.2·M(J−3)`, `M(ℓ)` the running maximum up to `max(ĵ) = ℓ`.
pub fn holder_membership(coeffs: &HyperbolicCoeffs, s: f64, alpha: f64) -> HolderVerdict {
    let scale = Scale::Tensorized { alpha };
    let top = coeffs.max_level.max(0) as usize;
    let mut per_level = vec![0.0f64; top + 1];
    for ((j1, j2), b) in coeffs.iter_blocks() {
        let w = (scale.exponent(j1, j2) * s).exp2();
        let m = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l = j1.max(j2).max(0) as usize;
        per_level[l] = per_level[l].max(w * m);
    }
    let mut running_max = Vec::with_capacity(per_level.len());
    let mut acc = 0.0f64;
    for v in per_level {
        acc = acc.max(v);
        running_max.push(acc);
    }
    let last = running_max[top];
    let base = running_max[top.saturating_sub(3)];
    HolderVerdict {
        is_member: last <= MEMBERSHIP_GROWTH * base,
        sup_constant: last,
        running_max,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inequality {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingReport {
    /// `T^{s,α}`.
    pub tensorized: f64,
    /// `S^{(1+α)s}`.
    pub mixed_upper: f64,
    /// `S^{s}`.
    pub mixed_lower: f64,
    /// `B̃^{2s}`.
    pub hyperbolic_upper: f64,
    /// `B̃^{(1+α)s}`.
    pub hyperbolic_lower: f64,
    pub inequalities: Vec<Inequality>,
}

impl EmbeddingReport {
    pub fn all_hold(&self) -> bool {
        self.inequalities.iter().all(|i| i.holds)
    }
}

/// Relative slack for the embedding inequalities.
pub const EMBEDDING_TOL: f64 = 1e-12;

/// The five sequence norms of the two embedding chains and the four inequalities
/// `T ≤ S^{(1+α)s}`, `S^s ≤ T`, `T ≤ B̃^{2s}`, `B̃^{(1+α)s} ≤ T`.
pub fn embedding_check(coeffs: &HyperbolicCoeffs, s: f64, alpha: f64, p: f64, q: f64) -> EmbeddingReport {
    let t = scale_norm(coeffs, Scale::Tensorized { alpha }, s, p, q);
    let su = scale_norm(coeffs, Scale::Mixed, (1.0 + alpha) * s, p, q);
    let sl = scale_norm(coeffs, Scale::Mixed, s, p, q);
    let hu = scale_norm(coeffs, Scale::Hyperbolic, 2.0 * s, p, q);
    let hl = scale_norm(coeffs, Scale::Hyperbolic, (1.0 + alpha) * s, p, q);
    let check = |name, lhs: f64, rhs: f64| Inequality {
        name,
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + EMBEDDING_TOL),
    };
    EmbeddingReport {
        tensorized: t,
        mixed_upper: su,
        mixed_lower: sl,
        hyperbolic_upper: hu,
        hyperbolic_lower: hl,
        inequalities: vec![
            check("T^{s,a} <= S^{(1+a)s}", t, su),
            check("S^{s} <= T^{s,a}", sl, t),
            check("T^{s,a} <= B^{2s}", t, hu),
            check("B^{(1+a)s} <= T^{s,a}", hl, t),
        ],
    }
}

/// Unit-square grid carrying levels up to `J`.
fn witness_grid(max_level: i32) -> Result<GridSpec> {
    GridSpec::square(1usize << (max_level + 2), 1.0)
}

/// Two coefficient sets that attain the embedding bounds:
///
/// * a tensor `u ⊗ g`, nonzero only at `j₁ = 0`, with amplitudes
///   `2^{ĵ₂/p} 2^{−(1+α)sĵ₂} (ĵ₂+1)^{−2/q}` at `k̄ = 0`;
/// * a diagonal lacunary set at `(j, j)`, `1 ≤ j ≤ J`, with amplitudes
///   `2^{2j} j^{−2/q} 2^{−2js} 2^{−2(1−1/p)j}` at `k̄ = 0`.
pub fn optimality_witnesses(spec: &BesovSpec, max_level: i32) -> Result<(HyperbolicCoeffs, HyperbolicCoeffs)> {
    spec.validate()?;
    if max_level < 4 {
        return Err(invalid("max_level", format!("{max_level} < 4")));
    }
    let grid = witness_grid(max_level)?;
    let (s, a) = (spec.s, spec.alpha);
    let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    let (ip, iq) = (inv(spec.p), inv(spec.q));
    let mut tensor = HyperbolicCoeffs::zeros(max_level, grid)?;
    for j2 in 0..=max_level {
        let j = f64::from(j2);
        let amp = (j * ip).exp2() * (-(1.0 + a) * s * j).exp2() * (j + 1.0).powf(-2.0 * iq);
        tensor.block_mut(0, j2)?[[0, 0]] = amp;
    }
    let mut lacunary = HyperbolicCoeffs::zeros(max_level, grid)?;
    for jj in 1..=max_level {
        let j = f64::from(jj);
        let amp = (2.0 * j).exp2() * j.powf(-2.0 * iq) * (-2.0 * j * s).exp2() * (-2.0 * (1.0 - ip) * j).exp2();
        lacunary.block_mut(jj, jj)?[[0, 0]] = amp;
    }
    Ok((tensor, lacunary))
}
