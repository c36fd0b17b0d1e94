//! Hyperbolic (tensor-product) Meyer wavelet analysis and Littlewood–Paley blocks.
//!
//! A grid of `n₁ × n₂` samples is read as one period of a function on the unit
//! torus, in coordinates `t = (x − x_min)/(x_max − x_min)`. With Fourier
//! coefficients `F_m` of the samples, the coefficient in `L∞` normalization is
//!
//! `c_{j̄,k̄} = 2^{j₁+j₂} ∫ f(t) ψ(2^{j₁}t₁ − k₁) ψ(2^{j₂}t₂ − k₂) dt
//!          = Σ_m F_m ψ̂(2π m₁ 2^{-j₁}) ψ̂(2π m₂ 2^{-j₂}) e^{2πi(m₁k₁ 2^{-j₁} + m₂k₂ 2^{-j₂})}`,
//!
//! an inverse DFT of the spectrum folded modulo `2^{ĵ₁} × 2^{ĵ₂}`, where
//! `ĵ = max(j, 0)`. Level `−1` uses `φ̂` and holds a single translation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{FieldRealization, GridSpec, Method};
use crate::meyer::{nu, signed_bin, MeyerFilterBank};
use crate::model::FieldParams;

/// Width of the taper ramp, as a fraction of each axis, for non-periodic analysis.
pub const TAPER_FRACTION: f64 = 0.125;
/// Coefficients excluded at each edge beyond the taper zone.
pub const EDGE_MARGIN: usize = 2;

/// Number of translations per axis at level `j`.
pub fn block_len(j: i32) -> usize {
    1usize << j.max(0)
}

/// Deepest analysis level for `n` samples per axis: `⌊log₂ n⌋ − 2`.
pub fn max_analysis_level(n: usize) -> i32 {
    (usize::BITS - 1 - n.leading_zeros()) as i32 - 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicCoeffs {
    pub max_level: i32,
    /// Blocks for `(j₁, j₂) ∈ {−1..=J}²`, row-major in `(j₁, j₂)`.
    blocks: Vec<Array2<f64>>,
    pub grid: GridSpec,
    pub params: Option<FieldParams>,
    pub seed: u64,
    /// Taper fraction used before analysis; zero for periodic analysis.
    pub taper: f64,
}

impl HyperbolicCoeffs {
    pub fn zeros(max_level: i32, grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        check_max_level(max_level, &grid)?;
        let side = (max_level + 2) as usize;
        let blocks = (0..side * side)
            .map(|idx| {
                let j1 = (idx / side) as i32 - 1;
                let j2 = (idx % side) as i32 - 1;
                Array2::zeros((block_len(j1), block_len(j2)))
            })
            .collect();
        Ok(Self {
            max_level,
            blocks,
            grid,
            params: None,
            seed: 0,
            taper: 0.0,
        })
    }

    fn index(&self, j1: i32, j2: i32) -> Result<usize> {
        for j in [j1, j2] {
            if j < -1 || j > self.max_level {
                return Err(Error::LevelTooDeep {
                    level: j,
                    max: self.max_level,
                });
            }
        }
        Ok((j1 + 1) as usize * (self.max_level + 2) as usize + (j2 + 1) as usize)
    }

    pub fn block(&self, j1: i32, j2: i32) -> Result<&Array2<f64>> {
        Ok(&self.blocks[self.index(j1, j2)?])
    }

    pub fn block_mut(&mut self, j1: i32, j2: i32) -> Result<&mut Array2<f64>> {
        let i = self.index(j1, j2)?;
        Ok(&mut self.blocks[i])
    }

    /// Replaces a block, checking its shape.
    pub fn set_block(&mut self, j1: i32, j2: i32, block: Array2<f64>) -> Result<()> {
        let i = self.index(j1, j2)?;
        if block.dim() != self.blocks[i].dim() {
            return Err(Error::ShapeMismatch(format!(
                "block ({j1},{j2}) must be {:?}, got {:?}",
                self.blocks[i].dim(),
                block.dim()
            )));
        }
        self.blocks[i] = block;
        Ok(())
    }

    pub fn get(&self, j1: i32, j2: i32, k1: usize, k2: usize) -> Result<f64> {
        let b = self.block(j1, j2)?;
        b.get((k1, k2))
            .copied()
            .ok_or_else(|| Error::IndexOutOfRange(format!("k = ({k1},{k2}) in block ({j1},{j2})")))
    }

    /// All level pairs in storage order.
    pub fn levels(&self) -> impl Iterator<Item = (i32, i32)> {
        let j = self.max_level;
        (-1..=j).flat_map(move |a| (-1..=j).map(move |b| (a, b)))
    }

    /// `((j₁, j₂), block)` in storage order.
    pub fn iter_blocks(&self) -> impl Iterator<Item = ((i32, i32), &Array2<f64>)> {
        self.levels().zip(self.blocks.iter())
    }

    /// Same levels and provenance with every coefficient mapped.
    pub fn map(&self, mut f: impl FnMut((i32, i32), f64) -> f64) -> Self {
        let mut out = self.clone();
        let levels: Vec<_> = self.levels().collect();
        for (b, lv) in out.blocks.iter_mut().zip(levels) {
            b.mapv_inplace(|v| f(lv, v));
        }
        out
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (x, y) in out.blocks.iter_mut().zip(&other.blocks) {
            Zip::from(x).and(y).for_each(|x, &y| *x = a * *x + b * y);
        }
        Ok(out)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.max_level != other.max_level || self.grid != other.grid {
            return Err(Error::ShapeMismatch(format!(
                "J = {} on {}×{} vs J = {} on {}×{}",
                self.max_level, self.grid.n1, self.grid.n2, other.max_level, other.grid.n1, other.grid.n2
            )));
        }
        Ok(())
    }

    /// Translations excluded from statistics at each edge of a level-`j` axis.
    pub fn margin(&self, j: i32) -> usize {
        if self.taper == 0.0 {
            return 0;
        }
        (block_len(j) as f64 * self.taper).ceil() as usize + EDGE_MARGIN
    }

    /// Interior translation range `lo..hi` along an axis at level `j`.
    pub fn interior(&self, j: i32) -> std::ops::Range<usize> {
        let n = block_len(j);
        let m = self.margin(j);
        if 2 * m >= n {
            0..0
        } else {
            m..n - m
        }
    }

    /// Converts to `L²` normalization: `c · 2^{-(ĵ₁+ĵ₂)/2}`.
    pub fn to_l2(&self) -> Self {
        self.map(|(j1, j2), v| v * (-0.5 * f64::from(j1.max(0) + j2.max(0))).exp2())
    }

    /// Inverse of [`HyperbolicCoeffs::to_l2`].
    pub fn from_l2(&self) -> Self {
        self.map(|(j1, j2), v| v * (0.5 * f64::from(j1.max(0) + j2.max(0))).exp2())
    }

    /// Total number of stored coefficients.
    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_max_level(max_level: i32, grid: &GridSpec) -> Result<()> {
    let max = max_analysis_level(grid.n1.min(grid.n2));
    if max_level > max || max_level < 0 {
        return Err(Error::LevelTooDeep { level: max_level, max });
    }
    Ok(())
}

/// `(1/(n₁n₂))·DFT` of the samples, indexed by bin.
fn spectrum(values: &Array2<f64>) -> Array2<Complex64> {
    let mut data = values.mapv(|v| Complex64::new(v, 0.0));
    fft2(&mut data, false);
    let scale = 1.0 / data.len() as f64;
    data.mapv_inplace(|z| z * scale);
    data
}

/// In-place 2D FFT; `inverse` uses `e^{+i}` and no normalization.
fn fft2(data: &mut Array2<Complex64>, inverse: bool) {
    let (n1, n2) = data.dim();
    let mut planner = FftPlanner::new();
    let (p1, p2) = if inverse {
        (planner.plan_fft_inverse(n1), planner.plan_fft_inverse(n2))
    } else {
        (planner.plan_fft_forward(n1), planner.plan_fft_forward(n2))
    };
    for mut row in data.rows_mut() {
        let mut buf = row.to_vec();
        p2.process(&mut buf);
        row.iter_mut().zip(buf).for_each(|(d, s)| *d = s);
    }
    for mut col in data.columns_mut() {
        let mut buf = col.to_vec();
        p1.process(&mut buf);
        col.iter_mut().zip(buf).for_each(|(d, s)| *d = s);
    }
}

/// Nonzero entries `(bin, value)` of a level filter on a length-`n` grid.
fn support(bank: &MeyerFilterBank, n: usize, j: i32) -> Vec<(usize, Complex64)> {
    bank.level_filter(n, j)
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm_sqr() > 0.0)
        .map(|(m, &v)| (m, v))
        .collect()
}

/// Smooth periodizing window: `sin²(π/2·ν(·))` ramps over `fraction` of each end.
pub fn taper_window(n: usize, fraction: f64) -> Vec<f64> {
    let w = fraction * n as f64;
    (0..n)
        .map(|i| {
            let d = (i as f64 + 0.5).min(n as f64 - i as f64 - 0.5);
            if d >= w {
                1.0
            } else {
                (0.5 * PI * nu(d / w)).sin().powi(2)
            }
        })
        .collect()
}

/// Periodic analysis: the grid is taken as one period of the field.
pub fn analyze(field: &FieldRealization, max_level: i32, bank: &MeyerFilterBank) -> Result<HyperbolicCoeffs> {
    analyze_values(field, &field.values, max_level, bank, 0.0)
}

/// Analysis of a non-periodic field after tapering over [`TAPER_FRACTION`] of each edge.
pub fn analyze_tapered(field: &FieldRealization, max_level: i32, bank: &MeyerFilterBank) -> Result<HyperbolicCoeffs> {
    let w1 = taper_window(field.grid.n1, TAPER_FRACTION);
    let w2 = taper_window(field.grid.n2, TAPER_FRACTION);
    let values = Array2::from_shape_fn(field.values.dim(), |(i, j)| field.values[[i, j]] * w1[i] * w2[j]);
    analyze_values(field, &values, max_level, bank, TAPER_FRACTION)
}

fn analyze_values(
    field: &FieldRealization,
    values: &Array2<f64>,
    max_level: i32,
    bank: &MeyerFilterBank,
    taper: f64,
) -> Result<HyperbolicCoeffs> {
    let mut out = HyperbolicCoeffs::zeros(max_level, field.grid)?;
    out.params = field.params;
    out.seed = field.seed;
    out.taper = taper;
    let (n1, n2) = values.dim();
    let spec = spectrum(values);
    let s1: Vec<_> = (-1..=max_level).map(|j| support(bank, n1, j)).collect();
    let s2: Vec<_> = (-1..=max_level).map(|j| support(bank, n2, j)).collect();
    for (j1, j2) in out.levels().collect::<Vec<_>>() {
        let (l1, l2) = (block_len(j1), block_len(j2));
        let mut folded = Array2::from_elem((l1, l2), Complex64::new(0.0, 0.0));
        for &(m1, h1) in &s1[(j1 + 1) as usize] {
            let r1 = signed_bin(m1, n1).rem_euclid(l1 as i64) as usize;
            for &(m2, h2) in &s2[(j2 + 1) as usize] {
                let r2 = signed_bin(m2, n2).rem_euclid(l2 as i64) as usize;
                folded[[r1, r2]] += spec[[m1, m2]] * h1 * h2;
            }
        }
        fft2(&mut folded, true);
        out.set_block(j1, j2, folded.mapv(|z| z.re))?;
    }
    Ok(out)
}

/// Adjoint reconstruction `f = Σ c_{j̄,k̄} ψ(2^{j₁}t₁ − k₁) ψ(2^{j₂}t₂ − k₂)`.
pub fn synthesize(coeffs: &HyperbolicCoeffs, bank: &MeyerFilterBank) -> Result<FieldRealization> {
    let grid = coeffs.grid;
    check_max_level(coeffs.max_level, &grid)?;
    let (n1, n2) = (grid.n1, grid.n2);
    let mut spec = Array2::from_elem((n1, n2), Complex64::new(0.0, 0.0));
    for ((j1, j2), block) in coeffs.iter_blocks() {
        let (l1, l2) = (block_len(j1), block_len(j2));
        if block.dim() != (l1, l2) {
            return Err(Error::ShapeMismatch(format!(
                "block ({j1},{j2}) is {:?}, expected ({l1}, {l2})",
                block.dim()
            )));
        }
        if block.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mut dft = block.mapv(|v| Complex64::new(v, 0.0));
        fft2(&mut dft, false);
        let scale = 1.0 / (l1 * l2) as f64;
        for &(m1, h1) in &support(bank, n1, j1) {
            let r1 = signed_bin(m1, n1).rem_euclid(l1 as i64) as usize;
            for &(m2, h2) in &support(bank, n2, j2) {
                let r2 = signed_bin(m2, n2).rem_euclid(l2 as i64) as usize;
                spec[[m1, m2]] += (h1 * h2).conj() * dft[[r1, r2]] * scale;
            }
        }
    }
    fft2(&mut spec, true);
    let values = spec.mapv(|z| z.re);
    Ok(FieldRealization {
        values,
        grid,
        params: coeffs.params,
        seed: coeffs.seed,
        method: Method::External,
    })
}

/// Littlewood–Paley profile `θ₀(ξ) = φ̂(2πξ/3)`: 1 for `|ξ| ≤ 1`, 0 for `|ξ| ≥ 2`.
pub fn lp_profile(bank: &MeyerFilterBank, xi: f64) -> f64 {
    bank.phi_hat(2.0 * PI * xi / 3.0)
}

/// `Θ_j(ξ) = θ₀(2^{-j}ξ)`, with `Θ_{-1} = 0`.
fn cumulative_profile(bank: &MeyerFilterBank, j: i32, xi: f64) -> f64 {
    if j < 0 {
        0.0
    } else {
        lp_profile(bank, xi * (-f64::from(j)).exp2())
    }
}

/// `θ_j = Θ_j − Θ_{j−1}`.
pub fn lp_multiplier(bank: &MeyerFilterBank, j: i32, xi: f64) -> f64 {
    cumulative_profile(bank, j, xi) - cumulative_profile(bank, j - 1, xi)
}

/// Deepest Littlewood–Paley level along an axis of `n` samples: `⌈log₂(n/2)⌉`.
pub fn max_lp_level(n: usize) -> i32 {
    let half = (n / 2).max(1);
    (usize::BITS - (half - 1).leading_zeros()) as i32
}

fn check_lp_level(j: i32, n: usize) -> Result<()> {
    let max = max_lp_level(n);
    if j < 0 || j > max {
        return Err(Error::LevelTooDeep { level: j, max });
    }
    Ok(())
}

fn apply_multiplier(field: &FieldRealization, m1: &[f64], m2: &[f64]) -> FieldRealization {
    let mut spec = spectrum(&field.values);
    Zip::indexed(&mut spec).for_each(|(a, b), z| *z *= m1[a] * m2[b]);
    fft2(&mut spec, true);
    field.with_values(spec.mapv(|z| z.re))
}

fn axis_multiplier(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..n).map(|m| f(signed_bin(m, n) as f64)).collect()
}

/// `Δ_{j̄} f = F⁻¹(θ_{j₁}(ξ₁) θ_{j₂}(ξ₂) F f)`, frequencies in cycles per unit of `t`.
pub fn lp_block_hyperbolic(field: &FieldRealization, j1: i32, j2: i32, bank: &MeyerFilterBank) -> Result<FieldRealization> {
    let (n1, n2) = field.values.dim();
    check_lp_level(j1, n1)?;
    check_lp_level(j2, n2)?;
    let m1 = axis_multiplier(n1, |x| lp_multiplier(bank, j1, x));
    let m2 = axis_multiplier(n2, |x| lp_multiplier(bank, j2, x));
    Ok(apply_multiplier(field, &m1, &m2))
}

/// Square-annulus block with multiplier `Θ_j ⊗ Θ_j − Θ_{j−1} ⊗ Θ_{j−1}`.
pub fn lp_block_classical(field: &FieldRealization, j: i32, bank: &MeyerFilterBank) -> Result<FieldRealization> {
    let (n1, n2) = field.values.dim();
    check_lp_level(j, n1.max(n2))?;
    let mut spec = spectrum(&field.values);
    let c = |n: usize, l: i32| axis_multiplier(n, |x| cumulative_profile(bank, l, x));
    let (a1, a2, b1, b2) = (c(n1, j), c(n2, j), c(n1, j - 1), c(n2, j - 1));
    Zip::indexed(&mut spec).for_each(|(p, q), z| *z *= a1[p] * a2[q] - b1[p] * b2[q]);
    fft2(&mut spec, true);
    Ok(field.with_values(spec.mapv(|z| z.re)))
}

/// Per-level `(mean |c|², standard error)`.
pub type LevelMoments = BTreeMap<(i32, i32), (f64, f64)>;

/// Checks that members share levels, grid, parameters and taper; returns the first.
pub fn check_ensemble_members(ensemble: &[HyperbolicCoeffs], min: usize) -> Result<&HyperbolicCoeffs> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::MismatchedEnsemble("empty ensemble".into()))?;
    if ensemble.len() < min {
        return Err(Error::MismatchedEnsemble(format!(
            "{} members, need at least {min}",
            ensemble.len()
        )));
    }
    for (i, c) in ensemble.iter().enumerate() {
        if c.max_level != first.max_level || c.grid != first.grid || c.params != first.params || c.taper != first.taper {
            return Err(Error::MismatchedEnsemble(format!("member {i} differs from member 0")));
        }
    }
    Ok(first)
}

/// Minimum ensemble size for moment and correlation statistics.
pub const MIN_ENSEMBLE: usize = 30;

/// Mean of `|c|²` over interior translations and members. The standard error is
/// taken across members of their per-member interior means.
pub fn level_moments(ensemble: &[HyperbolicCoeffs]) -> Result<LevelMoments> {
    level_moments_min(ensemble, MIN_ENSEMBLE)
}

/// [`level_moments`] with an explicit minimum ensemble size.
pub fn level_moments_min(ensemble: &[HyperbolicCoeffs], min_members: usize) -> Result<LevelMoments> {
    let first = check_ensemble_members(ensemble, min_members.max(1))?;
    let r = ensemble.len() as f64;
    let mut out = BTreeMap::new();
    for (j1, j2) in first.levels() {
        let (i1, i2) = (first.interior(j1), first.interior(j2));
        if i1.is_empty() || i2.is_empty() {
            continue;
        }
        let count = (i1.len() * i2.len()) as f64;
        let means: Vec<f64> = ensemble
            .iter()
            .map(|c| {
                let b = c.block(j1, j2).expect("levels checked");
                b.slice(ndarray::s![i1.clone(), i2.clone()]).iter().map(|v| v * v).sum::<f64>() / count
            })
            .collect();
        let mean = means.iter().sum::<f64>() / r;
        let se = if ensemble.len() > 1 {
            (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (r - 1.0) / r).sqrt()
        } else {
            0.0
        };
        out.insert((j1, j2), (mean, se));
    }
    Ok(out)
}

/// Pearson correlation across members of `c_{j̄,k̄}` and `c_{j̄′,k̄′}`, with the
/// large-sample standard error `(1 − r²)/√(R − 1)`.
pub fn cross_level_correlation(
    ensemble: &[HyperbolicCoeffs],
    level: (i32, i32),
    other_level: (i32, i32),
    k: (usize, usize),
    other_k: (usize, usize),
) -> Result<(f64, f64)> {
    check_ensemble_members(ensemble, MIN_ENSEMBLE)?;
    let xs: Vec<f64> = ensemble
        .iter()
        .map(|c| c.get(level.0, level.1, k.0, k.1))
        .collect::<Result<_>>()?;
    let ys: Vec<f64> = ensemble
        .iter()
        .map(|c| c.get(other_level.0, other_level.1, other_k.0, other_k.1))
        .collect::<Result<_>>()?;
    let r = pearson(&xs, &ys);
    let n = xs.len() as f64;
    Ok((r, (1.0 - r * r) / (n - 1.0).sqrt()))
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return if xs == ys { 1.0 } else { 0.0 };
    }
    sxy / (sxx * syy).sqrt()
}
