//! Rectangular increments, their ensemble moments, and dyadic Hölder-ratio probes.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::FieldRealization;

/// Minimum ensemble size for increment moments.
pub const MIN_REALIZATIONS: usize = 30;

/// `ΔX_{h;x} = X(x₁+h₁, x₂+h₂) − X(x₁+h₁, x₂) − X(x₁, x₂+h₂) + X(x₁, x₂)` on grid indices.
pub fn rect_increment(field: &FieldRealization, x_idx: (usize, usize), h_idx: (isize, isize)) -> Result<f64> {
    let (n1, n2) = field.values.dim();
    let shift = |x: usize, h: isize, n: usize| -> Result<usize> {
        let y = x as isize + h;
        if x >= n || y < 0 || y as usize >= n {
            return Err(Error::IndexOutOfRange(format!(
                "corner {x}{h:+} outside 0..{n}"
            )));
        }
        Ok(y as usize)
    };
    let (a1, a2) = x_idx;
    let b1 = shift(a1, h_idx.0, n1)?;
    let b2 = shift(a2, h_idx.1, n2)?;
    let v = &field.values;
    Ok(v[[b1, b2]] - v[[b1, a2]] - v[[a1, b2]] + v[[a1, a2]])
}

/// Sample mean of `ΔX²` at each base point with its standard error.
pub fn empirical_increment_moment(
    realizations: &[FieldRealization],
    h_idx: (isize, isize),
    base_points: &[(usize, usize)],
) -> Result<Vec<(f64, f64)>> {
    let first = realizations
        .first()
        .ok_or_else(|| Error::MismatchedEnsemble("empty ensemble".into()))?;
    if realizations.len() < MIN_REALIZATIONS {
        return Err(Error::MismatchedEnsemble(format!(
            "{} realizations, need at least {MIN_REALIZATIONS}",
            realizations.len()
        )));
    }
    for (i, f) in realizations.iter().enumerate() {
        if f.grid != first.grid || f.params != first.params {
            return Err(Error::MismatchedEnsemble(format!("realization {i} differs from realization 0")));
        }
    }
    let r = realizations.len() as f64;
    base_points
        .iter()
        .map(|&x| {
            let sq: Vec<f64> = realizations
                .iter()
                .map(|f| rect_increment(f, x, h_idx).map(|d| d * d))
                .collect::<Result<_>>()?;
            let mean = sq.iter().sum::<f64>() / r;
            let var = sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (r - 1.0);
            Ok((mean, (var / r).sqrt()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioStatistic {
    pub gamma: f64,
    pub sup_ratio: f64,
    /// `(base index, step offset)` of the first maximizer in lexicographic order.
    pub argmax: ((usize, usize), (usize, usize)),
    /// Dyadic depth probed.
    pub resolution: u32,
}

/// `sup |ΔX_{h;x}| / (max(h)^{1−α} min(h)^{1+α})^γ` over base points on the
/// `2^{-depth}` lattice and steps `h = (2^{-p₁}, 2^{-p₂})`, `1 ≤ pᵢ ≤ depth`, in units
/// of each axis' extent.
pub fn holder_ratio(field: &FieldRealization, gamma: f64, alpha: f64, depth: u32) -> Result<RatioStatistic> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("{alpha} is outside [0, 1]")));
    }
    let (n1, n2) = field.values.dim();
    let n = n1.min(n2);
    let max = usize::BITS - 1 - n.leading_zeros();
    if depth == 0 || depth > max || n1 % (1usize << depth) != 0 || n2 % (1usize << depth) != 0 {
        return Err(Error::DepthExceedsGrid { depth, max });
    }
    let (d1, d2) = field.grid.spacing();
    let (s1, s2) = (n1 >> depth, n2 >> depth);
    let steps = |n: usize| -> Vec<usize> { (1..=depth).rev().map(|p| n >> p).collect() };
    let (o1s, o2s) = (steps(n1), steps(n2));
    let mut denom = vec![0.0; o1s.len() * o2s.len()];
    for (a, &o1) in o1s.iter().enumerate() {
        for (b, &o2) in o2s.iter().enumerate() {
            let (h1, h2) = (o1 as f64 * d1, o2 as f64 * d2);
            let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
            denom[a * o2s.len() + b] = (hi.powf(1.0 - alpha) * lo.powf(1.0 + alpha)).powf(gamma);
        }
    }
    let v = &field.values;
    let mut best = RatioStatistic {
        gamma,
        sup_ratio: 0.0,
        argmax: ((0, 0), (o1s[0], o2s[0])),
        resolution: depth,
    };
    let mut found = false;
    for i in (0..n1).step_by(s1) {
        for j in (0..n2).step_by(s2) {
            let base = v[[i, j]];
            for (a, &o1) in o1s.iter().enumerate() {
                if i + o1 >= n1 {
                    continue;
                }
                let top = v[[i + o1, j]];
                for (b, &o2) in o2s.iter().enumerate() {
                    if j + o2 >= n2 {
                        continue;
                    }
                    let delta = v[[i + o1, j + o2]] - top - v[[i, j + o2]] + base;
                    let r = delta.abs() / denom[a * o2s.len() + b];
                    if !found || r > best.sup_ratio {
                        found = true;
                        best.sup_ratio = r;
                        best.argmax = ((i, j), (o1, o2));
                    }
                }
            }
        }
    }
    Ok(best)
}
