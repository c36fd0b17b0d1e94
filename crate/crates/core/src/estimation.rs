//! Recovery of `(H, α)` from hyperbolic coefficient variances.
//!
//! Off the near-diagonal, `log₂ E|c_{j̄,k̄}|² = −2H⁺ max(j̄) − 2H⁻ min(j̄) + b`, a plane
//! in `(max(j̄), min(j̄))`. The fit regresses on that design.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::hyperbolic::{check_ensemble_members, HyperbolicCoeffs, LevelMoments, MIN_ENSEMBLE};
use crate::rng::{derive_stream, GaussianStream};

/// Minimum number of level pairs entering a fit.
pub const MIN_FIT_LEVELS: usize = 6;
/// Minimum bootstrap resamples.
pub const MIN_RESAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub h_plus_hat: f64,
    pub h_minus_hat: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub levels_used: Vec<(i32, i32)>,
}

/// Which level pairs enter a fit. Pairs with `|j₁ − j₂| ≤ 1` are always excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    pub min_level: i32,
    pub max_level: Option<i32>,
    /// Weight each level by the inverse variance of `log₂` of its mean.
    pub weighted: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            min_level: 0,
            max_level: None,
            weighted: false,
        }
    }
}

impl FitOptions {
    fn admits(&self, (j1, j2): (i32, i32)) -> bool {
        (j1 - j2).abs() > 1
            && j1.min(j2) >= self.min_level
            && self.max_level.map_or(true, |m| j1.max(j2) <= m)
    }
}

/// OLS fit of `log₂ V` on `(max(j̄), min(j̄), 1)` over all admissible pairs.
pub fn fit_scaling(moments: &BTreeMap<(i32, i32), f64>) -> Result<ScalingFit> {
    let with_unit: LevelMoments = moments.iter().map(|(&k, &v)| (k, (v, 0.0))).collect();
    fit_levels(&with_unit, &FitOptions::default())
}

/// Fit with level selection and optional weighting by the moment standard errors.
pub fn fit_levels(moments: &LevelMoments, opts: &FitOptions) -> Result<ScalingFit> {
    let mut rows = Vec::new();
    for (&lv, &(v, se)) in moments {
        if !opts.admits(lv) || !(v > 0.0) || !v.is_finite() {
            continue;
        }
        let w = if opts.weighted {
            let sd = se / (v * std::f64::consts::LN_2);
            if sd > 0.0 {
                1.0 / (sd * sd)
            } else {
                1.0
            }
        } else {
            1.0
        };
        rows.push((lv, v.log2(), w));
    }
    if rows.len() < MIN_FIT_LEVELS {
        return Err(Error::InsufficientLevels {
            found: rows.len(),
            needed: MIN_FIT_LEVELS,
        });
    }
    let hi = |lv: (i32, i32)| f64::from(lv.0.max(lv.1));
    let lo = |lv: (i32, i32)| f64::from(lv.0.min(lv.1));
    let all_equal = |f: &dyn Fn((i32, i32)) -> f64| rows.iter().all(|r| f(r.0) == f(rows[0].0));
    if all_equal(&hi) {
        return Err(Error::DegenerateDesign("all max(j) equal".into()));
    }
    if all_equal(&lo) {
        return Err(Error::DegenerateDesign("all min(j) equal".into()));
    }
    let n = rows.len();
    let x = DMatrix::from_fn(n, 3, |i, c| {
        let sw = rows[i].2.sqrt();
        sw * match c {
            0 => hi(rows[i].0),
            1 => lo(rows[i].0),
            _ => 1.0,
        }
    });
    let y = DVector::from_fn(n, |i, _| rows[i].2.sqrt() * rows[i].1);
    let svd = x.clone().svd(true, true);
    if svd.rank(1e-10 * svd.singular_values.max()) < 3 {
        return Err(Error::DegenerateDesign("max(j) and min(j) are collinear".into()));
    }
    let beta = svd
        .solve(&y, 1e-12)
        .map_err(|e| Error::DegenerateDesign(e.to_string()))?;
    let resid: f64 = rows
        .iter()
        .map(|r| {
            let fit = beta[0] * hi(r.0) + beta[1] * lo(r.0) + beta[2];
            (r.1 - fit).powi(2)
        })
        .sum();
    Ok(ScalingFit {
        h_plus_hat: -0.5 * beta[0],
        h_minus_hat: -0.5 * beta[1],
        intercept: beta[2],
        residual_rms: (resid / n as f64).sqrt(),
        levels_used: rows.into_iter().map(|r| r.0).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Recovered {
    pub hurst_hat: f64,
    pub alpha_hat: f64,
    pub hurst_clamped: bool,
    pub alpha_clamped: bool,
}

/// Bounds used when clamping `H` into the open interval `(0, 1)`.
const HURST_EPS: f64 = 1e-9;

/// `H = (H⁺ + H⁻)/2`, `α = (H⁺ − H⁻)/(H⁺ + H⁻)`, clamped into the parameter box.
pub fn recover_params(fit: &ScalingFit) -> Result<Recovered> {
    let sum = fit.h_plus_hat + fit.h_minus_hat;
    if !(sum > 0.0) {
        return Err(Error::NonPositiveSum(sum));
    }
    let h = 0.5 * sum;
    let a = (fit.h_plus_hat - fit.h_minus_hat) / sum;
    let hc = h.clamp(HURST_EPS, 1.0 - HURST_EPS);
    let ac = a.clamp(0.0, 1.0);
    Ok(Recovered {
        hurst_hat: hc,
        alpha_hat: ac,
        hurst_clamped: hc != h,
        alpha_clamped: ac != a,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub point: Recovered,
    pub fit: ScalingFit,
    pub hurst: (f64, f64),
    pub alpha: (f64, f64),
    pub confidence: f64,
    pub resamples: usize,
    /// Resamples whose fit failed and were dropped.
    pub failed: usize,
}

/// Per-member interior means of `|c|²` for every level with interior translations.
fn member_means(ensemble: &[HyperbolicCoeffs]) -> (Vec<(i32, i32)>, Vec<Vec<f64>>) {
    let first = &ensemble[0];
    let levels: Vec<(i32, i32)> = first
        .levels()
        .filter(|&(a, b)| !first.interior(a).is_empty() && !first.interior(b).is_empty())
        .collect();
    let table = ensemble
        .iter()
        .map(|c| {
            levels
                .iter()
                .map(|&(a, b)| {
                    let (i1, i2) = (c.interior(a), c.interior(b));
                    let block = c.block(a, b).expect("level in range");
                    let view = block.slice(ndarray::s![i1, i2]);
                    view.iter().map(|v| v * v).sum::<f64>() / view.len() as f64
                })
                .collect()
        })
        .collect();
    (levels, table)
}

fn moments_of(levels: &[(i32, i32)], table: &[Vec<f64>], members: &[usize]) -> LevelMoments {
    let r = members.len() as f64;
    levels
        .iter()
        .enumerate()
        .map(|(l, &lv)| {
            let vals: Vec<f64> = members.iter().map(|&m| table[m][l]).collect();
            let mean = vals.iter().sum::<f64>() / r;
            let var = if members.len() > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)
            } else {
                0.0
            };
            (lv, (mean, (var / r).sqrt()))
        })
        .collect()
}

/// Linear-interpolated empirical quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Point estimate from an ensemble.
pub fn estimate(ensemble: &[HyperbolicCoeffs], opts: &FitOptions) -> Result<(ScalingFit, Recovered)> {
    check_ensemble_members(ensemble, 1)?;
    let (levels, table) = member_means(ensemble);
    let all: Vec<usize> = (0..ensemble.len()).collect();
    let fit = fit_levels(&moments_of(&levels, &table, &all), opts)?;
    let rec = recover_params(&fit)?;
    Ok((fit, rec))
}

/// Percentile bootstrap over members. Resample `r` draws its members from stream
/// `derive_stream(seed, r)`.
pub fn bootstrap_ci(
    ensemble: &[HyperbolicCoeffs],
    resamples: usize,
    confidence: f64,
    seed: u64,
    opts: &FitOptions,
) -> Result<BootstrapResult> {
    check_ensemble_members(ensemble, MIN_ENSEMBLE)?;
    if resamples < MIN_RESAMPLES {
        return Err(invalid("resamples", format!("{resamples} < {MIN_RESAMPLES}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid("confidence", format!("{confidence} is outside (0, 1)")));
    }
    let (levels, table) = member_means(ensemble);
    let n = ensemble.len();
    let all: Vec<usize> = (0..n).collect();
    let fit = fit_levels(&moments_of(&levels, &table, &all), opts)?;
    let point = recover_params(&fit)?;
    let draws: Vec<Option<(f64, f64)>> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = GaussianStream::new(derive_stream(seed, r as u64));
            let members: Vec<usize> = (0..n).map(|_| rng.below(n)).collect();
            let m = moments_of(&levels, &table, &members);
            fit_levels(&m, opts)
                .and_then(|f| recover_params(&f))
                .ok()
                .map(|p| (p.hurst_hat, p.alpha_hat))
        })
        .collect();
    let ok: Vec<(f64, f64)> = draws.iter().flatten().copied().collect();
    if ok.is_empty() {
        return Err(Error::InsufficientLevels {
            found: 0,
            needed: MIN_FIT_LEVELS,
        });
    }
    let interval = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let tail = 0.5 * (1.0 - confidence);
        (quantile(&v, tail), quantile(&v, 1.0 - tail))
    };
    Ok(BootstrapResult {
        point,
        fit,
        hurst: interval(ok.iter().map(|d| d.0).collect()),
        alpha: interval(ok.iter().map(|d| d.1).collect()),
        confidence,
        resamples,
        failed: resamples - ok.len(),
    })
}
