use std::collections::BTreeMap;

use proptest::prelude::*;
use wtfbf::error::Error;
use wtfbf::estimation::{bootstrap_ci, estimate, fit_levels, fit_scaling, recover_params, FitOptions, ScalingFit};
use wtfbf::grid::GridSpec;
use wtfbf::hyperbolic::{analyze, HyperbolicCoeffs};
use wtfbf::meyer::MeyerFilterBank;
use wtfbf::model::FieldParams;
use wtfbf::synthesis::{FrequencyGrid, SpectralPlan};

fn power_law(hp: f64, hm: f64, top: i32) -> BTreeMap<(i32, i32), f64> {
    let mut m = BTreeMap::new();
    for j1 in 0..=top {
        for j2 in 0..=top {
            let (hi, lo) = (f64::from(j1.max(j2)), f64::from(j1.min(j2)));
            m.insert((j1, j2), (-2.0 * (hp * hi + hm * lo)).exp2());
        }
    }
    m
}

fn fit_of(hp: f64, hm: f64) -> ScalingFit {
    ScalingFit {
        h_plus_hat: hp,
        h_minus_hat: hm,
        intercept: 0.0,
        residual_rms: 0.0,
        levels_used: Vec::new(),
    }
}

#[test]
fn noiseless_power_laws_are_recovered() {
    let fit = fit_scaling(&power_law(1.2, 0.4, 6)).unwrap();
    assert!((fit.h_plus_hat - 1.2).abs() < 1e-12);
    assert!((fit.h_minus_hat - 0.4).abs() < 1e-12);
    assert!(fit.intercept.abs() < 1e-11);
    assert!(fit.residual_rms < 1e-12);
    assert!(fit.levels_used.iter().all(|&(a, b)| (a - b).abs() > 1));
    assert_eq!(fit.levels_used.len(), 30);

    let iso = fit_scaling(&power_law(0.35, 0.35, 6)).unwrap();
    assert!((iso.h_plus_hat - 0.35).abs() < 1e-12);
    assert!((iso.h_minus_hat - 0.35).abs() < 1e-12);
}

#[test]
fn near_diagonal_levels_are_ignored() {
    let mut m = power_law(0.9, 0.2, 5);
    for j in 0..=5 {
        *m.get_mut(&(j, j)).unwrap() *= 7.0;
        if j < 5 {
            *m.get_mut(&(j, j + 1)).unwrap() *= 0.1;
        }
    }
    let fit = fit_scaling(&m).unwrap();
    assert!((fit.h_plus_hat - 0.9).abs() < 1e-12);
    assert!((fit.h_minus_hat - 0.2).abs() < 1e-12);
}

#[test]
fn level_selection_and_weighting() {
    let exact: wtfbf::hyperbolic::LevelMoments =
        power_law(0.75, 0.25, 7).into_iter().map(|(k, v)| (k, (v, 0.03 * v))).collect();
    for weighted in [false, true] {
        let opts = FitOptions { min_level: 2, max_level: Some(6), weighted };
        let fit = fit_levels(&exact, &opts).unwrap();
        assert!((fit.h_plus_hat - 0.75).abs() < 1e-12);
        assert!(fit.levels_used.iter().all(|&(a, b)| a.min(b) >= 2 && a.max(b) <= 6));
    }
}

#[test]
fn fits_need_enough_independent_levels() {
    let few: BTreeMap<_, _> = power_law(0.8, 0.3, 6).into_iter().filter(|(k, _)| k.0.max(k.1) <= 3).collect();
    // Admissible pairs: (0,2), (0,3), (1,3) and their transposes, just enough.
    assert_eq!(fit_scaling(&few).unwrap().levels_used.len(), 6);
    let five: BTreeMap<_, _> = [((0, 2), 1.0), ((2, 0), 1.0), ((0, 3), 0.5), ((3, 0), 0.5), ((1, 3), 0.2)].into();
    assert!(matches!(fit_scaling(&five), Err(Error::InsufficientLevels { found: 5, needed: 6 })));

    let same_max: BTreeMap<_, _> = (0..4).flat_map(|j| [((5, j), 1.0 + j as f64), ((j, 5), 2.0 + j as f64)]).collect();
    assert!(matches!(fit_scaling(&same_max), Err(Error::DegenerateDesign(_))));
    let same_min: BTreeMap<_, _> = (2..6).flat_map(|j| [((0, j), 1.0 / j as f64), ((j, 0), 0.5 / j as f64)]).collect();
    assert!(matches!(fit_scaling(&same_min), Err(Error::DegenerateDesign(_))));

    let nonpositive: BTreeMap<_, _> = power_law(0.8, 0.3, 6).into_iter().map(|(k, _)| (k, 0.0)).collect();
    assert!(matches!(fit_scaling(&nonpositive), Err(Error::InsufficientLevels { found: 0, .. })));
}

#[test]
fn parameter_inverses() {
    let r = recover_params(&fit_of(1.2, 0.4)).unwrap();
    assert!((r.hurst_hat - 0.8).abs() < 1e-15 && (r.alpha_hat - 0.5).abs() < 1e-15);
    assert!(!r.hurst_clamped && !r.alpha_clamped);

    let r = recover_params(&fit_of(0.3, 0.3)).unwrap();
    assert_eq!((r.hurst_hat, r.alpha_hat), (0.3, 0.0));

    let r = recover_params(&fit_of(0.9, -0.02)).unwrap();
    assert_eq!(r.alpha_hat, 1.0);
    assert!(r.alpha_clamped && !r.hurst_clamped);

    let r = recover_params(&fit_of(2.5, 0.1)).unwrap();
    assert!(r.hurst_clamped && r.hurst_hat < 1.0);

    assert!(matches!(recover_params(&fit_of(0.1, -0.3)), Err(Error::NonPositiveSum(_))));
    assert!(matches!(recover_params(&fit_of(0.0, 0.0)), Err(Error::NonPositiveSum(_))));
}

fn ensemble(params: FieldParams, seed: u64, count: usize) -> Vec<HyperbolicCoeffs> {
    let grid = GridSpec::square(256, 1.0).unwrap();
    let plan = SpectralPlan::new(&params, &grid, &FrequencyGrid::torus(&grid, true).unwrap()).unwrap();
    let bank = MeyerFilterBank::new();
    plan.ensemble(seed, count).iter().map(|f| analyze(f, 6, &bank).unwrap()).collect()
}

const FIT: FitOptions = FitOptions { min_level: 3, max_level: None, weighted: false };

#[test]
fn wtfbf_exponents_are_recovered() {
    let params = FieldParams::new(0.5, 0.5).unwrap();
    let (fit, rec) = estimate(&ensemble(params, 40, 100), &FIT).unwrap();
    assert!((fit.h_plus_hat - 0.75).abs() <= 0.10, "{fit:?}");
    assert!((fit.h_minus_hat - 0.25).abs() <= 0.10, "{fit:?}");
    assert!((rec.hurst_hat - 0.5).abs() <= 0.1);
}

#[test]
fn identical_members_give_degenerate_intervals() {
    let one = ensemble(FieldParams::new(0.5, 0.5).unwrap(), 1, 1).remove(0);
    let copies = vec![one; 30];
    let b = bootstrap_ci(&copies, 200, 0.9, 3, &FIT).unwrap();
    assert_eq!(b.hurst, (b.point.hurst_hat, b.point.hurst_hat));
    assert_eq!(b.alpha, (b.point.alpha_hat, b.point.alpha_hat));
    assert_eq!(b.failed, 0);
}

#[test]
fn bootstrap_is_deterministic_and_validated() {
    let members = ensemble(FieldParams::new(0.5, 0.5).unwrap(), 2, 30);
    let a = bootstrap_ci(&members, 200, 0.9, 7, &FIT).unwrap();
    let b = bootstrap_ci(&members, 200, 0.9, 7, &FIT).unwrap();
    assert_eq!(a, b);
    assert!(a.hurst.0 <= a.point.hurst_hat && a.point.hurst_hat <= a.hurst.1);
    let c = bootstrap_ci(&members, 200, 0.9, 8, &FIT).unwrap();
    assert_ne!(a.hurst, c.hurst);

    assert!(matches!(bootstrap_ci(&members, 199, 0.9, 7, &FIT), Err(Error::InvalidParameter { name: "resamples", .. })));
    assert!(matches!(bootstrap_ci(&members, 200, 1.0, 7, &FIT), Err(Error::InvalidParameter { name: "confidence", .. })));
    assert!(matches!(bootstrap_ci(&members[..29], 200, 0.9, 7, &FIT), Err(Error::MismatchedEnsemble(_))));
}

#[test]
fn intervals_shrink_with_more_members() {
    let params = FieldParams::new(0.5, 0.5).unwrap();
    let width = |count: usize| {
        let mut w: Vec<(f64, f64)> = (0..3)
            .map(|rep| {
                let b = bootstrap_ci(&ensemble(params, 100 + rep * 7 + count as u64, count), 200, 0.9, rep, &FIT).unwrap();
                (b.hurst.1 - b.hurst.0, b.alpha.1 - b.alpha.0)
            })
            .collect();
        w.sort_by(|a, b| a.0.total_cmp(&b.0));
        let h = w[1].0;
        w.sort_by(|a, b| a.1.total_cmp(&b.1));
        (h, w[1].1)
    };
    let (small, large) = (width(30), width(120));
    assert!(large.0 < small.0, "{small:?} vs {large:?}");
    assert!(large.1 < small.1, "{small:?} vs {large:?}");
}

proptest! {
    #[test]
    fn fits_are_scale_equivariant(hp in 0.1f64..1.8, hm in 0.0f64..1.0, log_lambda in -20.0f64..20.0,
                                  noise in proptest::collection::vec(-0.3f64..0.3, 49)) {
        let mut m = power_law(hp, hm, 6);
        for (v, e) in m.values_mut().zip(&noise) {
            *v *= e.exp2();
        }
        let a = fit_scaling(&m).unwrap();
        let lambda = log_lambda.exp2();
        let b = fit_scaling(&m.iter().map(|(&k, &v)| (k, v * lambda)).collect()).unwrap();
        prop_assert!((a.h_plus_hat - b.h_plus_hat).abs() < 1e-9);
        prop_assert!((a.h_minus_hat - b.h_minus_hat).abs() < 1e-9);
        prop_assert!((b.intercept - a.intercept - log_lambda).abs() < 1e-9);
    }

    #[test]
    fn recovery_inverts_the_forward_map(h in 0.01f64..0.99, alpha in 0.0f64..1.0) {
        let p = FieldParams::new(alpha, h).unwrap();
        let r = recover_params(&fit_of(p.h_plus(), p.h_minus())).unwrap();
        prop_assert!((r.hurst_hat - h).abs() < 1e-12);
        prop_assert!((r.alpha_hat - alpha).abs() < 1e-12);
        prop_assert!(!r.hurst_clamped && !r.alpha_clamped);
    }
}
