use std::f64::consts::PI;

use ndarray::Array2;
use proptest::prelude::*;
use wtfbf::error::Error;
use wtfbf::grid::{FieldRealization, GridSpec};
use wtfbf::hyperbolic::{
    analyze, analyze_tapered, block_len, cross_level_correlation, level_moments, lp_block_classical,
    lp_block_hyperbolic, max_analysis_level, max_lp_level, synthesize, taper_window, HyperbolicCoeffs,
};
use wtfbf::meyer::MeyerFilterBank;
use wtfbf::model::FieldParams;
use wtfbf::rng::GaussianStream;
use wtfbf::synthesis::{FrequencyGrid, SpectralPlan};

fn unit(n: usize) -> GridSpec {
    GridSpec::square(n, 1.0).unwrap()
}

fn field(n: usize, f: impl Fn(f64, f64) -> f64) -> FieldRealization {
    FieldRealization::from_fn(unit(n), f).unwrap()
}

fn random_field(n: usize, seed: u64) -> FieldRealization {
    let mut g = GaussianStream::new(seed);
    FieldRealization::external(unit(n), Array2::from_shape_fn((n, n), |_| g.normal())).unwrap()
}

fn random_coeffs(j: i32, grid: GridSpec, seed: u64) -> HyperbolicCoeffs {
    let mut g = GaussianStream::new(seed);
    HyperbolicCoeffs::zeros(j, grid).unwrap().map(|_, _| g.normal())
}

fn max_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Low-frequency content that every level up to J = 4 resolves exactly.
fn band_limited(t1: f64, t2: f64) -> f64 {
    0.7 + (2.0 * PI * (3.0 * t1 + 5.0 * t2)).cos() - 0.4 * (2.0 * PI * (-2.0 * t1 + t2)).sin()
        + 0.25 * (2.0 * PI * 4.0 * t2).cos()
}

#[test]
fn block_shapes_follow_dyadic_counts() {
    let c = HyperbolicCoeffs::zeros(4, unit(64)).unwrap();
    for ((j1, j2), b) in c.iter_blocks() {
        assert_eq!(b.dim(), (block_len(j1), block_len(j2)));
    }
    assert_eq!(c.levels().count(), 36);
    assert_eq!(c.len(), (1 + 1 + 2 + 4 + 8 + 16usize).pow(2));
    assert_eq!(max_analysis_level(64), 4);
    assert!(matches!(HyperbolicCoeffs::zeros(5, unit(64)), Err(Error::LevelTooDeep { level: 5, max: 4 })));
    assert!(matches!(analyze(&random_field(64, 1), 5, &MeyerFilterBank::new()), Err(Error::LevelTooDeep { .. })));
}

#[test]
fn block_access_is_checked() {
    let mut c = HyperbolicCoeffs::zeros(3, unit(32)).unwrap();
    assert!(matches!(c.set_block(2, 1, Array2::zeros((4, 4))), Err(Error::ShapeMismatch(_))));
    c.set_block(2, 1, Array2::from_elem((4, 2), 1.5)).unwrap();
    assert_eq!(c.get(2, 1, 3, 1).unwrap(), 1.5);
    assert!(matches!(c.get(2, 1, 4, 0), Err(Error::IndexOutOfRange(_))));
    assert!(matches!(c.block(4, 0), Err(Error::LevelTooDeep { .. })));
    assert!(matches!(c.block(-2, 0), Err(Error::LevelTooDeep { .. })));
}

#[test]
fn constant_field_lives_in_the_coarse_block() {
    let bank = MeyerFilterBank::new();
    let c = analyze(&field(32, |_, _| 2.5), 3, &bank).unwrap();
    for ((j1, j2), b) in c.iter_blocks() {
        if (j1, j2) == (-1, -1) {
            assert!((b[[0, 0]] - 2.5).abs() < 1e-12);
        } else {
            assert!(b.iter().all(|v| v.abs() < 1e-12), "({j1},{j2})");
        }
    }
}

#[test]
fn injected_atom_has_a_single_coefficient() {
    let bank = MeyerFilterBank::new();
    let n = 64;
    for (j1, k1, j2, k2) in [(2, 1, 3, 5), (0, 0, 4, 9), (-1, 0, 1, 1), (4, 15, 4, 0)] {
        // Periodized ψ(2^j t − k) sampled directly; level −1 is the constant φ-periodization.
        let axis = |j: i32, k: usize| -> Vec<f64> {
            if j < 0 {
                return vec![1.0; n];
            }
            let base = bank.psi_samples(n, (1 << j) as f64 / n as f64);
            let shift = k * n >> j;
            (0..n).map(|i| base[(i + n - shift) % n]).collect()
        };
        let (a, b) = (axis(j1, k1), axis(j2, k2));
        let atom = FieldRealization::external(unit(n), Array2::from_shape_fn((n, n), |(i, j)| a[i] * b[j])).unwrap();
        let c = analyze(&atom, 4, &bank).unwrap();
        for ((l1, l2), block) in c.iter_blocks() {
            for ((p, q), v) in block.indexed_iter() {
                let expected = if (l1, l2, p, q) == (j1, j2, k1, k2) { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-8, "({l1},{l2};{p},{q}) = {v}");
            }
        }
    }
}

#[test]
fn band_limited_fields_round_trip() {
    let bank = MeyerFilterBank::new();
    let f = field(64, band_limited);
    let back = synthesize(&analyze(&f, 4, &bank).unwrap(), &bank).unwrap();
    assert!(max_diff(&back.values, &f.values) < 1e-10 * f.max_abs());
}

#[test]
fn coefficients_round_trip_through_synthesis() {
    let bank = MeyerFilterBank::new();
    for (n, j) in [(32, 3), (64, 4), (128, 2)] {
        let c = random_coeffs(j, unit(n), n as u64);
        let back = analyze(&synthesize(&c, &bank).unwrap(), j, &bank).unwrap();
        for ((a, x), (_, y)) in c.iter_blocks().zip(back.iter_blocks()) {
            assert!(max_diff(x, y) < 1e-10, "{a:?}");
        }
    }
}

#[test]
fn zero_coefficients_synthesize_to_zero() {
    let c = HyperbolicCoeffs::zeros(3, unit(32)).unwrap();
    let f = synthesize(&c, &MeyerFilterBank::new()).unwrap();
    assert!(f.values.iter().all(|&v| v == 0.0));
}

#[test]
fn parseval_at_grid_level() {
    let bank = MeyerFilterBank::new();
    let f = field(64, band_limited);
    let energy = f.values.iter().map(|v| v * v).sum::<f64>() / f.values.len() as f64;
    let c = analyze(&f, 4, &bank).unwrap();
    let sum: f64 = c.to_l2().iter_blocks().flat_map(|(_, b)| b.iter().map(|v| v * v).collect::<Vec<_>>()).sum();
    assert!((sum / energy - 1.0).abs() < 1e-8, "{sum} vs {energy}");
}

#[test]
fn l2_conversion_scales_by_level() {
    let c = random_coeffs(3, unit(32), 9);
    let l2 = c.to_l2();
    assert_eq!(l2.get(-1, -1, 0, 0).unwrap(), c.get(-1, -1, 0, 0).unwrap());
    assert!((l2.get(2, 3, 1, 4).unwrap() - c.get(2, 3, 1, 4).unwrap() / 2f64.powf(2.5)).abs() < 1e-15);
    assert!((l2.get(-1, 2, 0, 3).unwrap() - c.get(-1, 2, 0, 3).unwrap() / 2.0).abs() < 1e-15);
    let back = l2.from_l2();
    for ((_, x), (_, y)) in c.iter_blocks().zip(back.iter_blocks()) {
        assert!(max_diff(x, y) < 1e-14);
    }
}

#[test]
fn taper_window_ramps_smoothly() {
    let w = taper_window(64, 0.125);
    assert_eq!(w.len(), 64);
    for i in 0..64 {
        assert!((0.0..=1.0).contains(&w[i]));
        assert_eq!(w[i], w[63 - i]);
    }
    assert!(w[8..56].iter().all(|&v| v == 1.0));
    assert!(w[0] < 0.01);
    assert!(w.windows(2).take(8).all(|p| p[0] <= p[1]));
}

#[test]
fn tapered_analysis_records_its_margin() {
    let bank = MeyerFilterBank::new();
    let c = analyze_tapered(&random_field(64, 3), 4, &bank).unwrap();
    assert_eq!(c.taper, 0.125);
    assert_eq!(c.margin(4), 4);
    assert_eq!(c.interior(4), 4..12);
    assert!(c.interior(2).is_empty());
    let p = analyze(&random_field(64, 3), 4, &bank).unwrap();
    assert_eq!(p.interior(2), 0..4);
}

#[test]
fn lp_blocks_resolve_the_identity() {
    let bank = MeyerFilterBank::new();
    let f = random_field(32, 5);
    let top = max_lp_level(32);
    assert_eq!(top, 4);
    let mut hyper = Array2::zeros((32, 32));
    for j1 in 0..=top {
        for j2 in 0..=top {
            hyper += &lp_block_hyperbolic(&f, j1, j2, &bank).unwrap().values;
        }
    }
    assert!(max_diff(&hyper, &f.values) < 1e-10);
    let mut classical = Array2::zeros((32, 32));
    for j in 0..=top {
        classical += &lp_block_classical(&f, j, &bank).unwrap().values;
    }
    assert!(max_diff(&classical, &f.values) < 1e-10);
    assert!(matches!(lp_block_hyperbolic(&f, 5, 0, &bank), Err(Error::LevelTooDeep { .. })));
}

#[test]
fn classical_blocks_collect_hyperbolic_ones() {
    let bank = MeyerFilterBank::new();
    let f = random_field(32, 6);
    for j in 0..=4 {
        let classical = lp_block_classical(&f, j, &bank).unwrap();
        let mut sum = Array2::zeros((32, 32));
        for j1 in 0..=j {
            for j2 in 0..=j {
                if j1.max(j2) == j {
                    sum += &lp_block_hyperbolic(&f, j1, j2, &bank).unwrap().values;
                }
            }
        }
        assert!(max_diff(&classical.values, &sum) < 1e-10, "annulus {j}");
    }
}

#[test]
fn pure_dyadic_modes_sit_in_one_block() {
    let bank = MeyerFilterBank::new();
    let f = field(64, |a, b| (2.0 * PI * 4.0 * a).cos() * (2.0 * PI * 8.0 * b).sin());
    for j1 in 0..=5 {
        for j2 in 0..=5 {
            let block = lp_block_hyperbolic(&f, j1, j2, &bank).unwrap();
            let expected = if (j1, j2) == (2, 3) { f.values.clone() } else { Array2::zeros((64, 64)) };
            assert!(max_diff(&block.values, &expected) < 1e-12, "({j1},{j2})");
        }
    }

    let constant = field(16, |_, _| 1.0);
    for j in 0..=3 {
        let block = lp_block_hyperbolic(&constant, j, 0, &bank).unwrap();
        assert_eq!(block.max_abs() > 0.5, j == 0);
    }
    let low = field(32, |a, b| 1.0 + (2.0 * PI * a).sin() * (2.0 * PI * b).cos());
    for j in 0..=4 {
        let block = lp_block_classical(&low, j, &bank).unwrap();
        assert_eq!(block.max_abs() > 1e-12, j == 0, "annulus {j}");
    }
}

fn wtfbf_ensemble(count: usize) -> Vec<HyperbolicCoeffs> {
    let grid = unit(128);
    let plan = SpectralPlan::new(&FieldParams::new(0.5, 0.5).unwrap(), &grid, &FrequencyGrid::torus(&grid, true).unwrap())
        .unwrap();
    let bank = MeyerFilterBank::new();
    plan.ensemble(12, count).iter().map(|f| analyze(f, 5, &bank).unwrap()).collect()
}

#[test]
fn level_moments_respect_exchange_symmetry() {
    let ensemble = wtfbf_ensemble(60);
    let m = level_moments(&ensemble).unwrap();
    for j in 0..=3 {
        let (a, sa) = m[&(j, j + 2)];
        let (b, sb) = m[&(j + 2, j)];
        let z = (a.log2() - b.log2()) / ((sa / a).hypot(sb / b) / std::f64::consts::LN_2);
        assert!(z.abs() < 3.0, "({j},{}) z = {z}", j + 2);
    }
}

#[test]
fn distant_coefficients_are_uncorrelated() {
    let ensemble = wtfbf_ensemble(100);
    let (r, _) = cross_level_correlation(&ensemble, (3, 1), (3, 1), (2, 1), (2, 1)).unwrap();
    assert!((r - 1.0).abs() < 1e-12);
    for (a, b, k, l) in [((4, 4), (1, 2), (5, 7), (1, 3)), ((2, 5), (5, 2), (1, 9), (20, 1)), ((0, 3), (3, 0), (0, 4), (6, 0))] {
        let (r, _) = cross_level_correlation(&ensemble, a, b, k, l).unwrap();
        assert!(r.abs() < 0.4, "{a:?} vs {b:?}: {r}");
    }
}

#[test]
fn moments_of_zero_fields_vanish() {
    let zero = analyze(&field(32, |_, _| 0.0), 3, &MeyerFilterBank::new()).unwrap();
    let m = level_moments(&vec![zero.clone(); 30]).unwrap();
    assert!(m.values().all(|&(a, b)| a == 0.0 && b == 0.0));
    assert!(matches!(level_moments(&vec![zero.clone(); 29]), Err(Error::MismatchedEnsemble(_))));
    let mut mixed = vec![zero; 30];
    mixed[3] = HyperbolicCoeffs::zeros(2, unit(32)).unwrap();
    assert!(matches!(level_moments(&mixed), Err(Error::MismatchedEnsemble(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn synthesis_is_linear(s1 in any::<u64>(), s2 in any::<u64>(), a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let bank = MeyerFilterBank::new();
        let (c, d) = (random_coeffs(3, unit(32), s1), random_coeffs(3, unit(32), s2));
        let lhs = synthesize(&c.combine(a, &d, b).unwrap(), &bank).unwrap();
        let rhs = &synthesize(&c, &bank).unwrap().values * a + &synthesize(&d, &bank).unwrap().values * b;
        prop_assert!(max_diff(&lhs.values, &rhs) < 1e-12 * (1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
    }

    #[test]
    fn analysis_is_linear(s1 in any::<u64>(), s2 in any::<u64>(), a in -5.0f64..5.0) {
        let bank = MeyerFilterBank::new();
        let (f, g) = (random_field(32, s1), random_field(32, s2));
        let sum = f.with_values(&f.values * a + &g.values);
        let lhs = analyze(&sum, 3, &bank).unwrap();
        let rhs = analyze(&f, 3, &bank).unwrap().combine(a, &analyze(&g, 3, &bank).unwrap(), 1.0).unwrap();
        for ((_, x), (_, y)) in lhs.iter_blocks().zip(rhs.iter_blocks()) {
            prop_assert!(max_diff(x, y) < 1e-11);
        }
    }
}
