use std::f64::consts::PI;

use proptest::prelude::*;
use wtfbf::besov::{
    embedding_check, holder_membership, lp_norm, optimality_witnesses, scale_norm, sequence_norm, smoothness_norm,
    weight, BesovSpec, Scale,
};
use wtfbf::error::Error;
use wtfbf::grid::{FieldRealization, GridSpec};
use wtfbf::hyperbolic::{analyze, HyperbolicCoeffs};
use wtfbf::meyer::MeyerFilterBank;
use wtfbf::rng::GaussianStream;

const INF: f64 = f64::INFINITY;

fn grid(j: i32) -> GridSpec {
    GridSpec::square(1 << (j + 2), 1.0).unwrap()
}

fn single(j: i32, at: (i32, i32), k: (usize, usize), value: f64) -> HyperbolicCoeffs {
    let mut c = HyperbolicCoeffs::zeros(j, grid(j)).unwrap();
    c.block_mut(at.0, at.1).unwrap()[[k.0, k.1]] = value;
    c
}

fn random_coeffs(j: i32, seed: u64) -> HyperbolicCoeffs {
    let mut g = GaussianStream::new(seed);
    HyperbolicCoeffs::zeros(j, grid(j)).unwrap().map(|_, _| g.normal())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Eq. (11) summed coefficient by coefficient, finite `p` and `q`.
fn brute_force_norm(c: &HyperbolicCoeffs, s: f64, alpha: f64, p: f64, q: f64) -> f64 {
    let mut total = 0.0;
    for j1 in -1..=c.max_level {
        for j2 in -1..=c.max_level {
            let (a, b) = (j1.max(0) as f64, j2.max(0) as f64);
            let e = (1.0 + alpha) * a.max(b) + (1.0 - alpha) * a.min(b);
            let block = c.block(j1, j2).unwrap();
            let mut inner = 0.0;
            for k1 in 0..block.nrows() {
                for k2 in 0..block.ncols() {
                    inner += block[[k1, k2]].abs().powf(p);
                }
            }
            total += 2f64.powf(-(a + b) * q / p) * 2f64.powf(-e * s * q) * inner.powf(q / p);
        }
    }
    total.powf(1.0 / q)
}

#[test]
fn weights_reduce_at_the_endpoints() {
    for s in [-0.4, 0.25, 1.3] {
        for j1 in 0..8 {
            for j2 in 0..8 {
                let sheet = BesovSpec::new(s, 0.0, 2.0, 2.0).unwrap();
                let iso = BesovSpec::new(s, 1.0, 2.0, 2.0).unwrap();
                assert!(rel(weight(&sheet, j1, j2), 2f64.powf(f64::from(j1 + j2) * s)) < 1e-14);
                assert!(rel(weight(&iso, j1, j2), 2f64.powf(2.0 * f64::from(j1.max(j2)) * s)) < 1e-14);
            }
        }
    }
    assert_eq!(weight(&BesovSpec::new(0.5, 1.0, 1.0, 1.0).unwrap(), 2, 1), 4.0);
    assert_eq!(weight(&BesovSpec::new(0.5, 0.3, 1.0, 1.0).unwrap(), -1, -1), 1.0);
}

#[test]
fn spec_validation_names_the_field() {
    let name = |r: wtfbf::error::Result<BesovSpec>| match r {
        Err(Error::InvalidParameter { name, .. }) => name,
        other => panic!("{other:?}"),
    };
    assert_eq!(name(BesovSpec::new(f64::NAN, 0.5, 1.0, 1.0)), "s");
    assert_eq!(name(BesovSpec::new(0.5, 1.5, 1.0, 1.0)), "alpha");
    assert_eq!(name(BesovSpec::new(0.5, 0.5, 0.0, 1.0)), "p");
    assert_eq!(name(BesovSpec::new(0.5, 0.5, 1.0, -2.0)), "q");
    assert!(BesovSpec::new(0.5, 0.5, INF, INF).is_ok());
    assert!(BesovSpec::new(-0.5, 0.5, 0.5, 0.25).is_ok());
}

#[test]
fn unit_coefficient_at_the_origin_level() {
    let c = single(3, (0, 0), (0, 0), 1.0);
    for (s, a, p, q) in [(0.5, 0.0, 1.0, 1.0), (1.5, 1.0, 2.0, INF), (-0.3, 0.4, INF, 0.5), (2.0, 0.7, 0.5, 3.0)] {
        assert!(rel(sequence_norm(&c, &BesovSpec::new(s, a, p, q).unwrap()), 1.0) < 1e-15);
    }
}

#[test]
fn max_form_hand_value() {
    let c = single(3, (2, 1), (1, 0), 8.0);
    let spec = BesovSpec::new(0.5, 1.0, INF, INF).unwrap();
    assert!(rel(sequence_norm(&c, &spec), 2.0) < 1e-15);
}

#[test]
fn sequence_norm_matches_direct_summation() {
    for (seed, (s, a, p, q)) in [(0.4, 0.0, 2.0, 2.0), (0.7, 0.5, 1.0, 3.0), (-0.2, 1.0, 0.5, 0.7), (1.1, 0.25, 3.0, 1.0)]
        .into_iter()
        .enumerate()
    {
        let c = random_coeffs(3, seed as u64);
        let spec = BesovSpec::new(s, a, p, q).unwrap();
        let expected = brute_force_norm(&c, s, a, p, q);
        assert!(rel(sequence_norm(&c, &spec), expected) < 1e-12, "{spec:?}");
    }
}

#[test]
fn smoothness_norm_flips_the_sign() {
    let c = random_coeffs(3, 8);
    for (s, a, p, q) in [(0.4, 0.3, 2.0, 2.0), (1.0, 1.0, INF, 1.0)] {
        let pos = smoothness_norm(&c, &BesovSpec::new(s, a, p, q).unwrap());
        let neg = sequence_norm(&c, &BesovSpec::new(-s, a, p, q).unwrap());
        assert!(rel(pos, neg) < 1e-14);
        assert!(rel(pos, scale_norm(&c, Scale::Tensorized { alpha: a }, s, p, q)) < 1e-15);
    }
}

#[test]
fn critical_decay_is_a_member() {
    for (s, alpha) in [(0.4, 0.5), (0.8, 0.0), (0.3, 1.0)] {
        let exact = HyperbolicCoeffs::zeros(6, grid(6))
            .unwrap()
            .map(|(j1, j2), _| (-Scale::Tensorized { alpha }.exponent(j1, j2) * s).exp2());
        let v = holder_membership(&exact, s, alpha);
        assert!(v.is_member);
        assert!((v.sup_constant - 1.0).abs() < 1e-14);
        assert_eq!(v.running_max.len(), 7);

        let growing = exact.map(|(j1, j2), c| c * f64::from(j1.max(j2).max(0) + 1));
        let v = holder_membership(&growing, s, alpha);
        assert!(!v.is_member);
        assert!(v.running_max.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn single_coefficients_meet_embedding_equalities() {
    for (j1, j2) in [(0, 0), (2, 2), (3, 1), (-1, 4)] {
        let c = single(4, (j1, j2), (0, 0), 1.5);
        for alpha in [0.0, 0.35, 1.0] {
            let r = embedding_check(&c, 0.6, alpha, 2.0, 2.0);
            assert!(r.all_hold());
            if j1 == j2 {
                assert!(rel(r.mixed_lower, r.tensorized) < 1e-14);
                assert!(rel(r.hyperbolic_upper, r.tensorized) < 1e-14);
            }
            if alpha == 0.0 {
                assert!(rel(r.mixed_upper, r.tensorized) < 1e-14);
                assert!(rel(r.mixed_lower, r.tensorized) < 1e-14);
            }
        }
    }
}

#[test]
fn witnesses_attain_the_bounds() {
    for (s, a, p) in [(0.5, 0.5, 2.0), (0.3, 0.0, 1.0), (1.2, 1.0, INF), (0.7, 0.8, 4.0)] {
        for q in [1.0, 2.0, INF] {
            let spec = BesovSpec::new(s, a, p, q).unwrap();
            let (tensor, lacunary) = optimality_witnesses(&spec, 6).unwrap();
            let r = embedding_check(&tensor, s, a, p, q);
            assert!(r.tensorized.is_finite() && r.tensorized > 0.0);
            assert!(rel(r.mixed_upper, r.tensorized) < 1e-14);
            assert!(rel(r.hyperbolic_lower, r.tensorized) < 1e-14);
            let r = embedding_check(&lacunary, s, a, p, q);
            assert!(r.tensorized.is_finite() && r.tensorized > 0.0);
            assert!(rel(r.mixed_lower, r.tensorized) < 1e-14);
            assert!(rel(r.hyperbolic_upper, r.tensorized) < 1e-14);
        }
    }
    assert!(optimality_witnesses(&BesovSpec::new(0.5, 0.5, 2.0, 2.0).unwrap(), 3).is_err());
}

fn band_limited(seed: u64) -> FieldRealization {
    let mut g = GaussianStream::new(seed);
    let modes: Vec<(f64, f64, f64, f64)> =
        (0..12).map(|_| (g.below(21) as f64 - 10.0, g.below(21) as f64 - 10.0, g.normal(), g.uniform() * 2.0 * PI)).collect();
    FieldRealization::from_fn(GridSpec::square(64, 1.0).unwrap(), |x, y| {
        modes.iter().map(|&(a, b, c, phase)| c * (2.0 * PI * (a * x + b * y) + phase).cos()).sum()
    })
    .unwrap()
}

#[test]
fn lp_norm_basics() {
    let bank = MeyerFilterBank::new();
    let spec = BesovSpec::new(0.5, 0.5, 2.0, 2.0).unwrap();
    let zero = FieldRealization::from_fn(GridSpec::square(32, 1.0).unwrap(), |_, _| 0.0).unwrap();
    assert_eq!(lp_norm(&zero, &spec, 4, &bank).unwrap(), 0.0);
    let f = band_limited(1);
    let base = lp_norm(&f, &spec, 5, &bank).unwrap();
    let scaled = lp_norm(&f.with_values(&f.values * -3.5), &spec, 5, &bank).unwrap();
    assert!(rel(scaled, 3.5 * base) < 1e-12);
    assert!(matches!(lp_norm(&f, &spec, 6, &bank), Err(Error::LevelTooDeep { .. })));
}

#[test]
fn lp_and_sequence_norms_are_equivalent() {
    let bank = MeyerFilterBank::new();
    for spec in [BesovSpec::new(0.5, 0.5, 2.0, 2.0).unwrap(), BesovSpec::new(0.3, 1.0, INF, INF).unwrap()] {
        let ratios: Vec<f64> = (0..20)
            .map(|seed| {
                let f = band_limited(seed);
                lp_norm(&f, &spec, 5, &bank).unwrap() / smoothness_norm(&analyze(&f, 4, &bank).unwrap(), &spec)
            })
            .collect();
        let lo = ratios.iter().cloned().fold(INF, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi / lo < 4.0, "{spec:?}: {lo}..{hi}");
    }
}

fn coeff_strategy() -> impl Strategy<Value = HyperbolicCoeffs> {
    proptest::collection::vec(-10.0f64..10.0, 256).prop_map(|v| {
        let mut it = v.into_iter().cycle();
        HyperbolicCoeffs::zeros(3, grid(3)).unwrap().map(|_, _| it.next().unwrap())
    })
}

fn spec_strategy() -> impl Strategy<Value = BesovSpec> {
    let exponent = prop_oneof![0.25f64..6.0, Just(INF)];
    (-1.0f64..2.0, 0.0f64..=1.0, exponent.clone(), exponent)
        .prop_map(|(s, a, p, q)| BesovSpec::new(s, a, p, q).unwrap())
}

proptest! {
    #[test]
    fn norm_is_homogeneous(c in coeff_strategy(), spec in spec_strategy(), lambda in -5.0f64..5.0) {
        let n = sequence_norm(&c, &spec);
        let m = sequence_norm(&c.map(|_, v| v * lambda), &spec);
        prop_assert!((m - lambda.abs() * n).abs() <= 1e-12 * (1.0 + m));
    }

    #[test]
    fn norm_ignores_signs(c in coeff_strategy(), spec in spec_strategy(), seed in any::<u64>()) {
        let mut g = GaussianStream::new(seed);
        let flipped = c.map(|_, v| if g.uniform() < 0.5 { -v } else { v });
        prop_assert_eq!(sequence_norm(&c, &spec), sequence_norm(&flipped, &spec));
    }

    #[test]
    fn norm_is_monotone(c in coeff_strategy(), spec in spec_strategy(), j1 in -1i32..=3, j2 in -1i32..=3, bump in 0.0f64..5.0) {
        let mut bigger = c.clone();
        let b = bigger.block_mut(j1, j2).unwrap();
        b[[0, 0]] = b[[0, 0]].signum() * (b[[0, 0]].abs() + bump);
        prop_assert!(sequence_norm(&bigger, &spec) >= sequence_norm(&c, &spec) * (1.0 - 1e-12));
    }

    #[test]
    fn triangle_inequality_for_normed_cases(c in coeff_strategy(), d in coeff_strategy(), s in -1.0f64..2.0,
                                            a in 0.0f64..=1.0, p in 1.0f64..6.0, q in 1.0f64..6.0) {
        let spec = BesovSpec::new(s, a, p, q).unwrap();
        let sum = sequence_norm(&c.combine(1.0, &d, 1.0).unwrap(), &spec);
        prop_assert!(sum <= (sequence_norm(&c, &spec) + sequence_norm(&d, &spec)) * (1.0 + 1e-12));
    }

    #[test]
    fn embeddings_hold(c in coeff_strategy(), s in 0.0f64..2.0, a in 0.0f64..=1.0,
                       p in prop_oneof![0.25f64..6.0, Just(INF)], q in prop_oneof![0.25f64..6.0, Just(INF)]) {
        let r = embedding_check(&c, s, a, p, q);
        prop_assert!(r.all_hold(), "{:?}", r.inequalities);
    }
}

#[test]
fn membership_uses_every_block() {
    let mut c = HyperbolicCoeffs::zeros(4, grid(4)).unwrap();
    c.block_mut(-1, 4).unwrap()[[0, 3]] = 1.0;
    let v = holder_membership(&c, 0.5, 0.0);
    assert_eq!(v.sup_constant, 2f64.powf(2.0));
    assert_eq!(v.running_max[..4], [0.0; 4]);
    assert!(!v.is_member);
}
