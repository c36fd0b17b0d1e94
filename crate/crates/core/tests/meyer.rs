use std::f64::consts::PI;

use proptest::prelude::*;
use wtfbf::meyer::{nu, signed_bin, MeyerFilterBank};

fn partition(bank: &MeyerFilterBank, xi: f64) -> f64 {
    let mut total = bank.phi_hat(xi).powi(2);
    for j in 0..60 {
        total += bank.psi_hat(xi / 2f64.powi(j)).norm_sqr();
    }
    total
}

#[test]
fn support_endpoints() {
    let bank = MeyerFilterBank::new();
    assert_eq!(bank.psi_hat(PI / 2.0).norm(), 0.0);
    assert_eq!(bank.psi_hat(3.0 * PI).norm(), 0.0);
    assert_eq!(bank.psi_modulus(2.0 * PI / 3.0), 0.0);
    assert_eq!(bank.psi_modulus(8.0 * PI / 3.0), 0.0);
    assert_eq!(bank.phi_hat(0.0), 1.0);
    assert_eq!(bank.phi_hat(2.0 * PI), 0.0);
    assert_eq!(bank.phi_hat(4.0 * PI / 3.0), 0.0);
}

#[test]
fn transition_polynomial_values() {
    assert_eq!(nu(0.0), 0.0);
    assert_eq!(nu(1.0), 1.0);
    assert_eq!(nu(-3.0), 0.0);
    assert_eq!(nu(7.0), 1.0);
    assert!((nu(0.5) - 0.5).abs() < 1e-15);
}

#[test]
fn modulus_at_pi_is_half_power() {
    // At ξ = π the scaling filter has not vanished yet: φ̂(π) = cos(π/4), so the
    // squares identity leaves |ψ̂(π)|² = 1/2.
    let bank = MeyerFilterBank::new();
    let phi = bank.phi_hat(PI);
    let psi = bank.psi_hat(PI).norm();
    assert!((phi - (PI / 4.0).cos()).abs() < 1e-15);
    assert!((psi * psi + phi * phi - 1.0).abs() < 1e-14);
    assert!((psi - 0.5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn two_scale_identity_on_first_transition() {
    let bank = MeyerFilterBank::new();
    for i in 0..100 {
        let xi = 2.0 * PI / 3.0 + (i as f64 + 0.5) / 100.0 * (2.0 * PI / 3.0);
        let s = bank.phi_hat(xi).powi(2) + bank.psi_hat(xi).norm_sqr();
        assert!((s - 1.0).abs() < 1e-13, "ξ = {xi}: {s}");
    }
}

#[test]
fn phase_makes_atom_symmetric_about_one_half() {
    let bank = MeyerFilterBank::new();
    let len = 4096;
    let dt = 1.0 / 16.0;
    let s = bank.psi_samples(len, dt);
    // ψ(1/2 + u) = ψ(1/2 − u): t = 8dt + i·dt and 8dt − i·dt.
    for i in 0..400 {
        let a = s[(8 + i) % len];
        let b = s[(len + 8 - i) % len];
        assert!((a - b).abs() < 1e-12, "i = {i}: {a} vs {b}");
    }
}

/// Samples of `2^{j/2} ψ(2^j t − k)` on `t = i/64`, period 256.
/// Band-limited below the sampling Nyquist for `j ≤ 4`.
fn atom(bank: &MeyerFilterBank, j: i32, k: i64) -> Vec<f64> {
    let len = 16384usize;
    let base = bank.psi_samples(len, 2f64.powi(j) / 64.0);
    let shift = 64 * k / (1i64 << j);
    let amp = 2f64.powf(0.5 * j as f64);
    (0..len)
        .map(|i| amp * base[(i as i64 - shift).rem_euclid(len as i64) as usize])
        .collect()
}

#[test]
fn discrete_orthonormality() {
    let bank = MeyerFilterBank::new();
    let dt = 1.0 / 64.0;
    let atoms: Vec<((i32, i64), Vec<f64>)> = [(0, 0), (0, 3), (1, -2), (2, 5), (3, 1), (4, -7), (4, 11)]
        .iter()
        .map(|&(j, k)| ((j, k), atom(&bank, j, k)))
        .collect();
    for (a, (ia, va)) in atoms.iter().enumerate() {
        for (ib, vb) in &atoms[a..] {
            let ip: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum::<f64>() * dt;
            let expected = if ia == ib { 1.0 } else { 0.0 };
            assert!((ip - expected).abs() < 1e-8, "{ia:?}·{ib:?} = {ip}");
        }
    }
}

#[test]
fn low_order_moments_vanish() {
    let bank = MeyerFilterBank::new();
    let len = 1 << 16;
    let dt = 1.0 / 16.0;
    let s = bank.psi_samples(len, dt);
    // t³ψ is no longer integrable against the polynomial tail of ψ.
    for d in 0..=2 {
        let m: f64 = (0..len)
            .map(|i| {
                let t = signed_bin(i, len) as f64 * dt;
                (t - 0.5).powi(d) * s[i] * dt
            })
            .sum();
        assert!(m.abs() < 1e-8, "moment {d}: {m}");
    }
}

#[test]
fn level_filter_matches_direct_evaluation() {
    let bank = MeyerFilterBank::new();
    for (n, j) in [(64usize, -1), (64, 0), (64, 3), (100, 2)] {
        let f = bank.level_filter(n, j);
        assert_eq!(f.len(), n);
        for (m, z) in f.iter().enumerate() {
            let omega = 2.0 * PI * signed_bin(m, n) as f64;
            let expected = if j < 0 {
                num_like(bank.phi_hat(omega), 0.0)
            } else {
                let w = bank.psi_hat(omega / 2f64.powi(j));
                num_like(w.re, w.im)
            };
            assert_eq!((z.re, z.im), expected);
        }
        // Second call hits the cache and returns identical data.
        assert_eq!(&*bank.level_filter(n, j), &*f);
    }
}

fn num_like(re: f64, im: f64) -> (f64, f64) {
    (re, im)
}

#[test]
fn signed_bins() {
    assert_eq!(signed_bin(0, 8), 0);
    assert_eq!(signed_bin(4, 8), 4);
    assert_eq!(signed_bin(5, 8), -3);
    assert_eq!(signed_bin(7, 8), -1);
    assert_eq!(signed_bin(4, 9), 4);
    assert_eq!(signed_bin(5, 9), -4);
}

proptest! {
    #[test]
    fn squares_partition_of_unity(xi in -400.0f64..400.0) {
        let bank = MeyerFilterBank::new();
        prop_assert!((partition(&bank, xi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn modulus_even_and_bounded(xi in -20.0f64..20.0) {
        let bank = MeyerFilterBank::new();
        let a = bank.psi_modulus(xi);
        prop_assert_eq!(a, bank.psi_modulus(-xi));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((bank.psi_hat(xi).norm() - a).abs() < 1e-15);
        prop_assert_eq!(bank.phi_hat(xi), bank.phi_hat(-xi));
    }

    #[test]
    fn transition_is_antisymmetric(x in 0.0f64..=1.0) {
        prop_assert!((nu(x) + nu(1.0 - x) - 1.0).abs() < 1e-13);
    }
}
