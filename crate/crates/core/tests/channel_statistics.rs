//! Statistical behaviour of the channel generator.

mod common;

use common::rng;
use cpr_core::channel::{
    correlation_factor, evolve_channel, exp_correlation, init_channel, temporal_corr, ChannelSet, PhysicalParams,
    UeProfile,
};
use cpr_core::CMatrix;
use num_complex::Complex64;

#[test]
fn sample_covariance_matches_model() {
    let m = 8;
    let profile = UeProfile::new(0.6, 1.1, 0.0, 2.0).unwrap();
    let mut r = rng(201);
    let n = 20_000;
    let mut acc = CMatrix::zeros(m, m);
    for _ in 0..n {
        let h = init_channel(&profile, m, &mut r).unwrap();
        acc += &h * h.adjoint();
    }
    acc /= Complex64::new(n as f64, 0.0);
    let model = exp_correlation(profile.corr_coefficient(), m).unwrap() * Complex64::new(2.0, 0.0);
    let rel = (&acc - &model).norm() / model.norm();
    assert!(rel < 0.05, "relative Frobenius error {rel}");
}

#[test]
fn lag_one_correlation_matches_eta() {
    let m = 4;
    let params = PhysicalParams::default();
    for v in [3.0, 6.0, 30.0] {
        let profile = UeProfile::new(0.6, 0.4, v, 1.0).unwrap();
        let eta = temporal_corr(v, &params).unwrap();
        let mut r = rng(202);
        let (mut cross, mut power) = (Complex64::new(0.0, 0.0), 0.0);
        for _ in 0..20_000 {
            let h0 = init_channel(&profile, m, &mut r).unwrap();
            let h1 = evolve_channel(&h0, &profile, &params, &mut r).unwrap();
            cross += h0.column(0).dotc(&h1.column(0));
            power += h0.norm_squared();
        }
        let est = cross.re / power;
        assert!((est - eta).abs() < 0.02, "v = {v}: {est} vs {eta}");
        assert!(cross.im.abs() / power < 0.02);
    }
}

#[test]
fn static_users_do_not_age() {
    let params = PhysicalParams::default();
    let profiles = vec![
        UeProfile::new(0.6, 0.2, 0.0, 1.0).unwrap(),
        UeProfile::new(0.6, 2.2, 12.0, 0.5).unwrap(),
    ];
    let mut r = rng(203);
    let mut set = ChannelSet::new(6, profiles, &params, 3, &mut r).unwrap();
    set.step(&mut r).unwrap();
    set.step(&mut r).unwrap();
    let (now, before) = (set.current(), set.lagged(2).unwrap());
    assert_eq!(now.column(0), before.column(0));
    assert_ne!(now.column(1), before.column(1));
}

#[test]
fn factor_is_scaled_square_root() {
    let profile = UeProfile::new(0.6, 0.9, 0.0, 3.0).unwrap();
    let a = correlation_factor(&profile, 5).unwrap();
    let r = exp_correlation(profile.corr_coefficient(), 5).unwrap() * Complex64::new(3.0, 0.0);
    assert!((&a * a.adjoint() - r).norm() < 1e-10);
}

#[test]
fn same_stream_same_channels() {
    let profile = UeProfile::new(0.6, 0.3, 3.0, 1.0).unwrap();
    let a = init_channel(&profile, 16, &mut rng(204)).unwrap();
    let b = init_channel(&profile, 16, &mut rng(204)).unwrap();
    let c = init_channel(&profile, 16, &mut rng(205)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
