use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use speclab::special_functions::{chi, gamma_factor, log_gamma, rvm_count};
use speclab::Error;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn log_gamma_small_integers_and_half() {
    assert!(log_gamma(c(1.0, 0.0)).unwrap().norm() < 1e-14);
    assert!((log_gamma(c(0.5, 0.0)).unwrap() - c(0.572_364_942_924_700_1, 0.0)).norm() < 1e-13);
    assert!((log_gamma(c(4.0, 0.0)).unwrap() - c(6f64.ln(), 0.0)).norm() < 1e-13);
    assert!(matches!(log_gamma(c(-2.0, 0.0)), Err(Error::Pole { .. })));
}

#[test]
fn chi_examples() {
    assert!((chi(c(0.5, 0.0)).unwrap() - 1.0).norm() < 1e-14);
    let s = c(0.25, 3.0);
    assert!((chi(s).unwrap() * chi(1.0 - s).unwrap() - 1.0).norm() < 1e-12);
    assert!((chi(c(0.5, 2.7)).unwrap().norm() - 1.0).abs() < 1e-12);
    assert!(chi(c(3.0, 0.0)).is_err());
    assert!(chi(c(0.0, 0.0)).unwrap().norm() < 1e-300);
}

#[test]
fn gamma_factor_examples() {
    // π^(−1/4)Γ(1/4)
    assert!((gamma_factor(c(0.5, 0.0)).unwrap() - 2.723_288_216_330_671).norm() < 1e-12);
    assert!((gamma_factor(c(2.0, 0.0)).unwrap() - 1.0 / PI).norm() < 1e-15);
    let s = c(0.5, 1.3);
    assert!((gamma_factor(s.conj()).unwrap() - gamma_factor(s).unwrap().conj()).norm() < 1e-15);
    assert!(gamma_factor(c(-2.0, 0.0)).is_err());
}

#[test]
fn rvm_examples() {
    // (100/2π)ln(100/2π) − 100/2π + 7/8 at 30 digits; see README on the ≈28.13 figure
    assert!((rvm_count(100.0).unwrap() - 29.002_343_587_325_35).abs() < 1e-10);
    let t0 = 2.0 * PI * std::f64::consts::E;
    let v = rvm_count(t0 * (1.0 + 1e-9)).unwrap();
    assert!(v > 0.875 - 1e-6 && v < 0.875 + 1e-6);
    assert!(rvm_count(200.0).unwrap() > rvm_count(100.0).unwrap());
    assert!(matches!(rvm_count(0.0), Err(Error::Domain { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chi_reflection(re in -4.0..5.0f64, im in -40.0..40.0f64) {
        let s = c(re, im);
        prop_assume!((s - s.re.round()).norm() > 1e-3);
        let p = chi(s).unwrap() * chi(1.0 - s).unwrap();
        prop_assert!((p - 1.0).norm() < 1e-10, "{s}: {p}");
    }

    #[test]
    fn chi_unimodular_on_critical_line(e in -60.0..60.0f64) {
        prop_assert!((chi(c(0.5, e)).unwrap().norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn log_gamma_recurrence(re in -30.0..30.0f64, im in -30.0..30.0f64) {
        let s = c(re, im);
        prop_assume!(s.norm() <= 30.0 && (s - s.re.round()).norm() > 1e-3);
        let lhs = log_gamma(s + 1.0).unwrap().exp();
        let rhs = s * log_gamma(s).unwrap().exp();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm(), "{s}");
    }

    #[test]
    fn gamma_factor_times_chi_is_reflection(re in -3.0..4.0f64, im in -30.0..30.0f64) {
        let s = c(re, im);
        prop_assume!((s - s.re.round()).norm() > 1e-3);
        let lhs = gamma_factor(s).unwrap() * chi(s).unwrap();
        let rhs = gamma_factor(1.0 - s).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm(), "{s}");
    }
}
