mod common;

use std::f64::consts::FRAC_PI_2;

use common::rel;
use num_complex::Complex64;
use proptest::prelude::*;
use speclab::cache::potential_table;
use speclab::cosine_kernel::PotentialTable;
use speclab::dirac_system::*;
use speclab::special_functions::gamma_factor;
use speclab::structure_functions::StructureEvaluator;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn table() -> PotentialTable {
    common::init();
    potential_table(-2.0, 0.0, 200, 128, Some(&common::cache())).unwrap()
}

#[test]
fn free_rotations() {
    let z = PotentialTable::zero(0.0, 2.0, 100);
    let t = integrate(0.0, FRAC_PI_2, 1.0.into(), TwoVector::real(1.0, 0.0), &z).unwrap();
    let y = t.end_value();
    assert!(y.alpha.norm() < 1e-8 && (y.beta - 1.0).norm() < 1e-8);
    let t = integrate(0.0, FRAC_PI_2, 1.0.into(), TwoVector::real(0.0, 1.0), &z).unwrap();
    let y = t.end_value();
    assert!((y.alpha + 1.0).norm() < 1e-8 && y.beta.norm() < 1e-8);
}

#[test]
fn zero_energy_decouples() {
    let t = table();
    let tr = integrate(-2.0, 0.0, 0.0.into(), TwoVector::real(1.0, 1.0), &t).unwrap();
    let y = tr.end_value();
    let m = t.integral(-2.0, 0.0);
    assert!((y.alpha.re - (-m).exp()).abs() < 1e-7 * (-m).exp());
    assert!((y.beta.re - m.exp()).abs() < 1e-7 * m.exp());
}

#[test]
fn canonical_pair_wronskian_and_reality() {
    let t = table();
    let (psi, phi) = canonical_psi_phi(0.0, 3.0.into(), &t, -2.0).unwrap();
    for k in 0..=20 {
        let u = -2.0 * k as f64 / 20.0;
        let (p, f) = (psi.at(u), phi.at(u));
        let w = p.alpha * f.beta - p.beta * f.alpha;
        assert!((w - 1.0).norm() < 1e-8, "u={u}: {w}");
        assert!(p.alpha.im == 0.0 && p.beta.im == 0.0 && f.alpha.im == 0.0 && f.beta.im == 0.0);
    }
}

#[test]
fn propagation_matches_direct_evaluation() {
    common::init();
    for s in [c(0.5, 3.0), c(0.7, 0.0)] {
        let p = ab_trajectory(1.0, 2.0, s).unwrap();
        assert!(p.relative_error() < 1e-5, "{s}: {:e}", p.relative_error());
    }
}

#[test]
fn wronskian_examples() {
    common::init();
    let g = gamma_factor(c(0.5, 0.0)).unwrap();
    let mut vals = vec![];
    for a in [0.5, 1.0, 2.0] {
        let w = wronskian_aj(a, c(0.5, 0.0)).unwrap();
        assert!((w - Complex64::i() * g).norm() < 1e-6);
        vals.push(w);
    }
    assert!((vals[0] - vals[2]).norm() < 1e-7);
    let s = c(0.3, 2.0);
    assert!(rel(wronskian_aj(1.0, s).unwrap(), Complex64::i() * gamma_factor(1.0 - s).unwrap()) < 1e-6);
    assert!((w1_identity(1.0, 0.0).unwrap() - 1.0).abs() < 1e-6);
    assert!((w1_identity(0.2, 4.0).unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn linear_combination_identity() {
    common::init();
    for u in [-2.0, -1.0, 0.0, 0.5] {
        let ev = StructureEvaluator::shared(f64::exp(u)).unwrap();
        for s in [c(0.5, 2.0), c(0.8, -1.0), c(0.3, 6.0)] {
            let p = ev.evaluate(s).unwrap();
            let a = p.gamma * p.j + p.gamma_refl * p.j_refl;
            let b = p.gamma * p.k - p.gamma_refl * p.k_refl;
            // relative to the size of the terms, which cancel heavily
            let sa = (p.gamma * p.j).norm() + (p.gamma_refl * p.j_refl).norm();
            let sb = (p.gamma * p.k).norm() + (p.gamma_refl * p.k_refl).norm();
            assert!((a - 2.0 * p.cal_a).norm() < 1e-7 * sa && (b - 2.0 * p.cal_b).norm() < 1e-7 * sb, "u={u} s={s}");
        }
    }
}

#[test]
fn scattering_pair_follows_the_system() {
    // [J; K] evaluated at two u agree with the ODE between them; kept where
    // ∫μ is small, since errors in μ are amplified by exp(∫μ)
    common::init();
    let t = table();
    let e = 2.5;
    let s = c(0.5, e);
    let start = jk_at((-1.0f64).exp(), s).unwrap();
    let tr = integrate(-1.0, -2.0, e.into(), start, &t).unwrap();
    let direct = jk_at((-2.0f64).exp(), s).unwrap();
    let end = tr.end_value();
    assert!((end.alpha - direct.alpha).norm() + (end.beta - direct.beta).norm() < 1e-6 * direct.norm());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn w1_is_one_on_the_critical_line(u in -2.0..1.0f64, e in 0.0..10.0f64) {
        common::init();
        prop_assert!((w1_identity(u.exp(), e).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn wronskian_constant_along_trajectories(e in -6.0..6.0f64, x in -1.0..1.0f64) {
        let t = table();
        let y0 = TwoVector::real(1.0, x);
        let z0 = TwoVector::real(-x, 1.0);
        let a = integrate(0.0, -2.0, e.into(), y0, &t).unwrap();
        let b = integrate(0.0, -2.0, e.into(), z0, &t).unwrap();
        let w0 = wronskian(&y0, &z0);
        for u in [-0.5, -1.3, -2.0] {
            prop_assert!((wronskian(&a.at(u), &b.at(u)) - w0).norm() < 1e-8 * w0.norm());
        }
    }
}
