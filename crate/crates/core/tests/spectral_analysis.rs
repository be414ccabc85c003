mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;
use speclab::cache::potential_table;
use speclab::cosine_kernel::PotentialTable;
use speclab::dirac_system::{integrate, FreePotential, TwoVector};
use speclab::special_functions::gamma_factor;
use speclab::spectral_analysis::*;

/// Zeros of 𝒜₁ on (0, 40], frozen from this implementation after
/// confirming them by an independent sign scan at ΔE = 0.01.
const A1_ZEROS: [f64; 5] = [19.100_738_352_9, 24.494_680_611_9, 28.989_146_775_4, 33.018_031_092_9, 36.745_869_351_6];

fn spectrum() -> &'static BoundStateSpectrum {
    static S: OnceLock<BoundStateSpectrum> = OnceLock::new();
    S.get_or_init(|| {
        common::init();
        find_bound_states(1.0, 40.0).unwrap()
    })
}

fn right_table() -> &'static PotentialTable {
    static T: OnceLock<PotentialTable> = OnceLock::new();
    T.get_or_init(|| {
        common::init();
        potential_table(0.0, 1.0, 100, 128, Some(&common::cache())).unwrap()
    })
}

fn left_table() -> &'static PotentialTable {
    static T: OnceLock<PotentialTable> = OnceLock::new();
    T.get_or_init(|| {
        common::init();
        potential_table(-3.0, 0.0, 300, 128, Some(&common::cache())).unwrap()
    })
}

fn states() -> &'static Vec<BoundState> {
    static S: OnceLock<Vec<BoundState>> = OnceLock::new();
    S.get_or_init(|| spectrum().positive().iter().take(5).map(|&e| bound_state(1.0, e, right_table()).unwrap()).collect())
}

#[test]
fn spectrum_structure() {
    let s = spectrum();
    let pos = s.positive();
    assert_eq!(pos.len(), 5);
    for (e, z) in pos.iter().zip(A1_ZEROS) {
        assert!((e - z).abs() < 1e-8, "{e} vs {z}");
    }
    assert!(s.symmetry_defect() < 1e-8);
    assert!(s.interlaces());
    assert!(s.b_at_eigenvalues.iter().all(|b| b.abs() > 0.0));
    assert!(s.norms.iter().all(|&n| n > 0.0));
    assert_eq!(s.b_zeros.iter().filter(|&&b| b == 0.0).count(), 1);
}

#[test]
fn spectrum_csv_layout() {
    let mut buf = Vec::new();
    spectrum().write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "n,E_n,norm,rvm_ratio");
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn norms_by_three_routes() {
    let s = spectrum();
    for (i, bs) in states().iter().enumerate() {
        let ev = speclab::structure_functions::evaluator_norm_critical(1.0, bs.e).unwrap();
        assert!((bs.norm_formula - ev).abs() < 1e-5 * ev, "state {i}");
        assert!((bs.norm_formula - bs.norm_trajectory).abs() < 1e-2 * bs.norm_formula, "state {i}");
        let k = s.eigenvalues.iter().position(|&e| e == bs.e).unwrap();
        assert!((s.norms[k] - bs.norm_formula).abs() < 1e-12 * bs.norm_formula);
    }
}

#[test]
fn eigenvectors_orthogonal_and_proportional() {
    let st = states();
    for i in 0..st.len() {
        for j in 0..i {
            assert!(st[i].overlap(&st[j]) < 1e-3, "({i},{j}): {:e}", st[i].overlap(&st[j]));
        }
        assert!(eigenvector_ratio_defect(&st[i], right_table(), 0.3).unwrap() < 1e-6);
    }
}

#[test]
fn m_bound_poles_and_herglotz() {
    common::init();
    for e in [Complex64::new(1.0, 0.5), Complex64::new(3.0, 0.2)] {
        assert!(m_bound(1.0, e).unwrap().im > 0.0);
    }
    let m = m_bound(1.0, Complex64::new(7.0, 0.0)).unwrap();
    assert!(m.im.abs() < 1e-10 * m.norm());
    // 1/m = −𝒜/ℬ changes sign exactly at the eigenvalues
    for &en in &A1_ZEROS[..3] {
        let f = |e: f64| (1.0 / m_bound(1.0, Complex64::new(e, 0.0)).unwrap()).re;
        let (mut lo, mut hi) = (en - 1e-3, en + 1e-3);
        let flo = f(lo);
        assert!(flo * f(hi) < 0.0);
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if f(mid) * flo > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((0.5 * (lo + hi) - en).abs() < 1e-8);
    }
}

#[test]
fn m_scattering_and_measure() {
    common::init();
    for e in [0.0, 2.0, 5.0] {
        assert!(m_scattering(1.0, Complex64::new(e, 0.3)).unwrap().im > 0.0);
    }
    let grid: Vec<f64> = (0..=40).map(|k| k as f64 * 0.25).collect();
    let m = scattering_measure(1.0, &grid).unwrap();
    for (d, i) in m.density.iter().zip(&m.im_m_over_pi) {
        assert!((d - i).abs() < 1e-6 * d);
    }
    // free system
    let free = m_weyl_left(0.0, Complex64::new(2.0, 1.0), &FreePotential).unwrap();
    assert!((free - Complex64::i()).norm() < 1e-8);
}

#[test]
fn weyl_m_from_the_integrator_matches_structure_functions() {
    common::init();
    let t = potential_table(-12.0, 0.5, 1250, 128, Some(&common::cache())).unwrap();
    for e in [Complex64::new(3.0, 2.0), Complex64::new(-1.0, 2.5)] {
        let a = m_weyl_left(0.0, e, &t).unwrap();
        let b = m_scattering(1.0, e).unwrap();
        assert!((a - b).norm() < 1e-5 * b.norm(), "{e}: {a} vs {b}");
    }
}

#[test]
fn matched_eigensolution_conventions() {
    let en = A1_ZEROS[0];
    let t = right_table();
    let m = matched_eigensolution(1.0, en, 0.0, 1.0, t, 0.0, 0.5).unwrap();
    let (p0, p1) = m.pairings();
    assert!(p0.norm() < 1e-15 && (p1 - 0.5).norm() < 1e-15);
    let (r0, r1) = m.singular_residual();
    assert!(r0.norm() < 1e-15 && r1.norm() < 1e-15);
    // square integrable at the eigenvalue, growing away from it
    let off = matched_eigensolution(1.0, en + 0.7, 0.0, 1.0, t, 0.0, 0.5).unwrap();
    assert!(m.right_tail_fraction(0.2) < 1e-2 * off.right_tail_fraction(0.2));
    // left piece: boundary [*, 0] at u0
    let l = matched_eigensolution(1.0, 2.0, 1.0, 0.0, left_table(), 2.0, 0.0).unwrap();
    let (lim, _) = l.limits();
    assert!((lim.alpha - 1.0).norm() < 1e-15 && lim.beta.norm() < 1e-15);
}

#[test]
fn psi_formula_matches_ode() {
    common::init();
    let t = left_table();
    for e in [0.5, 3.0, 7.0] {
        let tr = integrate(0.0, -2.0, e.into(), TwoVector::real(1.0, 0.0), t).unwrap();
        for u in [-0.5f64, -1.0, -2.0] {
            let y = tr.at(u);
            assert!(y.alpha.im == 0.0 && y.beta.im == 0.0);
            let f = psi_formula(1.0, u.exp(), e).unwrap();
            assert!((y.alpha - f.alpha).norm() + (y.beta - f.beta).norm() < 1e-6 * (1.0 + f.norm()), "E={e} u={u}");
        }
    }
}

#[test]
fn plancherel() {
    let c = calibrate_plancherel_free().unwrap();
    assert!((c - PLANCHEREL_CONSTANT).abs() < 1e-8);
    let bump = |u: f64| ((-(u + 2.0).powi(2) / 0.08).exp(), 0.3 * (-(u + 1.7).powi(2) / 0.08).exp());
    let tr = scattering_transform(1.0, &bump, (-3.0, -1.0), left_table(), &TransformSettings::default()).unwrap();
    assert!(tr.defect(PLANCHEREL_CONSTANT) < 1e-2, "{:e}", tr.defect(PLANCHEREL_CONSTANT));
    assert!(scattering_transform(1.0, &bump, (-3.0, 0.5), left_table(), &TransformSettings::default()).is_err());
}

#[test]
fn expansion_round_trips() {
    common::init();
    let st = ExpansionSettings::default();
    let t = potential_table(st.u_min, st.anchor_u, 1250, 128, Some(&common::cache())).unwrap();
    let g = expansion_grid(&t, &st).unwrap();
    let gam = |e: f64| gamma_factor(Complex64::new(0.5, e)).unwrap();
    let f = move |e: f64| gam(e) * (-e * e / 8.0).exp() * Complex64::from_polar(1.0, 3.0 * e);
    let rt = isometric_round_trip(&g, &f);
    assert!(rt.parseval_defect < 1e-2 && rt.round_trip_defect < 1e-2, "{rt:?}");
    // F(s) ↦ F(1 − s) flips β
    let x = g.forward(&f);
    let y = g.forward(&|e| f(-e));
    let scale = x.alpha.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for i in (0..g.u_grid.len()).step_by(97) {
        assert!((x.alpha[i] - y.alpha[i]).norm() < 1e-12 * scale && (x.beta[i] + y.beta[i]).norm() < 1e-12 * scale);
    }
    // truncation to u > ln a0 is the projection onto the a0 space
    let n = g.e_nodes.len();
    assert!(projection_defect(&g, &f, 0.2, &[n / 10, n / 3]).unwrap() < 1e-3);
}

#[test]
fn counting_staircase() {
    let s = spectrum();
    let mut last = 0;
    for k in 1..=40 {
        let c = counting_comparison(s, k as f64).unwrap();
        assert!(c.count >= last);
        last = c.count;
        let neg = s.eigenvalues.iter().filter(|&&e| e < 0.0 && e >= -(k as f64)).count();
        assert_eq!(neg, c.count);
    }
    assert_eq!(last, 5);
    assert!(counting_comparison(s, 41.0).is_err());
    let c = counting_comparison(s, 30.0).unwrap();
    assert_eq!(c.count, 3);
    assert!((c.ratio.unwrap() - 3.0 / c.rvm).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn herglotz_sampling(x in -30.0..30.0f64, y in 0.05..5.0f64) {
        common::init();
        let e = Complex64::new(x, y);
        prop_assert!(m_bound(1.0, e).unwrap().im > 0.0, "m_bound at {e}");
        prop_assert!(m_scattering(1.0, e).unwrap().im > 0.0, "m_scattering at {e}");
    }

    #[test]
    fn density_is_im_m_over_pi(e in 0.0..20.0f64) {
        common::init();
        let m = scattering_measure(1.0, &[e]).unwrap();
        prop_assert!((m.density[0] - m.im_m_over_pi[0]).abs() < 1e-6 * m.density[0]);
        prop_assert!(m.density[0] > 0.0 && m.density[0] < f64::INFINITY && PI > 0.0);
    }
}
