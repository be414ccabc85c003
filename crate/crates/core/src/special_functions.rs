//! Complex log-gamma, the functional-equation factor χ(s), the completed
//! Mellin factor γ(s) = π^(−s/2)Γ(s/2), and the smoothed zero-counting
//! comparator.
//!
//! The public double-precision API uses a Lanczos approximation. Code that runs
//! at higher working precision uses [`ln_gamma_stirling`] instead, which works
//! for any [`Real`].

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::real::{Cx, Real};

// Lanczos, g = 7, 9 terms
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const POLE_TOL: f64 = 1e-12;

fn near_nonpositive_integer(z: Complex64) -> bool {
    z.re < 0.5 && z.im.abs() < POLE_TOL && (z.re - z.re.round()).abs() < POLE_TOL
}

fn check(z: Complex64, function: &'static str) -> Result<Complex64> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::Domain {
            function,
            reason: format!("non-finite result at {z}"),
        })
    }
}

/// log Γ(s), continuous in the plane cut along the negative real axis.
pub fn log_gamma(s: Complex64) -> Result<Complex64> {
    if !(s.re.is_finite() && s.im.is_finite()) {
        return Err(Error::Domain {
            function: "log_gamma",
            reason: "non-finite argument".into(),
        });
    }
    if near_nonpositive_integer(s) {
        return Err(Error::Pole {
            function: "log_gamma",
            re: s.re,
            im: s.im,
        });
    }
    check(lanczos(s), "log_gamma")
}

fn lanczos(s: Complex64) -> Complex64 {
    if s.re < 0.5 {
        // Γ(s)Γ(1−s) = π / sin(πs)
        let refl = (Complex64::new(PI, 0.0) / (s * PI).sin()).ln();
        return refl - lanczos(1.0 - s);
    }
    let z = s - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// χ(s) = π^(s−½) Γ((1−s)/2) / Γ(s/2).
pub fn chi(s: Complex64) -> Result<Complex64> {
    let h = (1.0 - s) / 2.0;
    if near_nonpositive_integer(h) {
        return Err(Error::Pole {
            function: "chi",
            re: s.re,
            im: s.im,
        });
    }
    let q = s / 2.0;
    if near_nonpositive_integer(q) {
        // zero of chi
        return Ok(Complex64::new(0.0, 0.0));
    }
    let l = (s - 0.5) * PI.ln() + lanczos(h) - lanczos(q);
    check(l.exp(), "chi")
}

/// γ(s) = π^(−s/2) Γ(s/2).
pub fn gamma_factor(s: Complex64) -> Result<Complex64> {
    let q = s / 2.0;
    if near_nonpositive_integer(q) {
        return Err(Error::Pole {
            function: "gamma_factor",
            re: s.re,
            im: s.im,
        });
    }
    check((-q * PI.ln() + lanczos(q)).exp(), "gamma_factor")
}

/// Smoothed Riemann–von Mangoldt main term (T/2π)ln(T/2π) − T/2π + 7/8.
pub fn rvm_count(t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain {
            function: "rvm_count",
            reason: format!("T = {t} must be positive"),
        });
    }
    let x = t / (2.0 * PI);
    Ok(x * x.ln() - x + 0.875)
}

// ---------------------------------------------------------------------------
// Stirling series at arbitrary precision

const MAX_BERNOULLI: usize = 160;

/// B_2, B_4, ..., B_{2·MAX_BERNOULLI} as exact rationals.
fn even_bernoulli() -> &'static [Rational] {
    static CELL: OnceLock<Vec<Rational>> = OnceLock::new();
    CELL.get_or_init(|| {
        let m_max = 2 * MAX_BERNOULLI;
        let mut b: Vec<Rational> = Vec::with_capacity(m_max + 1);
        b.push(Rational::from(1));
        for m in 1..=m_max {
            if m > 1 && m % 2 == 1 {
                b.push(Rational::new());
                continue;
            }
            // B_m = −1/(m+1) Σ_{k<m} C(m+1,k) B_k
            let mut acc = Rational::new();
            let mut binom = Integer::from(1);
            for (k, bk) in b.iter().enumerate().take(m) {
                if k > 0 {
                    binom *= (m + 2 - k) as u32;
                    binom /= k as u32;
                }
                if *bk != 0 {
                    acc += Rational::from(&binom) * bk;
                }
            }
            b.push(-acc / Rational::from(m as u32 + 1));
        }
        (1..=MAX_BERNOULLI).map(|k| b[2 * k].clone()).collect()
    })
}

/// log Γ(z) at the precision of `z` by upward shift and the Stirling series.
/// The branch is whatever the shift produces; callers exponentiate.
pub fn ln_gamma_stirling<T: Real>(z: &Cx<T>) -> Cx<T> {
    let one = z.re.one();
    let bits = z.re.prec() as f64;
    let target = 0.12 * bits + 8.0;
    let shift = (target - z.re.to_f64()).ceil().max(0.0) as usize;
    let mut w = z.clone();
    let mut prod = Cx::real(one.clone());
    for _ in 0..shift {
        prod = prod * w.clone();
        w = w.add_real(&one);
    }
    let half = one.lit(0.5);
    let ln2pi = (one.pi() * one.lit(2.0)).ln();
    let mut s = w.clone().add_real(&-half.clone()) * w.ln() - w.clone();
    s.re += ln2pi * &half;
    let winv = w.recip();
    let winv2 = winv.clone() * winv.clone();
    let mut pw = winv;
    let eps = one.eps();
    for (k, b) in even_bernoulli().iter().enumerate() {
        let k = (k + 1) as f64;
        let coef = one.from_rational(b) / one.lit(2.0 * k * (2.0 * k - 1.0));
        let term = pw.scale(&coef);
        let small = term.abs().to_f64() < eps * s.abs().to_f64().max(1e-300);
        s = s + term;
        if small {
            break;
        }
        pw = pw * winv2.clone();
    }
    s - prod.ln()
}

/// γ(s) = π^(−s/2)Γ(s/2) at the precision of `s`.
pub fn gamma_factor_generic<T: Real>(s: &Cx<T>) -> Cx<T> {
    let half = s.re.lit(0.5);
    let q = s.scale(&half);
    let lnpi = s.re.pi().ln();
    (ln_gamma_stirling(&q) - q.scale(&lnpi)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::mp;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn log_gamma_reference_values() {
        assert!(log_gamma(c(1.0, 0.0)).unwrap().norm() < 1e-14);
        let v = log_gamma(c(0.5, 0.0)).unwrap();
        assert!((v.re - 0.572_364_942_924_700_1).abs() < 1e-13 && v.im.abs() < 1e-14);
        let v = log_gamma(c(4.0, 0.0)).unwrap();
        assert!((v.re - 6f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn poles_are_errors() {
        assert!(matches!(log_gamma(c(-2.0, 0.0)), Err(Error::Pole { .. })));
        assert!(matches!(chi(c(3.0, 0.0)), Err(Error::Pole { .. })));
        assert!(matches!(gamma_factor(c(0.0, 0.0)), Err(Error::Pole { .. })));
        assert!(rvm_count(0.0).is_err());
    }

    #[test]
    fn chi_reference_values() {
        let v = chi(c(0.5, 0.0)).unwrap();
        assert!((v - 1.0).norm() < 1e-14);
        let s = c(0.25, 3.0);
        assert!((chi(s).unwrap() * chi(1.0 - s).unwrap() - 1.0).norm() < 1e-12);
        assert!((chi(c(0.5, 2.7)).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_factor_reference_values() {
        // π^(−1/4) Γ(1/4)
        let v = gamma_factor(c(0.5, 0.0)).unwrap();
        assert!((v.re - 2.723_288_216_330_671).abs() < 1e-12, "{v}");
        let v = gamma_factor(c(2.0, 0.0)).unwrap();
        assert!((v.re - 1.0 / PI).abs() < 1e-14);
        let s = c(0.5, 1.3);
        let d = gamma_factor(s.conj()).unwrap() - gamma_factor(s).unwrap().conj();
        assert!(d.norm() < 1e-14);
    }

    #[test]
    fn rvm_reference_values() {
        // (100/2π)ln(100/2π) − 100/2π + 7/8, evaluated at 50 digits with mpmath
        assert!((rvm_count(100.0).unwrap() - 29.002_343_587_325_348).abs() < 1e-12);
        let e = rvm_count(2.0 * PI * std::f64::consts::E).unwrap();
        assert!((e - 0.875).abs() < 1e-12);
        assert!(rvm_count(200.0).unwrap() > rvm_count(100.0).unwrap());
    }

    #[test]
    fn bernoulli_numbers_start_correctly() {
        let b = even_bernoulli();
        assert_eq!(b[0], Rational::from((1, 6)));
        assert_eq!(b[1], Rational::from((-1, 30)));
        assert_eq!(b[5], Rational::from((-691, 2730)));
    }

    #[test]
    fn stirling_agrees_with_lanczos() {
        for &(re, im) in &[(0.25, 0.0), (0.3, 7.0), (-0.4, 2.0), (2.5, -25.0), (0.25, 30.0)] {
            let s = c(re, im);
            let a = gamma_factor(s).unwrap();
            let b = gamma_factor_generic(&Cx::new(re, im)).to_c64();
            assert!((a - b).norm() <= 1e-12 * a.norm(), "{s}: {a} vs {b}");
            let m = gamma_factor_generic(&Cx::new(mp(300, re), mp(300, im))).to_c64();
            assert!((a - m).norm() <= 1e-12 * a.norm(), "{s}: {a} vs {m}");
        }
    }

    #[test]
    fn stirling_high_precision_gamma_quarter() {
        // γ(½) = π^(−1/4)Γ(¼) at 300 bits against the Lanczos value and the
        // independent relation Γ(¼)Γ(¾) = π√2
        let g1 = gamma_factor_generic(&Cx::new(mp(300, 0.5), mp(300, 0.0)));
        let g3 = gamma_factor_generic(&Cx::new(mp(300, 1.5), mp(300, 0.0)));
        // γ(½)γ(3/2) = π^(−1) Γ(¼)Γ(¾) = √2
        let p = (g1 * g3).re;
        let err = (p - Real::sqrt(&mp(300, 2.0))).abs().to_f64();
        assert!(err < 1e-80, "{err}");
    }
}
