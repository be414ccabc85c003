//! Bound states of the half-line problem on (u0, ∞), the scattering
//! m-function and measure on (−∞, u0), matched eigensolutions of the
//! rank-two perturbed operator, and the isometric expansions.
//!
//! Conventions: s = ½ + iE, u = ln a, vectors [α; β] with the measure du/2.
//! Bound states are the zeros Eₙ of E ↦ 𝒜ₐ₀(½+iE); the corresponding
//! eigenvector is Zₙ(u) = [2𝒜(u, sₙ); 2ℬ(u, sₙ)] = 2ℬ(u0, sₙ)·Tₙ(u).

use std::f64::consts::{E as EULER, PI};
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cosine_kernel::PotentialTable;
use crate::dirac_system::{integrate, integrate_with, s_of, IntegratorSettings, Potential, Trajectory, TwoVector};
use crate::error::{invalid, io_err, Error, Result};
use crate::quadrature::gauss_legendre;
use crate::special_functions::rvm_count;
use crate::structure_functions::{StructureEvaluator, StructurePoint};

/// Scan step below E = 20 (scaled by 1/ln(E a0² + e) beyond).
pub const SCAN_STEP: f64 = 0.05;
pub const SCAN_KNEE: f64 = 20.0;
/// Bisection stops below this bracket width.
pub const BISECT_TOL: f64 = 1e-9;

fn critical(ev: &StructureEvaluator, e: f64) -> Result<StructurePoint> {
    ev.evaluate(Complex64::new(0.5, e))
}

/// Scan grid on [0, e_max].
pub fn scan_grid(a0: f64, e_max: f64) -> Vec<f64> {
    let knee = (SCAN_KNEE * a0 * a0 + EULER).ln();
    let mut g = vec![0.0];
    let mut e = 0.0;
    while e < e_max {
        let h = if e < SCAN_KNEE {
            SCAN_STEP
        } else {
            SCAN_STEP * knee / (e * a0 * a0 + EULER).ln()
        };
        e = (e + h).min(e_max);
        g.push(e);
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Which {
    A,
    B,
}

fn value(p: &StructurePoint, w: Which) -> f64 {
    match w {
        Which::A => p.cal_a.re,
        Which::B => p.cal_b.re,
    }
}

fn bisect(ev: &StructureEvaluator, w: Which, mut lo: f64, mut hi: f64, mut flo: f64) -> Result<f64> {
    while (hi - lo).abs() > BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        let fm = value(&critical(ev, mid)?, w);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sign-change roots of 𝒜 or ℬ along a signed grid (0 excluded).
fn roots(ev: &StructureEvaluator, grid: &[f64], pts: &[StructurePoint], w: Which) -> Result<Vec<(f64, (f64, f64))>> {
    let mut out = Vec::new();
    for i in 1..grid.len() - 1 {
        let (f0, f1) = (value(&pts[i], w), value(&pts[i + 1], w));
        if f0 == 0.0 {
            out.push((grid[i], (grid[i], grid[i])));
        } else if f0 * f1 < 0.0 {
            out.push((bisect(ev, w, grid[i], grid[i + 1], f0)?, (grid[i], grid[i + 1])));
        }
    }
    Ok(out)
}

/// Zeros of 𝒜ₐ₀ (the bound-state energies) and of ℬₐ₀ on [−E_max, E_max].
#[derive(Clone, Debug, Serialize)]
pub struct BoundStateSpectrum {
    pub a0: f64,
    pub e_max: f64,
    /// ascending, both signs
    pub eigenvalues: Vec<f64>,
    /// (Zₙ|Zₙ) = 2i𝒜′ℬ at each eigenvalue
    pub norms: Vec<f64>,
    pub brackets: Vec<(f64, f64)>,
    /// ℬₐ₀(½+iEₙ)
    pub b_at_eigenvalues: Vec<f64>,
    /// zeros of ℬₐ₀, ascending; E = 0 is always one (ℬ is odd in E)
    pub b_zeros: Vec<f64>,
}

/// Scan for zeros of E ↦ 𝒜ₐ₀(½+iE) on both half-lines independently and
/// refine by bisection.
pub fn find_bound_states(a0: f64, e_max: f64) -> Result<BoundStateSpectrum> {
    if !(a0 > 0.0) {
        return Err(invalid("a0", format!("must be positive, got {a0}")));
    }
    if !(e_max > 0.0) || !e_max.is_finite() {
        return Err(invalid("emax", format!("must be positive, got {e_max}")));
    }
    let ev = StructureEvaluator::shared(a0)?;
    let pos = scan_grid(a0, e_max);
    let neg: Vec<f64> = pos.iter().map(|e| -e).collect();
    let eval_grid = |g: &[f64]| -> Result<Vec<StructurePoint>> { g.par_iter().map(|&e| critical(&ev, e)).collect() };
    let pp = eval_grid(&pos)?;
    let pn = eval_grid(&neg)?;
    // min step governs the resolution warning
    let min_step = pos.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let scale = pp.iter().map(|p| p.cal_a.norm() + p.cal_b.norm()).fold(0.0, f64::max);

    let mut zs: Vec<(f64, (f64, f64))> = roots(&ev, &pos, &pp, Which::A)?;
    let zn = roots(&ev, &neg, &pn, Which::A)?;
    zs.extend(zn.into_iter().map(|(e, (l, h))| (e, (h, l))));
    zs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    for w in zs.windows(2) {
        if (w[1].0 - w[0].0).abs() < 2.0 * min_step {
            log::warn!("zeros at {} and {} closer than twice the scan step", w[0].0, w[1].0);
        }
    }
    let mut b0 = vec![0.0];
    if value(&pp[0], Which::B).abs() > 1e-12 * scale {
        log::warn!("ℬ(½) = {} is not zero", pp[0].cal_b.re);
    }
    b0.extend(roots(&ev, &pos, &pp, Which::B)?.into_iter().map(|r| r.0));
    b0.extend(roots(&ev, &neg, &pn, Which::B)?.into_iter().map(|r| r.0));
    b0.sort_by(|x, y| x.partial_cmp(y).unwrap());

    let mut spec = BoundStateSpectrum {
        a0,
        e_max,
        eigenvalues: vec![],
        norms: vec![],
        brackets: vec![],
        b_at_eigenvalues: vec![],
        b_zeros: b0,
    };
    let details: Vec<Result<(f64, f64)>> = zs
        .par_iter()
        .map(|(e, _)| {
            let b = critical(&ev, *e)?.cal_b.re;
            if b.abs() <= 1e-10 * scale {
                return Err(Error::Domain {
                    function: "find_bound_states",
                    reason: format!("ℬ vanishes together with 𝒜 at E = {e}; zero not simple"),
                });
            }
            Ok((b, norm_formula(&ev, *e)?))
        })
        .collect();
    for ((e, br), d) in zs.into_iter().zip(details) {
        let (b, nrm) = d?;
        spec.eigenvalues.push(e);
        spec.brackets.push(br);
        spec.b_at_eigenvalues.push(b);
        spec.norms.push(nrm);
    }
    Ok(spec)
}

impl BoundStateSpectrum {
    pub fn positive(&self) -> Vec<f64> {
        self.eigenvalues.iter().copied().filter(|&e| e > 0.0).collect()
    }

    /// max |Eₙ + E₋ₙ| over paired eigenvalues; ∞ if the counts differ.
    pub fn symmetry_defect(&self) -> f64 {
        let p = self.positive();
        let mut n: Vec<f64> = self.eigenvalues.iter().copied().filter(|&e| e < 0.0).map(|e| -e).collect();
        n.sort_by(|x, y| x.partial_cmp(y).unwrap());
        if p.len() != n.len() {
            return f64::INFINITY;
        }
        p.iter().zip(&n).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    /// Zeros of 𝒜 and ℬ on [0, E_max] alternate.
    pub fn interlaces(&self) -> bool {
        let mut all: Vec<(f64, bool)> = self.positive().into_iter().map(|e| (e, true)).collect();
        all.extend(self.b_zeros.iter().filter(|&&e| e >= 0.0).map(|&e| (e, false)));
        all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        all.windows(2).all(|w| w[0].1 != w[1].1)
    }

    /// CSV `n,E_n,norm,rvm_ratio`; n is signed by the sign of Eₙ.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "n,E_n,norm,rvm_ratio")?;
        let neg = self.eigenvalues.iter().filter(|&&e| e < 0.0).count() as i64;
        for (i, (e, nrm)) in self.eigenvalues.iter().zip(&self.norms).enumerate() {
            let idx = i as i64 - neg;
            let n = if idx >= 0 { idx + 1 } else { idx };
            let ratio = counting_comparison(self, e.abs()).ok().and_then(|c| c.ratio);
            match ratio {
                Some(r) => writeln!(w, "{n},{e:.12e},{nrm:.12e},{r:.12e}")?,
                None => writeln!(w, "{n},{e:.12e},{nrm:.12e},")?,
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(io_err(path))?;
        self.write_csv(std::io::BufWriter::new(f)).map_err(io_err(path))
    }
}

/// d𝒜/ds at s by central differences in Re s, one Richardson step.
fn a_prime_sigma(ev: &StructureEvaluator, s: Complex64) -> Result<Complex64> {
    let h = 1e-4 * (1.0 + s.im.abs());
    let a = |d: f64| -> Result<Complex64> { Ok(ev.evaluate(s + d)?.cal_a) };
    let d1 = (a(h)? - a(-h)?) / (2.0 * h);
    let d2 = (a(h / 2.0)? - a(-h / 2.0)?) / h;
    if (d1 - d2).norm() > 1e-3 * d2.norm() {
        return Err(Error::DerivativeUnstable {
            e: s.im,
            d1: d1.norm(),
            d2: d2.norm(),
        });
    }
    Ok((d2 * 4.0 - d1) / 3.0)
}

fn norm_formula(ev: &StructureEvaluator, en: f64) -> Result<f64> {
    let s = Complex64::new(0.5, en);
    let p = ev.evaluate(s)?;
    let ap = a_prime_sigma(ev, s)?;
    if p.cal_a.norm() > 1e-6 * ap.norm() {
        return Err(invalid("En", format!("{en} is not a zero of 𝒜 (|𝒜/𝒜′| = {:e})", p.cal_a.norm() / ap.norm())));
    }
    let v = Complex64::new(0.0, 2.0) * ap * p.cal_b;
    if !(v.re > 0.0) {
        return Err(Error::NonPositiveNorm { e: en, value: v.re });
    }
    Ok(v.re)
}

/// (Zₙ|Zₙ) = 2i𝒜′(sₙ)ℬ(sₙ), 𝒜′ = d𝒜/ds taken along Re s.
pub fn bound_state_norm(a0: f64, en: f64) -> Result<f64> {
    norm_formula(&*StructureEvaluator::shared(a0)?, en)
}

/// Zₙ on [u0, U] with its norms by both routes.
#[derive(Clone, Debug)]
pub struct BoundState {
    pub a0: f64,
    pub e: f64,
    /// 2i𝒜′ℬ
    pub norm_formula: f64,
    /// ∫_{u0}^{U} |Zₙ|² du/2 plus the tail estimate beyond U
    pub norm_trajectory: f64,
    pub tail_estimate: f64,
    /// ℬ(u0, sₙ)
    pub b_u0: f64,
    /// Zₙ(u0) from the backward integration
    pub z_u0: TwoVector,
    pub anchor_u: f64,
    /// Zₙ = [2𝒜; 2ℬ] integrated backward from the anchor
    pub z: Trajectory,
}

impl BoundState {
    /// Tₙ(u) = Zₙ(u)/(2ℬ(u0, sₙ)).
    pub fn t_at(&self, u: f64) -> TwoVector {
        self.z.at(u).scale((1.0 / (2.0 * self.b_u0)).into())
    }

    /// ∫ Tₙ·Tₘ du/2 relative to ‖Tₙ‖‖Tₘ‖ over the common range.
    pub fn overlap(&self, other: &BoundState) -> f64 {
        let hi = self.anchor_u.min(other.anchor_u);
        let lo = self.z.u_min().max(other.z.u_min());
        let ip = self.z.inner(&other.z, lo, hi).norm();
        ip / (self.z.norm_sq(lo, hi) * other.z.norm_sq(lo, hi)).sqrt()
    }
}

/// Anchor: where the WKB exponent ∫√(μ² − E²) past the turning point reaches 14.
fn anchor_for(pot: &PotentialTable, u0: f64, e: f64) -> (f64, f64) {
    let (_, hi) = pot.range();
    let h = 0.005;
    let mut u = u0;
    let mut expo = 0.0;
    while u + h <= hi {
        let m = pot.interp(u + h / 2.0);
        if m > e.abs() {
            expo += (m * m - e * e).sqrt() * h;
        }
        u += h;
        if expo >= 14.0 {
            break;
        }
    }
    // quantize so anchors share evaluators
    let q = ((u - u0) / 0.05).ceil() * 0.05 + u0;
    let q = q.min(hi);
    let m = pot.interp(q);
    (q, (m * m - e * e).max(1.0).sqrt())
}

/// Bound state at a verified zero En: integrates Zₙ backward from an anchor
/// where [𝒜; ℬ] is evaluated directly (the stable direction for the
/// solution decaying at +∞).
pub fn bound_state(a0: f64, en: f64, pot: &PotentialTable) -> Result<BoundState> {
    let u0 = a0.ln();
    let ev0 = StructureEvaluator::shared(a0)?;
    let norm_f = norm_formula(&ev0, en)?;
    let b_u0 = critical(&ev0, en)?.cal_b.re;
    let (anchor, kappa) = anchor_for(pot, u0, en);
    if anchor <= u0 {
        return Err(Error::TableRange {
            u: u0,
            lo: pot.u_min(),
            hi: pot.u_max(),
        });
    }
    let p = critical(&*StructureEvaluator::shared(anchor.exp())?, en)?;
    let init = TwoVector::new(p.cal_a * 2.0, p.cal_b * 2.0);
    let settings = IntegratorSettings {
        tol: 1e-12,
        ..Default::default()
    };
    let z = integrate_with(anchor, u0, en.into(), init, pot, settings)?;
    // ∫_U^∞ |Z|² du/2 ≈ |Z(U)|²/(2κ)/2
    let tail = init.norm().powi(2) / (4.0 * kappa);
    if tail > 1e-7 * norm_f {
        log::warn!("bound state E = {en}: tail beyond u = {anchor} estimated at {tail:e}");
    }
    let norm_t = z.norm_sq(u0, anchor) + tail;
    Ok(BoundState {
        a0,
        e: en,
        norm_formula: norm_f,
        norm_trajectory: norm_t,
        tail_estimate: tail,
        b_u0,
        z_u0: z.at(u0),
        anchor_u: anchor,
        z,
    })
}

/// Largest relative deviation between Tₙ from the backward route and the
/// solution integrated forward from Tₙ(u0) = [0; 1] over [u0, u0 + span].
pub fn eigenvector_ratio_defect(bs: &BoundState, pot: &PotentialTable, span: f64) -> Result<f64> {
    let u0 = bs.a0.ln();
    let fwd = integrate(u0, u0 + span, bs.e.into(), TwoVector::real(0.0, 1.0), pot)?;
    let mut worst: f64 = 0.0;
    for k in 0..=20 {
        let u = u0 + span * k as f64 / 20.0;
        let t = bs.t_at(u);
        let f = fwd.at(u);
        worst = worst.max(t.sub_norm(&f) / f.norm());
    }
    Ok(worst)
}

impl TwoVector {
    fn sub_norm(&self, o: &TwoVector) -> f64 {
        ((self.alpha - o.alpha).norm_sqr() + (self.beta - o.beta).norm_sqr()).sqrt()
    }
}

/// m(E) = −ℬₐ₀(s)/𝒜ₐ₀(s), s = ½ + iE.
pub fn m_bound(a0: f64, e: Complex64) -> Result<Complex64> {
    let p = StructureEvaluator::shared(a0)?.evaluate(s_of(e))?;
    if p.cal_a.norm() <= 1e-14 * p.cal_b.norm() {
        return Err(Error::Pole {
            function: "m_bound",
            re: e.re,
            im: e.im,
        });
    }
    Ok(-p.cal_b / p.cal_a)
}

/// m(E) = −J(u0, s)/K(u0, s).
pub fn m_scattering(a0: f64, e: Complex64) -> Result<Complex64> {
    let p = StructureEvaluator::shared(a0)?.evaluate(s_of(e))?;
    if p.k.norm() == 0.0 {
        return Err(Error::Pole {
            function: "m_scattering",
            re: e.re,
            im: e.im,
        });
    }
    Ok(-p.j / p.k)
}

/// Weyl m-function of (−∞, u0] from the integrator alone: integrating forward
/// from far left, any start converges to the solution square-integrable at
/// −∞ (the dominant one for Im E > 0); m = −α(u0)/β(u0). The start lies far
/// enough left that the subdominant part is suppressed by e^(−40).
pub fn m_weyl_left(u0: f64, e: Complex64, pot: &dyn Potential) -> Result<Complex64> {
    if !(e.im > 0.0) {
        return Err(invalid("E", format!("needs Im E > 0, got {e}")));
    }
    let start = u0 - 20.0 / e.im;
    let tr = integrate(start, u0, e, TwoVector::real(1.0, 0.0), pot)?;
    let y = tr.end_value();
    Ok(-y.alpha / y.beta)
}

/// ν(dE) = dE/(π|K(u0, ½+iE)|²) sampled on a grid.
#[derive(Clone, Debug, Serialize)]
pub struct ScatteringMeasure {
    pub a0: f64,
    pub e_grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Im m(E)/π, equal to the density by Im(−JK̄) = 1
    pub im_m_over_pi: Vec<f64>,
}

pub fn scattering_measure(a0: f64, e_grid: &[f64]) -> Result<ScatteringMeasure> {
    let ev = StructureEvaluator::shared(a0)?;
    let rows: Vec<Result<(f64, f64)>> = e_grid
        .par_iter()
        .map(|&e| {
            let p = critical(&ev, e)?;
            let m = -p.j / p.k;
            Ok((1.0 / (PI * p.k.norm_sqr()), m.im / PI))
        })
        .collect();
    let mut out = ScatteringMeasure {
        a0,
        e_grid: e_grid.to_vec(),
        density: vec![],
        im_m_over_pi: vec![],
    };
    for r in rows {
        let (d, m) = r?;
        if !(d > 0.0) {
            return Err(Error::Domain {
                function: "scattering_measure",
                reason: format!("non-positive density {d}"),
            });
        }
        out.density.push(d);
        out.im_m_over_pi.push(m);
    }
    Ok(out)
}

impl ScatteringMeasure {
    /// CSV `E,density,im_m_over_pi`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "E,density,im_m_over_pi")?;
        for ((e, d), m) in self.e_grid.iter().zip(&self.density).zip(&self.im_m_over_pi) {
            writeln!(w, "{e:.12e},{d:.12e},{m:.12e}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// matched eigensolutions

/// T_E = λ·L_E·1(u<u0) + μ_R·R_E·1(u>u0), L_E(u0) = [1; 0], R_E(u0) = [0; 1].
#[derive(Clone, Debug)]
pub struct MatchedEigensolution {
    pub e: f64,
    pub u0: f64,
    pub coeff_left: f64,
    pub coeff_right: f64,
    pub left: Trajectory,
    pub right: Trajectory,
}

/// Builds both one-sided pieces over [u0 − left_len, u0] and [u0, u0 + right_len].
pub fn matched_eigensolution(
    a0: f64,
    e: f64,
    coeff_left: f64,
    coeff_right: f64,
    pot: &dyn Potential,
    left_len: f64,
    right_len: f64,
) -> Result<MatchedEigensolution> {
    let u0 = a0.ln();
    let left = integrate(u0, u0 - left_len, e.into(), TwoVector::real(1.0, 0.0), pot)?;
    let right = integrate(u0, u0 + right_len, e.into(), TwoVector::real(0.0, 1.0), pot)?;
    Ok(MatchedEigensolution {
        e,
        u0,
        coeff_left,
        coeff_right,
        left,
        right,
    })
}

impl MatchedEigensolution {
    /// One-sided limits l = T(u0−), r = T(u0+).
    pub fn limits(&self) -> (TwoVector, TwoVector) {
        let l = self.left.at(self.u0).scale(self.coeff_left.into());
        let r = self.right.at(self.u0).scale(self.coeff_right.into());
        (l, r)
    }

    /// ((δ₀|T), (δ₁|T)): half-sums of the one-sided limits.
    pub fn pairings(&self) -> (Complex64, Complex64) {
        let (l, r) = self.limits();
        ((l.alpha + r.alpha) / 2.0, (l.beta + r.beta) / 2.0)
    }

    /// Coefficients of δ(u − u0) in the two components of H(T) − E·T, where
    /// H = H₀ − (δ₁|·)δ₀ − (δ₀|·)δ₁ and δ₀ = [2δ; 0], δ₁ = [0; 2δ]. The jump
    /// of T contributes [r₁ − l₁; −(r₀ − l₀)]; the result is [−2l₁; −2r₀].
    pub fn singular_residual(&self) -> (Complex64, Complex64) {
        let (l, r) = self.limits();
        let (p0, p1) = self.pairings();
        (r.beta - l.beta - 2.0 * p1, -(r.alpha - l.alpha) - 2.0 * p0)
    }

    /// Tail of the right piece: ∫|R|² du/2 over the last `frac` of its range
    /// relative to the whole.
    pub fn right_tail_fraction(&self, frac: f64) -> f64 {
        let (lo, hi) = (self.right.u_min(), self.right.u_max());
        let cut = hi - (hi - lo) * frac;
        self.right.norm_sq(cut, hi) / self.right.norm_sq(lo, hi)
    }
}

// ---------------------------------------------------------------------------
// isometric expansion

/// [𝒜(u, ½+iE); ℬ(u, ½+iE)] sampled on a (u, E) grid, E ≥ 0, from which the
/// expansion F ↦ (α, β) and its inverse are assembled.
#[derive(Clone, Debug)]
pub struct ExpansionGrid {
    pub e_nodes: Vec<f64>,
    pub e_weights: Vec<f64>,
    pub gamma_abs2: Vec<f64>,
    pub u_grid: Vec<f64>,
    /// row-major [e][u]
    pub cal_a: Vec<f64>,
    pub cal_b: Vec<f64>,
    pub anchor_u: f64,
}

pub struct ExpansionSettings {
    pub e_max: f64,
    pub panel: f64,
    pub points: usize,
    pub u_min: f64,
    pub du: f64,
    pub anchor_u: f64,
}

impl Default for ExpansionSettings {
    fn default() -> Self {
        ExpansionSettings {
            e_max: 12.0,
            panel: 0.5,
            points: 10,
            u_min: -12.0,
            du: 0.01,
            anchor_u: 0.5,
        }
    }
}

/// Build the grid: for each E-node, evaluate [𝒜; ℬ] directly at the anchor
/// and integrate backward through the table.
pub fn expansion_grid(pot: &PotentialTable, st: &ExpansionSettings) -> Result<ExpansionGrid> {
    if !(pot.contains(st.u_min) && pot.contains(st.anchor_u)) {
        return Err(Error::TableRange {
            u: st.u_min,
            lo: pot.u_min(),
            hi: pot.u_max(),
        });
    }
    let base = gauss_legendre(st.points, &0.0f64);
    let panels = (st.e_max / st.panel).ceil() as usize;
    let mut e_nodes = vec![];
    let mut e_weights = vec![];
    for p in 0..panels {
        let r = base.on(&(p as f64 * st.panel), &((p + 1) as f64 * st.panel));
        e_nodes.extend(r.nodes);
        e_weights.extend(r.weights);
    }
    let nu = ((st.anchor_u - st.u_min) / st.du).round() as usize;
    let u_grid: Vec<f64> = (0..=nu).map(|i| st.u_min + (st.anchor_u - st.u_min) * i as f64 / nu as f64).collect();
    let ev = StructureEvaluator::shared(st.anchor_u.exp())?;
    let rows: Vec<Result<(f64, Vec<f64>, Vec<f64>)>> = e_nodes
        .par_iter()
        .map(|&e| {
            let p = critical(&ev, e)?;
            let init = TwoVector::new(p.cal_a, p.cal_b);
            let tr = integrate(st.anchor_u, st.u_min, e.into(), init, pot)?;
            let g = crate::special_functions::gamma_factor(Complex64::new(0.5, e))?.norm_sqr();
            let (mut a, mut b) = (Vec::with_capacity(u_grid.len()), Vec::with_capacity(u_grid.len()));
            for &u in &u_grid {
                let y = tr.at(u);
                a.push(y.alpha.re);
                b.push(y.beta.re);
            }
            Ok((g, a, b))
        })
        .collect();
    let mut grid = ExpansionGrid {
        e_nodes,
        e_weights,
        gamma_abs2: vec![],
        u_grid,
        cal_a: vec![],
        cal_b: vec![],
        anchor_u: st.anchor_u,
    };
    for r in rows {
        let (g, a, b) = r?;
        grid.gamma_abs2.push(g);
        grid.cal_a.extend(a);
        grid.cal_b.extend(b);
    }
    Ok(grid)
}

/// (α, β) on the u-grid.
#[derive(Clone, Debug)]
pub struct Expansion {
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
}

fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    // n points; falls back to a trapezoid on the last interval if n is even
    let mut w = vec![0.0; n];
    let m = if n % 2 == 1 { n } else { n - 1 };
    for (i, wi) in w.iter_mut().enumerate().take(m) {
        *wi = h / 3.0 * if i == 0 || i == m - 1 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    if m < n {
        w[n - 2] += h / 2.0;
        w[n - 1] += h / 2.0;
    }
    w
}

impl ExpansionGrid {
    fn nu(&self) -> usize {
        self.u_grid.len()
    }

    /// α(u) = ∫ F(s)·2𝒜(u,s) dE/(2π|γ(s)|²), β likewise with ℬ. `f` gives F(½+iE).
    pub fn forward(&self, f: &dyn Fn(f64) -> Complex64) -> Expansion {
        let samples: Vec<(Complex64, Complex64)> = self.e_nodes.iter().map(|&e| (f(e), f(-e))).collect();
        self.forward_nodes(&samples)
    }

    /// As [`forward`](Self::forward) from samples (F(½+iE), F(½−iE)) at the nodes.
    pub fn forward_nodes(&self, samples: &[(Complex64, Complex64)]) -> Expansion {
        let nu = self.nu();
        let mut alpha = vec![Complex64::new(0.0, 0.0); nu];
        let mut beta = vec![Complex64::new(0.0, 0.0); nu];
        for k in 0..self.e_nodes.len() {
            let w = self.e_weights[k] / (2.0 * PI * self.gamma_abs2[k]);
            // 𝒜(½−iE) = 𝒜(½+iE), ℬ(½−iE) = −ℬ(½+iE)
            let (fp, fm) = samples[k];
            let ca = (fp + fm) * (2.0 * w);
            let cb = (fp - fm) * (2.0 * w);
            let row = k * nu;
            for i in 0..nu {
                alpha[i] += ca * self.cal_a[row + i];
                beta[i] += cb * self.cal_b[row + i];
            }
        }
        Expansion { alpha, beta }
    }

    /// F(½ ± iE) at the E-nodes from ∫ α·2𝒜 + β·2ℬ du/2 over u ≥ u_lo.
    pub fn inverse(&self, x: &Expansion, u_lo: f64) -> Vec<(Complex64, Complex64)> {
        let nu = self.nu();
        let h = self.u_grid[1] - self.u_grid[0];
        let start = self.u_grid.partition_point(|&u| u < u_lo - 1e-12);
        let w = simpson_weights(nu - start, h);
        // partial first interval when u_lo falls between grid points
        let gap = if start > 0 { self.u_grid[start] - u_lo } else { 0.0 };
        (0..self.e_nodes.len())
            .map(|k| {
                let row = k * nu;
                let pa = |i: usize| x.alpha[i] * self.cal_a[row + i];
                let pb = |i: usize| x.beta[i] * self.cal_b[row + i];
                let mut sa = Complex64::new(0.0, 0.0);
                let mut sb = Complex64::new(0.0, 0.0);
                for (j, wj) in w.iter().enumerate() {
                    sa += pa(start + j) * *wj;
                    sb += pb(start + j) * *wj;
                }
                if gap > 1e-12 {
                    let t = 1.0 - gap / h;
                    let ia = pa(start - 1) * (1.0 - t) + pa(start) * t;
                    let ib = pb(start - 1) * (1.0 - t) + pb(start) * t;
                    sa += (ia + pa(start)) * (gap / 2.0);
                    sb += (ib + pb(start)) * (gap / 2.0);
                }
                // du/2 and the factor 2 cancel
                (sa + sb, sa - sb)
            })
            .collect()
    }

    /// ∫ (|α|² + |β|²) du/2.
    pub fn norm_u(&self, x: &Expansion) -> f64 {
        let h = self.u_grid[1] - self.u_grid[0];
        let w = simpson_weights(self.nu(), h);
        w.iter()
            .enumerate()
            .map(|(i, wi)| wi * (x.alpha[i].norm_sqr() + x.beta[i].norm_sqr()))
            .sum::<f64>()
            / 2.0
    }

    /// ∫ (|α|² + |β|²) du/2 over grid points in [lo, hi].
    pub fn norm_u_between(&self, x: &Expansion, lo: f64, hi: f64) -> f64 {
        let i0 = self.u_grid.partition_point(|&u| u < lo - 1e-12);
        let i1 = self.u_grid.partition_point(|&u| u <= hi + 1e-12);
        if i1 < i0 + 2 {
            return 0.0;
        }
        let h = self.u_grid[1] - self.u_grid[0];
        simpson_weights(i1 - i0, h)
            .iter()
            .enumerate()
            .map(|(j, w)| w * (x.alpha[i0 + j].norm_sqr() + x.beta[i0 + j].norm_sqr()))
            .sum::<f64>()
            / 2.0
    }

    /// ∫ |F|² dE/(2π|γ|²) over the symmetric grid.
    pub fn norm_e(&self, f: &dyn Fn(f64) -> Complex64) -> f64 {
        self.e_nodes
            .iter()
            .enumerate()
            .map(|(k, &e)| self.e_weights[k] * (f(e).norm_sqr() + f(-e).norm_sqr()) / (2.0 * PI * self.gamma_abs2[k]))
            .sum()
    }

    /// Weighted L² distance between G and F at the nodes, relative to ‖F‖.
    pub fn relative_distance(&self, g: &[(Complex64, Complex64)], f: &dyn Fn(f64) -> Complex64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, &e) in self.e_nodes.iter().enumerate() {
            let w = self.e_weights[k] / (2.0 * PI * self.gamma_abs2[k]);
            num += w * ((g[k].0 - f(e)).norm_sqr() + (g[k].1 - f(-e)).norm_sqr());
            den += w * (f(e).norm_sqr() + f(-e).norm_sqr());
        }
        (num / den).sqrt()
    }
}

/// Projection of F onto the space attached to a0, evaluated at the E-node
/// `k` through the evaluator kernel:
/// (PF)(z) = γ(z)/(2π) ∫ F(½+iE)/γ(½+iE) · X_z(½−iE) dE.
/// Truncating (α, β) to u > ln a0 and applying the inverse expansion must
/// reproduce it.
pub fn projection_via_kernel(grid: &ExpansionGrid, f: &dyn Fn(f64) -> Complex64, a0: f64, k: usize) -> Result<Complex64> {
    let ev = StructureEvaluator::shared(a0)?;
    let g = |e: f64| crate::special_functions::gamma_factor(Complex64::new(0.5, e));
    let z = Complex64::new(0.5, grid.e_nodes[k]);
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, &e) in grid.e_nodes.iter().enumerate() {
        for ee in [e, -e] {
            acc += grid.e_weights[j] * f(ee) / g(ee)? * ev.inner(z, Complex64::new(0.5, -ee))?;
        }
    }
    Ok(g(z.im)? * acc / (2.0 * PI))
}

/// Largest relative gap between truncation-then-inverse and the kernel
/// projection over the given E-nodes.
pub fn projection_defect(grid: &ExpansionGrid, f: &dyn Fn(f64) -> Complex64, a0: f64, nodes: &[usize]) -> Result<f64> {
    let x = grid.forward(f);
    let tr = grid.inverse(&x, a0.ln());
    let mut worst: f64 = 0.0;
    for &k in nodes {
        let p = projection_via_kernel(grid, f, a0, k)?;
        worst = worst.max((tr[k].0 - p).norm() / p.norm());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RoundTrip {
    /// ∫|F|² dE/(2π|γ|²)
    pub norm_e: f64,
    /// ∫(|α|²+|β|²) du/2
    pub norm_u: f64,
    pub parseval_defect: f64,
    /// ‖inverse(forward F) − F‖/‖F‖
    pub round_trip_defect: f64,
}

/// Forward then inverse expansion of F with both Parseval sides.
pub fn isometric_round_trip(grid: &ExpansionGrid, f: &dyn Fn(f64) -> Complex64) -> RoundTrip {
    let x = grid.forward(f);
    let ne = grid.norm_e(f);
    let nu = grid.norm_u(&x);
    let back = grid.inverse(&x, f64::NEG_INFINITY);
    let rt = grid.relative_distance(&back, f);
    let d = (nu - ne).abs() / ne;
    if d > 0.01 {
        log::warn!("Parseval defect {d:e}: grid too coarse or test function not concentrated");
    }
    RoundTrip {
        norm_e: ne,
        norm_u: nu,
        parseval_defect: d,
        round_trip_defect: rt,
    }
}

// ---------------------------------------------------------------------------
// scattering transform

/// Constant c in ∫(|α|²+|β|²)du/2 = c/(2π)·∫|T̃|² dE/|K|², fixed on the free
/// system (see `calibrate_plancherel_free`).
pub const PLANCHEREL_CONSTANT: f64 = 1.0;

#[derive(Clone, Debug, Serialize)]
pub struct ScatteringTransform {
    pub u0: f64,
    pub e_nodes: Vec<f64>,
    pub t_tilde: Vec<f64>,
    pub k_abs2: Vec<f64>,
    /// ∫(|α|²+|β|²) du/2
    pub lhs: f64,
    /// (1/2π)∫|T̃|² dE/|K|²
    pub rhs: f64,
}

impl ScatteringTransform {
    pub fn defect(&self, constant: f64) -> f64 {
        (self.lhs - constant * self.rhs).abs() / self.lhs
    }
}

pub struct TransformSettings {
    pub e_max: f64,
    pub panel: f64,
    pub points: usize,
}

impl Default for TransformSettings {
    fn default() -> Self {
        TransformSettings {
            e_max: 30.0,
            panel: 0.5,
            points: 8,
        }
    }
}

/// T̃(E) = ∫ α ψ₀ + β ψ₁ du over the support of T (inside (−∞, u0]), with ψ
/// the real solution with ψ(u0) = [1; 0]; |K(u0, ½+iE)|² from `k_abs2`.
fn transform_with(
    u0: f64,
    t: &(dyn Fn(f64) -> (f64, f64) + Sync),
    support: (f64, f64),
    pot: &dyn Potential,
    k_abs2: &(dyn Fn(f64) -> Result<f64> + Sync),
    st: &TransformSettings,
) -> Result<ScatteringTransform> {
    let (lo, hi) = support;
    if !(lo < hi && hi <= u0 + 1e-12) {
        return Err(invalid("support", format!("[{lo}, {hi}] must lie left of u0 = {u0}")));
    }
    let base = gauss_legendre(st.points, &0.0f64);
    let panels = (2.0 * st.e_max / st.panel).ceil() as usize;
    let mut e_nodes = vec![];
    let mut e_w = vec![];
    for p in 0..panels {
        let a = -st.e_max + p as f64 * st.panel;
        let r = base.on(&a, &(a + st.panel));
        e_nodes.extend(r.nodes);
        e_w.extend(r.weights);
    }
    let rows: Vec<Result<(f64, f64)>> = e_nodes
        .par_iter()
        .map(|&e| {
            let psi = integrate(u0, lo, e.into(), TwoVector::real(1.0, 0.0), pot)?;
            let v = psi.integrate(lo, hi, 1e-3, |u, y| {
                let (a, b) = t(u);
                (y.alpha * a + y.beta * b).re.into()
            });
            Ok((v.re, k_abs2(e)?))
        })
        .collect();
    let mut out = ScatteringTransform {
        u0,
        e_nodes,
        t_tilde: vec![],
        k_abs2: vec![],
        lhs: 0.0,
        rhs: 0.0,
    };
    for r in rows {
        let (v, k) = r?;
        out.t_tilde.push(v);
        out.k_abs2.push(k);
    }
    out.rhs = out
        .t_tilde
        .iter()
        .zip(&out.k_abs2)
        .zip(&e_w)
        .map(|((v, k), w)| w * v * v / k)
        .sum::<f64>()
        / (2.0 * PI);
    // ∫ |T|² du/2 by Simpson
    let m = 4000;
    let h = (hi - lo) / m as f64;
    let w = simpson_weights(m + 1, h);
    out.lhs = w
        .iter()
        .enumerate()
        .map(|(i, wi)| {
            let (a, b) = t(lo + h * i as f64);
            wi * (a * a + b * b)
        })
        .sum::<f64>()
        / 2.0;
    Ok(out)
}

/// Scattering transform over the computed potential with K from the
/// structure functions at a0.
pub fn scattering_transform(
    a0: f64,
    t: &(dyn Fn(f64) -> (f64, f64) + Sync),
    support: (f64, f64),
    pot: &PotentialTable,
    st: &TransformSettings,
) -> Result<ScatteringTransform> {
    let ev = StructureEvaluator::shared(a0)?;
    let k = |e: f64| -> Result<f64> { Ok(critical(&ev, e)?.k.norm_sqr()) };
    transform_with(a0.ln(), t, support, pot, &k, st)
}

/// The same transform for μ ≡ 0, where K(u, s) = i·e^(−iEu) and |K| = 1.
pub fn scattering_transform_free(
    u0: f64,
    t: &(dyn Fn(f64) -> (f64, f64) + Sync),
    support: (f64, f64),
    st: &TransformSettings,
) -> Result<ScatteringTransform> {
    transform_with(u0, t, support, &crate::dirac_system::FreePotential, &|_| Ok(1.0), st)
}

/// lhs/rhs on the free system for a smooth bump; the frozen
/// [`PLANCHEREL_CONSTANT`] is this value rounded.
pub fn calibrate_plancherel_free() -> Result<f64> {
    let bump = |u: f64| -> (f64, f64) { ((-(u + 2.0).powi(2) / (2.0 * 0.2f64.powi(2))).exp(), 0.0) };
    let tr = scattering_transform_free(0.0, &bump, (-3.0, -1.0), &TransformSettings::default())?;
    Ok(tr.lhs / tr.rhs)
}

/// ψ(u, ½+iE) = [Im(K(u0, ½−iE)J(u, ½+iE)); Im(K(u0, ½−iE)K(u, ½+iE))].
pub fn psi_formula(a0: f64, a: f64, e: f64) -> Result<TwoVector> {
    let k0 = StructureEvaluator::shared(a0)?.evaluate(Complex64::new(0.5, -e))?.k;
    let p = StructureEvaluator::shared(a)?.evaluate(Complex64::new(0.5, e))?;
    Ok(TwoVector::real((k0 * p.j).im, (k0 * p.k).im))
}

// ---------------------------------------------------------------------------
// counting

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Counting {
    pub t: f64,
    pub count: usize,
    pub rvm: f64,
    /// N(T)/rvm_count(T); None where the comparator is not positive
    pub ratio: Option<f64>,
}

/// N(T) = #{Eₙ ∈ (0, T]} against the smoothed zero count.
pub fn counting_comparison(spec: &BoundStateSpectrum, t: f64) -> Result<Counting> {
    if !(t > 0.0) || t > spec.e_max * (1.0 + 1e-12) {
        return Err(invalid("T", format!("must lie in (0, {}], got {t}", spec.e_max)));
    }
    let count = spec.eigenvalues.iter().filter(|&&e| e > 0.0 && e <= t).count();
    let rvm = rvm_count(t)?;
    Ok(Counting {
        t,
        count,
        rvm,
        ratio: if rvm > 0.0 { Some(count as f64 / rvm) } else { None },
    })
}
