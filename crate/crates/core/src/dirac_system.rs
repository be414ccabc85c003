//! The two-component system in u = ln a
//!
//! ```text
//! α′ = −μ(u)α − Eβ,    β′ = μ(u)β + Eα,    s = ½ + iE
//! ```
//!
//! integrated by classical RK4 with step doubling against a gridded μ, plus a
//! multiprecision Gauss collocation propagator used where the direction of
//! integration is exponentially unstable (forward propagation of [𝒜; ℬ]).
//! The Wronskian of two solutions is α₁β₂ − β₁α₂.

use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rug::Float;

use crate::cosine_kernel::{mu_exact, scaled_nodes, structure_precision, PotentialTable, DEFAULT_NODES};
use crate::error::{invalid, io_err, Error, Result};
use crate::quadrature::{gauss_legendre, Chebyshev};
use crate::real::{Cx, Real};
use crate::structure_functions::StructureEvaluator;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoVector {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl TwoVector {
    pub fn new(alpha: Complex64, beta: Complex64) -> Self {
        TwoVector { alpha, beta }
    }

    pub fn real(alpha: f64, beta: f64) -> Self {
        Self::new(alpha.into(), beta.into())
    }

    pub fn norm(&self) -> f64 {
        (self.alpha.norm_sqr() + self.beta.norm_sqr()).sqrt()
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self::new(self.alpha * k, self.beta * k)
    }

    fn axpy(&self, h: f64, d: &TwoVector) -> Self {
        Self::new(self.alpha + d.alpha * h, self.beta + d.beta * h)
    }

    fn sub(&self, o: &TwoVector) -> Self {
        Self::new(self.alpha - o.alpha, self.beta - o.beta)
    }
}

/// α₁β₂ − β₁α₂.
pub fn wronskian(x: &TwoVector, y: &TwoVector) -> Complex64 {
    x.alpha * y.beta - x.beta * y.alpha
}

/// E = −i(s − ½).
pub fn energy_of(s: Complex64) -> Complex64 {
    Complex64::new(s.im, 0.5 - s.re)
}

/// s = ½ + iE.
pub fn s_of(e: Complex64) -> Complex64 {
    Complex64::new(0.5 - e.im, e.re)
}

/// A potential μ(u) on a bounded u-range.
pub trait Potential: Sync {
    fn mu(&self, u: f64) -> f64;
    fn range(&self) -> (f64, f64);
}

impl Potential for PotentialTable {
    fn mu(&self, u: f64) -> f64 {
        self.interp(u)
    }

    fn range(&self) -> (f64, f64) {
        (self.u_min(), self.u_max())
    }
}

/// μ ≡ 0 on the whole line.
#[derive(Clone, Copy, Debug, Default)]
pub struct FreePotential;

impl Potential for FreePotential {
    fn mu(&self, _u: f64) -> f64 {
        0.0
    }

    fn range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

fn rhs(mu: f64, e: Complex64, y: &TwoVector) -> TwoVector {
    TwoVector::new(-mu * y.alpha - e * y.beta, mu * y.beta + e * y.alpha)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorSettings {
    /// Base (and maximum) step in u.
    pub h: f64,
    /// Relative tolerance of the step-doubling estimate.
    pub tol: f64,
    pub h_min: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            h: 1e-3,
            tol: 1e-11,
            h_min: 1e-9,
        }
    }
}

/// Where a trajectory came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub boundary: String,
    pub u_start: f64,
    pub method: String,
}

/// Solution samples on an ascending u-grid, with derivatives for Hermite
/// interpolation.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub u_grid: Vec<f64>,
    pub values: Vec<TwoVector>,
    pub derivs: Vec<TwoVector>,
    pub e: Complex64,
    pub provenance: Provenance,
}

impl Trajectory {
    fn from_steps(mut u: Vec<f64>, mut v: Vec<TwoVector>, e: Complex64, pot: &dyn Potential, prov: Provenance) -> Self {
        if u.len() > 1 && u[0] > u[u.len() - 1] {
            u.reverse();
            v.reverse();
        }
        let derivs = u.iter().zip(&v).map(|(&x, y)| rhs(pot.mu(x), e, y)).collect();
        Trajectory {
            u_grid: u,
            values: v,
            derivs,
            e,
            provenance: prov,
        }
    }

    pub fn u_min(&self) -> f64 {
        self.u_grid[0]
    }

    pub fn u_max(&self) -> f64 {
        *self.u_grid.last().unwrap()
    }

    /// Value at the end opposite to the starting point.
    pub fn end_value(&self) -> TwoVector {
        if self.provenance.u_start <= self.u_min() {
            *self.values.last().unwrap()
        } else {
            self.values[0]
        }
    }

    /// Cubic Hermite interpolation.
    pub fn at(&self, u: f64) -> TwoVector {
        let n = self.u_grid.len();
        if n == 1 {
            return self.values[0];
        }
        let i = match self.u_grid.partition_point(|&x| x <= u) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (x0, x1) = (self.u_grid[i], self.u_grid[i + 1]);
        let h = x1 - x0;
        let t = (u - x0) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        let (y0, y1, d0, d1) = (&self.values[i], &self.values[i + 1], &self.derivs[i], &self.derivs[i + 1]);
        TwoVector::new(
            y0.alpha * h00 + d0.alpha * (h10 * h) + y1.alpha * h01 + d1.alpha * (h11 * h),
            y0.beta * h00 + d0.beta * (h10 * h) + y1.beta * h01 + d1.beta * (h11 * h),
        )
    }

    /// ∫ f(u, y(u)) du over [lo, hi] by Simpson on the Hermite interpolant.
    pub fn integrate<F: Fn(f64, &TwoVector) -> Complex64>(&self, lo: f64, hi: f64, step: f64, f: F) -> Complex64 {
        let m = (((hi - lo) / step).ceil().max(2.0) as usize).div_ceil(2) * 2;
        let h = (hi - lo) / m as f64;
        let mut s = f(lo, &self.at(lo)) + f(hi, &self.at(hi));
        for i in 1..m {
            let u = lo + h * i as f64;
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += f(u, &self.at(u)) * w;
        }
        s * (h / 3.0)
    }

    /// ∫ (|α|² + |β|²) du/2 over [lo, hi].
    pub fn norm_sq(&self, lo: f64, hi: f64) -> f64 {
        self.integrate(lo, hi, 2.5e-4, |_, y| (y.alpha.norm_sqr() + y.beta.norm_sqr()).into())
            .re
            / 2.0
    }

    /// ∫ (α·conj α̃ + β·conj β̃) du/2 over [lo, hi].
    pub fn inner(&self, other: &Trajectory, lo: f64, hi: f64) -> Complex64 {
        self.integrate(lo, hi, 2.5e-4, |u, y| {
            let z = other.at(u);
            y.alpha * z.alpha.conj() + y.beta * z.beta.conj()
        }) / 2.0
    }

    /// CSV with header `u,Reα,Imα,Reβ,Imβ`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "u,Reα,Imα,Reβ,Imβ")?;
        for (u, y) in self.u_grid.iter().zip(&self.values) {
            writeln!(w, "{u:e},{:e},{:e},{:e},{:e}", y.alpha.re, y.alpha.im, y.beta.re, y.beta.im)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(io_err(path))?;
        self.write_csv(std::io::BufWriter::new(f)).map_err(io_err(path))
    }
}

fn rk4(pot: &dyn Potential, e: Complex64, u: f64, y: &TwoVector, h: f64) -> TwoVector {
    let m0 = pot.mu(u);
    let mh = pot.mu(u + h / 2.0);
    let m1 = pot.mu(u + h);
    let k1 = rhs(m0, e, y);
    let k2 = rhs(mh, e, &y.axpy(h / 2.0, &k1));
    let k3 = rhs(mh, e, &y.axpy(h / 2.0, &k2));
    let k4 = rhs(m1, e, &y.axpy(h, &k3));
    TwoVector::new(
        y.alpha + (k1.alpha + (k2.alpha + k3.alpha) * 2.0 + k4.alpha) * (h / 6.0),
        y.beta + (k1.beta + (k2.beta + k3.beta) * 2.0 + k4.beta) * (h / 6.0),
    )
}

fn check_range(pot: &dyn Potential, u0: f64, u1: f64) -> Result<()> {
    let (lo, hi) = pot.range();
    for u in [u0, u1] {
        if !u.is_finite() {
            return Err(invalid("u", "non-finite endpoint"));
        }
        let eps = 1e-12 * (1.0 + u.abs());
        if u < lo - eps || u > hi + eps {
            return Err(Error::TableRange { u, lo, hi });
        }
    }
    Ok(())
}

/// Integrate from u0 to u1 (either direction) with the default settings.
pub fn integrate(u0: f64, u1: f64, e: Complex64, init: TwoVector, pot: &dyn Potential) -> Result<Trajectory> {
    integrate_with(u0, u1, e, init, pot, IntegratorSettings::default())
}

/// RK4 with step doubling: each step is taken once with h and twice with h/2;
/// the h/2 result is kept when the difference is within tolerance.
pub fn integrate_with(
    u0: f64,
    u1: f64,
    e: Complex64,
    init: TwoVector,
    pot: &dyn Potential,
    settings: IntegratorSettings,
) -> Result<Trajectory> {
    check_range(pot, u0, u1)?;
    if !(e.re.is_finite() && e.im.is_finite()) {
        return Err(invalid("E", "non-finite"));
    }
    let dir = if u1 >= u0 { 1.0 } else { -1.0 };
    let mut u = u0;
    let mut y = init;
    let mut us = vec![u0];
    let mut ys = vec![init];
    let mut h = settings.h;
    while (u1 - u) * dir > 1e-14 * (1.0 + u.abs()) {
        let step = h.min((u1 - u).abs()) * dir;
        let full = rk4(pot, e, u, &y, step);
        let mid = rk4(pot, e, u, &y, step / 2.0);
        let half = rk4(pot, e, u + step / 2.0, &mid, step / 2.0);
        let err = half.sub(&full).norm() / 15.0;
        let scale = settings.tol * half.norm().max(1e-300);
        if err <= scale || h <= settings.h_min {
            if err > scale {
                return Err(Error::StepUnderflow { u });
            }
            u = if (u1 - (u + step)) * dir <= 1e-14 * (1.0 + u.abs()) { u1 } else { u + step };
            y = half;
            us.push(u);
            ys.push(y);
            if err < scale / 32.0 {
                h = (h * 2.0).min(settings.h);
            }
        } else {
            h /= 2.0;
        }
    }
    Ok(Trajectory::from_steps(
        us,
        ys,
        e,
        pot,
        Provenance {
            boundary: format!("[{}; {}] at u = {u0}", init.alpha, init.beta),
            u_start: u0,
            method: format!("rk4 step-doubling h={} tol={:e}", settings.h, settings.tol),
        },
    ))
}

/// Plain RK4 with `steps` equal steps (no error control).
pub fn integrate_fixed(u0: f64, u1: f64, e: Complex64, init: TwoVector, pot: &dyn Potential, steps: usize) -> Result<Trajectory> {
    check_range(pot, u0, u1)?;
    if steps == 0 {
        return Err(invalid("steps", "need at least one step"));
    }
    let h = (u1 - u0) / steps as f64;
    let mut y = init;
    let mut us = vec![u0];
    let mut ys = vec![init];
    for i in 0..steps {
        let u = u0 + h * i as f64;
        y = rk4(pot, e, u, &y, h);
        us.push(if i + 1 == steps { u1 } else { u + h });
        ys.push(y);
    }
    Ok(Trajectory::from_steps(
        us,
        ys,
        e,
        pot,
        Provenance {
            boundary: format!("[{}; {}] at u = {u0}", init.alpha, init.beta),
            u_start: u0,
            method: format!("rk4 fixed h={h}"),
        },
    ))
}

/// Solutions with ψ(u0) = [1; 0] and φ(u0) = [0; 1], integrated to `u_end`.
pub fn canonical_psi_phi(u0: f64, e: Complex64, pot: &dyn Potential, u_end: f64) -> Result<(Trajectory, Trajectory)> {
    let psi = integrate(u0, u_end, e, TwoVector::real(1.0, 0.0), pot)?;
    let phi = integrate(u0, u_end, e, TwoVector::real(0.0, 1.0), pot)?;
    Ok((psi, phi))
}

// ---------------------------------------------------------------------------
// multiprecision propagation of [𝒜; ℬ]

/// Gauss–Legendre collocation (implicit, order 2·stages) for y′ = M(u)y.
pub(crate) struct Collocation<T> {
    c: Vec<T>,
    b: Vec<T>,
    /// row-major A_ij = ∫₀^{cᵢ} ℓⱼ
    a: Vec<T>,
}

fn solve_real<T: Real>(mut m: Vec<T>, mut rhs: Vec<T>, n: usize) -> Vec<T> {
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().partial_cmp(&m[j * n + col].abs()).unwrap())
            .unwrap();
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            rhs.swap(piv, col);
        }
        let d = m[col * n + col].clone();
        for r in col + 1..n {
            let f = m[r * n + col].clone() / &d;
            for k in col..n {
                let v = m[col * n + k].clone();
                m[r * n + k].sub_mul(&f, &v);
            }
            let v = rhs[col].clone();
            rhs[r].sub_mul(&f, &v);
        }
    }
    let mut x = rhs.clone();
    for r in (0..n).rev() {
        let mut s = rhs[r].clone();
        for k in r + 1..n {
            s.sub_mul(&m[r * n + k], &x[k]);
        }
        x[r] = s / &m[r * n + r];
    }
    x
}

fn solve_complex<T: Real>(mut m: Vec<Cx<T>>, mut rhs: Vec<Cx<T>>, n: usize) -> Vec<Cx<T>> {
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| {
                let a = m[i * n + col].norm_sqr().to_f64();
                let b = m[j * n + col].norm_sqr().to_f64();
                a.partial_cmp(&b).unwrap()
            })
            .unwrap();
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            rhs.swap(piv, col);
        }
        let inv = m[col * n + col].recip();
        for r in col + 1..n {
            let f = m[r * n + col].clone() * inv.clone();
            for k in col..n {
                let v = m[col * n + k].clone();
                m[r * n + k] = m[r * n + k].clone() - f.clone() * v;
            }
            rhs[r] = rhs[r].clone() - f * rhs[col].clone();
        }
    }
    let mut x = rhs.clone();
    for r in (0..n).rev() {
        let mut s = rhs[r].clone();
        for k in r + 1..n {
            s = s - m[r * n + k].clone() * x[k].clone();
        }
        x[r] = s / m[r * n + r].clone();
    }
    x
}

impl<T: Real> Collocation<T> {
    pub fn new(stages: usize, proto: &T) -> Self {
        let rule = gauss_legendre(stages, proto);
        let c = rule.nodes;
        let b = rule.weights;
        // Σⱼ A_ij cⱼ^k = cᵢ^(k+1)/(k+1)
        let mut p = vec![proto.zero(); stages * stages];
        for k in 0..stages {
            for j in 0..stages {
                let mut v = proto.one();
                for _ in 0..k {
                    v *= &c[j];
                }
                p[k * stages + j] = v;
            }
        }
        let mut a = vec![proto.zero(); stages * stages];
        for i in 0..stages {
            let r: Vec<T> = (0..stages)
                .map(|k| {
                    let mut v = c[i].clone();
                    for _ in 0..k {
                        v *= &c[i];
                    }
                    v / proto.lit((k + 1) as f64)
                })
                .collect();
            let x = solve_real(p.clone(), r, stages);
            for j in 0..stages {
                a[i * stages + j] = x[j].clone();
            }
        }
        Collocation { c, b, a }
    }

    /// One step of length h from (u, y) with μ supplied at the stage points.
    pub fn step(&self, u: &T, h: &T, e: &Cx<T>, y: &[Cx<T>; 2], mu: &dyn Fn(&T) -> T) -> [Cx<T>; 2] {
        let st = self.c.len();
        let m = 2 * st;
        let zero = Cx::real(u.zero());
        let one = Cx::real(u.one());
        let mus: Vec<T> = self.c.iter().map(|c| mu(&(u.clone() + &(c.clone() * h)))).collect();
        // stage block M_j = [[−μ, −E], [E, μ]]
        let block = |j: usize, r: usize, d: usize| -> Cx<T> {
            match (r, d) {
                (0, 0) => Cx::real(-mus[j].clone()),
                (0, 1) => -e.clone(),
                (1, 0) => e.clone(),
                _ => Cx::real(mus[j].clone()),
            }
        };
        let mut mat = vec![zero.clone(); m * m];
        for i in 0..st {
            for j in 0..st {
                let ha = self.a[i * st + j].clone() * h;
                for r in 0..2 {
                    for d in 0..2 {
                        let mut v = -block(j, r, d).scale(&ha);
                        if i == j && r == d {
                            v = v + one.clone();
                        }
                        mat[(2 * i + r) * m + 2 * j + d] = v;
                    }
                }
            }
        }
        let rhs: Vec<Cx<T>> = (0..m).map(|k| y[k % 2].clone()).collect();
        let stages = solve_complex(mat, rhs, m);
        let mut out = [y[0].clone(), y[1].clone()];
        for j in 0..st {
            let hb = self.b[j].clone() * h;
            for (r, o) in out.iter_mut().enumerate() {
                let f = block(j, r, 0) * stages[2 * j].clone() + block(j, r, 1) * stages[2 * j + 1].clone();
                *o = o.clone() + f.scale(&hb);
            }
        }
        out
    }
}

/// Stages of the collocation rule and its step in u.
pub const COLLOCATION_STAGES: usize = 8;
pub const COLLOCATION_STEP: f64 = 0.01;
/// Chebyshev points for the working-precision μ on the propagation interval.
pub const MU_CHEBYSHEV_POINTS: usize = 40;

type MuKey = (u64, u64, u32, usize);

fn mu_interpolant(u0: f64, u1: f64, bits: u32, n: usize) -> Result<Arc<Chebyshev<Float>>> {
    static MEMO: OnceLock<Mutex<Vec<(MuKey, Arc<Chebyshev<Float>>)>>> = OnceLock::new();
    let memo = MEMO.get_or_init(|| Mutex::new(Vec::new()));
    let key = (u0.to_bits(), u1.to_bits(), bits, n);
    if let Some((_, c)) = memo.lock().unwrap().iter().find(|(k, _)| *k == key) {
        return Ok(c.clone());
    }
    let lo = Float::with_val(bits, u0);
    let hi = Float::with_val(bits, u1);
    let nodes = Chebyshev::nodes(&lo, &hi, MU_CHEBYSHEV_POINTS);
    use rayon::prelude::*;
    let values: Vec<Result<Float>> = nodes
        .par_iter()
        .map(|u| {
            let a = Real::exp(u);
            mu_exact(&a, scaled_nodes(n, a.to_f64()))
        })
        .collect();
    let values: Vec<Float> = values.into_iter().collect::<Result<_>>()?;
    let cheb = Chebyshev::from_values(&lo, &hi, &values);
    let tail = cheb.tail_ratio();
    if tail > 1e-24 {
        log::warn!("μ interpolant on [{u0}, {u1}] has tail {tail:e}");
    }
    let c = Arc::new(cheb);
    memo.lock().unwrap().push((key, c.clone()));
    Ok(c)
}

/// Result of [`ab_trajectory`].
#[derive(Clone, Debug)]
pub struct AbPropagation {
    /// [𝒜(u, s); ℬ(u, s)] on the collocation grid.
    pub trajectory: Trajectory,
    pub direct_start: TwoVector,
    /// Direct evaluation at a1, the oracle for the propagated endpoint.
    pub direct_end: TwoVector,
    pub precision: u32,
    /// Relative size of the last Chebyshev coefficients of μ.
    pub mu_tail: f64,
}

impl AbPropagation {
    pub fn propagated_end(&self) -> TwoVector {
        self.trajectory.end_value()
    }

    /// max(|Δ𝒜|, |Δℬ|) / ‖[𝒜; ℬ]‖ at a1.
    pub fn relative_error(&self) -> f64 {
        let p = self.propagated_end();
        let d = p.sub(&self.direct_end);
        d.alpha.norm().max(d.beta.norm()) / self.direct_end.norm()
    }
}

struct TablePot<'a>(&'a Chebyshev<Float>, f64, f64);

impl Potential for TablePot<'_> {
    fn mu(&self, u: f64) -> f64 {
        self.0.eval(&Float::with_val(64, u)).to_f64()
    }

    fn range(&self) -> (f64, f64) {
        (self.1, self.2)
    }
}

/// Propagate [𝒜ₐ(s); ℬₐ(s)] from a0 to a1 through the differential system,
/// starting from the direct evaluation at a0. Runs at the working precision
/// of a1 with μ from a Chebyshev interpolant of exact values, because in the
/// forward direction the growing solution (J, K) amplifies every rounding
/// error by roughly |J(a1)/J(a0)|·|𝒜(a0)/𝒜(a1)|.
pub fn ab_trajectory(a0: f64, a1: f64, s: Complex64) -> Result<AbPropagation> {
    ab_trajectory_with(a0, a1, s, DEFAULT_NODES)
}

pub fn ab_trajectory_with(a0: f64, a1: f64, s: Complex64, n: usize) -> Result<AbPropagation> {
    if !(a0 > 0.0 && a1 > 0.0) {
        return Err(invalid("a0", "a0 and a1 must be positive"));
    }
    let hi_a = a0.max(a1);
    let bits = structure_precision(hi_a).unwrap_or(128).max(128);
    let ev0 = StructureEvaluator::shared_with(a0, n, Some(bits))?;
    let ev1 = StructureEvaluator::shared_with(a1, n, Some(bits))?;
    let sp = Cx::new(Float::with_val(bits, s.re), Float::with_val(bits, s.im));
    // surface pole collisions as errors before any MP work
    ev0.evaluate(s)?;
    let p0 = ev0.point_mp(&sp).expect("multiprecision evaluator");
    let p1 = ev1.point_mp(&sp).expect("multiprecision evaluator");
    let (u0, u1) = (a0.ln(), a1.ln());
    let cheb = mu_interpolant(u0, u1, bits, n)?;
    let col = Collocation::new(COLLOCATION_STAGES, &Float::new(bits));
    let steps = ((u1 - u0).abs() / COLLOCATION_STEP).ceil().max(1.0) as usize;
    let uu0 = Float::with_val(bits, u0);
    let uu1 = Float::with_val(bits, u1);
    let h = (uu1.clone() - &uu0) / Float::with_val(bits, steps);
    let e = Cx::new(sp.im.clone(), Float::with_val(bits, 0.5) - &sp.re);
    let mu = |u: &Float| cheb.eval(u);
    let mut y = [p0.cal_a.clone(), p0.cal_b.clone()];
    let mut us = vec![u0];
    let mut ys = vec![TwoVector::new(y[0].to_c64(), y[1].to_c64())];
    for i in 0..steps {
        let u = uu0.clone() + &(h.clone() * Float::with_val(bits, i));
        y = col.step(&u, &h, &e, &y, &mu);
        us.push(if i + 1 == steps { u1 } else { (u + &h).to_f64() });
        ys.push(TwoVector::new(y[0].to_c64(), y[1].to_c64()));
    }
    let pot = TablePot(&cheb, u0.min(u1), u0.max(u1));
    let traj = Trajectory::from_steps(
        us,
        ys,
        energy_of(s),
        &pot,
        Provenance {
            boundary: format!("[𝒜; ℬ] at a = {a0}, s = {s}"),
            u_start: u0,
            method: format!("Gauss collocation {COLLOCATION_STAGES} stages, h = {COLLOCATION_STEP}, {bits} bits"),
        },
    );
    Ok(AbPropagation {
        trajectory: traj,
        direct_start: TwoVector::new(p0.cal_a.to_c64(), p0.cal_b.to_c64()),
        direct_end: TwoVector::new(p1.cal_a.to_c64(), p1.cal_b.to_c64()),
        precision: bits,
        mu_tail: cheb.tail_ratio(),
    })
}

/// 𝒜K − ℬJ at (u = ln a, s); equals iγ(1−s).
pub fn wronskian_aj(a: f64, s: Complex64) -> Result<Complex64> {
    Ok(StructureEvaluator::shared(a)?.evaluate(s)?.wronskian)
}

/// Im(−J(u,s)·conj K(u,s)) at s = ½ + iE; equals 1.
pub fn w1_identity(a: f64, e: f64) -> Result<f64> {
    Ok(StructureEvaluator::shared(a)?.evaluate(Complex64::new(0.5, e))?.w1)
}

/// [J(u, s); K(u, s)] at u = ln a.
pub fn jk_at(a: f64, s: Complex64) -> Result<TwoVector> {
    let p = StructureEvaluator::shared(a)?.evaluate(s)?;
    Ok(TwoVector::new(p.j, p.k))
}
