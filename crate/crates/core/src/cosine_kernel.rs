//! The finite cosine kernel 2a·cos(2πa²xy) on (0,1): Nyström discretization,
//! the even solutions φₐ± of (1 ± Cₐ)φ = 2cos(2πax), Fredholm determinants
//! det(1 ± Cₐ) and the potential μ(u) = a·d/da log[det(1+Cₐ)/det(1−Cₐ)].
//!
//! Near-unit eigenvalues of Cₐ make 1 ∓ Cₐ exponentially ill-conditioned as
//! a grows (the gap behaves like exp(−2πa²) up to powers). Past a threshold
//! the computation therefore switches from f64 to an MPFR working precision
//! chosen by [`fredholm_precision`] / [`structure_precision`]; the public API
//! stays in f64.

use std::f64::consts::{LOG2_E, PI};
use std::sync::Arc;

use rayon::prelude::*;
use rug::Float;

use crate::error::{invalid, Error, Result};
use crate::linalg::{symmetric_eigenvalues, Cholesky};
use crate::quadrature::{gauss_legendre, Rule};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Sign {
    /// (1 + Cₐ)φ⁺ = 2cos(2πax)
    Plus,
    /// (1 − Cₐ)φ⁻ = 2cos(2πax)
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        }
    }
}

/// Default base node count.
pub const DEFAULT_NODES: usize = 128;

/// Node count actually used at `a` for a base count `n`: `n` up to a = 2,
/// growing like a² beyond to keep resolving the oscillation.
pub fn scaled_nodes(n: usize, a: f64) -> usize {
    if a <= 2.0 {
        n
    } else {
        let m = (n as f64 * a * a / 4.0).ceil() as usize;
        m.div_ceil(8) * 8
    }
}

/// Bits lost to 1/(1 − λ₁) at this a.
fn bits_lost(a: f64) -> f64 {
    2.0 * PI * a * a * 2.0 * LOG2_E
}

/// Working precision for determinants, φ± and μ; `None` means f64 suffices.
pub fn fredholm_precision(a: f64) -> Option<u32> {
    let l = bits_lost(a);
    if l <= 12.0 {
        None
    } else {
        Some(96 + l.ceil() as u32)
    }
}

/// Working precision for the structure functions, whose combinations cancel
/// twice the Fredholm conditioning; `None` means f64 suffices.
pub fn structure_precision(a: f64) -> Option<u32> {
    let l = 2.0 * bits_lost(a);
    if l <= 12.0 {
        None
    } else {
        Some(96 + l.ceil() as u32)
    }
}

pub(crate) fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(invalid("a", format!("must be positive and finite, got {a}")));
    }
    if a > 6.0 {
        return Err(invalid("a", format!("{a} beyond the supported range (0, 6]")));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n < 8 {
        return Err(invalid("n", format!("node count must be at least 8, got {n}")));
    }
    if n > 2048 {
        return Err(invalid("n", format!("node count {n} exceeds 2048")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// generic core

/// Symmetrized kernel matrix at working precision.
pub(crate) struct KernelCore<T> {
    pub a: T,
    pub n: usize,
    pub rule: Rule<T>,
    pub sqrt_w: Vec<T>,
    /// row-major S_ij = √wᵢ·2a·cos(2πa²tᵢtⱼ)·√wⱼ
    pub s: Vec<T>,
}

impl<T: Real> KernelCore<T> {
    pub fn new(a: f64, n: usize, proto: &T) -> Self {
        Self::with_a(proto.lit(a), n)
    }

    /// Kernel at an a given in working precision.
    pub fn with_a(a: T, n: usize) -> Self {
        let proto = &a;
        let rule = gauss_legendre(n, proto);
        let sqrt_w: Vec<T> = rule.weights.iter().map(|w| w.sqrt()).collect();
        let two_pi_a2 = a.pi() * a.lit(2.0) * &a * &a;
        let two_a = a.clone() * a.lit(2.0);
        let mut s = vec![proto.zero(); n * n];
        for i in 0..n {
            let ri = two_pi_a2.clone() * &rule.nodes[i];
            let si = sqrt_w[i].clone() * &two_a;
            for j in i..n {
                let v = (ri.clone() * &rule.nodes[j]).cos() * &si * &sqrt_w[j];
                s[j * n + i] = v.clone();
                s[i * n + j] = v;
            }
        }
        KernelCore {
            a,
            n,
            rule,
            sqrt_w,
            s,
        }
    }

    pub fn factor(&self, sign: Sign) -> Result<Cholesky<T>> {
        let n = self.n;
        let mut m = self.s.clone();
        let one = self.a.one();
        if sign == Sign::Minus {
            for v in m.iter_mut() {
                *v = -v.clone();
            }
        }
        for i in 0..n {
            m[i * n + i] += &one;
        }
        Cholesky::new(&m, n).ok_or_else(|| {
            Error::Discretization(format!(
                "1 {} C_a not positive definite at a = {} with {} bits",
                if sign == Sign::Plus { "+" } else { "-" },
                self.a.to_f64(),
                self.a.prec()
            ))
        })
    }

    pub fn solve_phi(&self, sign: Sign) -> Result<PhiCore<T>> {
        let chol = self.factor(sign)?;
        let two = self.a.lit(2.0);
        let two_pi_a2 = self.a.pi() * &two * &self.a * &self.a;
        let rhs: Vec<T> = self
            .rule
            .nodes
            .iter()
            .zip(&self.sqrt_w)
            .map(|(t, sw)| (two_pi_a2.clone() * t).cos() * &two * sw)
            .collect();
        let y = chol.solve(&rhs);
        let phi: Vec<T> = y.iter().zip(&self.sqrt_w).map(|(y, sw)| y.clone() / sw).collect();
        Ok(PhiCore::new(self, sign, phi, chol.log_det()))
    }
}

/// φₐ± at nodes together with everything needed for the Nyström extension.
pub(crate) struct PhiCore<T> {
    pub a: T,
    pub sign: Sign,
    pub t: Vec<T>,
    pub w: Vec<T>,
    pub phi: Vec<T>,
    pub log_det: T,
    /// ωⱼ = 2π·a·tⱼ
    pub omega: Vec<T>,
    /// cⱼ = ±2·a·wⱼ·φⱼ so that φ(x) = 2cos(2πax) − Σ cⱼ cos(ωⱼx)
    pub coef: Vec<T>,
    pub two_pi_a: T,
}

impl<T: Real> PhiCore<T> {
    fn new(k: &KernelCore<T>, sign: Sign, phi: Vec<T>, log_det: T) -> Self {
        Self::assemble(k.a.clone(), &k.rule, sign, phi, log_det)
    }

    fn assemble(a: T, rule: &Rule<T>, sign: Sign, phi: Vec<T>, log_det: T) -> Self {
        let two_pi_a = a.pi() * a.lit(2.0) * &a;
        let sg = a.lit(sign.factor() * 2.0);
        let omega = rule.nodes.iter().map(|t| two_pi_a.clone() * t).collect();
        let coef = rule
            .weights
            .iter()
            .zip(&phi)
            .map(|(w, p)| sg.clone() * &a * w * p)
            .collect();
        PhiCore {
            a,
            sign,
            t: rule.nodes.clone(),
            w: rule.weights.clone(),
            phi,
            log_det,
            omega,
            coef,
            two_pi_a,
        }
    }

    /// Rebuild from stored node values (cache path); only the rule is recomputed.
    pub fn from_values(a: f64, sign: Sign, phi: Vec<T>, log_det: T) -> Self {
        let proto = log_det.clone();
        let rule = gauss_legendre(phi.len(), &proto);
        Self::assemble(proto.lit(a), &rule, sign, phi, log_det)
    }

    pub fn eval(&self, x: &T) -> T {
        let mut s = (self.two_pi_a.clone() * x).cos() * x.lit(2.0);
        for (c, om) in self.coef.iter().zip(&self.omega) {
            s.sub_mul(c, &(om.clone() * x).cos());
        }
        s
    }

    /// k-th derivative of the Nyström extension at x.
    pub fn deriv(&self, k: u32, x: &T) -> T {
        let shifted = |theta: T| -> T {
            match k % 4 {
                0 => theta.cos(),
                1 => -theta.sin(),
                2 => -theta.cos(),
                _ => theta.sin(),
            }
        };
        let pow = |base: &T| -> T {
            let mut p = base.one();
            for _ in 0..k {
                p *= base;
            }
            p
        };
        let mut s = shifted(self.two_pi_a.clone() * x) * &pow(&self.two_pi_a) * x.lit(2.0);
        for (c, om) in self.coef.iter().zip(&self.omega) {
            let term = shifted(om.clone() * x) * &pow(om);
            s.sub_mul(c, &term);
        }
        s
    }

    /// Coefficients of x^(2k), k = 0..count, of the even Taylor series.
    pub fn taylor(&self, count: usize) -> Vec<T> {
        let one = self.a.one();
        let mut out = Vec::with_capacity(count);
        let mut om2: Vec<T> = self.omega.iter().map(|o| o.sqr()).collect();
        let mut omk: Vec<T> = vec![one.clone(); self.omega.len()];
        let base2 = self.two_pi_a.sqr();
        let mut basek = one.clone();
        let mut fact = one.clone();
        for k in 0..count {
            if k > 0 {
                fact = fact * one.lit(((2 * k - 1) * (2 * k)) as f64);
                basek *= &base2;
                for (m, o) in omk.iter_mut().zip(&om2) {
                    *m *= o;
                }
            }
            let mut s = basek.clone() * one.lit(2.0);
            for (c, m) in self.coef.iter().zip(&omk) {
                s.sub_mul(c, m);
            }
            let v = s / &fact;
            out.push(if k % 2 == 1 { -v } else { v });
        }
        om2.clear();
        out
    }

    /// Max-norm residual of the discretized equation at the nodes.
    pub fn residual(&self) -> f64 {
        let mut worst = 0.0f64;
        let sg = self.a.lit(self.sign.factor());
        let two_pi_a2 = self.two_pi_a.clone() * &self.a;
        for i in 0..self.t.len() {
            let mut s = self.phi[i].clone() - (two_pi_a2.clone() * &self.t[i]).cos() * self.a.lit(2.0);
            let mut conv = self.a.zero();
            for j in 0..self.t.len() {
                let k = (two_pi_a2.clone() * &self.t[i] * &self.t[j]).cos() * self.a.lit(2.0) * &self.a * &self.w[j];
                conv.add_mul(&k, &self.phi[j]);
            }
            s.add_mul(&sg, &conv);
            worst = worst.max(s.abs().to_f64());
        }
        worst
    }
}

// ---------------------------------------------------------------------------
// public API

/// Discretized, symmetrized kernel on (0,1).
#[derive(Clone, Debug)]
pub struct KernelOperator {
    pub a: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// row-major n×n
    pub matrix: Vec<f64>,
}

/// Construct the discretized kernel operator at a with n Gauss–Legendre nodes.
pub fn build_discretization(a: f64, n: usize) -> Result<KernelOperator> {
    check_a(a)?;
    check_n(n)?;
    let k = KernelCore::new(a, n, &0.0f64);
    Ok(KernelOperator {
        a,
        nodes: k.rule.nodes,
        weights: k.rule.weights,
        matrix: k.s,
    })
}

impl KernelOperator {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Eigenvalues in ascending order (double precision, absolute accuracy).
    pub fn eigenvalues(&self) -> Vec<f64> {
        symmetric_eigenvalues(&self.matrix, self.n())
    }

    /// (1 − λ_max, 1 + λ_min) at working precision; both positive iff the
    /// discrete spectrum lies in (−1, 1).
    pub fn spectral_gaps(&self) -> Result<(f64, f64)> {
        let n = self.n();
        match fredholm_precision(self.a) {
            None => gaps(&KernelCore::new(self.a, n, &0.0f64)),
            Some(bits) => gaps(&KernelCore::new(self.a, n, &Float::new(bits))),
        }
    }

    /// Largest |λᵢ|, derived from the working-precision gaps.
    pub fn spectral_radius(&self) -> Result<f64> {
        let (gm, gp) = self.spectral_gaps()?;
        Ok(1.0 - gm.min(gp))
    }
}

fn gaps<T: Real>(k: &KernelCore<T>) -> Result<(f64, f64)> {
    let minus = k.factor(Sign::Minus)?.smallest_eigenvalue(200).to_f64();
    let plus = k.factor(Sign::Plus)?.smallest_eigenvalue(200).to_f64();
    Ok((minus, plus))
}

#[derive(Clone)]
pub(crate) enum PhiInner {
    F64(Arc<PhiCore<f64>>),
    Mp(Arc<PhiCore<Float>>),
}

/// φₐ± sampled at the nodes xⱼ = a·tⱼ with its Nyström extension.
#[derive(Clone)]
pub struct PhiSolution {
    pub a: f64,
    pub sign: Sign,
    pub n: usize,
    /// Working precision in bits (53 for the f64 path).
    pub precision: u32,
    /// Nodes in (0, a).
    pub nodes: Vec<f64>,
    pub values_at_nodes: Vec<f64>,
    /// log det(1 ± Cₐ) from the same factorization.
    pub log_det: f64,
    pub(crate) inner: PhiInner,
}

impl std::fmt::Debug for PhiSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhiSolution")
            .field("a", &self.a)
            .field("sign", &self.sign)
            .field("n", &self.n)
            .field("precision", &self.precision)
            .field("log_det", &self.log_det)
            .finish()
    }
}

impl PhiSolution {
    pub(crate) fn from_inner(a: f64, sign: Sign, inner: PhiInner) -> Self {
        let (precision, nodes, values, ld, n) = match &inner {
            PhiInner::F64(c) => (
                53,
                c.t.iter().map(|t| t * a).collect(),
                c.phi.clone(),
                c.log_det,
                c.t.len(),
            ),
            PhiInner::Mp(c) => (
                c.a.prec(),
                c.t.iter().map(|t| (t.clone() * &c.a).to_f64()).collect(),
                c.phi.iter().map(|p| p.to_f64()).collect(),
                c.log_det.to_f64(),
                c.t.len(),
            ),
        };
        PhiSolution {
            a,
            sign,
            n,
            precision,
            nodes,
            values_at_nodes: values,
            log_det: ld,
            inner,
        }
    }

    /// Nyström extension at any real x.
    pub fn eval(&self, x: f64) -> f64 {
        match &self.inner {
            PhiInner::F64(c) => c.eval(&x),
            PhiInner::Mp(c) => c.eval(&c.a.lit(x)).to_f64(),
        }
    }

    /// k-th derivative of the extension.
    pub fn deriv(&self, k: u32, x: f64) -> f64 {
        match &self.inner {
            PhiInner::F64(c) => c.deriv(k, &x),
            PhiInner::Mp(c) => c.deriv(k, &c.a.lit(x)).to_f64(),
        }
    }

    /// Residual ‖(1 ± Cₐ)φ − rhs‖∞ at the nodes.
    pub fn residual(&self) -> f64 {
        match &self.inner {
            PhiInner::F64(c) => c.residual(),
            PhiInner::Mp(c) => c.residual(),
        }
    }
}

fn solve_with<T: Real>(a: f64, n: usize, sign: Sign, proto: &T) -> Result<PhiCore<T>> {
    KernelCore::new(a, n, proto).solve_phi(sign)
}

/// Solve (1 ± Cₐ)φ = 2cos(2πax) with exactly n nodes.
pub fn solve_phi(a: f64, sign: Sign, n: usize) -> Result<PhiSolution> {
    check_a(a)?;
    check_n(n)?;
    solve_phi_at(a, sign, n, fredholm_precision(a))
}

pub(crate) fn solve_phi_at(a: f64, sign: Sign, n: usize, bits: Option<u32>) -> Result<PhiSolution> {
    let inner = match bits {
        None => PhiInner::F64(Arc::new(solve_with(a, n, sign, &0.0f64)?)),
        Some(b) => PhiInner::Mp(Arc::new(solve_with(a, n, sign, &Float::new(b))?)),
    };
    let sol = PhiSolution::from_inner(a, sign, inner);
    warn_conditioning(&sol);
    Ok(sol)
}

fn warn_conditioning(sol: &PhiSolution) {
    // |φ| ~ 1/√(1 − λ₁²) at worst; lost digits ≈ 2·log10 max|φ|
    let peak = sol.values_at_nodes.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lost = 2.0 * peak.max(1.0).log10();
    let available = sol.precision as f64 * std::f64::consts::LOG10_2;
    if available - lost < 10.0 {
        log::warn!(
            "ill-conditioned Fredholm solve at a = {}: ~{:.0} of {:.0} digits lost",
            sol.a,
            lost,
            available
        );
    }
}

/// log det(1 ± Cₐ) with exactly n nodes.
pub fn log_det(a: f64, sign: Sign, n: usize) -> Result<f64> {
    check_a(a)?;
    check_n(n)?;
    Ok(match fredholm_precision(a) {
        None => KernelCore::new(a, n, &0.0f64).factor(sign)?.log_det(),
        Some(b) => KernelCore::new(a, n, &Float::new(b)).factor(sign)?.log_det().to_f64(),
    })
}

fn log_det_pair<T: Real>(a: f64, n: usize, proto: &T) -> Result<(T, T)> {
    let k = KernelCore::new(a, n, proto);
    Ok((k.factor(Sign::Plus)?.log_det(), k.factor(Sign::Minus)?.log_det()))
}

/// log det(1 − Cₐ²) from an independent discretization: the Dirichlet kernel
/// D(x−y) + D(x+y), D(z) = sin(2πa²z)/(πz), acting on even functions of
/// (−1,1), sampled at the positive half of a 2m-point Gauss–Legendre rule.
pub fn log_det_dirichlet(a: f64, m: usize) -> Result<f64> {
    check_a(a)?;
    check_n(m)?;
    match fredholm_precision(a) {
        None => dirichlet(a, m, &0.0f64),
        Some(b) => Ok(dirichlet(a, m, &Float::new(b))?.to_f64()),
    }
}

fn dirichlet<T: Real>(a: f64, m: usize, proto: &T) -> Result<T> {
    // 2m-point rule on (−1,1): symmetric; keep nodes with x > 0
    let r = gauss_legendre(2 * m, proto);
    let one = proto.one();
    let two = proto.lit(2.0);
    let xs: Vec<T> = r.nodes[m..].iter().map(|t| t.clone() * &two - &one).collect();
    let ws: Vec<T> = r.weights[m..].iter().map(|w| w.clone() * &two).collect();
    let av = proto.lit(a);
    let k = av.pi() * &two * &av * &av;
    let pi = proto.pi();
    let d = |z: &T| -> T {
        if z.to_f64() == 0.0 && z.abs().to_f64() == 0.0 {
            k.clone() / &pi
        } else {
            (k.clone() * z).sin() / (pi.clone() * z)
        }
    };
    let sw: Vec<T> = ws.iter().map(|w| w.sqrt()).collect();
    let mut mat = vec![proto.zero(); m * m];
    for i in 0..m {
        for j in i..m {
            let dm = xs[i].clone() - &xs[j];
            let dp = xs[i].clone() + &xs[j];
            let v = (d(&dm) + d(&dp)) * &sw[i] * &sw[j];
            let e = if i == j { one.clone() - &v } else { -v };
            mat[i * m + j] = e.clone();
            mat[j * m + i] = e;
        }
    }
    let chol = Cholesky::new(&mat, m)
        .ok_or_else(|| Error::Discretization(format!("1 − D not positive definite at a = {a}")))?;
    Ok(chol.log_det())
}

/// Result of the μ computation with both routes.
#[derive(Clone, Copy, Debug)]
pub struct MuEvaluation {
    pub u: f64,
    pub resolvent: f64,
    pub finite_difference: f64,
    pub logdet_plus: f64,
    pub logdet_minus: f64,
}

/// Relative tolerance of the finite-difference gate.
pub const MU_GATE_TOL: f64 = 1e-6;
/// Finite-difference step in u.
pub const MU_FD_STEP: f64 = 1e-4;

/// μ(u) by the resolvent-diagonal identity μ = a(φ⁺(a) + φ⁻(a)), with
/// log det(1 ± Cₐ) from the same factorizations.
pub fn mu_resolvent(u: f64, n: usize) -> Result<(f64, f64, f64)> {
    let a = u.exp();
    check_a(a)?;
    check_n(n)?;
    let n = scaled_nodes(n, a);
    match fredholm_precision(a) {
        None => mu_res_generic(a, n, &0.0f64),
        Some(b) => mu_res_generic(a, n, &Float::new(b)),
    }
}

/// μ at an a given in working precision.
pub(crate) fn mu_exact<T: Real>(a: &T, n: usize) -> Result<T> {
    let k = KernelCore::with_a(a.clone(), n);
    let p = k.solve_phi(Sign::Plus)?;
    let m = k.solve_phi(Sign::Minus)?;
    Ok((p.eval(a) + m.eval(a)) * a)
}

fn mu_res_generic<T: Real>(a: f64, n: usize, proto: &T) -> Result<(f64, f64, f64)> {
    let k = KernelCore::new(a, n, proto);
    let p = k.solve_phi(Sign::Plus)?;
    let m = k.solve_phi(Sign::Minus)?;
    let mu = (p.eval(&k.a) + m.eval(&k.a)) * &k.a;
    Ok((mu.to_f64(), p.log_det.to_f64(), m.log_det.to_f64()))
}

/// u-derivative of log det(1+Cₐ) − log det(1−Cₐ) by central differences with
/// one Richardson step.
pub fn mu_finite_difference(u: f64, n: usize) -> Result<f64> {
    let a = u.exp();
    check_a(a)?;
    check_n(n)?;
    let n = scaled_nodes(n, (u + MU_FD_STEP).exp());
    let bits = fredholm_precision((u + MU_FD_STEP).exp());
    let f = |v: f64| -> Result<f64> {
        let a = v.exp();
        match bits {
            None => {
                let (p, m) = log_det_pair(a, n, &0.0f64)?;
                Ok(p - m)
            }
            Some(b) => {
                let (p, m) = log_det_pair(a, n, &Float::new(b))?;
                Ok((p - m).to_f64())
            }
        }
    };
    let h = MU_FD_STEP;
    let d1 = (f(u + h)? - f(u - h)?) / (2.0 * h);
    let d2 = (f(u + h / 2.0)? - f(u - h / 2.0)?) / h;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// μ(u) with the finite-difference gate.
pub fn mu_checked(u: f64, n: usize) -> Result<MuEvaluation> {
    let (r, lp, lm) = mu_resolvent(u, n)?;
    let fd = mu_finite_difference(u, n)?;
    if (r - fd).abs() > MU_GATE_TOL * r.abs().max(1e-300) {
        return Err(Error::CrossValidation {
            what: "mu (resolvent vs finite difference)",
            a: r,
            b: fd,
            tol: MU_GATE_TOL,
        });
    }
    Ok(MuEvaluation {
        u,
        resolvent: r,
        finite_difference: fd,
        logdet_plus: lp,
        logdet_minus: lm,
    })
}

/// μ(u) = a·d/da log[det(1+Cₐ)/det(1−Cₐ)], resolvent route, gated.
pub fn mu(u: f64, n: usize) -> Result<f64> {
    Ok(mu_checked(u, n)?.resolvent)
}

/// Gridded μ(u) with local cubic interpolation.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct PotentialTable {
    pub u_grid: Vec<f64>,
    pub mu_values: Vec<f64>,
    pub logdet_plus: Vec<f64>,
    pub logdet_minus: Vec<f64>,
    pub n: usize,
}

/// Every `GATE_STRIDE`-th table point also runs the finite-difference gate.
pub const GATE_STRIDE: usize = 16;
/// Below this u, det(1 ± Cₐ) = 1 + O(a) and the f64 difference quotient of
/// log det loses ~n·ε/h absolute accuracy, which exceeds the gate tolerance
/// once μ ≲ 1e-4; small a is covered by the Neumann-series check instead.
pub const GATE_U_MIN: f64 = -6.0;

/// μ on a uniform grid of `steps` intervals over [u_min, u_max].
pub fn build_potential_table(u_min: f64, u_max: f64, steps: usize, n: usize) -> Result<PotentialTable> {
    if !(u_min < u_max) || !u_min.is_finite() || !u_max.is_finite() {
        return Err(invalid("u_min", format!("need u_min < u_max, got [{u_min}, {u_max}]")));
    }
    if steps < 4 {
        return Err(invalid("steps", format!("need at least 4 steps, got {steps}")));
    }
    check_n(n)?;
    check_a(u_max.exp())?;
    let du = (u_max - u_min) / steps as f64;
    let grid: Vec<f64> = (0..=steps).map(|i| u_min + du * i as f64).collect();
    let rows: Vec<Result<(f64, f64, f64)>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &u)| {
            if i % GATE_STRIDE == 0 && u >= GATE_U_MIN {
                let m = mu_checked(u, n)?;
                Ok((m.resolvent, m.logdet_plus, m.logdet_minus))
            } else {
                mu_resolvent(u, n)
            }
        })
        .collect();
    let mut t = PotentialTable {
        u_grid: grid,
        mu_values: Vec::with_capacity(steps + 1),
        logdet_plus: Vec::with_capacity(steps + 1),
        logdet_minus: Vec::with_capacity(steps + 1),
        n,
    };
    for r in rows {
        let (m, p, q) = r?;
        t.mu_values.push(m);
        t.logdet_plus.push(p);
        t.logdet_minus.push(q);
    }
    Ok(t)
}

impl PotentialTable {
    /// μ ≡ 0 on the given grid (free system).
    pub fn zero(u_min: f64, u_max: f64, steps: usize) -> Self {
        let du = (u_max - u_min) / steps as f64;
        let grid: Vec<f64> = (0..=steps).map(|i| u_min + du * i as f64).collect();
        let z = vec![0.0; steps + 1];
        PotentialTable {
            u_grid: grid,
            mu_values: z.clone(),
            logdet_plus: z.clone(),
            logdet_minus: z,
            n: 0,
        }
    }

    pub fn u_min(&self) -> f64 {
        self.u_grid[0]
    }

    pub fn u_max(&self) -> f64 {
        *self.u_grid.last().unwrap()
    }

    pub fn step(&self) -> f64 {
        self.u_grid[1] - self.u_grid[0]
    }

    pub fn contains(&self, u: f64) -> bool {
        let eps = 1e-12 * (1.0 + u.abs());
        u >= self.u_min() - eps && u <= self.u_max() + eps
    }

    /// Four-point Lagrange interpolation of μ.
    pub fn mu_at(&self, u: f64) -> Result<f64> {
        if !self.contains(u) {
            return Err(Error::TableRange {
                u,
                lo: self.u_min(),
                hi: self.u_max(),
            });
        }
        Ok(self.interp(u))
    }

    pub(crate) fn interp(&self, u: f64) -> f64 {
        let n = self.u_grid.len();
        let h = self.step();
        let x = ((u - self.u_min()) / h).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).clamp(1, n - 3);
        let p = x - i as f64;
        let y = &self.mu_values[i - 1..i + 3];
        // nodes at −1, 0, 1, 2
        let l0 = -p * (p - 1.0) * (p - 2.0) / 6.0;
        let l1 = (p + 1.0) * (p - 1.0) * (p - 2.0) / 2.0;
        let l2 = -(p + 1.0) * p * (p - 2.0) / 2.0;
        let l3 = (p + 1.0) * p * (p - 1.0) / 6.0;
        l0 * y[0] + l1 * y[1] + l2 * y[2] + l3 * y[3]
    }

    /// ∫ μ over [u0, u1] by Simpson on the interpolant.
    /// Least-squares fit ln μ ≈ c + k·t in the depth t = −u over grid points
    /// u ≤ u_hi; returns (k, c). Exponential decay into the left tail shows
    /// as k < 0.
    pub fn left_tail_fit(&self, u_hi: f64) -> Result<(f64, f64)> {
        let pts: Vec<(f64, f64)> = self
            .u_grid
            .iter()
            .zip(&self.mu_values)
            .filter(|(u, m)| **u <= u_hi && **m > 0.0)
            .map(|(u, m)| (-u, m.ln()))
            .collect();
        if pts.len() < 3 {
            return Err(invalid("u_hi", format!("fewer than 3 positive samples below u = {u_hi}")));
        }
        let k = pts.len() as f64;
        let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
        let (mt, my) = (st / k, sy / k);
        let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + (t - mt) * (y - my), b + (t - mt).powi(2)));
        let slope = sxy / sxx;
        Ok((slope, my - slope * mt))
    }

    /// CSV `u,mu,logdet_plus,logdet_minus`.
    pub fn write_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "u,mu,logdet_plus,logdet_minus")?;
        for i in 0..self.u_grid.len() {
            writeln!(
                w,
                "{:.12e},{:.17e},{:.17e},{:.17e}",
                self.u_grid[i], self.mu_values[i], self.logdet_plus[i], self.logdet_minus[i]
            )?;
        }
        Ok(())
    }

    pub fn integral(&self, u0: f64, u1: f64) -> f64 {
        let m = ((u1 - u0).abs() / self.step() * 4.0).ceil().max(2.0) as usize * 2;
        let h = (u1 - u0) / m as f64;
        let mut s = self.interp(u0) + self.interp(u1);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * self.interp(u0 + h * i as f64);
        }
        s * h / 3.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_policy_thresholds() {
        assert_eq!(fredholm_precision(0.5), None);
        assert!(fredholm_precision(1.0).unwrap() > 100);
        assert_eq!(structure_precision(0.4), None);
        assert!(structure_precision(1.0).unwrap() > fredholm_precision(1.0).unwrap());
        assert_eq!(scaled_nodes(128, 1.5), 128);
        assert_eq!(scaled_nodes(128, 3.0), 288);
    }

    #[test]
    fn taylor_series_matches_nystrom() {
        let k = KernelCore::new(0.6, 64, &0.0f64);
        let p = k.solve_phi(Sign::Plus).unwrap();
        let c = p.taylor(30);
        let x: f64 = 0.13;
        let s: f64 = c.iter().enumerate().map(|(k, c)| c * x.powi(2 * k as i32)).sum();
        assert!((s - p.eval(&x)).abs() < 1e-13);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let k = KernelCore::new(0.8, 64, &0.0f64);
        let p = k.solve_phi(Sign::Minus).unwrap();
        let x = 0.8;
        let h = 1e-4;
        for order in 0..3u32 {
            let fd = (p.deriv(order, &(x + h)) - p.deriv(order, &(x - h))) / (2.0 * h);
            let d = p.deriv(order + 1, &x);
            assert!((fd - d).abs() < 1e-6 * (1.0 + d.abs()), "order {order}: {fd} vs {d}");
        }
    }

    #[test]
    fn interpolation_is_exact_for_cubics() {
        let mut t = PotentialTable::zero(0.0, 1.0, 10);
        t.mu_values = t.u_grid.iter().map(|u| u * u * u - 2.0 * u).collect();
        for &u in &[0.03, 0.47, 0.99] {
            assert!((t.interp(u) - (u * u * u - 2.0 * u)).abs() < 1e-14);
        }
    }
}
