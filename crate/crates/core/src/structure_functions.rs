//! ĵₐ(s), k̂ₐ(s) from finite Mellin integrals of φₐ±, the entire functions
//! 𝒜ₐ, ℬₐ and Êₐ built from them, and the evaluator inner products.
//!
//! Definitions (γ(s) = π^(−s/2)Γ(s/2)):
//!
//! ```text
//! ĵₐ(s)  = a^(½−s) − √a ∫₀ᵃ φₐ⁺(x) x^(−s) dx
//! k̂ₐ(s)  = i a^(½−s) + i √a ∫₀ᵃ φₐ⁻(x) x^(−s) dx
//! 2𝒜ₐ(s) = γ(s) ĵₐ(s) + γ(1−s) ĵₐ(1−s)
//! 2ℬₐ(s) = γ(s) k̂ₐ(s) − γ(1−s) k̂ₐ(1−s)
//! Êₐ     = (𝒜ₐ − iℬₐ)/γ,   F̂ₐ = (𝒜ₐ + iℬₐ)/γ
//! ```
//!
//! The Mellin integral is split at b = min(a, 1/(2πa)). On (0, b) the even
//! Taylor series of φ integrates term by term to Σ cₖ b^(2k+1−s)/(2k+1−s),
//! which is also the meromorphic continuation (poles at s = 1, 3, 5, …). On
//! (b, a) a composite Gauss–Legendre rule in v = ln x is used, with φ taken
//! from a Chebyshev interpolant on [0, a]. Everything is evaluated at the
//! working precision returned by [`structure_precision`]; cancellations in
//! 𝒜, ℬ and in Im(−JK̄) happen before rounding to f64.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rug::Float;

use crate::cache::PhiCache;
use crate::cosine_kernel::{check_a, scaled_nodes, structure_precision, KernelCore, PhiCore, PhiInner, PhiSolution, Sign, DEFAULT_NODES};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, Chebyshev};
use crate::real::{Cx, Real};
use crate::special_functions::gamma_factor_generic;

/// Distance to an odd positive integer below which s counts as a pole.
const POLE_EPS: f64 = 1e-9;
/// Distance below which a pole-proximity warning is logged.
const POLE_WARN: f64 = 1e-5;
/// Radius switch for the removable singularity of the evaluator product.
pub const REMOVABLE_RADIUS: f64 = 1e-6;
/// Circle radius for the four-point limit.
pub const LIMIT_STEP: f64 = 1e-3;

fn odd_pole_distance(s: Complex64) -> f64 {
    if s.re < 0.5 {
        return f64::INFINITY;
    }
    let k = ((s.re - 1.0) / 2.0).round().max(0.0);
    (s - (2.0 * k + 1.0)).norm()
}

/// Mellin quadrature over (b, a) in v = ln x for |Im s| ≤ cap.
struct MellinRule<T> {
    v: Vec<T>,
    /// weight·x·φ⁺(x)
    wp: Vec<T>,
    /// weight·x·φ⁻(x)
    wm: Vec<T>,
    /// 1/x
    inv_x: Vec<T>,
}

/// Working-precision structure data for one a.
pub(crate) struct StructureCore<T> {
    a: T,
    a_f: f64,
    sqrt_a: T,
    ln_a: T,
    plus: Arc<PhiCore<T>>,
    minus: Arc<PhiCore<T>>,
    b: T,
    ln_b: T,
    /// cₖ b^(2k) for φ⁺ and φ⁻
    dp: Vec<T>,
    dm: Vec<T>,
    cheb: Option<(Chebyshev<T>, Chebyshev<T>)>,
    rules: Mutex<BTreeMap<u64, Arc<MellinRule<T>>>>,
}

/// Result of Mellin integrals at s and 1−s.
struct Pair<T> {
    ip: Cx<T>,
    im: Cx<T>,
    ip_r: Cx<T>,
    im_r: Cx<T>,
}

/// Full set of values at one s (working precision).
pub(crate) struct CorePoint<T> {
    pub j: Cx<T>,
    pub k: Cx<T>,
    pub j_r: Cx<T>,
    pub k_r: Cx<T>,
    pub g: Cx<T>,
    pub g_r: Cx<T>,
    pub cal_a: Cx<T>,
    pub cal_b: Cx<T>,
}

impl<T: Real> StructureCore<T> {
    fn new(a: f64, n: usize, proto: &T, cache: Option<&PhiCache>) -> Result<Self> {
        let mut kern: Option<KernelCore<T>> = None;
        let mut get = |sign: Sign| -> Result<PhiCore<T>> {
            if let Some(c) = cache {
                if let Some((phi, ld)) = c.load(a, sign, n, proto)? {
                    return Ok(PhiCore::from_values(a, sign, phi, ld));
                }
            }
            let k = kern.get_or_insert_with(|| KernelCore::new(a, n, proto));
            let core = k.solve_phi(sign)?;
            if let Some(c) = cache {
                c.store(a, sign, &core.phi, &core.log_det)?;
            }
            Ok(core)
        };
        let plus = get(Sign::Plus)?;
        let minus = get(Sign::Minus)?;
        Ok(Self::from_phi(a, Arc::new(plus), Arc::new(minus), proto))
    }

    pub(crate) fn from_phi(a_f: f64, plus: Arc<PhiCore<T>>, minus: Arc<PhiCore<T>>, proto: &T) -> Self {
        let a = proto.lit(a_f);
        let bits = proto.prec() as f64;
        let b = {
            let cut = a.one() / (a.pi() * a.lit(2.0) * &a);
            if cut < a {
                cut
            } else {
                a.clone()
            }
        };
        // number of Taylor terms: (2k)! must exceed 2^(bits+24)
        let mut count = 1usize;
        let mut lf = 0.0f64;
        while lf < (bits + 24.0) * std::f64::consts::LN_2 {
            lf += ((2 * count - 1) as f64).ln() + ((2 * count) as f64).ln();
            count += 1;
        }
        count += 2;
        let b2 = b.sqr();
        let scale = |c: Vec<T>| -> Vec<T> {
            let mut p = b.one();
            c.into_iter()
                .map(|ck| {
                    let v = ck * &p;
                    p *= &b2;
                    v
                })
                .collect()
        };
        let dp = scale(plus.taylor(count));
        let dm = scale(minus.taylor(count));
        let cheb = if b < a {
            let nc = (1.6 * PI * a_f * a_f + 0.35 * bits + 24.0).ceil() as usize;
            let cp = Chebyshev::fit(&a.zero(), &a, nc, |x| plus.eval(x));
            let cm = Chebyshev::fit(&a.zero(), &a, nc, |x| minus.eval(x));
            let worst = cp.tail_ratio().max(cm.tail_ratio());
            if worst > proto.eps() * 1e6 {
                log::warn!("Chebyshev tail {worst:e} at a = {a_f} exceeds working precision");
            }
            Some((cp, cm))
        } else {
            None
        };
        StructureCore {
            sqrt_a: a.sqrt(),
            ln_a: a.ln(),
            ln_b: b.ln(),
            a,
            a_f,
            plus,
            minus,
            b,
            dp,
            dm,
            cheb,
            rules: Mutex::new(BTreeMap::new()),
        }
    }

    fn rule(&self, e_abs: f64) -> Arc<MellinRule<T>> {
        let mut cap = 8u64;
        while (cap as f64) < e_abs + 1.0 {
            cap *= 2;
        }
        if let Some(r) = self.rules.lock().unwrap().get(&cap) {
            return r.clone();
        }
        let r = Arc::new(self.build_rule(cap as f64));
        self.rules.lock().unwrap().insert(cap, r.clone());
        r
    }

    fn build_rule(&self, cap: f64) -> MellinRule<T> {
        let proto = &self.a;
        let mut out = MellinRule {
            v: vec![],
            wp: vec![],
            wm: vec![],
            inv_x: vec![],
        };
        let Some((cp, cm)) = &self.cheb else {
            return out;
        };
        let dv = (self.ln_a.clone() - &self.ln_b).to_f64();
        let phase = cap * dv + 2.0 * PI * self.a_f * (self.a_f - self.b.to_f64());
        let panels = (phase / 2.0).ceil() as usize + 2;
        let m = 16usize.max((proto.prec() as f64 / 9.0).ceil() as usize);
        let base = gauss_legendre(m, proto);
        let width = (self.ln_a.clone() - &self.ln_b) / proto.lit(panels as f64);
        for p in 0..panels {
            let lo = self.ln_b.clone() + &(width.clone() * proto.lit(p as f64));
            let hi = lo.clone() + &width;
            let r = base.on(&lo, &hi);
            for (v, w) in r.nodes.into_iter().zip(r.weights) {
                let x = v.exp();
                let wx = w * &x;
                out.wp.push(wx.clone() * &cp.eval(&x));
                out.wm.push(wx * &cm.eval(&x));
                out.inv_x.push(x.one() / &x);
                out.v.push(v);
            }
        }
        out
    }

    /// Σ dₖ/(2k+1−s) scaled by b^(1−s), for both signs.
    fn series(&self, s: &Cx<T>) -> (Cx<T>, Cx<T>) {
        let one = self.a.one();
        let oms = Cx::new(one.clone() - &s.re, -s.im.clone());
        let mut sp = Cx::real(one.zero());
        let mut sm = Cx::real(one.zero());
        for (k, (p, m)) in self.dp.iter().zip(&self.dm).enumerate() {
            let den = oms.add_real(&one.lit(2.0 * k as f64)).recip();
            sp = sp + den.scale(p);
            sm = sm + den.scale(m);
        }
        let bp = oms.scale(&self.ln_b).exp();
        (sp * bp.clone(), sm * bp)
    }

    fn mellin(&self, s: &Cx<T>) -> Pair<T> {
        let one = self.a.one();
        let r = Cx::new(one.clone() - &s.re, -s.im.clone());
        let (mut ip, mut im) = self.series(s);
        let (mut ip_r, mut im_r) = self.series(&r);
        let rule = self.rule(s.im.to_f64().abs());
        if !rule.v.is_empty() {
            let z = one.zero();
            let (mut a0, mut a1, mut a2, mut a3) = (z.clone(), z.clone(), z.clone(), z.clone());
            let (mut b0, mut b1, mut b2, mut b3) = (z.clone(), z.clone(), z.clone(), z.clone());
            for q in 0..rule.v.len() {
                let v = &rule.v[q];
                // x^(−s) = e^(−σv)(cos Ev − i sin Ev); x^(−(1−s)) = x^(−1) e^(σv)(cos Ev + i sin Ev)
                let ex = (-(s.re.clone() * v)).exp();
                let (sn, cs) = (s.im.clone() * v).sin_cos();
                let rx = rule.inv_x[q].clone() / &ex;
                let t1 = ex.clone() * &cs;
                let t2 = ex * &sn;
                let t3 = rx.clone() * &cs;
                let t4 = rx * &sn;
                a0.add_mul(&rule.wp[q], &t1);
                a1.sub_mul(&rule.wp[q], &t2);
                a2.add_mul(&rule.wm[q], &t1);
                a3.sub_mul(&rule.wm[q], &t2);
                b0.add_mul(&rule.wp[q], &t3);
                b1.add_mul(&rule.wp[q], &t4);
                b2.add_mul(&rule.wm[q], &t3);
                b3.add_mul(&rule.wm[q], &t4);
            }
            ip = ip + Cx::new(a0, a1);
            im = im + Cx::new(a2, a3);
            ip_r = ip_r + Cx::new(b0, b1);
            im_r = im_r + Cx::new(b2, b3);
        }
        Pair { ip, im, ip_r, im_r }
    }

    fn jk_from(&self, s: &Cx<T>, ip: &Cx<T>, im: &Cx<T>) -> (Cx<T>, Cx<T>) {
        let half = self.a.lit(0.5);
        // a^(½−s)
        let e = Cx::new(half - &s.re, -s.im.clone()).scale(&self.ln_a).exp();
        let j = e.clone() - ip.scale(&self.sqrt_a);
        let k = (e + im.scale(&self.sqrt_a)).mul_i();
        (j, k)
    }

    pub fn point(&self, s: &Cx<T>) -> CorePoint<T> {
        let one = self.a.one();
        let r = Cx::new(one.clone() - &s.re, -s.im.clone());
        let pr = self.mellin(s);
        let (j, k) = self.jk_from(s, &pr.ip, &pr.im);
        let (j_r, k_r) = self.jk_from(&r, &pr.ip_r, &pr.im_r);
        let g = gamma_factor_generic(s);
        let g_r = gamma_factor_generic(&r);
        let half = one.lit(0.5);
        let cal_a = (g.clone() * j.clone() + g_r.clone() * j_r.clone()).scale(&half);
        let cal_b = (g.clone() * k.clone() - g_r.clone() * k_r.clone()).scale(&half);
        CorePoint {
            j,
            k,
            j_r,
            k_r,
            g,
            g_r,
            cal_a,
            cal_b,
        }
    }

    /// Ê by the tail route: √a(a^(−s) + ½∫ₐ^∞ (φ⁺ − φ⁻)(x) x^(−s) dx), the
    /// integral taken by quadrature up to X and by the asymptotic expansion of
    /// (φ⁺ − φ⁻) beyond. Returns the value and the tail error estimate.
    fn e_hat_tail(&self, s: &Cx<T>) -> Result<(Cx<T>, f64)> {
        let one = self.a.one();
        let two = one.lit(2.0);
        let pi = one.pi();
        let a = &self.a;
        let af = self.a_f;
        let e_abs = s.im.to_f64().abs();
        let x_end = (16.0 * af.max(1.0)).max(a_f_min_tail(af, e_abs));
        // the Nyström sum resolves cos(ωⱼx) only while the phase stays within the rule
        if 2.0 * PI * af * x_end > 1.2 * self.plus.t.len() as f64 {
            return Err(Error::Discretization(format!(
                "tail route needs more than {} nodes at a = {af}, |E| = {e_abs}",
                self.plus.t.len()
            )));
        }
        // g = φ⁺ + φ⁻ at the nodes; (φ⁺ − φ⁻)(x) = −Σ 2a wⱼ gⱼ cos(ωⱼ x)
        let coef: Vec<T> = self
            .plus
            .coef
            .iter()
            .zip(&self.minus.coef)
            .map(|(p, m)| p.clone() - m)
            .collect();
        let omega = &self.plus.omega;
        let diff = |x: &T| -> T {
            let mut acc = x.zero();
            for (c, w) in coef.iter().zip(omega) {
                acc.sub_mul(c, &(w.clone() * x).cos());
            }
            acc
        };
        // middle integral on [a, X]
        let phase = 2.0 * PI * af * (x_end - af) + e_abs * (x_end / af).ln();
        let panels = (phase / 2.0).ceil() as usize + 2;
        let m = 16usize.max((one.prec() as f64 / 9.0).ceil() as usize);
        let base = gauss_legendre(m, &one);
        let xe = one.lit(x_end);
        let width = (xe.clone() - a) / one.lit(panels as f64);
        let mut mid = Cx::real(one.zero());
        for p in 0..panels {
            let lo = a.clone() + &(width.clone() * one.lit(p as f64));
            let hi = lo.clone() + &width;
            let r = base.on(&lo, &hi);
            for (x, w) in r.nodes.iter().zip(&r.weights) {
                let xs = s.scale(&x.ln()).exp().recip();
                mid = mid + xs.scale(&(diff(x) * w));
            }
        }
        // tail: ∫_X^∞ (φ⁺−φ⁻) x^(−s) = −∫_X^∞ h, h ~ 2Σ(−1)^k[g^(2k)(a) sin(βx)/(2πx)^(2k+1) + g^(2k+1)(a) cos(βx)/(2πx)^(2k+2)]
        let beta = pi.clone() * &two * a;
        let mut tail = Cx::real(one.zero());
        let mut last = 0.0f64;
        let two_pi = pi.clone() * &two;
        for order in 0..12u32 {
            let g = self.plus.deriv(order, a) + &self.minus.deriv(order, a);
            let pw = order + 1;
            let p = s.add_real(&one.lit(pw as f64));
            let (ip, imn) = (osc_tail(&p, &beta, &xe), osc_tail(&p, &(-beta.clone()), &xe));
            let trig = if order % 2 == 0 {
                // sin: (I₊ − I₋)/(2i)
                (ip - imn).mul_i().scale(&one.lit(-0.5))
            } else {
                (ip + imn).scale(&one.lit(0.5))
            };
            let mut scale = one.clone();
            for _ in 0..pw {
                scale = scale / &two_pi;
            }
            let sign = if (order / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let term = trig.scale(&(g * &scale * one.lit(2.0 * sign)));
            last = term.abs().to_f64();
            tail = tail + term;
        }
        let integral = mid - tail;
        let half = one.lit(0.5);
        let a_s = s.scale(&self.ln_a).exp().recip();
        let val = (a_s + integral.scale(&half)).scale(&self.sqrt_a);
        Ok((val, last * self.sqrt_a.to_f64()))
    }
}

fn a_f_min_tail(a: f64, e_abs: f64) -> f64 {
    // keep (|s| + order)/(βX) well below one
    (e_abs + 16.0) * 4.0 / (2.0 * PI * a)
}

/// Asymptotic ∫_X^∞ e^(iβx) x^(−p) dx = −e^(iβX) X^(−p)/(iβ) Σ (p)_j/(iβX)^j,
/// summed up to the smallest term.
fn osc_tail<T: Real>(p: &Cx<T>, beta: &T, x: &T) -> Cx<T> {
    let one = x.one();
    let ibx = Cx::new(one.zero(), beta.clone() * x);
    let inv = ibx.recip();
    let mut term = Cx::real(one.clone());
    let mut sum = term.clone();
    let mut prev = f64::INFINITY;
    for j in 0..200 {
        let next = term.clone() * p.add_real(&one.lit(j as f64)) * inv.clone();
        let mag = next.abs().to_f64();
        if mag > prev || mag < one.eps() * sum.abs().to_f64() {
            break;
        }
        prev = mag;
        term = next;
        sum = sum + term.clone();
    }
    let phase = Cx::new(one.zero(), beta.clone() * x).exp();
    let xp = p.scale(&x.ln()).exp().recip();
    let ib = Cx::new(one.zero(), beta.clone());
    -(phase * xp * sum / ib)
}

#[derive(Clone)]
enum Inner {
    F64(Arc<StructureCore<f64>>),
    Mp(Arc<StructureCore<Float>>),
}

/// All structure quantities at one s, rounded to f64 after evaluation at
/// working precision.
#[derive(Clone, Copy, Debug)]
pub struct StructurePoint {
    pub s: Complex64,
    /// ĵₐ(s), k̂ₐ(s)
    pub j: Complex64,
    pub k: Complex64,
    /// ĵₐ(1−s), k̂ₐ(1−s)
    pub j_refl: Complex64,
    pub k_refl: Complex64,
    /// γ(s), γ(1−s)
    pub gamma: Complex64,
    pub gamma_refl: Complex64,
    pub cal_a: Complex64,
    pub cal_b: Complex64,
    /// (𝒜 − iℬ)/γ(s)
    pub e_hat: Complex64,
    /// (𝒜 + iℬ)/γ(s)
    pub f_hat: Complex64,
    /// 𝒜K − ℬJ
    pub wronskian: Complex64,
    /// W([J;K](s), [J;−K](1−s)) = −J(s)K(1−s) − K(s)J(1−s)
    pub pair_wronskian: Complex64,
    /// Im(−J·conj K)
    pub w1: f64,
}

/// Evaluates ĵₐ, k̂ₐ, 𝒜ₐ, ℬₐ, Êₐ at fixed a.
#[derive(Clone)]
pub struct StructureEvaluator {
    pub a: f64,
    pub n: usize,
    /// Working precision in bits (53 for the f64 path).
    pub precision: u32,
    inner: Inner,
}

impl std::fmt::Debug for StructureEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StructureEvaluator")
            .field("a", &self.a)
            .field("n", &self.n)
            .field("precision", &self.precision)
            .finish()
    }
}

fn to_point<T: Real>(s: Complex64, p: &CorePoint<T>) -> StructurePoint {
    let ai = p.cal_b.mul_i();
    let ginv = p.g.recip();
    let e_hat = (p.cal_a.clone() - ai.clone()) * ginv.clone();
    let f_hat = (p.cal_a.clone() + ai) * ginv;
    let wr = p.cal_a.clone() * p.k.clone() - p.cal_b.clone() * p.j.clone();
    let pw = -(p.j.clone() * p.k_r.clone()) - p.k.clone() * p.j_r.clone();
    let w1 = (-(p.j.clone() * p.k.conj())).im.to_f64();
    StructurePoint {
        s,
        j: p.j.to_c64(),
        k: p.k.to_c64(),
        j_refl: p.j_r.to_c64(),
        k_refl: p.k_r.to_c64(),
        gamma: p.g.to_c64(),
        gamma_refl: p.g_r.to_c64(),
        cal_a: p.cal_a.to_c64(),
        cal_b: p.cal_b.to_c64(),
        e_hat: e_hat.to_c64(),
        f_hat: f_hat.to_c64(),
        wronskian: wr.to_c64(),
        pair_wronskian: pw.to_c64(),
        w1,
    }
}

impl StructureEvaluator {
    /// Evaluator at `a` with the default node policy.
    pub fn new(a: f64) -> Result<Self> {
        Self::with_nodes(a, DEFAULT_NODES)
    }

    /// Evaluator with base node count `n` (scaled with a² beyond a = 2).
    pub fn with_nodes(a: f64, n: usize) -> Result<Self> {
        Self::with_precision(a, n, structure_precision(a))
    }

    /// Evaluator with explicit precision (`None` = f64).
    pub fn with_precision(a: f64, n: usize, bits: Option<u32>) -> Result<Self> {
        Self::build(a, n, bits, None)
    }

    /// Like [`with_nodes`](Self::with_nodes), reading and filling a φ cache.
    pub fn with_cache(a: f64, n: usize, cache: &PhiCache) -> Result<Self> {
        Self::build(a, n, structure_precision(a), Some(cache))
    }

    fn build(a: f64, n: usize, bits: Option<u32>, cache: Option<&PhiCache>) -> Result<Self> {
        check_a(a)?;
        if n < 8 {
            return Err(crate::error::invalid("n", format!("node count must be at least 8, got {n}")));
        }
        let n = scaled_nodes(n, a);
        let (inner, precision) = match bits {
            None => (Inner::F64(Arc::new(StructureCore::new(a, n, &0.0f64, cache)?)), 53),
            Some(b) => (Inner::Mp(Arc::new(StructureCore::new(a, n, &Float::new(b), cache)?)), b),
        };
        Ok(StructureEvaluator {
            a,
            n,
            precision,
            inner,
        })
    }

    /// Shared evaluator from a process-wide memo table, at the session node
    /// count (see [`set_session_defaults`]).
    pub fn shared(a: f64) -> Result<Arc<Self>> {
        let n = session().read().unwrap().0;
        Self::shared_with(a, n, structure_precision(a))
    }

    /// Memoized evaluator for (a, n, precision).
    pub fn shared_with(a: f64, n: usize, bits: Option<u32>) -> Result<Arc<Self>> {
        type Memo = Mutex<Vec<((u64, usize, Option<u32>), Arc<StructureEvaluator>)>>;
        static MEMO: OnceLock<Memo> = OnceLock::new();
        let memo = MEMO.get_or_init(|| Mutex::new(Vec::new()));
        let key = (a.to_bits(), n, bits);
        if let Some((_, e)) = memo.lock().unwrap().iter().find(|(k, _)| *k == key) {
            return Ok(e.clone());
        }
        let cache = session().read().unwrap().1.clone();
        let e = Arc::new(Self::build(a, n, bits, cache.as_ref())?);
        let mut g = memo.lock().unwrap();
        if g.len() >= 64 {
            g.remove(0);
        }
        g.push((key, e.clone()));
        Ok(e)
    }

    pub fn phi(&self, sign: Sign) -> PhiSolution {
        match &self.inner {
            Inner::F64(c) => {
                let p = if sign == Sign::Plus { &c.plus } else { &c.minus };
                PhiSolution::from_inner(self.a, sign, PhiInner::F64(p.clone()))
            }
            Inner::Mp(c) => {
                let p = if sign == Sign::Plus { &c.plus } else { &c.minus };
                PhiSolution::from_inner(self.a, sign, PhiInner::Mp(p.clone()))
            }
        }
    }

    fn check_s(&self, s: Complex64) -> Result<()> {
        if !(s.re.is_finite() && s.im.is_finite()) {
            return Err(crate::error::invalid("s", "non-finite"));
        }
        let d = odd_pole_distance(s).min(odd_pole_distance(1.0 - s));
        if d < POLE_EPS {
            return Err(Error::PoleCollision { re: s.re, im: s.im });
        }
        if d < POLE_WARN {
            log::warn!("s = {s} within {d:e} of a pole of ĵ/k̂; expect cancellation");
        }
        Ok(())
    }

    /// Working-precision values at s for a multiprecision evaluator.
    pub(crate) fn point_mp(&self, s: &Cx<Float>) -> Option<CorePoint<Float>> {
        match &self.inner {
            Inner::Mp(c) => Some(c.point(s)),
            Inner::F64(_) => None,
        }
    }

    /// All quantities at s.
    pub fn evaluate(&self, s: Complex64) -> Result<StructurePoint> {
        self.check_s(s)?;
        Ok(match &self.inner {
            Inner::F64(c) => to_point(s, &c.point(&Cx::new(s.re, s.im))),
            Inner::Mp(c) => {
                let p = c.a.prec();
                let z = Cx::new(Float::with_val(p, s.re), Float::with_val(p, s.im));
                to_point(s, &c.point(&z))
            }
        })
    }

    fn check_single_pole(&self, s: Complex64, f: &'static str) -> Result<()> {
        let d = odd_pole_distance(s);
        if d < POLE_EPS {
            return Err(Error::Pole {
                function: f,
                re: s.re,
                im: s.im,
            });
        }
        if d < POLE_WARN {
            log::warn!("{f}: s = {s} near a pole");
        }
        Ok(())
    }

    pub fn j_hat(&self, s: Complex64) -> Result<Complex64> {
        self.check_single_pole(s, "j_hat")?;
        Ok(self.evaluate_loose(s).j)
    }

    pub fn k_hat(&self, s: Complex64) -> Result<Complex64> {
        self.check_single_pole(s, "k_hat")?;
        Ok(self.evaluate_loose(s).k)
    }

    /// Evaluation without the collision check (for single-term accessors).
    fn evaluate_loose(&self, s: Complex64) -> StructurePoint {
        // the reflected terms may be singular here; callers only read the s side
        match &self.inner {
            Inner::F64(c) => to_point(s, &c.point(&Cx::new(s.re, s.im))),
            Inner::Mp(c) => {
                let p = c.a.prec();
                to_point(s, &c.point(&Cx::new(Float::with_val(p, s.re), Float::with_val(p, s.im))))
            }
        }
    }

    pub fn cal_a(&self, s: Complex64) -> Result<Complex64> {
        Ok(self.evaluate(s)?.cal_a)
    }

    pub fn cal_b(&self, s: Complex64) -> Result<Complex64> {
        Ok(self.evaluate(s)?.cal_b)
    }

    pub fn e_hat(&self, s: Complex64) -> Result<Complex64> {
        Ok(self.evaluate(s)?.e_hat)
    }

    pub fn f_hat(&self, s: Complex64) -> Result<Complex64> {
        Ok(self.evaluate(s)?.f_hat)
    }

    /// Ê by the tail-integral route (requires Re s > 0); returns the value and
    /// the magnitude of the last asymptotic term kept.
    pub fn e_hat_tail(&self, s: Complex64) -> Result<(Complex64, f64)> {
        if !(s.re > 0.0) {
            return Err(crate::error::invalid("s", "tail route needs Re(s) > 0"));
        }
        let (v, est) = match &self.inner {
            Inner::F64(c) => {
                let (v, e) = c.e_hat_tail(&Cx::new(s.re, s.im))?;
                (v.to_c64(), e)
            }
            Inner::Mp(c) => {
                let p = c.a.prec();
                let (v, e) = c.e_hat_tail(&Cx::new(Float::with_val(p, s.re), Float::with_val(p, s.im)))?;
                (v.to_c64(), e)
            }
        };
        let tol = 1e-8 * v.norm().max(1e-300);
        if est > tol {
            return Err(Error::TailTruncation { estimate: est, tol });
        }
        Ok((v, est))
    }

    /// (Ê(z)Ê(w) − F̂(z)F̂(w))/(z+w−1), with the removable limit near z+w = 1.
    pub fn inner(&self, z: Complex64, w: Complex64) -> Result<Complex64> {
        let pw = self.evaluate(w)?;
        let f = |z: Complex64| -> Result<Complex64> {
            let pz = self.evaluate(z)?;
            Ok((pz.e_hat * pw.e_hat - pz.f_hat * pw.f_hat) / (z + w - 1.0))
        };
        if (z + w - 1.0).norm() >= REMOVABLE_RADIUS {
            return f(z);
        }
        // mean over a circle: exact for the Taylor terms through degree 3
        let h = LIMIT_STEP;
        let dirs = [
            Complex64::new(h, 0.0),
            Complex64::new(0.0, h),
            Complex64::new(-h, 0.0),
            Complex64::new(0.0, -h),
        ];
        let mut acc = Complex64::new(0.0, 0.0);
        for d in dirs {
            acc += f(z + d)?;
        }
        Ok(acc / 4.0)
    }

    /// d/dE of (𝒜, ℬ) at s = ½+iE by central differences with one Richardson step.
    pub fn critical_derivatives(&self, e: f64) -> Result<(StructurePoint, f64, f64)> {
        let s = Complex64::new(0.5, e);
        let p0 = self.evaluate(s)?;
        let h = 1e-4 * (1.0 + e.abs());
        let at = |d: f64| -> Result<(f64, f64)> {
            let p = self.evaluate(Complex64::new(0.5, e + d))?;
            Ok((p.cal_a.re, p.cal_b.re))
        };
        let (ap1, bp1) = at(h)?;
        let (am1, bm1) = at(-h)?;
        let (ap2, bp2) = at(h / 2.0)?;
        let (am2, bm2) = at(-h / 2.0)?;
        let da1 = (ap1 - am1) / (2.0 * h);
        let da2 = (ap2 - am2) / h;
        let db1 = (bp1 - bm1) / (2.0 * h);
        let db2 = (bp2 - bm2) / h;
        let scale = p0.cal_a.norm() + p0.cal_b.norm();
        for (d1, d2) in [(da1, da2), (db1, db2)] {
            if (d1 - d2).abs() > 1e-3 * (d2.abs() + scale) {
                return Err(Error::DerivativeUnstable { e, d1, d2 });
            }
        }
        Ok((p0, (4.0 * da2 - da1) / 3.0, (4.0 * db2 - db1) / 3.0))
    }

    /// ‖𝒵‖² on the critical line: 2(ℬ·d𝒜/dE − 𝒜·dℬ/dE) at s = ½+iE.
    pub fn norm_critical(&self, e: f64) -> Result<f64> {
        let (p, da, db) = self.critical_derivatives(e)?;
        Ok(2.0 * (p.cal_b.re * da - p.cal_a.re * db))
    }
}

// ---------------------------------------------------------------------------
// free-function surface

pub fn j_hat(a: f64, s: Complex64) -> Result<Complex64> {
    StructureEvaluator::shared(a)?.j_hat(s)
}

pub fn k_hat(a: f64, s: Complex64) -> Result<Complex64> {
    StructureEvaluator::shared(a)?.k_hat(s)
}

pub fn cal_a(a: f64, s: Complex64) -> Result<Complex64> {
    StructureEvaluator::shared(a)?.cal_a(s)
}

pub fn cal_b(a: f64, s: Complex64) -> Result<Complex64> {
    StructureEvaluator::shared(a)?.cal_b(s)
}

pub fn e_hat(a: f64, s: Complex64) -> Result<Complex64> {
    StructureEvaluator::shared(a)?.e_hat(s)
}

pub fn evaluator_inner(a: f64, z: Complex64, w: Complex64) -> Result<Complex64> {
    StructureEvaluator::shared(a)?.inner(z, w)
}

pub fn evaluator_norm_critical(a: f64, e: f64) -> Result<f64> {
    StructureEvaluator::shared(a)?.norm_critical(e)
}

/// Trace rows (E, 𝒜, ℬ, J, K) on the critical line.
pub fn critical_trace(ev: &StructureEvaluator, energies: &[f64]) -> Result<Vec<(f64, StructurePoint)>> {
    use rayon::prelude::*;
    energies
        .par_iter()
        .map(|&e| Ok((e, ev.evaluate(Complex64::new(0.5, e))?)))
        .collect()
}

type Session = std::sync::RwLock<(usize, Option<PhiCache>)>;

fn session() -> &'static Session {
    static S: OnceLock<Session> = OnceLock::new();
    S.get_or_init(|| std::sync::RwLock::new((DEFAULT_NODES, None)))
}

/// Node count and φ cache used by [`StructureEvaluator::shared`] and hence by
/// the free functions here and in the spectral module. Evaluators already
/// memoized are kept; the cache never changes values, only build time.
pub fn set_session_defaults(n: usize, cache: Option<PhiCache>) {
    *session().write().unwrap() = (n, cache);
}

/// CSV `E,ReA,ImA,ReB,ImB,ReJ,ImJ,ReK,ImK` for trace rows.
pub fn write_structure_csv(rows: &[(f64, StructurePoint)], mut w: impl std::io::Write) -> std::io::Result<()> {
    writeln!(w, "E,ReA,ImA,ReB,ImB,ReJ,ImJ,ReK,ImK")?;
    for (e, p) in rows {
        writeln!(
            w,
            "{e:.12e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            p.cal_a.re, p.cal_a.im, p.cal_b.re, p.cal_b.im, p.j.re, p.j.im, p.k.re, p.k.im
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oscillatory_tail_matches_quadrature() {
        // ∫_20^∞ e^{ix} x^{-1.5} dx vs direct sum over a long range
        let p = Cx::new(1.5f64, 0.0);
        let v = osc_tail(&p, &1.0, &20.0).to_c64();
        let mut s = Complex64::new(0.0, 0.0);
        let h = 1e-3;
        let mut x = 20.0 + h / 2.0;
        while x < 20000.0 {
            s += Complex64::new(0.0, x).exp() * x.powf(-1.5) * h;
            x += h;
        }
        // remainder beyond 20000 ~ 1e-6; compare loosely
        assert!((v - s).norm() < 2e-5, "{v} vs {s}");
    }
}
