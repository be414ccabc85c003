//! Gauss–Legendre rules in any working precision.

use crate::real::Real;

/// Nodes and weights on the unit interval (0,1), ascending.
#[derive(Clone, Debug)]
pub struct Rule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

fn legendre_with_derivative<T: Real>(n: usize, x: &T) -> (T, T) {
    let one = x.one();
    let mut p0 = one.clone();
    let mut p1 = x.clone();
    for k in 2..=n {
        let kf = x.lit(k as f64);
        let mut p2 = x.clone() * &p1 * x.lit((2 * k - 1) as f64);
        p2.sub_mul(&p0, &x.lit((k - 1) as f64));
        p2 = p2 / &kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (one, x.zero());
    }
    // P'_n = n (x P_n - P_{n-1}) / (x^2 - 1)
    let dp = (x.clone() * &p1 - &p0) * x.lit(n as f64) / (x.sqr() - &one);
    (p1, dp)
}

/// Gauss–Legendre rule with `n` points on (0,1); `proto` fixes the precision.
pub fn gauss_legendre<T: Real>(n: usize, proto: &T) -> Rule<T> {
    assert!(n >= 1);
    let pi = std::f64::consts::PI;
    let mut nodes = vec![proto.zero(); n];
    let mut weights = vec![proto.zero(); n];
    let tol = proto.eps() * 16.0;
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, polished in f64 first
        let mut xf = ((i as f64 + 0.75) / (n as f64 + 0.5) * pi).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, &xf);
            let dx = p / dp;
            xf -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut x = proto.lit(xf);
        let mut dp = x.zero();
        for _ in 0..64 {
            let (p, d) = legendre_with_derivative(n, &x);
            let dx = p / &d;
            x -= &dx;
            dp = d;
            if dx.abs().to_f64() <= tol * 0.5 {
                let (_, d) = legendre_with_derivative(n, &x);
                dp = d;
                break;
            }
        }
        let one = x.one();
        let w = x.lit(2.0) / ((one.clone() - x.sqr()) * dp.sqr());
        // map to (0,1): t = (1 - x)/2 ascending in i
        let half = x.lit(0.5);
        let t_lo = (one.clone() - &x) * &half;
        let t_hi = (one + &x) * &half;
        let wh = w * &half;
        nodes[i] = t_lo;
        weights[i] = wh.clone();
        nodes[n - 1 - i] = t_hi;
        weights[n - 1 - i] = wh;
    }
    Rule { nodes, weights }
}

impl<T: Real> Rule<T> {
    /// Map the rule to [lo, hi].
    pub fn on(&self, lo: &T, hi: &T) -> Rule<T> {
        let len = hi.clone() - lo;
        Rule {
            nodes: self.nodes.iter().map(|t| lo.clone() + &(t.clone() * &len)).collect(),
            weights: self.weights.iter().map(|w| w.clone() * &len).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}


/// Chebyshev interpolant on [lo, hi] through the first-kind points.
#[derive(Clone, Debug)]
pub struct Chebyshev<T> {
    lo: T,
    hi: T,
    c: Vec<T>,
}

impl<T: Real> Chebyshev<T> {
    pub fn fit(lo: &T, hi: &T, count: usize, f: impl Fn(&T) -> T) -> Self {
        let nodes = Self::nodes(lo, hi, count);
        let values: Vec<T> = nodes.iter().map(f).collect();
        Self::from_values(lo, hi, &values)
    }

    /// Interpolation points, in the order `from_values` expects.
    pub fn nodes(lo: &T, hi: &T, count: usize) -> Vec<T> {
        let half = lo.lit(0.5);
        let pi = lo.pi();
        let nf = lo.lit(count as f64);
        let mid = (lo.clone() + hi) * &half;
        let rad = (hi.clone() - lo) * &half;
        (0..count)
            .map(|j| {
                let theta = pi.clone() * (lo.lit(j as f64) + &half) / &nf;
                mid.clone() + &(rad.clone() * &theta.cos())
            })
            .collect()
    }

    pub fn from_values(lo: &T, hi: &T, values: &[T]) -> Self {
        let count = values.len();
        let one = lo.one();
        let half = lo.lit(0.5);
        let pi = lo.pi();
        let nf = lo.lit(count as f64);
        let mut c = vec![lo.zero(); count];
        for (j, fx) in values.iter().enumerate() {
            let theta = pi.clone() * (lo.lit(j as f64) + &half) / &nf;
            let y = theta.cos();
            let two_y = y.clone() * lo.lit(2.0);
            let mut t0 = one.clone();
            let mut t1 = y;
            for (k, ck) in c.iter_mut().enumerate() {
                let tk = match k {
                    0 => t0.clone(),
                    1 => t1.clone(),
                    _ => {
                        let mut t2 = two_y.clone() * &t1;
                        t2 -= &t0;
                        t0 = t1;
                        t1 = t2.clone();
                        t2
                    }
                };
                ck.add_mul(fx, &tk);
            }
        }
        let scale = lo.lit(2.0) / &nf;
        for ck in c.iter_mut() {
            *ck *= &scale;
        }
        c[0] *= &half;
        Chebyshev {
            lo: lo.clone(),
            hi: hi.clone(),
            c,
        }
    }

    pub fn eval(&self, x: &T) -> T {
        let one = self.lo.one();
        let y = (x.clone() * self.lo.lit(2.0) - &self.lo - &self.hi) / (self.hi.clone() - &self.lo);
        let two_y = y.clone() * self.lo.lit(2.0);
        let mut b1 = one.zero();
        let mut b2 = one.zero();
        for ck in self.c.iter().skip(1).rev() {
            let mut b0 = ck.clone();
            b0.add_mul(&two_y, &b1);
            b0 -= &b2;
            b2 = b1;
            b1 = b0;
        }
        let mut r = self.c[0].clone();
        r.add_mul(&y, &b1);
        r - &b2
    }

    /// Largest of the last four coefficients relative to the largest overall.
    pub fn tail_ratio(&self) -> f64 {
        let big = self.c.iter().map(|c| c.abs().to_f64()).fold(0.0, f64::max);
        let k = self.c.len();
        let tail = self.c[k.saturating_sub(4)..]
            .iter()
            .map(|c| c.abs().to_f64())
            .fold(0.0, f64::max);
        tail / big.max(1e-300)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::mp;

    #[test]
    fn weights_sum_to_one_and_polynomials_exact() {
        let r = gauss_legendre(12, &0.0f64);
        let s: f64 = r.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
        // ∫ t^23 = 1/24
        let m: f64 = r.nodes.iter().zip(&r.weights).map(|(t, w)| w * t.powi(23)).sum();
        assert!((m - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_reproduces_a_cosine() {
        let c = Chebyshev::fit(&0.2f64, &1.1, 40, |x: &f64| (5.0 * x).cos());
        for &x in &[0.2, 0.31, 1.1] {
            assert!((c.eval(&x) - (5.0f64 * x).cos()).abs() < 1e-13);
        }
        assert!(c.tail_ratio() < 1e-14);
    }

    #[test]
    fn multiprecision_rule_integrates_exp() {
        let p = mp(256, 0.0);
        let r = gauss_legendre(40, &p);
        let mut s = p.zero();
        for (t, w) in r.nodes.iter().zip(&r.weights) {
            s.add_mul(w, &Real::exp(t));
        }
        let exact = Real::exp(&p.one()) - p.one();
        let err = (s - exact).abs().to_f64();
        assert!(err < 1e-70, "{err}");
    }
}
