//! Dense symmetric positive definite factorization in any precision.

use crate::real::Real;

/// Lower Cholesky factor stored row-major, only `j <= i` entries meaningful.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factor the row-major symmetric matrix `a`. Returns `None` if it is not
    /// numerically positive definite.
    pub fn new(a: &[T], n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        let mut l: Vec<T> = a.to_vec();
        for j in 0..n {
            let mut d = l[j * n + j].clone();
            for k in 0..j {
                d.sub_mul(&l[j * n + k], &l[j * n + k]);
            }
            if !(d > d.zero()) {
                return None;
            }
            let d = d.sqrt();
            l[j * n + j] = d.clone();
            for i in (j + 1)..n {
                let mut s = l[i * n + j].clone();
                for k in 0..j {
                    s.sub_mul(&l[i * n + k], &l[j * n + k]);
                }
                l[i * n + j] = s / &d;
            }
        }
        Some(Cholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// log det of the factored matrix.
    pub fn log_det(&self) -> T {
        let mut s = self.l[0].zero();
        for i in 0..self.n {
            s += self.l[i * self.n + i].ln();
        }
        s.clone() + &s
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i].clone();
            for k in 0..i {
                s.sub_mul(&self.l[i * n + k], &y[k]);
            }
            y[i] = s / &self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i].clone();
            for k in (i + 1)..n {
                s.sub_mul(&self.l[k * n + i], &y[k]);
            }
            y[i] = s / &self.l[i * n + i];
        }
        y
    }

    /// Smallest eigenvalue of the factored matrix by inverse iteration.
    pub fn smallest_eigenvalue(&self, iterations: usize) -> T {
        let n = self.n;
        let proto = &self.l[0];
        let mut x: Vec<T> = (0..n)
            .map(|i| proto.lit(1.0 + 0.37 * ((i * 7919) % 101) as f64 / 101.0))
            .collect();
        let mut lambda = proto.zero();
        for _ in 0..iterations {
            let norm = dot(&x, &x).sqrt();
            for v in x.iter_mut() {
                *v = v.clone() / &norm;
            }
            let y = self.solve(&x);
            // Rayleigh quotient of the inverse: x·y ≈ 1/λ
            let r = dot(&x, &y);
            let next = r.one() / &r;
            let converged = (next.clone() - &lambda).abs().to_f64() <= next.abs().to_f64() * proto.eps() * 64.0;
            lambda = next;
            x = y;
            if converged {
                break;
            }
        }
        lambda
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = a[0].zero();
    for (x, y) in a.iter().zip(b) {
        s.add_mul(x, y);
    }
    s
}

/// Eigenvalues of a symmetric f64 matrix, ascending.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let m = nalgebra::DMatrix::from_row_slice(n, n, a);
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_matches_known_determinant_and_solution() {
        // [[4,2],[2,3]]: det 8
        let a = [4.0, 2.0, 2.0, 3.0];
        let c = Cholesky::new(&a, 2).unwrap();
        assert!((c.log_det() - 8f64.ln()).abs() < 1e-14);
        let x = c.solve(&[2.0, 1.0]);
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-14);
        let lmin = c.smallest_eigenvalue(200);
        let exact = (7.0 - 17f64.sqrt()) / 2.0;
        assert!((lmin - exact).abs() < 1e-12);
    }

    #[test]
    fn indefinite_is_rejected() {
        assert!(Cholesky::new(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }
}
