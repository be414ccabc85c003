//! Scalar abstraction shared by the double-precision fast path and the
//! MPFR-backed path.
//!
//! Every value carries its own precision; constants are created from an
//! existing value with [`Real::lit`] so generic code never consults global
//! state.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;
use rug::float::Constant;
use rug::{Float, Rational};

pub trait Real:
    Clone
    + Send
    + Sync
    + Debug
    + PartialOrd
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
    + for<'a> MulAssign<&'a Self>
{
    /// A constant with the same precision as `self`.
    fn lit(&self, v: f64) -> Self;
    fn pi(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn cos(&self) -> Self;
    fn sin(&self) -> Self;
    fn sin_cos(&self) -> (Self, Self);
    fn atan2(&self, x: &Self) -> Self;
    fn abs(&self) -> Self;
    fn to_f64(&self) -> f64;
    fn prec(&self) -> u32;
    fn from_rational(&self, r: &Rational) -> Self;
    /// `self += a * b`
    fn add_mul(&mut self, a: &Self, b: &Self);
    /// `self -= a * b`
    fn sub_mul(&mut self, a: &Self, b: &Self);

    fn zero(&self) -> Self {
        self.lit(0.0)
    }
    fn one(&self) -> Self {
        self.lit(1.0)
    }
    fn sqr(&self) -> Self {
        self.clone() * self
    }
    fn is_finite(&self) -> bool {
        self.to_f64().is_finite() || self.prec() > 53
    }
    /// Relative unit roundoff.
    fn eps(&self) -> f64 {
        (2.0f64).powi(-(self.prec() as i32))
    }
}

impl Real for f64 {
    fn lit(&self, v: f64) -> Self {
        v
    }
    fn pi(&self) -> Self {
        std::f64::consts::PI
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn sin_cos(&self) -> (Self, Self) {
        f64::sin_cos(*self)
    }
    fn atan2(&self, x: &Self) -> Self {
        f64::atan2(*self, *x)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn prec(&self) -> u32 {
        53
    }
    fn from_rational(&self, r: &Rational) -> Self {
        r.to_f64()
    }
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn sub_mul(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl Real for Float {
    fn lit(&self, v: f64) -> Self {
        Float::with_val(self.prec(), v)
    }
    fn pi(&self) -> Self {
        Float::with_val(self.prec(), Constant::Pi)
    }
    fn sqrt(&self) -> Self {
        self.clone().sqrt()
    }
    fn exp(&self) -> Self {
        self.clone().exp()
    }
    fn ln(&self) -> Self {
        self.clone().ln()
    }
    fn cos(&self) -> Self {
        self.clone().cos()
    }
    fn sin(&self) -> Self {
        self.clone().sin()
    }
    fn sin_cos(&self) -> (Self, Self) {
        let c = Float::new(self.prec());
        self.clone().sin_cos(c)
    }
    fn atan2(&self, x: &Self) -> Self {
        self.clone().atan2(x)
    }
    fn abs(&self) -> Self {
        self.clone().abs()
    }
    fn to_f64(&self) -> f64 {
        Float::to_f64(self)
    }
    fn prec(&self) -> u32 {
        Float::prec(self)
    }
    fn from_rational(&self, r: &Rational) -> Self {
        Float::with_val(self.prec(), r)
    }
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn sub_mul(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }
    fn is_finite(&self) -> bool {
        Float::is_finite(self)
    }
}

/// Complex number over a [`Real`].
#[derive(Clone, Debug, PartialEq)]
pub struct Cx<T> {
    pub re: T,
    pub im: T,
}

impl<T: Real> Cx<T> {
    pub fn new(re: T, im: T) -> Self {
        Cx { re, im }
    }
    pub fn real(re: T) -> Self {
        let im = re.zero();
        Cx { re, im }
    }
    pub fn from_c64(proto: &T, z: Complex64) -> Self {
        Cx::new(proto.lit(z.re), proto.lit(z.im))
    }
    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
    pub fn conj(&self) -> Self {
        Cx::new(self.re.clone(), -self.im.clone())
    }
    pub fn norm_sqr(&self) -> T {
        self.re.sqr() + &self.im.sqr()
    }
    pub fn abs(&self) -> T {
        self.norm_sqr().sqrt()
    }
    pub fn scale(&self, k: &T) -> Self {
        Cx::new(self.re.clone() * k, self.im.clone() * k)
    }
    /// Multiply by i.
    pub fn mul_i(&self) -> Self {
        Cx::new(-self.im.clone(), self.re.clone())
    }
    pub fn exp(&self) -> Self {
        let m = self.re.exp();
        let (s, c) = self.im.sin_cos();
        Cx::new(m.clone() * &c, m * &s)
    }
    /// Principal logarithm.
    pub fn ln(&self) -> Self {
        let half = self.re.lit(0.5);
        Cx::new(self.norm_sqr().ln() * &half, self.im.atan2(&self.re))
    }
    pub fn recip(&self) -> Self {
        let d = self.norm_sqr();
        Cx::new(self.re.clone() / &d, -self.im.clone() / &d)
    }
    pub fn add_real(&self, r: &T) -> Self {
        Cx::new(self.re.clone() + r, self.im.clone())
    }
    /// `self += a * b` for complex a, b.
    pub fn add_mul(&mut self, a: &Cx<T>, b: &Cx<T>) {
        self.re.add_mul(&a.re, &b.re);
        self.re.sub_mul(&a.im, &b.im);
        self.im.add_mul(&a.re, &b.im);
        self.im.add_mul(&a.im, &b.re);
    }
}

impl<T: Real> Add for Cx<T> {
    type Output = Cx<T>;
    fn add(self, o: Cx<T>) -> Cx<T> {
        Cx::new(self.re + o.re, self.im + o.im)
    }
}

impl<T: Real> Sub for Cx<T> {
    type Output = Cx<T>;
    fn sub(self, o: Cx<T>) -> Cx<T> {
        Cx::new(self.re - o.re, self.im - o.im)
    }
}

impl<T: Real> Mul for Cx<T> {
    type Output = Cx<T>;
    fn mul(self, o: Cx<T>) -> Cx<T> {
        let mut re = self.re.clone() * &o.re;
        re.sub_mul(&self.im, &o.im);
        let mut im = self.re * &o.im;
        im.add_mul(&self.im, &o.re);
        Cx::new(re, im)
    }
}

impl<T: Real> Div for Cx<T> {
    type Output = Cx<T>;
    fn div(self, o: Cx<T>) -> Cx<T> {
        self * o.recip()
    }
}

impl<T: Real> Neg for Cx<T> {
    type Output = Cx<T>;
    fn neg(self) -> Cx<T> {
        Cx::new(-self.re, -self.im)
    }
}

/// Working precision in bits for a value of this type, given a target.
pub fn mp(prec: u32, v: f64) -> Float {
    Float::with_val(prec, v)
}
