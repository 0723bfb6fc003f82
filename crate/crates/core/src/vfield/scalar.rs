use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

/// Real or complex coefficient type carried by jets and field evaluation.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    const IS_COMPLEX: bool;

    fn from_f64(v: f64) -> Self;
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn modulus(self) -> f64;
    fn real(self) -> f64;
    fn to_complex(self) -> Complex64;
    fn is_finite(self) -> bool;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn conj(self) -> Self;
    /// True when the real-valued logarithm/sqrt would leave the real line.
    fn outside_real_domain_log(self) -> bool;
    fn outside_real_domain_sqrt(self) -> bool;
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;

    fn from_f64(v: f64) -> Self {
        v
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn real(self) -> f64 {
        self
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn conj(self) -> Self {
        self
    }
    fn outside_real_domain_log(self) -> bool {
        self <= 0.0
    }
    fn outside_real_domain_sqrt(self) -> bool {
        self < 0.0
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;

    fn from_f64(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn real(self) -> f64 {
        self.re
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn ln(self) -> Self {
        Complex64::ln(self)
    }
    fn sin(self) -> Self {
        Complex64::sin(self)
    }
    fn cos(self) -> Self {
        Complex64::cos(self)
    }
    fn sqrt(self) -> Self {
        Complex64::sqrt(self)
    }
    fn tanh(self) -> Self {
        Complex64::tanh(self)
    }
    fn powi(self, n: i32) -> Self {
        Complex64::powi(&self, n)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn outside_real_domain_log(self) -> bool {
        self.norm() == 0.0
    }
    fn outside_real_domain_sqrt(self) -> bool {
        false
    }
}
