//! Truncated multivariate Taylor series ("jets").
//!
//! A [`Jet`] of `n` variables and order `k` stores the coefficients of
//! `(x - x0)^m` for every `|m| <= k` densely, in the graded-lexicographic
//! order of [`JetLayout`]. Arithmetic drops every term above the order, so
//! each coefficient of a result equals the true Taylor coefficient of the
//! combined function.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use super::multi_index::JetLayout;
use super::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum JetError {
    #[error("division by a jet with zero constant term")]
    ZeroConstantTerm,
    #[error("jet dimension mismatch ({0} vs {1})")]
    DimensionMismatch(usize, usize),
}

#[derive(Clone)]
pub struct Jet<T: Scalar> {
    layout: Arc<JetLayout>,
    coeffs: Vec<T>,
}

impl<T: Scalar> std::fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("n", &self.dim())
            .field("order", &self.order())
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl<T: Scalar> PartialEq for Jet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dim() == other.dim() && self.order() == other.order() && self.coeffs == other.coeffs
    }
}

impl<T: Scalar> Jet<T> {
    pub fn zero(n: usize, order: usize) -> Self {
        let layout = JetLayout::get(n, order);
        Self::zero_like(&layout)
    }

    pub fn zero_like(layout: &Arc<JetLayout>) -> Self {
        Self {
            layout: layout.clone(),
            coeffs: vec![T::zero(); layout.len()],
        }
    }

    pub fn constant(n: usize, order: usize, c: T) -> Self {
        let mut j = Self::zero(n, order);
        j.coeffs[0] = c;
        j
    }

    pub fn constant_like(layout: &Arc<JetLayout>, c: T) -> Self {
        let mut j = Self::zero_like(layout);
        j.coeffs[0] = c;
        j
    }

    /// Seed jet `c + (x - x0)_var`.
    pub fn variable(n: usize, order: usize, var: usize, c: T) -> Self {
        let mut j = Self::constant(n, order, c);
        if order >= 1 {
            let r = j.layout.linear_rank(var);
            j.coeffs[r] = T::one();
        }
        j
    }

    pub fn from_coeffs(layout: Arc<JetLayout>, coeffs: Vec<T>) -> Self {
        assert_eq!(layout.len(), coeffs.len(), "coefficient count does not match layout");
        Self { layout, coeffs }
    }

    pub fn layout(&self) -> &Arc<JetLayout> {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn order(&self) -> usize {
        self.layout.order()
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    /// Coefficient of the monomial `m`; zero when `|m|` exceeds the order.
    pub fn coeff(&self, m: &[u32]) -> T {
        self.layout.rank(m).map(|r| self.coeffs[r]).unwrap_or_else(T::zero)
    }

    pub fn set_coeff(&mut self, m: &[u32], v: T) {
        if let Some(r) = self.layout.rank(m) {
            self.coeffs[r] = v;
        }
    }

    /// Coefficient of the first-order monomial `x_var`.
    pub fn linear_coeff(&self, var: usize) -> T {
        if self.order() == 0 {
            return T::zero();
        }
        self.coeffs[self.layout.linear_rank(var)]
    }

    pub fn truncate(&self, order: usize) -> Self {
        if order >= self.order() {
            return self.clone();
        }
        let layout = JetLayout::get(self.dim(), order);
        let coeffs = self.coeffs[..layout.len()].to_vec();
        Self { layout, coeffs }
    }

    /// Copy of the jet holding only the homogeneous part of degree `d`.
    pub fn homogeneous_part(&self, d: usize) -> Self {
        let mut out = Self::zero_like(&self.layout);
        for r in self.layout.degree_range(d) {
            out.coeffs[r] = self.coeffs[r];
        }
        out
    }

    pub fn map_coeffs<U: Scalar>(&self, f: impl Fn(T) -> U) -> Jet<U> {
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|&c| f(c)).collect(),
        }
    }

    pub fn to_complex(&self) -> Jet<Complex64> {
        self.map_coeffs(|c| c.to_complex())
    }

    pub fn scale(&self, s: T) -> Self {
        self.map_coeffs(|c| c * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, c| acc.max(c.modulus()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn aligned(a: &Self, b: &Self) -> Result<(Self, Self), JetError> {
        if a.dim() != b.dim() {
            return Err(JetError::DimensionMismatch(a.dim(), b.dim()));
        }
        let k = a.order().min(b.order());
        Ok((a.truncate(k), b.truncate(k)))
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, JetError> {
        let (mut a, b) = Self::aligned(self, other)?;
        for (x, y) in a.coeffs.iter_mut().zip(&b.coeffs) {
            *x += *y;
        }
        Ok(a)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, JetError> {
        let (mut a, b) = Self::aligned(self, other)?;
        for (x, y) in a.coeffs.iter_mut().zip(&b.coeffs) {
            *x -= *y;
        }
        Ok(a)
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, JetError> {
        let (a, b) = Self::aligned(self, other)?;
        let mut out = Self::zero_like(&a.layout);
        for &(i, j, t) in a.layout.products() {
            let (i, j) = (i as usize, j as usize);
            out.coeffs[t as usize] += a.coeffs[i] * b.coeffs[j];
        }
        Ok(out)
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, JetError> {
        self.checked_mul(&other.recip()?)
    }

    pub fn recip(&self) -> Result<Self, JetError> {
        let c0 = self.value();
        if c0.modulus() == 0.0 {
            return Err(JetError::ZeroConstantTerm);
        }
        let inv = T::one() / c0;
        let k = self.order();
        let mut series = Vec::with_capacity(k + 1);
        let mut term = inv;
        for _ in 0..=k {
            series.push(term);
            term = -term * inv;
        }
        Ok(self.compose_univariate(&series))
    }

    pub fn powi(&self, n: i32) -> Result<Self, JetError> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = Self::constant_like(&self.layout, T::one());
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Ok(result)
    }

    /// `sum_j series[j] * (self - self(0))^j`, i.e. composition of a
    /// univariate Taylor series about the constant term with this jet.
    pub fn compose_univariate(&self, series: &[T]) -> Self {
        let mut h = self.clone();
        h.coeffs[0] = T::zero();
        let k = self.order().min(series.len().saturating_sub(1));
        let mut acc = Self::constant_like(&self.layout, series[k]);
        for j in (0..k).rev() {
            acc = &acc * &h;
            acc.coeffs[0] += series[j];
        }
        acc
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        let series = (0..=self.order())
            .scan(e, |term, j| {
                let out = *term;
                *term = *term / T::from_f64((j + 1) as f64);
                Some(out)
            })
            .collect::<Vec<_>>();
        self.compose_univariate(&series)
    }

    pub fn ln(&self) -> Result<Self, JetError> {
        let c0 = self.value();
        if c0.modulus() == 0.0 {
            return Err(JetError::ZeroConstantTerm);
        }
        let mut series = vec![c0.ln()];
        let inv = T::one() / c0;
        let mut p = inv;
        for j in 1..=self.order() {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            series.push(p * T::from_f64(sign / j as f64));
            p *= inv;
        }
        Ok(self.compose_univariate(&series))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = (self.value().sin(), self.value().cos());
        self.compose_univariate(&trig_series(s, c, self.order()))
    }

    pub fn cos(&self) -> Self {
        let (s, c) = (self.value().sin(), self.value().cos());
        self.compose_univariate(&trig_series(c, -s, self.order()))
    }

    pub fn sqrt(&self) -> Result<Self, JetError> {
        let c0 = self.value();
        if c0.modulus() == 0.0 {
            return Err(JetError::ZeroConstantTerm);
        }
        let root = c0.sqrt();
        let inv = T::one() / c0;
        let mut series = Vec::with_capacity(self.order() + 1);
        // Binomial coefficients of (1 + h/c0)^(1/2).
        let mut binom = 1.0;
        let mut p = T::one();
        for j in 0..=self.order() {
            series.push(root * p * T::from_f64(binom));
            binom *= (0.5 - j as f64) / (j as f64 + 1.0);
            p *= inv;
        }
        Ok(self.compose_univariate(&series))
    }

    pub fn tanh(&self) -> Result<Self, JetError> {
        // tanh(u) = 1 - 2 / (exp(2u) + 1)
        let mut e2 = self.scale(T::from_f64(2.0)).exp();
        e2.coeffs[0] += T::one();
        let mut out = e2.recip()?.scale(T::from_f64(-2.0));
        out.coeffs[0] += T::one();
        Ok(out)
    }

    /// Partial derivative with respect to variable `var`; the result keeps
    /// the same layout (its top-degree part is zero).
    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero_like(&self.layout);
        let mut m = vec![0u32; self.dim()];
        for (r, idx) in self.layout.indices().iter().enumerate() {
            if idx[var] == 0 {
                continue;
            }
            m.copy_from_slice(idx);
            m[var] -= 1;
            let target = self.layout.rank(&m).expect("lower index present");
            out.coeffs[target] += self.coeffs[r] * T::from_f64(idx[var] as f64);
        }
        out
    }

    /// Antiderivative in variable `var` vanishing at `x_var = 0`; the
    /// top-degree terms of the result are dropped.
    pub fn integrate(&self, var: usize) -> Self {
        let mut out = Self::zero_like(&self.layout);
        let mut m = vec![0u32; self.dim()];
        for (r, idx) in self.layout.indices().iter().enumerate() {
            m.copy_from_slice(idx);
            m[var] += 1;
            if let Some(target) = self.layout.rank(&m) {
                out.coeffs[target] += self.coeffs[r] / T::from_f64(m[var] as f64);
            }
        }
        out
    }

    /// Evaluate the truncated polynomial at the displacement `u`.
    pub fn eval(&self, u: &[T]) -> T {
        assert_eq!(u.len(), self.dim());
        let monos = monomial_values(&self.layout, u);
        self.coeffs.iter().zip(&monos).fold(T::zero(), |acc, (&c, &v)| acc + c * v)
    }

    /// Substitute jets for the variables: `self(args[0], ..., args[n-1])`,
    /// treating `self` as the polynomial in the displacement variables. The
    /// result lives on the layout of `args`.
    pub fn compose(&self, args: &[Jet<T>]) -> Jet<T> {
        assert_eq!(args.len(), self.dim(), "composition arity mismatch");
        let target = args[0].layout.clone();
        let monos = monomial_jets(&self.layout, args);
        let mut out = Jet::zero_like(&target);
        for (c, mono) in self.coeffs.iter().zip(&monos) {
            if c.modulus() == 0.0 {
                continue;
            }
            for (o, v) in out.coeffs.iter_mut().zip(&mono.coeffs) {
                *o += *c * *v;
            }
        }
        out
    }

    /// Embed into a layout with more variables (new variables appended) and
    /// a possibly different order.
    pub fn extend_vars(&self, n_new: usize, order: usize) -> Jet<T> {
        assert!(n_new >= self.dim());
        let layout = JetLayout::get(n_new, order);
        let mut out = Jet::zero_like(&layout);
        let mut m = vec![0u32; n_new];
        for (r, idx) in self.layout.indices().iter().enumerate() {
            if self.layout.degree_of(r) > order {
                break;
            }
            m[..idx.len()].copy_from_slice(idx);
            for e in m[idx.len()..].iter_mut() {
                *e = 0;
            }
            let t = layout.rank(&m).expect("index fits");
            out.coeffs[t] = self.coeffs[r];
        }
        out
    }
}

fn trig_series<T: Scalar>(f0: T, f1: T, k: usize) -> Vec<T> {
    // derivatives cycle f0, f1, -f0, -f1, ...
    let mut out = Vec::with_capacity(k + 1);
    let mut fact = 1.0;
    for j in 0..=k {
        if j > 0 {
            fact *= j as f64;
        }
        let d = match j % 4 {
            0 => f0,
            1 => f1,
            2 => -f0,
            _ => -f1,
        };
        out.push(d / T::from_f64(fact));
    }
    out
}

/// Values of every monomial of `layout` at the point `u`.
pub fn monomial_values<T: Scalar>(layout: &JetLayout, u: &[T]) -> Vec<T> {
    let mut vals = Vec::with_capacity(layout.len());
    vals.push(T::one());
    let mut m = vec![0u32; layout.dim()];
    for r in 1..layout.len() {
        let idx = layout.index(r);
        let var = idx.iter().position(|&e| e > 0).expect("nonconstant");
        m.copy_from_slice(idx);
        m[var] -= 1;
        let prev = layout.rank(&m).expect("lower index present");
        let v = vals[prev] * u[var];
        vals.push(v);
    }
    vals
}

fn monomial_jets<T: Scalar>(layout: &JetLayout, args: &[Jet<T>]) -> Vec<Jet<T>> {
    let target = args[0].layout.clone();
    let mut vals: Vec<Jet<T>> = Vec::with_capacity(layout.len());
    vals.push(Jet::constant_like(&target, T::one()));
    let mut m = vec![0u32; layout.dim()];
    for r in 1..layout.len() {
        let idx = layout.index(r);
        let var = idx.iter().position(|&e| e > 0).expect("nonconstant");
        m.copy_from_slice(idx);
        m[var] -= 1;
        let prev = layout.rank(&m).expect("lower index present");
        let v = &vals[prev] * &args[var];
        vals.push(v);
    }
    vals
}

impl<T: Scalar> Add for &Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: &Jet<T>) -> Jet<T> {
        self.checked_add(rhs).expect("jet dimension mismatch")
    }
}

impl<T: Scalar> Sub for &Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: &Jet<T>) -> Jet<T> {
        self.checked_sub(rhs).expect("jet dimension mismatch")
    }
}

impl<T: Scalar> Mul for &Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: &Jet<T>) -> Jet<T> {
        self.checked_mul(rhs).expect("jet dimension mismatch")
    }
}

impl<T: Scalar> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.map_coeffs(|c| -c)
    }
}

impl<T: Scalar> AddAssign<&Jet<T>> for Jet<T> {
    fn add_assign(&mut self, rhs: &Jet<T>) {
        *self = &*self + rhs;
    }
}

/// Vector-valued jet: one component per output, all on one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MapJet<T: Scalar> {
    pub components: Vec<Jet<T>>,
}

impl<T: Scalar> MapJet<T> {
    pub fn new(components: Vec<Jet<T>>) -> Self {
        assert!(!components.is_empty(), "map jet needs at least one component");
        let (n, k) = (components[0].dim(), components[0].order());
        assert!(
            components.iter().all(|c| c.dim() == n && c.order() == k),
            "map jet components must share dimension and order"
        );
        Self { components }
    }

    /// `x0 + u` in every coordinate.
    pub fn identity(x0: &[T], order: usize) -> Self {
        let n = x0.len();
        Self::new((0..n).map(|i| Jet::variable(n, order, i, x0[i])).collect())
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn outputs(&self) -> usize {
        self.components.len()
    }

    pub fn order(&self) -> usize {
        self.components[0].order()
    }

    pub fn value(&self) -> Vec<T> {
        self.components.iter().map(|c| c.value()).collect()
    }

    /// First-order block as a row-major `outputs x dim` array.
    pub fn linear_part(&self) -> Vec<Vec<T>> {
        self.components
            .iter()
            .map(|c| (0..self.dim()).map(|v| c.linear_coeff(v)).collect())
            .collect()
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self::new(self.components.iter().map(|c| c.truncate(order)).collect())
    }

    pub fn to_complex(&self) -> MapJet<Complex64> {
        MapJet::new(self.components.iter().map(|c| c.to_complex()).collect())
    }

    pub fn eval(&self, u: &[T]) -> Vec<T> {
        self.components.iter().map(|c| c.eval(u)).collect()
    }

    /// `self(args)`, see [`Jet::compose`].
    pub fn compose(&self, args: &[Jet<T>]) -> MapJet<T> {
        MapJet::new(self.components.iter().map(|c| c.compose(args)).collect())
    }

    /// Flatten coefficients component after component.
    pub fn flatten_into(&self, out: &mut Vec<T>) {
        out.clear();
        for c in &self.components {
            out.extend_from_slice(c.coeffs());
        }
    }

    pub fn from_flat(layout: &Arc<JetLayout>, outputs: usize, flat: &[T]) -> Self {
        let len = layout.len();
        assert_eq!(flat.len(), outputs * len);
        Self::new(
            (0..outputs)
                .map(|i| Jet::from_coeffs(layout.clone(), flat[i * len..(i + 1) * len].to_vec()))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x1(order: usize) -> Jet<f64> {
        Jet::variable(1, order, 0, 0.0)
    }

    #[test]
    fn product_of_two_variables() {
        let a = Jet::<f64>::variable(2, 2, 0, 0.0);
        let b = Jet::<f64>::variable(2, 2, 1, 0.0);
        let p = &a * &b;
        for (r, idx) in p.layout().indices().iter().enumerate() {
            let expected = if idx == &vec![1, 1] { 1.0 } else { 0.0 };
            assert_eq!(p.coeffs()[r], expected);
        }
    }

    #[test]
    fn exponential_series() {
        let e = x1(3).exp();
        let want = [1.0, 1.0, 0.5, 1.0 / 6.0];
        for (c, w) in e.coeffs().iter().zip(want) {
            assert!((c - w).abs() < 1e-15);
        }
    }

    #[test]
    fn geometric_series_by_division() {
        let one = Jet::constant(1, 3, 1.0);
        let denom = &one - &x1(3);
        let q = one.checked_div(&denom).unwrap();
        for c in q.coeffs() {
            assert!((c - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn division_by_zero_constant_fails() {
        let one = Jet::constant(1, 3, 1.0);
        assert_eq!(one.checked_div(&x1(3)), Err(JetError::ZeroConstantTerm));
    }

    #[test]
    fn mixed_orders_truncate_to_min() {
        let a = Jet::<f64>::variable(1, 4, 0, 1.0);
        let b = Jet::<f64>::variable(1, 2, 0, 1.0);
        assert_eq!((&a * &b).order(), 2);
        assert!(Jet::<f64>::zero(2, 2).checked_add(&Jet::zero(1, 2)).is_err());
    }

    #[test]
    fn elementary_functions_match_known_series() {
        let x = Jet::<f64>::variable(1, 5, 0, 0.3);
        let s = x.sin();
        let c = x.cos();
        // sin^2 + cos^2 == 1 as a series.
        let one = &(&s * &s) + &(&c * &c);
        assert!((one.coeffs()[0] - 1.0).abs() < 1e-13);
        assert!(one.coeffs()[1..].iter().all(|v| v.abs() < 1e-13));
        let r = x.sqrt().unwrap();
        let back = &r * &r;
        for (a, b) in back.coeffs().iter().zip(x.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
        let l = x.exp().ln().unwrap();
        for (a, b) in l.coeffs().iter().zip(x.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
        let t = x.tanh().unwrap();
        assert!((t.coeffs()[0] - 0.3f64.tanh()).abs() < 1e-13);
        assert!((t.coeffs()[1] - (1.0 - 0.3f64.tanh().powi(2))).abs() < 1e-13);
    }

    #[test]
    fn compose_substitutes_polynomials() {
        // p(u) = u^2 composed with g = 1 + v gives 1 + 2v + v^2.
        let mut p = Jet::<f64>::zero(1, 3);
        p.set_coeff(&[2], 1.0);
        let g = Jet::<f64>::variable(1, 3, 0, 1.0);
        let r = p.compose(&[g]);
        assert_eq!(r.coeffs(), &[1.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn derivative_and_integral_are_inverse_on_low_degrees() {
        let x = Jet::<f64>::variable(2, 4, 0, 0.2);
        let y = Jet::<f64>::variable(2, 4, 1, -0.1);
        let f = &(&x * &y).exp() + &x;
        let g = f.derivative(1).integrate(1);
        // integrate(derivative(f)) == f - f(x, 0) up to order k - 1.
        for (r, idx) in f.layout().indices().iter().enumerate() {
            if idx[1] == 0 || f.layout().degree_of(r) == 4 {
                continue;
            }
            assert!((g.coeffs()[r] - f.coeffs()[r]).abs() < 1e-14);
        }
    }
}
