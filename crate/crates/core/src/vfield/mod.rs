//! Vector fields and maps given as text, plus the jet arithmetic used for
//! every order-by-order computation downstream.

mod ast;
mod jet;
mod multi_index;
mod parser;
mod scalar;

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

pub use ast::{BinOp, Expr, ExprDisplay, Func};
pub use jet::{monomial_values, Jet, JetError, MapJet};
pub use multi_index::{binomial, degree, homogeneous_indices, monomial_count, JetLayout, MultiIndex};
pub use parser::ParseError;
pub use scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("component {component}: {message}")]
    Domain { component: usize, message: String },
    #[error("expected a point of dimension {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
}

/// A parsed, parameter-bound system `x -> (f_1(x), ..., f_n(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldProgram {
    dim: usize,
    components: Vec<Expr>,
    params: Vec<(String, f64)>,
}

/// Parse a bracketed component list in `n` variables `x1..xn`.
pub fn parse_field(source: &str, n: usize, params: &BTreeMap<String, f64>) -> Result<FieldProgram, ParseError> {
    let table: Vec<(String, f64)> = params.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let slots: BTreeMap<String, usize> = table.iter().enumerate().map(|(i, (k, _))| (k.clone(), i)).collect();
    let components = parser::parse_components(source, n, &slots)?;
    Ok(FieldProgram {
        dim: n,
        components,
        params: table,
    })
}

impl FieldProgram {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    /// Evaluate every component at `x` (reals, complexes or jets).
    pub fn eval<V: FieldValue>(&self, x: &[V]) -> Result<Vec<V>, EvalError> {
        if x.len() != self.dim {
            return Err(EvalError::Dimension {
                expected: self.dim,
                found: x.len(),
            });
        }
        self.components
            .iter()
            .enumerate()
            .map(|(i, e)| {
                eval_expr(e, x, &self.params).map_err(|message| EvalError::Domain { component: i, message })
            })
            .collect()
    }
}

impl fmt::Display for FieldProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, e) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(
                f,
                "{}",
                ExprDisplay {
                    expr: e,
                    params: &self.params
                }
            )?;
        }
        write!(f, "]")
    }
}

pub fn eval_field<V: FieldValue>(prog: &FieldProgram, x: &[V]) -> Result<Vec<V>, EvalError> {
    prog.eval(x)
}

/// Order-`k` Taylor expansion of every component about `x0`.
pub fn field_jet<T: Scalar + FieldScalar>(prog: &FieldProgram, x0: &[T], k: usize) -> Result<MapJet<T>, EvalError> {
    let seeds = MapJet::identity(x0, k);
    field_jet_at(prog, &seeds.components)
}

/// The field evaluated on arbitrary state jets (used by jet transport).
pub fn field_jet_at<T: Scalar + FieldScalar>(prog: &FieldProgram, state: &[Jet<T>]) -> Result<MapJet<T>, EvalError> {
    Ok(MapJet::new(prog.eval(state)?))
}

/// Values the expression tree can be evaluated on.
pub trait FieldValue: Clone {
    /// Constant with the same shape as `like`.
    fn lift(c: f64, like: &Self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn div(&self, o: &Self) -> Result<Self, String>;
    fn powi(&self, n: i32) -> Result<Self, String>;
    fn apply(&self, f: Func) -> Result<Self, String>;
}

/// Scalars with the domain rules of the real or complex functions.
pub trait FieldScalar: Scalar {}
impl FieldScalar for f64 {}
impl FieldScalar for Complex64 {}

fn scalar_domain<T: Scalar>(v: T, f: Func) -> Result<(), String> {
    match f {
        Func::Log if v.outside_real_domain_log() => Err(format!("log of {v:?} is undefined")),
        Func::Sqrt if v.outside_real_domain_sqrt() => Err(format!("sqrt of {v:?} is undefined")),
        _ => Ok(()),
    }
}

impl<T: FieldScalar> FieldValue for T {
    fn lift(c: f64, _like: &Self) -> Self {
        T::from_f64(c)
    }
    fn add(&self, o: &Self) -> Self {
        *self + *o
    }
    fn sub(&self, o: &Self) -> Self {
        *self - *o
    }
    fn mul(&self, o: &Self) -> Self {
        *self * *o
    }
    fn neg(&self) -> Self {
        -*self
    }
    fn div(&self, o: &Self) -> Result<Self, String> {
        if o.modulus() == 0.0 {
            return Err("division by zero".into());
        }
        Ok(*self / *o)
    }
    fn powi(&self, n: i32) -> Result<Self, String> {
        if n < 0 && self.modulus() == 0.0 {
            return Err("negative power of zero".into());
        }
        Ok(Scalar::powi(*self, n))
    }
    fn apply(&self, f: Func) -> Result<Self, String> {
        scalar_domain(*self, f)?;
        Ok(match f {
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Exp => self.exp(),
            Func::Log => self.ln(),
            Func::Sqrt => Scalar::sqrt(*self),
            Func::Tanh => self.tanh(),
        })
    }
}

impl<T: FieldScalar> FieldValue for Jet<T> {
    fn lift(c: f64, like: &Self) -> Self {
        Jet::constant_like(like.layout(), T::from_f64(c))
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn div(&self, o: &Self) -> Result<Self, String> {
        self.checked_div(o).map_err(|e| e.to_string())
    }
    fn powi(&self, n: i32) -> Result<Self, String> {
        Jet::powi(self, n).map_err(|e| e.to_string())
    }
    fn apply(&self, f: Func) -> Result<Self, String> {
        let v = self.value();
        scalar_domain(v, f)?;
        let r = match f {
            Func::Sin => Ok(self.sin()),
            Func::Cos => Ok(self.cos()),
            Func::Exp => Ok(self.exp()),
            Func::Log => self.ln(),
            Func::Sqrt => Jet::sqrt(self),
            Func::Tanh => Jet::tanh(self),
        };
        r.map_err(|e| format!("{}: {e}", f.name()))
    }
}

fn eval_expr<V: FieldValue>(e: &Expr, x: &[V], params: &[(String, f64)]) -> Result<V, String> {
    Ok(match e {
        Expr::Const(c) => V::lift(*c, &x[0]),
        Expr::Var(i) => x[*i].clone(),
        Expr::Param(i) => V::lift(params[*i].1, &x[0]),
        Expr::Neg(a) => eval_expr(a, x, params)?.neg(),
        Expr::Binary(op, a, b) => {
            let (a, b) = (eval_expr(a, x, params)?, eval_expr(b, x, params)?);
            match op {
                BinOp::Add => a.add(&b),
                BinOp::Sub => a.sub(&b),
                BinOp::Mul => a.mul(&b),
                BinOp::Div => a.div(&b)?,
            }
        }
        Expr::Pow(a, n) => eval_expr(a, x, params)?.powi(*n)?,
        Expr::Call(f, a) => eval_expr(a, x, params)?.apply(*f)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str, n: usize) -> FieldProgram {
        parse_field(src, n, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn stuart_landau_at_unit_point() {
        let p = parse("[x1*(1 - x1^2 - x2^2) - x2, x2*(1 - x1^2 - x2^2) + x1]", 2);
        assert_eq!(p.eval(&[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn zero_field() {
        let p = parse("[0, 0]", 2);
        assert_eq!(p.eval(&[3.0, -1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn dangling_operator_is_reported_with_position() {
        let err = parse_field("[x1 +, x2]", 2, &BTreeMap::new()).unwrap_err();
        match err {
            ParseError::Syntax { line, col, .. } => assert_eq!((line, col), (1, 6)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert!(matches!(
            parse_field("[y]", 1, &BTreeMap::new()),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_field("[x1, x1]", 1, &BTreeMap::new()),
            Err(ParseError::Arity { expected: 1, found: 2 })
        ));
        // x3 is not a variable of a planar system
        assert!(parse_field("[x3, x1]", 2, &BTreeMap::new()).is_err());
    }

    #[test]
    fn precedence_rules() {
        let p = parse("[-x1^2, 2^3^2, -2^2, 8/2/2 - 1 - 1]", 4);
        let v = p.eval(&[3.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(v, vec![-9.0, 512.0, -4.0, 0.0]);
    }

    #[test]
    fn non_integer_exponent_rejected() {
        assert!(parse_field("[x1^0.5]", 1, &BTreeMap::new()).is_err());
        assert!(parse_field("[x1^x1]", 1, &BTreeMap::new()).is_err());
        let p = parse("[x1^(1+1)]", 1);
        assert_eq!(p.eval(&[3.0]).unwrap(), vec![9.0]);
    }

    #[test]
    fn parameters_bind() {
        let mut params = BTreeMap::new();
        params.insert("eps".to_string(), 0.1);
        let p = parse_field("[-x1, -2*x2 + eps*x1^3]", 2, &params).unwrap();
        let v = p.eval(&[1.0, 0.0]).unwrap();
        assert!((v[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(parse("[-x1]", 1).eval(&[2.0]).unwrap(), vec![-2.0]);
        assert_eq!(parse("[-x1 + x1^2]", 1).eval(&[0.5]).unwrap(), vec![-0.25]);
    }

    #[test]
    fn domain_errors_name_the_component() {
        let p = parse("[x1, log(x1 - 1)]", 2);
        let err = p.eval(&[0.5, 0.0]).unwrap_err();
        assert!(matches!(err, EvalError::Domain { component: 1, .. }));
        let p = parse("[1/x1]", 1);
        assert!(p.eval(&[0.0]).is_err());
        // complex evaluation extends the real domain
        let z = parse("[log(x1)]", 1).eval(&[Complex64::new(-1.0, 0.0)]).unwrap();
        assert!((z[0].im - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn field_jets_read_off_polynomials() {
        let p = parse("[-x1 + x1^2]", 1);
        let j = field_jet(&p, &[0.0], 2).unwrap();
        assert_eq!(j.components[0].coeffs(), &[0.0, -1.0, 1.0]);
        let lin = parse("[-x1]", 1);
        let j = field_jet(&lin, &[0.0], 3).unwrap();
        assert_eq!(j.components[0].coeffs(), &[0.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn stuart_landau_jacobian() {
        let p = parse("[x1*(1 - x1^2 - x2^2) - x2, x2*(1 - x1^2 - x2^2) + x1]", 2);
        let j = field_jet(&p, &[1.0, 0.0], 1).unwrap();
        assert_eq!(j.linear_part(), vec![vec![-2.0, -1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn pretty_print_reparses() {
        let src = "[sin(x1)*exp(-x2) - 2.5e-1*x1^3/(1 + x2^2), sqrt(1 + x1^2) - tanh(x2) + log(2 + cos(x1)) - pi]";
        let p = parse(src, 2);
        let q = parse(&p.to_string(), 2);
        assert_eq!(p, q);
    }
}
