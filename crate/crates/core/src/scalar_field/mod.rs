//! Analytic expressions over chart variables with exact first and second
//! derivatives.
//!
//! Expressions are parsed once (constant subtrees are folded at parse time)
//! and evaluated either as plain `f64` values or as second-order [`Jet`]s.

mod jet;
mod parse;

pub use jet::{Jet, Scalar};
pub use parse::{ParseError, ParseErrorKind};

use nalgebra::{DMatrix, DVector};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Neg,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "neg" => Func::Neg,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Neg => "neg",
        }
    }

    /// Value and first two derivatives at `v`, or a domain complaint.
    fn eval(self, v: f64) -> Result<(f64, f64, f64), &'static str> {
        Ok(match self {
            Func::Sin => (v.sin(), v.cos(), -v.sin()),
            Func::Cos => (v.cos(), -v.sin(), -v.cos()),
            Func::Tan => {
                let c = v.cos();
                if c == 0.0 {
                    return Err("tan at a pole");
                }
                let t = v.tan();
                let s = 1.0 + t * t;
                (t, s, 2.0 * t * s)
            }
            Func::Exp => {
                let e = v.exp();
                (e, e, e)
            }
            Func::Log => {
                if v <= 0.0 {
                    return Err("log of a non-positive argument");
                }
                (v.ln(), 1.0 / v, -1.0 / (v * v))
            }
            Func::Sqrt => {
                if v <= 0.0 {
                    return Err("sqrt of a non-positive argument");
                }
                let s = v.sqrt();
                (s, 0.5 / s, -0.25 / (s * v))
            }
            Func::Sinh => (v.sinh(), v.cosh(), v.sinh()),
            Func::Cosh => (v.cosh(), v.sinh(), v.cosh()),
            Func::Neg => (-v, -1.0, 0.0),
        })
    }
}

/// Expression tree. Variables are stored 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    Func(Func, Box<Node>),
}

impl Node {
    fn as_const(&self) -> Option<f64> {
        match self {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Collapses this node to a constant when all of its children are constant.
    fn folded(self) -> Result<Node, String> {
        let all_const = match &self {
            Node::Const(_) | Node::Var(_) => return Ok(self),
            Node::Neg(a) | Node::Func(_, a) => a.as_const().is_some(),
            Node::Binary(_, a, b) => a.as_const().is_some() && b.as_const().is_some(),
        };
        if !all_const {
            return Ok(self);
        }
        match self.value_at(&[]) {
            Ok(v) => Ok(Node::Const(v)),
            Err(e) => Err(e.to_string()),
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Neg(a) | Node::Func(_, a) => a.max_var(),
            Node::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(p), Some(q)) => Some(p.max(q)),
                (p, q) => p.or(q),
            },
        }
    }

    fn domain_error(&self, reason: &str) -> EvalError {
        EvalError {
            reason: reason.to_string(),
            subexpression: self.to_string(),
        }
    }

    fn value_at(&self, x: &[f64]) -> Result<f64, EvalError> {
        match self {
            Node::Const(c) => Ok(*c),
            Node::Var(i) => Ok(x[*i]),
            Node::Neg(a) => Ok(-a.value_at(x)?),
            Node::Func(f, a) => {
                let v = a.value_at(x)?;
                f.eval(v).map(|r| r.0).map_err(|e| self.domain_error(e))
            }
            Node::Binary(op, a, b) => {
                let u = a.value_at(x)?;
                let w = b.value_at(x)?;
                match op {
                    BinaryOp::Add => Ok(u + w),
                    BinaryOp::Sub => Ok(u - w),
                    BinaryOp::Mul => Ok(u * w),
                    BinaryOp::Div => {
                        if w == 0.0 {
                            Err(self.domain_error("division by zero"))
                        } else {
                            Ok(u / w)
                        }
                    }
                    BinaryOp::Pow => {
                        let variable_exponent = b.as_const().is_none();
                        pow_parts(u, w, variable_exponent)
                            .map(|r| r.0)
                            .map_err(|e| self.domain_error(e))
                    }
                }
            }
        }
    }

    fn jet_at(&self, x: &[f64], order: u8) -> Result<Jet, EvalError> {
        match self {
            Node::Const(c) => Ok(Jet::constant(*c)),
            Node::Var(i) => Ok(Jet::variable(x[*i], *i, x.len(), order)),
            Node::Neg(a) => Ok(-a.jet_at(x, order)?),
            Node::Func(f, a) => {
                let inner = a.jet_at(x, order)?;
                let (f0, f1, f2) = f.eval(inner.value()).map_err(|e| self.domain_error(e))?;
                Ok(inner.chain(f0, f1, f2))
            }
            Node::Binary(op, a, b) => {
                let u = a.jet_at(x, order)?;
                match op {
                    BinaryOp::Pow => {
                        if let Some(c) = b.as_const() {
                            let (f0, f1, f2) =
                                pow_parts(u.value(), c, false).map_err(|e| self.domain_error(e))?;
                            return Ok(u.chain(f0, f1, f2));
                        }
                        let w = b.jet_at(x, order)?;
                        if u.value() <= 0.0 {
                            return Err(self.domain_error("power with variable exponent needs a positive base"));
                        }
                        let ln_u = u.chain(u.value().ln(), 1.0 / u.value(), -1.0 / (u.value() * u.value()));
                        let prod = w * ln_u;
                        let e = prod.value().exp();
                        Ok(prod.chain(e, e, e))
                    }
                    _ => {
                        let w = b.jet_at(x, order)?;
                        match op {
                            BinaryOp::Add => Ok(u + w),
                            BinaryOp::Sub => Ok(u - w),
                            BinaryOp::Mul => Ok(u * w),
                            BinaryOp::Div => {
                                if w.value() == 0.0 {
                                    Err(self.domain_error("division by zero"))
                                } else {
                                    Ok(u / w)
                                }
                            }
                            BinaryOp::Pow => unreachable!(),
                        }
                    }
                }
            }
        }
    }
}

/// `base^exponent` with its first two derivatives in the base.
fn pow_parts(base: f64, exponent: f64, variable_exponent: bool) -> Result<(f64, f64, f64), &'static str> {
    if variable_exponent {
        if base <= 0.0 {
            return Err("power with variable exponent needs a positive base");
        }
        return Ok((base.powf(exponent), 0.0, 0.0));
    }
    if exponent == 0.0 {
        return Ok((1.0, 0.0, 0.0));
    }
    let c = exponent;
    if c.fract() == 0.0 && c.abs() < 1.0e9 {
        let k = c as i32;
        if base == 0.0 && k < 0 {
            return Err("negative power of zero");
        }
        let f0 = base.powi(k);
        let f1 = if k == 1 { 1.0 } else { c * base.powi(k - 1) };
        let f2 = match k {
            1 => 0.0,
            2 => 2.0,
            _ => c * (c - 1.0) * base.powi(k - 2),
        };
        return Ok((f0, f1, f2));
    }
    if base < 0.0 {
        return Err("fractional power of a negative base");
    }
    if base == 0.0 && c < 2.0 {
        return Err("fractional power of zero is not twice differentiable");
    }
    Ok((
        base.powf(c),
        c * base.powf(c - 1.0),
        c * (c - 1.0) * base.powf(c - 2.0),
    ))
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{:?})", -c)
                } else {
                    write!(f, "{c:?}")
                }
            }
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Node::Func(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Evaluation outside the real domain of some subexpression.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error: {reason} in `{subexpression}`")]
pub struct EvalError {
    pub reason: String,
    pub subexpression: String,
}

/// Value, gradient and Hessian of a field at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// A smooth function on a chart with `n` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    root: Node,
    n: usize,
}

impl ScalarField {
    pub fn parse(text: &str, n: usize) -> Result<Self, ParseError> {
        let root = parse::Parser::parse(text, n)?;
        Ok(ScalarField { root, n })
    }

    pub fn constant(value: f64, n: usize) -> Self {
        ScalarField {
            root: Node::Const(value),
            n,
        }
    }

    pub fn zero(n: usize) -> Self {
        Self::constant(0.0, n)
    }

    /// The coordinate function `x_{index+1}`.
    pub fn coordinate(index: usize, n: usize) -> Self {
        assert!(index < n);
        ScalarField {
            root: Node::Var(index),
            n,
        }
    }

    /// Wraps an existing tree; fails if it references a variable beyond `n`.
    pub fn from_node(root: Node, n: usize) -> Result<Self, ParseError> {
        if let Some(i) = root.max_var() {
            if i >= n {
                return Err(ParseError {
                    kind: ParseErrorKind::VariableOutOfRange { index: i + 1, n },
                    position: 0,
                });
            }
        }
        Ok(ScalarField { root, n })
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.root.as_const()
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    /// `-self`, folded when constant.
    pub fn negated(&self) -> Self {
        let root = match &self.root {
            Node::Const(c) => Node::Const(-c),
            Node::Neg(inner) => (**inner).clone(),
            other => Node::Neg(Box::new(other.clone())),
        };
        ScalarField { root, n: self.n }
    }

    fn check_point(&self, x: &[f64]) {
        assert_eq!(x.len(), self.n, "point dimension does not match field arity");
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.check_point(x);
        self.root.value_at(x)
    }

    /// Jet of the requested order (0, 1 or 2).
    pub fn jet(&self, x: &[f64], order: u8) -> Result<Jet, EvalError> {
        self.check_point(x);
        if order == 0 {
            return self.root.value_at(x).map(Jet::constant);
        }
        self.root.jet_at(x, order)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<EvalResult, EvalError> {
        let j = self.jet(x, 2)?;
        let n = self.n;
        Ok(EvalResult {
            value: j.value(),
            gradient: DVector::from_vec(j.gradient(n)),
            hessian: DMatrix::from_row_slice(n, n, &j.hessian(n)),
        })
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn parse_product_of_variables() {
        let e = ScalarField::parse("x1*x2", 2).unwrap();
        assert_eq!(
            e.node(),
            &Node::Binary(BinaryOp::Mul, Box::new(Node::Var(0)), Box::new(Node::Var(1)))
        );
    }

    #[test]
    fn parse_power_of_sine() {
        let e = ScalarField::parse("sin(x1)^2", 1).unwrap();
        assert_eq!(
            e.node(),
            &Node::Binary(
                BinaryOp::Pow,
                Box::new(Node::Func(Func::Sin, Box::new(Node::Var(0)))),
                Box::new(Node::Const(2.0))
            )
        );
    }

    #[test]
    fn variable_out_of_range() {
        let err = ScalarField::parse("x3", 2).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::VariableOutOfRange { index: 3, n: 2 });
        assert_eq!(err.position, 0);
    }

    #[test]
    fn unknown_identifier_and_syntax_errors() {
        let err = ScalarField::parse("y1 + 1", 1).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownIdentifier("y1".into()));
        let err = ScalarField::parse("x1 + * 2", 1).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Syntax(_)));
        assert_eq!(err.position, 5);
        let err = ScalarField::parse("sin(x1", 1).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Syntax(_)));
        assert!(ScalarField::parse("x0", 1).is_err());
        assert!(ScalarField::parse("", 1).is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        let at = |s: &str, x: &[f64]| ScalarField::parse(s, x.len()).unwrap().value(x).unwrap();
        assert_eq!(at("-x1^2", &[3.0]), -9.0);
        assert_eq!(at("2^3^2", &[0.0]), 512.0);
        assert_eq!(at("x1 - x2 - 1", &[5.0, 1.0]), 3.0);
        assert_eq!(at("x1 / x2 / 2", &[8.0, 2.0]), 2.0);
        assert_eq!(at("x1^-1", &[4.0]), 0.25);
        assert_eq!(at("2*-x1", &[3.0]), -6.0);
        assert_eq!(at("1 + 2*x1^2", &[2.0]), 9.0);
    }

    #[test]
    fn constants_fold_at_parse_time() {
        let e = ScalarField::parse("2*(3 + 1)^2 - sin(0)", 1).unwrap();
        assert_eq!(e.as_constant(), Some(32.0));
        let e = ScalarField::parse("-1", 3).unwrap();
        assert_eq!(e.as_constant(), Some(-1.0));
        let err = ScalarField::parse("log(0) + x1", 1).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Domain(_)));
    }

    #[test]
    fn sine_squared_at_half_pi() {
        let e = ScalarField::parse("sin(x1)^2", 1).unwrap();
        let r = e.evaluate(&[PI / 2.0]).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        assert!(r.gradient[0].abs() < 1e-15);
    }

    #[test]
    fn product_gradient_and_hessian() {
        let e = ScalarField::parse("x1*x2", 2).unwrap();
        let r = e.evaluate(&[3.0, 4.0]).unwrap();
        assert_eq!(r.value, 12.0);
        assert_eq!(r.gradient.as_slice(), &[4.0, 3.0]);
        assert_eq!(r.hessian, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn second_derivative_of_x1_squared_x2() {
        let e = ScalarField::parse("x1^2*x2", 2).unwrap();
        let r = e.evaluate(&[1.0, 5.0]).unwrap();
        assert_eq!(r.hessian[(0, 0)], 10.0);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let e = ScalarField::parse("1 + log(x1 - 2)", 1).unwrap();
        let err = e.evaluate(&[1.0]).unwrap_err();
        assert_eq!(err.subexpression, "log((x1 - 2.0))");
        let e = ScalarField::parse("x2 / x1", 2).unwrap();
        assert!(e.value(&[0.0, 1.0]).is_err());
        let e = ScalarField::parse("sqrt(x1)", 1).unwrap();
        assert!(e.jet(&[-1.0], 2).is_err());
        let e = ScalarField::parse("x1^0.5", 1).unwrap();
        assert!(e.value(&[-1.0]).is_err());
    }

    #[test]
    fn variable_exponent() {
        let e = ScalarField::parse("x1^x2", 2).unwrap();
        let r = e.evaluate(&[2.0, 3.0]).unwrap();
        assert!((r.value - 8.0).abs() < 1e-12);
        assert!((r.gradient[0] - 12.0).abs() < 1e-12);
        assert!((r.gradient[1] - 8.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn printing_round_trips() {
        for s in [
            "x1*x2 - 3",
            "-x1^2 + sin(x2)/cosh(x1)",
            "exp(-x1) * 1e-7",
            "neg(x1) + sqrt(x2) - tan(0.25*x1)",
            "(x1 - 2)^-3 + x2^1.5",
        ] {
            let e = ScalarField::parse(s, 2).unwrap();
            let printed = e.to_string();
            let back = ScalarField::parse(&printed, 2).unwrap();
            assert_eq!(e, back, "{s} -> {printed}");
        }
    }
}
