//! Second-order forward-mode jets.
//!
//! A [`Jet`] carries a value together with its gradient and Hessian with
//! respect to the chart variables. Constants carry no derivative storage at
//! all, so arithmetic on constant structure functions stays scalar.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Numeric type usable by the generic geometry kernels (`f64` or [`Jet`]).
pub trait Scalar:
    Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    fn value(&self) -> f64;

    fn zero() -> Self {
        Self::constant(0.0)
    }

    /// True only for an exact zero with no derivative content.
    fn is_exact_zero(&self) -> bool;
}

impl Scalar for f64 {
    #[inline]
    fn constant(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn is_exact_zero(&self) -> bool {
        *self == 0.0
    }
}

/// Value, gradient and (optionally) Hessian of a function of `n` variables.
///
/// `order` is 0 for exact constants (no derivative storage), 1 when only the
/// gradient is tracked and 2 when the Hessian is tracked as well.
#[derive(Clone, PartialEq)]
pub struct Jet {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
    order: u8,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("value", &self.value)
            .field("grad", &self.grad)
            .field("order", &self.order)
            .finish()
    }
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Jet {
            value,
            grad: Vec::new(),
            hess: Vec::new(),
            order: 0,
        }
    }

    /// The coordinate function `x_index` seeded at `value`.
    pub fn variable(value: f64, index: usize, n: usize, order: u8) -> Self {
        assert!(index < n, "variable index out of range");
        if order == 0 {
            return Jet::constant(value);
        }
        let mut grad = vec![0.0; n];
        grad[index] = 1.0;
        let hess = if order >= 2 { vec![0.0; n * n] } else { Vec::new() };
        Jet {
            value,
            grad,
            hess,
            order: order.min(2),
        }
    }

    /// Builds a jet from explicit parts. `hess` is row-major `n * n`.
    pub fn from_parts(value: f64, grad: Vec<f64>, hess: Option<Vec<f64>>) -> Self {
        match hess {
            Some(h) => {
                assert_eq!(h.len(), grad.len() * grad.len());
                Jet {
                    value,
                    grad,
                    hess: h,
                    order: 2,
                }
            }
            None => Jet {
                value,
                grad,
                hess: Vec::new(),
                order: 1,
            },
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn is_constant(&self) -> bool {
        self.order == 0
    }

    /// Partial derivative with respect to variable `i` (zero for constants).
    pub fn d(&self, i: usize) -> f64 {
        if self.order == 0 {
            0.0
        } else {
            self.grad[i]
        }
    }

    /// Second partial derivative (zero for constants and order-1 jets).
    pub fn dd(&self, i: usize, j: usize) -> f64 {
        if self.order < 2 {
            0.0
        } else {
            let n = self.grad.len();
            self.hess[i * n + j]
        }
    }

    /// Gradient as a dense vector of length `n`.
    pub fn gradient(&self, n: usize) -> Vec<f64> {
        if self.order == 0 {
            vec![0.0; n]
        } else {
            self.grad.clone()
        }
    }

    /// Hessian as a dense row-major vector of length `n * n`.
    pub fn hessian(&self, n: usize) -> Vec<f64> {
        if self.order < 2 {
            vec![0.0; n * n]
        } else {
            self.hess.clone()
        }
    }

    /// Drops derivative information above `order`.
    pub fn truncate(mut self, order: u8) -> Self {
        if self.order > order {
            if order == 0 {
                return Jet::constant(self.value);
            }
            self.hess.clear();
            self.order = order;
        }
        self
    }

    fn combined_order(a: &Jet, b: &Jet) -> u8 {
        match (a.order, b.order) {
            (0, o) | (o, 0) => o,
            (p, q) => p.min(q),
        }
    }

    /// Applies a scalar function with derivatives `f1 = f'(v)`, `f2 = f''(v)`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet {
        if self.order == 0 {
            return Jet::constant(f0);
        }
        let grad: Vec<f64> = self.grad.iter().map(|g| f1 * g).collect();
        let hess = if self.order >= 2 {
            let n = self.grad.len();
            let mut h = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = f1 * self.hess[i * n + j] + f2 * self.grad[i] * self.grad[j];
                    h[i * n + j] = v;
                    h[j * n + i] = v;
                }
            }
            h
        } else {
            Vec::new()
        };
        Jet {
            value: f0,
            grad,
            hess,
            order: self.order,
        }
    }

    pub fn scale(&self, c: f64) -> Jet {
        self.chain(c * self.value, c, 0.0)
    }

    pub fn recip(&self) -> Jet {
        let v = self.value;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    fn add_impl(a: &Jet, b: &Jet, sign: f64) -> Jet {
        let order = Jet::combined_order(a, b);
        let value = a.value + sign * b.value;
        if order == 0 {
            return Jet::constant(value);
        }
        let n = if a.order > 0 { a.grad.len() } else { b.grad.len() };
        let mut grad = vec![0.0; n];
        for (i, g) in grad.iter_mut().enumerate() {
            *g = a.d(i) + sign * b.d(i);
        }
        let hess = if order >= 2 {
            let mut h = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] = a.dd(i, j) + sign * b.dd(i, j);
                }
            }
            h
        } else {
            Vec::new()
        };
        Jet {
            value,
            grad,
            hess,
            order,
        }
    }

    fn mul_impl(a: &Jet, b: &Jet) -> Jet {
        let order = Jet::combined_order(a, b);
        let value = a.value * b.value;
        if order == 0 {
            return Jet::constant(value);
        }
        if a.order == 0 {
            return b.scale(a.value);
        }
        if b.order == 0 {
            return a.scale(b.value);
        }
        let n = a.grad.len();
        let grad: Vec<f64> = (0..n)
            .map(|i| a.value * b.grad[i] + b.value * a.grad[i])
            .collect();
        let hess = if order >= 2 {
            let mut h = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = a.value * b.hess[i * n + j]
                        + b.value * a.hess[i * n + j]
                        + a.grad[i] * b.grad[j]
                        + a.grad[j] * b.grad[i];
                    h[i * n + j] = v;
                    h[j * n + i] = v;
                }
            }
            h
        } else {
            Vec::new()
        };
        Jet {
            value,
            grad,
            hess,
            order,
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        Jet::add_impl(&self, &rhs, 1.0)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        Jet::add_impl(&self, &rhs, -1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        Jet::mul_impl(&self, &rhs)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        if rhs.order == 0 {
            return self.scale(1.0 / rhs.value);
        }
        Jet::mul_impl(&self, &rhs.recip())
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet::add_impl(self, rhs, 1.0)
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet::add_impl(self, rhs, -1.0)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        Jet::mul_impl(self, rhs)
    }
}

impl Scalar for Jet {
    fn constant(v: f64) -> Self {
        Jet::constant(v)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn is_exact_zero(&self) -> bool {
        self.order == 0 && self.value == 0.0
    }
}
