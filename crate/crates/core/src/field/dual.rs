//! Second-order forward-mode differentiation in two variables.

use std::ops::{Add, Mul, Neg, Sub};

/// Symmetric 2x2 matrix stored as its upper triangle.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { xx: 0.0, xy: 0.0, yy: 0.0 };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub fn identity() -> Self {
        Sym2::new(1.0, 0.0, 1.0)
    }

    pub fn scale(self, s: f64) -> Self {
        Sym2::new(s * self.xx, s * self.xy, s * self.yy)
    }

    /// `u v^T + v u^T`, the symmetric outer product.
    pub fn sym_outer(u: [f64; 2], v: [f64; 2]) -> Self {
        Sym2::new(2.0 * u[0] * v[0], u[0] * v[1] + u[1] * v[0], 2.0 * u[1] * v[1])
    }

    pub fn outer(u: [f64; 2]) -> Self {
        Sym2::new(u[0] * u[0], u[0] * u[1], u[1] * u[1])
    }

    /// Spectral norm, i.e. the largest eigenvalue magnitude.
    pub fn op_norm(self) -> f64 {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let radius = half_diff.hypot(self.xy);
        mean.abs() + radius
    }

    pub fn frobenius(self) -> f64 {
        (self.xx * self.xx + 2.0 * self.xy * self.xy + self.yy * self.yy).sqrt()
    }

    pub fn mul_vec(self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }
}

/// A scalar carrying its gradient and Hessian with respect to two seed
/// variables.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DualScalar2 {
    pub value: f64,
    pub d1: [f64; 2],
    pub d2: Sym2,
}

impl DualScalar2 {
    pub fn constant(value: f64) -> Self {
        DualScalar2 { value, d1: [0.0; 2], d2: Sym2::ZERO }
    }

    /// The coordinate variable `x` (axis 0) or `y` (axis 1).
    pub fn variable(value: f64, axis: usize) -> Self {
        let mut d1 = [0.0; 2];
        d1[axis] = 1.0;
        DualScalar2 { value, d1, d2: Sym2::ZERO }
    }

    /// Applies a scalar function given its value and first two derivatives at
    /// `self.value`.
    #[inline]
    pub fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        DualScalar2 {
            value: f,
            d1: [df * self.d1[0], df * self.d1[1]],
            d2: self.d2.scale(df) + Sym2::outer(self.d1).scale(d2f),
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sqrt(self) -> Self {
        let r = self.value.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.value))
    }

    pub fn scale(self, s: f64) -> Self {
        DualScalar2 {
            value: s * self.value,
            d1: [s * self.d1[0], s * self.d1[1]],
            d2: self.d2.scale(s),
        }
    }

    /// `self + s * other`, the accumulation step of a dense layer.
    #[inline]
    pub fn mul_add(self, s: f64, other: DualScalar2) -> Self {
        DualScalar2 {
            value: self.value + s * other.value,
            d1: [self.d1[0] + s * other.d1[0], self.d1[1] + s * other.d1[1]],
            d2: Sym2::new(
                self.d2.xx + s * other.d2.xx,
                self.d2.xy + s * other.d2.xy,
                self.d2.yy + s * other.d2.yy,
            ),
        }
    }
}

impl Add for DualScalar2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        DualScalar2 {
            value: self.value + o.value,
            d1: [self.d1[0] + o.d1[0], self.d1[1] + o.d1[1]],
            d2: self.d2 + o.d2,
        }
    }
}

impl Add<f64> for DualScalar2 {
    type Output = Self;
    fn add(mut self, c: f64) -> Self {
        self.value += c;
        self
    }
}

impl Sub for DualScalar2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for DualScalar2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul for DualScalar2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        DualScalar2 {
            value: self.value * o.value,
            d1: [
                self.value * o.d1[0] + o.value * self.d1[0],
                self.value * o.d1[1] + o.value * self.d1[1],
            ],
            d2: o.d2.scale(self.value) + self.d2.scale(o.value) + Sym2::sym_outer(self.d1, o.d1),
        }
    }
}

impl Mul<f64> for DualScalar2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lift(f: impl Fn(DualScalar2, DualScalar2) -> DualScalar2, x: f64, y: f64) -> DualScalar2 {
        f(DualScalar2::variable(x, 0), DualScalar2::variable(y, 1))
    }

    // Central differences of the value and of the propagated gradient.
    fn fd_check(f: impl Fn(DualScalar2, DualScalar2) -> DualScalar2 + Copy, x: f64, y: f64) {
        let h = 1e-5;
        let v = |x: f64, y: f64| lift(f, x, y);
        let d = v(x, y);
        let gx = (v(x + h, y).value - v(x - h, y).value) / (2.0 * h);
        let gy = (v(x, y + h).value - v(x, y - h).value) / (2.0 * h);
        let hxx = (v(x + h, y).d1[0] - v(x - h, y).d1[0]) / (2.0 * h);
        let hxy = (v(x, y + h).d1[0] - v(x, y - h).d1[0]) / (2.0 * h);
        let hyy = (v(x, y + h).d1[1] - v(x, y - h).d1[1]) / (2.0 * h);
        let tol = |a: f64| 1e-6 * a.abs().max(1.0);
        assert!((gx - d.d1[0]).abs() < tol(gx), "gx {gx} vs {}", d.d1[0]);
        assert!((gy - d.d1[1]).abs() < tol(gy), "gy {gy} vs {}", d.d1[1]);
        assert!((hxx - d.d2.xx).abs() < tol(hxx), "hxx {hxx} vs {}", d.d2.xx);
        assert!((hxy - d.d2.xy).abs() < tol(hxy), "hxy {hxy} vs {}", d.d2.xy);
        assert!((hyy - d.d2.yy).abs() < tol(hyy), "hyy {hyy} vs {}", d.d2.yy);
    }

    proptest! {
        #[test]
        fn product_rule(x in -2.0..2.0f64, y in -2.0..2.0f64) {
            fd_check(|a, b| (a * b) * (a + b.scale(0.5)) + 3.0, x, y);
        }

        #[test]
        fn chain_rule_trig(x in -2.0..2.0f64, y in -2.0..2.0f64) {
            fd_check(|a, b| (a.scale(3.0) + b).sin() * (a - b).cos(), x, y);
        }

        #[test]
        fn chain_rule_sqrt(x in 0.2..2.0f64, y in 0.2..2.0f64) {
            fd_check(|a, b| (a * a + b * b).sqrt(), x, y);
        }

        #[test]
        fn op_norm_is_largest_eigenvalue_magnitude(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64) {
            let m = Sym2::new(a, b, c);
            let tr = a + c;
            let det = a * c - b * b;
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            let expect = (tr / 2.0 + disc).abs().max((tr / 2.0 - disc).abs());
            prop_assert!((m.op_norm() - expect).abs() < 1e-12 * expect.max(1.0));
        }
    }
}
