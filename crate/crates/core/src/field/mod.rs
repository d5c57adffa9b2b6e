//! Implicit scalar fields in two dimensions.

mod dual;
mod neural;

pub use dual::{DualScalar2, Sym2};
pub use neural::{Layer, MlpWeights};

use crate::{Error, Result};
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Point2::new(a[0], a[1])
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(s * self.x, s * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, p: Point2) -> Point2 {
        p.scale(self)
    }
}

/// Value, gradient and Hessian of a field at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: Sym2,
}

impl Jet2 {
    pub fn grad_norm(&self) -> f64 {
        self.grad[0].hypot(self.grad[1])
    }
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub min: Point2,
    pub max: Point2,
}

impl BBox {
    pub const fn new(min: Point2, max: Point2) -> Self {
        BBox { min, max }
    }

    /// `[-half, half]^2`.
    pub const fn centered(half: f64) -> Self {
        BBox::new(Point2::new(-half, -half), Point2::new(half, half))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

/// Background box used throughout unless overridden.
pub const DEFAULT_BOX: BBox = BBox::centered(2.0);

/// Radial profile that equals the signed distance inside a band around
/// `radius` and flattens to slope `far_slope` beyond twice the band.
///
/// The derivative ramps from 1 to `far_slope` over `band <= |s| <= 2 band`
/// along a cubic smoothstep, so the profile is C2 in `s = r - radius`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandedProfile {
    pub radius: f64,
    pub band: f64,
    pub far_slope: f64,
}

impl BandedProfile {
    /// Profile value and first two derivatives at signed offset `s`.
    fn eval(&self, s: f64) -> (f64, f64, f64) {
        let a = s.abs();
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        let b = self.band;
        let k = self.far_slope - 1.0;
        if a <= b {
            (s, 1.0, 0.0)
        } else if a < 2.0 * b {
            let t = (a - b) / b;
            let f = b + b * (t + k * (t * t * t - 0.5 * t * t * t * t));
            let df = 1.0 + k * (3.0 * t * t - 2.0 * t * t * t);
            let d2f = k * (6.0 * t - 6.0 * t * t) / b;
            (sign * f, df, sign * d2f)
        } else {
            let f = b * (2.0 + 0.5 * k) + self.far_slope * (a - 2.0 * b);
            (sign * f, self.far_slope, 0.0)
        }
    }

    /// Whether `p` lies in the region where the field is an exact SDF.
    pub fn in_band(&self, p: Point2) -> bool {
        (p.norm() - self.radius).abs() <= self.band
    }

    /// Whether `p` lies in the flattened region `|r - R| >= 2 band`.
    pub fn in_far_region(&self, p: Point2) -> bool {
        (p.norm() - self.radius).abs() >= 2.0 * self.band
    }
}

/// An implicit field `psi` whose zero set is the interface; the inside is
/// `{psi < 0}`.
#[derive(Clone, Debug)]
pub enum ImplicitField {
    /// `|x| - R`.
    CircleSdf { radius: f64 },
    /// `|x|^2 - R^2`.
    Quadratic { radius: f64 },
    Banded(BandedProfile),
    /// `base - alpha`.
    Offset { base: Box<ImplicitField>, alpha: f64 },
    /// `base(x - shift)`, the base geometry translated by `shift`.
    Shifted { base: Box<ImplicitField>, shift: Point2 },
    Neural(Arc<MlpWeights>),
}

impl fmt::Display for ImplicitField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImplicitField::CircleSdf { radius } => write!(f, "circle:{radius}"),
            ImplicitField::Quadratic { radius } => write!(f, "quadratic:{radius}"),
            ImplicitField::Banded(b) => write!(f, "banded:{}:{}:{}", b.radius, b.band, b.far_slope),
            ImplicitField::Offset { base, alpha } => write!(f, "offset({base}):{alpha}"),
            ImplicitField::Shifted { base, shift } => write!(f, "shifted({base}):{}:{}", shift.x, shift.y),
            ImplicitField::Neural(w) => write!(f, "neural:{}x{}", w.width(), w.steps_trained),
        }
    }
}

/// Radial field jet from a profile `f(r)` with derivatives.
fn radial_jet(p: Point2, f: f64, df: f64, d2f: f64) -> Jet2 {
    let r = p.norm();
    let n = [p.x / r, p.y / r];
    let tangential = Sym2::identity() - Sym2::outer(n);
    Jet2 {
        value: f,
        grad: [df * n[0], df * n[1]],
        hess: Sym2::outer(n).scale(d2f) + tangential.scale(df / r),
    }
}

impl ImplicitField {
    pub fn circle(radius: f64) -> Self {
        ImplicitField::CircleSdf { radius }
    }

    pub fn quadratic(radius: f64) -> Self {
        ImplicitField::Quadratic { radius }
    }

    pub fn offset(base: ImplicitField, alpha: f64) -> Self {
        ImplicitField::Offset { base: Box::new(base), alpha }
    }

    pub fn shifted(base: ImplicitField, shift: Point2) -> Self {
        ImplicitField::Shifted { base: Box::new(base), shift }
    }

    pub fn neural(weights: MlpWeights) -> Self {
        ImplicitField::Neural(Arc::new(weights))
    }

    /// Field value. Defined everywhere, including singular points of the
    /// gradient.
    pub fn value(&self, p: Point2) -> f64 {
        match self {
            ImplicitField::CircleSdf { radius } => p.norm() - radius,
            ImplicitField::Quadratic { radius } => p.x * p.x + p.y * p.y - radius * radius,
            ImplicitField::Banded(b) => b.eval(p.norm() - b.radius).0,
            ImplicitField::Offset { base, alpha } => base.value(p) - alpha,
            ImplicitField::Shifted { base, shift } => base.value(p - *shift),
            ImplicitField::Neural(w) => w.value(p),
        }
    }

    /// Value and gradient.
    pub fn value_grad(&self, p: Point2) -> Result<(f64, [f64; 2])> {
        match self {
            ImplicitField::Quadratic { radius } => {
                Ok((p.x * p.x + p.y * p.y - radius * radius, [2.0 * p.x, 2.0 * p.y]))
            }
            ImplicitField::Offset { base, alpha } => {
                let (v, g) = base.value_grad(p)?;
                Ok((v - alpha, g))
            }
            ImplicitField::Shifted { base, shift } => base.value_grad(p - *shift),
            ImplicitField::Neural(w) => Ok(w.value_grad(p)),
            _ => self.eval_jet(p).map(|j| (j.value, j.grad)),
        }
    }

    /// Value, gradient and Hessian at `p`.
    pub fn eval_jet(&self, p: Point2) -> Result<Jet2> {
        if !p.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite point ({}, {})", p.x, p.y)));
        }
        match self {
            ImplicitField::CircleSdf { radius } => {
                let r = p.norm();
                if r == 0.0 {
                    return Err(Error::SingularPoint(p));
                }
                Ok(radial_jet(p, r - radius, 1.0, 0.0))
            }
            ImplicitField::Quadratic { radius } => Ok(Jet2 {
                value: p.x * p.x + p.y * p.y - radius * radius,
                grad: [2.0 * p.x, 2.0 * p.y],
                hess: Sym2::identity().scale(2.0),
            }),
            ImplicitField::Banded(b) => {
                let r = p.norm();
                if r == 0.0 {
                    return Err(Error::SingularPoint(p));
                }
                let (f, df, d2f) = b.eval(r - b.radius);
                Ok(radial_jet(p, f, df, d2f))
            }
            ImplicitField::Offset { base, alpha } => {
                let mut j = base.eval_jet(p)?;
                j.value -= alpha;
                Ok(j)
            }
            ImplicitField::Shifted { base, shift } => base.eval_jet(p - *shift),
            ImplicitField::Neural(w) => Ok(w.jet(p)),
        }
    }

    /// True for kinds whose second derivatives are constant.
    pub fn is_polynomial(&self) -> bool {
        match self {
            ImplicitField::Quadratic { .. } => true,
            ImplicitField::Offset { base, .. } | ImplicitField::Shifted { base, .. } => base.is_polynomial(),
            _ => false,
        }
    }
}

/// Builds the banded field: exact SDF of the circle of radius `radius` for
/// `|r - radius| <= band`, flattened to slope `far_slope` beyond `2 band`.
pub fn make_banded(radius: f64, band: f64, far_slope: f64) -> Result<ImplicitField> {
    if !(radius.is_finite() && band > 0.0 && band < radius) {
        return Err(Error::InvalidParameter(format!(
            "banded field needs 0 < band < R, got band={band}, R={radius}"
        )));
    }
    if !(0.0..1.0).contains(&far_slope) {
        return Err(Error::InvalidParameter(format!(
            "far_slope must lie in [0, 1), got {far_slope}"
        )));
    }
    Ok(ImplicitField::Banded(BandedProfile { radius, band, far_slope }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiniteDiffReport {
    pub grad_rel_err: f64,
    pub hess_rel_err: f64,
}

/// Floor on the denominator of the relative errors, for points where the
/// exact derivative vanishes.
const REL_FLOOR: f64 = 1e-6;

/// Compares [`ImplicitField::eval_jet`] against central differences: the
/// gradient from values, the Hessian from gradients.
pub fn finite_diff_check(field: &ImplicitField, p: Point2, step: f64) -> Result<FiniteDiffReport> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let jet = field.eval_jet(p)?;
    let ex = Point2::new(step, 0.0);
    let ey = Point2::new(0.0, step);
    let fd_grad = [
        (field.value(p + ex) - field.value(p - ex)) / (2.0 * step),
        (field.value(p + ey) - field.value(p - ey)) / (2.0 * step),
    ];
    let gxp = field.eval_jet(p + ex)?.grad;
    let gxm = field.eval_jet(p - ex)?.grad;
    let gyp = field.eval_jet(p + ey)?.grad;
    let gym = field.eval_jet(p - ey)?.grad;
    let col_x = [(gxp[0] - gxm[0]) / (2.0 * step), (gxp[1] - gxm[1]) / (2.0 * step)];
    let col_y = [(gyp[0] - gym[0]) / (2.0 * step), (gyp[1] - gym[1]) / (2.0 * step)];
    // Symmetrize the difference Hessian before comparing.
    let fd_hess = Sym2::new(col_x[0], 0.5 * (col_x[1] + col_y[0]), col_y[1]);

    let g_err = (fd_grad[0] - jet.grad[0]).hypot(fd_grad[1] - jet.grad[1]);
    let g_norm = jet.grad_norm().max(REL_FLOOR);
    let h_err = (fd_hess - jet.hess).frobenius();
    let h_norm = jet.hess.frobenius().max(REL_FLOOR);
    Ok(FiniteDiffReport { grad_rel_err: g_err / g_norm, hess_rel_err: h_err / h_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn circle_jet_closed_form() {
        let j = ImplicitField::circle(1.0).eval_jet(Point2::new(2.0, 0.0)).unwrap();
        assert_eq!(j.value, 1.0);
        assert_eq!(j.grad, [1.0, 0.0]);
        assert!(close(j.hess.xx, 0.0, 1e-15));
        assert!(close(j.hess.xy, 0.0, 1e-15));
        assert!(close(j.hess.yy, 0.5, 1e-15));
    }

    #[test]
    fn quadratic_jet_closed_form() {
        let j = ImplicitField::quadratic(1.0).eval_jet(Point2::new(2.0, 0.0)).unwrap();
        assert_eq!(j.value, 3.0);
        assert_eq!(j.grad, [4.0, 0.0]);
        assert_eq!(j.hess, Sym2::new(2.0, 0.0, 2.0));
    }

    #[test]
    fn offset_shifts_value_only() {
        let base = ImplicitField::circle(1.0);
        let off = ImplicitField::offset(base.clone(), 0.1);
        let p = Point2::new(1.0, 0.0);
        let j = off.eval_jet(p).unwrap();
        assert!(close(j.value, -0.1, 1e-15));
        assert_eq!(j.grad, [1.0, 0.0]);
        let q = Point2::new(0.3, -1.7);
        let (jb, jo) = (base.eval_jet(q).unwrap(), off.eval_jet(q).unwrap());
        assert_eq!(jo.value, jb.value - 0.1);
        assert_eq!((jo.grad, jo.hess), (jb.grad, jb.hess));
    }

    #[test]
    fn circle_is_singular_at_origin() {
        let err = ImplicitField::circle(1.0).eval_jet(Point2::ORIGIN).unwrap_err();
        assert!(matches!(err, Error::SingularPoint(_)));
        // The value itself is still defined.
        assert_eq!(ImplicitField::circle(1.0).value(Point2::ORIGIN), -1.0);
    }

    #[test]
    fn finite_differences_on_analytic_fields() {
        let c = finite_diff_check(&ImplicitField::circle(1.0), Point2::new(1.3, 0.4), 1e-5).unwrap();
        assert!(c.grad_rel_err < 1e-8, "{c:?}");
        let q = finite_diff_check(&ImplicitField::quadratic(1.0), Point2::ORIGIN, 1e-3).unwrap();
        assert!(q.hess_rel_err < 1e-10, "{q:?}");
    }

    #[test]
    fn banded_profile() {
        let f = make_banded(1.0, 0.2, 0.02).unwrap();
        let j = f.eval_jet(Point2::new(1.1, 0.0)).unwrap();
        assert!(close(j.grad_norm(), 1.0, 1e-15));
        let far = f.eval_jet(Point2::new(1.9, 0.0)).unwrap();
        assert!(far.grad_norm() <= 0.02 + 1e-15);
        // Zero set is exactly the circle of radius R.
        for k in 0..16 {
            let t = k as f64 * 0.4;
            assert!(close(f.value(Point2::new(t.cos(), t.sin())), 0.0, 1e-15));
        }
        // The profile is monotone in r, so it vanishes nowhere else.
        let mut prev = f.value(Point2::new(1e-3, 0.0));
        for k in 1..=1000 {
            let v = f.value(Point2::new(1e-3 + k as f64 * 3e-3, 0.0));
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn banded_profile_is_c1_across_blend_boundaries() {
        let b = BandedProfile { radius: 1.0, band: 0.2, far_slope: 0.05 };
        for edge in [0.2, 0.4, -0.2, -0.4] {
            let e = 1e-9;
            let (fl, dl, _) = b.eval(edge - e);
            let (fr, dr, _) = b.eval(edge + e);
            assert!(close(fl, fr, 1e-8), "value jump at {edge}");
            assert!(close(dl, dr, 1e-7), "slope jump at {edge}");
        }
    }

    #[test]
    fn banded_parameter_checks() {
        assert!(make_banded(1.0, 1.5, 0.0).is_err());
        assert!(make_banded(1.0, 0.0, 0.0).is_err());
        assert!(make_banded(1.0, 0.2, 1.5).is_err());
    }
}
