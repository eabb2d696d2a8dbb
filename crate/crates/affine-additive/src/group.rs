//! The affine-additive group and its contact sub-Riemannian structure.
//!
//! Points are pairs `(a, l + i t)` with `a` real and `l > 0`; the product is
//!
//! ```text
//! (a', l' + i t') * (a, l + i t) = (a' + a, l'(l + i t) + i t').
//! ```
//!
//! The contact form is `theta = dt / (2 l) - da`. The horizontal frame is
//! `U = d/da + 2 l d/dt`, `V = 2 l d/dl`, completed by the Reeb-dual
//! `W = -d/da` with `theta(W) = 1`. Horizontal vectors are measured by
//! `|v|_H = sqrt(dl^2 + dt^2) / (2 l)`, and the Haar measure has density
//! `1 / l^2` against `da dl dt`.
//!
//! The log-cylindrical chart writes the half-plane factor as
//! `l + i t = exp(xi + i psi)` with `|psi| < pi/2`; it is the natural chart
//! for the radial stretch maps.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Scale-aware horizontality gate: a tangent `v` at `p` passes when
/// `|theta_p(v)| <= HORIZONTAL_TOL * (1 + |v|)`.
pub const HORIZONTAL_TOL: f64 = 1e-9;

/// Group element `(a, lambda + i t)` with `lambda > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    a: f64,
    lambda: f64,
    t: f64,
}

impl Point {
    pub fn new(a: f64, lambda: f64, t: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::LambdaNotPositive(lambda));
        }
        Ok(Point { a, lambda, t })
    }

    /// The group identity `(0, 1 + 0 i)`.
    pub fn identity() -> Self {
        Point {
            a: 0.0,
            lambda: 1.0,
            t: 0.0,
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Left product `self * q`.
    pub fn mul(&self, q: &Point) -> Point {
        Point {
            a: self.a + q.a,
            lambda: self.lambda * q.lambda,
            t: self.lambda * q.t + self.t,
        }
    }

    /// Group inverse `(-a, 1/lambda, -t/lambda)`, the unique solution of
    /// `p^-1 * p = identity`.
    pub fn inverse(&self) -> Point {
        Point {
            a: -self.a,
            lambda: 1.0 / self.lambda,
            t: -self.t / self.lambda,
        }
    }

    /// Euclidean norm of the coordinate triple; used to scale step sizes
    /// and tolerances.
    pub fn coord_norm(&self) -> f64 {
        (self.a * self.a + self.lambda * self.lambda + self.t * self.t).sqrt()
    }

    /// Density of the Haar measure against `da dlambda dt`.
    pub fn haar_density(&self) -> f64 {
        1.0 / (self.lambda * self.lambda)
    }

    /// Values of the horizontal frame and the vertical complement at this
    /// point.
    pub fn frame(&self) -> FrameValues {
        FrameValues {
            u: Tangent::new(1.0, 0.0, 2.0 * self.lambda),
            v: Tangent::new(0.0, 2.0 * self.lambda, 0.0),
            w: Tangent::new(-1.0, 0.0, 0.0),
        }
    }

    /// Chart transition to log-cylindrical coordinates.
    pub fn to_logcyl(&self) -> LogCylPoint {
        LogCylPoint {
            a: self.a,
            xi: 0.5 * (self.lambda * self.lambda + self.t * self.t).ln(),
            psi: (self.t / self.lambda).atan(),
        }
    }
}

/// Tangent vector in cartesian coordinates `(da, dlambda, dt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub da: f64,
    pub dlambda: f64,
    pub dt: f64,
}

impl Tangent {
    pub fn new(da: f64, dlambda: f64, dt: f64) -> Self {
        Tangent { da, dlambda, dt }
    }

    pub fn zero() -> Self {
        Tangent::new(0.0, 0.0, 0.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        Tangent::new(c * self.da, c * self.dlambda, c * self.dt)
    }

    pub fn add(&self, o: &Tangent) -> Self {
        Tangent::new(self.da + o.da, self.dlambda + o.dlambda, self.dt + o.dt)
    }

    pub fn coord_norm(&self) -> f64 {
        (self.da * self.da + self.dlambda * self.dlambda + self.dt * self.dt).sqrt()
    }
}

/// The frame `(U, V, W)` evaluated at a point.
#[derive(Debug, Clone, Copy)]
pub struct FrameValues {
    pub u: Tangent,
    pub v: Tangent,
    pub w: Tangent,
}

/// Contact form `theta_p(v) = dt / (2 lambda) - da`.
pub fn contact_form(p: &Point, v: &Tangent) -> f64 {
    v.dt / (2.0 * p.lambda) - v.da
}

/// Sub-Riemannian norm of a horizontal tangent.
///
/// Fails with [`Error::NonHorizontalTangent`] when `v` misses the contact
/// distribution by more than the scale-aware gate.
pub fn horizontal_norm(p: &Point, v: &Tangent) -> Result<f64> {
    let residual = contact_form(p, v).abs();
    let tol = HORIZONTAL_TOL * (1.0 + v.coord_norm());
    if residual > tol {
        return Err(Error::NonHorizontalTangent { residual, tol });
    }
    Ok(horizontal_norm_unchecked(p, v))
}

/// `sqrt(dlambda^2 + dt^2) / (2 lambda)` without the horizontality gate.
pub fn horizontal_norm_unchecked(p: &Point, v: &Tangent) -> f64 {
    (v.dlambda * v.dlambda + v.dt * v.dt).sqrt() / (2.0 * p.lambda)
}

/// Point of the log-cylindrical chart `(a, xi, psi)`,
/// `|psi| < pi/2`, corresponding to `(a, exp(xi + i psi))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogCylPoint {
    a: f64,
    xi: f64,
    psi: f64,
}

impl LogCylPoint {
    pub fn new(a: f64, xi: f64, psi: f64) -> Result<Self> {
        if !(psi.abs() < std::f64::consts::FRAC_PI_2) || !psi.is_finite() {
            return Err(Error::PsiOutOfRange(psi));
        }
        Ok(LogCylPoint { a, xi, psi })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// Chart transition back to cartesian coordinates.
    pub fn to_cartesian(&self) -> Point {
        let r = self.xi.exp();
        Point {
            a: self.a,
            lambda: r * self.psi.cos(),
            t: r * self.psi.sin(),
        }
    }

    /// Determinant of the chart map `(a, xi, psi) -> (a, lambda, t)`,
    /// equal to `exp(2 xi)`.
    pub fn jacobian_det(&self) -> f64 {
        (2.0 * self.xi).exp()
    }
}

/// Tangent vector in log-cylindrical coordinates `(da, dxi, dpsi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogCylTangent {
    pub da: f64,
    pub dxi: f64,
    pub dpsi: f64,
}

impl LogCylTangent {
    pub fn new(da: f64, dxi: f64, dpsi: f64) -> Self {
        LogCylTangent { da, dxi, dpsi }
    }

    /// Push forward along the chart map to cartesian components.
    pub fn to_cartesian(&self, at: &LogCylPoint) -> Tangent {
        let p = at.to_cartesian();
        Tangent {
            da: self.da,
            dlambda: p.lambda * self.dxi - p.t * self.dpsi,
            dt: p.t * self.dxi + p.lambda * self.dpsi,
        }
    }

    pub fn coord_norm(&self) -> f64 {
        (self.da * self.da + self.dxi * self.dxi + self.dpsi * self.dpsi).sqrt()
    }
}

/// Contact form in the log-cylindrical chart:
/// `dpsi / 2 + (tan psi / 2) dxi - da`.
pub fn contact_form_logcyl(p: &LogCylPoint, v: &LogCylTangent) -> f64 {
    0.5 * v.dpsi + 0.5 * p.psi.tan() * v.dxi - v.da
}

/// Horizontal norm in the log-cylindrical chart:
/// `sqrt(dxi^2 + dpsi^2) / (2 cos psi)`.
pub fn horizontal_norm_logcyl_unchecked(p: &LogCylPoint, v: &LogCylTangent) -> f64 {
    (v.dxi * v.dxi + v.dpsi * v.dpsi).sqrt() / (2.0 * p.psi.cos())
}

/// Haar density in the log-cylindrical chart against `da dxi dpsi`:
/// `1 / cos^2 psi`.
pub fn haar_density_logcyl(p: &LogCylPoint) -> f64 {
    let c = p.psi.cos();
    1.0 / (c * c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn product_follows_the_group_law() {
        let p = Point::new(1.0, 2.0, 3.0).unwrap();
        let q = Point::new(2.0, 1.0, 0.0).unwrap();
        let r = p.mul(&q);
        assert_eq!((r.a(), r.lambda(), r.t()), (3.0, 2.0, 3.0));
    }

    #[test]
    fn identity_and_inverse_behave() {
        let e = Point::identity();
        let p = Point::new(0.7, 0.4, -1.3).unwrap();
        assert_eq!(p.mul(&e), p);
        assert_eq!(e.mul(&p), p);
        let pi = p.inverse();
        let lhs = pi.mul(&p);
        assert!(close(lhs.a(), 0.0, 1e-15));
        assert!(close(lhs.lambda(), 1.0, 1e-15));
        assert!(close(lhs.t(), 0.0, 1e-15));
        let rhs = p.mul(&pi);
        assert!(close(rhs.a(), 0.0, 1e-15));
        assert!(close(rhs.lambda(), 1.0, 1e-15));
        assert!(close(rhs.t(), 0.0, 1e-15));
    }

    #[test]
    fn lambda_must_be_positive() {
        assert!(matches!(
            Point::new(0.0, 0.0, 0.0),
            Err(Error::LambdaNotPositive(_))
        ));
        assert!(matches!(
            Point::new(0.0, -2.0, 0.0),
            Err(Error::LambdaNotPositive(_))
        ));
    }

    #[test]
    fn frame_is_dual_to_the_contact_form() {
        let p = Point::new(0.3, 1.7, -0.2).unwrap();
        let f = p.frame();
        assert!(contact_form(&p, &f.u).abs() < 1e-15);
        assert!(contact_form(&p, &f.v).abs() < 1e-15);
        assert!((contact_form(&p, &f.w) - 1.0).abs() < 1e-15);
        // U and V are unit horizontal vectors.
        assert!((horizontal_norm(&p, &f.u).unwrap() - 1.0).abs() < 1e-15);
        assert!((horizontal_norm(&p, &f.v).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn horizontal_norm_rejects_vertical_vectors() {
        let p = Point::identity();
        let w = Tangent::new(-1.0, 0.0, 0.0);
        match horizontal_norm(&p, &w) {
            Err(Error::NonHorizontalTangent { residual, .. }) => {
                assert!((residual - 1.0).abs() < 1e-15)
            }
            other => panic!("expected NonHorizontalTangent, got {other:?}"),
        }
    }

    #[test]
    fn haar_density_is_inverse_square() {
        let p = Point::new(5.0, 0.5, 9.0).unwrap();
        assert_eq!(p.haar_density(), 4.0);
    }

    #[test]
    fn logcyl_chart_round_trips() {
        let q = LogCylPoint::new(0.3, -0.7, 0.9).unwrap();
        let p = q.to_cartesian();
        let q2 = p.to_logcyl();
        assert!(close(q.a(), q2.a(), 1e-14));
        assert!(close(q.xi(), q2.xi(), 1e-14));
        assert!(close(q.psi(), q2.psi(), 1e-14));
    }

    #[test]
    fn logcyl_jacobian_matches_finite_differences() {
        let q = LogCylPoint::new(0.2, 0.4, -0.6).unwrap();
        let h = 1e-6;
        // Columns of the chart differential by central differences.
        let col = |i: usize| {
            let mut lo = [q.a(), q.xi(), q.psi()];
            let mut hi = lo;
            lo[i] -= h;
            hi[i] += h;
            let plo = LogCylPoint::new(lo[0], lo[1], lo[2]).unwrap().to_cartesian();
            let phi = LogCylPoint::new(hi[0], hi[1], hi[2]).unwrap().to_cartesian();
            [
                (phi.a() - plo.a()) / (2.0 * h),
                (phi.lambda() - plo.lambda()) / (2.0 * h),
                (phi.t() - plo.t()) / (2.0 * h),
            ]
        };
        let (c0, c1, c2) = (col(0), col(1), col(2));
        let det = c0[0] * (c1[1] * c2[2] - c1[2] * c2[1])
            - c1[0] * (c0[1] * c2[2] - c0[2] * c2[1])
            + c2[0] * (c0[1] * c1[2] - c0[2] * c1[1]);
        let exact = q.jacobian_det();
        assert!(
            (det - exact).abs() <= 1e-6 * exact,
            "fd {det} vs exact {exact}"
        );
    }

    #[test]
    fn logcyl_contact_form_matches_cartesian() {
        let q = LogCylPoint::new(0.1, 0.5, 0.7).unwrap();
        let v = LogCylTangent::new(0.3, -0.4, 0.9);
        let p = q.to_cartesian();
        let vc = v.to_cartesian(&q);
        // theta is chart independent; the logcyl expression divides out
        // nothing, it is literally the pullback.
        assert!(close(
            contact_form_logcyl(&q, &v),
            contact_form(&p, &vc),
            1e-13
        ));
        assert!(close(
            horizontal_norm_logcyl_unchecked(&q, &v),
            horizontal_norm_unchecked(&p, &vc),
            1e-13
        ));
        assert!(close(
            haar_density_logcyl(&q) / q.jacobian_det(),
            p.haar_density(),
            1e-13
        ));
    }

    fn arb_point() -> impl Strategy<Value = Point> {
        (
            -5.0f64..5.0,
            0.05f64..20.0,
            -5.0f64..5.0,
        )
            .prop_map(|(a, l, t)| Point::new(a, l, t).unwrap())
    }

    proptest! {
        #[test]
        fn multiplication_is_associative(p in arb_point(), q in arb_point(), r in arb_point()) {
            let lhs = p.mul(&q).mul(&r);
            let rhs = p.mul(&q.mul(&r));
            prop_assert!(close(lhs.a(), rhs.a(), 1e-12));
            prop_assert!(close(lhs.lambda(), rhs.lambda(), 1e-12));
            prop_assert!(close(lhs.t(), rhs.t(), 1e-12));
        }

        #[test]
        fn inverse_cancels(p in arb_point()) {
            let e = p.inverse().mul(&p);
            prop_assert!(close(e.a(), 0.0, 1e-12));
            prop_assert!(close(e.lambda(), 1.0, 1e-12));
            prop_assert!(close(e.t(), 0.0, 1e-12));
        }

        #[test]
        fn chart_round_trip(p in arb_point()) {
            let back = p.to_logcyl().to_cartesian();
            prop_assert!(close(p.a(), back.a(), 1e-12));
            prop_assert!(close(p.lambda(), back.lambda(), 1e-12));
            prop_assert!(close(p.t(), back.t(), 1e-12));
        }

        #[test]
        fn left_translations_are_haar_isometries(p in arb_point(), q in arb_point()) {
            // d(L_p) scales (dlambda, dt) by lambda_p and fixes da, so the
            // pullback of the density matches: |det dL_p| = lambda_p^2.
            let moved = p.mul(&q);
            let det = p.lambda() * p.lambda();
            prop_assert!(close(moved.haar_density() * det, q.haar_density(), 1e-12));
        }
    }
}
