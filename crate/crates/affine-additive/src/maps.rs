//! Quasiconformal diagnostics for contact maps of the group.
//!
//! A map is written `f(p) = (f_1(p), f_2(p) + i f_3(p))` with `f_2 > 0`.
//! Everything below is driven by the horizontal complex derivatives
//!
//! ```text
//! Z f_I    = (V f_I - i U f_I) / 2,
//! Zbar f_I = (V f_I + i U f_I) / 2,      f_I = f_2 + i f_3,
//! ```
//!
//! of the half-plane part along the horizontal frame. From them:
//! Beltrami quotient `mu = Zbar f_I / Z f_I`, distortion
//! `K = (1 + |mu|) / (1 - |mu|)`, Jacobian
//! `J = (|Z f_I|^2 - |Zbar f_I|^2)^2 / (2 f_2)^4`, horizontal operator norm
//! `|D_H f| = (|Z f_I| + |Zbar f_I|) / (2 f_2)`, and the identity
//! `K^2 = |D_H f|^4 / J` ties them together.
//!
//! Contact maps satisfy the system `Z f_3 = 2 f_2 Z f_1`,
//! `Zbar f_3 = 2 f_2 Zbar f_1`, `W f_3 = 2 f_2 (sigma + W f_1)` with
//! `sigma = (|Z f_I|^2 - |Zbar f_I|^2) / (4 f_2^2)`; [`MapUnderTest::contact_residual`]
//! measures how far these are from holding.

use crate::curves::HorizontalCurve;
use crate::group::{Point, Tangent};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use std::sync::Arc;

/// Step scale for frame-direction finite differences.
const FD_STEP: f64 = 1e-5;
/// Beltrami moduli above this are treated as numerically non-quasiconformal.
const MU_QC_CAP: f64 = 1.0 - 1e-12;

type ForwardFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
type DerivFn = Arc<dyn Fn(&Point) -> (Complex64, Complex64) + Send + Sync>;

/// How a derivative record was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DerivMethod {
    Analytic,
    FiniteDifference,
}

/// Horizontal complex derivatives of the half-plane part at a point.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeRecord {
    pub z: Complex64,
    pub zbar: Complex64,
    pub method: DerivMethod,
}

/// Residuals of the three contact equations at a point. The first two are
/// complex equations, the third is real.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContactResidual {
    pub z_eq: f64,
    pub zbar_eq: f64,
    pub w_eq: f64,
}

impl ContactResidual {
    pub fn max(&self) -> f64 {
        self.z_eq.max(self.zbar_eq).max(self.w_eq)
    }
}

/// Pushforward speed of a curve under the map, together with the
/// distortion bounds that must bracket it.
#[derive(Debug, Clone, Copy)]
pub struct PushforwardSpeed {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
}

/// A smooth map of the group under numerical test.
///
/// Carries the forward evaluation and, optionally, a closed form for the
/// horizontal derivatives; without one, derivatives fall back to
/// finite differences along the frame directions.
#[derive(Clone)]
pub struct MapUnderTest {
    name: String,
    forward: ForwardFn,
    analytic: Option<DerivFn>,
}

impl MapUnderTest {
    pub fn new<F>(name: impl Into<String>, forward: F) -> Self
    where
        F: Fn(&Point) -> Point + Send + Sync + 'static,
    {
        MapUnderTest {
            name: name.into(),
            forward: Arc::new(forward),
            analytic: None,
        }
    }

    /// Attaches closed-form horizontal derivatives `p -> (Z f_I, Zbar f_I)`.
    pub fn with_analytic_derivatives<D>(mut self, deriv: D) -> Self
    where
        D: Fn(&Point) -> (Complex64, Complex64) + Send + Sync + 'static,
    {
        self.analytic = Some(Arc::new(deriv));
        self
    }

    /// The identity map with its exact derivatives `(2 lambda, 0)`.
    pub fn identity() -> Self {
        MapUnderTest::new("identity", |p: &Point| *p).with_analytic_derivatives(|p: &Point| {
            (Complex64::new(2.0 * p.lambda(), 0.0), Complex64::new(0.0, 0.0))
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn apply(&self, p: &Point) -> Point {
        (self.forward)(p)
    }

    /// Half-plane part of the image, `f_2 + i f_3`.
    pub fn f_i(&self, p: &Point) -> Complex64 {
        let q = self.apply(p);
        Complex64::new(q.lambda(), q.t())
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.analytic.is_some()
    }

    /// Horizontal derivatives, preferring the closed form when available.
    pub fn horizontal_derivatives(&self, p: &Point) -> DerivativeRecord {
        match &self.analytic {
            Some(d) => {
                let (z, zbar) = d(p);
                DerivativeRecord {
                    z,
                    zbar,
                    method: DerivMethod::Analytic,
                }
            }
            None => self.fd_derivatives(p),
        }
    }

    /// Finite-difference horizontal derivatives: 4th-order central stencils
    /// along straight lines in the frame directions `U(p)`, `V(p)`.
    pub fn fd_derivatives(&self, p: &Point) -> DerivativeRecord {
        let frame = p.frame();
        let u = self.directional_f_i(p, &frame.u);
        let v = self.directional_f_i(p, &frame.v);
        let i = Complex64::i();
        DerivativeRecord {
            z: 0.5 * (v - i * u),
            zbar: 0.5 * (v + i * u),
            method: DerivMethod::FiniteDifference,
        }
    }

    /// Derivative of `f_I` along the straight line through `p` with
    /// constant velocity `dir`; exact directional derivative at the center
    /// up to O(h^4).
    fn directional_f_i(&self, p: &Point, dir: &Tangent) -> Complex64 {
        let h = FD_STEP * (1.0 + p.coord_norm());
        let at = |j: f64| {
            let q = Point::new(
                p.a() + j * h * dir.da,
                p.lambda() + j * h * dir.dlambda,
                p.t() + j * h * dir.dt,
            )
            .expect("FD stencil left the group; point too close to lambda = 0");
            self.f_i(&q)
        };
        (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h)
    }

    /// Derivative of all image components along a straight frame line.
    fn directional_components(&self, p: &Point, dir: &Tangent) -> [f64; 3] {
        let h = FD_STEP * (1.0 + p.coord_norm());
        let at = |j: f64| {
            let q = Point::new(
                p.a() + j * h * dir.da,
                p.lambda() + j * h * dir.dlambda,
                p.t() + j * h * dir.dt,
            )
            .expect("FD stencil left the group; point too close to lambda = 0");
            let im = self.apply(&q);
            [im.a(), im.lambda(), im.t()]
        };
        let (m2, m1, p1, p2) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = (m2[k] - 8.0 * m1[k] + 8.0 * p1[k] - p2[k]) / (12.0 * h);
        }
        out
    }

    /// Beltrami quotient `mu = Zbar f_I / Z f_I`.
    ///
    /// Fails when the derivatives are degenerate or orientation-reversing
    /// (`|Z f_I| <= |Zbar f_I|`).
    pub fn beltrami(&self, p: &Point) -> Result<Complex64> {
        let rec = self.horizontal_derivatives(p);
        let (z_abs, zbar_abs) = (rec.z.norm(), rec.zbar.norm());
        if !(z_abs > zbar_abs) || z_abs == 0.0 {
            return Err(Error::DegenerateDerivative { z_abs, zbar_abs });
        }
        Ok(rec.zbar / rec.z)
    }

    /// Pointwise distortion `K = (1 + |mu|) / (1 - |mu|)`.
    pub fn distortion(&self, p: &Point) -> Result<f64> {
        let mu = self.beltrami(p)?.norm();
        if mu > MU_QC_CAP {
            return Err(Error::NotQuasiconformalAtPoint(mu));
        }
        Ok((1.0 + mu) / (1.0 - mu))
    }

    pub fn distortion_sq(&self, p: &Point) -> Result<f64> {
        self.distortion(p).map(|k| k * k)
    }

    /// Jacobian of the map against the Haar measure,
    /// `(|Z f_I|^2 - |Zbar f_I|^2)^2 / (2 f_2)^4`.
    pub fn jacobian_mu(&self, p: &Point) -> f64 {
        let rec = self.horizontal_derivatives(p);
        let diff = rec.z.norm_sqr() - rec.zbar.norm_sqr();
        let f2 = self.apply(p).lambda();
        (diff * diff) / (2.0 * f2).powi(4)
    }

    /// Horizontal operator norm `(|Z f_I| + |Zbar f_I|) / (2 f_2)`.
    pub fn dh_norm(&self, p: &Point) -> f64 {
        let rec = self.horizontal_derivatives(p);
        (rec.z.norm() + rec.zbar.norm()) / (2.0 * self.apply(p).lambda())
    }

    /// The analytic quasiconformality quotient `|D_H f|^4 / J`, equal to
    /// `K^2` wherever the map is quasiconformal.
    pub fn analytic_qc_ratio(&self, p: &Point) -> f64 {
        self.dh_norm(p).powi(4) / self.jacobian_mu(p)
    }

    /// Contact scaling factor `sigma = (|Z f_I|^2 - |Zbar f_I|^2) / (4 f_2^2)`,
    /// the multiplier in `f^* theta = sigma theta` for contact maps.
    pub fn sigma(&self, p: &Point) -> f64 {
        let rec = self.horizontal_derivatives(p);
        let f2 = self.apply(p).lambda();
        (rec.z.norm_sqr() - rec.zbar.norm_sqr()) / (4.0 * f2 * f2)
    }

    /// Residuals of the contact system at `p`, from finite differences of
    /// the image components along the frame. `sigma` enters through its
    /// derivative-based closed form, so the third equation is a genuine
    /// consistency check rather than a tautology.
    pub fn contact_residual(&self, p: &Point) -> ContactResidual {
        let frame = p.frame();
        let du = self.directional_components(p, &frame.u);
        let dv = self.directional_components(p, &frame.v);
        let dw = self.directional_components(p, &frame.w);
        let i = Complex64::i();
        let z = |k: usize| 0.5 * (Complex64::new(dv[k], 0.0) - i * du[k]);
        let zbar = |k: usize| 0.5 * (Complex64::new(dv[k], 0.0) + i * du[k]);
        let f2 = self.apply(p).lambda();
        let z_fi = z(1) + i * z(2);
        let zbar_fi = zbar(1) + i * zbar(2);
        let sigma = (z_fi.norm_sqr() - zbar_fi.norm_sqr()) / (4.0 * f2 * f2);
        ContactResidual {
            z_eq: (z(2) - 2.0 * f2 * z(0)).norm(),
            zbar_eq: (zbar(2) - 2.0 * f2 * zbar(0)).norm(),
            w_eq: (dw[2] - 2.0 * f2 * (sigma + dw[0])).abs(),
        }
    }

    /// Minimal-stretching indicator `mu(gamma(s)) conj(g') / g'` where
    /// `g' = dlambda/ds + i dt/ds` along the curve. Fibers of an extremal
    /// family make this real and negative.
    pub fn msp_indicator(&self, curve: &HorizontalCurve, s: f64) -> Result<Complex64> {
        let v = curve.velocity(s);
        let g = Complex64::new(v.dlambda, v.dt);
        if g.norm() == 0.0 {
            return Err(Error::ZeroVelocity { s });
        }
        let mu = self.beltrami(&curve.point(s))?;
        Ok(mu * g.conj() / g)
    }

    /// Speed of the image curve at `s` by the chain rule, with the
    /// distortion bounds `(|Z| -+ |Zbar|) / (2 f_2) |gamma'|_H` that must
    /// bracket it.
    pub fn pushforward_speed(&self, curve: &HorizontalCurve, s: f64) -> Result<PushforwardSpeed> {
        let p = curve.point(s);
        let v = curve.velocity(s);
        let g = Complex64::new(v.dlambda, v.dt);
        if g.norm() == 0.0 {
            return Err(Error::ZeroVelocity { s });
        }
        let rec = self.horizontal_derivatives(&p);
        let f2 = self.apply(&p).lambda();
        let image_fi_dot = (rec.z * g + rec.zbar * g.conj()) / (2.0 * p.lambda());
        let speed = curve.speed(s);
        Ok(PushforwardSpeed {
            value: image_fi_dot.norm() / (2.0 * f2),
            lower: (rec.z.norm() - rec.zbar.norm()) / (2.0 * f2) * speed,
            upper: (rec.z.norm() + rec.zbar.norm()) / (2.0 * f2) * speed,
        })
    }

    /// Image of a curve as a cartesian-chart curve with finite-difference
    /// velocity; useful as an independent check of the chain rule.
    pub fn image_curve(&self, curve: &HorizontalCurve) -> HorizontalCurve {
        let forward = self.forward.clone();
        let base = curve.clone();
        HorizontalCurve::new_cartesian(curve.s_range(), move |s| {
            let q = forward(&base.point(s));
            [q.a(), q.lambda(), q.t()]
        })
    }

    /// Serializable per-point diagnostic record.
    pub fn diagnostics(&self, p: &Point) -> Result<PointDiagnostics> {
        let mu = self.beltrami(p)?;
        let k = self.distortion(p)?;
        let res = self.contact_residual(p);
        Ok(PointDiagnostics {
            a: p.a(),
            lambda: p.lambda(),
            t: p.t(),
            mu_re: mu.re,
            mu_im: mu.im,
            mu_abs: mu.norm(),
            distortion: k,
            jacobian: self.jacobian_mu(p),
            dh_norm: self.dh_norm(p),
            qc_ratio: self.analytic_qc_ratio(p),
            sigma: self.sigma(p),
            contact_residual: res.max(),
        })
    }
}

/// Per-point diagnostic row of the `distortion` report.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PointDiagnostics {
    pub a: f64,
    pub lambda: f64,
    pub t: f64,
    pub mu_re: f64,
    pub mu_im: f64,
    pub mu_abs: f64,
    pub distortion: f64,
    pub jacobian: f64,
    pub dh_norm: f64,
    pub qc_ratio: f64,
    pub sigma: f64,
    pub contact_residual: f64,
}
