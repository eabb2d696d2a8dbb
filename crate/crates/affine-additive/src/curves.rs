//! Horizontal curves, their lengths and line integrals, and measured
//! foliations.
//!
//! A curve is horizontal when its velocity lies in the contact distribution;
//! only then does the sub-Riemannian speed, and everything built on it, make
//! sense. Curves can live in either chart: the cartesian one
//! `s -> (a, lambda, t)` or the log-cylindrical one `s -> (a, xi, psi)`.
//! Both carry the same geometry, so lengths agree; the chart only decides
//! which closed-form expressions are convenient.
//!
//! A [`Foliation`] is a two-parameter family of horizontal curves
//! `gamma(s, d)` together with a measure density `nu` on the parameter
//! rectangle such that the Haar volume splits as
//! `d mu = |gamma'|_H^4 ds dnu(d)`. That split is exactly what the modulus
//! engine needs, and [`Foliation::volume_residual`] checks it numerically.

use crate::group::{
    contact_form_logcyl, horizontal_norm_logcyl_unchecked,
    horizontal_norm_unchecked, contact_form, LogCylPoint, LogCylTangent, Point, Tangent,
    HORIZONTAL_TOL,
};
use crate::report::csv_f64;
use crate::{quad, Error, Result};
use std::cell::Cell;
use std::sync::Arc;

/// Which coordinates a curve or foliation is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Cartesian,
    LogCyl,
}

type PosFn = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

/// Parametrized curve in one of the two charts.
///
/// The position closure must be defined on a small neighborhood of the
/// parameter interval (finite-difference velocities step slightly outside)
/// and must stay in the chart domain: `lambda > 0`, respectively
/// `|psi| < pi/2`.
#[derive(Clone)]
pub struct HorizontalCurve {
    chart: Chart,
    s_range: (f64, f64),
    pos: PosFn,
    vel: Option<PosFn>,
}

/// Relative step for fallback finite-difference velocities.
const FD_VELOCITY_STEP: f64 = 1e-5;
/// Default number of horizontality samples for validation.
pub const VALIDATION_SAMPLES: usize = 100;

impl HorizontalCurve {
    pub fn new_cartesian<P>(s_range: (f64, f64), pos: P) -> Self
    where
        P: Fn(f64) -> [f64; 3] + Send + Sync + 'static,
    {
        HorizontalCurve {
            chart: Chart::Cartesian,
            s_range,
            pos: Arc::new(pos),
            vel: None,
        }
    }

    pub fn new_logcyl<P>(s_range: (f64, f64), pos: P) -> Self
    where
        P: Fn(f64) -> [f64; 3] + Send + Sync + 'static,
    {
        HorizontalCurve {
            chart: Chart::LogCyl,
            s_range,
            pos: Arc::new(pos),
            vel: None,
        }
    }

    /// Attaches an analytic velocity `s -> d/ds` of the position triple.
    pub fn with_velocity<V>(mut self, vel: V) -> Self
    where
        V: Fn(f64) -> [f64; 3] + Send + Sync + 'static,
    {
        self.vel = Some(Arc::new(vel));
        self
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn s_range(&self) -> (f64, f64) {
        self.s_range
    }

    /// Position in the curve's own chart.
    pub fn raw(&self, s: f64) -> [f64; 3] {
        (self.pos)(s)
    }

    /// Position as a group element.
    pub fn point(&self, s: f64) -> Point {
        let [x0, x1, x2] = self.raw(s);
        match self.chart {
            Chart::Cartesian => {
                Point::new(x0, x1, x2).expect("curve position must stay in the group")
            }
            Chart::LogCyl => LogCylPoint::new(x0, x1, x2)
                .expect("curve position must stay in the chart domain")
                .to_cartesian(),
        }
    }

    /// Velocity of the position triple, analytic when supplied, otherwise a
    /// 5-point central difference with step `1e-5 (d - c)`.
    pub fn velocity_raw(&self, s: f64) -> [f64; 3] {
        if let Some(vel) = &self.vel {
            return vel(s);
        }
        let h = FD_VELOCITY_STEP * (self.s_range.1 - self.s_range.0);
        let m2 = self.raw(s - 2.0 * h);
        let m1 = self.raw(s - h);
        let p1 = self.raw(s + h);
        let p2 = self.raw(s + 2.0 * h);
        let mut v = [0.0; 3];
        for i in 0..3 {
            v[i] = (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h);
        }
        v
    }

    /// Velocity as a cartesian tangent vector.
    pub fn velocity(&self, s: f64) -> Tangent {
        let v = self.velocity_raw(s);
        match self.chart {
            Chart::Cartesian => Tangent::new(v[0], v[1], v[2]),
            Chart::LogCyl => {
                let [a, xi, psi] = self.raw(s);
                let at = LogCylPoint::new(a, xi, psi).expect("chart domain");
                LogCylTangent::new(v[0], v[1], v[2]).to_cartesian(&at)
            }
        }
    }

    /// Value of the contact form on the velocity, in the curve's chart.
    /// Zero characterizes horizontality.
    pub fn horizontality_residual(&self, s: f64) -> f64 {
        let [x0, x1, x2] = self.raw(s);
        let v = self.velocity_raw(s);
        match self.chart {
            Chart::Cartesian => {
                let p = Point::new(x0, x1, x2).expect("group point");
                contact_form(&p, &Tangent::new(v[0], v[1], v[2]))
            }
            Chart::LogCyl => {
                let p = LogCylPoint::new(x0, x1, x2).expect("chart domain");
                contact_form_logcyl(&p, &LogCylTangent::new(v[0], v[1], v[2]))
            }
        }
    }

    /// Sub-Riemannian speed `|gamma'(s)|_H`, assuming horizontality.
    pub fn speed(&self, s: f64) -> f64 {
        let [x0, x1, x2] = self.raw(s);
        let v = self.velocity_raw(s);
        match self.chart {
            Chart::Cartesian => {
                let p = Point::new(x0, x1, x2).expect("group point");
                horizontal_norm_unchecked(&p, &Tangent::new(v[0], v[1], v[2]))
            }
            Chart::LogCyl => {
                let p = LogCylPoint::new(x0, x1, x2).expect("chart domain");
                horizontal_norm_logcyl_unchecked(&p, &LogCylTangent::new(v[0], v[1], v[2]))
            }
        }
    }

    /// Ratio of the horizontality residual to the scale-aware gate at `s`;
    /// values above 1 fail.
    fn gate_ratio(&self, s: f64) -> f64 {
        let v = self.velocity_raw(s);
        let vnorm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        self.horizontality_residual(s).abs() / (HORIZONTAL_TOL * (1.0 + vnorm))
    }

    /// Checks horizontality at `n` uniform parameters.
    pub fn validate_horizontal(&self, n: usize) -> Result<()> {
        let (c, d) = self.s_range;
        for i in 0..n {
            let s = c + (d - c) * (i as f64 + 0.5) / n as f64;
            if self.gate_ratio(s) > 1.0 {
                return Err(Error::NonHorizontalCurve {
                    s,
                    residual: self.horizontality_residual(s).abs(),
                });
            }
        }
        Ok(())
    }

    /// Sub-Riemannian length; fails on curves that are not horizontal.
    pub fn horizontal_length(&self) -> Result<f64> {
        self.integrate_with(|_p, _s| 1.0)
    }

    /// Line integral of a density along the curve,
    /// `int rho(gamma(s)) |gamma'(s)|_H ds`.
    pub fn line_integral(&self, rho: &Density) -> Result<f64> {
        self.integrate_with(|p, _s| rho.value(p))
    }

    fn integrate_with<F: Fn(&Point, f64) -> f64>(&self, weight: F) -> Result<f64> {
        let (c, d) = self.s_range;
        let worst = Cell::new((0.0f64, c));
        let result = quad::integrate(c, d, |s| {
            let ratio = self.gate_ratio(s);
            if ratio > worst.get().0 {
                worst.set((ratio, s));
            }
            weight(&self.point(s), s) * self.speed(s)
        });
        let (ratio, at) = worst.get();
        if ratio > 1.0 {
            return Err(Error::NonHorizontalCurve {
                s: at,
                residual: self.horizontality_residual(at).abs(),
            });
        }
        Ok(result.value)
    }

    /// The same path restricted to `[c, d]` inside the original interval.
    pub fn restrict(&self, c: f64, d: f64) -> HorizontalCurve {
        HorizontalCurve {
            chart: self.chart,
            s_range: (c, d),
            pos: self.pos.clone(),
            vel: self.vel.clone(),
        }
    }

    /// Curve traversed through an increasing reparametrization
    /// `s = u(tau)` with derivative `du`, over the `tau` interval given.
    pub fn reparametrize<U, D>(&self, range: (f64, f64), u: U, du: D) -> HorizontalCurve
    where
        U: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let pos = self.pos.clone();
        let vel = self.vel.clone();
        let u = Arc::new(u);
        let u2 = u.clone();
        HorizontalCurve {
            chart: self.chart,
            s_range: range,
            pos: Arc::new(move |tau| pos(u(tau))),
            vel: vel.map(|v| {
                Arc::new(move |tau: f64| {
                    let raw = v(u2(tau));
                    let d = du(tau);
                    [raw[0] * d, raw[1] * d, raw[2] * d]
                }) as PosFn
            }),
        }
    }

    /// CSV sample of the curve: header `s,a,lambda,t` and `n + 1` rows.
    pub fn to_csv(&self, n: usize) -> String {
        let (c, d) = self.s_range;
        let mut out = String::from("s,a,lambda,t\n");
        for i in 0..=n {
            let s = c + (d - c) * i as f64 / n as f64;
            let p = self.point(s);
            out.push_str(&format!(
                "{},{},{},{}\n",
                csv_f64(s),
                csv_f64(p.a()),
                csv_f64(p.lambda()),
                csv_f64(p.t())
            ));
        }
        out
    }
}

/// Borel density on the group, used as a modulus test density. Evaluators
/// must be nonnegative and should return exactly zero outside their support.
#[derive(Clone)]
pub struct Density {
    eval: Arc<dyn Fn(&Point) -> f64 + Send + Sync>,
}

impl Density {
    pub fn new<F>(eval: F) -> Self
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        Density {
            eval: Arc::new(eval),
        }
    }

    pub fn value(&self, p: &Point) -> f64 {
        (self.eval)(p)
    }

    /// Pointwise multiple `c * rho`.
    pub fn scaled(&self, c: f64) -> Density {
        let inner = self.eval.clone();
        Density::new(move |p| c * inner(p))
    }

    /// Pointwise sum `rho + other`.
    pub fn plus(&self, other: &Density) -> Density {
        let a = self.eval.clone();
        let b = other.eval.clone();
        Density::new(move |p| a(p) + b(p))
    }
}

type FolPosFn = Arc<dyn Fn(f64, f64, f64) -> [f64; 3] + Send + Sync>;
type FolScalarFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
type NuFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type InvertFn = Arc<dyn Fn(&Point) -> Option<[f64; 3]> + Send + Sync>;

/// Two-parameter family of horizontal curves `gamma(s, d1, d2)` with a
/// measure density `nu(d1, d2)` splitting the Haar volume as
/// `d mu = |gamma'|_H^4 ds dnu`.
///
/// All closures are analytic descriptions: position and velocity in the
/// declared chart, sub-Riemannian speed, and the inverse
/// `point -> (s, d1, d2)` returning `None` off the carried domain.
#[derive(Clone)]
pub struct Foliation {
    chart: Chart,
    s_range: (f64, f64),
    delta_range: [(f64, f64); 2],
    pos: FolPosFn,
    vel: FolPosFn,
    speed: FolScalarFn,
    nu: NuFn,
    invert: InvertFn,
}

impl Foliation {
    #[allow(clippy::too_many_arguments)]
    pub fn new<P, V, S, N, I>(
        chart: Chart,
        s_range: (f64, f64),
        delta_range: [(f64, f64); 2],
        pos: P,
        vel: V,
        speed: S,
        nu: N,
        invert: I,
    ) -> Self
    where
        P: Fn(f64, f64, f64) -> [f64; 3] + Send + Sync + 'static,
        V: Fn(f64, f64, f64) -> [f64; 3] + Send + Sync + 'static,
        S: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        N: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        I: Fn(&Point) -> Option<[f64; 3]> + Send + Sync + 'static,
    {
        Foliation {
            chart,
            s_range,
            delta_range,
            pos: Arc::new(pos),
            vel: Arc::new(vel),
            speed: Arc::new(speed),
            nu: Arc::new(nu),
            invert: Arc::new(invert),
        }
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn s_range(&self) -> (f64, f64) {
        self.s_range
    }

    pub fn s_len(&self) -> f64 {
        self.s_range.1 - self.s_range.0
    }

    pub fn delta_range(&self) -> [(f64, f64); 2] {
        self.delta_range
    }

    pub fn nu_density(&self, d1: f64, d2: f64) -> f64 {
        (self.nu)(d1, d2)
    }

    pub fn speed_at(&self, s: f64, d1: f64, d2: f64) -> f64 {
        (self.speed)(s, d1, d2)
    }

    pub fn raw_at(&self, s: f64, d1: f64, d2: f64) -> [f64; 3] {
        (self.pos)(s, d1, d2)
    }

    /// Foliation coordinates of a point, when it lies in the carried domain.
    pub fn locate(&self, p: &Point) -> Option<[f64; 3]> {
        (self.invert)(p)
    }

    /// Position as a group element.
    pub fn point_at(&self, s: f64, d1: f64, d2: f64) -> Point {
        let [x0, x1, x2] = (self.pos)(s, d1, d2);
        match self.chart {
            Chart::Cartesian => Point::new(x0, x1, x2).expect("foliation stays in the group"),
            Chart::LogCyl => LogCylPoint::new(x0, x1, x2)
                .expect("foliation stays in the chart domain")
                .to_cartesian(),
        }
    }

    /// The fiber through parameter `(d1, d2)` as a standalone curve.
    pub fn fiber(&self, d1: f64, d2: f64) -> HorizontalCurve {
        let pos = self.pos.clone();
        let vel = self.vel.clone();
        HorizontalCurve {
            chart: self.chart,
            s_range: self.s_range,
            pos: Arc::new(move |s| pos(s, d1, d2)),
            vel: Some(Arc::new(move |s| vel(s, d1, d2))),
        }
    }

    /// The extremal density of the family: `1 / ((d - c) |gamma'|_H)` on the
    /// carried domain, zero elsewhere.
    pub fn extremal_density(&self) -> Density {
        let invert = self.invert.clone();
        let speed = self.speed.clone();
        let len = self.s_len();
        Density::new(move |p| match invert(p) {
            Some([s, d1, d2]) => 1.0 / (len * speed(s, d1, d2)),
            None => 0.0,
        })
    }

    /// Mass `int nu(d1, d2) d d1 d d2` of the transverse measure.
    pub fn nu_mass(&self) -> quad::QuadResult {
        quad::integrate2d(self.delta_range[0], self.delta_range[1], |d1, d2| {
            (self.nu)(d1, d2)
        })
    }

    /// Largest relative mismatch of
    /// `haar(gamma) |det D gamma| = |gamma'|_H^4 nu`
    /// over an `n x n x n` interior lattice; the determinant is taken by
    /// central differences of the cartesian position.
    pub fn volume_residual(&self, n: usize) -> f64 {
        let (c, d) = self.s_range;
        let [r1, r2] = self.delta_range;
        let hs = 1e-5 * (d - c);
        let h1 = 1e-5 * (r1.1 - r1.0);
        let h2 = 1e-5 * (r2.1 - r2.0);
        let cart = |s: f64, d1: f64, d2: f64| {
            let p = self.point_at(s, d1, d2);
            [p.a(), p.lambda(), p.t()]
        };
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let s = c + (d - c) * (i as f64 + 0.5) / n as f64;
            for j in 0..n {
                let d1 = r1.0 + (r1.1 - r1.0) * (j as f64 + 0.5) / n as f64;
                for k in 0..n {
                    let d2 = r2.0 + (r2.1 - r2.0) * (k as f64 + 0.5) / n as f64;
                    let cs = central3(|x| cart(x, d1, d2), s, hs);
                    let c1 = central3(|x| cart(s, x, d2), d1, h1);
                    let c2 = central3(|x| cart(s, d1, x), d2, h2);
                    let det = cs[0] * (c1[1] * c2[2] - c1[2] * c2[1])
                        - c1[0] * (cs[1] * c2[2] - cs[2] * c2[1])
                        + c2[0] * (cs[1] * c1[2] - cs[2] * c1[1]);
                    let lhs = self.point_at(s, d1, d2).haar_density() * det.abs();
                    let speed = (self.speed)(s, d1, d2);
                    let rhs = speed.powi(4) * (self.nu)(d1, d2);
                    let rel = (lhs - rhs).abs() / rhs.abs().max(1e-300);
                    worst = worst.max(rel);
                }
            }
        }
        worst
    }
}

fn central3<F: Fn(f64) -> [f64; 3]>(f: F, x: f64, h: f64) -> [f64; 3] {
    let lo = f(x - h);
    let hi = f(x + h);
    [
        (hi[0] - lo[0]) / (2.0 * h),
        (hi[1] - lo[1]) / (2.0 * h),
        (hi[2] - lo[2]) / (2.0 * h),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lambda_ray() -> HorizontalCurve {
        HorizontalCurve::new_cartesian((0.0, 1.0), |s| [0.0, s.exp(), 0.0])
    }

    #[test]
    fn vertical_motion_is_not_horizontal() {
        // Straight t-motion at unit lambda: theta(velocity) = 1/2.
        let curve = HorizontalCurve::new_cartesian((0.0, 1.0), |s| [0.0, 1.0, s]);
        let r = curve.horizontality_residual(0.5);
        assert!((r - 0.5).abs() < 1e-9, "residual {r}");
        assert!(matches!(
            curve.horizontal_length(),
            Err(Error::NonHorizontalCurve { .. })
        ));
    }

    #[test]
    fn lambda_ray_is_horizontal_with_constant_speed() {
        let curve = lambda_ray();
        curve.validate_horizontal(VALIDATION_SAMPLES).unwrap();
        for s in [0.1, 0.5, 0.9] {
            assert!((curve.speed(s) - 0.5).abs() < 1e-9);
        }
        let len = curve.horizontal_length().unwrap();
        assert!((len - 0.5).abs() < 1e-10, "length {len}");
    }

    #[test]
    fn shear_fiber_matches_its_closed_form() {
        // Fiber of the sheared-box family: t advances, a compensates.
        let (abar, lbar) = (0.3, 0.8);
        let curve = HorizontalCurve::new_cartesian((0.0, 1.0), move |s| {
            [abar + s / (2.0 * lbar), lbar, s]
        })
        .with_velocity(move |_s| [1.0 / (2.0 * lbar), 0.0, 1.0]);
        curve.validate_horizontal(VALIDATION_SAMPLES).unwrap();
        let len = curve.horizontal_length().unwrap();
        assert!((len - 1.0 / (2.0 * lbar)).abs() < 1e-12);
    }

    #[test]
    fn logcyl_ray_has_shell_speed() {
        let psi = 0.6f64;
        let curve =
            HorizontalCurve::new_logcyl((0.0, 2.0), move |s| [0.5 * psi.tan() * s, s, psi])
                .with_velocity(move |_s| [0.5 * psi.tan(), 1.0, 0.0]);
        curve.validate_horizontal(VALIDATION_SAMPLES).unwrap();
        let len = curve.horizontal_length().unwrap();
        assert!((len - 1.0 / psi.cos()).abs() < 1e-10);
    }

    #[test]
    fn fd_velocity_matches_analytic_velocity() {
        let pos = |s: f64| [s.sin(), 1.0 + 0.5 * (2.0 * s).sin(), s.cos()];
        let with = HorizontalCurve::new_cartesian((0.0, 1.0), pos)
            .with_velocity(|s| [s.cos(), (2.0 * s).cos(), -s.sin()]);
        let without = HorizontalCurve::new_cartesian((0.0, 1.0), pos);
        for i in 0..20 {
            let s = 0.025 + 0.05 * i as f64;
            let a = with.velocity_raw(s);
            let b = without.velocity_raw(s);
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-9, "s={s} comp {k}: {} {}", a[k], b[k]);
            }
        }
    }

    #[test]
    fn length_is_additive_and_reparametrization_invariant() {
        let curve = lambda_ray();
        let total = curve.horizontal_length().unwrap();
        let left = curve.restrict(0.0, 0.4).horizontal_length().unwrap();
        let right = curve.restrict(0.4, 1.0).horizontal_length().unwrap();
        assert!((left + right - total).abs() < 1e-11);

        let e = std::f64::consts::E;
        let repar = curve.reparametrize((0.0, 1.0), move |tau| (tau * (e - 1.0) + 1.0).ln(), {
            move |tau| (e - 1.0) / (tau * (e - 1.0) + 1.0)
        });
        repar.validate_horizontal(VALIDATION_SAMPLES).unwrap();
        let len2 = repar.horizontal_length().unwrap();
        assert!((len2 - total).abs() < 1e-9, "{len2} vs {total}");
    }

    #[test]
    fn csv_export_has_expected_shape() {
        let curve = lambda_ray();
        let csv = curve.to_csv(4);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("s,a,lambda,t"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 5);
        let last: Vec<f64> = rows[4].split(',').map(|c| c.parse().unwrap()).collect();
        assert!((last[0] - 1.0).abs() < 1e-15);
        assert!((last[2] - std::f64::consts::E).abs() < 1e-12);
    }

    fn shear_foliation() -> Foliation {
        // Fibers (a + s/(2 l), l, s) over (a, l) in (0,1) x (1/2, 1) with
        // transverse density 16 l^2.
        Foliation::new(
            Chart::Cartesian,
            (0.0, 1.0),
            [(0.0, 1.0), (0.5, 1.0)],
            |s, a, l| [a + s / (2.0 * l), l, s],
            |_s, _a, l| [1.0 / (2.0 * l), 0.0, 1.0],
            |_s, _a, l| 1.0 / (2.0 * l),
            |_a, l| 16.0 * l * l,
            |p| {
                let (a, l, t) = (p.a() - p.t() / (2.0 * p.lambda()), p.lambda(), p.t());
                if (0.0..1.0).contains(&a) && (0.5..1.0).contains(&l) && (0.0..1.0).contains(&t) {
                    Some([t, a, l])
                } else {
                    None
                }
            },
        )
    }

    #[test]
    fn shear_foliation_satisfies_the_volume_split() {
        let fol = shear_foliation();
        let residual = fol.volume_residual(6);
        assert!(residual < 1e-6, "residual {residual}");
    }

    #[test]
    fn extremal_density_integrates_to_one_on_fibers() {
        let fol = shear_foliation();
        let rho = fol.extremal_density();
        for (a, l) in [(0.2, 0.6), (0.5, 0.75), (0.9, 0.99)] {
            let fiber = fol.fiber(a, l);
            let integral = fiber.line_integral(&rho).unwrap();
            assert!((integral - 1.0).abs() < 1e-10, "integral {integral}");
        }
    }

    #[test]
    fn nu_mass_matches_the_hand_integral() {
        let fol = shear_foliation();
        let mass = fol.nu_mass();
        assert!(mass.converged);
        // int_0^1 int_{1/2}^1 16 l^2 dl da = 14/3.
        assert!((mass.value - 14.0 / 3.0).abs() < 1e-10);
    }
}
