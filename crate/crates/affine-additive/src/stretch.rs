//! The stretch-map catalog and the curve-family scenarios they are
//! extremal for.
//!
//! Three scenarios are built in, each consisting of a domain, a foliation
//! by horizontal curves joining two boundary faces, the transverse measure
//! that splits the Haar volume, and the stretch map under test:
//!
//! * `linear_lt1`, `0 < k <= 1`: the linear stretch
//!   `(a, l + i t) -> (k a, l + i k t)` on a sheared unit box, foliated by
//!   straight `t`-motions compensated in `a`;
//! * `linear_gt1`, `k >= 1`: the same map on the straight box, foliated by
//!   cubic `lambda`-motions;
//! * `radial`, `0 < k <= 1`: the radial stretch, which in the
//!   log-cylindrical chart reads `(a, xi, psi) -> (a - psi/2 + Psi/2, k xi, Psi)`
//!   with `Psi = atan(tan(psi) / k)`, on a shell `1 < |l + i t| < r0`
//!   truncated to `0 < psi < psi0`, foliated by radial rays.
//!
//! `k = 1` always degenerates to the identity, and the formal `k = -1`
//! member is the inversion [`f_minus_one`], the only conformal map in the
//! family besides the identity.

use crate::curves::{Chart, Foliation, HorizontalCurve};
use crate::group::{LogCylPoint, Point};
use crate::maps::MapUnderTest;
use crate::quad::GaussLegendre;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, FRAC_PI_4, FRAC_PI_2};

/// Largest admissible aperture for the radial scenario; keeping away from
/// `pi/2` bounds `tan(psi)` and keeps every integrand smooth on the closure.
pub const PSI0_CAP: f64 = FRAC_PI_2 - 1e-3;

/// Linear stretch `(a, l + i t) -> (k a, l + i k t)`, with its exact
/// horizontal derivatives `Z f_I = l (1 + k)`, `Zbar f_I = l (1 - k)`.
pub fn linear_stretch(k: f64) -> Result<MapUnderTest> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidParameters(format!(
            "linear stretch needs k > 0, got {k}"
        )));
    }
    Ok(MapUnderTest::new(format!("linear_stretch(k={k})"), move |p: &Point| {
        Point::new(k * p.a(), p.lambda(), k * p.t()).expect("lambda unchanged")
    })
    .with_analytic_derivatives(move |p: &Point| {
        (
            Complex64::new(p.lambda() * (1.0 + k), 0.0),
            Complex64::new(p.lambda() * (1.0 - k), 0.0),
        )
    }))
}

/// Planar part of the radial stretch in log-polar coordinates of the half
/// plane: `(xi, psi) -> (k xi, atan(tan(psi) / k))`.
pub fn g_k_planar(k: f64, xi: f64, psi: f64) -> (f64, f64) {
    (k * xi, (psi.tan() / k).atan())
}

/// Contact lift of [`g_k_planar`] in the log-cylindrical chart.
pub fn radial_stretch_logcyl(k: f64, q: &LogCylPoint) -> LogCylPoint {
    let (xi, psi) = g_k_planar(k, q.xi(), q.psi());
    LogCylPoint::new(q.a() - 0.5 * q.psi() + 0.5 * psi, xi, psi)
        .expect("atan keeps psi in range")
}

/// Radial stretch in cartesian coordinates, with exact horizontal
/// derivatives.
///
/// The closed form is
/// `(a, l + i t) -> (a - atan(t/l)/2 + atan(t/(l k))/2, ((l^2 + t^2)^k / (l^2 k^2 + t^2))^{1/2} (l k + i t))`,
/// the unique contact lift of the planar stretch fixing the pure
/// `lambda`-axis pointwise in `a`.
pub fn radial_stretch(k: f64) -> Result<MapUnderTest> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidParameters(format!(
            "radial stretch needs k > 0, got {k}"
        )));
    }
    let forward = move |p: &Point| {
        let q = radial_stretch_logcyl(k, &p.to_logcyl());
        q.to_cartesian()
    };
    let deriv = move |p: &Point| {
        let q = p.to_logcyl();
        let (xi, psi) = (q.xi(), q.psi());
        let tan = psi.tan();
        let den = k * k + tan * tan;
        let psi_image = (tan / k).atan();
        let radial = (k * xi).exp() * psi.cos() * k;
        let z = radial * (k * k + 2.0 * tan * tan + 1.0) / den
            * Complex64::from_polar(1.0, psi_image - psi);
        let zbar = radial * (k * k - 1.0) / den * Complex64::from_polar(1.0, psi_image + psi);
        (z, zbar)
    };
    Ok(MapUnderTest::new(format!("radial_stretch(k={k})"), forward)
        .with_analytic_derivatives(deriv))
}

/// The formal `k = -1` member of the radial family: the inversion
/// `(a, l + i t) -> (a - atan(t/l), (l - i t) / (l^2 + t^2))`.
///
/// In the log-cylindrical chart it is `(a, xi, psi) -> (a - psi, -xi, -psi)`.
/// It is a contact involution with `f^* theta = theta` (so `sigma = 1`),
/// vanishing Beltrami quotient and unit distortion.
pub fn f_minus_one() -> MapUnderTest {
    MapUnderTest::new("f_minus_one", |p: &Point| {
        let r2 = p.lambda() * p.lambda() + p.t() * p.t();
        Point::new(
            p.a() - (p.t() / p.lambda()).atan(),
            p.lambda() / r2,
            -p.t() / r2,
        )
        .expect("image lambda positive")
    })
    .with_analytic_derivatives(|p: &Point| {
        let r2 = p.lambda() * p.lambda() + p.t() * p.t();
        let zbar_sq = Complex64::new(
            p.lambda() * p.lambda() - p.t() * p.t(),
            -2.0 * p.lambda() * p.t(),
        );
        (
            -2.0 * p.lambda() / (r2 * r2) * zbar_sq,
            Complex64::new(0.0, 0.0),
        )
    })
}

/// The three built-in extremality scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    LinearLt1,
    LinearGt1,
    Radial,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::LinearLt1 => "linear_lt1",
            ScenarioKind::LinearGt1 => "linear_gt1",
            ScenarioKind::Radial => "radial",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_lt1" => Ok(ScenarioKind::LinearLt1),
            "linear_gt1" => Ok(ScenarioKind::LinearGt1),
            "radial" => Ok(ScenarioKind::Radial),
            other => Err(Error::InvalidParameters(format!(
                "unknown scenario kind {other:?}; expected linear_lt1, linear_gt1 or radial"
            ))),
        }
    }
}

/// Parameters of a scenario run, readable from a JSON config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub k: f64,
    #[serde(default = "default_r0")]
    pub r0: f64,
    #[serde(default = "default_psi0")]
    pub psi0: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub curves: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_tol_profile")]
    pub tol_profile: String,
}

fn default_r0() -> f64 {
    E
}

fn default_psi0() -> f64 {
    FRAC_PI_4
}

fn default_grid() -> usize {
    32
}

fn default_seed() -> u64 {
    1
}

fn default_tol_profile() -> String {
    "strict".to_owned()
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind, k: f64) -> Self {
        ScenarioConfig {
            kind,
            k,
            r0: default_r0(),
            psi0: default_psi0(),
            grid: default_grid(),
            curves: 0,
            seed: default_seed(),
            tol_profile: default_tol_profile(),
        }
    }

    pub fn make(&self) -> Result<Scenario> {
        make_scenario(self.kind, self.k, self.r0, self.psi0)
    }
}

/// A stretch map together with the curve family it is extremal for: the
/// foliated domain, its transverse measure and the boundary faces the
/// fibers connect.
#[derive(Clone)]
pub struct Scenario {
    kind: ScenarioKind,
    k: f64,
    r0: f64,
    psi0: f64,
    map: MapUnderTest,
    inverse_map: MapUnderTest,
    foliation: Foliation,
}

/// Builds a scenario after validating its parameters.
///
/// `r0` and `psi0` only matter for the radial kind; the linear domains are
/// the fixed boxes `a in (0,1)`, `lambda in (1/2, 1)`, `t in (0,1)`
/// (sheared along the fibers for `linear_lt1`).
pub fn make_scenario(kind: ScenarioKind, k: f64, r0: f64, psi0: f64) -> Result<Scenario> {
    if !k.is_finite() || !(k > 0.0) {
        return Err(Error::InvalidParameters(format!("k must be positive, got {k}")));
    }
    match kind {
        ScenarioKind::LinearLt1 if k > 1.0 => {
            return Err(Error::InvalidParameters(format!(
                "linear_lt1 needs 0 < k <= 1, got {k}"
            )))
        }
        ScenarioKind::LinearGt1 if k < 1.0 => {
            return Err(Error::InvalidParameters(format!(
                "linear_gt1 needs k >= 1, got {k}"
            )))
        }
        ScenarioKind::Radial => {
            if k > 1.0 {
                return Err(Error::InvalidParameters(format!(
                    "the radial scenario needs 0 < k <= 1, got {k}"
                )));
            }
            if !(r0 > 1.0) || !r0.is_finite() {
                return Err(Error::InvalidParameters(format!("r0 must exceed 1, got {r0}")));
            }
            if !(psi0 > 0.0) || psi0 > PSI0_CAP {
                return Err(Error::InvalidParameters(format!(
                    "psi0 must lie in (0, pi/2 - 1e-3], got {psi0}"
                )));
            }
        }
        _ => {}
    }
    let (map, inverse_map) = match kind {
        ScenarioKind::LinearLt1 | ScenarioKind::LinearGt1 => {
            (linear_stretch(k)?, linear_stretch(1.0 / k)?)
        }
        ScenarioKind::Radial => (radial_stretch(k)?, radial_stretch(1.0 / k)?),
    };
    let foliation = match kind {
        ScenarioKind::LinearLt1 => shear_box_foliation(),
        ScenarioKind::LinearGt1 => cubic_box_foliation(),
        ScenarioKind::Radial => radial_shell_foliation(r0, psi0),
    };
    Ok(Scenario {
        kind,
        k,
        r0,
        psi0,
        map,
        inverse_map,
        foliation,
    })
}

/// Closed-boundary tolerance for locating points in foliation coordinates.
const LOCATE_TOL: f64 = 1e-9;

fn shear_box_foliation() -> Foliation {
    Foliation::new(
        Chart::Cartesian,
        (0.0, 1.0),
        [(0.0, 1.0), (0.5, 1.0)],
        |s, a, l| [a + s / (2.0 * l), l, s],
        |_s, _a, l| [1.0 / (2.0 * l), 0.0, 1.0],
        |_s, _a, l| 1.0 / (2.0 * l),
        |_a, l| 16.0 * l * l,
        |p| {
            let (l, t) = (p.lambda(), p.t());
            let a = p.a() - t / (2.0 * l);
            (within(t, 0.0, 1.0) && within(a, 0.0, 1.0) && within(l, 0.5, 1.0))
                .then_some([t, a, l])
        },
    )
}

fn cubic_box_foliation() -> Foliation {
    let s_lo = 3.0 / 2.0f64.cbrt();
    Foliation::new(
        Chart::Cartesian,
        (s_lo, 3.0),
        [(0.0, 1.0), (0.0, 1.0)],
        |s, a, t| [a, s * s * s / 27.0, t],
        |s, _a, _t| [0.0, s * s / 9.0, 0.0],
        |s, _a, _t| 1.5 / s,
        |_a, _t| 16.0,
        move |p| {
            let (a, l, t) = (p.a(), p.lambda(), p.t());
            let s = 3.0 * l.cbrt();
            (within(l, 0.5, 1.0) && within(a, 0.0, 1.0) && within(t, 0.0, 1.0))
                .then_some([s, a, t])
        },
    )
}

fn radial_shell_foliation(r0: f64, psi0: f64) -> Foliation {
    let len = r0.ln();
    Foliation::new(
        Chart::LogCyl,
        (0.0, len),
        [(0.0, 1.0), (0.0, psi0)],
        |s, a, psi| [a + 0.5 * psi.tan() * s, s, psi],
        |_s, _a, psi| [0.5 * psi.tan(), 1.0, 0.0],
        |_s, _a, psi| 0.5 / psi.cos(),
        |_a, psi| 16.0 * psi.cos() * psi.cos(),
        move |p| {
            let q = p.to_logcyl();
            let (xi, psi) = (q.xi(), q.psi());
            let a = q.a() - 0.5 * psi.tan() * xi;
            (within(xi, 0.0, len) && within(psi, 0.0, psi0) && within(a, 0.0, 1.0))
                .then_some([xi, a, psi])
        },
    )
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    let tol = LOCATE_TOL * (hi - lo);
    x >= lo - tol && x <= hi + tol
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn psi0(&self) -> f64 {
        self.psi0
    }

    pub fn map(&self) -> &MapUnderTest {
        &self.map
    }

    /// The exact inverse stretch (parameter `1/k`).
    pub fn inverse_map(&self) -> &MapUnderTest {
        &self.inverse_map
    }

    pub fn foliation(&self) -> &Foliation {
        &self.foliation
    }

    /// Closed-form modulus of the fiber family, from the transverse mass
    /// and the parameter length: `(d - c)^{-3} int nu`.
    pub fn modulus_closed_form(&self) -> f64 {
        match self.kind {
            // int 16 l^2 over (0,1) x (1/2,1) = 14/3, unit parameter length.
            ScenarioKind::LinearLt1 => 14.0 / 3.0,
            // Transverse mass 16 over the cube of 3 (1 - 2^{-1/3}).
            ScenarioKind::LinearGt1 => {
                let len = 3.0 - 3.0 / 2.0f64.cbrt();
                16.0 / (len * len * len)
            }
            ScenarioKind::Radial => {
                let len = self.r0.ln();
                (2.0 / len).powi(3) * (self.psi0 + self.psi0.sin() * self.psi0.cos())
            }
        }
    }

    /// Closed-form modulus of the image family `f_k(Gamma_0)`.
    ///
    /// For the linear kinds the distortion is constant, so it is
    /// `K^2 Mod`; for the radial kind it is the evaluated fiberwise
    /// distortion integral
    /// `(2/ln r0)^3 k^{-3} (k sin(2 psi0) / (1 + k^2 + (k^2 - 1) cos(2 psi0)) + atan(tan(psi0)/k))`.
    pub fn image_modulus_closed_form(&self) -> f64 {
        let k = self.k;
        match self.kind {
            ScenarioKind::LinearLt1 | ScenarioKind::LinearGt1 => {
                let kf = self.distortion_bound();
                kf * kf * self.modulus_closed_form()
            }
            ScenarioKind::Radial => {
                let len = self.r0.ln();
                let two_psi = 2.0 * self.psi0;
                let term = k * two_psi.sin() / (1.0 + k * k + (k * k - 1.0) * two_psi.cos())
                    + (self.psi0.tan() / k).atan();
                (2.0 / len).powi(3) / (k * k * k) * term
            }
        }
    }

    /// Maximal distortion of the stretch on the closed scenario domain.
    pub fn distortion_bound(&self) -> f64 {
        match self.kind {
            ScenarioKind::LinearLt1 => 1.0 / self.k,
            ScenarioKind::LinearGt1 => self.k,
            // K(psi) = 1 / (k^2 cos^2 psi + sin^2 psi) peaks at psi -> 0.
            ScenarioKind::Radial => 1.0 / (self.k * self.k),
        }
    }

    /// Pointwise distortion on the fiber through `(d1, d2)`; constant
    /// along the fiber.
    pub fn fiber_distortion(&self, _d1: f64, d2: f64) -> f64 {
        match self.kind {
            ScenarioKind::LinearLt1 => 1.0 / self.k,
            ScenarioKind::LinearGt1 => self.k,
            ScenarioKind::Radial => {
                let (c, s) = (d2.cos(), d2.sin());
                1.0 / (self.k * self.k * c * c + s * s)
            }
        }
    }

    /// Whether `p` lies in the scenario domain with a relative margin per
    /// foliation coordinate.
    pub fn contains(&self, p: &Point, margin: f64) -> bool {
        match self.foliation.locate(p) {
            None => false,
            Some([s, d1, d2]) => {
                let (c, d) = self.foliation.s_range();
                let [r1, r2] = self.foliation.delta_range();
                in_margin(s, c, d, margin)
                    && in_margin(d1, r1.0, r1.1, margin)
                    && in_margin(d2, r2.0, r2.1, margin)
            }
        }
    }

    /// Whether `p` lies on the source face the fibers start on.
    pub fn on_start_face(&self, p: &Point, tol: f64) -> bool {
        self.on_face(p, tol, true)
    }

    /// Whether `p` lies on the target face the fibers end on.
    pub fn on_end_face(&self, p: &Point, tol: f64) -> bool {
        self.on_face(p, tol, false)
    }

    fn on_face(&self, p: &Point, tol: f64, start: bool) -> bool {
        match self.foliation.locate(p) {
            None => false,
            Some([s, _, _]) => {
                let (c, d) = self.foliation.s_range();
                let target = if start { c } else { d };
                (s - target).abs() <= tol * (d - c)
            }
        }
    }

    /// Whether `q` lies on the image of the start (respectively end) face
    /// under the stretch, decided through the exact inverse.
    pub fn on_image_face(&self, q: &Point, tol: f64, start: bool) -> bool {
        let back = self.inverse_map.apply(q);
        if start {
            self.on_start_face(&back, tol)
        } else {
            self.on_end_face(&back, tol)
        }
    }

    /// Centers of an `m1 x m2` stratification of the transverse rectangle,
    /// row-major, truncated to exactly `n` entries with `m1 = m2 = ceil(sqrt n)`.
    pub fn stratified_deltas(&self, n: usize) -> Vec<(f64, f64)> {
        let m = (n as f64).sqrt().ceil() as usize;
        let m = m.max(1);
        let [r1, r2] = self.foliation.delta_range();
        let mut out = Vec::with_capacity(n);
        'outer: for i in 0..m {
            for j in 0..m {
                if out.len() == n {
                    break 'outer;
                }
                out.push((
                    r1.0 + (r1.1 - r1.0) * (i as f64 + 0.5) / m as f64,
                    r2.0 + (r2.1 - r2.0) * (j as f64 + 0.5) / m as f64,
                ));
            }
        }
        out
    }
}

/// Closed-interval membership with a relative clearance from both ends.
fn in_margin(x: f64, lo: f64, hi: f64, margin: f64) -> bool {
    let m = margin * (hi - lo);
    x >= lo + m && x <= hi - m
}

/// Smooth bump on `[0, 1]` vanishing at both ends: a short sine series
/// with sup norm at most 1.
#[derive(Clone, Copy)]
struct Bump {
    coefs: [f64; 3],
}

impl Bump {
    fn from_rng(rng: &mut ChaCha12Rng) -> Self {
        let mut coefs = [0.0f64; 3];
        for c in &mut coefs {
            *c = rng.gen_range(-1.0..1.0);
        }
        let norm: f64 = coefs.iter().map(|c| c.abs()).sum::<f64>().max(1e-12);
        for c in &mut coefs {
            *c /= norm;
        }
        Bump { coefs }
    }

    fn eval(&self, u: f64) -> f64 {
        let pi = std::f64::consts::PI;
        self.coefs
            .iter()
            .enumerate()
            .map(|(m, c)| c * ((m as f64 + 1.0) * pi * u).sin())
            .sum()
    }

    fn deriv(&self, u: f64) -> f64 {
        let pi = std::f64::consts::PI;
        self.coefs
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let w = (m as f64 + 1.0) * pi;
                c * w * (w * u).cos()
            })
            .sum()
    }
}

fn gl64() -> &'static GaussLegendre {
    use std::sync::OnceLock;
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(64))
}

/// Horizontal curves joining the two scenario faces: stratified fibers of
/// the extremal family, each perturbed transversally by smooth bumps that
/// vanish at the endpoints (so the endpoints stay on the faces) and whose
/// amplitude is shrunk by a line search until the curve keeps a safety
/// margin to the domain boundary.
///
/// `perturbation` in `[0, 1]` scales the requested amplitudes; zero
/// reproduces the fibers exactly. The `a`-component is recovered from the
/// horizontality equation, so every returned curve is horizontal by
/// construction.
pub fn sample_connecting_family(
    scenario: &Scenario,
    n_curves: usize,
    perturbation: f64,
    seed: u64,
) -> Result<Vec<HorizontalCurve>> {
    if !(0.0..=1.0).contains(&perturbation) {
        return Err(Error::InvalidParameters(format!(
            "perturbation must lie in [0, 1], got {perturbation}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let deltas = scenario.stratified_deltas(n_curves);
    let mut out = Vec::with_capacity(n_curves);
    for (d1, d2) in deltas {
        out.push(perturbed_curve(scenario, d1, d2, perturbation, &mut rng)?);
    }
    Ok(out)
}

/// Fraction of each axis kept clear by perturbed curves.
const DOMAIN_MARGIN: f64 = 1e-3;
/// Interior samples used by the amplitude line search.
const SEARCH_SAMPLES: usize = 129;

fn perturbed_curve(
    scenario: &Scenario,
    d1: f64,
    d2: f64,
    perturbation: f64,
    rng: &mut ChaCha12Rng,
) -> Result<HorizontalCurve> {
    // Two bumps per curve: one on each transverse coordinate.
    let b1 = Bump::from_rng(rng);
    let b2 = Bump::from_rng(rng);
    let [_, r2] = scenario.foliation().delta_range();
    let kind = scenario.kind();
    let (c, d) = scenario.foliation().s_range();
    let len = d - c;

    // Requested amplitudes, scaled to the transverse axis that the bump
    // actually moves. The line search below may shrink them.
    let (amp1_req, amp2_req) = match kind {
        // bump 1 on lambda, bump 2 on t.
        ScenarioKind::LinearLt1 => (
            0.3 * perturbation * (r2.1 - r2.0),
            0.2 * perturbation,
        ),
        // bump 1 on lambda, bump 2 on t.
        ScenarioKind::LinearGt1 => (
            0.2 * perturbation * 0.5,
            0.3 * perturbation * (r2.1 - r2.0),
        ),
        // bump 1 on psi, bump 2 on xi.
        ScenarioKind::Radial => (
            0.3 * perturbation * (r2.1 - r2.0),
            0.2 * perturbation * len,
        ),
    };

    let build = |a1: f64, a2: f64| build_curve(scenario, d1, d2, b1, b2, a1, a2);
    let fits = |curve: &HorizontalCurve| {
        let (c, d) = curve.s_range();
        for i in 1..SEARCH_SAMPLES {
            let s = c + (d - c) * i as f64 / SEARCH_SAMPLES as f64;
            let p = curve.point(s);
            let margin = if i == SEARCH_SAMPLES - 1 { 0.0 } else { DOMAIN_MARGIN };
            // Interior points keep a margin; the sample next to the end
            // face only needs membership (the face itself is reached at
            // s = d exactly).
            if !scenario.contains(&p, margin) {
                return false;
            }
        }
        // Endpoints must sit on the faces.
        scenario.on_start_face(&curve.point(c), 1e-9)
            && scenario.on_end_face(&curve.point(d), 1e-9)
    };

    let (mut a1, mut a2) = (amp1_req, amp2_req);
    for _ in 0..60 {
        if a1.abs() < 1e-12 && a2.abs() < 1e-12 {
            a1 = 0.0;
            a2 = 0.0;
            break;
        }
        if fits(&build(a1, a2)) {
            break;
        }
        a1 *= 0.5;
        a2 *= 0.5;
    }
    if !fits(&build(a1, a2)) {
        if a1 != 0.0 || a2 != 0.0 {
            a1 = 0.0;
            a2 = 0.0;
        }
        if !fits(&build(a1, a2)) {
            return Err(Error::PerturbationLeavesDomain(format!(
                "fiber at ({d1}, {d2}) cannot be perturbed inside the domain"
            )));
        }
    }
    let curve = build(a1, a2);
    curve.validate_horizontal(64)?;
    Ok(curve)
}

/// Assembles one perturbed connecting curve; the `a`-component integrates
/// the horizontality equation from the start face.
fn build_curve(
    scenario: &Scenario,
    d1: f64,
    d2: f64,
    b1: Bump,
    b2: Bump,
    a1: f64,
    a2: f64,
) -> HorizontalCurve {
    let kind = scenario.kind();
    let (c, d) = scenario.foliation().s_range();
    let len = d - c;
    match kind {
        ScenarioKind::LinearLt1 => {
            // lambda(s) = d2 + a1 b1, t(s) = s + a2 b2, a from da/ds = t'/(2 lambda).
            let lambda = move |s: f64| d2 + a1 * b1.eval((s - c) / len);
            let tdot = move |s: f64| 1.0 + a2 * b2.deriv((s - c) / len) / len;
            let t = move |s: f64| s + a2 * b2.eval((s - c) / len);
            let a = move |s: f64| d1 + gl64().integrate(c, s, |x| tdot(x) / (2.0 * lambda(x)));
            HorizontalCurve::new_cartesian((c, d), move |s| [a(s), lambda(s), t(s)])
                .with_velocity(move |s| {
                    let ld = a1 * b1.deriv((s - c) / len) / len;
                    [tdot(s) / (2.0 * lambda(s)), ld, tdot(s)]
                })
        }
        ScenarioKind::LinearGt1 => {
            let lambda = move |s: f64| s * s * s / 27.0 + a1 * b1.eval((s - c) / len);
            let lambdadot = move |s: f64| s * s / 9.0 + a1 * b1.deriv((s - c) / len) / len;
            let t = move |s: f64| d2 + a2 * b2.eval((s - c) / len);
            let tdot = move |s: f64| a2 * b2.deriv((s - c) / len) / len;
            let a = move |s: f64| d1 + gl64().integrate(c, s, |x| tdot(x) / (2.0 * lambda(x)));
            HorizontalCurve::new_cartesian((c, d), move |s| [a(s), lambda(s), t(s)])
                .with_velocity(move |s| [tdot(s) / (2.0 * lambda(s)), lambdadot(s), tdot(s)])
        }
        ScenarioKind::Radial => {
            // psi(s) = d2 + a1 b1, xi(s) = s + a2 b2, a from
            // da/ds = psi'/2 + tan(psi) xi'/2.
            let psi = move |s: f64| d2 + a1 * b1.eval((s - c) / len);
            let psidot = move |s: f64| a1 * b1.deriv((s - c) / len) / len;
            let xi = move |s: f64| s + a2 * b2.eval((s - c) / len);
            let xidot = move |s: f64| 1.0 + a2 * b2.deriv((s - c) / len) / len;
            let integrand = move |x: f64| 0.5 * psidot(x) + 0.5 * psi(x).tan() * xidot(x);
            let a = move |s: f64| d1 + gl64().integrate(c, s, integrand);
            HorizontalCurve::new_logcyl((c, d), move |s| [a(s), xi(s), psi(s)])
                .with_velocity(move |s| [integrand(s), xidot(s), psidot(s)])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Tangent;
    use crate::maps::DerivMethod;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn k_equal_one_degenerates_to_the_identity() {
        let lin = linear_stretch(1.0).unwrap();
        let rad = radial_stretch(1.0).unwrap();
        for p in [
            Point::new(0.3, 0.8, 0.4).unwrap(),
            Point::new(-1.0, 2.0, -0.7).unwrap(),
        ] {
            for map in [&lin, &rad] {
                let q = map.apply(&p);
                assert!(close(q.a(), p.a(), 1e-14));
                assert!(close(q.lambda(), p.lambda(), 1e-14));
                assert!(close(q.t(), p.t(), 1e-14));
            }
        }
    }

    #[test]
    fn parameters_are_validated() {
        assert!(matches!(linear_stretch(0.0), Err(Error::InvalidParameters(_))));
        assert!(matches!(radial_stretch(-2.0), Err(Error::InvalidParameters(_))));
        assert!(matches!(
            make_scenario(ScenarioKind::LinearLt1, 2.0, E, FRAC_PI_4),
            Err(Error::InvalidParameters(_))
        ));
        assert!(matches!(
            make_scenario(ScenarioKind::LinearGt1, 0.5, E, FRAC_PI_4),
            Err(Error::InvalidParameters(_))
        ));
        assert!(matches!(
            make_scenario(ScenarioKind::Radial, 0.5, 0.9, FRAC_PI_4),
            Err(Error::InvalidParameters(_))
        ));
        assert!(matches!(
            make_scenario(ScenarioKind::Radial, 0.5, E, FRAC_PI_2),
            Err(Error::InvalidParameters(_))
        ));
    }

    #[test]
    fn planar_stretch_moves_the_angle_as_expected() {
        let (xi, psi) = g_k_planar(0.5, 1.7, FRAC_PI_4);
        assert!(close(xi, 0.85, 1e-15));
        assert!(close(psi, 2.0f64.atan(), 1e-15));
    }

    #[test]
    fn cartesian_radial_stretch_agrees_with_its_logcyl_lift() {
        let k = 0.37;
        let map = radial_stretch(k).unwrap();
        for &(a, xi, psi) in &[
            (0.0, 0.0, 0.0),
            (0.4, -1.2, 0.9),
            (-0.3, 2.0, -1.4),
            (1.0, 0.5, 1.5),
        ] {
            let q = LogCylPoint::new(a, xi, psi).unwrap();
            let via_cart = map.apply(&q.to_cartesian());
            let via_lift = radial_stretch_logcyl(k, &q).to_cartesian();
            assert!(close(via_cart.a(), via_lift.a(), 1e-10));
            assert!(close(via_cart.lambda(), via_lift.lambda(), 1e-10));
            assert!(close(via_cart.t(), via_lift.t(), 1e-10));
        }
    }

    #[test]
    fn radial_stretch_projects_to_the_planar_stretch() {
        // The half-plane part of the image depends only on the half-plane
        // part of the source, through g_k.
        let k = 0.6;
        let map = radial_stretch(k).unwrap();
        let q = LogCylPoint::new(0.8, 0.7, 1.1).unwrap();
        let image = map.apply(&q.to_cartesian());
        let (xi, psi) = g_k_planar(k, q.xi(), q.psi());
        let planar = LogCylPoint::new(0.0, xi, psi).unwrap().to_cartesian();
        assert!(close(image.lambda(), planar.lambda(), 1e-12));
        assert!(close(image.t(), planar.t(), 1e-12));
    }

    #[test]
    fn radial_beltrami_matches_the_closed_form() {
        let k = 0.5;
        let map = radial_stretch(k).unwrap();
        for &(a, xi, psi) in &[(0.2, 0.3, 0.6), (0.0, -0.5, -0.4), (1.2, 0.9, 1.49)] {
            let p = LogCylPoint::new(a, xi, psi).unwrap().to_cartesian();
            let mu = map.beltrami(&p).unwrap();
            let tan = psi.tan();
            let expected = Complex64::from_polar(
                (1.0 - k * k) / (k * k + 2.0 * tan * tan + 1.0),
                2.0 * psi + std::f64::consts::PI,
            );
            assert!(
                (mu - expected).norm() < 1e-12,
                "mu {mu} vs {expected} at psi={psi}"
            );
        }
    }

    #[test]
    fn radial_analytic_derivatives_match_finite_differences() {
        let map = radial_stretch(0.5).unwrap();
        for &(a, xi, psi) in &[(0.1, 0.2, 0.5), (0.7, 0.9, 0.2), (0.0, 0.4, 1.2)] {
            let p = LogCylPoint::new(a, xi, psi).unwrap().to_cartesian();
            let exact = map.horizontal_derivatives(&p);
            assert_eq!(exact.method, DerivMethod::Analytic);
            let fd = map.fd_derivatives(&p);
            assert!((fd.z - exact.z).norm() <= 1e-6 * exact.z.norm());
            assert!((fd.zbar - exact.zbar).norm() <= 1e-6 * exact.z.norm());
        }
    }

    #[test]
    fn radial_distortion_depends_only_on_the_angle() {
        let k = 0.5;
        let map = radial_stretch(k).unwrap();
        let psi = FRAC_PI_4;
        let expected = 1.0 / (k * k * psi.cos().powi(2) + psi.sin().powi(2));
        assert!(close(expected, 1.6, 1e-15));
        for xi in [-1.0, 0.0, 2.0] {
            let p = LogCylPoint::new(0.3, xi, psi).unwrap().to_cartesian();
            assert!(close(map.distortion(&p).unwrap(), expected, 1e-12));
        }
    }

    #[test]
    fn inversion_is_a_conformal_contact_involution() {
        let inv = f_minus_one();
        let e = Point::identity();
        let fixed = inv.apply(&e);
        assert!(close(fixed.a(), 0.0, 1e-15));
        assert!(close(fixed.lambda(), 1.0, 1e-15));
        assert!(close(fixed.t(), 0.0, 1e-15));
        for p in [
            Point::new(0.4, 1.3, -0.8).unwrap(),
            Point::new(-0.2, 0.5, 0.9).unwrap(),
        ] {
            let twice = inv.apply(&inv.apply(&p));
            assert!(close(twice.a(), p.a(), 1e-12));
            assert!(close(twice.lambda(), p.lambda(), 1e-12));
            assert!(close(twice.t(), p.t(), 1e-12));
            assert!(inv.beltrami(&p).unwrap().norm() < 1e-13);
            assert!(close(inv.distortion(&p).unwrap(), 1.0, 1e-12));
            assert!((inv.sigma(&p) - 1.0).abs() < 1e-9);
            assert!((inv.jacobian_mu(&p) - 1.0).abs() < 1e-9);
            let res = inv.contact_residual(&p);
            assert!(res.max() < 1e-8, "{res:?}");
        }
    }

    #[test]
    fn inversion_matches_its_logcyl_normal_form() {
        let inv = f_minus_one();
        let q = LogCylPoint::new(0.7, 0.4, -0.9).unwrap();
        let image = inv.apply(&q.to_cartesian()).to_logcyl();
        assert!(close(image.a(), q.a() - q.psi(), 1e-12));
        assert!(close(image.xi(), -q.xi(), 1e-12));
        assert!(close(image.psi(), -q.psi(), 1e-12));
    }

    #[test]
    fn scenario_closed_forms_match_hand_values() {
        let lt1 = make_scenario(ScenarioKind::LinearLt1, 0.5, E, FRAC_PI_4).unwrap();
        assert!(close(lt1.modulus_closed_form(), 14.0 / 3.0, 1e-15));
        assert!(close(lt1.image_modulus_closed_form(), 4.0 * 14.0 / 3.0, 1e-15));

        let gt1 = make_scenario(ScenarioKind::LinearGt1, 3.0, E, FRAC_PI_4).unwrap();
        let cbrt2 = 2.0f64.cbrt();
        let expected = 32.0 / (27.0 * (cbrt2 - 1.0).powi(3));
        assert!(close(gt1.modulus_closed_form(), expected, 1e-14));
        assert!(close(gt1.image_modulus_closed_form(), 9.0 * expected, 1e-14));

        let rad = make_scenario(ScenarioKind::Radial, 0.5, E, FRAC_PI_4).unwrap();
        assert!(close(
            rad.modulus_closed_form(),
            2.0 * std::f64::consts::PI + 4.0,
            1e-15
        ));
        assert!(close(
            rad.image_modulus_closed_form(),
            64.0 * (0.4 + 2.0f64.atan()),
            1e-14
        ));
    }

    #[test]
    fn fibers_are_horizontal_with_constant_distortion() {
        for kind in [ScenarioKind::LinearLt1, ScenarioKind::LinearGt1, ScenarioKind::Radial] {
            let k = if kind == ScenarioKind::LinearGt1 { 3.0 } else { 0.5 };
            let sc = make_scenario(kind, k, E, FRAC_PI_4).unwrap();
            let fol = sc.foliation();
            let (c, d) = fol.s_range();
            for (d1, d2) in sc.stratified_deltas(9) {
                let fiber = fol.fiber(d1, d2);
                fiber.validate_horizontal(50).unwrap();
                let expected = sc.fiber_distortion(d1, d2);
                for i in 0..5 {
                    let s = c + (d - c) * (i as f64 + 0.5) / 5.0;
                    let kk = sc.map().distortion(&fiber.point(s)).unwrap();
                    assert!(
                        (kk - expected).abs() < 1e-10 * expected,
                        "{kind:?} fiber ({d1}, {d2}): K = {kk} vs {expected}"
                    );
                }
            }
        }
    }

    #[test]
    fn stretch_maps_send_faces_to_image_faces() {
        for kind in [ScenarioKind::LinearLt1, ScenarioKind::LinearGt1, ScenarioKind::Radial] {
            let k = if kind == ScenarioKind::LinearGt1 { 2.0 } else { 0.5 };
            let sc = make_scenario(kind, k, E, FRAC_PI_4).unwrap();
            let fol = sc.foliation();
            let (c, d) = fol.s_range();
            for (d1, d2) in sc.stratified_deltas(25) {
                let start = fol.point_at(c, d1, d2);
                let end = fol.point_at(d, d1, d2);
                assert!(sc.on_start_face(&start, 1e-9));
                assert!(sc.on_end_face(&end, 1e-9));
                let q0 = sc.map().apply(&start);
                let q1 = sc.map().apply(&end);
                assert!(sc.on_image_face(&q0, 1e-8, true), "{kind:?} start face");
                assert!(sc.on_image_face(&q1, 1e-8, false), "{kind:?} end face");
            }
        }
    }

    #[test]
    fn volume_split_holds_for_all_catalog_foliations() {
        for kind in [ScenarioKind::LinearLt1, ScenarioKind::LinearGt1, ScenarioKind::Radial] {
            let k = if kind == ScenarioKind::LinearGt1 { 3.0 } else { 0.5 };
            let sc = make_scenario(kind, k, E, FRAC_PI_4).unwrap();
            let residual = sc.foliation().volume_residual(6);
            assert!(residual < 1e-6, "{kind:?}: residual {residual}");
        }
    }

    #[test]
    fn zero_perturbation_reproduces_the_fibers() {
        let sc = make_scenario(ScenarioKind::Radial, 0.5, E, FRAC_PI_4).unwrap();
        let curves = sample_connecting_family(&sc, 9, 0.0, 7).unwrap();
        let deltas = sc.stratified_deltas(9);
        for (curve, (d1, d2)) in curves.iter().zip(deltas) {
            let fiber = sc.foliation().fiber(d1, d2);
            let (c, d) = curve.s_range();
            for i in 0..=8 {
                let s = c + (d - c) * i as f64 / 8.0;
                let p = curve.point(s);
                let q = fiber.point(s);
                assert!(close(p.a(), q.a(), 1e-12));
                assert!(close(p.lambda(), q.lambda(), 1e-12));
                assert!(close(p.t(), q.t(), 1e-12));
            }
        }
    }

    #[test]
    fn perturbed_curves_stay_inside_and_connect_the_faces() {
        for kind in [ScenarioKind::LinearLt1, ScenarioKind::LinearGt1, ScenarioKind::Radial] {
            let k = if kind == ScenarioKind::LinearGt1 { 2.0 } else { 0.5 };
            let sc = make_scenario(kind, k, E, FRAC_PI_4).unwrap();
            let curves = sample_connecting_family(&sc, 16, 0.5, 42).unwrap();
            assert_eq!(curves.len(), 16);
            let deltas = sc.stratified_deltas(16);
            let mut max_deviation: f64 = 0.0;
            for (curve, (d1, d2)) in curves.iter().zip(deltas) {
                curve.validate_horizontal(100).unwrap();
                let (c, d) = curve.s_range();
                assert!(sc.on_start_face(&curve.point(c), 1e-9));
                assert!(sc.on_end_face(&curve.point(d), 1e-9));
                let fiber = sc.foliation().fiber(d1, d2);
                for i in 1..40 {
                    let s = c + (d - c) * i as f64 / 40.0;
                    let p = curve.point(s);
                    assert!(sc.contains(&p, 0.0), "{kind:?} leaves domain");
                    let q = fiber.point(s);
                    max_deviation = max_deviation
                        .max((p.lambda() - q.lambda()).abs())
                        .max((p.t() - q.t()).abs());
                }
            }
            assert!(
                max_deviation > 1e-4,
                "{kind:?}: perturbation had no effect at all"
            );
        }
    }

    #[test]
    fn scenario_config_round_trips_through_json() {
        let config = ScenarioConfig {
            kind: ScenarioKind::Radial,
            k: 0.5,
            r0: E,
            psi0: FRAC_PI_4,
            grid: 16,
            curves: 100,
            seed: 3,
            tol_profile: "fast".into(),
        };
        let json = crate::report::to_json_string(&config);
        let back: ScenarioConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.kind, ScenarioKind::Radial);
        assert_eq!(back.curves, 100);
        assert_eq!(back.k, 0.5);

        let partial: ScenarioConfig =
            serde_json::from_str(r#"{"kind": "linear_lt1", "k": 0.25}"#).unwrap();
        assert_eq!(partial.grid, 32);
        assert_eq!(partial.r0, E);
    }

    proptest! {
        #[test]
        fn contact_lift_property(
            k in 0.1f64..1.0,
            a in -1.0f64..1.0,
            xi in -1.0f64..1.0,
            psi in -1.4f64..1.4,
        ) {
            // The radial stretch is a contact map: its differential maps the
            // contact plane to the contact plane. Check on the lift formula
            // by pushing the horizontal basis through finite differences.
            let map = radial_stretch(k).unwrap();
            let p = LogCylPoint::new(a, xi, psi).unwrap().to_cartesian();
            let frame = p.frame();
            let h = 1e-6 * (1.0 + p.coord_norm());
            for dir in [frame.u, frame.v] {
                let step = |j: f64| {
                    map.apply(
                        &Point::new(
                            p.a() + j * h * dir.da,
                            p.lambda() + j * h * dir.dlambda,
                            p.t() + j * h * dir.dt,
                        )
                        .unwrap(),
                    )
                };
                let (m, q) = (step(-1.0), step(1.0));
                let image_v = Tangent::new(
                    (q.a() - m.a()) / (2.0 * h),
                    (q.lambda() - m.lambda()) / (2.0 * h),
                    (q.t() - m.t()) / (2.0 * h),
                );
                let at = map.apply(&p);
                let theta = crate::group::contact_form(&at, &image_v);
                prop_assert!(theta.abs() < 1e-6 * (1.0 + image_v.coord_norm()));
            }
        }
    }
}
