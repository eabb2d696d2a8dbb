//! The 4-modulus engine.
//!
//! `Mod_4` of a curve family is the infimum of `int rho^4 dmu` over
//! nonnegative densities `rho` whose line integral along every curve of the
//! family is at least 1. For a foliation compatible with the volume the
//! infimum is attained by the reciprocal-speed density and has the closed
//! form `(d - c)^-3 int nu`; for everything else this module sets up a
//! discrete convex program over a tensor grid of cells and solves it with a
//! projected subgradient method that certifies feasibility of the returned
//! density.

use crate::curves::{Density, Foliation, HorizontalCurve};
use crate::maps::MapUnderTest;
use crate::quad::{self, GaussLegendre};
use crate::stretch::{sample_connecting_family, Scenario};
use crate::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;

/// Gate on the volume-split residual before trusting closed-form values.
const FOLIATION_RESIDUAL_TOL: f64 = 1e-6;
/// Lattice size per axis for the volume-split pre-check.
const FOLIATION_RESIDUAL_SAMPLES: usize = 6;
/// Admissibility acceptance threshold `1 - 1e-8`.
pub const ADMISSIBILITY_TOL: f64 = 1e-8;
/// Segments per curve when discretizing constraints.
const CURVE_SEGMENTS: usize = 256;
/// Iteration cap for the discrete solver.
const MAX_ITERATIONS: usize = 50_000;
/// The solver declares convergence when the best feasible objective moves
/// by less than this relative amount over a full window.
const CONVERGENCE_REL: f64 = 1e-6;
const CONVERGENCE_WINDOW: usize = 200;
/// Certified feasibility requires at most this violation after rescale.
const CERTIFICATE_TOL: f64 = 1e-9;

/// Extremal density and closed-form modulus of a measured foliation:
/// `rho_0 = 1 / ((d - c) speed)` and `Mod_4 = (d - c)^-3 int nu`, the
/// latter by adaptive quadrature of the transverse mass.
///
/// The volume split `d mu = speed^4 ds dnu` is re-verified first; a
/// foliation that fails it would make both formulas meaningless.
pub fn extremal_density_modulus(fol: &Foliation) -> Result<(Density, f64)> {
    let residual = fol.volume_residual(FOLIATION_RESIDUAL_SAMPLES);
    if residual > FOLIATION_RESIDUAL_TOL {
        return Err(Error::FoliationInvalid(residual));
    }
    let mass = fol.nu_mass();
    Ok((fol.extremal_density(), mass.value / fol.s_len().powi(3)))
}

/// Outcome of testing a density against a family of curves.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub min_integral: f64,
    pub argmin: usize,
    pub n_curves: usize,
    pub pass: bool,
    #[serde(skip)]
    pub integrals: Vec<f64>,
}

/// Line-integrates `rho` over every curve; admissible means every integral
/// reaches `1 - 1e-8`.
pub fn check_admissibility(
    rho: &Density,
    curves: &[HorizontalCurve],
) -> Result<AdmissibilityReport> {
    if curves.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mut integrals = Vec::with_capacity(curves.len());
    for curve in curves {
        integrals.push(curve.line_integral(rho)?);
    }
    let (argmin, min_integral) = integrals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .expect("nonempty");
    Ok(AdmissibilityReport {
        min_integral,
        argmin,
        n_curves: curves.len(),
        pass: min_integral >= 1.0 - ADMISSIBILITY_TOL,
        integrals,
    })
}

/// Discretized modulus problem: cell weights `w` (exact measures of a
/// tensor grid in foliation coordinates) and per-curve constraint rows of
/// `(cell, horizontal length inside the cell)` pairs.
///
/// The program is `min sum w rho^4` subject to `sum_cells rho dl >= 1`
/// per curve and `rho >= 0`.
#[derive(Clone)]
pub struct ModulusProblem {
    weights: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    grid: [usize; 3],
    init: Vec<f64>,
}

impl ModulusProblem {
    /// Builds a problem from explicit weights and constraint rows; meant
    /// for small hand-made programs and tests.
    pub fn from_raw(weights: Vec<f64>, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if weights.is_empty() || rows.is_empty() {
            return Err(Error::InvalidParameters(
                "weights and rows must be nonempty".into(),
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParameters("cell weights must be positive".into()));
        }
        for (j, row) in rows.iter().enumerate() {
            if row.is_empty() || row.iter().any(|(c, dl)| *c >= weights.len() || !(*dl > 0.0)) {
                return Err(Error::InvalidParameters(format!(
                    "constraint row {j} is empty or refers to an invalid cell"
                )));
            }
        }
        let grid = [weights.len(), 1, 1];
        let init = vec![1.0; weights.len()];
        Ok(ModulusProblem {
            weights,
            rows,
            grid,
            init,
        })
    }

    /// Discretizes a scenario: cells are a `grid x m x m` tensor partition
    /// of the foliation coordinates with `m = floor(sqrt(n_curves))`, so
    /// each transverse cell carries one exact fiber through its center;
    /// the remaining `n_curves - m^2` constraints are perturbed connecting
    /// curves.
    ///
    /// Tying the transverse resolution to the curve count keeps the curve
    /// family dense enough to see every cell column, which is what lets
    /// the discrete value track the continuum closed form.
    pub fn from_scenario(
        scenario: &Scenario,
        grid: usize,
        n_curves: usize,
        perturbation: f64,
        seed: u64,
    ) -> Result<Self> {
        if grid == 0 || n_curves == 0 {
            return Err(Error::InvalidParameters(
                "grid and curve count must be positive".into(),
            ));
        }
        let m = ((n_curves as f64).sqrt().floor() as usize).max(1);
        let mut curves = sample_connecting_family(scenario, m * m, 0.0, seed)?;
        if n_curves > m * m {
            curves.extend(sample_connecting_family(
                scenario,
                n_curves - m * m,
                perturbation,
                seed.wrapping_add(1),
            )?);
        }
        Self::from_curves(scenario.foliation(), grid, m, &curves)
    }

    /// Discretizes an explicit curve family over a `grid_s x grid_delta^2`
    /// cell partition of the foliation coordinates.
    pub fn from_curves(
        fol: &Foliation,
        grid_s: usize,
        grid_delta: usize,
        curves: &[HorizontalCurve],
    ) -> Result<Self> {
        if grid_s == 0 || grid_delta == 0 {
            return Err(Error::InvalidParameters("grid sizes must be positive".into()));
        }
        if curves.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let (c, d) = fol.s_range();
        let [r1, r2] = fol.delta_range();
        let n_cells = grid_s * grid_delta * grid_delta;
        let cell_of = |s: f64, d1: f64, d2: f64| -> usize {
            let bin = |x: f64, lo: f64, hi: f64, n: usize| -> usize {
                let i = ((x - lo) / (hi - lo) * n as f64).floor() as isize;
                i.clamp(0, n as isize - 1) as usize
            };
            let i = bin(s, c, d, grid_s);
            let j = bin(d1, r1.0, r1.1, grid_delta);
            let l = bin(d2, r2.0, r2.1, grid_delta);
            (i * grid_delta + j) * grid_delta + l
        };

        // Exact cell measures: per-cell Gauss-Legendre of speed^4 nu.
        let rule = GaussLegendre::new(8);
        let mut weights = vec![0.0; n_cells];
        let mut init = vec![0.0; n_cells];
        let step_s = (d - c) / grid_s as f64;
        let step_1 = (r1.1 - r1.0) / grid_delta as f64;
        let step_2 = (r2.1 - r2.0) / grid_delta as f64;
        for i in 0..grid_s {
            let s0 = c + step_s * i as f64;
            for j in 0..grid_delta {
                let d10 = r1.0 + step_1 * j as f64;
                for l in 0..grid_delta {
                    let d20 = r2.0 + step_2 * l as f64;
                    let w = rule.integrate(s0, s0 + step_s, |s| {
                        rule.integrate(d10, d10 + step_1, |d1| {
                            rule.integrate(d20, d20 + step_2, |d2| {
                                fol.speed_at(s, d1, d2).powi(4) * fol.nu_density(d1, d2)
                            })
                        })
                    });
                    let idx = (i * grid_delta + j) * grid_delta + l;
                    weights[idx] = w;
                    // Warm start from the continuum extremal density at the
                    // cell center; the solver only has to polish it.
                    init[idx] = 1.0
                        / (fol.s_len()
                            * fol.speed_at(
                                s0 + 0.5 * step_s,
                                d10 + 0.5 * step_1,
                                d20 + 0.5 * step_2,
                            ));
                }
            }
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParameters(
                "degenerate foliation: a cell has nonpositive measure".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        let volume = quad::integrate3d((c, d), r1, r2, |s, d1, d2| {
            fol.speed_at(s, d1, d2).powi(4) * fol.nu_density(d1, d2)
        });
        if (total - volume.value).abs() > 1e-6 * volume.value.abs() {
            return Err(Error::InvalidParameters(format!(
                "cell measures sum to {total}, domain volume is {}",
                volume.value
            )));
        }

        // Constraint rows: midpoint-rule horizontal length per traversed cell.
        let mut rows = Vec::with_capacity(curves.len());
        for (ci, curve) in curves.iter().enumerate() {
            let (cc, cd) = curve.s_range();
            let ds = (cd - cc) / CURVE_SEGMENTS as f64;
            let mut row: BTreeMap<usize, f64> = BTreeMap::new();
            for seg in 0..CURVE_SEGMENTS {
                let sm = cc + ds * (seg as f64 + 0.5);
                let p = curve.point(sm);
                // Points on the open-domain boundary locate to None and
                // carry no admissible mass; interior sampling never hits
                // this for the generated families.
                if let Some([s, d1, d2]) = fol.locate(&p) {
                    let dl = curve.speed(sm) * ds;
                    *row.entry(cell_of(s, d1, d2)).or_insert(0.0) += dl;
                }
            }
            if row.is_empty() {
                return Err(Error::InvalidParameters(format!(
                    "curve {ci} never enters the foliated domain"
                )));
            }
            rows.push(row.into_iter().collect());
        }
        Ok(ModulusProblem {
            weights,
            rows,
            grid: [grid_s, grid_delta, grid_delta],
            init,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.weights.len()
    }

    pub fn n_curves(&self) -> usize {
        self.rows.len()
    }

    pub fn grid(&self) -> [usize; 3] {
        self.grid
    }

    fn objective(&self, rho: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(rho)
            .map(|(w, r)| w * r * r * r * r)
            .sum()
    }

    fn row_value(&self, row: &[(usize, f64)], rho: &[f64]) -> f64 {
        row.iter().map(|(c, dl)| rho[*c] * dl).sum()
    }

    fn min_row(&self, rho: &[f64]) -> (usize, f64) {
        let mut min = (0, f64::INFINITY);
        for (j, row) in self.rows.iter().enumerate() {
            let v = self.row_value(row, rho);
            if v < min.1 {
                min = (j, v);
            }
        }
        min
    }
}

/// Solved discrete modulus. `density` is certified feasible: it has been
/// rescaled so the slackest constraint holds with equality, which makes
/// `value` a true upper bound for the discrete program.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusResult {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub max_violation: f64,
    pub grid: [usize; 3],
    pub n_curves: usize,
    #[serde(skip)]
    pub density: Vec<f64>,
}

/// Projected subgradient solve of the discrete program.
///
/// Alternates Polyak steps: when the iterate violates a constraint, step
/// toward the most violated one; when feasible, step down the objective
/// gradient against a decaying target below the best feasible value seen.
/// Every iterate is also rescaled onto the feasible boundary and the best
/// rescaled objective is tracked; that density is what gets returned, so
/// feasibility never depends on convergence.
pub fn discrete_modulus(problem: &ModulusProblem) -> ModulusResult {
    let mut rho = problem.init.clone();
    let (_, start_min) = problem.min_row(&rho);
    if start_min > 0.0 {
        for r in &mut rho {
            *r /= start_min;
        }
    }
    let mut best = rho.clone();
    let mut best_obj = problem.objective(&best);
    let mut window_anchor = best_obj;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..MAX_ITERATIONS {
        iterations = it + 1;
        let (jmin, vmin) = problem.min_row(&rho);
        if vmin < 1.0 - 1e-12 {
            // Feasibility step toward the most violated constraint.
            let row = &problem.rows[jmin];
            let norm2: f64 = row.iter().map(|(_, dl)| dl * dl).sum();
            let step = (1.0 - vmin) / norm2;
            for (cell, dl) in row {
                rho[*cell] += step * dl;
            }
        } else {
            // Objective step with a Polyak target just below the best
            // feasible objective; the gap shrinks as iterations pass.
            let kappa = 0.05 / (1.0 + it as f64 / 500.0);
            let obj = problem.objective(&rho);
            let target = best_obj * (1.0 - kappa);
            let excess = obj - target;
            if excess > 0.0 {
                let grad = |w: f64, r: f64| 4.0 * w * r * r * r;
                let gnorm2: f64 = problem
                    .weights
                    .iter()
                    .zip(&rho)
                    .map(|(w, r)| grad(*w, *r).powi(2))
                    .sum();
                if gnorm2 > 0.0 {
                    let step = excess / gnorm2;
                    for (r, w) in rho.iter_mut().zip(&problem.weights) {
                        *r = (*r - step * grad(*w, *r)).max(0.0);
                    }
                }
            }
        }
        // Track the best feasible rescaling of the current iterate.
        let (_, vmin) = problem.min_row(&rho);
        if vmin > 0.0 {
            let cand = problem.objective(&rho) / vmin.powi(4);
            if cand < best_obj {
                best_obj = cand;
                best.copy_from_slice(&rho);
                let inv = 1.0 / vmin;
                for r in &mut best {
                    *r *= inv;
                }
            }
        }
        if (it + 1) % CONVERGENCE_WINDOW == 0 {
            if window_anchor - best_obj <= CONVERGENCE_REL * best_obj {
                converged = true;
                break;
            }
            window_anchor = best_obj;
        }
    }

    // Final tightening: scale so the slackest constraint is exactly active.
    let (_, vmin) = problem.min_row(&best);
    if vmin > 0.0 && vmin != 1.0 {
        let inv = 1.0 / vmin;
        for r in &mut best {
            *r *= inv;
        }
    }
    let (_, vfinal) = problem.min_row(&best);
    let max_violation = (1.0 - vfinal).max(0.0);
    ModulusResult {
        value: problem.objective(&best),
        converged: converged && max_violation <= CERTIFICATE_TOL,
        iterations,
        max_violation,
        grid: problem.grid,
        n_curves: problem.n_curves(),
        density: best,
    }
}

/// Mean distortion functional `int K^2(p, f) rho^4(p) dmu` over the
/// foliated domain, by adaptive tensor quadrature in foliation coordinates
/// where the measure splits exactly.
pub fn mean_distortion(f: &MapUnderTest, rho: &Density, fol: &Foliation) -> Result<f64> {
    // Catch non-quasiconformal maps on a coarse lattice before quadrature
    // starts sampling unrecoverably.
    let (c, d) = fol.s_range();
    let [r1, r2] = fol.delta_range();
    for i in 0..4 {
        for j in 0..4 {
            for l in 0..4 {
                let p = fol.point_at(
                    c + (d - c) * (i as f64 + 0.5) / 4.0,
                    r1.0 + (r1.1 - r1.0) * (j as f64 + 0.5) / 4.0,
                    r2.0 + (r2.1 - r2.0) * (l as f64 + 0.5) / 4.0,
                );
                f.distortion(&p)?;
            }
        }
    }
    let result = quad::integrate3d((c, d), r1, r2, |s, d1, d2| {
        let p = fol.point_at(s, d1, d2);
        let k = f
            .distortion(&p)
            .expect("map degenerated between lattice gate and quadrature");
        let r = rho.value(&p);
        k * k * r.powi(4) * fol.speed_at(s, d1, d2).powi(4) * fol.nu_density(d1, d2)
    });
    Ok(result.value)
}

/// Sampling resolution for the MSP and fiber-constancy gates.
const GATE_DELTAS: usize = 5;
const GATE_S_SAMPLES: usize = 7;
/// Absolute ceiling for the imaginary part of the MSP indicator.
const MSP_IMAG_TOL: f64 = 1e-10;
/// Relative spread ceiling for distortion along a fiber.
const FIBER_CONSTANCY_TOL: f64 = 1e-8;

/// Modulus of the image family `f(Gamma_0)` through the fiberwise
/// distortion integral `(d - c)^-3 int K^2(delta) dnu(delta)`.
///
/// The formula is only valid when the map stretches the fibers minimally
/// (MSP) and the distortion is constant along each fiber, so both
/// hypotheses are re-verified on a sample of fibers first.
pub fn image_family_modulus(f: &MapUnderTest, fol: &Foliation) -> Result<f64> {
    let (c, d) = fol.s_range();
    let [r1, r2] = fol.delta_range();
    for j in 0..GATE_DELTAS {
        let d1 = r1.0 + (r1.1 - r1.0) * (j as f64 + 0.5) / GATE_DELTAS as f64;
        for l in 0..GATE_DELTAS {
            let d2 = r2.0 + (r2.1 - r2.0) * (l as f64 + 0.5) / GATE_DELTAS as f64;
            let fiber = fol.fiber(d1, d2);
            let mut k_min = f64::INFINITY;
            let mut k_max = f64::NEG_INFINITY;
            for i in 0..GATE_S_SAMPLES {
                let s = c + (d - c) * (i as f64 + 0.5) / GATE_S_SAMPLES as f64;
                let ind = f.msp_indicator(&fiber, s)?;
                // MSP: real and nonpositive wherever the map is not
                // conformal; conformal points have indicator zero.
                if ind.norm() > 1e-12
                    && (ind.im.abs() > MSP_IMAG_TOL.max(1e-9 * ind.norm()) || ind.re > 0.0)
                {
                    return Err(Error::MspViolated(d1, d2));
                }
                let k = f.distortion(&fiber.point(s))?;
                k_min = k_min.min(k);
                k_max = k_max.max(k);
            }
            let spread = (k_max - k_min) / k_max.max(1.0);
            if spread > FIBER_CONSTANCY_TOL {
                return Err(Error::DistortionNotFiberConstant(spread));
            }
        }
    }
    let mid = 0.5 * (c + d);
    let result = quad::integrate2d(r1, r2, |d1, d2| {
        let k = f
            .distortion(&fol.point_at(mid, d1, d2))
            .expect("distortion gated above");
        k * k * fol.nu_density(d1, d2)
    });
    Ok(result.value / fol.s_len().powi(3))
}

/// Two-sided modulus quasi-invariance record:
/// `K_f^-2 Mod(Gamma) <= Mod(f Gamma) <= K_f^2 Mod(Gamma)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuasiInvariance {
    pub k_f: f64,
    pub mod_gamma: f64,
    pub mod_image: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_slack: f64,
    pub upper_slack: f64,
    pub pass: bool,
}

/// Checks the quasi-invariance sandwich with a `1e-9` relative slack.
/// `k_f` is the maximal distortion of the map on the domain.
pub fn quasi_invariance_check(k_f: f64, mod_gamma: f64, mod_image: f64) -> QuasiInvariance {
    let lower = mod_gamma / (k_f * k_f);
    let upper = mod_gamma * k_f * k_f;
    let slack = 1e-9 * upper.abs().max(1.0);
    QuasiInvariance {
        k_f,
        mod_gamma,
        mod_image,
        lower,
        upper,
        lower_slack: mod_image - lower,
        upper_slack: upper - mod_image,
        pass: mod_image >= lower - slack && mod_image <= upper + slack,
    }
}
