//! Acceptance gate: eleven end-to-end criteria, one test each, printing a
//! single PASS or FAIL line per criterion. Tolerances are part of the
//! contract and are not to be loosened here.

// `ensure!` negates its condition, so NaN anywhere lands in the FAIL arm.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use affine_additive::group::Point;
use affine_additive::modulus::{
    check_admissibility, discrete_modulus, extremal_density_modulus, image_family_modulus,
    mean_distortion, ModulusProblem,
};
use affine_additive::stretch::{
    f_minus_one, linear_stretch, make_scenario, radial_stretch, sample_connecting_family,
    Scenario, ScenarioKind,
};
use affine_additive::verify::{change_of_variables_residual, open_question_report};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::f64::consts::{E, FRAC_PI_3, FRAC_PI_4, PI};
use std::time::Instant;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

fn criterion(name: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("PASS {name}"),
        Err(why) => {
            println!("FAIL {name}: {why}");
            panic!("{name}: {why}");
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn lt1() -> Scenario {
    make_scenario(ScenarioKind::LinearLt1, 0.5, E, FRAC_PI_4).unwrap()
}

fn gt1() -> Scenario {
    make_scenario(ScenarioKind::LinearGt1, 3.0, E, FRAC_PI_4).unwrap()
}

fn radial_pi4() -> Scenario {
    make_scenario(ScenarioKind::Radial, 0.5, E, FRAC_PI_4).unwrap()
}

fn random_points(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Point::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(-2.0..2.0),
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn c01_contracting_linear_family_modulus() {
    criterion("modulus of the contracting linear family", || {
        let start = Instant::now();
        let sc = lt1();
        let closed = sc.modulus_closed_form();
        ensure!(closed == 14.0 / 3.0, "closed form is not the literal 14/3");
        let (_, quad) = extremal_density_modulus(sc.foliation()).map_err(|e| e.to_string())?;
        ensure!(
            rel(quad, closed) <= 1e-10,
            "quadrature {quad:.12e} vs closed form {closed:.12e}"
        );
        let problem =
            ModulusProblem::from_scenario(&sc, 32, 500, 0.3, 29).map_err(|e| e.to_string())?;
        let sol = discrete_modulus(&problem);
        ensure!(
            sol.max_violation <= 1e-9,
            "feasibility certificate violated: {:.2e}",
            sol.max_violation
        );
        ensure!(
            rel(sol.value, closed) <= 0.05,
            "discrete {:.6} vs closed form {closed:.6} off by {:.2}%",
            sol.value,
            100.0 * rel(sol.value, closed)
        );
        let elapsed = start.elapsed();
        ensure!(
            elapsed.as_secs_f64() < 60.0,
            "took {:.1}s, budget 60s",
            elapsed.as_secs_f64()
        );
        Ok(())
    });
}

#[test]
fn c02_expanding_linear_family_modulus() {
    criterion("modulus of the expanding linear family", || {
        let sc = gt1();
        let closed = sc.modulus_closed_form();
        let (_, quad) = extremal_density_modulus(sc.foliation()).map_err(|e| e.to_string())?;
        ensure!(
            rel(quad, closed) <= 1e-10,
            "quadrature {quad:.12e} vs closed form {closed:.12e}"
        );
        let problem =
            ModulusProblem::from_scenario(&sc, 32, 500, 0.3, 31).map_err(|e| e.to_string())?;
        let sol = discrete_modulus(&problem);
        ensure!(
            sol.max_violation <= 1e-9,
            "feasibility certificate violated: {:.2e}",
            sol.max_violation
        );
        ensure!(
            rel(sol.value, closed) <= 0.05,
            "discrete {:.6} vs closed form {closed:.6} off by {:.2}%",
            sol.value,
            100.0 * rel(sol.value, closed)
        );
        // Reference value for this family: 2^5 / (3^3 (2^(1/3) - 1)),
        // about 4.5598. Three independent routes above (closed form,
        // adaptive quadrature, discrete solve) agree on
        // 32 / (27 (2^(1/3) - 1)^3), about 67.4933, which is the same
        // expression with the cube restored on (2^(1/3) - 1). The
        // assertion keeps the reference value and fails until the
        // discrepancy is resolved; do not silence it by editing the
        // expected constant.
        let reference = 32.0 / (27.0 * (2.0f64.cbrt() - 1.0));
        ensure!(
            rel(quad, reference) <= 1e-10,
            "quadrature {quad:.6} vs reference constant {reference:.6}; \
             the reference drops the cube on (2^(1/3) - 1)"
        );
        Ok(())
    });
}

#[test]
fn c03_radial_family_modulus() {
    criterion("modulus of the radial family", || {
        let sc = radial_pi4();
        let closed = sc.modulus_closed_form();
        let (_, quad) = extremal_density_modulus(sc.foliation()).map_err(|e| e.to_string())?;
        ensure!(
            rel(quad, closed) <= 1e-10,
            "quadrature {quad:.12e} vs closed form {closed:.12e}"
        );
        let reference = 2.0 * PI + 4.0;
        ensure!(
            rel(quad, reference) <= 1e-10,
            "quadrature {quad:.12e} vs 2 pi + 4 = {reference:.12e}"
        );
        Ok(())
    });
}

#[test]
fn c04_finite_differences_reproduce_the_beltrami_closed_forms() {
    criterion("finite-difference Beltrami coefficients", || {
        let points = random_points(1000, 41);
        for k in [0.5, 3.0] {
            let map = linear_stretch(k).map_err(|e| e.to_string())?;
            let mu_want = (1.0 - k) / (1.0 + k);
            let k_want = (1.0 / k).max(k);
            for p in &points {
                let rec = map.fd_derivatives(p);
                let mu = rec.zbar / rec.z;
                ensure!(
                    (mu.re - mu_want).abs() <= 1e-6 * mu_want.abs()
                        && mu.im.abs() <= 1e-6 * mu_want.abs(),
                    "linear k = {k}: mu {mu} vs {mu_want} at ({}, {}, {})",
                    p.a(),
                    p.lambda(),
                    p.t()
                );
                let kk = (1.0 + mu.norm()) / (1.0 - mu.norm());
                ensure!(
                    rel(kk, k_want) <= 1e-6,
                    "linear k = {k}: distortion {kk} vs {k_want}"
                );
            }
        }
        let k = 0.5;
        let map = radial_stretch(k).map_err(|e| e.to_string())?;
        for p in &points {
            let psi = (p.t() / p.lambda()).atan();
            let tan2 = psi.tan() * psi.tan();
            let scale = (k * k - 1.0) / (k * k + 2.0 * tan2 + 1.0);
            let phase = num_complex::Complex64::from_polar(1.0, 2.0 * psi);
            let mu_want = scale * phase;
            let rec = map.fd_derivatives(p);
            let mu = rec.zbar / rec.z;
            ensure!(
                (mu - mu_want).norm() <= 1e-6 * mu_want.norm(),
                "radial: mu {mu} vs {mu_want} at psi = {psi}"
            );
            let (c, s) = (psi.cos(), psi.sin());
            let k_want = 1.0 / (k * k * c * c + s * s);
            let kk = (1.0 + mu.norm()) / (1.0 - mu.norm());
            ensure!(
                rel(kk, k_want) <= 1e-6,
                "radial: distortion {kk} vs {k_want} at psi = {psi}"
            );
        }
        Ok(())
    });
}

#[test]
fn c05_mean_distortion_equals_the_image_family_modulus() {
    criterion("mean distortion vs image family modulus", || {
        for sc in [lt1(), gt1(), radial_pi4()] {
            let fol = sc.foliation();
            let (rho0, _) = extremal_density_modulus(fol).map_err(|e| e.to_string())?;
            let md = mean_distortion(sc.map(), &rho0, fol).map_err(|e| e.to_string())?;
            let imf = image_family_modulus(sc.map(), fol).map_err(|e| e.to_string())?;
            ensure!(
                rel(md, imf) <= 1e-8,
                "{}: mean distortion {md:.12e} vs image modulus {imf:.12e}",
                sc.kind().name()
            );
            if sc.kind() == ScenarioKind::Radial {
                let reference = 64.0 * (0.4 + 2.0f64.atan());
                ensure!(
                    rel(imf, reference) <= 1e-8,
                    "radial image modulus {imf:.10} vs 64 (2/5 + atan 2) = {reference:.10}"
                );
                let closed = sc.image_modulus_closed_form();
                ensure!(
                    rel(imf, closed) <= 1e-8,
                    "radial image modulus {imf:.10} vs closed form {closed:.10}"
                );
            }
        }
        Ok(())
    });
}

#[test]
fn c06_modulus_ratio_inequality_chain() {
    criterion("modulus ratio inequality chain", || {
        let report = open_question_report(0.5, E, FRAC_PI_3).map_err(|e| e.to_string())?;
        ensure!(
            (report.ratio - 8.4109).abs() <= 5e-4,
            "ratio {:.6} vs 8.4109",
            report.ratio
        );
        let conjectured = 2.0f64.powf(3.5);
        ensure!(
            rel(report.conjectured_bound, conjectured) <= 1e-12
                && report.ratio <= report.conjectured_bound,
            "ratio {:.6} vs bound {:.6}",
            report.ratio,
            report.conjectured_bound
        );
        ensure!(
            report.conjectured_bound < report.invariance_bound
                && rel(report.invariance_bound, 16.0) <= 1e-12,
            "bound chain {:.4} < {:.4} broken",
            report.conjectured_bound,
            report.invariance_bound
        );
        ensure!(
            report.profile_grid.len() == 99 && report.profile_min_forward_difference > 0.0,
            "profile not increasing on the 99-point grid: min forward difference {:.3e}",
            report.profile_min_forward_difference
        );
        Ok(())
    });
}

#[test]
fn c07_contact_residuals_and_the_conformal_involution() {
    criterion("contact residuals and the conformal involution", || {
        let points = random_points(1000, 43);
        let maps = [
            linear_stretch(0.5).map_err(|e| e.to_string())?,
            linear_stretch(3.0).map_err(|e| e.to_string())?,
            radial_stretch(0.5).map_err(|e| e.to_string())?,
            f_minus_one(),
        ];
        for map in &maps {
            for p in &points {
                let res = map.contact_residual(p).max();
                ensure!(
                    res < 1e-8,
                    "{}: contact residual {res:.2e} at ({}, {}, {})",
                    map.name(),
                    p.a(),
                    p.lambda(),
                    p.t()
                );
            }
        }
        let inv = f_minus_one();
        for p in &points {
            let k = inv.distortion(p).map_err(|e| e.to_string())?;
            let sigma = inv.sigma(p);
            ensure!(
                (k - 1.0).abs() <= 1e-9 && (sigma - 1.0).abs() <= 1e-9,
                "involution K = {k:.12}, sigma = {sigma:.12} at ({}, {}, {})",
                p.a(),
                p.lambda(),
                p.t()
            );
        }
        Ok(())
    });
}

#[test]
fn c08_minimal_stretching_on_every_fiber() {
    criterion("minimal stretching on every fiber", || {
        for sc in [lt1(), gt1(), radial_pi4()] {
            let fibers =
                sample_connecting_family(&sc, 25, 0.0, 47).map_err(|e| e.to_string())?;
            let (lo, hi) = sc.foliation().s_range();
            for curve in &fibers {
                for i in 1..=9 {
                    let s = lo + (hi - lo) * i as f64 / 10.0;
                    let ind = sc
                        .map()
                        .msp_indicator(curve, s)
                        .map_err(|e| e.to_string())?;
                    ensure!(
                        ind.re < 0.0 && ind.im.abs() < 1e-10,
                        "{}: indicator {ind} at s = {s}",
                        sc.kind().name()
                    );
                    let push = sc
                        .map()
                        .pushforward_speed(curve, s)
                        .map_err(|e| e.to_string())?;
                    ensure!(
                        (push.value - push.lower).abs() <= 1e-9 * push.value.max(1.0),
                        "{}: pushforward speed {:.12e} vs lower bound {:.12e}",
                        sc.kind().name(),
                        push.value,
                        push.lower
                    );
                }
            }
        }
        Ok(())
    });
}

#[test]
fn c09_extremal_density_is_admissible_on_random_competitors() {
    criterion("admissibility over randomized connecting curves", || {
        for sc in [lt1(), gt1(), radial_pi4()] {
            let (rho0, _) =
                extremal_density_modulus(sc.foliation()).map_err(|e| e.to_string())?;
            let family =
                sample_connecting_family(&sc, 1000, 0.6, 53).map_err(|e| e.to_string())?;
            let report = check_admissibility(&rho0, &family).map_err(|e| e.to_string())?;
            ensure!(
                report.n_curves == 1000 && report.min_integral >= 1.0 - 1e-8,
                "{}: min integral {:.12} at curve {}",
                sc.kind().name(),
                report.min_integral,
                report.argmin
            );
        }
        Ok(())
    });
}

#[test]
fn c10_change_of_variables_under_the_radial_stretch() {
    criterion("change of variables under the radial stretch", || {
        let residual = change_of_variables_residual(0.5, E, FRAC_PI_4).map_err(|e| e.to_string())?;
        ensure!(
            residual <= 1e-6,
            "pullback integral vs image integral: relative residual {residual:.2e}"
        );
        Ok(())
    });
}

#[test]
fn c11_discrete_solver_certificates_and_monotonicity() {
    criterion("discrete solver certificates and monotonicity", || {
        let sc = lt1();
        let fibers = sample_connecting_family(&sc, 25, 0.0, 59).map_err(|e| e.to_string())?;
        let mut extended = fibers.clone();
        extended.extend(sample_connecting_family(&sc, 15, 0.5, 61).map_err(|e| e.to_string())?);
        let base = discrete_modulus(
            &ModulusProblem::from_curves(sc.foliation(), 8, 5, &fibers)
                .map_err(|e| e.to_string())?,
        );
        let more = discrete_modulus(
            &ModulusProblem::from_curves(sc.foliation(), 8, 5, &extended)
                .map_err(|e| e.to_string())?,
        );
        ensure!(
            base.max_violation <= 1e-9 && more.max_violation <= 1e-9,
            "feasibility certificates {:.2e}, {:.2e}",
            base.max_violation,
            more.max_violation
        );
        ensure!(
            more.value >= base.value * (1.0 - 1e-9),
            "extending the family dropped the modulus: {:.10} -> {:.10}",
            base.value,
            more.value
        );
        Ok(())
    });
}
