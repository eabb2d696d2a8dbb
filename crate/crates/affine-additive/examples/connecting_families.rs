//! Sampled families of horizontal connecting curves, and admissibility of
//! the extremal density against them.

use affine_additive::modulus::{check_admissibility, extremal_density_modulus};
use affine_additive::stretch::{make_scenario, sample_connecting_family, ScenarioKind};
use std::f64::consts::{E, FRAC_PI_4};

fn main() -> affine_additive::Result<()> {
    let sc = make_scenario(ScenarioKind::Radial, 0.5, E, FRAC_PI_4)?;
    let (rho0, modulus) = extremal_density_modulus(sc.foliation())?;

    // Perturbed horizontal curves joining the two boundary faces. The
    // fibers realize the minimum of the rho0 line integral; every
    // competitor integrates to at least the same value.
    let family = sample_connecting_family(&sc, 60, 0.6, 13)?;
    let report = check_admissibility(&rho0, &family)?;
    println!("family size  = {}", report.n_curves);
    println!(
        "min integral = {:.12} at curve {}",
        report.min_integral, report.argmin
    );
    println!("admissible   = {}", report.pass);
    println!("modulus      = {:.12}", modulus);
    Ok(())
}
