//! Modulus-ratio data for the contracting radial stretch.
//!
//! For k < 1 the ratio Mod(f Gamma) / Mod(Gamma) sits strictly below the
//! quasi-invariance ceiling K^2 = k^-4. Whether the sharp bound is k^-3.5
//! is open; the sweep shows where the ratio lands across k and aperture.

use affine_additive::verify::open_question_report;
use std::f64::consts::{E, FRAC_PI_3};

fn main() -> affine_additive::Result<()> {
    let report = open_question_report(0.5, E, FRAC_PI_3)?;
    println!("k = 1/2, psi0 = pi/3:");
    println!("  mod_gamma        = {:.6}", report.mod_gamma);
    println!("  mod_image        = {:.6}", report.mod_image);
    println!("  ratio            = {:.6}", report.ratio);
    println!("  conjectured k^-3.5 = {:.6}", report.conjectured_bound);
    println!("  invariance  k^-4   = {:.6}", report.invariance_bound);

    println!("\n  k      ratio     k^-3.5");
    for i in (9..report.profile_grid.len()).step_by(10) {
        println!(
            "  {:.2}  {:8.4}  {:8.4}",
            report.profile_grid[i], report.ratio_grid[i], report.bound_grid[i]
        );
    }

    println!("\n  psi0    ratio at k=1/2");
    for i in (9..report.psi0_grid.len()).step_by(20) {
        println!("  {:.3}  {:8.4}", report.psi0_grid[i], report.ratio_by_psi0[i]);
    }
    Ok(())
}
