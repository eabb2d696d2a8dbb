//! Extremality reports: the stretch maps minimize mean distortion among
//! quasiconformal maps with the same boundary behavior, and the report
//! checks every numerical ingredient of that statement.

use affine_additive::report::to_json_string;
use affine_additive::stretch::ScenarioKind;
use affine_additive::verify::{verify_linear, verify_radial, Tolerances};
use std::f64::consts::{E, FRAC_PI_4};

fn main() -> affine_additive::Result<()> {
    let tols = Tolerances::fast();

    let lin = verify_linear(3.0, ScenarioKind::LinearGt1, &tols)?;
    println!(
        "linear k=3:   mod_gamma0 = {:.6}, mod_image = {:.6}, mean distortion = {:.6}, pass = {}",
        lin.mod_gamma0, lin.mod_image, lin.mean_distortion, lin.pass
    );
    for c in &lin.checks {
        println!("  {:35} {:9.2e} vs {:.1e} ({})", c.name, c.measured, c.threshold, c.sense);
    }

    let rad = verify_radial(0.5, E, FRAC_PI_4, &tols)?;
    println!("\nradial k=1/2 as JSON:\n{}", to_json_string(&rad));
    Ok(())
}
