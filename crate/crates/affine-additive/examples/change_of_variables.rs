//! Change of variables under the radial stretch: integrating a bump over
//! the source domain against the map Jacobian matches integrating its
//! pushforward over the image domain.

use affine_additive::verify::change_of_variables_residual;
use std::f64::consts::{E, FRAC_PI_3, FRAC_PI_4};

fn main() -> affine_additive::Result<()> {
    for (k, r0, psi0) in [
        (0.5, E, FRAC_PI_4),
        (0.5, E, FRAC_PI_3),
        (0.8, 2.0, FRAC_PI_4),
    ] {
        let residual = change_of_variables_residual(k, r0, psi0)?;
        println!("k = {k:.1}, r0 = {r0:.4}, psi0 = {psi0:.4}: relative residual = {residual:.2e}");
    }
    Ok(())
}
