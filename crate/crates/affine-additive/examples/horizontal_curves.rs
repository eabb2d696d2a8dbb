//! Horizontal curves: lifting, speed, length and line integrals.
//!
//! A curve is horizontal when its velocity kills the contact form. In the
//! Cartesian chart that pins the a component to a' = t' / (2 lambda); in
//! the log-cylindrical chart to a' = psi'/2 + (tan psi / 2) xi'.

use affine_additive::curves::{Density, HorizontalCurve};
use std::f64::consts::FRAC_PI_4;

fn main() -> affine_additive::Result<()> {
    // A vertical segment in the half plane: t moves at fixed lambda and
    // the a component compensates.
    let lam = 2.0;
    let fiber = HorizontalCurve::new_cartesian((0.0, 1.0), move |s| [s / (2.0 * lam), lam, s]);
    fiber.validate_horizontal(64)?;
    println!(
        "segment: speed = {:.6}, length = {:.6} (both 1/(2 lambda) = {:.6})",
        fiber.speed(0.5),
        fiber.horizontal_length()?,
        1.0 / (2.0 * lam)
    );

    // An angular arc at fixed radius in the log-cylindrical chart.
    let arc = HorizontalCurve::new_logcyl((-FRAC_PI_4, FRAC_PI_4), |s| [0.5 * s, 0.3, s]);
    arc.validate_horizontal(64)?;
    println!(
        "arc:     length = {:.10}, closed form atanh(sin psi0) = {:.10}",
        arc.horizontal_length()?,
        FRAC_PI_4.sin().atanh()
    );

    // Line integral of a density against the sub-Riemannian arc length.
    let rho = Density::new(|p| 1.0 / (2.0 * p.lambda()));
    println!("segment line integral of 1/(2 lambda) = {:.10}", fiber.line_integral(&rho)?);
    Ok(())
}
