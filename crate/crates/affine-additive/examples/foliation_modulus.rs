//! Closed-form 4-moduli of the three scenario families against quadrature.
//!
//! Each scenario foliates its domain by horizontal curves; the extremal
//! density is the inverse fiber speed scaled by the fiber length, and its
//! energy integral is the modulus.

use affine_additive::modulus::extremal_density_modulus;
use affine_additive::stretch::{make_scenario, ScenarioKind};
use std::f64::consts::{E, FRAC_PI_4};

fn main() -> affine_additive::Result<()> {
    for (kind, k) in [
        (ScenarioKind::LinearLt1, 0.5),
        (ScenarioKind::LinearGt1, 3.0),
        (ScenarioKind::Radial, 0.5),
    ] {
        let sc = make_scenario(kind, k, E, FRAC_PI_4)?;
        let (_, modulus) = extremal_density_modulus(sc.foliation())?;
        let closed = sc.modulus_closed_form();
        println!(
            "{:10}  quadrature = {:.12}  closed form = {:.12}  rel gap = {:.1e}",
            sc.kind().name(),
            modulus,
            closed,
            (modulus - closed).abs() / closed
        );
    }
    Ok(())
}
