//! Group arithmetic, the contact form and the two charts.

use affine_additive::group::{contact_form, horizontal_norm, Point};

fn main() -> affine_additive::Result<()> {
    let p = Point::new(0.3, 2.0, -1.0)?;
    let q = Point::new(-0.1, 0.5, 0.7)?;

    let pq = p.mul(&q);
    println!(
        "p * q          = ({:+.4}, {:.4}, {:+.4})",
        pq.a(),
        pq.lambda(),
        pq.t()
    );
    let e = p.mul(&p.inverse());
    println!(
        "p * p^-1       = ({:+.1e}, {:.1}, {:+.1e})",
        e.a(),
        e.lambda(),
        e.t()
    );

    // U and V span the horizontal plane: theta vanishes on both and they
    // are unit vectors for the sub-Riemannian norm.
    let f = p.frame();
    println!(
        "theta(U), theta(V) = {:+.3e}, {:+.3e}",
        contact_form(&p, &f.u),
        contact_form(&p, &f.v)
    );
    println!(
        "|U|_H, |V|_H       = {:.4}, {:.4}",
        horizontal_norm(&p, &f.u)?,
        horizontal_norm(&p, &f.v)?
    );

    // Log-cylindrical chart: lambda + i t = exp(xi + i psi), |psi| < pi/2.
    let lc = p.to_logcyl();
    let back = lc.to_cartesian();
    let gap = (back.a() - p.a())
        .abs()
        .max((back.lambda() - p.lambda()).abs())
        .max((back.t() - p.t()).abs());
    println!(
        "logcyl(p)      = ({:+.4}, {:+.4}, {:+.4}), round trip gap {:.1e}",
        lc.a(),
        lc.xi(),
        lc.psi(),
        gap
    );
    println!(
        "haar density   = {:.6} (1/lambda^2 = {:.6})",
        p.haar_density(),
        1.0 / (p.lambda() * p.lambda())
    );
    Ok(())
}
