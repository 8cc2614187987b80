//! Pre-Schwarzian coordinates of the Koebe function and a point evaluation
//! along a complex line through them.

use num_complex::Complex64 as C64;
use teichlab::oqc::{chi, chi_inverse, point_evaluation, schwarz_report, OqcFunction, DEFAULT_ORDER};
use teichlab::schiffer::holomorphy_residual;
use teichlab::series::Series;

fn main() -> teichlab::Result<()> {
    let f = OqcFunction::koebe(DEFAULT_ORDER)?;
    let x = chi(&f)?;
    println!("koebe: ||A(f)|| = {:.4}, f'(0) = {}", x.norm, x.c);

    let g = chi_inverse(&x)?;
    let worst = (0..=90)
        .flat_map(|i| (0..256).map(move |j| C64::from_polar(0.9 * i as f64 / 90.0, std::f64::consts::TAU * j as f64 / 256.0)))
        .map(|z| (g.eval(z) - f.eval(z)).norm())
        .fold(0.0, f64::max);
    println!("chi roundtrip sup error on |z| <= 0.9: {worst:.2e}");

    let dir = Series::from_fn(DEFAULT_ORDER, |k| if k == 2 { C64::new(0.2, 0.3) } else { C64::new(0.0, 0.0) });
    let line = |t: C64| -> teichlab::Result<Vec<C64>> {
        let psi = chi_inverse(&x.along_line(&dir, C64::new(0.3, 0.0), t))?;
        Ok(vec![point_evaluation(&psi, C64::new(0.3, 0.0))?])
    };
    for h in [1e-2, 1e-3, 1e-4] {
        println!("CR residual of t -> psi_t(0.3), h = {h:.0e}: {:.2e}", holomorphy_residual(line, C64::new(0.05, 0.02), h)?);
    }

    let disk = OqcFunction::quadratic(C64::new(0.25, 0.0), DEFAULT_ORDER)?;
    let half: Vec<C64> = disk.coeffs().iter().map(|a| a * 0.5).collect();
    let r = schwarz_report(&OqcFunction::new(half)?)?;
    println!("(z + z^2/4)/2: |psi'(0)| = {:.3}, ||A|| = {:.4}, pointwise = {:.4}", r.derivative, r.norm, r.pointwise);
    Ok(())
}
