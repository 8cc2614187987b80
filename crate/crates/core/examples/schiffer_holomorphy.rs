//! Schiffer variation of the four-punctured sphere `(0, 1, ∞, 2+i)` through a
//! round cell at 4, and the Cauchy-Riemann residual of `ε ↦ λ(ε)`.

use std::time::Instant;

use num_complex::Complex64 as C64;
use teichlab::schiffer::{cross_ratio, holomorphy_residual, schiffer_variation_s, SchifferCell, SchifferOptions, SchifferParams};
use teichlab::sphere::PuncturedSphere;

fn main() -> teichlab::Result<()> {
    let base = PuncturedSphere::normalized_with(&[C64::new(2.0, 1.0)])?;
    let cells = SchifferParams::zero(vec![SchifferCell::round(C64::new(4.0, 0.0), 0.5)?])?;
    let e0 = C64::new(0.1, 0.0);
    println!("{:>6} {:>8} {:>24} {:>12} {:>8}", "N", "h", "lambda(e0)", "residual", "secs");
    for n in [256, 512] {
        let opts = SchifferOptions::new(n, 1e-12);
        let lambda = |e: C64| -> teichlab::Result<Vec<C64>> {
            let s = schiffer_variation_s(&base, &cells.with_epsilon(vec![e])?, &opts)?;
            Ok(vec![cross_ratio(&s)?])
        };
        let l0 = lambda(e0)?[0];
        for h in [1e-2, 1e-3] {
            let t = Instant::now();
            let r = holomorphy_residual(&lambda, e0, h)?;
            println!("{n:>6} {h:>8.0e} {:>24.12} {r:>12.3e} {:>8.2}", l0, t.elapsed().as_secs_f64());
        }
    }
    let calib = holomorphy_residual(|e| Ok(vec![e.conj()]), e0, 1e-3)?;
    println!("anti-holomorphic calibration: {calib}");
    Ok(())
}
