//! FFT Cauchy transform of the unit-disk indicator against `z̄` and `1/z`.

use num_complex::Complex64 as C64;
use teichlab::grid::{ComplexField, ComplexGrid};
use teichlab::transforms::cauchy_transform;

fn main() -> teichlab::Result<()> {
    for n in [64, 128, 256, 512] {
        let grid = ComplexGrid::new(C64::new(0.0, 0.0), 2.0, n)?;
        let h = grid.spacing();
        // cell-averaged indicator
        let ind = ComplexField::from_fn(grid, |z| {
            let s = 8;
            let hits = (0..s * s)
                .filter(|k| {
                    let p = z + C64::new(((k % s) as f64 + 0.5) / s as f64 - 0.5, ((k / s) as f64 + 0.5) / s as f64 - 0.5) * h;
                    p.norm_sqr() < 1.0
                })
                .count();
            C64::new(hits as f64 / (s * s) as f64, 0.0)
        });
        let c = cauchy_transform(&ind)?;
        let (mut inside, mut outside) = (0.0f64, 0.0f64);
        for (z, v) in grid.nodes().zip(c.values()) {
            match z.norm() {
                r if r <= 0.8 => inside = inside.max((v - z.conj()).norm()),
                r if (1.2..=1.9).contains(&r) => outside = outside.max((v - 1.0 / z).norm()),
                _ => {}
            }
        }
        println!("N = {n:>3}: max error inside {inside:.2e}, outside {outside:.2e}");
    }
    Ok(())
}
