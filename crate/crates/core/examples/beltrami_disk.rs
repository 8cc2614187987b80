//! Solve the Beltrami equation for a constant dilatation on the unit disk and
//! compare with the closed-form solution.

use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use teichlab::beltrami::{profile_from_primitives, solve_beltrami, BeltramiCoefficient, MuPrimitive, DEFAULT_SUPERSAMPLE};
use teichlab::grid::ComplexGrid;

fn main() -> teichlab::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(256);
    let k = 0.3;
    let t = Instant::now();
    let grid = ComplexGrid::new(C64::new(0.0, 0.0), 4.0, n)?;
    let profile = profile_from_primitives(&[MuPrimitive::ConstantDisk { center: [0.0, 0.0], radius: 1.0, amplitude: [k, 0.0] }]);
    let mu = BeltramiCoefficient::from_profile(grid, profile, DEFAULT_SUPERSAMPLE)?;
    let w = solve_beltrami(&mu, 1e-12)?;
    let solve_time = t.elapsed();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let (z, exact) = if i < 25 {
            let z = C64::from_polar(rng.gen_range(0.01f64..0.81).sqrt(), theta);
            (z, (z + k * z.conj()) / (1.0 + k))
        } else {
            let z = C64::from_polar(rng.gen_range(1.15..3.5), theta);
            (z, (z + k / z) / (1.0 + k))
        };
        worst = worst.max((w.eval(z) - exact).norm() / exact.norm());
    }
    println!("N = {n}: iterations {}, solve {:.2?}, total {:.2?}", w.stats().iterations, solve_time, t.elapsed());
    println!("max relative error over 50 probes: {worst:.3e}");
    Ok(())
}
