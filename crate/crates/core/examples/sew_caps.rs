//! Sew caps onto the four-punctured sphere `(0, 1, ∞, 2+i)`, once with the
//! analytic boundary and once with a sin-reparametrized fourth boundary.

use num_complex::Complex64 as C64;
use teichlab::extension::{CircleHomeo, ExtensionMethod};
use teichlab::schiffer::cross_ratio;
use teichlab::sewing::{sew_caps, BorderedSphereData, SewOptions};
use teichlab::sphere::PuncturedSphere;
use teichlab::surfaces::RiggedSphere;

fn main() -> teichlab::Result<()> {
    let rigged = RiggedSphere::standard(PuncturedSphere::normalized_with(&[C64::new(2.0, 1.0)])?, 0.6)?;
    let analytic = sew_caps(&BorderedSphereData::from_rigged(&rigged), &SewOptions::default())?;
    println!("analytic boundary: lambda = {}", cross_ratio(&analytic.sphere.base)?);

    for amplitude in [0.05, 0.1, 0.2] {
        let mut data = BorderedSphereData::from_rigged(&rigged);
        data.method = ExtensionMethod::DouadyEarle;
        data.boundaries[3].gamma = CircleHomeo::sin(amplitude, 2);
        let out = sew_caps(&data, &SewOptions::default())?;
        println!(
            "sin amplitude {amplitude}: lambda = {:.9}, sup mu = {:.3}, boundary error {:.1e}, antiholomorphic {:.1e}",
            cross_ratio(&out.sphere.base)?,
            out.report.sup_mu,
            out.report.caps[3].boundary_error,
            out.report.max_antiholomorphic()
        );
    }
    Ok(())
}
