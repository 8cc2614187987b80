//! `Λ ∘ 𝒫⁻¹ ∘ L` on a rigging produced by sewing a perturbed boundary.

use num_complex::Complex64 as C64;
use teichlab::extension::{CircleHomeo, ExtensionMethod};
use teichlab::fibration::{bordered_representative, fiber_l, lambda, BorderedPoint, FiberId};
use teichlab::sewing::{sew_caps, BorderedSphereData, SewOptions};
use teichlab::sphere::PuncturedSphere;
use teichlab::surfaces::RiggedSphere;

fn main() -> teichlab::Result<()> {
    let round = RiggedSphere::standard(PuncturedSphere::normalized_with(&[C64::new(2.0, 1.0)])?, 0.5)?;
    let mut src = BorderedSphereData::from_rigged(&round);
    src.method = ExtensionMethod::DouadyEarle;
    src.boundaries[3].gamma = CircleHomeo::sin(0.1, 1);
    let phi = sew_caps(&src, &SewOptions::default())?.sphere;
    let fid = FiberId::new(phi.base.clone())?;
    let point = fiber_l(&fid, &phi.caps)?;

    let twists = [C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.12, -0.05)];
    for n in [128, 256, 512] {
        let b = BorderedPoint::sew(bordered_representative(point.rigging(), &twists)?, &SewOptions::new(n, 1e-11))?;
        let back = RiggedSphere::new(fid.sphere().clone(), lambda(&b, &fid, 1e-3)?)?;
        println!(
            "N = {n}: sup mu {:.3}, fiber gap {:.1e}, boundary sup error {:.2e}",
            b.report().sup_mu,
            b.sewn().sphere.base.distance(fid.sphere()),
            back.boundary_distance(point.rigging(), 512)
        );
    }
    Ok(())
}
