//! Fiber maps between bordered data, rigged spheres and punctured spheres.
//!
//! `𝒞` sews and forgets the rigging, `𝒫` sews and keeps it, `ℱ` forgets it,
//! `L` pairs a punctured sphere with a rigging and `Λ` reads the rigging off a
//! sewn bordered point. The Schiffer section `η` and the product chart carry
//! caps along a Schiffer deformation.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::beltrami::NormalizedQCMap;
use crate::error::{Error, Result};
use crate::extension::{CircleHomeo, ExtensionMethod};
use crate::schiffer::{schiffer_map, SchifferOptions, SchifferParams, CELL_MARGIN};
use crate::sewing::{sew_caps, BorderedSphereData, BoundaryParam, SewOptions, SewReport, Sewn};
use crate::sphere::{Mobius, PuncturedSphere, SpherePoint};
use crate::surfaces::{default_chart_radii, point_distance, validate_rigging, BoundaryFit, CapMap, Chart, RiggedSphere, DEFAULT_BOUNDARY_SAMPLES};

type C64 = Complex64;
const ZERO: C64 = C64::new(0.0, 0.0);

/// Default tolerance on sewn punctures for fiber membership.
pub const MEMBERSHIP_TOL: f64 = 1e-6;
/// Series order of carried caps.
pub const CARRY_ORDER: usize = 96;

/// A point of the base `T(Σ^P)`: a normalized punctured sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberId {
    sphere: PuncturedSphere,
}

impl FiberId {
    pub fn new(sphere: PuncturedSphere) -> Result<Self> {
        if !sphere.is_normalized() {
            return Err(Error::InvalidSphere("fiber ids are normalized punctured spheres".into()));
        }
        Ok(FiberId { sphere })
    }

    /// Normalizes `sphere` first.
    pub fn normalizing(sphere: &PuncturedSphere) -> Result<Self> {
        FiberId::new(sphere.normalize()?.0)
    }

    pub fn sphere(&self) -> &PuncturedSphere {
        &self.sphere
    }

    /// Largest distance between corresponding punctures.
    pub fn distance(&self, other: &FiberId) -> f64 {
        self.sphere.distance(&other.sphere)
    }
}

/// A punctured sphere with a valid rigging.
#[derive(Clone, Debug, PartialEq)]
pub struct RiggedTeichPoint {
    rigging: RiggedSphere,
}

impl RiggedTeichPoint {
    pub fn new(rigging: RiggedSphere) -> Result<Self> {
        validate_rigging(&rigging)?;
        Ok(RiggedTeichPoint { rigging })
    }

    pub fn base_point(&self) -> &PuncturedSphere {
        &self.rigging.base
    }

    pub fn rigging(&self) -> &RiggedSphere {
        &self.rigging
    }

    pub fn caps(&self) -> &[CapMap] {
        &self.rigging.caps
    }
}

/// Bordered data together with its sewn sphere.
#[derive(Clone)]
pub struct BorderedPoint {
    data: BorderedSphereData,
    sewn: Arc<Sewn>,
}

impl std::fmt::Debug for BorderedPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BorderedPoint").field("data", &self.data).field("target", &self.sewn.sphere).finish()
    }
}

impl BorderedPoint {
    /// Sews `data`; the result is the desk-scale point `[Σ^B, h, Σ₁^B]`.
    pub fn sew(data: BorderedSphereData, opts: &SewOptions) -> Result<Self> {
        let sewn = sew_caps(&data, opts)?;
        Ok(BorderedPoint { data, sewn: Arc::new(sewn) })
    }

    pub fn data(&self) -> &BorderedSphereData {
        &self.data
    }

    /// The sewn sphere with its cap maps.
    pub fn target(&self) -> &RiggedSphere {
        &self.sewn.sphere
    }

    pub fn report(&self) -> &SewReport {
        &self.sewn.report
    }

    pub fn sewn(&self) -> &Sewn {
        &self.sewn
    }

    /// `σ ∘ w ∘ τ_i` at `k` equispaced boundary angles, for each boundary.
    pub fn boundary_data(&self, k: usize) -> Vec<Vec<SpherePoint>> {
        self.data.boundaries.iter().map(|b| b.samples(k).into_iter().map(|p| self.sewn.map.apply(p)).collect()).collect()
    }

    /// Sup-distance between the target caps on `∂𝔻` and the boundary data.
    pub fn boundary_mismatch(&self, k: usize) -> f64 {
        let data = self.boundary_data(k);
        self.target()
            .caps
            .iter()
            .zip(&data)
            .flat_map(|(cap, d)| cap.boundary(k).into_iter().zip(d.iter()).map(|(p, q)| point_distance(&p, q)).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }
}

/// `𝒞`: sew and forget the rigging.
pub fn sewing_map_c(b: &BorderedPoint) -> Result<FiberId> {
    FiberId::new(b.target().base.clone())
}

/// `𝒫`: sew and keep the cap maps as rigging.
pub fn rig_p(b: &BorderedPoint) -> Result<RiggedTeichPoint> {
    RiggedTeichPoint::new(b.target().clone())
}

/// `ℱ`: forget the rigging.
pub fn forget_rigging_f(r: &RiggedTeichPoint) -> Result<FiberId> {
    FiberId::normalizing(r.base_point())
}

/// `L`: pair a fiber point with a rigging of its sphere.
pub fn fiber_l(fid: &FiberId, phi: &[CapMap]) -> Result<RiggedTeichPoint> {
    RiggedTeichPoint::new(RiggedSphere::new(fid.sphere.clone(), phi.to_vec())?)
}

/// `Λ`: the rigging `σ ∘ w^μ ∘ τ̂_i` of a bordered point lying over `fid`.
pub fn lambda(b: &BorderedPoint, fid: &FiberId, tol: f64) -> Result<Vec<CapMap>> {
    let sewn = sewing_map_c(b)?;
    let gap = sewn.distance(fid);
    if !(gap <= tol) {
        return Err(Error::NotInFiber(gap));
    }
    Ok(b.target().caps.clone())
}

/// Bordered data representing `𝒫⁻¹(r)`.
///
/// With all twists zero the boundaries are the caps themselves. A nonzero
/// twist `a_i` writes boundary `i` as `(φ_i ∘ M⁻¹) ∘ M` with `M` the disk
/// automorphism moving `a_i` to 0; the reference cap then sits off the
/// puncture and the radial-stretch extension puts a genuine dilatation on it,
/// which the sewing solve has to undo.
pub fn bordered_representative(r: &RiggedSphere, twists: &[C64]) -> Result<BorderedSphereData> {
    if twists.len() != r.caps.len() {
        return Err(Error::InvalidBoundary(format!("{} twists for {} caps", twists.len(), r.caps.len())));
    }
    if twists.iter().all(|a| *a == ZERO) {
        let b = BorderedSphereData::from_rigged(r);
        b.validate()?;
        return Ok(b);
    }
    let k = DEFAULT_BOUNDARY_SAMPLES;
    let mut ambient = Vec::with_capacity(r.caps.len());
    let mut boundaries = Vec::with_capacity(r.caps.len());
    for (cap, &a) in r.caps.iter().zip(twists) {
        if a == ZERO {
            ambient.push(cap.center());
            boundaries.push(BoundaryParam::analytic(cap.clone()));
            continue;
        }
        let minv = Mobius::disk_automorphism(a, 0.0)?.inverse();
        let samples: Vec<C64> = (0..k).map(|j| cap.local(minv.apply_finite(C64::from_polar(1.0, TAU * j as f64 / k as f64)))).collect();
        let (g, _) = CapMap::from_boundary_samples(cap.chart, &samples, CARRY_ORDER);
        // recenter the chart at the displaced reference puncture
        let g0 = g.series.coeff(0);
        let chart = Chart::from_mobius(Mobius::translation(-g0).compose(cap.chart.mobius()), cap.chart.radius());
        let mut series = g.series;
        series.set(0, ZERO);
        let g = CapMap::new(chart, series);
        ambient.push(g.center());
        boundaries.push(BoundaryParam { cap: g, gamma: CircleHomeo::Mobius { a, rotation: 0.0 } });
    }
    BorderedSphereData::new(PuncturedSphere::new(ambient)?, boundaries, ExtensionMethod::RadialStretch)
}

/// Image of a cap under a map conformal on a neighbourhood of it, refit in the
/// standard chart of radius `chart_radius` at the image puncture.
pub fn carry_cap(cap: &CapMap, f: impl Fn(SpherePoint) -> SpherePoint + Sync, chart_radius: f64) -> Result<(CapMap, BoundaryFit)> {
    let k = DEFAULT_BOUNDARY_SAMPLES;
    let chart = Chart::standard(f(cap.center()), chart_radius);
    let local: Vec<C64> = (0..k)
        .into_par_iter()
        .map(|j| {
            chart
                .apply(f(cap.eval(C64::from_polar(1.0, TAU * j as f64 / k as f64))))
                .as_finite()
                .ok_or_else(|| Error::InvalidRigging("carried cap passes through its chart pole".into()))
        })
        .collect::<Result<_>>()?;
    let (cap, fit) = CapMap::from_boundary_samples(chart, &local, CARRY_ORDER);
    Ok((cap.recentered(), fit))
}

/// Requires every cell to stay [`CELL_MARGIN`] away from every cap.
pub fn check_cells_clear_of_caps(params: &SchifferParams, rigging: &RiggedSphere) -> Result<()> {
    let k = DEFAULT_BOUNDARY_SAMPLES;
    for (i, cap) in rigging.caps.iter().enumerate() {
        let curve: Vec<SpherePoint> = cap.boundary(k);
        let local = cap.local_boundary(k);
        for (j, cell) in params.cells().iter().enumerate() {
            let gap = curve.iter().map(|p| cell.distance_to(*p)).fold(f64::INFINITY, f64::min);
            let swallowed = cap.contains(SpherePoint::Finite(cell.center()), &local);
            if gap < CELL_MARGIN || swallowed {
                return Err(Error::InvalidSchiffer(format!("cell {j} meets cap {i} (gap {gap:.3})")));
            }
        }
    }
    Ok(())
}

/// Carries a rigged sphere along the Schiffer deformation `w^{μ(ε)}`.
fn deform_rigging(rigging: &RiggedSphere, w: Option<&NormalizedQCMap>) -> Result<RiggedSphere> {
    let Some(w) = w else {
        return Ok(rigging.clone());
    };
    let moved: Vec<SpherePoint> = rigging.base.punctures().iter().map(|&p| w.eval_sphere(p)).collect();
    let base = PuncturedSphere::new(moved)?;
    let radii = default_chart_radii(&base);
    let caps = rigging
        .caps
        .iter()
        .zip(&radii)
        .map(|(cap, &r)| carry_cap(cap, |p| w.eval_sphere(p), r).map(|(c, _)| c))
        .collect::<Result<Vec<_>>>()?;
    RiggedSphere::new(base, caps)
}

/// `η(ε)`: the bordered point whose caps are `w^{μ(ε)} ∘ φ_i`.
///
/// Its sewn sphere is `S(ε)`, so `𝒞 ∘ η` is the identity on the Schiffer curve.
pub fn schiffer_section_eta(
    fixed_rigging: &RiggedSphere,
    params: &SchifferParams,
    schiffer: &SchifferOptions,
    sew: &SewOptions,
) -> Result<BorderedPoint> {
    params.check_against(&fixed_rigging.base)?;
    check_cells_clear_of_caps(params, fixed_rigging)?;
    let w = schiffer_map(params, schiffer)?;
    let carried = deform_rigging(fixed_rigging, w.as_ref())?;
    BorderedPoint::sew(BorderedSphereData::from_rigged(&carried), sew)
}

/// `(ε, φ) ↦ [Σ^B, (f_φ)^ε, …]`: fiber coordinate `φ` over `base`, then the
/// Schiffer deformation `ε`.
pub fn product_chart(
    eps: &SchifferParams,
    phi: &[CapMap],
    base: &FiberId,
    schiffer: &SchifferOptions,
    sew: &SewOptions,
) -> Result<BorderedPoint> {
    let point = fiber_l(base, phi)?;
    schiffer_section_eta(point.rigging(), eps, schiffer, sew)
}
