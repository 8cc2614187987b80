//! Sewing caps onto a bordered sphere by solving a Beltrami problem.
//!
//! Each boundary parametrization is `τ = g ∘ γ` with `g` a conformal reference
//! cap and `γ` a circle homeomorphism. With `Ψ` a quasiconformal extension of
//! `γ⁻¹`, the cap map `τ̂ = g ∘ Ψ⁻¹` extends `τ`, and the coefficient that
//! makes `w ∘ τ̂` conformal is `μ(g(u)) = μ_Ψ(u) g'(u)/conj(g'(u))`.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beltrami::{solve_beltrami_with, winding, BeltramiCoefficient, MuProfile, NormalizedQCMap, ProfilePart, SolverOptions, DEFAULT_SUPERSAMPLE};
use crate::error::{Error, Result};
use crate::extension::{extend_quasisymmetric, CapExtension, CircleHomeo, ExtensionMethod};
use crate::series::Series;
use crate::sphere::{Mobius, PuncturedSphere, SpherePoint};
use crate::surfaces::{default_chart_radii, rigging_report, CapMap, Chart, RiggedSphere, DEFAULT_BOUNDARY_SAMPLES};

type C64 = Complex64;
const ZERO: C64 = C64::new(0.0, 0.0);

/// One boundary parametrization `τ = cap ∘ γ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryParam {
    pub cap: CapMap,
    #[serde(default = "identity_homeo")]
    pub gamma: CircleHomeo,
}

fn identity_homeo() -> CircleHomeo {
    CircleHomeo::Identity
}

impl BoundaryParam {
    pub fn analytic(cap: CapMap) -> Self {
        BoundaryParam { cap, gamma: CircleHomeo::Identity }
    }

    /// `τ(e^{iθ})` on the sphere.
    pub fn eval(&self, theta: f64) -> SpherePoint {
        self.cap.eval(C64::from_polar(1.0, self.gamma.lift(theta)))
    }

    pub fn samples(&self, k: usize) -> Vec<SpherePoint> {
        (0..k).map(|j| self.eval(TAU * j as f64 / k as f64)).collect()
    }
}

/// A sphere with `n` removed caps and boundary parametrizations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BorderedSphereData {
    /// The sphere carrying the reference caps; its punctures are the cap centers.
    pub ambient: PuncturedSphere,
    pub boundaries: Vec<BoundaryParam>,
    #[serde(default)]
    pub method: ExtensionMethod,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    DEFAULT_BOUNDARY_SAMPLES
}

impl BorderedSphereData {
    pub fn new(ambient: PuncturedSphere, boundaries: Vec<BoundaryParam>, method: ExtensionMethod) -> Result<Self> {
        let b = BorderedSphereData { ambient, boundaries, method, samples: DEFAULT_BOUNDARY_SAMPLES };
        b.validate()?;
        Ok(b)
    }

    /// Analytic boundary data of a rigged sphere.
    pub fn from_rigged(r: &RiggedSphere) -> Self {
        BorderedSphereData {
            ambient: r.base.clone(),
            boundaries: r.caps.iter().cloned().map(BoundaryParam::analytic).collect(),
            method: ExtensionMethod::Analytic,
            samples: DEFAULT_BOUNDARY_SAMPLES,
        }
    }

    pub fn reference(&self) -> RiggedSphere {
        RiggedSphere { base: self.ambient.clone(), caps: self.boundaries.iter().map(|b| b.cap.clone()).collect() }
    }

    /// Disjoint Jordan boundary curves, positively oriented parametrizations.
    pub fn validate(&self) -> Result<()> {
        if self.samples < 256 {
            return Err(Error::InvalidBoundary(format!("need at least 256 boundary samples, got {}", self.samples)));
        }
        let rep = rigging_report(&self.reference(), self.samples);
        if !rep.violations.is_empty() {
            return Err(Error::InvalidBoundary(rep.violations.join("; ")));
        }
        for (i, b) in self.boundaries.iter().enumerate() {
            b.gamma.validate().map_err(|e| Error::InvalidBoundary(format!("boundary {i}: {e}")))?;
            let local: Vec<C64> = (0..self.samples)
                .map(|j| b.cap.local(C64::from_polar(1.0, b.gamma.lift(TAU * j as f64 / self.samples as f64))))
                .collect();
            if winding(&local, ZERO) != 1 {
                return Err(Error::InvalidBoundary(format!("boundary {i} does not wind once positively")));
            }
        }
        Ok(())
    }
}

/// Sewing settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SewOptions {
    pub resolution: usize,
    pub padding: f64,
    /// Highest power kept in the output rigging series.
    pub rigging_order: usize,
    pub solver: SolverOptions,
}

impl Default for SewOptions {
    fn default() -> Self {
        SewOptions { resolution: 256, padding: 1.25, rigging_order: 96, solver: SolverOptions::default() }
    }
}

impl SewOptions {
    pub fn new(resolution: usize, tol: f64) -> Self {
        SewOptions { resolution, solver: SolverOptions::with_tol(tol), ..Default::default() }
    }
}

/// Per-cap diagnostics of a sewing run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CapResidual {
    /// `|f(0)|` of the fitted series before recentering.
    pub center_offset: f64,
    /// Largest negative Fourier mode of the boundary values.
    pub antiholomorphic: f64,
    pub tail: f64,
    /// Sup-distance between the fitted cap on `∂𝔻` and the sewn boundary samples.
    pub boundary_error: f64,
    /// Sup-distance between the fitted cap and `σ ∘ w ∘ τ̂` at interior points.
    pub interior_error: f64,
    pub extension_dilatation: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SewReport {
    pub iterations: usize,
    pub last_update: f64,
    pub sup_mu: f64,
    pub resolution: usize,
    pub half_width: f64,
    pub inverted_frame: bool,
    pub caps: Vec<CapResidual>,
}

impl SewReport {
    pub fn max_center_offset(&self) -> f64 {
        self.caps.iter().map(|c| c.center_offset).fold(0.0, f64::max)
    }

    pub fn max_antiholomorphic(&self) -> f64 {
        self.caps.iter().map(|c| c.antiholomorphic).fold(0.0, f64::max)
    }
}

/// The sewn sphere together with the map used to produce it.
pub struct Sewn {
    pub sphere: RiggedSphere,
    pub report: SewReport,
    /// `σ ∘ w ∘ F` as a map of the ambient sphere.
    pub map: SewingMap,
}

/// `p ↦ σ(w(F(p)))`.
pub struct SewingMap {
    frame: Mobius,
    solution: Option<NormalizedQCMap>,
    sigma: Mobius,
}

impl SewingMap {
    pub fn apply(&self, p: SpherePoint) -> SpherePoint {
        let y = self.frame.apply(p);
        let w = match &self.solution {
            Some(s) => s.eval_sphere(y),
            None => y,
        };
        self.sigma.apply(w)
    }

    pub fn sigma(&self) -> &Mobius {
        &self.sigma
    }

    pub fn solution(&self) -> Option<&NormalizedQCMap> {
        self.solution.as_ref()
    }
}

/// Solves `s(u) = t` near the closed unit disk.
fn invert_series(s: &Series, t: C64) -> Option<C64> {
    let a1 = s.coeff(1);
    let mut u = (t - s.coeff(0)) / a1;
    if u.norm() > 1.2 {
        u *= 1.2 / u.norm();
    }
    for _ in 0..60 {
        let (f, d) = s.eval_with_derivative(u);
        let r = f - t;
        if r.norm() < 1e-14 * (1.0 + t.norm()) {
            return Some(u);
        }
        if d.norm() == 0.0 {
            return None;
        }
        let mut step = r / d;
        while (u - step).norm() > 1.3 {
            step *= 0.5;
        }
        u -= step;
    }
    let (f, _) = s.eval_with_derivative(u);
    ((f - t).norm() < 1e-10 * (1.0 + t.norm())).then_some(u)
}

/// A point of the bordered surface far from every cap, used as the pole of the solve frame.
fn frame_pole(caps: &[CapMap]) -> Result<C64> {
    let k = 256;
    let curves: Vec<Vec<C64>> = caps
        .iter()
        .map(|c| c.boundary(k).into_iter().map(|p| p.as_finite().unwrap_or(C64::new(f64::MAX, 0.0))).collect())
        .collect();
    let all: Vec<C64> = curves.iter().flatten().copied().filter(|z| z.re.is_finite() && z.norm() < 1e300).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for z in &all {
        x0 = x0.min(z.re);
        x1 = x1.max(z.re);
        y0 = y0.min(z.im);
        y1 = y1.max(z.im);
    }
    let m = 48;
    let mut best = (f64::MIN, ZERO);
    for a in 0..=m {
        for b in 0..=m {
            let q = C64::new(x0 + (x1 - x0) * a as f64 / m as f64, y0 + (y1 - y0) * b as f64 / m as f64);
            let inside = caps.iter().zip(&curves).any(|(cap, curve)| {
                let w = winding(curve, q);
                if cap.chart.contains_infinity() {
                    w == 0
                } else {
                    w != 0
                }
            });
            if inside {
                continue;
            }
            let d = all.iter().map(|z| (z - q).norm()).fold(f64::INFINITY, f64::min);
            if d > best.0 {
                best = (d, q);
            }
        }
    }
    if best.0 <= 0.0 {
        return Err(Error::Sewing("no room for the solve frame".into()));
    }
    Ok(best.1)
}

/// Profile part for one μ-bearing cap, in frame coordinates.
fn cap_part(ext: &CapExtension, frame: &Mobius) -> Result<ProfilePart> {
    let to_frame = frame.compose(&ext.cap.chart.mobius().inverse());
    let k = 512;
    let pts: Vec<C64> = (0..k)
        .map(|j| to_frame.apply(SpherePoint::Finite(ext.cap.local(C64::from_polar(1.0, TAU * j as f64 / k as f64)))))
        .map(|p| p.as_finite().ok_or_else(|| Error::Sewing("cap meets the frame pole".into())))
        .collect::<Result<_>>()?;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for z in &pts {
        x0 = x0.min(z.re);
        x1 = x1.max(z.re);
        y0 = y0.min(z.im);
        y1 = y1.max(z.im);
    }
    let center = C64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let spread = pts.iter().map(|z| (z - center).norm()).fold(0.0, f64::max);
    let radius = spread * 1.05;
    let series = Arc::new(ext.cap.series.clone());
    let from_frame = to_frame.inverse();
    let psi = Arc::new(ext.psi.clone());
    let f = move |y: C64| -> C64 {
        let t = from_frame.apply_finite(y);
        let Some(u) = invert_series(&series, t) else { return ZERO };
        if u.norm() >= 1.0 {
            return ZERO;
        }
        let (s, ds) = series.eval_with_derivative(u);
        let g1 = to_frame.derivative(s) * ds;
        psi.dilatation(u) * g1 / g1.conj()
    };
    Ok(ProfilePart { center, radius, f: Arc::new(f) })
}

/// Sews the caps described by `b` and returns the normalized rigged sphere.
pub fn sew_caps(b: &BorderedSphereData, opts: &SewOptions) -> Result<Sewn> {
    b.validate()?;
    let exts: Vec<CapExtension> = b
        .boundaries
        .par_iter()
        .map(|bp| extend_quasisymmetric(&bp.cap, &bp.gamma, b.method))
        .collect::<Result<_>>()?;
    let wild: Vec<usize> = (0..exts.len()).filter(|&i| !exts[i].psi.is_conformal()).collect();
    let mut report = SewReport { resolution: opts.resolution, ..Default::default() };

    let (frame, solution) = if wild.is_empty() {
        (Mobius::identity(), None)
    } else {
        let frame = if wild.iter().any(|&i| exts[i].cap.chart.contains_infinity()) {
            let caps: Vec<CapMap> = b.boundaries.iter().map(|bp| bp.cap.clone()).collect();
            let q = frame_pole(&caps)?;
            report.inverted_frame = true;
            Mobius::new(ZERO, C64::new(1.0, 0.0), C64::new(1.0, 0.0), -q)?
        } else {
            Mobius::identity()
        };
        let mut profile = MuProfile::new();
        for &i in &wild {
            profile.push(cap_part(&exts[i], &frame)?);
        }
        let grid = profile.fit_grid(opts.resolution, opts.padding)?;
        let mu = BeltramiCoefficient::from_profile(grid, profile, DEFAULT_SUPERSAMPLE)?;
        let sol = solve_beltrami_with(&mu, &opts.solver)?;
        report.iterations = sol.stats().iterations;
        report.last_update = sol.stats().last_update;
        report.sup_mu = mu.sup_norm();
        report.half_width = grid.half_width();
        (frame, Some(sol))
    };
    let mut map = SewingMap { frame, solution, sigma: Mobius::identity() };

    let centers: Vec<SpherePoint> = exts
        .iter()
        .map(|e| {
            let u = e.psi.inverse_point(ZERO)?;
            Ok(e.cap.eval(u))
        })
        .collect::<Result<_>>()?;
    let raw: Vec<SpherePoint> = centers.iter().map(|&p| map.apply(p)).collect();
    map.sigma = Mobius::normalizing(raw[0], raw[1], raw[2])?;
    let mut punctures: Vec<SpherePoint> = raw.iter().map(|&p| map.sigma.apply(p)).collect();
    punctures[0] = SpherePoint::Finite(ZERO);
    punctures[1] = SpherePoint::Finite(C64::new(1.0, 0.0));
    punctures[2] = SpherePoint::Infinity;
    let base = PuncturedSphere::new(punctures.clone()).map_err(|e| Error::Sewing(format!("sewn punctures collide: {e}")))?;
    let radii = default_chart_radii(&base);

    let k = b.samples;
    let results: Vec<(CapMap, CapResidual)> = exts
        .par_iter()
        .enumerate()
        .map(|(i, ext)| {
            let chart = Chart::standard(punctures[i], radii[i]);
            let bp = &b.boundaries[i];
            let local: Vec<C64> = (0..k)
                .map(|j| {
                    let p = map.apply(bp.eval(TAU * j as f64 / k as f64));
                    chart.apply(p).as_finite().ok_or_else(|| Error::Sewing(format!("cap {i} boundary passes through the chart pole")))
                })
                .collect::<Result<_>>()?;
            let (cap, fit) = CapMap::from_boundary_samples(chart, &local, opts.rigging_order);
            let mut res = CapResidual {
                center_offset: fit.center_offset,
                antiholomorphic: fit.antiholomorphic,
                tail: fit.tail,
                extension_dilatation: ext.sup_dilatation(),
                ..Default::default()
            };
            let cap = cap.recentered();
            res.boundary_error = local
                .iter()
                .enumerate()
                .map(|(j, &c)| (cap.local(C64::from_polar(1.0, TAU * j as f64 / k as f64)) - c).norm())
                .fold(0.0, f64::max);
            for j in 0..8 {
                let u = C64::from_polar(if j % 2 == 0 { 0.5 } else { 0.85 }, TAU * j as f64 / 8.0);
                let inner = ext.cap.eval(ext.psi.inverse_point(u)?);
                if let SpherePoint::Finite(z) = chart.apply(map.apply(inner)) {
                    res.interior_error = res.interior_error.max((cap.local(u) - z).norm());
                }
            }
            Ok((cap, res))
        })
        .collect::<Result<_>>()?;
    let (caps, residuals): (Vec<CapMap>, Vec<CapResidual>) = results.into_iter().unzip();
    report.caps = residuals;
    Ok(Sewn { sphere: RiggedSphere::new(base, caps)?, report, map })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::cross_ratio_of;
    use crate::surfaces::validate_rigging;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn four() -> RiggedSphere {
        RiggedSphere::standard(PuncturedSphere::normalized_with(&[c(2.0, 1.0)]).unwrap(), 0.6).unwrap()
    }

    fn cr(s: &PuncturedSphere) -> C64 {
        let p = s.punctures();
        cross_ratio_of([p[0], p[1], p[2], p[3]]).unwrap()
    }

    #[test]
    fn analytic_boundary_sews_to_itself() {
        let r = four();
        let b = BorderedSphereData::from_rigged(&r);
        let out = sew_caps(&b, &SewOptions::default()).unwrap();
        assert!((cr(&out.sphere.base) - c(2.0, 1.0)).norm() < 1e-10);
        assert!(out.sphere.boundary_distance(&r, 512) < 1e-12);
        validate_rigging(&out.sphere).unwrap();
    }

    #[test]
    fn overlapping_caps_rejected() {
        let s = PuncturedSphere::normalized_with(&[c(2.0, 1.0)]).unwrap();
        let r = RiggedSphere::round(s, &[0.6, 0.6, 0.1, 0.1]).unwrap();
        assert!(sew_caps(&BorderedSphereData::from_rigged(&r), &SewOptions::default()).is_err());
    }

    #[test]
    fn mobius_reparametrization_moves_puncture_only() {
        let r = four();
        let mut b = BorderedSphereData::from_rigged(&r);
        b.method = ExtensionMethod::DouadyEarle;
        b.boundaries[3].gamma = CircleHomeo::Mobius { a: c(0.2, 0.0), rotation: 0.0 };
        let out = sew_caps(&b, &SewOptions::default()).unwrap();
        // the sewn fourth puncture is g(γ(0)) = p + r·(−0.2)
        let expect = c(2.0, 1.0) - 0.2 * r.caps[3].series.coeff(1);
        assert!((cr(&out.sphere.base) - expect).norm() < 1e-12);
    }

    #[test]
    fn radial_extension_of_mobius_is_undone_by_the_solver() {
        let r = four();
        let mut b = BorderedSphereData::from_rigged(&r);
        b.method = ExtensionMethod::RadialStretch;
        let a = c(0.15, 0.05);
        let m = Mobius::disk_automorphism(a, 0.0).unwrap();
        // g = φ ∘ m⁻¹ and γ = m, so τ = φ on the circle
        let minv = m.inverse();
        let phi = r.caps[3].series.clone();
        let samples: Vec<C64> = (0..256).map(|j| phi.eval(minv.apply_finite(C64::from_polar(1.0, TAU * j as f64 / 256.0)))).collect();
        let (g, _) = CapMap::from_boundary_samples(r.caps[3].chart, &samples, 60);
        b.boundaries[3] = BoundaryParam { cap: g, gamma: CircleHomeo::Mobius { a, rotation: 0.0 } };
        // g(0) ≠ p, so the reference caps are not centered; move the ambient puncture accordingly
        let g0 = b.boundaries[3].cap.series.coeff(0);
        b.boundaries[3].cap.series.set(0, ZERO);
        let shift = r.caps[3].chart.center().as_finite().unwrap() + g0;
        b.ambient = PuncturedSphere::normalized_with(&[shift]).unwrap();
        b.boundaries[3].cap.chart = Chart::standard(SpherePoint::Finite(shift), 0.45);
        let coarse = sew_caps(&b, &SewOptions::new(64, 1e-10)).unwrap();
        let out = sew_caps(&b, &SewOptions::new(128, 1e-10)).unwrap();
        assert!(out.report.sup_mu > 0.2);
        let err = (cr(&out.sphere.base) - c(2.0, 1.0)).norm();
        let coarse_err = (cr(&coarse.sphere.base) - c(2.0, 1.0)).norm();
        assert!(err < 1e-4 && err < 0.5 * coarse_err, "{err} {coarse_err}");
        assert!(out.sphere.boundary_distance(&r, 512) < 1e-4);
    }
}
