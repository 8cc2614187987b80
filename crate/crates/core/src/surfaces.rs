//! Local charts, cap maps and rigged spheres.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beltrami::winding;
use crate::error::{Error, Result};
use crate::oqc::OqcFunction;
use crate::series::{series_from_circle_samples, Series};
use crate::sphere::{Mobius, PuncturedSphere, SpherePoint};

type C64 = Complex64;
const ZERO: C64 = C64::new(0.0, 0.0);

/// Boundary samples used for disjointness and conversions.
pub const DEFAULT_BOUNDARY_SAMPLES: usize = 512;

/// A Möbius chart `ζ` with `ζ(p) = 0`, defined on `B = ζ⁻¹({|ζ| < radius})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    map: Mobius,
    radius: f64,
}

impl Chart {
    /// `z − p` at a finite puncture, `1/z` at ∞.
    pub fn standard(p: SpherePoint, radius: f64) -> Self {
        let map = match p {
            SpherePoint::Finite(c) => Mobius::translation(-c),
            SpherePoint::Infinity => Mobius::inversion(),
        };
        Chart { map, radius }
    }

    pub fn from_mobius(map: Mobius, radius: f64) -> Self {
        Chart { map, radius }
    }

    pub fn mobius(&self) -> &Mobius {
        &self.map
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `ζ⁻¹(0)`.
    pub fn center(&self) -> SpherePoint {
        self.map.inverse().apply(SpherePoint::Finite(ZERO))
    }

    pub fn apply(&self, p: SpherePoint) -> SpherePoint {
        self.map.apply(p)
    }

    pub fn inverse(&self, z: C64) -> SpherePoint {
        self.map.inverse().apply(SpherePoint::Finite(z))
    }

    /// Whether the chart domain contains ∞.
    pub fn contains_infinity(&self) -> bool {
        match self.map.apply(SpherePoint::Infinity) {
            SpherePoint::Infinity => false,
            SpherePoint::Finite(z) => z.norm() < self.radius,
        }
    }
}

/// Default chart radii: `0.45 ×` the least distance between finite punctures;
/// at ∞ the chart covers `|z| > 2 max(|p_j| + R_j)`.
pub fn default_chart_radii(s: &PuncturedSphere) -> Vec<f64> {
    let finite: Vec<C64> = s.punctures().iter().filter_map(|p| p.as_finite()).collect();
    let mut dmin = f64::INFINITY;
    for i in 0..finite.len() {
        for j in (i + 1)..finite.len() {
            dmin = dmin.min((finite[i] - finite[j]).norm());
        }
    }
    if !dmin.is_finite() {
        dmin = 1.0;
    }
    let r = 0.45 * dmin;
    let outer = finite.iter().map(|z| z.norm() + r).fold(0.0, f64::max).max(r);
    s.punctures()
        .iter()
        .map(|p| if p.is_infinite() { 1.0 / (2.0 * outer) } else { r })
        .collect()
}

pub fn default_charts(s: &PuncturedSphere) -> Vec<Chart> {
    s.punctures().iter().zip(default_chart_radii(s)).map(|(&p, r)| Chart::standard(p, r)).collect()
}

/// A cap map `φ = ζ⁻¹ ∘ f` on the closed disk; `f(0)` may be nonzero so that
/// invalid riggings can be represented and reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapMap {
    pub chart: Chart,
    pub series: Series,
}

impl CapMap {
    pub fn new(chart: Chart, series: Series) -> Self {
        CapMap { chart, series }
    }

    /// Round cap `p + r z` (or `1/(r z)` style at ∞) in the standard chart.
    pub fn round(p: SpherePoint, r: f64, chart_radius: f64) -> Self {
        let chart = Chart::standard(p, chart_radius);
        CapMap { chart, series: Series::new(vec![ZERO, C64::new(r, 0.0)]) }
    }

    pub fn from_oqc(chart: Chart, f: &OqcFunction) -> Self {
        CapMap { chart, series: f.series() }
    }

    /// `f = ζ ∘ φ` in chart coordinates.
    pub fn local(&self, z: C64) -> C64 {
        self.series.eval(z)
    }

    pub fn eval(&self, z: C64) -> SpherePoint {
        self.chart.inverse(self.series.eval(z))
    }

    pub fn center(&self) -> SpherePoint {
        self.eval(ZERO)
    }

    /// Samples `φ(e^{2πik/K})`.
    pub fn boundary(&self, k: usize) -> Vec<SpherePoint> {
        (0..k).map(|j| self.eval(C64::from_polar(1.0, TAU * j as f64 / k as f64))).collect()
    }

    /// Largest `|f|` on the unit circle.
    pub fn local_extent(&self, k: usize) -> f64 {
        (0..k).map(|j| self.local(C64::from_polar(1.0, TAU * j as f64 / k as f64)).norm()).fold(0.0, f64::max)
    }

    /// Cap whose boundary values in chart coordinates are `samples`.
    pub fn from_boundary_samples(chart: Chart, samples: &[C64], order: usize) -> (Self, BoundaryFit) {
        let spec = series_from_circle_samples(samples, 1.0, order + 1);
        let a0 = spec.series.coeff(0);
        (CapMap { chart, series: spec.series }, BoundaryFit { center_offset: a0.norm(), antiholomorphic: spec.antiholomorphic, tail: spec.tail })
    }

    /// Replaces `f(0)` by exactly 0.
    pub fn recentered(mut self) -> Self {
        self.series.set(0, ZERO);
        self
    }

    /// `f` as an element of `O_qc`, requiring `f(0) = 0`.
    pub fn to_oqc(&self) -> Result<OqcFunction> {
        if self.series.coeff(0) != ZERO {
            return Err(Error::InvalidRigging(format!("cap is not centered: f(0) = {}", self.series.coeff(0))));
        }
        OqcFunction::new(self.series.coeffs().to_vec())
    }

    /// Whether a sphere point lies in the open cap, using the boundary curve.
    pub fn contains(&self, p: SpherePoint, boundary_local: &[C64]) -> bool {
        match self.chart.apply(p) {
            SpherePoint::Infinity => false,
            SpherePoint::Finite(z) => winding(boundary_local, z) != 0,
        }
    }

    pub fn local_boundary(&self, k: usize) -> Vec<C64> {
        (0..k).map(|j| self.local(C64::from_polar(1.0, TAU * j as f64 / k as f64))).collect()
    }
}

/// Diagnostics of a boundary-sample fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BoundaryFit {
    /// `|f(0)|` implied by the samples.
    pub center_offset: f64,
    pub antiholomorphic: f64,
    pub tail: f64,
}

/// A punctured sphere with one cap per puncture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiggedSphere {
    pub base: PuncturedSphere,
    pub caps: Vec<CapMap>,
}

impl RiggedSphere {
    pub fn new(base: PuncturedSphere, caps: Vec<CapMap>) -> Result<Self> {
        if caps.len() != base.len() {
            return Err(Error::InvalidRigging(format!("{} caps for {} punctures", caps.len(), base.len())));
        }
        Ok(RiggedSphere { base, caps })
    }

    /// Round caps of the given local radii in the default charts.
    pub fn round(base: PuncturedSphere, local_radii: &[f64]) -> Result<Self> {
        if local_radii.len() != base.len() {
            return Err(Error::InvalidRigging("one radius per puncture required".into()));
        }
        let charts = default_charts(&base);
        let caps = charts
            .iter()
            .zip(local_radii)
            .map(|(ch, &r)| CapMap { chart: *ch, series: Series::new(vec![ZERO, C64::new(r, 0.0)]) })
            .collect();
        RiggedSphere::new(base, caps)
    }

    /// Round caps filling `fraction` of each default chart.
    pub fn standard(base: PuncturedSphere, fraction: f64) -> Result<Self> {
        let radii: Vec<f64> = default_chart_radii(&base).iter().map(|r| r * fraction).collect();
        RiggedSphere::round(base, &radii)
    }

    /// Largest sphere distance between corresponding boundary samples.
    pub fn boundary_distance(&self, other: &RiggedSphere, k: usize) -> f64 {
        if self.caps.len() != other.caps.len() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for (a, b) in self.caps.iter().zip(&other.caps) {
            for (p, q) in a.boundary(k).iter().zip(b.boundary(k)) {
                worst = worst.max(point_distance(p, &q));
            }
        }
        worst
    }
}

/// Euclidean distance for finite points, chordal distance otherwise.
pub fn point_distance(a: &SpherePoint, b: &SpherePoint) -> f64 {
    match (a, b) {
        (SpherePoint::Finite(x), SpherePoint::Finite(y)) => (x - y).norm(),
        _ => a.chordal_distance(b),
    }
}

/// Outcome of [`validate_rigging`].
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RiggingReport {
    /// `|ζ_i(φ_i(0))|` per cap.
    pub center_errors: Vec<f64>,
    /// Smallest Euclidean distance between boundary samples of caps `i < j`.
    pub margins: Vec<(usize, usize, f64)>,
    pub min_margin: f64,
    pub violations: Vec<String>,
}

/// Checks the rigging conditions: centers, univalence witnesses, disjoint closed images.
pub fn validate_rigging(r: &RiggedSphere) -> Result<RiggingReport> {
    let report = rigging_report(r, DEFAULT_BOUNDARY_SAMPLES);
    if report.violations.is_empty() {
        Ok(report)
    } else {
        Err(Error::InvalidRigging(report.violations.join("; ")))
    }
}

pub fn rigging_report(r: &RiggedSphere, k: usize) -> RiggingReport {
    let mut rep = RiggingReport { min_margin: f64::INFINITY, ..Default::default() };
    if r.caps.len() != r.base.len() {
        rep.violations.push(format!("{} caps for {} punctures", r.caps.len(), r.base.len()));
        return rep;
    }
    for (i, (cap, &p)) in r.caps.iter().zip(r.base.punctures()).enumerate() {
        let a0 = cap.series.coeff(0);
        rep.center_errors.push(a0.norm());
        if a0 != ZERO {
            rep.violations.push(format!("cap {i}: phi(0) is offset by {:e} from its puncture", a0.norm()));
        }
        if cap.chart.center() != p && point_distance(&cap.chart.center(), &p) > 0.0 {
            rep.violations.push(format!("cap {i}: chart is not centered at puncture {i}"));
        }
        let mut f = cap.series.clone();
        f.set(0, ZERO);
        match OqcFunction::new(f.coeffs().to_vec()) {
            Ok(g) => {
                if let Err(e) = g.univalence_witness() {
                    rep.violations.push(format!("cap {i}: {e}"));
                }
            }
            Err(e) => rep.violations.push(format!("cap {i}: {e}")),
        }
    }
    let curves: Vec<Vec<SpherePoint>> = r.caps.iter().map(|c| c.boundary(k)).collect();
    let locals: Vec<Vec<C64>> = r.caps.iter().map(|c| c.local_boundary(k)).collect();
    for i in 0..curves.len() {
        for j in (i + 1)..curves.len() {
            let mut d = f64::INFINITY;
            for a in &curves[i] {
                for b in &curves[j] {
                    d = d.min(point_distance(a, b));
                }
            }
            rep.margins.push((i, j, d));
            rep.min_margin = rep.min_margin.min(d);
            let crossing = !(d > 0.0);
            let nested = r.caps[i].contains(r.caps[j].center(), &locals[i])
                || r.caps[j].contains(r.caps[i].center(), &locals[j])
                || curves[j].iter().step_by(16).any(|p| r.caps[i].contains(*p, &locals[i]))
                || curves[i].iter().step_by(16).any(|p| r.caps[j].contains(*p, &locals[j]));
            if crossing || nested {
                rep.violations.push(format!("caps {i} and {j} overlap (boundary distance {d:.3e})"));
            }
        }
    }
    rep
}

/// `T(r) = (ζ_1∘φ_1, …, ζ_n∘φ_n)`.
pub fn surface_chart_t(r: &RiggedSphere) -> Result<Vec<OqcFunction>> {
    r.caps
        .iter()
        .enumerate()
        .map(|(i, cap)| {
            let extent = cap.local_extent(DEFAULT_BOUNDARY_SAMPLES);
            if !(extent < cap.chart.radius()) {
                return Err(Error::EscapesChart { cap: i, extent, radius: cap.chart.radius() });
            }
            cap.to_oqc()
        })
        .collect()
}

/// Inverse of [`surface_chart_t`] for fixed charts.
pub fn surface_chart_t_inverse(base: PuncturedSphere, charts: &[Chart], fs: &[OqcFunction]) -> Result<RiggedSphere> {
    if charts.len() != fs.len() {
        return Err(Error::InvalidRigging("one chart per function required".into()));
    }
    let caps = charts.iter().zip(fs).map(|(c, f)| CapMap::from_oqc(*c, f)).collect();
    RiggedSphere::new(base, caps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn three() -> PuncturedSphere {
        PuncturedSphere::new(vec![c(0.0, 0.0).into(), c(1.0, 0.0).into(), SpherePoint::Infinity]).unwrap()
    }

    fn example(r01: f64) -> RiggedSphere {
        let s = three();
        let caps = vec![
            CapMap::round(c(0.0, 0.0).into(), r01, 0.45),
            CapMap::round(c(1.0, 0.0).into(), r01, 0.45),
            CapMap::new(Chart::standard(SpherePoint::Infinity, 0.5), Series::new(vec![ZERO, c(0.1, 0.0)])),
        ];
        RiggedSphere::new(s, caps).unwrap()
    }

    #[test]
    fn valid_three_cap_margin() {
        let rep = validate_rigging(&example(0.1)).unwrap();
        assert!((rep.min_margin - 0.8).abs() < 1e-9, "{}", rep.min_margin);
        // the cap at infinity is 10/z
        let p = example(0.1).caps[2].eval(c(1.0, 0.0));
        assert!((p.as_finite().unwrap() - 10.0).norm() < 1e-12);
    }

    #[test]
    fn overlapping_caps_rejected() {
        assert!(validate_rigging(&example(0.6)).is_err());
    }

    #[test]
    fn offset_center_rejected() {
        let mut r = example(0.1);
        r.caps[0].series.set(0, c(0.01, 0.0));
        let err = validate_rigging(&r).unwrap_err().to_string();
        assert!(err.contains("cap 0"), "{err}");
    }

    #[test]
    fn chart_t_examples() {
        let r = example(0.1);
        let t = surface_chart_t(&r).unwrap();
        assert_eq!(t[0].coeffs()[1], c(0.1, 0.0));
        assert_eq!(t[2].coeffs()[1], c(0.1, 0.0));
        let charts: Vec<Chart> = r.caps.iter().map(|c| c.chart).collect();
        let back = surface_chart_t_inverse(r.base.clone(), &charts, &t).unwrap();
        assert_eq!(back, r);
        let mut wide = r.clone();
        wide.caps[0].series = Series::new(vec![ZERO, c(0.5, 0.0)]);
        assert!(matches!(surface_chart_t(&wide), Err(Error::EscapesChart { cap: 0, .. })));
    }

    #[test]
    fn nested_caps_detected() {
        let s = three();
        let caps = vec![
            CapMap::round(c(0.0, 0.0).into(), 0.1, 0.45),
            CapMap::round(c(1.0, 0.0).into(), 0.1, 0.45),
            CapMap::new(Chart::standard(SpherePoint::Infinity, 2.0), Series::new(vec![ZERO, c(1.0, 0.0)])),
        ];
        // the cap at infinity is |z| > 1, which contains the puncture 1 on its boundary region
        let r = RiggedSphere::new(s, caps).unwrap();
        assert!(validate_rigging(&r).is_err());
    }

    #[test]
    fn default_radii() {
        let s = PuncturedSphere::normalized_with(&[c(2.0, 1.0)]).unwrap();
        let r = default_chart_radii(&s);
        assert!((r[0] - 0.45).abs() < 1e-15);
        assert!(r[2] < 0.2);
        RiggedSphere::standard(s, 0.8).and_then(|r| validate_rigging(&r)).unwrap();
    }
}
