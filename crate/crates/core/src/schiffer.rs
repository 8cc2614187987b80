//! Schiffer variation of punctured spheres.
//!
//! A cell is a parametric disk `U = ζ⁻¹(𝔻)`. Varying by `ε` puts the dilatation
//! `ε dζ̄/dζ` on `U`, i.e. `μ(z) = ε · conj(ζ'(z)) / ζ'(z)`, and moves every
//! puncture by the normalized solution `w^μ`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beltrami::{solve_beltrami_with, BeltramiCoefficient, MuProfile, NormalizedQCMap, SolverOptions, DEFAULT_SUPERSAMPLE};
use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::sphere::{cross_ratio_of, Mobius, PuncturedSphere, SpherePoint};

type C64 = Complex64;
const ZERO: C64 = C64::new(0.0, 0.0);

/// Upper bound for the admissible `|ε|` of a cell.
pub const DEFAULT_EPSILON_MAX: f64 = 0.5;
/// Required clearance between a cell and punctures, caps or other cells.
pub const CELL_MARGIN: f64 = 0.1;

/// A parametric disk `U = ζ⁻¹(𝔻)` with Möbius chart `ζ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchifferCell {
    chart: Mobius,
    epsilon_max: f64,
    center: C64,
    radius: f64,
}

impl SchifferCell {
    pub fn new(chart: Mobius, epsilon_max: f64) -> Result<Self> {
        if !(epsilon_max > 0.0 && epsilon_max <= DEFAULT_EPSILON_MAX) {
            return Err(Error::InvalidSchiffer(format!("epsilon_max must lie in (0, {DEFAULT_EPSILON_MAX}], got {epsilon_max}")));
        }
        // U is bounded iff ζ(∞) lies outside the closed disk
        if let SpherePoint::Finite(z) = chart.apply(SpherePoint::Infinity) {
            if z.norm() <= 1.0 + 1e-12 {
                return Err(Error::InvalidSchiffer("cell chart sends infinity into the closed disk".into()));
            }
        }
        let inv = chart.inverse();
        let pts: Vec<C64> = [0.0, 2.0, 4.0]
            .iter()
            .map(|&t| inv.apply(SpherePoint::Finite(C64::from_polar(1.0, t))).as_finite())
            .collect::<Option<_>>()
            .ok_or_else(|| Error::InvalidSchiffer("cell boundary passes through infinity".into()))?;
        let (center, radius) = circumcircle(pts[0], pts[1], pts[2])?;
        Ok(SchifferCell { chart, epsilon_max, center, radius })
    }

    /// `ζ(z) = (z − center) / radius`.
    pub fn round(center: C64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSchiffer(format!("cell radius must be positive, got {radius}")));
        }
        let chart = Mobius::affine(C64::new(1.0 / radius, 0.0), -center / radius);
        let mut cell = SchifferCell::new(chart, DEFAULT_EPSILON_MAX)?;
        // exact values rather than the circumcircle estimate
        cell.center = center;
        cell.radius = radius;
        Ok(cell)
    }

    pub fn with_epsilon_max(self, epsilon_max: f64) -> Result<Self> {
        let mut c = SchifferCell::new(self.chart, epsilon_max)?;
        c.center = self.center;
        c.radius = self.radius;
        Ok(c)
    }

    pub fn chart(&self) -> &Mobius {
        &self.chart
    }

    pub fn epsilon_max(&self) -> f64 {
        self.epsilon_max
    }

    pub fn center(&self) -> C64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, z: C64) -> bool {
        self.chart.apply_finite(z).norm() < 1.0
    }

    /// Distance from the closed cell to a point; infinite for the point at infinity.
    pub fn distance_to(&self, p: SpherePoint) -> f64 {
        match p {
            SpherePoint::Infinity => f64::INFINITY,
            SpherePoint::Finite(z) => (z - self.center).norm() - self.radius,
        }
    }

    /// `conj(ζ') / ζ'` at `z`, the unit-modulus transport factor of `dζ̄/dζ`.
    pub fn transport(&self, z: C64) -> C64 {
        C64::from_polar(1.0, -2.0 * self.chart.derivative(z).arg())
    }
}

fn circumcircle(a: C64, b: C64, c: C64) -> Result<(C64, f64)> {
    let (b, c) = (b - a, c - a);
    let d = 2.0 * (b.re * c.im - b.im * c.re);
    if d.abs() < 1e-300 {
        return Err(Error::InvalidSchiffer("degenerate cell".into()));
    }
    let (bb, cc) = (b.norm_sqr(), c.norm_sqr());
    let u = C64::new((c.im * bb - b.im * cc) / d, (b.re * cc - c.re * bb) / d);
    Ok((a + u, u.norm()))
}

/// Cells together with the variation parameter `ε ∈ ℂ^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchifferParams {
    cells: Vec<SchifferCell>,
    epsilon: Vec<C64>,
}

impl SchifferParams {
    pub fn new(cells: Vec<SchifferCell>, epsilon: Vec<C64>) -> Result<Self> {
        if cells.len() != epsilon.len() {
            return Err(Error::InvalidSchiffer(format!("{} cells but {} parameters", cells.len(), epsilon.len())));
        }
        for i in 0..cells.len() {
            for j in (i + 1)..cells.len() {
                let gap = (cells[i].center - cells[j].center).norm() - cells[i].radius - cells[j].radius;
                if gap < CELL_MARGIN {
                    return Err(Error::InvalidSchiffer(format!("cells {i} and {j} are not disjoint (gap {gap:.3})")));
                }
            }
        }
        let p = SchifferParams { cells, epsilon };
        p.check_epsilon(&p.epsilon)?;
        Ok(p)
    }

    /// Same cells, `ε = 0`.
    pub fn zero(cells: Vec<SchifferCell>) -> Result<Self> {
        let n = cells.len();
        SchifferParams::new(cells, vec![ZERO; n])
    }

    fn check_epsilon(&self, eps: &[C64]) -> Result<()> {
        if eps.len() != self.cells.len() {
            return Err(Error::InvalidSchiffer(format!("{} cells but {} parameters", self.cells.len(), eps.len())));
        }
        for (i, (e, c)) in eps.iter().zip(&self.cells).enumerate() {
            if !(e.norm() < c.epsilon_max) {
                return Err(Error::InvalidSchiffer(format!("|epsilon_{i}| = {} is outside the admissible radius {}", e.norm(), c.epsilon_max)));
            }
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: Vec<C64>) -> Result<Self> {
        self.check_epsilon(&epsilon)?;
        Ok(SchifferParams { cells: self.cells.clone(), epsilon })
    }

    pub fn cells(&self) -> &[SchifferCell] {
        &self.cells
    }

    pub fn epsilon(&self) -> &[C64] {
        &self.epsilon
    }

    pub fn dimension(&self) -> usize {
        self.cells.len()
    }

    pub fn is_zero(&self) -> bool {
        self.epsilon.iter().all(|e| *e == ZERO)
    }

    /// `max |ε_i|`, the sup-norm of the variation field.
    pub fn sup_norm(&self) -> f64 {
        self.epsilon.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    /// Rejects cells closer than [`CELL_MARGIN`] to a puncture or containing infinity.
    pub fn check_against(&self, base: &PuncturedSphere) -> Result<()> {
        let d = base.len().saturating_sub(3);
        if self.cells.len() != d {
            return Err(Error::InvalidSchiffer(format!("a sphere with {} punctures needs {d} cells, got {}", base.len(), self.cells.len())));
        }
        for (i, c) in self.cells.iter().enumerate() {
            for (k, p) in base.punctures().iter().enumerate() {
                let gap = c.distance_to(*p);
                if gap < CELL_MARGIN {
                    return Err(Error::InvalidSchiffer(format!("cell {i} is within {gap:.3} of puncture {k}")));
                }
            }
        }
        Ok(())
    }

    /// The dilatation as a profile; cells with `ε_i = 0` are left out.
    pub fn profile(&self) -> MuProfile {
        profile_for(&self.cells, &self.epsilon)
    }

    /// Profile with `ε_i = 1` on every cell, whose support fixes the solve grid.
    pub fn unit_profile(&self) -> MuProfile {
        profile_for(&self.cells, &vec![C64::new(1.0, 0.0); self.cells.len()])
    }
}

fn profile_for(cells: &[SchifferCell], eps: &[C64]) -> MuProfile {
    let mut p = MuProfile::new();
    for (cell, &e) in cells.iter().zip(eps) {
        if e == ZERO {
            continue;
        }
        let cell = Arc::new(*cell);
        let c = cell.clone();
        p = p.with_part(cell.center, cell.radius, move |z| if c.contains(z) { e * c.transport(z) } else { ZERO });
    }
    p
}

/// `ε_i · conj(ζ_i') / ζ_i'` on each cell, zero elsewhere.
pub fn schiffer_beltrami(params: &SchifferParams, grid: &ComplexGrid) -> Result<BeltramiCoefficient> {
    params.check_epsilon(&params.epsilon)?;
    let hw = grid.half_width();
    for (i, c) in params.cells.iter().enumerate() {
        let off = c.center - grid.center();
        if off.re.abs() + c.radius >= hw || off.im.abs() + c.radius >= hw {
            return Err(Error::InvalidSchiffer(format!("cell {i} is not inside the grid")));
        }
    }
    if params.is_zero() {
        return Ok(BeltramiCoefficient::zero(*grid));
    }
    BeltramiCoefficient::from_profile(*grid, params.profile(), DEFAULT_SUPERSAMPLE)
}

/// Resolution and solver settings for Schiffer solves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchifferOptions {
    pub resolution: usize,
    /// Grid half width over the cells' extent.
    pub padding: f64,
    pub solver: SolverOptions,
}

impl Default for SchifferOptions {
    fn default() -> Self {
        SchifferOptions { resolution: 256, padding: 1.25, solver: SolverOptions::with_tol(1e-12) }
    }
}

impl SchifferOptions {
    pub fn new(resolution: usize, tol: f64) -> Self {
        SchifferOptions { resolution, solver: SolverOptions::with_tol(tol), ..Default::default() }
    }

    /// The solve grid; it depends on the cells only, never on `ε`.
    pub fn grid(&self, params: &SchifferParams) -> Result<ComplexGrid> {
        params.unit_profile().fit_grid(self.resolution, self.padding)
    }
}

/// The normalized map `w^μ` of the variation, or `None` when `ε = 0`.
pub fn schiffer_map(params: &SchifferParams, opts: &SchifferOptions) -> Result<Option<NormalizedQCMap>> {
    if params.is_zero() {
        return Ok(None);
    }
    let grid = opts.grid(params)?;
    let mu = schiffer_beltrami(params, &grid)?;
    solve_beltrami_with(&mu, &opts.solver).map(Some)
}

/// Moves the punctures of `base` by the Schiffer deformation and renormalizes.
pub fn schiffer_variation_s(base: &PuncturedSphere, params: &SchifferParams, opts: &SchifferOptions) -> Result<PuncturedSphere> {
    params.check_against(base)?;
    let Some(w) = schiffer_map(params, opts)? else {
        return Ok(base.clone());
    };
    let moved: Vec<SpherePoint> = base.punctures().iter().map(|&p| w.eval_sphere(p)).collect();
    Ok(PuncturedSphere::new(moved)?.normalize()?.0)
}

/// `cr(p₁, p₂, p₃, p₄)` with `cr(0, 1, ∞, λ) = λ`.
pub fn cross_ratio(s: &PuncturedSphere) -> Result<C64> {
    let p = s.punctures();
    if p.len() != 4 {
        return Err(Error::InvalidSphere(format!("cross-ratio needs four punctures, got {}", p.len())));
    }
    cross_ratio_of([p[0], p[1], p[2], p[3]])
}

/// Centered estimate of `2 ∂F/∂ε̄` at `e0`, maximized over components.
///
/// The four stencil evaluations run in parallel.
pub fn holomorphy_residual<F>(f: F, e0: C64, h: f64) -> Result<f64>
where
    F: Fn(C64) -> Result<Vec<C64>> + Sync,
{
    if !(h > 0.0) {
        return Err(Error::Evaluation(format!("stencil step must be positive, got {h}")));
    }
    let steps = [C64::new(h, 0.0), C64::new(-h, 0.0), C64::new(0.0, h), C64::new(0.0, -h)];
    let vals: Vec<Vec<C64>> = steps.par_iter().map(|&d| f(e0 + d)).collect::<Result<_>>()?;
    let k = vals[0].len();
    if vals.iter().any(|v| v.len() != k) {
        return Err(Error::Evaluation("stencil evaluations disagree in length".into()));
    }
    let i = C64::new(0.0, 1.0);
    let mut r = 0.0f64;
    for c in 0..k {
        let dx = (vals[0][c] - vals[1][c]) / (2.0 * h);
        let dy = (vals[2][c] - vals[3][c]) / (2.0 * h);
        let v = (dx + i * dy).norm();
        if !v.is_finite() {
            return Err(Error::Evaluation(format!("non-finite residual in component {c}")));
        }
        r = r.max(v);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn base() -> PuncturedSphere {
        PuncturedSphere::normalized_with(&[c(2.0, 1.0)]).unwrap()
    }

    fn cell() -> SchifferCell {
        SchifferCell::round(c(4.0, 0.0), 0.5).unwrap()
    }

    #[test]
    fn zero_parameter_gives_zero_field_and_fixed_base() {
        let p = SchifferParams::zero(vec![cell()]).unwrap();
        let grid = SchifferOptions::default().grid(&p).unwrap();
        assert!(schiffer_beltrami(&p, &grid).unwrap().is_zero());
        assert_eq!(schiffer_variation_s(&base(), &p, &SchifferOptions::default()).unwrap(), base());
    }

    #[test]
    fn round_cell_field_is_epsilon() {
        let e = c(0.1, -0.05);
        let p = SchifferParams::new(vec![cell()], vec![e]).unwrap();
        let grid = SchifferOptions::new(128, 1e-12).grid(&p).unwrap();
        let mu = schiffer_beltrami(&p, &grid).unwrap();
        assert_eq!(mu.sup_norm(), e.norm());
        let h = grid.spacing();
        for (i, z) in grid.nodes().enumerate() {
            let v = mu.field().values()[i];
            let d = (z - c(4.0, 0.0)).norm();
            if d < 0.5 - h {
                assert_eq!(v, e);
            } else if d > 0.5 + h {
                assert_eq!(v, ZERO);
            }
        }
    }

    #[test]
    fn mobius_chart_transport_has_unit_modulus() {
        let m = Mobius::new(c(1.0, 0.2), c(-3.0, 0.5), c(0.05, 0.0), c(1.0, 0.0)).unwrap();
        let cell = SchifferCell::new(m, 0.3).unwrap();
        let z = cell.center();
        assert!(cell.contains(z));
        assert!((cell.transport(z).norm() - 1.0).abs() < 1e-15);
        // boundary of U is the unit circle of ζ
        let b = cell.center() + cell.radius();
        assert!((m.apply_finite(b).norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn overlapping_cells_and_large_parameters_rejected() {
        let a = SchifferCell::round(c(4.0, 0.0), 0.5).unwrap();
        let b = SchifferCell::round(c(4.6, 0.0), 0.5).unwrap();
        assert!(SchifferParams::new(vec![a, b], vec![ZERO, ZERO]).is_err());
        assert!(SchifferParams::new(vec![a], vec![c(0.5, 0.0)]).is_err());
        let near = SchifferCell::round(c(1.3, 0.0), 0.25).unwrap();
        assert!(SchifferParams::zero(vec![near]).unwrap().check_against(&base()).is_err());
        assert!(SchifferCell::round(c(0.0, 0.0), 0.5).unwrap().with_epsilon_max(0.6).is_err());
    }

    #[test]
    fn cross_ratio_conventions() {
        assert_eq!(cross_ratio(&base()).unwrap(), c(2.0, 1.0));
        let p = base().punctures().to_vec();
        let swapped = PuncturedSphere::new(vec![p[1], p[0], p[2], p[3]]).unwrap();
        assert!((cross_ratio(&swapped).unwrap() - (1.0 - c(2.0, 1.0))).norm() < 1e-14);
        assert!(cross_ratio(&PuncturedSphere::normalized_with(&[]).unwrap()).is_err());
    }

    #[test]
    fn residual_calibration() {
        let sq = holomorphy_residual(|e| Ok(vec![e * e]), c(0.3, 0.0), 1e-4).unwrap();
        assert!(sq < 1e-10, "{sq}");
        let anti = holomorphy_residual(|e| Ok(vec![e.conj()]), c(0.3, 0.0), 1e-4).unwrap();
        assert!((anti - 2.0).abs() < 1e-12, "{anti}");
    }

    #[test]
    fn variation_moves_the_cross_ratio_linearly() {
        let opts = SchifferOptions::new(128, 1e-12);
        let p0 = SchifferParams::zero(vec![cell()]).unwrap();
        let lam = |e: f64| cross_ratio(&schiffer_variation_s(&base(), &p0.with_epsilon(vec![c(e, 0.0)]).unwrap(), &opts).unwrap()).unwrap();
        let l0 = c(2.0, 1.0);
        let full = (lam(0.1) - l0).norm();
        let half = (lam(0.05) - l0).norm();
        assert!(full > 1e-4, "{full}");
        let ratio = half / full;
        assert!((ratio - 0.5).abs() < 0.05, "{ratio}");
        let fine = SchifferOptions::new(256, 1e-12);
        let l_fine = cross_ratio(&schiffer_variation_s(&base(), &p0.with_epsilon(vec![c(0.1, 0.0)]).unwrap(), &fine).unwrap()).unwrap();
        assert!((l_fine - lam(0.1)).norm() < 1e-3);
    }

    fn cr_oracle(p: [C64; 4]) -> C64 {
        // (p4 − p1)(p2 − p3) / ((p4 − p3)(p2 − p1)), finite points only
        (p[3] - p[0]) * (p[1] - p[2]) / ((p[3] - p[2]) * (p[1] - p[0]))
    }

    proptest! {
        #[test]
        fn cross_ratio_is_mobius_invariant(
            coef in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 4),
            pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 4),
        ) {
            let q: Vec<C64> = coef.iter().map(|&(a, b)| c(a, b)).collect();
            let m = Mobius::new(q[0], q[1], q[2], q[3]);
            prop_assume!(m.is_ok());
            let m = m.unwrap();
            prop_assume!(m.det().norm() > 1e-3);
            let z: Vec<C64> = pts.iter().map(|&(a, b)| c(a, b)).collect();
            let min_gap = (0..4).flat_map(|i| (0..i).map(move |j| (i, j))).map(|(i, j)| (z[i] - z[j]).norm()).fold(f64::INFINITY, f64::min);
            prop_assume!(min_gap > 0.1);
            let s = PuncturedSphere::new(z.iter().map(|&w| SpherePoint::Finite(w)).collect()).unwrap();
            let l = cross_ratio(&s).unwrap();
            prop_assert!((l - cr_oracle([z[0], z[1], z[2], z[3]])).norm() < 1e-9 * (1.0 + l.norm()));
            let img: Vec<SpherePoint> = z.iter().map(|&w| m.apply(SpherePoint::Finite(w))).collect();
            prop_assume!(img.iter().all(|p| !p.is_infinite() && p.as_finite().unwrap().norm() < 1e6));
            let lm = cross_ratio(&PuncturedSphere::new(img).unwrap()).unwrap();
            prop_assert!((lm - l).norm() < 1e-12 * (1.0 + l.norm()), "{} vs {}", lm, l);
        }

        #[test]
        fn field_sup_norm_is_max_epsilon(r1 in 0.0f64..0.45, t1 in 0.0f64..6.28, r2 in 0.0f64..0.45, t2 in 0.0f64..6.28) {
            let cells = vec![SchifferCell::round(c(-2.0, 0.0), 0.6).unwrap(), SchifferCell::round(c(2.0, 1.0), 0.4).unwrap()];
            let eps = vec![C64::from_polar(r1, t1), C64::from_polar(r2, t2)];
            let p = SchifferParams::new(cells, eps.clone()).unwrap();
            let grid = SchifferOptions::new(64, 1e-10).grid(&p).unwrap();
            let mu = schiffer_beltrami(&p, &grid).unwrap();
            prop_assert_eq!(mu.sup_norm(), eps[0].norm().max(eps[1].norm()));
        }
    }
}
