//! Beltrami coefficients and the normalized solution `w^μ` of `∂̄w = μ ∂w`.
//!
//! `w = z + C[h]` where `h = μ(1 + S h)` is found by Neumann iteration. When a
//! coefficient carries its exact pointwise profile, cells cut by a jump of μ
//! are refined: inside such a cell `h` is modelled as `μ(x)·g` with `g`
//! constant, which both the Beurling step and point evaluation integrate on a
//! sub-cell lattice.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, ComplexGrid};
use crate::sphere::{Mobius, SpherePoint};
use crate::transforms::{
    beurling_cell_kernel, cauchy_cell_kernel, check_support, BeurlingSymbol, TransformPlan,
};

type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Largest sup-norm accepted by the solver.
pub const MAX_DILATATION: f64 = 0.9;

/// A compactly supported piece of a pointwise dilatation profile.
#[derive(Clone)]
pub struct ProfilePart {
    pub center: C64,
    pub radius: f64,
    pub f: Arc<dyn Fn(C64) -> C64 + Send + Sync>,
}

impl std::fmt::Debug for ProfilePart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProfilePart").field("center", &self.center).field("radius", &self.radius).finish()
    }
}

/// Exact pointwise μ as a sum of parts with disjoint bounding disks.
#[derive(Clone, Debug, Default)]
pub struct MuProfile {
    parts: Vec<ProfilePart>,
}

impl MuProfile {
    pub fn new() -> Self {
        MuProfile { parts: Vec::new() }
    }

    pub fn with_part(mut self, center: C64, radius: f64, f: impl Fn(C64) -> C64 + Send + Sync + 'static) -> Self {
        self.parts.push(ProfilePart { center, radius, f: Arc::new(f) });
        self
    }

    pub fn push(&mut self, part: ProfilePart) {
        self.parts.push(part);
    }

    pub fn parts(&self) -> &[ProfilePart] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.parts
            .iter()
            .filter(|p| (z - p.center).norm() <= p.radius)
            .map(|p| (p.f)(z))
            .sum()
    }

    /// Smallest disk about `center` containing every part.
    pub fn extent_from(&self, center: C64) -> f64 {
        self.parts.iter().map(|p| (p.center - center).norm() + p.radius).fold(0.0, f64::max)
    }

    /// Center of the bounding box of the parts.
    pub fn bbox_center(&self) -> C64 {
        if self.parts.is_empty() {
            return ZERO;
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &self.parts {
            x0 = x0.min(p.center.re - p.radius);
            x1 = x1.max(p.center.re + p.radius);
            y0 = y0.min(p.center.im - p.radius);
            y1 = y1.max(p.center.im + p.radius);
        }
        C64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1))
    }

    /// A grid centered on the parts whose half width is `padding` times their extent.
    pub fn fit_grid(&self, n: usize, padding: f64) -> Result<ComplexGrid> {
        let c = self.bbox_center();
        let r = self.extent_from(c).max(1e-3);
        ComplexGrid::new(c, padding * r, n)
    }
}

/// Built-in dilatation primitives accepted in scene and config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MuPrimitive {
    /// `amplitude` on the disk, zero outside.
    ConstantDisk { center: [f64; 2], radius: f64, amplitude: [f64; 2] },
    /// `amplitude·exp(−r²/2σ²)` truncated at `radius`.
    GaussianTruncated { center: [f64; 2], radius: f64, sigma: f64, amplitude: [f64; 2] },
    /// `amplitude·exp(1 − 1/(1 − (r/radius)²))`, smooth with compact support.
    SmoothBump { center: [f64; 2], radius: f64, amplitude: [f64; 2] },
}

fn c2(v: [f64; 2]) -> C64 {
    C64::new(v[0], v[1])
}

impl MuPrimitive {
    pub fn part(&self) -> ProfilePart {
        match *self {
            MuPrimitive::ConstantDisk { center, radius, amplitude } => {
                let (c, a) = (c2(center), c2(amplitude));
                ProfilePart {
                    center: c,
                    radius,
                    f: Arc::new(move |z| if (z - c).norm() < radius { a } else { ZERO }),
                }
            }
            MuPrimitive::GaussianTruncated { center, radius, sigma, amplitude } => {
                let (c, a) = (c2(center), c2(amplitude));
                ProfilePart {
                    center: c,
                    radius,
                    f: Arc::new(move |z| {
                        let r2 = (z - c).norm_sqr();
                        if r2 < radius * radius {
                            a * (-r2 / (2.0 * sigma * sigma)).exp()
                        } else {
                            ZERO
                        }
                    }),
                }
            }
            MuPrimitive::SmoothBump { center, radius, amplitude } => {
                let (c, a) = (c2(center), c2(amplitude));
                ProfilePart {
                    center: c,
                    radius,
                    f: Arc::new(move |z| {
                        let t = (z - c).norm_sqr() / (radius * radius);
                        if t < 1.0 {
                            a * (1.0 - 1.0 / (1.0 - t)).exp()
                        } else {
                            ZERO
                        }
                    }),
                }
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            MuPrimitive::ConstantDisk { amplitude, .. }
            | MuPrimitive::GaussianTruncated { amplitude, .. }
            | MuPrimitive::SmoothBump { amplitude, .. } => c2(amplitude).norm(),
        }
    }
}

pub fn profile_from_primitives(prims: &[MuPrimitive]) -> MuProfile {
    let mut p = MuProfile::new();
    for q in prims {
        p.push(q.part());
    }
    p
}

/// Sub-cell description of a cell cut by a jump of μ.
#[derive(Clone, Debug)]
struct PartialCell {
    /// `μ(x_sub) / μ̄` for the `s × s` sub-cell centers.
    ratios: Vec<C64>,
    /// Laurent moments of the sub-cell density about the cell center.
    moments: Vec<C64>,
    shape: Vec<C64>,
}

const CELL_TERMS: usize = 16;
const CELL_SHAPE_TERMS: usize = 6;
/// Distance, in cells, beyond which cut cells use their moments.
const CELL_FAR: f64 = 4.0;

impl PartialCell {
    fn new(ratios: Vec<C64>, s: usize, h: f64) -> Self {
        let a = 0.5 * h / s as f64;
        let area = 4.0 * a * a;
        let m4 = square_fourth_moment(a);
        let mut moments = vec![ZERO; CELL_TERMS];
        let mut shape = vec![ZERO; CELL_SHAPE_TERMS];
        for (t, r) in ratios.iter().enumerate() {
            let (ia, ib) = (t % s, t / s);
            let d = C64::new(h * ((ia as f64 + 0.5) / s as f64 - 0.5), h * ((ib as f64 + 0.5) / s as f64 - 0.5));
            let mut p = C64::new(1.0, 0.0);
            for k in 0..CELL_TERMS {
                moments[k] += r * area * p;
                if k < CELL_SHAPE_TERMS {
                    shape[k] += r * m4 * p;
                }
                p *= d;
            }
        }
        PartialCell { ratios, moments, shape }
    }

    /// Cauchy response at offset `d` from the cell center via moments.
    fn cauchy_far(&self, d: C64) -> C64 {
        let q = 1.0 / d;
        let mut p = q;
        let mut s = ZERO;
        for m in &self.moments {
            s += m * p;
            p *= q;
        }
        let q4 = q * q * q * q;
        let mut p = q * q4;
        for (k, b) in self.shape.iter().enumerate() {
            s += b * p * binom4(k);
            p *= q;
        }
        s / std::f64::consts::PI
    }
}

/// Measurable dilatation field with cached sup-norm and optional exact profile.
#[derive(Clone, Debug)]
pub struct BeltramiCoefficient {
    field: ComplexField,
    sup_norm: f64,
    profile: Option<MuProfile>,
    supersample: usize,
    /// Sub-cell samples of cells cut by a jump of μ.
    cut: Option<Arc<Vec<(usize, Vec<C64>)>>>,
}

/// Default supersampling used when averaging a profile over cells.
pub const DEFAULT_SUPERSAMPLE: usize = 10;

impl BeltramiCoefficient {
    pub fn zero(grid: ComplexGrid) -> Self {
        BeltramiCoefficient { field: ComplexField::zeros(grid), sup_norm: 0.0, profile: None, supersample: 1, cut: None }
    }

    /// Wraps raw samples; rejects sup-norm ≥ 1 and support touching the grid edge.
    pub fn from_field(field: ComplexField) -> Result<Self> {
        let sup_norm = field.max_abs();
        if !(sup_norm < 1.0) {
            return Err(Error::DilatationTooLarge(sup_norm));
        }
        check_support(&field)?;
        Ok(BeltramiCoefficient { field, sup_norm, profile: None, supersample: 1, cut: None })
    }

    /// Cell averages of a pointwise profile.
    ///
    /// Cells whose corners and center all see μ (or all miss it) are averaged
    /// with a 2×2 Gauss rule; the remaining cells, cut by a jump of μ, use an
    /// `s × s` midpoint lattice whose samples are kept for the sub-cell model.
    pub fn from_profile(grid: ComplexGrid, profile: MuProfile, supersample: usize) -> Result<Self> {
        let s = supersample.max(1);
        let n = grid.resolution();
        let h = grid.spacing();
        let offs = sub_offsets(s, h);
        let g = 0.5 / 3f64.sqrt();
        let gauss = [C64::new(-g * h, -g * h), C64::new(g * h, -g * h), C64::new(-g * h, g * h), C64::new(g * h, g * h)];
        let mut values = vec![ZERO; grid.len()];
        let mut cut: Vec<(usize, Vec<C64>)> = Vec::new();
        for part in profile.parts() {
            let (fx, fy) = grid.locate(part.center);
            let r = part.radius / h + 1.0;
            let j0 = (fx - r).floor().max(0.0) as usize;
            let j1 = ((fx + r).ceil() as isize).clamp(0, n as isize - 1) as usize;
            let k0 = (fy - r).floor().max(0.0) as usize;
            let k1 = ((fy + r).ceil() as isize).clamp(0, n as isize - 1) as usize;
            let nx = j1 - j0 + 1;
            let corner0 = grid.node(j0, k0) - C64::new(0.5 * h, 0.5 * h);
            let corners: Vec<Vec<bool>> = (0..=k1 - k0 + 1)
                .into_par_iter()
                .map(|b| (0..=nx).map(|a| profile.eval(corner0 + C64::new(a as f64 * h, b as f64 * h)).norm() > 0.0).collect())
                .collect();
            let rows: Vec<(usize, Vec<(C64, Option<Vec<C64>>)>)> = (k0..=k1)
                .into_par_iter()
                .map(|k| {
                    let b = k - k0;
                    let row = (j0..=j1)
                        .map(|j| {
                            let a = j - j0;
                            let u = grid.node(j, k);
                            let flags = [corners[b][a], corners[b][a + 1], corners[b + 1][a], corners[b + 1][a + 1], profile.eval(u).norm() > 0.0];
                            if flags.iter().all(|&f| f == flags[0]) {
                                if !flags[0] {
                                    return (ZERO, None);
                                }
                                let g4: Vec<C64> = gauss.iter().map(|o| profile.eval(u + o)).collect();
                                if g4.iter().all(|&v| v == g4[0]) {
                                    return (g4[0], None);
                                }
                                (g4.iter().sum::<C64>() * 0.25, None)
                            } else {
                                let vals: Vec<C64> = offs.iter().map(|o| profile.eval(u + o)).collect();
                                let mut avg = vals.iter().sum::<C64>() / (vals.len() as f64);
                                // an average never exceeds its largest sample; undo rounding excess
                                let top = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
                                while avg.norm() > top {
                                    avg *= 1.0 - f64::EPSILON;
                                }
                                (avg, Some(vals))
                            }
                        })
                        .collect();
                    (k, row)
                })
                .collect();
            for (k, row) in rows {
                for (t, (v, sub)) in row.into_iter().enumerate() {
                    let idx = grid.index(j0 + t, k);
                    values[idx] += v;
                    if let Some(vals) = sub {
                        cut.push((idx, vals));
                    }
                }
            }
        }
        let field = ComplexField::from_values(grid, values)?;
        let sup_norm = field.max_abs();
        if !(sup_norm < 1.0) {
            return Err(Error::DilatationTooLarge(sup_norm));
        }
        check_support(&field)?;
        let radius = field.measured_support_radius();
        let field = if radius > 0.0 { field.with_support(radius) } else { field };
        Ok(BeltramiCoefficient { field, sup_norm, profile: Some(profile), supersample: s, cut: Some(Arc::new(cut)) })
    }

    pub fn field(&self) -> &ComplexField {
        &self.field
    }

    pub fn grid(&self) -> &ComplexGrid {
        self.field.grid()
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn profile(&self) -> Option<&MuProfile> {
        self.profile.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.sup_norm == 0.0
    }

    /// `c·μ`, keeping the profile.
    pub fn scaled(&self, c: C64) -> Result<Self> {
        let field = self.field.scale(c);
        let sup_norm = field.max_abs();
        if !(sup_norm < 1.0) {
            return Err(Error::DilatationTooLarge(sup_norm));
        }
        let profile = self.profile.as_ref().map(|p| MuProfile {
            parts: p
                .parts
                .iter()
                .map(|q| {
                    let f = q.f.clone();
                    ProfilePart { center: q.center, radius: q.radius, f: Arc::new(move |z| c * f(z)) }
                })
                .collect(),
        });
        let cut = self.cut.as_ref().map(|v| Arc::new(v.iter().map(|(i, vals)| (*i, vals.iter().map(|x| c * x).collect())).collect()));
        Ok(BeltramiCoefficient { field, sup_norm, profile, supersample: self.supersample, cut })
    }
}

fn sub_offsets(s: usize, h: f64) -> Vec<C64> {
    let mut v = Vec::with_capacity(s * s);
    for b in 0..s {
        for a in 0..s {
            v.push(C64::new(
                h * ((a as f64 + 0.5) / s as f64 - 0.5),
                h * ((b as f64 + 0.5) / s as f64 - 0.5),
            ));
        }
    }
    v
}

/// Solver settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_dilatation: f64,
    pub symbol: BeurlingSymbol,
    /// Chebyshev radius, in cells, of the sub-cell correction around jumps of μ.
    pub correction_radius: usize,
    /// Target points per axis used to average `S h` over a cut cell.
    pub target_subsamples: usize,
    /// Whether to use sub-cell corrections when a profile is available.
    pub subcell: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 200,
            max_dilatation: MAX_DILATATION,
            symbol: BeurlingSymbol::CellQuadrature,
            correction_radius: 3,
            target_subsamples: 4,
            subcell: true,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { tol, ..Default::default() }
    }
}

/// Sparse replacement of `S h` at cells near a jump of μ.
struct CorrectionRow {
    target: usize,
    base: Vec<(usize, C64)>,
    near: Vec<(usize, C64)>,
}

struct SubcellModel {
    s: usize,
    /// `partial_index[i]` indexes `cells` for cut cells.
    partial_index: Vec<u32>,
    cells: Vec<PartialCell>,
}

const NOT_PARTIAL: u32 = u32::MAX;

impl SubcellModel {
    fn build(mu: &BeltramiCoefficient) -> Option<SubcellModel> {
        let profile = mu.profile.as_ref()?;
        let grid = mu.grid();
        let s = mu.supersample;
        if s < 2 {
            return None;
        }
        let h = grid.spacing();
        let offs = sub_offsets(s, h);
        let scale = mu.sup_norm.max(f64::MIN_POSITIVE);
        let candidates: Vec<usize> = mu
            .field
            .values()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() > 1e-14 * scale)
            .map(|(i, _)| i)
            .collect();
        if let Some(cut) = &mu.cut {
            let mut partial_index = vec![NOT_PARTIAL; grid.len()];
            let mut cells = Vec::new();
            for (i, vals) in cut.iter() {
                let zeros = vals.iter().filter(|v| v.norm() == 0.0).count();
                let mbar = mu.field.values()[*i];
                if zeros == 0 || zeros == vals.len() || mbar.norm() == 0.0 {
                    continue;
                }
                partial_index[*i] = cells.len() as u32;
                cells.push(PartialCell::new(vals.iter().map(|v| v / mbar).collect(), s, grid.spacing()));
            }
            if cells.is_empty() {
                return None;
            }
            return Some(SubcellModel { s, partial_index, cells });
        }
        let found: Vec<Option<(usize, PartialCell)>> = candidates
            .par_iter()
            .map(|&i| {
                let u = grid.node_at(i);
                let vals: Vec<C64> = offs.iter().map(|o| profile.eval(u + o)).collect();
                let zeros = vals.iter().filter(|v| v.norm() == 0.0).count();
                if zeros == 0 || zeros == vals.len() {
                    return None;
                }
                let mbar = mu.field.values()[i];
                Some((i, PartialCell::new(vals.iter().map(|v| v / mbar).collect(), s, h)))
            })
            .collect();
        let mut partial_index = vec![NOT_PARTIAL; grid.len()];
        let mut cells = Vec::new();
        for (i, cell) in found.into_iter().flatten() {
            partial_index[i] = cells.len() as u32;
            cells.push(cell);
        }
        if cells.is_empty() {
            return None;
        }
        Some(SubcellModel { s, partial_index, cells })
    }

    fn partial(&self, i: usize) -> Option<&PartialCell> {
        match self.partial_index[i] {
            NOT_PARTIAL => None,
            p => Some(&self.cells[p as usize]),
        }
    }

    fn sub_centers(&self, grid: &ComplexGrid, i: usize) -> impl Iterator<Item = C64> + '_ {
        let u = grid.node_at(i);
        let h = grid.spacing();
        let s = self.s;
        (0..s * s).map(move |t| {
            let (a, b) = (t % s, t / s);
            u + C64::new(h * ((a as f64 + 0.5) / s as f64 - 0.5), h * ((b as f64 + 0.5) / s as f64 - 0.5))
        })
    }

    /// Beurling response at `p` to unit density `g` on a cut cell.
    fn beurling_subcell(&self, grid: &ComplexGrid, i: usize, cell: &PartialCell, p: C64) -> C64 {
        let a = 0.5 * grid.spacing() / self.s as f64;
        self.sub_centers(grid, i).zip(&cell.ratios).map(|(c, r)| r * beurling_cell_kernel(p - c, a)).sum()
    }

    fn cauchy_subcell(&self, grid: &ComplexGrid, i: usize, cell: &PartialCell, p: C64) -> C64 {
        let a = 0.5 * grid.spacing() / self.s as f64;
        self.sub_centers(grid, i).zip(&cell.ratios).map(|(c, r)| r * cauchy_cell_kernel(p - c, a)).sum()
    }

    fn rows(&self, mu: &BeltramiCoefficient, radius: usize, st: usize) -> Vec<CorrectionRow> {
        let grid = mu.grid();
        let n = grid.resolution();
        let h = grid.spacing();
        let half = 0.5 * h;
        let mbar = mu.field.values();
        let profile = mu.profile.as_ref().expect("subcell model requires a profile");
        let r = radius as isize;

        let mut is_target = vec![false; grid.len()];
        for (i, &p) in self.partial_index.iter().enumerate() {
            if p == NOT_PARTIAL {
                continue;
            }
            let (j, k) = ((i % n) as isize, (i / n) as isize);
            for dk in -r..=r {
                for dj in -r..=r {
                    let (jj, kk) = (j + dj, k + dk);
                    if jj >= 0 && kk >= 0 && (jj as usize) < n && (kk as usize) < n {
                        let t = grid.index(jj as usize, kk as usize);
                        if mbar[t].norm() > 0.0 {
                            is_target[t] = true;
                        }
                    }
                }
            }
        }
        let targets: Vec<usize> = (0..grid.len()).filter(|&i| is_target[i]).collect();
        let toffs: Vec<C64> = (0..st * st)
            .map(|t| {
                let (a, b) = (t % st, t / st);
                C64::new(h * ((a as f64 + 0.5) / st as f64 - 0.5), h * ((b as f64 + 0.5) / st as f64 - 0.5))
            })
            .collect();

        targets
            .par_iter()
            .map(|&t| {
                let (jt, kt) = ((t % n) as isize, (t / n) as isize);
                let zt = grid.node_at(t);
                let near: Vec<usize> = (-r..=r)
                    .flat_map(|dk| (-r..=r).map(move |dj| (jt + dj, kt + dk)))
                    .filter(|&(jj, kk)| jj >= 0 && kk >= 0 && (jj as usize) < n && (kk as usize) < n)
                    .map(|(jj, kk)| grid.index(jj as usize, kk as usize))
                    .filter(|&q| mbar[q].norm() > 0.0)
                    .collect();
                let mut base: Vec<(usize, C64)> = Vec::new();
                let mut coef: Vec<(usize, C64)> = near.iter().map(|&q| (q, ZERO)).collect();

                if self.partial(t).is_some() {
                    // average of S over the part of the cell carrying μ, weighted by μ
                    let pts: Vec<(C64, C64)> = toffs.iter().map(|o| (zt + o, profile.eval(zt + o))).collect();
                    let total: C64 = pts.iter().map(|p| p.1).sum();
                    let use_pts: Vec<(C64, C64)> = if total.norm() > 0.0 {
                        pts.into_iter().filter(|p| p.1.norm() > 0.0).map(|(p, m)| (p, m / total)).collect()
                    } else {
                        vec![(zt, C64::new(1.0, 0.0))]
                    };
                    for (p, w) in use_pts {
                        let (fx, fy) = grid.locate(p);
                        let j0 = (fx.floor() as isize).clamp(0, n as isize - 2) as usize;
                        let k0 = (fy.floor() as isize).clamp(0, n as isize - 2) as usize;
                        let ax = fx - j0 as f64;
                        let ay = fy - k0 as f64;
                        for (jj, kk, bw) in [
                            (j0, k0, (1.0 - ax) * (1.0 - ay)),
                            (j0 + 1, k0, ax * (1.0 - ay)),
                            (j0, k0 + 1, (1.0 - ax) * ay),
                            (j0 + 1, k0 + 1, ax * ay),
                        ] {
                            let q = grid.index(jj, kk);
                            let zq = grid.node_at(q);
                            base.push((q, w * bw));
                            for (src, c) in coef.iter_mut() {
                                *c -= w * bw * beurling_cell_kernel(zq - grid.node_at(*src), half);
                            }
                        }
                        for (src, c) in coef.iter_mut() {
                            *c += w * match self.partial(*src) {
                                Some(cell) => self.beurling_subcell(grid, *src, cell, p),
                                None => beurling_cell_kernel(p - grid.node_at(*src), half),
                            };
                        }
                    }
                } else {
                    base.push((t, C64::new(1.0, 0.0)));
                    for (src, c) in coef.iter_mut() {
                        if let Some(cell) = self.partial(*src) {
                            *c += self.beurling_subcell(grid, *src, cell, zt)
                                - beurling_cell_kernel(zt - grid.node_at(*src), half);
                        }
                    }
                }
                coef.retain(|(_, c)| c.norm() > 0.0);
                CorrectionRow { target: t, base, near: coef }
            })
            .collect()
    }
}

/// Diagnostics of a Beltrami solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub last_update: f64,
    pub corrected_rows: usize,
    pub partial_cells: usize,
}

/// Normalized solution `w^μ`: `w(0) = 0`, `w(1) = 1`, `w(∞) = ∞`.
pub struct NormalizedQCMap {
    mu: BeltramiCoefficient,
    correction: ComplexField,
    moebius: Mobius,
    support: Vec<usize>,
    model: Option<SubcellModel>,
    far: Vec<Block>,
    stats: SolveStats,
}

/// Square block of support cells with Laurent moments about its center.
struct Block {
    center: C64,
    radius: f64,
    cells: Vec<usize>,
    /// `Σ w (u − c)^k` for point weights `w` at `u`.
    monopole: Vec<C64>,
    /// Same moments for the square-shape term `∝ 1/(z − u)^5`.
    shape: Vec<C64>,
}

/// Cells per block side in far-field sums.
const BLOCK: usize = 16;
const MULTIPOLE_TERMS: usize = 30;
const SHAPE_TERMS: usize = 10;
/// Blocks farther than this many radii use the multipole expansion.
const FAR_RATIO: f64 = 3.0;

/// `∫_{[-a,a]²} t⁴ dA(t)` for a square of half side `a`.
fn square_fourth_moment(a: f64) -> f64 {
    let side = 2.0 * a;
    -side.powi(6) / 60.0
}

fn build_blocks(grid: &ComplexGrid, h: &[C64], support: &[usize], model: Option<&SubcellModel>) -> Vec<Block> {
    let n = grid.resolution();
    let nb = n.div_ceil(BLOCK);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nb * nb];
    for &i in support {
        let (j, k) = (i % n, i / n);
        members[(k / BLOCK) * nb + j / BLOCK].push(i);
    }
    let step = grid.spacing();
    let half = 0.5 * step;
    members
        .into_par_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(b, cells)| {
            let (bj, bk) = (b % nb, b / nb);
            let lo = grid.node(bj * BLOCK, bk * BLOCK);
            let center = lo + C64::new(0.5 * (BLOCK as f64 - 1.0) * step, 0.5 * (BLOCK as f64 - 1.0) * step);
            let radius = (0.5 * BLOCK as f64 * step) * std::f64::consts::SQRT_2;
            let mut monopole = vec![ZERO; MULTIPOLE_TERMS];
            let mut shape = vec![ZERO; SHAPE_TERMS];
            let mut add = |u: C64, w: C64, m4: C64| {
                let d = u - center;
                let mut p = C64::new(1.0, 0.0);
                for k in 0..MULTIPOLE_TERMS {
                    monopole[k] += w * p;
                    if k < SHAPE_TERMS {
                        shape[k] += m4 * p;
                    }
                    p *= d;
                }
            };
            for &i in &cells {
                let u = grid.node_at(i);
                match model.and_then(|m| m.partial(i).map(|c| (m, c))) {
                    Some((m, cell)) => {
                        let a = half / m.s as f64;
                        let area = 4.0 * a * a;
                        let m4 = square_fourth_moment(a);
                        for (c, r) in m.sub_centers(grid, i).zip(&cell.ratios) {
                            add(c, h[i] * r * area, h[i] * r * m4);
                        }
                    }
                    None => add(u, h[i] * step * step, h[i] * square_fourth_moment(half)),
                }
            }
            Block { center, radius, cells, monopole, shape }
        })
        .collect()
}

/// Binomial `C(k + 4, 4)`.
fn binom4(k: usize) -> f64 {
    let k = k as f64;
    (k + 1.0) * (k + 2.0) * (k + 3.0) * (k + 4.0) / 24.0
}

impl std::fmt::Debug for NormalizedQCMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NormalizedQCMap")
            .field("grid", self.mu.grid())
            .field("sup_norm", &self.mu.sup_norm)
            .field("moebius", &self.moebius)
            .field("stats", &self.stats)
            .finish()
    }
}

impl NormalizedQCMap {
    pub fn mu(&self) -> &BeltramiCoefficient {
        &self.mu
    }

    /// The solved density `h = ∂̄w` before normalization.
    pub fn correction(&self) -> &ComplexField {
        &self.correction
    }

    /// Post-composed affine normalization.
    pub fn moebius(&self) -> &Mobius {
        &self.moebius
    }

    pub fn stats(&self) -> SolveStats {
        self.stats
    }

    pub fn is_identity(&self) -> bool {
        self.support.is_empty()
    }

    /// `z + C[h](z)` before normalization.
    pub fn eval_raw(&self, z: C64) -> C64 {
        if self.support.is_empty() {
            return z;
        }
        let mut acc = ZERO;
        for block in &self.far {
            let d = z - block.center;
            if d.norm() > FAR_RATIO * block.radius {
                let q = 1.0 / d;
                let mut p = q;
                let mut s = ZERO;
                for a in &block.monopole {
                    s += a * p;
                    p *= q;
                }
                let q4 = q * q * q * q;
                let mut p = q * q4;
                for (k, b) in block.shape.iter().enumerate() {
                    s += b * p * binom4(k);
                    p *= q;
                }
                acc += s / std::f64::consts::PI;
            } else {
                acc += self.direct_sum(z, &block.cells);
            }
        }
        z + acc
    }

    /// Exact cell sums over `cells`, using sub-cells for nearby cut cells.
    fn direct_sum(&self, z: C64, cells: &[usize]) -> C64 {
        let grid = self.mu.grid();
        let h = self.correction.values();
        let half = 0.5 * grid.spacing();
        let mut acc = ZERO;
        match &self.model {
            None => {
                for &i in cells {
                    acc += h[i] * cauchy_cell_kernel(z - grid.node_at(i), half);
                }
            }
            Some(model) => {
                let far = CELL_FAR * grid.spacing();
                for &i in cells {
                    let d = z - grid.node_at(i);
                    let term = match model.partial(i) {
                        Some(cell) if d.norm() > far => cell.cauchy_far(d),
                        Some(cell) => model.cauchy_subcell(grid, i, cell, z),
                        None => cauchy_cell_kernel(d, half),
                    };
                    acc += h[i] * term;
                }
            }
        }
        acc
    }

    /// Direct-sum evaluation without far-field expansions.
    pub fn eval_raw_direct(&self, z: C64) -> C64 {
        if self.support.is_empty() {
            return z;
        }
        z + self.direct_sum(z, &self.support)
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.moebius.apply_finite(self.eval_raw(z))
    }

    pub fn eval_sphere(&self, p: SpherePoint) -> SpherePoint {
        match p {
            SpherePoint::Infinity => SpherePoint::Infinity,
            SpherePoint::Finite(z) => SpherePoint::Finite(self.eval(z)),
        }
    }

    /// Parallel evaluation at many points; output order matches input.
    pub fn eval_many(&self, zs: &[C64]) -> Vec<C64> {
        zs.par_iter().map(|&z| self.eval(z)).collect()
    }

    /// Normalized map sampled on the solver grid through the FFT Cauchy transform.
    pub fn sample_on_grid(&self, plan: Option<&TransformPlan>) -> ComplexField {
        let grid = *self.mu.grid();
        let raw: Vec<C64> = if self.support.is_empty() {
            grid.nodes().collect()
        } else {
            let owned;
            let plan = match plan {
                Some(p) => p,
                None => {
                    owned = TransformPlan::new(grid);
                    &owned
                }
            };
            let c = plan.cauchy_values(self.correction.values());
            grid.nodes().zip(c).map(|(z, c)| z + c).collect()
        };
        let values = raw.into_iter().map(|w| self.moebius.apply_finite(w)).collect();
        ComplexField::from_values(grid, values).expect("grid sizes agree")
    }

    /// Centered-difference residual `max |∂̄w − μ ∂w| / (1 + |∂w|)` over interior
    /// nodes at least `margin` cells from the grid edge.
    pub fn fd_residual(&self, margin: usize) -> f64 {
        let w = self.sample_on_grid(None);
        let grid = *self.mu.grid();
        let n = grid.resolution();
        let mu = self.mu.field();
        let mut worst = 0.0f64;
        for k in margin.max(1)..n - margin.max(1) {
            for j in margin.max(1)..n - margin.max(1) {
                if let Some((dz, dzb)) = w.wirtinger_at(j, k) {
                    let r = (dzb - mu.get(j, k) * dz).norm() / (1.0 + dz.norm());
                    worst = worst.max(r);
                }
            }
        }
        worst
    }

    /// Winding number of `w` along the circle `|z − c| = r` about `target`.
    pub fn winding_number(&self, c: C64, r: f64, target: C64, samples: usize) -> i64 {
        let pts: Vec<C64> = (0..samples)
            .map(|k| c + C64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / samples as f64))
            .collect();
        let img = self.eval_many(&pts);
        winding(&img, target)
    }
}

/// Winding number of a closed polygon about a point.
pub fn winding(curve: &[C64], target: C64) -> i64 {
    let mut total = 0.0;
    for i in 0..curve.len() {
        let a = curve[i] - target;
        let b = curve[(i + 1) % curve.len()] - target;
        total += (b / a).arg();
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i64
}

/// Solves `∂̄w = μ ∂w` and normalizes so that `w(0) = 0`, `w(1) = 1`.
pub fn solve_beltrami(mu: &BeltramiCoefficient, tol: f64) -> Result<NormalizedQCMap> {
    solve_beltrami_with(mu, &SolverOptions::with_tol(tol))
}

pub fn solve_beltrami_with(mu: &BeltramiCoefficient, opts: &SolverOptions) -> Result<NormalizedQCMap> {
    if !(opts.tol > 0.0) {
        return Err(Error::Evaluation(format!("solver tolerance must be positive, got {}", opts.tol)));
    }
    if mu.sup_norm > opts.max_dilatation {
        return Err(Error::DilatationTooLarge(mu.sup_norm));
    }
    let grid = *mu.grid();
    if mu.is_zero() {
        return Ok(NormalizedQCMap {
            mu: mu.clone(),
            correction: ComplexField::zeros(grid),
            moebius: Mobius::identity(),
            support: Vec::new(),
            model: None,
            far: Vec::new(),
            stats: SolveStats::default(),
        });
    }
    check_support(mu.field())?;
    let plan = TransformPlan::new(grid);
    let model = if opts.subcell { SubcellModel::build(mu) } else { None };
    let rows = model
        .as_ref()
        .map(|m| m.rows(mu, opts.correction_radius, opts.target_subsamples))
        .unwrap_or_default();

    let m = mu.field().values();
    let support: Vec<usize> = (0..grid.len()).filter(|&i| m[i].norm() > 0.0).collect();
    let mut h: Vec<C64> = m.to_vec();
    let mut last = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=opts.max_iter {
        let sb = plan.beurling_values(&h, opts.symbol);
        let mut sc = sb.clone();
        for row in &rows {
            let mut v = ZERO;
            for &(q, c) in &row.base {
                v += c * sb[q];
            }
            for &(q, c) in &row.near {
                v += c * h[q];
            }
            sc[row.target] = v;
        }
        let mut diff = 0.0;
        let mut next = vec![ZERO; h.len()];
        for &i in &support {
            next[i] = m[i] * (1.0 + sc[i]);
            diff += (next[i] - h[i]).norm_sqr();
        }
        let update = (diff / support.len() as f64).sqrt();
        h = next;
        iterations = it;
        if !update.is_finite() {
            return Err(Error::NoConvergence { iterations: it, last_update: update });
        }
        last = update;
        if update < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations, last_update: last });
    }
    let stats = SolveStats {
        iterations,
        last_update: last,
        corrected_rows: rows.len(),
        partial_cells: model.as_ref().map(|m| m.cells.len()).unwrap_or(0),
    };
    let mut map = NormalizedQCMap {
        mu: mu.clone(),
        correction: ComplexField::from_values(grid, h)?,
        moebius: Mobius::identity(),
        support,
        model,
        far: Vec::new(),
        stats,
    };
    map.far = build_blocks(&grid, map.correction.values(), &map.support, map.model.as_ref());
    let w0 = map.eval_raw(ZERO);
    let w1 = map.eval_raw(C64::new(1.0, 0.0));
    let d = w1 - w0;
    if d.norm() < 1e-300 {
        return Err(Error::Evaluation("normalization points collapse".into()));
    }
    map.moebius = Mobius::affine(1.0 / d, -w0 / d);
    Ok(map)
}

/// `μ = ∂̄f / ∂f` of a sampled map by second-order differences
/// (one-sided on the outermost ring of nodes).
pub fn dilatation(map: &ComplexField) -> Result<ComplexField> {
    let grid = *map.grid();
    let n = grid.resolution();
    let h = grid.spacing();
    let i = C64::new(0.0, 1.0);
    let d = |get: &dyn Fn(usize) -> C64, t: usize| -> C64 {
        if t == 0 {
            (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h)
        } else if t == n - 1 {
            (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * h)
        } else {
            (get(t + 1) - get(t - 1)) / (2.0 * h)
        }
    };
    let mut out = vec![ZERO; grid.len()];
    for k in 0..n {
        for j in 0..n {
            let fx = d(&|t| map.get(t, k), j);
            let fy = d(&|t| map.get(j, t), k);
            let dz = 0.5 * (fx - i * fy);
            let dzb = 0.5 * (fx + i * fy);
            let jac = dz.norm_sqr() - dzb.norm_sqr();
            let interior = j > 0 && k > 0 && j + 1 < n && k + 1 < n;
            let scale = dz.norm_sqr() + dzb.norm_sqr();
            if interior && jac <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::NotOrientationPreserving { j, k, jacobian: jac });
            }
            out[grid.index(j, k)] = if dz.norm() > 0.0 { dzb / dz } else { ZERO };
        }
    }
    ComplexField::from_values(grid, out)
}

/// Chain rule for Beltrami coefficients from sampled data:
/// `μ_{g∘f} = (μ_f + (μ_g∘f)θ) / (1 + conj(μ_f)(μ_g∘f)θ)`, `θ = conj(∂f)/∂f`.
pub fn compose_dilatation_sampled(mu_f: &ComplexField, df: &ComplexField, mu_g_at_f: &ComplexField) -> Result<ComplexField> {
    let grid = *mu_f.grid();
    if df.grid() != &grid || mu_g_at_f.grid() != &grid {
        return Err(Error::GridMismatch("composition inputs on different grids".into()));
    }
    let mut out = Vec::with_capacity(grid.len());
    for ((&mf, &d), &mg) in mu_f.values().iter().zip(df.values()).zip(mu_g_at_f.values()) {
        let theta = if d.norm() > 0.0 { d.conj() / d } else { C64::new(1.0, 0.0) };
        let den = 1.0 + mf.conj() * mg * theta;
        if den.norm() < 1e-12 {
            return Err(Error::DegenerateComposition(den.norm()));
        }
        out.push((mf + mg * theta) / den);
    }
    ComplexField::from_values(grid, out)
}

/// Dilatation of `g ∘ f` where `f` is a solved map and `μ_g∘f` is given on the grid.
pub fn compose_dilatation(
    mu_inner: &BeltramiCoefficient,
    inner_map: &NormalizedQCMap,
    mu_outer_pullback: &ComplexField,
) -> Result<ComplexField> {
    let w = inner_map.sample_on_grid(None);
    let grid = *w.grid();
    let n = grid.resolution();
    let mut df = vec![C64::new(1.0, 0.0); grid.len()];
    for k in 1..n - 1 {
        for j in 1..n - 1 {
            if let Some((dz, _)) = w.wirtinger_at(j, k) {
                df[grid.index(j, k)] = dz;
            }
        }
    }
    let df = ComplexField::from_values(grid, df)?;
    compose_dilatation_sampled(mu_inner.field(), &df, mu_outer_pullback)
}
