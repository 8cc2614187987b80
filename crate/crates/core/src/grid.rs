//! Uniform square grids in the plane and complex fields sampled on them.

use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C64 = Complex64;

/// `N × N` nodes at `center + (−hw + j h) + i(−hw + k h)`, `h = 2 hw / N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexGrid {
    center: C64,
    half_width: f64,
    n: usize,
}

impl ComplexGrid {
    pub fn new(center: C64, half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!("half_width must be positive, got {half_width}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("resolution must be a power of two ≥ 8, got {n}")));
        }
        if !(center.re.is_finite() && center.im.is_finite()) {
            return Err(Error::InvalidGrid("center is not finite".into()));
        }
        Ok(ComplexGrid { center, half_width, n })
    }

    pub fn center(&self) -> C64 {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major index, `j` fastest.
    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        k * self.n + j
    }

    #[inline]
    pub fn node(&self, j: usize, k: usize) -> C64 {
        let h = self.spacing();
        self.center + C64::new(-self.half_width + j as f64 * h, -self.half_width + k as f64 * h)
    }

    #[inline]
    pub fn node_at(&self, idx: usize) -> C64 {
        self.node(idx % self.n, idx / self.n)
    }

    /// Fractional node coordinates of a point.
    pub fn locate(&self, z: C64) -> (f64, f64) {
        let h = self.spacing();
        let d = z - self.center;
        ((d.re + self.half_width) / h, (d.im + self.half_width) / h)
    }

    pub fn nodes(&self) -> impl Iterator<Item = C64> + '_ {
        (0..self.len()).map(move |i| self.node_at(i))
    }

    pub fn same_as(&self, other: &ComplexGrid) -> bool {
        self == other
    }
}

/// `make_grid` under its operational name.
pub fn make_grid(center: C64, half_width: f64, n: usize) -> Result<ComplexGrid> {
    ComplexGrid::new(center, half_width, n)
}

/// Complex samples on a grid, optionally declared zero outside a disk about the grid center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexField {
    grid: ComplexGrid,
    values: Vec<C64>,
    support_radius: Option<f64>,
}

impl ComplexField {
    pub fn zeros(grid: ComplexGrid) -> Self {
        ComplexField { grid, values: vec![C64::new(0.0, 0.0); grid.len()], support_radius: None }
    }

    pub fn from_values(grid: ComplexGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}×{} grid",
                values.len(),
                grid.resolution(),
                grid.resolution()
            )));
        }
        Ok(ComplexField { grid, values, support_radius: None })
    }

    pub fn from_fn(grid: ComplexGrid, f: impl Fn(C64) -> C64) -> Self {
        let values = grid.nodes().map(f).collect();
        ComplexField { grid, values, support_radius: None }
    }

    /// Declares the support radius and zeroes every node outside it.
    pub fn with_support(mut self, radius: f64) -> Self {
        let c = self.grid.center();
        for (i, v) in self.values.iter_mut().enumerate() {
            if (self.grid.node_at(i) - c).norm() > radius {
                *v = C64::new(0.0, 0.0);
            }
        }
        self.support_radius = Some(radius);
        self
    }

    pub fn grid(&self) -> &ComplexGrid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    /// Distance from the grid center to the farthest nonzero node.
    pub fn measured_support_radius(&self) -> f64 {
        let c = self.grid.center();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() > 0.0)
            .map(|(i, _)| (self.grid.node_at(i) - c).norm())
            .fold(0.0, f64::max)
    }

    pub fn get(&self, j: usize, k: usize) -> C64 {
        self.values[self.grid.index(j, k)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Discrete `L²` norm `(Σ |v|² h²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        let h = self.grid.spacing();
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt() * h
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &ComplexField) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("adding fields on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        let support_radius = match (self.support_radius, other.support_radius) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        Ok(ComplexField { grid: self.grid, values, support_radius })
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        ComplexField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            support_radius: self.support_radius,
        }
    }

    /// Bicubic (Catmull-Rom) interpolation; `None` outside the interior stencil range.
    pub fn interpolate(&self, z: C64) -> Option<C64> {
        let n = self.grid.resolution() as isize;
        let (fx, fy) = self.grid.locate(z);
        let j0 = fx.floor() as isize;
        let k0 = fy.floor() as isize;
        if j0 < 1 || k0 < 1 || j0 + 2 >= n || k0 + 2 >= n {
            return None;
        }
        let tx = fx - j0 as f64;
        let ty = fy - k0 as f64;
        let wx = catmull_rom(tx);
        let wy = catmull_rom(ty);
        let mut acc = C64::new(0.0, 0.0);
        for (b, wyb) in wy.iter().enumerate() {
            let k = (k0 - 1 + b as isize) as usize;
            let mut row = C64::new(0.0, 0.0);
            for (a, wxa) in wx.iter().enumerate() {
                let j = (j0 - 1 + a as isize) as usize;
                row += self.get(j, k) * wxa;
            }
            acc += row * wyb;
        }
        Some(acc)
    }

    /// Little-endian layout: center re, center im, half_width (f64), N (u64),
    /// then `N²` row-major `(re, im)` f64 pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let g = self.grid;
        w.write_all(&g.center.re.to_le_bytes())?;
        w.write_all(&g.center.im.to_le_bytes())?;
        w.write_all(&g.half_width.to_le_bytes())?;
        w.write_all(&(g.n as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut b = [0u8; 8];
        let mut f = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let cre = f64::from_le_bytes(f(&mut r)?);
        let cim = f64::from_le_bytes(f(&mut r)?);
        let hw = f64::from_le_bytes(f(&mut r)?);
        let n = u64::from_le_bytes(f(&mut r)?) as usize;
        let grid = ComplexGrid::new(C64::new(cre, cim), hw, n)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let re = f64::from_le_bytes(f(&mut r)?);
            let im = f64::from_le_bytes(f(&mut r)?);
            values.push(C64::new(re, im));
        }
        ComplexField::from_values(grid, values)
    }

    /// Centered differences `(∂f, ∂̄f)` at an interior node.
    pub fn wirtinger_at(&self, j: usize, k: usize) -> Option<(C64, C64)> {
        let n = self.grid.resolution();
        if j == 0 || k == 0 || j + 1 >= n || k + 1 >= n {
            return None;
        }
        let h = self.grid.spacing();
        let fx = (self.get(j + 1, k) - self.get(j - 1, k)) / (2.0 * h);
        let fy = (self.get(j, k + 1) - self.get(j, k - 1)) / (2.0 * h);
        let i = C64::new(0.0, 1.0);
        Some((0.5 * (fx - i * fy), 0.5 * (fx + i * fy)))
    }
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Wirtinger derivatives of `f` at `z` by centered differences with step `h`.
pub fn wirtinger_fd(f: impl Fn(C64) -> C64, z: C64, h: f64) -> (C64, C64) {
    let i = C64::new(0.0, 1.0);
    let fx = (f(z + h) - f(z - h)) / (2.0 * h);
    let fy = (f(z + i * h) - f(z - i * h)) / (2.0 * h);
    (0.5 * (fx - i * fy), 0.5 * (fx + i * fy))
}
