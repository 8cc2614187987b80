//! Cauchy and Beurling transforms on a uniform grid.
//!
//! Both kernels are integrated exactly over each grid cell (piecewise-constant
//! density), and the resulting discrete convolutions are evaluated by FFT on a
//! zero-padded `2N × 2N` grid so no periodic images contribute.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, ComplexGrid};

type C64 = Complex64;

fn fre(x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    let l = if r2 == 0.0 { 0.0 } else { 0.5 * y * r2.ln() };
    let a = if x == 0.0 { 0.0 } else { x * (y / x).atan() };
    l + a
}

/// `∬ dA / v` over the rectangle `[x0, x1] × [y0, y1]`.
pub fn rect_integral_inv(x0: f64, x1: f64, y0: f64, y1: f64) -> C64 {
    let corner = |f: &dyn Fn(f64, f64) -> f64| f(x1, y1) - f(x0, y1) - f(x1, y0) + f(x0, y0);
    let re = corner(&fre);
    let im = -corner(&|x, y| fre(y, x));
    C64::new(re, im)
}

/// `∬ dA / v` over the square of half-side `a` centered at `d`.
pub fn cell_integral_inv(d: C64, a: f64) -> C64 {
    rect_integral_inv(d.re - a, d.re + a, d.im - a, d.im + a)
}

/// `∬ dA / v²` over a rectangle whose closure avoids the origin.
fn rect_integral_inv_sq_regular(x0: f64, x1: f64, y0: f64, y1: f64) -> C64 {
    // antiderivative i·log v, with arg taken continuously across the rectangle
    let c = C64::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)).conj();
    let g = |x: f64, y: f64| {
        let v = C64::new(x, y);
        C64::new(-(v * c).arg(), v.norm().ln())
    };
    g(x1, y1) - g(x0, y1) - g(x1, y0) + g(x0, y0)
}

/// Principal value of `∬ dA / v²` over `[x0, x1] × [y0, y1]`.
///
/// When the origin is interior the largest centered square (whose principal
/// value vanishes) is removed and the four remaining strips are integrated.
pub fn rect_integral_inv_sq(x0: f64, x1: f64, y0: f64, y1: f64) -> C64 {
    let inside = x0 < 0.0 && x1 > 0.0 && y0 < 0.0 && y1 > 0.0;
    if !inside {
        return rect_integral_inv_sq_regular(x0, x1, y0, y1);
    }
    let r = (-x0).min(x1).min(-y0).min(y1);
    let mut acc = C64::new(0.0, 0.0);
    if x0 < -r {
        acc += rect_integral_inv_sq_regular(x0, -r, y0, y1);
    }
    if x1 > r {
        acc += rect_integral_inv_sq_regular(r, x1, y0, y1);
    }
    if y0 < -r {
        acc += rect_integral_inv_sq_regular(-r, r, y0, -r);
    }
    if y1 > r {
        acc += rect_integral_inv_sq_regular(-r, r, r, y1);
    }
    acc
}

/// Principal value of `∬ dA / v²` over the square of half-side `a` centered at `d`.
pub fn cell_integral_inv_sq(d: C64, a: f64) -> C64 {
    if d.re.abs() < a && d.im.abs() < a {
        if d == C64::new(0.0, 0.0) {
            return C64::new(0.0, 0.0);
        }
        return rect_integral_inv_sq(d.re - a, d.re + a, d.im - a, d.im + a);
    }
    rect_integral_inv_sq_regular(d.re - a, d.re + a, d.im - a, d.im + a)
}

/// Cauchy kernel for a cell of half-side `a` at offset `d = z − u`.
#[inline]
pub fn cauchy_cell_kernel(d: C64, a: f64) -> C64 {
    cell_integral_inv(d, a) / PI
}

/// Beurling kernel `−(1/π) p.v.∬ 1/(u − z)²` for a cell at offset `d = z − u`.
#[inline]
pub fn beurling_cell_kernel(d: C64, a: f64) -> C64 {
    -cell_integral_inv_sq(d, a) / PI
}

/// Which Fourier symbol realizes the Beurling transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BeurlingSymbol {
    /// DFT of the cell-integrated principal-value kernel; accurate pointwise.
    #[default]
    CellQuadrature,
    /// `conj(ξ)/ξ` with the zero frequency set to 0; an exact isometry on
    /// zero-mean data.
    Spectral,
}

/// 2-D FFT on an `m × m` row-major buffer.
struct Fft2 {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 { m, fwd: planner.plan_fft_forward(m), inv: planner.plan_fft_inverse(m) }
    }

    fn rows(&self, data: &mut [C64], forward: bool) {
        let plan = if forward { &self.fwd } else { &self.inv };
        let scratch_len = plan.get_inplace_scratch_len();
        data.par_chunks_mut(self.m).for_each_init(
            || vec![C64::new(0.0, 0.0); scratch_len],
            |scratch, row| plan.process_with_scratch(row, scratch),
        );
    }

    fn transpose(&self, data: &mut [C64]) {
        let m = self.m;
        for i in 0..m {
            for j in (i + 1)..m {
                data.swap(i * m + j, j * m + i);
            }
        }
    }

    fn run(&self, data: &mut [C64], forward: bool) {
        self.rows(data, forward);
        self.transpose(data);
        self.rows(data, forward);
        self.transpose(data);
    }
}

/// Precomputed padded FFT machinery for one grid.
pub struct TransformPlan {
    grid: ComplexGrid,
    fft: Fft2,
    cauchy_hat: Vec<C64>,
    beurling_cell_hat: Vec<C64>,
    beurling_spectral: Vec<C64>,
}

impl std::fmt::Debug for TransformPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformPlan").field("grid", &self.grid).finish()
    }
}

impl TransformPlan {
    pub fn new(grid: ComplexGrid) -> Self {
        let n = grid.resolution();
        let m = 2 * n;
        let h = grid.spacing();
        let a = 0.5 * h;
        let fft = Fft2::new(m);
        let offset = |i: usize| if i < n { i as f64 } else { i as f64 - m as f64 };

        let mut cauchy = vec![C64::new(0.0, 0.0); m * m];
        let mut beurling = vec![C64::new(0.0, 0.0); m * m];
        cauchy.par_chunks_mut(m).zip(beurling.par_chunks_mut(m)).enumerate().for_each(|(b, (crow, brow))| {
            let y = offset(b) * h;
            for i in 0..m {
                let d = C64::new(offset(i) * h, y);
                crow[i] = cauchy_cell_kernel(d, a);
                brow[i] = beurling_cell_kernel(d, a);
            }
        });
        fft.run(&mut cauchy, true);
        fft.run(&mut beurling, true);

        let freq = |i: usize| if i < m / 2 { i as f64 } else { i as f64 - m as f64 };
        let mut spectral = vec![C64::new(0.0, 0.0); m * m];
        for b in 0..m {
            for i in 0..m {
                let xi = C64::new(freq(i), freq(b));
                if xi.norm_sqr() > 0.0 {
                    spectral[b * m + i] = xi.conj() / xi;
                }
            }
        }
        TransformPlan { grid, fft, cauchy_hat: cauchy, beurling_cell_hat: beurling, beurling_spectral: spectral }
    }

    pub fn grid(&self) -> &ComplexGrid {
        &self.grid
    }

    fn check(&self, h: &ComplexField) -> Result<()> {
        if h.grid() != &self.grid {
            return Err(Error::GridMismatch("field grid differs from the plan grid".into()));
        }
        check_support(h)
    }

    fn pad(&self, values: &[C64]) -> Vec<C64> {
        let n = self.grid.resolution();
        let m = 2 * n;
        let mut p = vec![C64::new(0.0, 0.0); m * m];
        for k in 0..n {
            p[k * m..k * m + n].copy_from_slice(&values[k * n..(k + 1) * n]);
        }
        p
    }

    fn apply_padded(&self, values: &[C64], symbol: &[C64]) -> Vec<C64> {
        let mut p = self.pad(values);
        self.fft.run(&mut p, true);
        p.par_iter_mut().zip(symbol.par_iter()).for_each(|(v, s)| *v *= s);
        self.fft.run(&mut p, false);
        let scale = 1.0 / (p.len() as f64);
        p.iter_mut().for_each(|v| *v *= scale);
        p
    }

    fn crop(&self, padded: &[C64]) -> Vec<C64> {
        let n = self.grid.resolution();
        let m = 2 * n;
        let mut out = Vec::with_capacity(n * n);
        for k in 0..n {
            out.extend_from_slice(&padded[k * m..k * m + n]);
        }
        out
    }

    /// Unchecked Cauchy transform of raw node values.
    pub fn cauchy_values(&self, values: &[C64]) -> Vec<C64> {
        self.crop(&self.apply_padded(values, &self.cauchy_hat))
    }

    /// Unchecked Beurling transform of raw node values.
    pub fn beurling_values(&self, values: &[C64], symbol: BeurlingSymbol) -> Vec<C64> {
        self.crop(&self.beurling_padded_values(values, symbol))
    }

    /// Beurling transform kept on the whole `2N × 2N` padded grid.
    pub fn beurling_padded_values(&self, values: &[C64], symbol: BeurlingSymbol) -> Vec<C64> {
        let s = match symbol {
            BeurlingSymbol::CellQuadrature => &self.beurling_cell_hat,
            BeurlingSymbol::Spectral => &self.beurling_spectral,
        };
        self.apply_padded(values, s)
    }

    pub fn cauchy(&self, h: &ComplexField) -> Result<ComplexField> {
        self.check(h)?;
        ComplexField::from_values(self.grid, self.cauchy_values(h.values()))
    }

    pub fn beurling(&self, h: &ComplexField, symbol: BeurlingSymbol) -> Result<ComplexField> {
        self.check(h)?;
        ComplexField::from_values(self.grid, self.beurling_values(h.values(), symbol))
    }
}

/// Rejects fields whose support reaches the outermost ring of nodes or whose
/// declared support radius is not inside the grid.
pub fn check_support(h: &ComplexField) -> Result<()> {
    let g = h.grid();
    let n = g.resolution();
    let hw = g.half_width();
    if let Some(r) = h.support_radius() {
        if r >= hw {
            return Err(Error::SupportTouchesBoundary { support: r, half_width: hw });
        }
    }
    let edge = (0..n).any(|t| {
        [h.get(t, 0), h.get(t, n - 1), h.get(0, t), h.get(n - 1, t)].iter().any(|v| v.norm() > 0.0)
    });
    if edge {
        return Err(Error::SupportTouchesBoundary { support: h.measured_support_radius(), half_width: hw });
    }
    Ok(())
}

/// `C[h](z) = (1/π) ∬ h(u)/(z − u) dA(u)` sampled on the grid of `h`.
pub fn cauchy_transform(h: &ComplexField) -> Result<ComplexField> {
    check_support(h)?;
    TransformPlan::new(*h.grid()).cauchy(h)
}

/// `S[h] = ∂C[h]` sampled on the grid of `h`, using the cell-quadrature symbol.
pub fn beurling_transform(h: &ComplexField) -> Result<ComplexField> {
    beurling_transform_with(h, BeurlingSymbol::CellQuadrature)
}

pub fn beurling_transform_with(h: &ComplexField, symbol: BeurlingSymbol) -> Result<ComplexField> {
    check_support(h)?;
    TransformPlan::new(*h.grid()).beurling(h, symbol)
}

/// Direct-sum Cauchy transform of node values at an arbitrary point.
pub fn cauchy_at(grid: &ComplexGrid, values: &[C64], z: C64) -> C64 {
    let a = 0.5 * grid.spacing();
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm_sqr() > 0.0)
        .map(|(i, v)| v * cauchy_cell_kernel(z - grid.node_at(i), a))
        .sum()
}
