//! Normalized univalent disk maps, their pre-Schwarzian coordinates and the
//! Schwarz-lemma bounds.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beltrami::winding;
use crate::error::{Error, Result};
use crate::series::Series;

type C64 = Complex64;
const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Default truncation order.
pub const DEFAULT_ORDER: usize = 40;
/// Coefficient magnitude treated as divergence in reconstruction.
pub const BLOW_UP: f64 = 1e8;
/// Radii used by the univalence witness.
pub const WITNESS_RADII: [f64; 3] = [0.5, 0.9, 0.99];

/// How a quasiconformal extension past the unit circle is obtained.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExtensionRecipe {
    #[default]
    None,
    /// Entire function; restriction to any larger disk extends it.
    Entire,
    /// The series converges on a disk of radius `radius > 1`.
    Analytic { radius: f64 },
    Reflection,
    Explicit { description: String },
}

/// `f(z) = Σ_{k=1}^{M} a_k z^k` with `a_1 ≠ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OqcFunction {
    coeffs: Vec<C64>,
    #[serde(default)]
    extension: ExtensionRecipe,
}

impl OqcFunction {
    /// Builds from `a_0, a_1, …`; `a_0` is overwritten with 0.
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        Self::with_extension(coeffs, ExtensionRecipe::None)
    }

    pub fn with_extension(mut coeffs: Vec<C64>, extension: ExtensionRecipe) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::TruncationTooShort(coeffs.len().saturating_sub(1)));
        }
        coeffs[0] = ZERO;
        if coeffs[1].norm() == 0.0 {
            return Err(Error::VanishingDerivative(ZERO));
        }
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Evaluation("non-finite coefficient".into()));
        }
        Ok(OqcFunction { coeffs, extension })
    }

    pub fn from_series(s: &Series) -> Result<Self> {
        Self::new(s.coeffs().to_vec())
    }

    /// `c·z`.
    pub fn affine(c: C64, order: usize) -> Result<Self> {
        let mut v = vec![ZERO; order + 1];
        v[1] = c;
        Self::with_extension(v, ExtensionRecipe::Entire)
    }

    /// Koebe function `z/(1 − z)²` truncated at `order`.
    pub fn koebe(order: usize) -> Result<Self> {
        Self::new((0..=order).map(|k| C64::new(k as f64, 0.0)).collect())
    }

    /// `z + a z²`.
    pub fn quadratic(a: C64, order: usize) -> Result<Self> {
        let mut v = vec![ZERO; order.max(2) + 1];
        v[1] = ONE;
        v[2] = a;
        Self::with_extension(v, ExtensionRecipe::Entire)
    }

    /// Named built-ins: `koebe`, `affine:c`, `quadratic:a`.
    pub fn builtin(name: &str, order: usize) -> Result<Self> {
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a.trim())),
            None => (name.trim(), None),
        };
        let arg = |d: &str| parse_complex(arg.unwrap_or(d));
        match head {
            "koebe" => Self::koebe(order),
            "affine" => Self::affine(arg("1")?, order),
            "quadratic" => Self::quadratic(arg("0")?, order),
            other => Err(Error::Parse(format!("unknown built-in function {other:?}"))),
        }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn series(&self) -> Series {
        Series::new(self.coeffs.clone())
    }

    /// Truncation order `M`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn extension(&self) -> &ExtensionRecipe {
        &self.extension
    }

    pub fn set_extension(&mut self, e: ExtensionRecipe) {
        self.extension = e;
    }

    pub fn derivative_at_zero(&self) -> C64 {
        self.coeffs[1]
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &a| acc * z + a)
    }

    /// `(f, f', f'')` at `z`.
    pub fn eval_derivatives(&self, z: C64) -> (C64, C64, C64) {
        let mut f = ZERO;
        let mut d1 = ZERO;
        let mut d2 = ZERO;
        for &a in self.coeffs.iter().rev() {
            d2 = d2 * z + 2.0 * d1;
            d1 = d1 * z + f;
            f = f * z + a;
        }
        (f, d1, d2)
    }

    /// Argument-principle witness on `|z| = r` for `r` in [`WITNESS_RADII`]: the
    /// image curve winds once about images of interior points, and `f'` does
    /// not change its winding.
    pub fn univalence_witness(&self) -> Result<()> {
        let k = 1024;
        for &r in &WITNESS_RADII {
            let circle: Vec<C64> = (0..k).map(|j| self.eval(C64::from_polar(r, TAU * j as f64 / k as f64))).collect();
            let mut targets = vec![ZERO];
            for j in 0..8 {
                targets.push(self.eval(C64::from_polar(0.5 * r, TAU * j as f64 / 8.0)));
            }
            for t in targets {
                let w = winding(&circle, t);
                if w != 1 {
                    return Err(Error::NotUnivalent(format!("winding {w} on |z| = {r}")));
                }
            }
            let dcurve: Vec<C64> =
                (0..k).map(|j| self.eval_derivatives(C64::from_polar(r, TAU * j as f64 / k as f64)).1).collect();
            if winding(&dcurve, ZERO) != 0 {
                return Err(Error::NotUnivalent(format!("f' has zeros inside |z| = {r}")));
            }
        }
        Ok(())
    }
}

/// Parses `a`, `bi`, `a+bi`, `a-bi`, or `[a, b]`.
pub fn parse_complex(s: &str) -> Result<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Parse(format!("cannot parse complex number {s:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some(inner) = t.strip_prefix('[').and_then(|x| x.strip_suffix(']')) {
        let (a, b) = inner.split_once(',').ok_or_else(bad)?;
        return Ok(C64::new(a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?));
    }
    if let Some(body) = t.strip_suffix('i') {
        // split at the last sign that is not part of an exponent
        let bytes = body.as_bytes();
        let mut split = None;
        for idx in (1..bytes.len()).rev() {
            if (bytes[idx] == b'+' || bytes[idx] == b'-') && !matches!(bytes[idx - 1], b'e' | b'E') {
                split = Some(idx);
                break;
            }
        }
        let im_of = |x: &str| -> Result<f64> {
            match x {
                "" | "+" => Ok(1.0),
                "-" => Ok(-1.0),
                v => v.parse().map_err(|_| bad()),
            }
        };
        return match split {
            Some(i) => Ok(C64::new(body[..i].parse().map_err(|_| bad())?, im_of(&body[i..])?)),
            None => Ok(C64::new(0.0, im_of(body)?)),
        };
    }
    Ok(C64::new(t.parse().map_err(|_| bad())?, 0.0))
}

/// An element of `A¹_∞(𝔻)`: a truncated series, optionally remembering the
/// exact quotient `f''/f'` it was derived from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreSchwarzian {
    series: Series,
    #[serde(skip)]
    source: Option<OqcFunction>,
}

impl PreSchwarzian {
    pub fn from_series(series: Series) -> Self {
        PreSchwarzian { series, source: None }
    }

    pub fn series(&self) -> &Series {
        &self.series
    }

    /// Series value; the exact quotient when the source map is known.
    pub fn eval(&self, z: C64) -> C64 {
        match &self.source {
            Some(f) => {
                let (_, d1, d2) = f.eval_derivatives(z);
                d2 / d1
            }
            None => self.series.eval(z),
        }
    }

    pub fn eval_series(&self, z: C64) -> C64 {
        self.series.eval(z)
    }

    pub fn add(&self, other: &PreSchwarzian) -> PreSchwarzian {
        PreSchwarzian::from_series(self.series.add(&other.series))
    }

    pub fn scale(&self, t: C64) -> PreSchwarzian {
        PreSchwarzian::from_series(self.series.scale(t))
    }
}

/// `𝒜(f) = f''/f'` as a formal quotient truncated at degree `M − 2`.
pub fn pre_schwarzian(f: &OqcFunction) -> Result<PreSchwarzian> {
    let m = f.order();
    if m < 8 {
        return Err(Error::TruncationTooShort(m));
    }
    // f' must not vanish on the sampled closed disk of radius 0.99
    let scale: f64 = f.coeffs.iter().enumerate().map(|(k, a)| k as f64 * a.norm()).sum::<f64>().max(1e-300);
    for &r in &[0.25, 0.5, 0.75, 0.9, 0.99] {
        for j in 0..256 {
            let z = C64::from_polar(r, TAU * j as f64 / 256.0);
            if f.eval_derivatives(z).1.norm() < 1e-12 * scale {
                return Err(Error::VanishingDerivative(z));
            }
        }
    }
    let s = f.series();
    let d1 = s.derivative();
    let d2 = d1.derivative();
    let q = d2.div(&d1, m - 1)?;
    Ok(PreSchwarzian { series: q, source: Some(f.clone()) })
}

/// Sup-norm estimate for an element of `A¹_∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormEstimate {
    /// Largest lattice value; a lower bound for the true supremum.
    pub value: f64,
    /// Richardson extrapolation of the radial maxima toward `|z| = 1`.
    pub extrapolated: f64,
    pub lower_bound: bool,
    /// Point where the lattice maximum was found.
    pub argmax: C64,
}

/// Lattice parameters for [`hyperbolic_norm`].
#[derive(Clone, Copy, Debug)]
pub struct NormLattice {
    pub radii: usize,
    pub angles: usize,
    /// `1 − r` at the outermost radius.
    pub min_gap: f64,
}

impl Default for NormLattice {
    fn default() -> Self {
        NormLattice { radii: 64, angles: 128, min_gap: 1e-6 }
    }
}

/// `sup (1 − |z|²)|v(z)|` over `r = 0` and geometric radii toward 1.
pub fn hyperbolic_norm(v: impl Fn(C64) -> C64) -> Result<NormEstimate> {
    hyperbolic_norm_with(v, NormLattice::default())
}

pub fn hyperbolic_norm_with(v: impl Fn(C64) -> C64, lat: NormLattice) -> Result<NormEstimate> {
    let weight = |z: C64| (1.0 - z.norm_sqr()) * v(z).norm();
    let mut best = weight(ZERO);
    let mut argmax = ZERO;
    let q = lat.min_gap.powf(1.0 / (lat.radii as f64 - 1.0));
    let mut radial = Vec::with_capacity(lat.radii);
    let mut best_ring = (0usize, 0usize);
    for i in 0..lat.radii {
        let r = 1.0 - q.powi(i as i32);
        let mut ring = if i == 0 { best } else { 0.0 };
        for j in 0..lat.angles {
            let z = C64::from_polar(r, TAU * j as f64 / lat.angles as f64);
            let w = weight(z);
            if !w.is_finite() {
                return Err(Error::NormDiverges(w));
            }
            if w > ring {
                ring = w;
            }
            if w > best {
                best = w;
                argmax = z;
                best_ring = (i, j);
            }
        }
        radial.push(ring);
    }
    // local refinement around the lattice maximum
    if argmax != ZERO {
        let (i, j) = best_ring;
        let dtheta = TAU / lat.angles as f64;
        let r_lo = 1.0 - q.powi(i.saturating_sub(1) as i32);
        let r_hi = 1.0 - q.powi((i + 1).min(lat.radii - 1) as i32);
        for a in 0..=32 {
            let r = r_lo + (r_hi - r_lo) * a as f64 / 32.0;
            for b in 0..=32 {
                let th = (j as f64 - 1.0 + 2.0 * b as f64 / 32.0) * dtheta;
                let z = C64::from_polar(r, th);
                let w = weight(z);
                if w > best {
                    best = w;
                    argmax = z;
                }
            }
        }
    }
    let n = radial.len();
    let extrapolated = if n >= 2 { (radial[n - 1] - q * radial[n - 2]) / (1.0 - q) } else { best };
    if best > 1e6 && n >= 2 && radial[n - 1] > radial[n - 2] {
        return Err(Error::NormDiverges(best));
    }
    Ok(NormEstimate { value: best, extrapolated, lower_bound: true, argmax })
}

/// Coordinates `(v, c) = (𝒜(f), f'(0))` with cached `‖v‖_{1,∞}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreSchwarzianCoords {
    pub v: PreSchwarzian,
    pub c: C64,
    pub norm: f64,
}

impl PreSchwarzianCoords {
    pub fn new(v: PreSchwarzian, c: C64) -> Result<Self> {
        if c.norm() == 0.0 {
            return Err(Error::VanishingDerivative(ZERO));
        }
        let norm = hyperbolic_norm(|z| v.eval(z))?.value;
        Ok(PreSchwarzianCoords { v, c, norm })
    }

    /// `‖(v, c)‖ = ‖v‖_{1,∞} + |c|`.
    pub fn direct_sum_norm(&self) -> f64 {
        self.norm + self.c.norm()
    }

    /// `(u₀ + t v, c₀ + t d)`: a complex line through these coordinates.
    pub fn along_line(&self, dir_v: &Series, dir_c: C64, t: C64) -> PreSchwarzianCoords {
        PreSchwarzianCoords {
            v: PreSchwarzian::from_series(self.v.series.add(&dir_v.scale(t))),
            c: self.c + t * dir_c,
            norm: f64::NAN,
        }
    }
}

/// `χ(f) = (𝒜(f), f'(0))`.
pub fn chi(f: &OqcFunction) -> Result<PreSchwarzianCoords> {
    let v = pre_schwarzian(f)?;
    PreSchwarzianCoords::new(v, f.derivative_at_zero())
}

/// `f(z) = c ∫₀^z exp(∫₀^ξ v) dξ` as a series of order `len(v) + 1`.
pub fn chi_inverse(coords: &PreSchwarzianCoords) -> Result<OqcFunction> {
    if coords.c.norm() == 0.0 {
        return Err(Error::VanishingDerivative(ZERO));
    }
    let v = coords.v.series();
    let m = v.len() + 1;
    let fprime = v.integrate().exp(m).scale(coords.c);
    for (k, a) in fprime.coeffs().iter().enumerate() {
        let mag = a.norm();
        if !(mag <= BLOW_UP) {
            return Err(Error::SeriesBlowUp { index: k, magnitude: mag });
        }
    }
    let f = fprime.integrate().truncate(m + 1);
    OqcFunction::new(f.coeffs().to_vec())
}

/// `f(z)` for `|z| < 1`.
pub fn point_evaluation(f: &OqcFunction, z: C64) -> Result<C64> {
    if z.norm() >= 1.0 {
        return Err(Error::OutsideDisk(z));
    }
    Ok(f.eval(z))
}

/// Result of the Schwarz-lemma checks on a disk-valued map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SchwarzReport {
    pub derivative: f64,
    pub norm: f64,
    /// `max |(1 − |z|²)𝒜(ψ)(z) − 2z̄|` over the probe lattice.
    pub pointwise: f64,
}

/// Slack tolerances for the Schwarz checks.
#[derive(Clone, Copy, Debug)]
pub struct SchwarzTolerances {
    pub derivative: f64,
    pub norm: f64,
}

impl Default for SchwarzTolerances {
    fn default() -> Self {
        SchwarzTolerances { derivative: 1e-9, norm: 1e-3 }
    }
}

/// Largest `|ψ|` on `|z| = 0.999`.
pub fn disk_valued_witness(psi: &OqcFunction) -> f64 {
    (0..2048).map(|j| psi.eval(C64::from_polar(0.999, TAU * j as f64 / 2048.0)).norm()).fold(0.0, f64::max)
}

/// `(|ψ'(0)|, ‖𝒜(ψ)‖_{1,∞})`, asserting the bounds 1 and 6 and the pointwise bound 4.
pub fn disk_schwarz_check(psi: &OqcFunction) -> Result<(f64, f64)> {
    let r = schwarz_report(psi)?;
    let tol = SchwarzTolerances::default();
    if r.derivative > 1.0 + tol.derivative {
        return Err(Error::BoundViolated(format!("|psi'(0)| = {}", r.derivative)));
    }
    if r.norm > 6.0 + tol.norm {
        return Err(Error::BoundViolated(format!("||A(psi)|| = {}", r.norm)));
    }
    if r.pointwise > 4.0 + tol.norm {
        return Err(Error::BoundViolated(format!("pointwise bound {}", r.pointwise)));
    }
    Ok((r.derivative, r.norm))
}

/// Measurements behind [`disk_schwarz_check`], without asserting the bounds.
pub fn schwarz_report(psi: &OqcFunction) -> Result<SchwarzReport> {
    let m = disk_valued_witness(psi);
    if m > 1.0 {
        return Err(Error::NotDiskValued(m));
    }
    let a = pre_schwarzian(psi)?;
    let norm = hyperbolic_norm(|z| a.eval(z))?.value;
    let pointwise = hyperbolic_norm(|z| {
        let w = 1.0 - z.norm_sqr();
        if w > 0.0 {
            (w * a.eval(z) - 2.0 * z.conj()) / w
        } else {
            ZERO
        }
    })?
    .value;
    Ok(SchwarzReport { derivative: psi.derivative_at_zero().norm(), norm, pointwise })
}

/// Family of a generated disk-valued univalent map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchwarzFamily {
    Rotation,
    DiskAutomorphism,
    ScaledKoebe,
    Quadratic,
}

/// A seeded disk-valued univalent map with `ψ(0) = 0`.
#[derive(Clone, Debug)]
pub struct SchwarzSample {
    pub family: SchwarzFamily,
    pub psi: OqcFunction,
    /// Largest coefficient beyond the truncation, as a tail check.
    pub tail: f64,
}

fn mobius_series(a: C64, b: C64, c: C64, d: C64, len: usize) -> Series {
    // (a z + b)/(c z + d) = (a z + b) · (1/d) Σ (−c/d)^k z^k
    let g = Series::geometric(1.0 / d, -c / d, len + 1);
    Series::new(vec![b, a]).mul(&g, len)
}

/// Generates `count` maps cycling through the four families.
pub fn schwarz_corpus<R: Rng>(rng: &mut R, count: usize, order: usize) -> Vec<SchwarzSample> {
    let mut out = Vec::with_capacity(count);
    let len = order + 1;
    let unit = |rng: &mut R| C64::from_polar(1.0, rng.gen_range(0.0..TAU));
    while out.len() < count {
        let family = match out.len() % 4 {
            0 => SchwarzFamily::Rotation,
            1 => SchwarzFamily::DiskAutomorphism,
            2 => SchwarzFamily::ScaledKoebe,
            _ => SchwarzFamily::Quadratic,
        };
        let (series, tail) = match family {
            SchwarzFamily::Rotation => {
                let a = unit(rng) * rng.gen_range(0.05..1.0);
                let mut s = Series::zeros(len);
                s.set(1, a);
                (s, 0.0)
            }
            SchwarzFamily::DiskAutomorphism => {
                // ψ = T ∘ (ρ S) with S(z) = e^{iα}(z − b)/(1 − b̄z), T moving ρS(0) back to 0
                let b = C64::from_polar(rng.gen_range(0.0..0.25), rng.gen_range(0.0..TAU));
                let rho = rng.gen_range(0.3..0.9);
                let e = unit(rng);
                let p = rho * e * (-b);
                // composite Möbius matrix T·diag(ρ)·S
                let s = [e, -e * b, -b.conj(), ONE];
                let t = [unit(rng), -p, -p.conj(), ONE];
                let t0 = t[0];
                let t = [t0, t0 * t[1], t[2], t[3]];
                let rs = [rho * s[0], rho * s[1], s[2], s[3]];
                let m = [
                    t[0] * rs[0] + t[1] * rs[2],
                    t[0] * rs[1] + t[1] * rs[3],
                    t[2] * rs[0] + t[3] * rs[2],
                    t[2] * rs[1] + t[3] * rs[3],
                ];
                let full = mobius_series(m[0], m[1], m[2], m[3], len + 16);
                let mut s = full.truncate(len);
                s.set(0, ZERO);
                let tail = full.coeffs()[len..].iter().map(|c| c.norm()).fold(0.0, f64::max);
                (s, tail)
            }
            SchwarzFamily::ScaledKoebe => {
                let r: f64 = rng.gen_range(0.05..0.6);
                let e = unit(rng);
                // e^{-iβ} K(e^{iβ} r z)(1 − r)²/r has coefficients k r^{k−1}(1 − r)² e^{i(k−1)β}
                let coef = |k: usize| {
                    C64::new(k as f64 * r.powi(k as i32 - 1) * (1.0 - r) * (1.0 - r), 0.0) * e.powi(k as i32 - 1)
                };
                let s = Series::from_fn(len, |k| if k == 0 { ZERO } else { coef(k) });
                let tail = (len..len + 16).map(|k| coef(k).norm()).fold(0.0, f64::max);
                (s, tail)
            }
            SchwarzFamily::Quadratic => {
                let a = C64::from_polar(rng.gen_range(0.0..0.5), rng.gen_range(0.0..TAU));
                let e = unit(rng);
                let k = 1.0 + a.norm();
                let mut s = Series::zeros(len);
                s.set(1, e / k);
                s.set(2, e * a / k);
                (s, 0.0)
            }
        };
        if let Ok(psi) = OqcFunction::new(series.coeffs().to_vec()) {
            out.push(SchwarzSample { family, psi, tail });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn affine_has_zero_pre_schwarzian() {
        let f = OqcFunction::affine(c(3.0, 0.0), 20).unwrap();
        let a = pre_schwarzian(&f).unwrap();
        assert!(a.series().max_abs_coeff() == 0.0);
        let x = chi(&f).unwrap();
        assert_eq!(x.c, c(3.0, 0.0));
        assert_eq!(x.norm, 0.0);
    }

    #[test]
    fn quadratic_pre_schwarzian() {
        let a = c(0.2, -0.1);
        let f = OqcFunction::quadratic(a, 40).unwrap();
        let v = pre_schwarzian(&f).unwrap();
        for z in [c(0.3, 0.1), c(-0.5, 0.2), c(0.0, 0.6)] {
            let exact = 2.0 * a / (1.0 + 2.0 * a * z);
            assert!((v.eval_series(z) - exact).norm() < 1e-10);
        }
    }

    #[test]
    fn norm_of_constant_and_pole() {
        let e = hyperbolic_norm(|_| c(0.0, 2.5)).unwrap();
        assert!((e.value - 2.5).abs() < 1e-15);
        let e = hyperbolic_norm(|z| 1.0 / (1.0 - z)).unwrap();
        assert!((e.value - 2.0).abs() < 1e-3);
    }

    #[test]
    fn norm_is_homogeneous() {
        let v = |z: C64| 1.0 / (1.0 - 0.5 * z) + z * z;
        let a = hyperbolic_norm(v).unwrap().value;
        let b = hyperbolic_norm(|z| 2.0 * v(z)).unwrap().value;
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn chi_inverse_of_zero_is_linear() {
        let coords = PreSchwarzianCoords::new(PreSchwarzian::from_series(Series::zeros(39)), c(0.5, 0.5)).unwrap();
        let f = chi_inverse(&coords).unwrap();
        assert_eq!(f.order(), 40);
        assert_eq!(f.coeffs()[1], c(0.5, 0.5));
        assert!(f.coeffs()[2..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn blow_up_detected() {
        let v = Series::from_fn(39, |k| if k == 0 { c(40.0, 0.0) } else { ZERO });
        let coords = PreSchwarzianCoords { v: PreSchwarzian::from_series(v), c: ONE, norm: 40.0 };
        assert!(matches!(chi_inverse(&coords), Err(Error::SeriesBlowUp { .. })));
    }

    #[test]
    fn point_evaluation_checks_disk() {
        let f = OqcFunction::koebe(40).unwrap();
        assert!(point_evaluation(&f, c(1.0, 0.0)).is_err());
        assert_eq!(point_evaluation(&f, ZERO).unwrap(), ZERO);
    }

    #[test]
    fn schwarz_extremal_cases() {
        let id = OqcFunction::affine(ONE, 16).unwrap();
        let (d, n) = disk_schwarz_check(&id).unwrap();
        assert_eq!((d, n), (1.0, 0.0));
        let half = OqcFunction::affine(c(0.5, 0.0), 16).unwrap();
        assert_eq!(disk_schwarz_check(&half).unwrap(), (0.5, 0.0));
        let big = OqcFunction::affine(c(1.5, 0.0), 16).unwrap();
        assert!(matches!(disk_schwarz_check(&big), Err(Error::NotDiskValued(_))));
    }

    #[test]
    fn builtins_parse() {
        assert_eq!(OqcFunction::builtin("affine:2-1i", 10).unwrap().coeffs()[1], c(2.0, -1.0));
        assert_eq!(OqcFunction::builtin("quadratic:0.25", 10).unwrap().coeffs()[2], c(0.25, 0.0));
        assert!(OqcFunction::builtin("nope", 10).is_err());
        assert_eq!(parse_complex("1e-3-2i").unwrap(), c(1e-3, -2.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("[1.5, 2]").unwrap(), c(1.5, 2.0));
    }

    #[test]
    fn corpus_is_disk_valued_and_univalent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for s in schwarz_corpus(&mut rng, 12, 64) {
            assert!(s.tail < 1e-12, "{:?} tail {}", s.family, s.tail);
            assert!(disk_valued_witness(&s.psi) <= 1.0);
            s.psi.univalence_witness().unwrap();
        }
    }

    #[test]
    fn json_shape() {
        let f = OqcFunction::quadratic(c(0.1, 0.0), 3).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.starts_with("{\"coeffs\":[[0.0,0.0],[1.0,0.0],[0.1,0.0]"), "{s}");
        let back: OqcFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }
}
