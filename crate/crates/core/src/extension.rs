//! Circle homeomorphisms and their quasiconformal extensions to the disk.
//!
//! A homeomorphism is stored through its lift `θ ↦ θ + p(θ)` with `p`
//! 2π-periodic. Extensions are built for the map being extended directly;
//! sewing extends `γ⁻¹` so that Beltrami coefficients are read off without
//! inverting the extension.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::Mobius;
use crate::surfaces::CapMap;

type C64 = Complex64;
const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Samples used to resample general homeomorphisms.
const RESAMPLE: usize = 1024;
/// Dilatation at which an extension is rejected.
pub const MAX_EXTENSION_DILATATION: f64 = 0.95;

/// An orientation-preserving circle homeomorphism.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CircleHomeo {
    Identity,
    /// `ζ ↦ e^{iβ} (ζ − a)/(1 − ā ζ)`.
    Mobius { a: C64, rotation: f64 },
    /// `θ ↦ θ + amplitude · sin(frequency θ + phase)`.
    Sin { amplitude: f64, frequency: u32, phase: f64 },
    /// `θ ↦ θ + shift + 2 Re Σ_{k≥1} modes[k−1] e^{ikθ}`.
    Fourier { shift: f64, modes: Vec<C64> },
}

impl CircleHomeo {
    pub fn sin(amplitude: f64, frequency: u32) -> Self {
        CircleHomeo::Sin { amplitude, frequency, phase: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CircleHomeo::Identity => Ok(()),
            CircleHomeo::Mobius { a, rotation } => {
                if !(a.norm() < 1.0) || !rotation.is_finite() {
                    return Err(Error::InvalidBoundary(format!("disk automorphism needs |a| < 1, got {a}")));
                }
                Ok(())
            }
            CircleHomeo::Sin { amplitude, frequency, phase } => {
                if *frequency == 0 || !phase.is_finite() || !(amplitude.abs() * (*frequency as f64) < 1.0) {
                    return Err(Error::InvalidBoundary(format!(
                        "sin reparametrization with amplitude {amplitude} and frequency {frequency} is not increasing"
                    )));
                }
                Ok(())
            }
            CircleHomeo::Fourier { shift, modes } => {
                if !shift.is_finite() || modes.iter().any(|m| !m.re.is_finite() || !m.im.is_finite()) {
                    return Err(Error::InvalidBoundary("non-finite Fourier data".into()));
                }
                let n = 4096;
                let dmin = (0..n).map(|j| self.derivative(TAU * j as f64 / n as f64)).fold(f64::INFINITY, f64::min);
                if !(dmin > 0.0) {
                    return Err(Error::InvalidBoundary(format!("lift is not increasing (min derivative {dmin:.3e})")));
                }
                Ok(())
            }
        }
    }

    /// Homeomorphism interpolating `e^{iθ_j} ↦ points[j]` at `θ_j = 2πj/K`.
    pub fn from_samples(points: &[C64]) -> Result<Self> {
        let k = points.len();
        if k < 8 {
            return Err(Error::InvalidBoundary("too few boundary samples".into()));
        }
        let mut lift = Vec::with_capacity(k);
        let mut prev = points[0].arg();
        let mut acc = prev;
        for p in points {
            if (p.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidBoundary(format!("sample {p} is off the unit circle")));
            }
            let mut d = p.arg() - prev;
            d -= TAU * (d / TAU).round();
            acc += d;
            prev = p.arg();
            lift.push(acc);
        }
        let mut d = points[0].arg() - prev;
        d -= TAU * (d / TAU).round();
        let total = acc + d - lift[0];
        if (total + TAU).abs() < 1e-6 {
            return Err(Error::InvalidBoundary("orientation reversed".into()));
        }
        if (total - TAU).abs() > 1e-6 {
            return Err(Error::InvalidBoundary(format!("samples wind {:.3} times", total / TAU)));
        }
        let periodic: Vec<f64> = lift.iter().enumerate().map(|(j, l)| l - TAU * j as f64 / k as f64).collect();
        let h = fourier_from_periodic(&periodic);
        h.validate()?;
        Ok(h)
    }

    /// The lift `θ + p(θ)`.
    pub fn lift(&self, t: f64) -> f64 {
        t + self.periodic(t)
    }

    pub fn periodic(&self, t: f64) -> f64 {
        match self {
            CircleHomeo::Identity => 0.0,
            CircleHomeo::Mobius { a, rotation } => rotation + 2.0 * (1.0 - a * C64::from_polar(1.0, -t)).arg(),
            CircleHomeo::Sin { amplitude, frequency, phase } => amplitude * ((*frequency as f64) * t + phase).sin(),
            CircleHomeo::Fourier { shift, modes } => {
                let e = C64::from_polar(1.0, t);
                let mut p = e;
                let mut s = ZERO;
                for m in modes {
                    s += m * p;
                    p *= e;
                }
                shift + 2.0 * s.re
            }
        }
    }

    /// Derivative of the lift.
    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            CircleHomeo::Identity => 1.0,
            CircleHomeo::Mobius { a, .. } => {
                let z = C64::from_polar(1.0, t);
                (1.0 - a.norm_sqr()) / (z - a).norm_sqr()
            }
            CircleHomeo::Sin { amplitude, frequency, phase } => {
                let k = *frequency as f64;
                1.0 + amplitude * k * (k * t + phase).cos()
            }
            CircleHomeo::Fourier { modes, .. } => {
                let e = C64::from_polar(1.0, t);
                let mut p = e;
                let mut s = ZERO;
                for (k, m) in modes.iter().enumerate() {
                    s += m * p * I * (k + 1) as f64;
                    p *= e;
                }
                1.0 + 2.0 * s.re
            }
        }
    }

    pub fn eval(&self, z: C64) -> C64 {
        if let CircleHomeo::Identity = self {
            return z;
        }
        C64::from_polar(1.0, self.lift(z.arg()))
    }

    /// Solves `lift(θ) = phi`.
    pub fn inverse_lift(&self, phi: f64) -> f64 {
        if let CircleHomeo::Identity = self {
            return phi;
        }
        let bound = self.periodic_bound() + 1e-9;
        let (mut lo, mut hi) = (phi - bound, phi + bound);
        let mut t = phi - self.periodic(phi);
        for _ in 0..100 {
            let f = self.lift(t) - phi;
            if f.abs() < 1e-15 * (1.0 + phi.abs()) {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let step = t - f / self.derivative(t);
            t = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 {
                break;
            }
        }
        t
    }

    fn periodic_bound(&self) -> f64 {
        match self {
            CircleHomeo::Identity => 0.0,
            CircleHomeo::Mobius { rotation, .. } => rotation.abs() + PI,
            CircleHomeo::Sin { amplitude, .. } => amplitude.abs(),
            CircleHomeo::Fourier { shift, modes } => shift.abs() + 2.0 * modes.iter().map(|m| m.norm()).sum::<f64>(),
        }
    }

    /// The Möbius map when the homeomorphism is the restriction of one.
    pub fn as_mobius(&self) -> Option<Mobius> {
        match self {
            CircleHomeo::Identity => Some(Mobius::identity()),
            CircleHomeo::Mobius { a, rotation } => Mobius::disk_automorphism(*a, *rotation).ok(),
            _ => None,
        }
    }

    pub fn inverse(&self) -> CircleHomeo {
        match self {
            CircleHomeo::Identity => CircleHomeo::Identity,
            CircleHomeo::Mobius { a, rotation } => {
                CircleHomeo::Mobius { a: -a * C64::from_polar(1.0, *rotation), rotation: -rotation }
            }
            _ => {
                let k = RESAMPLE;
                let periodic: Vec<f64> = (0..k)
                    .map(|j| {
                        let phi = TAU * j as f64 / k as f64;
                        self.inverse_lift(phi) - phi
                    })
                    .collect();
                fourier_from_periodic(&periodic)
            }
        }
    }

    /// `(shift, modes)` of the periodic part.
    pub fn periodic_modes(&self) -> (f64, Vec<C64>) {
        match self {
            CircleHomeo::Identity => (0.0, Vec::new()),
            CircleHomeo::Fourier { shift, modes } => (*shift, modes.clone()),
            CircleHomeo::Sin { amplitude, frequency, phase } => {
                let mut modes = vec![ZERO; *frequency as usize];
                modes[*frequency as usize - 1] = C64::from_polar(*amplitude, *phase) / (2.0 * I);
                (0.0, modes)
            }
            CircleHomeo::Mobius { .. } => {
                let periodic: Vec<f64> = (0..RESAMPLE).map(|j| self.periodic(TAU * j as f64 / RESAMPLE as f64)).collect();
                match fourier_from_periodic(&periodic) {
                    CircleHomeo::Fourier { shift, modes } => (shift, modes),
                    _ => unreachable!(),
                }
            }
        }
    }
}

/// Trigonometric interpolant of periodic samples, trailing negligible modes dropped.
fn fourier_from_periodic(periodic: &[f64]) -> CircleHomeo {
    let k = periodic.len();
    let mut buf: Vec<C64> = periodic.iter().map(|&v| C64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(k).process(&mut buf);
    let inv = 1.0 / k as f64;
    let shift = buf[0].re * inv;
    let mut modes: Vec<C64> = (1..k / 2).map(|m| buf[m] * inv).collect();
    let scale = modes.iter().map(|m| m.norm()).fold(shift.abs(), f64::max).max(1e-300);
    while modes.last().is_some_and(|m| m.norm() < 1e-15 * scale.max(1.0)) {
        modes.pop();
    }
    CircleHomeo::Fourier { shift, modes }
}

/// Cubic Hermite table of a lift on a uniform grid, for fast repeated evaluation.
#[derive(Clone, Debug)]
struct LiftTable {
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl LiftTable {
    const SIZE: usize = 8192;

    fn new(h: &CircleHomeo) -> Self {
        let n = Self::SIZE;
        let pts: Vec<f64> = (0..=n).map(|j| TAU * j as f64 / n as f64).collect();
        LiftTable { values: pts.iter().map(|&t| h.periodic(t)).collect(), derivs: pts.iter().map(|&t| h.derivative(t) - 1.0).collect() }
    }

    fn periodic(&self, t: f64) -> f64 {
        let n = Self::SIZE;
        let step = TAU / n as f64;
        let s = t.rem_euclid(TAU) / step;
        let j = (s.floor() as usize).min(n - 1);
        let x = s - j as f64;
        let (p0, p1) = (self.values[j], self.values[j + 1]);
        let (m0, m1) = (self.derivs[j] * step, self.derivs[j + 1] * step);
        let x2 = x * x;
        let x3 = x2 * x;
        (2.0 * x3 - 3.0 * x2 + 1.0) * p0 + (x3 - 2.0 * x2 + x) * m0 + (-2.0 * x3 + 3.0 * x2) * p1 + (x3 - x2) * m1
    }

    fn eval(&self, z: C64) -> C64 {
        let t = z.arg();
        C64::from_polar(1.0, t + self.periodic(t))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionMethod {
    Analytic,
    BeurlingAhlfors,
    #[default]
    DouadyEarle,
    /// `M ∘ R` with `R(u) = u (1 − κ(1 − |u|²)³)`, for Möbius reparametrizations only.
    /// The dilatation vanishes to second order at the circle.
    RadialStretch,
}

/// Parameter `κ` of the radial stretch.
pub const RADIAL_STRETCH: f64 = 0.5;

/// `(F(s), F'(s))` for the radial profile `R(u) = u F(|u|²)`.
fn radial_profile(s: f64) -> (f64, f64) {
    if s >= 1.0 {
        return (1.0, 0.0);
    }
    let t = 1.0 - s;
    (1.0 - RADIAL_STRETCH * t * t * t, 3.0 * RADIAL_STRETCH * t * t)
}

fn radial_dilatation(u: C64) -> C64 {
    let s = u.norm_sqr();
    let (f, df) = radial_profile(s);
    u * u * df / (f + s * df)
}

impl std::str::FromStr for ExtensionMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(ExtensionMethod::Analytic),
            "beurling-ahlfors" => Ok(ExtensionMethod::BeurlingAhlfors),
            "douady-earle" => Ok(ExtensionMethod::DouadyEarle),
            "radial-stretch" => Ok(ExtensionMethod::RadialStretch),
            _ => Err(Error::Parse(format!("unknown extension method {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Mobius(Mobius),
    Ahlfors { shift: f64, modes: Vec<C64> },
    Radial(Mobius),
    Douady { table: LiftTable, lattice: PolarLattice },
}

/// Dilatation samples on rings `r_i` × angles, bilinearly interpolated.
#[derive(Clone, Debug)]
struct PolarLattice {
    radii: Vec<f64>,
    angles: usize,
    mu: Vec<C64>,
}

impl PolarLattice {
    fn build(radii: Vec<f64>, angles: usize, f: impl Fn(C64) -> C64 + Sync) -> Self {
        let pts: Vec<C64> = radii
            .iter()
            .flat_map(|&r| (0..angles).map(move |j| C64::from_polar(r, TAU * j as f64 / angles as f64)))
            .collect();
        let mu = pts.par_iter().map(|&u| f(u)).collect();
        PolarLattice { radii, angles, mu }
    }

    fn eval(&self, u: C64) -> C64 {
        let r = u.norm();
        let nr = self.radii.len();
        let (i, fr) = if r <= self.radii[0] {
            (0, 0.0)
        } else if r >= self.radii[nr - 1] {
            (nr - 2, 1.0)
        } else {
            let i = self.radii.partition_point(|&x| x <= r) - 1;
            (i, (r - self.radii[i]) / (self.radii[i + 1] - self.radii[i]))
        };
        let s = u.arg().rem_euclid(TAU) / TAU * self.angles as f64;
        let j = (s.floor() as usize) % self.angles;
        let ft = s - s.floor();
        let j1 = (j + 1) % self.angles;
        let at = |a: usize, b: usize| self.mu[a * self.angles + b];
        let lo = at(i, j) * (1.0 - ft) + at(i, j1) * ft;
        let hi = at(i + 1, j) * (1.0 - ft) + at(i + 1, j1) * ft;
        lo * (1.0 - fr) + hi * fr
    }

    fn sup(&self) -> f64 {
        self.mu.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }
}

/// A quasiconformal self-map of the closed disk extending a circle homeomorphism.
#[derive(Clone, Debug)]
pub struct DiskExtension {
    method: ExtensionMethod,
    homeo: CircleHomeo,
    kind: Kind,
    sup: f64,
}

impl DiskExtension {
    pub fn new(h: &CircleHomeo, method: ExtensionMethod) -> Result<Self> {
        h.validate()?;
        let kind = match (method, h.as_mobius()) {
            // every method extends the identity by the identity
            (_, Some(m)) if m.is_identity() => Kind::Mobius(m),
            // both the analytic and the Douady-Earle extension of a Möbius map are that map
            (ExtensionMethod::Analytic | ExtensionMethod::DouadyEarle, Some(m)) => Kind::Mobius(m),
            (ExtensionMethod::Analytic, None) => {
                return Err(Error::InvalidBoundary("analytic extension needs a Möbius reparametrization".into()))
            }
            (ExtensionMethod::RadialStretch, Some(m)) => Kind::Radial(m),
            (ExtensionMethod::RadialStretch, None) => {
                return Err(Error::InvalidBoundary("radial stretch needs a Möbius reparametrization".into()))
            }
            (ExtensionMethod::BeurlingAhlfors, _) => {
                let (shift, modes) = h.periodic_modes();
                Kind::Ahlfors { shift, modes }
            }
            (ExtensionMethod::DouadyEarle, None) => {
                let table = LiftTable::new(h);
                let lattice = PolarLattice::build(de_radii(), 96, |u| de_dilatation(&table, u));
                Kind::Douady { table, lattice }
            }
        };
        let mut ext = DiskExtension { method, homeo: h.clone(), kind, sup: 0.0 };
        ext.sup = match &ext.kind {
            Kind::Mobius(_) => 0.0,
            Kind::Radial(_) => (0..=4096).map(|j| radial_dilatation(C64::new((j as f64 / 4096.0).sqrt(), 0.0)).norm()).fold(0.0, f64::max),
            Kind::Douady { lattice, .. } => lattice.sup(),
            Kind::Ahlfors { .. } => {
                let radii: Vec<f64> = de_radii();
                radii
                    .par_iter()
                    .map(|&r| (0..96).map(|j| ext.dilatation(C64::from_polar(r, TAU * j as f64 / 96.0)).norm()).fold(0.0, f64::max))
                    .reduce(|| 0.0, f64::max)
            }
        };
        if !(ext.sup < MAX_EXTENSION_DILATATION) {
            return Err(Error::ExtensionTooWild(ext.sup));
        }
        Ok(ext)
    }

    pub fn method(&self) -> ExtensionMethod {
        self.method
    }

    pub fn homeo(&self) -> &CircleHomeo {
        &self.homeo
    }

    /// Largest dilatation measured on the interior lattice.
    pub fn sup_dilatation(&self) -> f64 {
        self.sup
    }

    pub fn is_conformal(&self) -> bool {
        matches!(self.kind, Kind::Mobius(_))
    }

    pub fn as_mobius(&self) -> Option<Mobius> {
        match self.kind {
            Kind::Mobius(m) => Some(m),
            _ => None,
        }
    }

    pub fn eval(&self, u: C64) -> C64 {
        match &self.kind {
            Kind::Mobius(m) => m.apply_finite(u),
            Kind::Ahlfors { shift, modes } => ba_eval(*shift, modes, u).0,
            Kind::Radial(m) => m.apply_finite(u * radial_profile(u.norm_sqr()).0),
            Kind::Douady { table, .. } => {
                if u.norm() >= 1.0 {
                    table.eval(u / u.norm())
                } else {
                    de_eval(table, u, de_nodes(u.norm()))
                }
            }
        }
    }

    /// Beltrami coefficient `∂̄Ψ/∂Ψ` at `u`.
    pub fn dilatation(&self, u: C64) -> C64 {
        match &self.kind {
            Kind::Mobius(_) => ZERO,
            Kind::Ahlfors { shift, modes } => ba_eval(*shift, modes, u).1,
            Kind::Radial(_) => radial_dilatation(u),
            Kind::Douady { lattice, .. } => lattice.eval(u),
        }
    }

    /// Solves `Ψ(u) = w` by damped Newton with a finite-difference Jacobian.
    pub fn inverse_point(&self, w: C64) -> Result<C64> {
        match &self.kind {
            Kind::Mobius(m) => return Ok(m.inverse().apply_finite(w)),
            Kind::Radial(m) => {
                let v = m.inverse().apply_finite(w);
                let rho = v.norm();
                if rho == 0.0 {
                    return Ok(v);
                }
                if rho >= 1.0 {
                    return Ok(v);
                }
                // solve r F(r²) = ρ
                let mut r = rho;
                for _ in 0..60 {
                    let (f0, df) = radial_profile(r * r);
                    let f = r * f0 - rho;
                    r = (r - f / (f0 + 2.0 * r * r * df)).clamp(0.0, 1.0);
                    if f.abs() < 1e-16 {
                        break;
                    }
                }
                return Ok(v * (r / rho));
            }
            _ => {}
        }
        let mut u = self.homeo.inverse().eval(C64::from_polar(1.0, w.arg())) * w.norm();
        for _ in 0..60 {
            let f = self.eval(u) - w;
            if f.norm() < 1e-13 {
                return Ok(u);
            }
            let d = 1e-6 * (1.0 - u.norm()).clamp(1e-3, 1.0);
            let fx = (self.eval(u + d) - self.eval(u - d)) / (2.0 * d);
            let fy = (self.eval(u + I * d) - self.eval(u - I * d)) / (2.0 * d);
            let det = fx.re * fy.im - fx.im * fy.re;
            if det.abs() < 1e-300 {
                break;
            }
            let dx = (fy.im * f.re - fy.re * f.im) / det;
            let dy = (-fx.im * f.re + fx.re * f.im) / det;
            let mut step = C64::new(-dx, -dy);
            while (u + step).norm() >= 1.0 {
                step *= 0.5;
            }
            u += step;
        }
        Err(Error::NoConvergence { iterations: 60, last_update: (self.eval(u) - w).norm() })
    }
}

/// Ring radii clustered towards the boundary.
fn de_radii() -> Vec<f64> {
    let n = 32;
    (0..=n).map(|i| 1.0 - 10f64.powf(-2.0 * i as f64 / n as f64)).collect()
}

fn de_nodes(r: f64) -> usize {
    ((12.0 / (1.0 - r).max(1e-6)).ceil() as usize).clamp(64, 16384)
}

/// Douady-Earle barycentre of `h` pulled back by `T_u`, with `k` nodes.
fn de_eval(table: &LiftTable, u: C64, k: usize) -> C64 {
    let ys: Vec<C64> = (0..k)
        .map(|j| {
            let e = C64::from_polar(1.0, TAU * (j as f64 + 0.5) / k as f64);
            table.eval((e + u) / (1.0 + u.conj() * e))
        })
        .collect();
    let inv = 1.0 / k as f64;
    let mut w = ys.iter().sum::<C64>() * inv;
    for _ in 0..100 {
        let (mut m, mut s) = (ZERO, ZERO);
        for y in &ys {
            let v = (y - w) / (1.0 - w.conj() * y);
            m += v;
            s += v * v;
        }
        m *= inv;
        s *= inv;
        let mut c = (m + s * m.conj()) / (1.0 - s.norm_sqr());
        if !(c.norm() < 0.5) {
            c = m * (0.5 / m.norm().max(0.5));
        }
        w = (c + w) / (1.0 + w.conj() * c);
        if m.norm() < 1e-15 {
            break;
        }
    }
    w
}

fn de_dilatation(table: &LiftTable, u: C64) -> C64 {
    let r = u.norm();
    let k = de_nodes(r);
    let d = 1e-3 * (1.0 - r).min(0.1);
    let fx = (de_eval(table, u + d, k) - de_eval(table, u - d, k)) / (2.0 * d);
    let fy = (de_eval(table, u + I * d, k) - de_eval(table, u - I * d, k)) / (2.0 * d);
    let fz = (fx - I * fy) * 0.5;
    let fzb = (fx + I * fy) * 0.5;
    fzb / fz
}

/// `(e^{iα} − 1)/(iα)` without cancellation.
fn expm1_ratio(alpha: f64) -> C64 {
    if alpha == 0.0 {
        return C64::new(1.0, 0.0);
    }
    let s = (0.5 * alpha).sin();
    C64::new(alpha.sin() / alpha, 2.0 * s * s / alpha)
}

/// Beurling-Ahlfors extension transported to the disk: `(Ψ(u), μ_Ψ(u))`.
fn ba_eval(shift: f64, modes: &[C64], u: C64) -> (C64, C64) {
    let r = u.norm();
    if r == 0.0 {
        return (ZERO, ZERO);
    }
    let x = u.arg();
    let y = -r.ln();
    let h = |s: f64| {
        let e = C64::from_polar(1.0, s);
        let mut p = e;
        let mut acc = ZERO;
        for m in modes {
            acc += m * p;
            p *= e;
        }
        s + shift + 2.0 * acc.re
    };
    if y <= 0.0 {
        return (C64::from_polar(1.0, h(x)), ZERO);
    }
    let e = C64::from_polar(1.0, x);
    let mut p = e;
    let (mut sp, mut sm) = (ZERO, ZERO);
    for (k, m) in modes.iter().enumerate() {
        let ky = (k + 1) as f64 * y;
        sp += m * p * expm1_ratio(ky);
        sm += m * p * expm1_ratio(-ky);
        p *= e;
    }
    let ap = x + 0.5 * y + shift + 2.0 * sp.re;
    let am = x - 0.5 * y + shift + 2.0 * sm.re;
    let (hp, h0, hm) = (h(x + y), h(x), h(x - y));
    let apx = (hp - h0) / y;
    let amx = (h0 - hm) / y;
    let apy = (hp - ap) / y;
    let amy = (hm - am) / y;
    let f = C64::new(0.5 * (ap + am), ap - am);
    let fx = C64::new(0.5 * (apx + amx), apx - amx);
    let fy = C64::new(0.5 * (apy + amy), apy - amy);
    let fz = (fx - I * fy) * 0.5;
    let fzb = (fx + I * fy) * 0.5;
    let psi = (I * f).exp();
    (psi, -(fzb / fz) * u / u.conj())
}

/// The extension `τ̃ = g ∘ Ψ⁻¹` of `τ = g ∘ γ`, with `Ψ` extending `γ⁻¹`.
#[derive(Clone, Debug)]
pub struct CapExtension {
    pub cap: CapMap,
    pub gamma: CircleHomeo,
    pub psi: DiskExtension,
}

impl CapExtension {
    pub fn sup_dilatation(&self) -> f64 {
        self.psi.sup_dilatation()
    }

    /// `τ(e^{iθ})` in chart coordinates.
    pub fn boundary_local(&self, theta: f64) -> C64 {
        self.cap.local(C64::from_polar(1.0, self.gamma.lift(theta)))
    }

    /// Pre-image under `τ̃` of the cap's puncture-side point `u = Ψ⁻¹(0)`.
    pub fn puncture_parameter(&self) -> Result<C64> {
        self.psi.inverse_point(ZERO).map(|v| v)
    }

    /// `τ̃(u)` in chart coordinates.
    pub fn eval_local(&self, u: C64) -> Result<C64> {
        Ok(self.cap.local(self.psi.inverse_point(u)?))
    }
}

/// Extends `τ = cap ∘ γ` quasiconformally over the disk.
pub fn extend_quasisymmetric(cap: &CapMap, gamma: &CircleHomeo, method: ExtensionMethod) -> Result<CapExtension> {
    let oqc = cap.clone().recentered().to_oqc()?;
    oqc.univalence_witness().map_err(|e| Error::InvalidBoundary(format!("cap boundary is not a Jordan curve: {e}")))?;
    let psi = DiskExtension::new(&gamma.inverse(), method)?;
    Ok(CapExtension { cap: cap.clone(), gamma: gamma.clone(), psi })
}
