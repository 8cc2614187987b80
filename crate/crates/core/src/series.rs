//! Truncated power series `Σ_{k<len} a_k z^k` with complex coefficients.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C64 = Complex64;
const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    coeffs: Vec<C64>,
}

impl Series {
    pub fn new(coeffs: Vec<C64>) -> Self {
        Series { coeffs }
    }

    pub fn zeros(len: usize) -> Self {
        Series { coeffs: vec![ZERO; len] }
    }

    pub fn constant(c: C64, len: usize) -> Self {
        let mut s = Series::zeros(len.max(1));
        s.coeffs[0] = c;
        s
    }

    /// Coefficients of `z ↦ f(z)` from a closure giving `a_k`.
    pub fn from_fn(len: usize, f: impl Fn(usize) -> C64) -> Self {
        Series { coeffs: (0..len).map(f).collect() }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    pub fn set(&mut self, k: usize, v: C64) {
        if k >= self.coeffs.len() {
            self.coeffs.resize(k + 1, ZERO);
        }
        self.coeffs[k] = v;
    }

    pub fn truncate(&self, len: usize) -> Series {
        Series::from_fn(len, |k| self.coeff(k))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Horner evaluation.
    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &a| acc * z + a)
    }

    /// `(f(z), f'(z))` in one Horner pass.
    pub fn eval_with_derivative(&self, z: C64) -> (C64, C64) {
        let mut f = ZERO;
        let mut d = ZERO;
        for &a in self.coeffs.iter().rev() {
            d = d * z + f;
            f = f * z + a;
        }
        (f, d)
    }

    pub fn derivative(&self) -> Series {
        if self.coeffs.len() <= 1 {
            return Series::zeros(1);
        }
        Series::from_fn(self.coeffs.len() - 1, |k| self.coeffs[k + 1] * (k + 1) as f64)
    }

    /// Antiderivative vanishing at 0.
    pub fn integrate(&self) -> Series {
        let mut c = vec![ZERO; self.coeffs.len() + 1];
        for (k, &a) in self.coeffs.iter().enumerate() {
            c[k + 1] = a / (k + 1) as f64;
        }
        Series { coeffs: c }
    }

    pub fn scale(&self, s: C64) -> Series {
        Series { coeffs: self.coeffs.iter().map(|&a| a * s).collect() }
    }

    pub fn add(&self, other: &Series) -> Series {
        let len = self.len().max(other.len());
        Series::from_fn(len, |k| self.coeff(k) + other.coeff(k))
    }

    pub fn sub(&self, other: &Series) -> Series {
        let len = self.len().max(other.len());
        Series::from_fn(len, |k| self.coeff(k) - other.coeff(k))
    }

    /// Product truncated to `len` terms.
    pub fn mul(&self, other: &Series, len: usize) -> Series {
        let mut c = vec![ZERO; len];
        for (i, &a) in self.coeffs.iter().enumerate().take(len) {
            if a == ZERO {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate().take(len - i) {
                c[i + j] += a * b;
            }
        }
        Series { coeffs: c }
    }

    /// `1/f` truncated to `len` terms; needs `f(0) ≠ 0`.
    pub fn recip(&self, len: usize) -> Result<Series> {
        let a0 = self.coeff(0);
        if a0 == ZERO {
            return Err(Error::VanishingDerivative(ZERO));
        }
        let mut b = vec![ZERO; len];
        if len == 0 {
            return Ok(Series { coeffs: b });
        }
        b[0] = 1.0 / a0;
        for n in 1..len {
            let mut s = ZERO;
            for k in 1..=n {
                s += self.coeff(k) * b[n - k];
            }
            b[n] = -s / a0;
        }
        Ok(Series { coeffs: b })
    }

    pub fn div(&self, other: &Series, len: usize) -> Result<Series> {
        Ok(self.mul(&other.recip(len)?, len))
    }

    /// `exp(f)` truncated to `len` terms.
    pub fn exp(&self, len: usize) -> Series {
        let mut e = vec![ZERO; len];
        if len == 0 {
            return Series { coeffs: e };
        }
        e[0] = self.coeff(0).exp();
        for n in 1..len {
            let mut s = ZERO;
            for k in 1..=n {
                s += (k as f64) * self.coeff(k) * e[n - k];
            }
            e[n] = s / n as f64;
        }
        Series { coeffs: e }
    }

    /// `f(r z)`.
    pub fn dilate(&self, r: C64) -> Series {
        let mut p = C64::new(1.0, 0.0);
        let mut c = Vec::with_capacity(self.len());
        for &a in &self.coeffs {
            c.push(a * p);
            p *= r;
        }
        Series { coeffs: c }
    }

    /// Power series of `z ↦ a / (1 − b z)`.
    pub fn geometric(a: C64, b: C64, len: usize) -> Series {
        let mut c = Vec::with_capacity(len);
        let mut p = a;
        for _ in 0..len {
            c.push(p);
            p *= b;
        }
        Series { coeffs: c }
    }
}

/// Fourier analysis of a function sampled at `K` equispaced points of a circle.
#[derive(Clone, Debug)]
pub struct CircleSpectrum {
    /// Nonnegative-frequency coefficients rescaled to the unit circle.
    pub series: Series,
    /// Largest negative-frequency coefficient (rescaled); zero for boundary
    /// values of a holomorphic function.
    pub antiholomorphic: f64,
    /// Largest coefficient beyond the retained truncation.
    pub tail: f64,
}

/// Coefficients `a_k` of `f(z) = Σ a_k z^k` from samples `f(r e^{2πij/K})`.
pub fn series_from_circle_samples(samples: &[C64], radius: f64, len: usize) -> CircleSpectrum {
    let k = samples.len();
    let mut buf = samples.to_vec();
    FftPlanner::new().plan_fft_forward(k).process(&mut buf);
    let inv = 1.0 / k as f64;
    let half = k / 2;
    let mut coeffs = Vec::with_capacity(len);
    let mut tail = 0.0f64;
    for (m, v) in buf.iter().enumerate().take(half) {
        let a = v * inv / radius.powi(m as i32);
        if m < len {
            coeffs.push(a);
        } else {
            tail = tail.max(a.norm() * radius.powi(m as i32));
        }
    }
    coeffs.resize(len, ZERO);
    let mut anti = 0.0f64;
    for m in 1..half {
        anti = anti.max((buf[k - m] * inv).norm());
    }
    CircleSpectrum { series: Series::new(coeffs), antiholomorphic: anti, tail }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn recip_of_one_minus_z() {
        let s = Series::new(vec![c(1.0, 0.0), c(-1.0, 0.0)]);
        let r = s.recip(10).unwrap();
        for k in 0..10 {
            assert_eq!(r.coeff(k), c(1.0, 0.0));
        }
    }

    #[test]
    fn exp_of_z() {
        let s = Series::new(vec![ZERO, c(1.0, 0.0)]);
        let e = s.exp(20);
        assert!((e.eval(c(0.3, 0.2)) - c(0.3, 0.2).exp()).norm() < 1e-15);
    }

    #[test]
    fn circle_samples_recover_polynomial() {
        let p = Series::new(vec![ZERO, c(1.0, 0.5), c(0.0, -0.25), c(0.1, 0.0)]);
        let k = 64;
        let r = 0.7;
        let samples: Vec<C64> = (0..k).map(|j| p.eval(C64::from_polar(r, std::f64::consts::TAU * j as f64 / k as f64))).collect();
        let spec = series_from_circle_samples(&samples, r, 8);
        for j in 0..8 {
            assert!((spec.series.coeff(j) - p.coeff(j)).norm() < 1e-13);
        }
        assert!(spec.antiholomorphic < 1e-14);
        let conj: Vec<C64> = samples.iter().map(|v| v.conj()).collect();
        assert!(series_from_circle_samples(&conj, r, 8).antiholomorphic > 0.1);
    }

    fn arb_series() -> impl Strategy<Value = Series> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..12)
            .prop_map(|v| Series::new(v.into_iter().map(|(a, b)| c(a, b)).collect()))
    }

    proptest! {
        #[test]
        fn product_evaluates_pointwise(a in arb_series(), b in arb_series(), x in -0.5f64..0.5, y in -0.5f64..0.5) {
            let z = c(x, y);
            let len = a.len() + b.len();
            let p = a.mul(&b, len);
            prop_assert!((p.eval(z) - a.eval(z) * b.eval(z)).norm() < 1e-12);
        }

        #[test]
        fn derivative_inverts_integral(a in arb_series()) {
            let back = a.integrate().derivative();
            for k in 0..a.len() {
                prop_assert!((back.coeff(k) - a.coeff(k)).norm() < 1e-14);
            }
        }

        #[test]
        fn division_inverts_multiplication(a in arb_series(), b0 in 0.5f64..2.0, b in arb_series()) {
            let mut b = b;
            b.set(0, c(b0, 0.0));
            let len = 16;
            let q = a.mul(&b, len).div(&b, len).unwrap();
            for k in 0..a.len().min(len) {
                prop_assert!((q.coeff(k) - a.coeff(k)).norm() < 1e-9);
            }
        }

        #[test]
        fn exp_is_a_homomorphism(a in arb_series(), b in arb_series()) {
            let len = 14;
            let lhs = a.add(&b).exp(len);
            let rhs = a.exp(len).mul(&b.exp(len), len);
            for k in 0..len {
                prop_assert!((lhs.coeff(k) - rhs.coeff(k)).norm() < 1e-9 * (1.0 + lhs.coeff(k).norm()));
            }
        }
    }
}
