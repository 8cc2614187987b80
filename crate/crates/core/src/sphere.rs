//! Points of the Riemann sphere, Möbius transformations and punctured spheres.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C64 = Complex64;

/// A point of the Riemann sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpherePoint {
    Finite(C64),
    #[serde(with = "infinity_tag")]
    Infinity,
}

mod infinity_tag {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("inf")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "inf" | "infinity" | "∞" => Ok(()),
            other => Err(D::Error::custom(format!("expected \"inf\", got {other:?}"))),
        }
    }
}

impl SpherePoint {
    pub fn finite(re: f64, im: f64) -> Self {
        SpherePoint::Finite(C64::new(re, im))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    pub fn as_finite(&self) -> Option<C64> {
        match *self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }

    /// Chordal distance on the unit sphere (diameter 2 normalization).
    pub fn chordal_distance(&self, other: &SpherePoint) -> f64 {
        match (*self, *other) {
            (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
            (SpherePoint::Finite(z), SpherePoint::Infinity)
            | (SpherePoint::Infinity, SpherePoint::Finite(z)) => 2.0 / (1.0 + z.norm_sqr()).sqrt(),
            (SpherePoint::Finite(z), SpherePoint::Finite(w)) => {
                2.0 * (z - w).norm() / ((1.0 + z.norm_sqr()).sqrt() * (1.0 + w.norm_sqr()).sqrt())
            }
        }
    }
}

impl From<C64> for SpherePoint {
    fn from(z: C64) -> Self {
        SpherePoint::Finite(z)
    }
}

/// `z ↦ (a z + b) / (c z + d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mobius {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Mobius {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Result<Self> {
        let det = a * d - b * c;
        if det.norm() == 0.0 || !det.norm().is_finite() {
            return Err(Error::Evaluation(format!("singular Möbius matrix (det {det})")));
        }
        Ok(Mobius { a, b, c, d })
    }

    pub fn identity() -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Mobius { a: one, b: zero, c: zero, d: one }
    }

    pub fn translation(t: C64) -> Self {
        Mobius { b: t, ..Mobius::identity() }
    }

    /// `z ↦ s z + t`.
    pub fn affine(s: C64, t: C64) -> Self {
        Mobius { a: s, b: t, ..Mobius::identity() }
    }

    /// `z ↦ 1/z`.
    pub fn inversion() -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Mobius { a: zero, b: one, c: one, d: zero }
    }

    /// Disk automorphism `z ↦ e^{iβ} (z − a) / (1 − ā z)`.
    pub fn disk_automorphism(a: C64, rotation: f64) -> Result<Self> {
        if a.norm() >= 1.0 {
            return Err(Error::Evaluation(format!("disk automorphism parameter {a} outside the disk")));
        }
        let r = C64::from_polar(1.0, rotation);
        Mobius::new(r, -r * a, -a.conj(), C64::new(1.0, 0.0))
    }

    pub fn is_identity(&self) -> bool {
        self.b == C64::new(0.0, 0.0) && self.c == C64::new(0.0, 0.0) && self.a == self.d
    }

    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, p: SpherePoint) -> SpherePoint {
        match p {
            SpherePoint::Infinity => {
                if self.c == C64::new(0.0, 0.0) {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::Finite(self.a / self.c)
                }
            }
            SpherePoint::Finite(z) => {
                let den = self.c * z + self.d;
                if den == C64::new(0.0, 0.0) {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::Finite((self.a * z + self.b) / den)
                }
            }
        }
    }

    /// Evaluation at a finite point whose image is known to be finite.
    pub fn apply_finite(&self, z: C64) -> C64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    pub fn derivative(&self, z: C64) -> C64 {
        let den = self.c * z + self.d;
        self.det() / (den * den)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Mobius) -> Mobius {
        Mobius {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn inverse(&self) -> Mobius {
        Mobius { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// The unique Möbius map sending `p1, p2, p3` to `0, 1, ∞`.
    pub fn normalizing(p1: SpherePoint, p2: SpherePoint, p3: SpherePoint) -> Result<Self> {
        let tol = 1e-300;
        if p1.chordal_distance(&p2) <= tol || p2.chordal_distance(&p3) <= tol || p1.chordal_distance(&p3) <= tol {
            return Err(Error::InvalidSphere("coincident points in normalization".into()));
        }
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        // z ↦ (z − p1)(p2 − p3) / ((z − p3)(p2 − p1)), with the factors involving ∞ dropped.
        let m = match (p1, p2, p3) {
            (SpherePoint::Finite(z1), SpherePoint::Finite(z2), SpherePoint::Finite(z3)) => {
                let s = z2 - z3;
                let t = z2 - z1;
                Mobius { a: s, b: -z1 * s, c: t, d: -z3 * t }
            }
            (SpherePoint::Finite(z1), SpherePoint::Finite(z2), SpherePoint::Infinity) => {
                let t = z2 - z1;
                if z1 == zero && z2 == one {
                    Mobius::identity()
                } else {
                    Mobius { a: one, b: -z1, c: zero, d: t }
                }
            }
            (SpherePoint::Finite(z1), SpherePoint::Infinity, SpherePoint::Finite(z3)) => {
                Mobius { a: one, b: -z1, c: one, d: -z3 }
            }
            (SpherePoint::Infinity, SpherePoint::Finite(z2), SpherePoint::Finite(z3)) => {
                Mobius { a: zero, b: z2 - z3, c: one, d: -z3 }
            }
            _ => unreachable!("distinctness checked above"),
        };
        Mobius::new(m.a, m.b, m.c, m.d)
    }
}

/// Cross-ratio with the convention `cr(0, 1, ∞, λ) = λ`.
pub fn cross_ratio_of(p: [SpherePoint; 4]) -> Result<C64> {
    for i in 0..4 {
        for j in (i + 1)..4 {
            if p[i].chordal_distance(&p[j]) < 1e-14 {
                return Err(Error::InvalidSphere(format!("punctures {i} and {j} coincide")));
            }
        }
    }
    let m = Mobius::normalizing(p[0], p[1], p[2])?;
    match m.apply(p[3]) {
        SpherePoint::Finite(l) => Ok(l),
        SpherePoint::Infinity => Err(Error::InvalidSphere("fourth puncture coincides with the third".into())),
    }
}

/// An ordered list of at least three distinct punctures on the sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuncturedSphere {
    punctures: Vec<SpherePoint>,
    normalized: bool,
}

/// Minimal chordal separation accepted between punctures.
pub const PUNCTURE_SEPARATION: f64 = 1e-9;

impl PuncturedSphere {
    pub fn new(punctures: Vec<SpherePoint>) -> Result<Self> {
        if punctures.len() < 3 {
            return Err(Error::InvalidSphere(format!(
                "need at least three punctures at genus zero, got {}",
                punctures.len()
            )));
        }
        for i in 0..punctures.len() {
            if let SpherePoint::Finite(z) = punctures[i] {
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::InvalidSphere(format!("puncture {i} is not a number")));
                }
            }
            for j in (i + 1)..punctures.len() {
                if punctures[i].chordal_distance(&punctures[j]) < PUNCTURE_SEPARATION {
                    return Err(Error::InvalidSphere(format!("punctures {i} and {j} coincide")));
                }
            }
        }
        let normalized = punctures[0] == SpherePoint::Finite(C64::new(0.0, 0.0))
            && punctures[1] == SpherePoint::Finite(C64::new(1.0, 0.0))
            && punctures[2] == SpherePoint::Infinity;
        Ok(PuncturedSphere { punctures, normalized })
    }

    /// `(0, 1, ∞, extra…)`.
    pub fn normalized_with(extra: &[C64]) -> Result<Self> {
        let mut p = vec![
            SpherePoint::finite(0.0, 0.0),
            SpherePoint::finite(1.0, 0.0),
            SpherePoint::Infinity,
        ];
        p.extend(extra.iter().map(|&z| SpherePoint::Finite(z)));
        PuncturedSphere::new(p)
    }

    pub fn punctures(&self) -> &[SpherePoint] {
        &self.punctures
    }

    pub fn len(&self) -> usize {
        self.punctures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.punctures.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// The Möbius map taking the first three punctures to `0, 1, ∞`.
    pub fn normalizer(&self) -> Result<Mobius> {
        Mobius::normalizing(self.punctures[0], self.punctures[1], self.punctures[2])
    }

    /// Normalized copy together with the normalizing map.
    pub fn normalize(&self) -> Result<(PuncturedSphere, Mobius)> {
        let m = self.normalizer()?;
        let mut p: Vec<SpherePoint> = self.punctures.iter().map(|&q| m.apply(q)).collect();
        p[0] = SpherePoint::finite(0.0, 0.0);
        p[1] = SpherePoint::finite(1.0, 0.0);
        p[2] = SpherePoint::Infinity;
        Ok((PuncturedSphere::new(p)?, m))
    }

    pub fn map(&self, m: &Mobius) -> Result<PuncturedSphere> {
        PuncturedSphere::new(self.punctures.iter().map(|&q| m.apply(q)).collect())
    }

    /// Largest chordal distance between corresponding punctures.
    pub fn distance(&self, other: &PuncturedSphere) -> f64 {
        if self.len() != other.len() {
            return f64::INFINITY;
        }
        self.punctures
            .iter()
            .zip(&other.punctures)
            .map(|(a, b)| a.chordal_distance(b))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn normalizing_map_sends_triple() {
        let m = Mobius::normalizing(c(2.0, 1.0).into(), c(-1.0, 0.5).into(), c(0.3, -2.0).into()).unwrap();
        assert!(m.apply(c(2.0, 1.0).into()).as_finite().unwrap().norm() < 1e-14);
        assert!((m.apply(c(-1.0, 0.5).into()).as_finite().unwrap() - 1.0).norm() < 1e-14);
        assert!(m.apply(c(0.3, -2.0).into()).is_infinite());
    }

    #[test]
    fn normalizing_standard_triple_is_identity() {
        let m = Mobius::normalizing(c(0.0, 0.0).into(), c(1.0, 0.0).into(), SpherePoint::Infinity).unwrap();
        assert!(m.is_identity());
    }

    #[test]
    fn fewer_than_three_punctures_rejected() {
        assert!(PuncturedSphere::new(vec![c(0.0, 0.0).into(), SpherePoint::Infinity]).is_err());
    }

    #[test]
    fn coincident_punctures_rejected() {
        let p = vec![c(0.0, 0.0).into(), c(1.0, 0.0).into(), c(1.0, 0.0).into()];
        assert!(PuncturedSphere::new(p).is_err());
    }

    #[test]
    fn normalize_flags() {
        let s = PuncturedSphere::normalized_with(&[c(2.0, 1.0)]).unwrap();
        assert!(s.is_normalized());
        let t = PuncturedSphere::new(vec![c(1.0, 0.0).into(), c(0.0, 0.0).into(), SpherePoint::Infinity]).unwrap();
        assert!(!t.is_normalized());
    }

    #[test]
    fn compose_and_inverse() {
        let m = Mobius::new(c(1.0, 2.0), c(0.5, 0.0), c(0.1, -0.3), c(2.0, 0.0)).unwrap();
        let z = c(0.7, -0.2);
        let back = m.inverse().apply_finite(m.apply_finite(z));
        assert!((back - z).norm() < 1e-14);
        let mm = m.compose(&m.inverse());
        assert!((mm.apply_finite(z) - z).norm() < 1e-14);
    }

    #[test]
    fn sphere_point_json() {
        let p = vec![SpherePoint::finite(1.0, 2.0), SpherePoint::Infinity];
        let s = serde_json::to_string(&p).unwrap();
        let q: Vec<SpherePoint> = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
