use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use teichlab::beltrami::{solve_beltrami, BeltramiCoefficient};
use teichlab::extension::{CircleHomeo, ExtensionMethod};
use teichlab::fibration::{forget_rigging_f, rig_p, sewing_map_c, BorderedPoint};
use teichlab::grid::{wirtinger_fd, ComplexField, ComplexGrid};
use teichlab::oqc::{chi, chi_inverse, hyperbolic_norm, schwarz_corpus, schwarz_report, OqcFunction, PreSchwarzian, PreSchwarzianCoords};
use teichlab::series::Series;
use teichlab::sewing::{sew_caps, BorderedSphereData, SewOptions};
use teichlab::sphere::{cross_ratio_of, PuncturedSphere};
use teichlab::surfaces::{validate_rigging, RiggedSphere};
use teichlab::transforms::{beurling_transform, cauchy_transform, BeurlingSymbol, TransformPlan};

const ZERO: C64 = C64::new(0.0, 0.0);

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn bump(z: C64, center: C64, radius: f64) -> f64 {
    let t = (z - center).norm_sqr() / (radius * radius);
    if t < 1.0 {
        (1.0 - t).powi(3)
    } else {
        0.0
    }
}

/// `(1 − |z|²)³ (0.3 + 0.2i)(1 + z)` on the unit disk.
fn density(n: usize) -> ComplexField {
    let g = ComplexGrid::new(ZERO, 2.0, n).unwrap();
    ComplexField::from_fn(g, |z| c(0.3, 0.2) * (1.0 + z) * bump(z, ZERO, 1.0)).with_support(1.0)
}

/// Max centered-difference error of `(∂̄C[h] − h, ∂C[h] − S[h])` over nodes with `|z| < 1.6`.
fn transform_errors(n: usize) -> (f64, f64) {
    let h = density(n);
    let ch = cauchy_transform(&h).unwrap();
    let sh = beurling_transform(&h).unwrap();
    let g = *h.grid();
    let (mut e_dbar, mut e_comm) = (0.0f64, 0.0f64);
    for k in 1..n - 1 {
        for j in 1..n - 1 {
            if g.node(j, k).norm() >= 1.6 {
                continue;
            }
            let (dz, dzb) = ch.wirtinger_at(j, k).unwrap();
            e_dbar = e_dbar.max((dzb - h.get(j, k)).norm());
            e_comm = e_comm.max((dz - sh.get(j, k)).norm());
        }
    }
    (e_dbar, e_comm)
}

#[test]
fn cauchy_transform_inverts_dbar_under_refinement() {
    let errs: Vec<(f64, f64)> = [32, 64, 128].iter().map(|&n| transform_errors(n)).collect();
    for w in errs.windows(2) {
        let order_dbar = (w[0].0 / w[1].0).log2();
        let order_comm = (w[0].1 / w[1].1).log2();
        assert!(order_dbar >= 1.0, "dbar order {order_dbar}: {errs:?}");
        assert!(order_comm >= 1.0, "commutation order {order_comm}: {errs:?}");
    }
    assert!(errs[2].0 < 1e-2 && errs[2].1 < 1e-2, "{errs:?}");
}

#[test]
fn beltrami_fd_residual_shrinks_under_refinement() {
    let solve = |n: usize| {
        let g = ComplexGrid::new(ZERO, 3.0, n).unwrap();
        let mu = ComplexField::from_fn(g, |z| c(0.4, -0.2) * bump(z, c(0.2, 0.1), 1.5)).with_support(1.8);
        solve_beltrami(&BeltramiCoefficient::from_field(mu).unwrap(), 1e-12).unwrap().fd_residual(2)
    };
    let (coarse, fine) = (solve(64), solve(128));
    assert!(fine < 0.5 * coarse, "{coarse} -> {fine}");
}

fn coeff() -> impl Strategy<Value = C64> {
    (0.0f64..1.0, 0.0f64..TAU).prop_map(|(r, t)| C64::from_polar(r, t))
}

/// `c·(z + Σ_{k≥2} a_k z^k)` with `Σ k|a_k| ≤ 0.9`, hence univalent on the closed disk.
fn univalent() -> impl Strategy<Value = OqcFunction> {
    (8usize..=20, prop::collection::vec(coeff(), 19), coeff(), 0.2f64..3.0).prop_map(|(m, raw, rot, scale)| {
        let mut a: Vec<C64> = raw[..m - 1].iter().enumerate().map(|(i, v)| v / ((i + 2) as f64).powi(3)).collect();
        let weight: f64 = a.iter().enumerate().map(|(i, v)| (i + 2) as f64 * v.norm()).sum();
        if weight > 0.9 {
            a.iter_mut().for_each(|v| *v *= 0.9 / weight);
        }
        let lead = rot / rot.norm().max(1e-3) * scale;
        let mut coeffs = vec![ZERO, lead];
        coeffs.extend(a.iter().map(|v| v * lead));
        OqcFunction::new(coeffs).unwrap()
    })
}

/// `max |f − g|` on `|z| = r`; by the maximum principle this bounds the closed disk.
fn sup_gap(f: &OqcFunction, g: &OqcFunction, r: f64) -> f64 {
    (0..512).map(|j| C64::from_polar(r, TAU * j as f64 / 512.0)).map(|z| (f.eval(z) - g.eval(z)).norm()).fold(0.0, f64::max)
}

/// Unit-norm perturbation direction `(v, c)`.
fn direction(raw: &[C64], dc: C64, len: usize) -> (Series, C64) {
    let v = Series::new(raw[..len].to_vec());
    let nv = hyperbolic_norm(|z| v.eval(z)).unwrap().value;
    let total = nv + dc.norm();
    (v.scale(C64::new(1.0 / total, 0.0)), dc / total)
}

fn perturbed(base: &PreSchwarzianCoords, dir: &(Series, C64), t: f64) -> Option<OqcFunction> {
    chi_inverse(&base.along_line(&dir.0, dir.1, C64::new(t, 0.0))).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transforms_are_linear(a in coeff(), b in coeff(), s in 0.3f64..0.9) {
        let g = ComplexGrid::new(ZERO, 2.0, 32).unwrap();
        let f = ComplexField::from_fn(g, |z| c(1.0, -0.5) * bump(z, ZERO, 1.0)).with_support(1.0);
        let h = ComplexField::from_fn(g, |z| z * z * bump(z, c(0.2, 0.0), s)).with_support(1.2);
        let mix = f.scale(a).add(&h.scale(b)).unwrap();
        let plan = TransformPlan::new(g);
        let lin = |op: &dyn Fn(&[C64]) -> Vec<C64>| {
            let (x, y, z) = (op(f.values()), op(h.values()), op(mix.values()));
            x.iter().zip(&y).zip(&z).map(|((x, y), z)| (a * x + b * y - z).norm()).fold(0.0, f64::max)
        };
        prop_assert!(lin(&|v| plan.cauchy_values(v)) < 1e-13);
        prop_assert!(lin(&|v| plan.beurling_values(v, BeurlingSymbol::CellQuadrature)) < 1e-13);
        prop_assert!(lin(&|v| plan.beurling_values(v, BeurlingSymbol::Spectral)) < 1e-13);
    }

    #[test]
    fn chi_roundtrip_recovers_the_map(f in univalent()) {
        let back = chi_inverse(&chi(&f).unwrap()).unwrap();
        let scale = f.derivative_at_zero().norm();
        prop_assert!(sup_gap(&f, &back, 0.9) < 1e-11 * (1.0 + scale), "{}", sup_gap(&f, &back, 0.9));
    }

    #[test]
    fn direct_sum_norm_is_homogeneous_and_additive(raw in prop::collection::vec(coeff(), 6), c0 in coeff(), t in coeff()) {
        prop_assume!(c0.norm() > 1e-3 && t.norm() > 1e-3);
        let v = PreSchwarzian::from_series(Series::new(raw.clone()));
        let base = PreSchwarzianCoords::new(v.clone(), c0).unwrap();
        let scaled = PreSchwarzianCoords::new(v.scale(t), c0 * t).unwrap();
        let d = base.direct_sum_norm();
        prop_assert!((scaled.direct_sum_norm() - t.norm() * d).abs() <= 1e-14 * t.norm() * d);
        let nv = hyperbolic_norm(|z| v.eval(z)).unwrap().value;
        prop_assert_eq!(d, nv + c0.norm());
        let other = PreSchwarzianCoords::new(v, 2.0 * c0).unwrap();
        prop_assert!((other.direct_sum_norm() - d - c0.norm()).abs() <= 1e-15 * d);
    }

    #[test]
    fn schwarz_bounds_hold_on_seeded_corpora(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in schwarz_corpus(&mut rng, 8, 40) {
            let r = schwarz_report(&s.psi).unwrap();
            prop_assert!(r.derivative <= 1.0 + 1e-9, "{:?} {}", s.family, r.derivative);
            prop_assert!(r.norm <= 6.0 + 1e-3, "{:?} {}", s.family, r.norm);
            prop_assert!(r.pointwise <= 4.0 + 1e-3, "{:?} {}", s.family, r.pointwise);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // A chart radius δ is found by bisection along one direction; fresh
    // directions inside that radius must keep the image 2δ-close to f(𝔻̄).
    #[test]
    fn chi_chart_is_open_near_univalent_maps(
        f in univalent(),
        probe in prop::collection::vec(coeff(), 8),
        probe_c in coeff(),
        fresh in prop::collection::vec((prop::collection::vec(coeff(), 8), coeff(), 0.05f64..0.95), 3),
    ) {
        prop_assume!(probe_c.norm() > 1e-3);
        let base = chi(&f).unwrap();
        let len = base.v.series().len().min(8);
        let r = 1.0 - 1e-3;
        let ok = |dir: &(Series, C64), t: f64| perturbed(&base, dir, t).map(|g| sup_gap(&f, &g, r) <= 2.0 * t).unwrap_or(false);
        let dir = direction(&probe, probe_c, len);
        let (mut lo, mut hi) = (0.0, 1.0);
        while ok(&dir, hi) && hi < 1e3 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if ok(&dir, mid) { lo = mid } else { hi = mid }
        }
        let delta = lo;
        prop_assert!(delta > 0.0, "no chart radius found");
        for (raw, dc, frac) in &fresh {
            prop_assume!(dc.norm() > 1e-3);
            // at a small fraction of δ linearization dominates, so any direction must comply
            let t = 0.25 * frac * delta;
            let g = perturbed(&base, &direction(raw, *dc, len), t);
            prop_assert!(g.is_some(), "reconstruction failed at t = {t}");
            let gap = sup_gap(&f, &g.unwrap(), r);
            prop_assert!(gap <= 2.0 * (0.25 * delta), "gap {gap} at t = {t}, delta = {delta}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn beltrami_solutions_are_normalized_conformal_and_injective(
        k in coeff(),
        cx in -0.6f64..0.6,
        cy in -0.6f64..0.6,
        radius in 0.6f64..1.4,
    ) {
        let k = 0.6 * k;
        let center = c(cx, cy);
        let tol = 1e-10;
        let g = ComplexGrid::new(ZERO, 3.0, 64).unwrap();
        let mu = BeltramiCoefficient::from_field(ComplexField::from_fn(g, |z| k * bump(z, center, radius))).unwrap();
        let w = solve_beltrami(&mu, tol).unwrap();

        // the discrete Beltrami equation h = μ(1 + S h) holds to solver tolerance
        let h = w.correction().values();
        let sh = TransformPlan::new(g).beurling_values(h, BeurlingSymbol::CellQuadrature);
        let m = mu.field().values();
        let res = (0..h.len()).map(|i| (h[i] - m[i] * (1.0 + sh[i])).norm() / (1.0 + (1.0 + sh[i]).norm())).fold(0.0, f64::max);
        prop_assert!(res <= 10.0 * tol, "discrete residual {res}");

        prop_assert!(w.eval(ZERO).norm() <= tol);
        prop_assert!((w.eval(c(1.0, 0.0)) - 1.0).norm() <= tol);
        let (a, b) = (w.eval(c(1e4, 0.0)) / 1e4, w.eval(c(0.0, 2e4)) / c(0.0, 2e4));
        prop_assert!(a.norm() > 0.1 && (a - b).norm() < 1e-3 * a.norm(), "{a} vs {b}");

        for p in [c(2.3, 0.4), c(-1.0, -2.2), c(0.0, 2.5)] {
            prop_assume!((p - center).norm() > radius + 0.2);
            let (dz, dzb) = wirtinger_fd(|z| w.eval(z), p, 1e-3);
            prop_assert!(dzb.norm() < 1e-5 * dz.norm(), "dbar {} at {p}", dzb.norm());
        }
        prop_assert_eq!(w.winding_number(center, 0.5 * radius, w.eval(center), 256), 1);
        prop_assert_eq!(w.winding_number(ZERO, 2.5, w.eval(c(0.3, -0.2)), 256), 1);
    }

    #[test]
    fn identity_sewing_keeps_punctures_and_factorizes(re in 1.3f64..3.0, im in 0.4f64..2.0, fraction in 0.3f64..0.7) {
        let base = PuncturedSphere::normalized_with(&[c(re, im)]).unwrap();
        let r = RiggedSphere::standard(base.clone(), fraction).unwrap();
        let b = BorderedPoint::sew(BorderedSphereData::from_rigged(&r), &SewOptions::new(64, 1e-10)).unwrap();
        prop_assert!(b.target().base.distance(&base) < 1e-6);
        let fid = sewing_map_c(&b).unwrap();
        prop_assert_eq!(forget_rigging_f(&rig_p(&b).unwrap()).unwrap(), fid);
    }

    #[test]
    fn reparametrized_sewing_yields_valid_riggings(
        amp in 0.02f64..0.3,
        freq in 1u32..=3,
        phase in 0.0f64..TAU,
        cap in 0usize..4,
        method in prop::sample::select(vec![ExtensionMethod::DouadyEarle, ExtensionMethod::BeurlingAhlfors]),
    ) {
        let amp = amp / freq as f64;
        let base = PuncturedSphere::normalized_with(&[c(2.0, 1.0)]).unwrap();
        let r = RiggedSphere::standard(base, 0.6).unwrap();
        let mut data = BorderedSphereData::from_rigged(&r);
        data.method = method;
        data.boundaries[cap].gamma = CircleHomeo::Sin { amplitude: amp, frequency: freq, phase };
        let out = sew_caps(&data, &SewOptions::new(64, 1e-10)).unwrap();
        prop_assert!(validate_rigging(&out.sphere).is_ok());
        let p = out.sphere.base.punctures();
        prop_assert!(cross_ratio_of([p[0], p[1], p[2], p[3]]).unwrap().norm().is_finite());
    }
}
