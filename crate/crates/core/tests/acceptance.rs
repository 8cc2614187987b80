//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use teichlab::beltrami::{profile_from_primitives, solve_beltrami, BeltramiCoefficient, MuPrimitive, DEFAULT_SUPERSAMPLE};
use teichlab::experiment::{run_experiment, ExperimentConfig, ExperimentKind, Scene};
use teichlab::extension::{CircleHomeo, ExtensionMethod};
use teichlab::fibration::{bordered_representative, fiber_l, lambda, product_chart, schiffer_section_eta, sewing_map_c, BorderedPoint, FiberId};
use teichlab::grid::{ComplexField, ComplexGrid};
use teichlab::oqc::{chi, chi_inverse, point_evaluation, schwarz_corpus, schwarz_report, OqcFunction, DEFAULT_ORDER};
use teichlab::schiffer::{cross_ratio, holomorphy_residual, schiffer_variation_s, SchifferCell, SchifferOptions, SchifferParams};
use teichlab::series::Series;
use teichlab::sewing::{sew_caps, BorderedSphereData, SewOptions};
use teichlab::sphere::PuncturedSphere;
use teichlab::surfaces::{default_chart_radii, RiggedSphere};
use teichlab::transforms::{cauchy_transform, BeurlingSymbol, TransformPlan};

type Outcome = teichlab::Result<(bool, String)>;

const ZERO: C64 = C64::new(0.0, 0.0);

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn base() -> PuncturedSphere {
    PuncturedSphere::normalized_with(&[c(2.0, 1.0)]).unwrap()
}

fn cell(e: C64) -> SchifferParams {
    SchifferParams::new(vec![SchifferCell::round(c(4.0, 0.0), 0.5).unwrap()], vec![e]).unwrap()
}

fn beltrami_closed_form() -> Outcome {
    let k = 0.3;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let t = Instant::now();
    let (worst, secs) = pool.install(|| -> teichlab::Result<(f64, f64)> {
        let grid = ComplexGrid::new(ZERO, 4.0, 512)?;
        let profile = profile_from_primitives(&[MuPrimitive::ConstantDisk { center: [0.0, 0.0], radius: 1.0, amplitude: [k, 0.0] }]);
        let w = solve_beltrami(&BeltramiCoefficient::from_profile(grid, profile, DEFAULT_SUPERSAMPLE)?, 1e-12)?;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst = 0.0f64;
        for i in 0..50 {
            let theta = rng.gen_range(0.0..TAU);
            let (z, exact) = if i < 25 {
                let z = C64::from_polar(rng.gen_range(0.0f64..0.81).sqrt(), theta);
                (z, (z + k * z.conj()) / (1.0 + k))
            } else {
                let z = C64::from_polar(rng.gen_range(1.1..3.5), theta);
                (z, (z + k / z) / (1.0 + k))
            };
            worst = worst.max((w.eval(z) - exact).norm() / exact.norm().max(1e-3));
        }
        Ok((worst, t.elapsed().as_secs_f64()))
    })?;
    Ok((worst < 1e-3 && secs < 30.0, format!("max relative error {worst:.2e} (< 1e-3) at 50 probes, {secs:.1} s single-threaded (< 30 s)")))
}

/// Fraction of the cell around `z` covered by the unit disk.
fn disk_coverage(z: C64, h: f64) -> f64 {
    let s = 16;
    let mut inside = 0;
    for a in 0..s {
        for b in 0..s {
            let p = z + c((a as f64 + 0.5) / s as f64 - 0.5, (b as f64 + 0.5) / s as f64 - 0.5) * h;
            if p.norm_sqr() < 1.0 {
                inside += 1;
            }
        }
    }
    inside as f64 / (s * s) as f64
}

fn cauchy_beurling_identities() -> Outcome {
    let grid = ComplexGrid::new(ZERO, 2.0, 256)?;
    let h = grid.spacing();
    let ind = ComplexField::from_fn(grid, |z| c(disk_coverage(z, h), 0.0));
    let cf = cauchy_transform(&ind)?;
    let mut worst = 0.0f64;
    for (idx, z) in grid.nodes().enumerate() {
        let r = z.norm();
        let exact = if r <= 0.8 {
            z.conj()
        } else if (1.2..=1.9).contains(&r) {
            1.0 / z
        } else {
            continue;
        };
        worst = worst.max((cf.values()[idx] - exact).norm());
    }
    // discrete Plancherel: ‖S h‖² = ‖h‖² − |Σ h|²/M² on the padded M × M grid
    let small = ComplexGrid::new(ZERO, 2.0, 128)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let blobs: Vec<(C64, f64, C64)> = (0..6)
        .map(|_| (c(rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8)), rng.gen_range(0.1..0.3), c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        .collect();
    let field = ComplexField::from_fn(small, |z| blobs.iter().map(|(p, s, a)| a * (-(z - p).norm_sqr() / (s * s)).exp()).sum::<C64>()).with_support(1.8);
    let values: Vec<C64> = field.values().iter().map(|v| if v.norm() < 1e-300 { ZERO } else { *v }).collect();
    let sh = TransformPlan::new(small).beurling_padded_values(&values, BeurlingSymbol::Spectral);
    let m2 = sh.len() as f64;
    let lhs: f64 = sh.iter().map(|v| v.norm_sqr()).sum();
    let rhs = values.iter().map(|v| v.norm_sqr()).sum::<f64>() - values.iter().sum::<C64>().norm_sqr() / m2;
    let plancherel = (lhs - rhs).abs() / rhs;
    Ok((
        worst < 1e-3 && plancherel < 1e-6,
        format!("C[1_D] max error {worst:.2e} (< 1e-3), Plancherel relative defect {plancherel:.2e} (< 1e-6)"),
    ))
}

fn chi_roundtrip() -> Outcome {
    let f = OqcFunction::koebe(40)?;
    let g = chi_inverse(&chi(&f)?)?;
    let mut worst = 0.0f64;
    for i in 0..=90 {
        let r = 0.9 * i as f64 / 90.0;
        for j in 0..256 {
            let z = C64::from_polar(r, TAU * j as f64 / 256.0);
            worst = worst.max((g.eval(z) - f.eval(z)).norm());
        }
    }
    Ok((worst < 1e-8, format!("sup error {worst:.2e} on |z| <= 0.9 (< 1e-8), M = 40")))
}

fn schwarz_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let corpus = schwarz_corpus(&mut rng, 50, DEFAULT_ORDER);
    let reports: Vec<_> = corpus.par_iter().map(|s| schwarz_report(&s.psi)).collect();
    let failures = reports.iter().filter(|r| r.is_err()).count();
    let ok: Vec<_> = reports.into_iter().flatten().collect();
    let d = ok.iter().map(|r| r.derivative).fold(0.0, f64::max);
    let n = ok.iter().map(|r| r.norm).fold(0.0, f64::max);
    let p = ok.iter().map(|r| r.pointwise).fold(0.0, f64::max);
    let pass = failures == 0 && ok.len() == 50 && d <= 1.0 + 1e-9 && n <= 6.0 + 1e-3 && p <= 4.0 + 1e-3;
    Ok((pass, format!("50 maps, {failures} failures; max |psi'(0)| {d:.6} (<= 1+1e-9), max ||A|| {n:.4} (<= 6+1e-3), max pointwise {p:.4} (<= 4+1e-3)")))
}

fn identity_sewing() -> Outcome {
    let r = RiggedSphere::standard(base(), 0.6)?;
    let mut worst = 0.0f64;
    for method in [ExtensionMethod::Analytic, ExtensionMethod::DouadyEarle, ExtensionMethod::BeurlingAhlfors] {
        let mut data = BorderedSphereData::from_rigged(&r);
        data.method = method;
        let out = sew_caps(&data, &SewOptions::default())?;
        worst = worst.max(out.sphere.base.distance(&base()));
    }
    Ok((worst < 1e-6, format!("max puncture drift {worst:.2e} over three extension methods (< 1e-6)")))
}

fn schiffer_holomorphy() -> Outcome {
    let t = Instant::now();
    let b = base();
    let e0 = c(0.1, 0.0);
    let mut table = Vec::new();
    for n in [256, 512] {
        let opts = SchifferOptions::new(n, 1e-12);
        let f = |e: C64| -> teichlab::Result<Vec<C64>> { Ok(vec![cross_ratio(&schiffer_variation_s(&b, &cell(e), &opts)?)?]) };
        for h in [1e-2, 1e-3] {
            table.push((n, h, holomorphy_residual(f, e0, h)?));
        }
    }
    let calib = holomorphy_residual(|e| Ok(vec![e.conj()]), e0, 1e-3)?;
    let coarse = table[0].2;
    let finest = table[3].2;
    let secs = t.elapsed().as_secs_f64();
    let pass = finest < coarse && finest < 1e-2 * calib && secs < 600.0;
    let rows: Vec<String> = table.iter().map(|(n, h, r)| format!("N={n},h={h:.0e}:{r:.2e}")).collect();
    Ok((pass, format!("{} ; finest {finest:.2e} < 1e-2 x calibration {calib:.3} ; {secs:.0} s (< 600 s)", rows.join(" "))))
}

/// `(ε, λ(S(ε)), λ(𝒞(η(S(ε)))))` over the 5 × 5 grid of radius 0.1.
fn section_grid() -> teichlab::Result<Vec<(C64, C64, C64)>> {
    let r = RiggedSphere::standard(base(), 0.6)?;
    let sch = SchifferOptions::default();
    let grid: Vec<C64> = (0..5).flat_map(|j| (0..5).map(move |k| c(-0.1 + 0.05 * k as f64, -0.1 + 0.05 * j as f64))).collect();
    grid.par_iter()
        .map(|&e| {
            let s = cross_ratio(&schiffer_variation_s(&r.base, &cell(e), &sch)?)?;
            let b = schiffer_section_eta(&r, &cell(e), &sch, &SewOptions::default())?;
            Ok((e, s, cross_ratio(sewing_map_c(&b)?.sphere())?))
        })
        .collect()
}

fn section_property(grid: &[(C64, C64, C64)]) -> Outcome {
    let worst = grid.iter().map(|(_, s, ce)| (s - ce).norm()).fold(0.0, f64::max);
    Ok((grid.len() == 25 && worst < 1e-6, format!("max |lambda(C(eta)) - lambda(S)| {worst:.2e} over 25 points (< 1e-6)")))
}

fn fiber_roundtrip() -> Outcome {
    let b = base();
    let radii = default_chart_radii(&b);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let opts = SewOptions::default();
    let mut cases = Vec::new();
    for j in 0..10 {
        let local: Vec<f64> = radii.iter().map(|r| r * rng.gen_range(0.35..0.6)).collect();
        let mut twists = vec![ZERO; 4];
        twists[rng.gen_range(0..4)] = C64::from_polar(rng.gen_range(0.05..0.15), rng.gen_range(0.0..TAU));
        let gamma = CircleHomeo::Sin { amplitude: rng.gen_range(0.05..0.15), frequency: rng.gen_range(1..=2), phase: rng.gen_range(0.0..TAU) };
        cases.push((j % 2 == 1, local, twists, rng.gen_range(0..4usize), gamma));
    }
    let errors: Vec<(bool, f64)> = cases
        .into_par_iter()
        .map(|(perturbed, local, twists, cap, gamma)| {
            let round = RiggedSphere::round(b.clone(), &local)?;
            let (phi, data, tol) = if perturbed {
                let mut src = BorderedSphereData::from_rigged(&round);
                src.boundaries[cap].gamma = gamma;
                src.method = ExtensionMethod::DouadyEarle;
                let phi = sew_caps(&src, &opts)?.sphere;
                let data = bordered_representative(&phi, &twists)?;
                (phi, data, 1e-3)
            } else {
                let mut data = bordered_representative(&round, &twists)?;
                data.method = ExtensionMethod::Analytic;
                (round, data, 1e-6)
            };
            let fid = FiberId::new(phi.base.clone())?;
            let l = fiber_l(&fid, &phi.caps)?;
            let point = BorderedPoint::sew(data, &opts)?;
            let back = RiggedSphere::new(fid.sphere().clone(), lambda(&point, &fid, tol)?)?;
            Ok((perturbed, back.boundary_distance(l.rigging(), 512)))
        })
        .collect::<teichlab::Result<_>>()?;
    let worst = |p: bool| errors.iter().filter(|e| e.0 == p).map(|e| e.1).fold(0.0, f64::max);
    let (a, p) = (worst(false), worst(true));
    Ok((a < 1e-6 && p < 1e-3, format!("sup error on 512 samples: analytic {a:.2e} (< 1e-6), perturbed {p:.2e} (< 1e-3)")))
}

fn transversality(grid: &[(C64, C64, C64)]) -> Outcome {
    let spread = |v: &[C64]| v.iter().flat_map(|a| v.iter().map(move |b| (a - b).norm())).fold(0.0, f64::max);
    let eps_range = spread(&grid.iter().map(|g| g.2).collect::<Vec<_>>());
    let b = base();
    let fid = FiberId::new(b.clone())?;
    let sch = SchifferOptions::default();
    let phis: Vec<f64> = vec![0.4, 0.45, 0.5, 0.55, 0.6];
    let at_zero: Vec<C64> = phis
        .par_iter()
        .map(|&f| {
            let phi = RiggedSphere::standard(b.clone(), f)?;
            cross_ratio(sewing_map_c(&product_chart(&cell(ZERO), &phi.caps, &fid, &sch, &SewOptions::default())?)?.sphere())
        })
        .collect::<teichlab::Result<_>>()?;
    let phi_spread = spread(&at_zero);
    Ok((
        eps_range > 1e-4 && phi_spread < 1e-6,
        format!("cross-ratio range over the eps-grid {eps_range:.2e} (> 1e-4), spread over 5 riggings at eps = 0 {phi_spread:.2e} (< 1e-6)"),
    ))
}

fn point_evaluation_holomorphy() -> Outcome {
    let f0 = OqcFunction::koebe(DEFAULT_ORDER)?;
    let x0 = chi(&f0)?;
    let dir = Series::from_fn(DEFAULT_ORDER, |k| if k == 2 { c(0.2, 0.3) } else { ZERO });
    let f = |t: C64| -> teichlab::Result<Vec<C64>> {
        let psi = chi_inverse(&x0.along_line(&dir, c(0.3, 0.0), t))?;
        Ok(vec![point_evaluation(&psi, c(0.3, 0.0))?])
    };
    let r = holomorphy_residual(f, c(0.05, 0.02), 1e-3)?;
    Ok((r < 1e-6, format!("CR residual of t -> psi_t(0.3) at h = 1e-3: {r:.2e} (< 1e-6)")))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(teichlab::Error::Io)?;
    let mut cfg = ExperimentConfig { seed: 17, corpus_size: 20, ..Default::default() };
    let scene = Scene::default();
    let mut csvs = Vec::new();
    for jobs in [1, 3] {
        cfg.jobs = Some(jobs);
        csvs.push(run_experiment(ExperimentKind::BoundsSuite, &cfg, &scene)?.csv);
    }
    let sweep = ExperimentConfig { resolution: 64, epsilons: vec![c(0.1, 0.05)], h: vec![1e-2], ..Default::default() };
    let mut sweeps = Vec::new();
    for jobs in [1, 2] {
        sweeps.push(run_experiment(ExperimentKind::SchifferSweep, &ExperimentConfig { jobs: Some(jobs), ..sweep.clone() }, &scene)?.csv);
    }
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_teichlab"))
            .args(["bounds-suite", "--seed", "42", "--out", out.to_str().unwrap()])
            .output()
            .map_err(teichlab::Error::Io)?;
        if !status.status.success() {
            return Ok((false, format!("binary exited with {:?}", status.status.code())));
        }
        files.push(std::fs::read(out.join("results.csv")).map_err(teichlab::Error::Io)?);
    }
    let pass = csvs[0] == csvs[1] && sweeps[0] == sweeps[1] && files[0] == files[1] && !files[0].is_empty();
    Ok((pass, format!("bounds-suite and schiffer-sweep CSVs byte-identical across runs and worker counts: {pass}")))
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(r)) => r,
        Ok(Err(e)) => (false, format!("error: {e}")),
        Err(_) => (false, "panicked".into()),
    };
    println!("{} [{id:>2}] {name}: {detail} [{:.1} s]", if pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    pass
}

fn main() -> ExitCode {
    let mut all = Vec::new();
    all.push(report(1, "Beltrami solver vs closed form", beltrami_closed_form));
    all.push(report(2, "Cauchy/Beurling identities", cauchy_beurling_identities));
    all.push(report(3, "chi roundtrip", chi_roundtrip));
    all.push(report(4, "Schwarz bounds", schwarz_bounds));
    all.push(report(5, "identity sewing", identity_sewing));
    all.push(report(6, "holomorphy of S", schiffer_holomorphy));
    // the eps-grid solves serve criteria 7 and 9
    let mut grid = Vec::new();
    all.push(report(7, "section property", || {
        grid = section_grid()?;
        section_property(&grid)
    }));
    all.push(report(8, "fiber roundtrip", fiber_roundtrip));
    all.push(report(9, "transversality of the product chart", || transversality(&grid)));
    all.push(report(10, "point-evaluation holomorphy", point_evaluation_holomorphy));
    all.push(report(11, "determinism", determinism));
    let failed = all.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", all.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
