//! Batch experiments behind the command line: scene and config ingestion,
//! the six experiment kinds, and their CSV / JSON / SVG artifacts.
//!
//! Every experiment returns a [`Report`]: a table written as `results.csv`,
//! named assertions written to `summary.json`, and plots under `plots/`.
//! Rows are produced by order-preserving parallel maps, so a fixed seed and
//! config give byte-identical CSV output for any worker count.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extension::{CircleHomeo, ExtensionMethod};
use crate::fibration::{
    bordered_representative, fiber_l, lambda, product_chart, schiffer_section_eta, sewing_map_c, BorderedPoint, FiberId, MEMBERSHIP_TOL,
};
use crate::oqc::{chi, chi_inverse, point_evaluation, schwarz_corpus, schwarz_report, OqcFunction, SchwarzFamily, DEFAULT_ORDER};
use crate::schiffer::{cross_ratio, holomorphy_residual, schiffer_variation_s, SchifferCell, SchifferOptions, SchifferParams, DEFAULT_EPSILON_MAX};
use crate::series::Series;
use crate::sewing::{sew_caps, BorderedSphereData, SewOptions};
use crate::sphere::{PuncturedSphere, SpherePoint};
use crate::surfaces::{default_chart_radii, surface_chart_t, CapMap, RiggedSphere, DEFAULT_BOUNDARY_SAMPLES};
use crate::svg::Plot;

type C64 = Complex64;
const ZERO: C64 = C64::new(0.0, 0.0);

/// The six experiment kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sew,
    SchifferSweep,
    FiberRoundtrip,
    SectionCheck,
    Holomorphy,
    BoundsSuite,
}

impl ExperimentKind {
    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::Sew => "sew",
            ExperimentKind::SchifferSweep => "schiffer-sweep",
            ExperimentKind::FiberRoundtrip => "fiber-roundtrip",
            ExperimentKind::SectionCheck => "section-check",
            ExperimentKind::Holomorphy => "holomorphy",
            ExperimentKind::BoundsSuite => "bounds-suite",
        }
    }
}

/// Maps checked by the `holomorphy` experiment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HolomorphyTarget {
    /// `ε ↦ λ(S(ε))`.
    #[default]
    Schiffer,
    /// `ε ↦ λ(𝒞(product_chart(ε, φ₀)))`.
    ProductChart,
    /// `t ↦ ψ_t(0.3)` along a line in pre-Schwarzian coordinates.
    PointEvaluation,
    /// `t ↦ Λ(φ_t)` sampled on the boundary circle.
    LambdaBoundary,
    /// `t ↦ χ(Λ(φ_t))`, leading coefficients.
    LambdaChi,
}

impl HolomorphyTarget {
    fn uses_solver_grid(self) -> bool {
        matches!(self, HolomorphyTarget::Schiffer | HolomorphyTarget::ProductChart)
    }
}

/// Pass thresholds; defaults are the acceptance tolerances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub sew_drift: f64,
    pub sew_conformality: f64,
    pub roundtrip_analytic: f64,
    pub roundtrip_perturbed: f64,
    pub membership_perturbed: f64,
    pub section: f64,
    pub transversal_range: f64,
    pub fiber_constancy: f64,
    pub holomorphy_ratio: f64,
    pub point_evaluation: f64,
    pub derivative_slack: f64,
    pub norm_slack: f64,
    pub schiffer_move: f64,
    pub half_step: f64,
    pub calibration: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            sew_drift: 1e-6,
            sew_conformality: 1e-4,
            roundtrip_analytic: 1e-6,
            roundtrip_perturbed: 1e-3,
            membership_perturbed: 1e-3,
            section: 1e-6,
            transversal_range: 1e-4,
            fiber_constancy: 1e-6,
            holomorphy_ratio: 1e-2,
            point_evaluation: 1e-6,
            derivative_slack: 1e-9,
            norm_slack: 1e-3,
            schiffer_move: 1e-4,
            half_step: 0.05,
            calibration: 1e-12,
        }
    }
}

/// Experiment configuration, read from a single JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    pub experiment: Option<ExperimentKind>,
    /// Scene file, relative to the config file.
    pub scene: Option<PathBuf>,
    pub resolution: usize,
    /// Resolutions of the holomorphy refinement study, paired with `h`.
    pub resolutions: Vec<usize>,
    pub tol: f64,
    /// Neumann iteration cap of every Beltrami solve.
    pub max_iter: usize,
    /// Stencil steps, coarse to fine.
    pub h: Vec<f64>,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub target: HolomorphyTarget,
    /// Base point of holomorphy stencils.
    pub e0: C64,
    /// Schiffer parameters of the sweep.
    pub epsilons: Vec<C64>,
    /// Half side of the square ε-grid of the section check.
    pub grid_radius: f64,
    pub grid_points: usize,
    /// Cap fractions of the φ-grid.
    pub phi_fractions: Vec<f64>,
    pub corpus_size: usize,
    pub riggings: usize,
    pub thresholds: Thresholds,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            scene: None,
            resolution: 256,
            resolutions: vec![256, 512],
            tol: 1e-11,
            max_iter: 200,
            h: vec![1e-2, 1e-3],
            out: PathBuf::from("out"),
            seed: 0,
            jobs: None,
            target: HolomorphyTarget::Schiffer,
            e0: C64::new(0.1, 0.0),
            epsilons: vec![C64::new(0.05, 0.0), C64::new(0.1, 0.0), C64::new(0.0, 0.1)],
            grid_radius: 0.1,
            grid_points: 5,
            phi_fractions: vec![0.4, 0.45, 0.5, 0.55, 0.6],
            corpus_size: 50,
            riggings: 10,
            thresholds: Thresholds::default(),
        }
    }
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

impl ExperimentConfig {
    /// Reads a config; a relative scene path is resolved against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| parse_err(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| parse_err(path, e))?;
        if let Some(scene) = &cfg.scene {
            if scene.is_relative() {
                cfg.scene = Some(path.parent().unwrap_or(Path::new(".")).join(scene));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let pow2 = |n: usize| n >= 16 && n.is_power_of_two();
        if !pow2(self.resolution) || !self.resolutions.iter().all(|&n| pow2(n)) {
            return Err(Error::Parse("resolutions must be powers of two, at least 16".into()));
        }
        if !(self.tol > 1e-12 && self.tol < 1e-2) {
            return Err(Error::Parse(format!("tol {} outside (1e-12, 1e-2)", self.tol)));
        }
        if self.h.is_empty() || !self.h.iter().all(|&h| h > 0.0 && h.is_finite()) {
            return Err(Error::Parse("stencil steps must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Parse("max_iter must be positive".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Parse("jobs must be positive".into()));
        }
        if self.grid_points == 0 || !(self.grid_radius > 0.0) {
            return Err(Error::Parse("the epsilon grid needs points and a positive radius".into()));
        }
        Ok(())
    }

    fn sew_options(&self) -> SewOptions {
        let mut o = SewOptions::new(self.resolution, self.tol);
        o.solver.max_iter = self.max_iter;
        o
    }

    fn schiffer_options(&self, n: usize) -> SchifferOptions {
        let mut o = SchifferOptions::new(n, self.tol);
        o.solver.max_iter = self.max_iter;
        o
    }
}

/// Boundary reparametrization of one cap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub cap: usize,
    pub gamma: CircleHomeo,
}

/// A round Schiffer cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub center: C64,
    pub radius: f64,
    #[serde(default = "default_epsilon_max")]
    pub epsilon_max: f64,
}

fn default_epsilon_max() -> f64 {
    DEFAULT_EPSILON_MAX
}

/// A punctured sphere with round caps, boundary reparametrizations and Schiffer cells.
///
/// Punctures are normalized so the first three sit at `0, 1, ∞`; cell
/// centers are read in that normalized frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scene {
    pub punctures: Vec<SpherePoint>,
    pub cap_fraction: f64,
    pub boundaries: Vec<BoundarySpec>,
    pub extension: ExtensionMethod,
    pub cells: Vec<CellSpec>,
}

impl Default for Scene {
    fn default() -> Self {
        Scene {
            punctures: vec![SpherePoint::finite(0.0, 0.0), SpherePoint::finite(1.0, 0.0), SpherePoint::Infinity, SpherePoint::finite(2.0, 1.0)],
            cap_fraction: 0.6,
            boundaries: Vec::new(),
            extension: ExtensionMethod::DouadyEarle,
            cells: vec![CellSpec { center: C64::new(4.0, 0.0), radius: 0.5, epsilon_max: DEFAULT_EPSILON_MAX }],
        }
    }
}

impl Scene {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| parse_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| parse_err(path, e))
    }

    pub fn base(&self) -> Result<PuncturedSphere> {
        Ok(PuncturedSphere::new(self.punctures.clone())?.normalize()?.0)
    }

    pub fn rigged(&self) -> Result<RiggedSphere> {
        self.rigged_with(self.cap_fraction)
    }

    fn rigged_with(&self, fraction: f64) -> Result<RiggedSphere> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::InvalidRigging(format!("cap fraction {fraction} outside (0, 1)")));
        }
        RiggedSphere::standard(self.base()?, fraction)
    }

    /// Bordered data: the round caps with the scene's reparametrizations.
    pub fn bordered(&self) -> Result<BorderedSphereData> {
        let mut data = BorderedSphereData::from_rigged(&self.rigged()?);
        data.method = self.extension;
        for b in &self.boundaries {
            let slot = data
                .boundaries
                .get_mut(b.cap)
                .ok_or_else(|| Error::InvalidBoundary(format!("boundary {} does not exist", b.cap)))?;
            slot.gamma = b.gamma.clone();
        }
        data.validate()?;
        Ok(data)
    }

    /// Schiffer parameters with every `ε_i = e`.
    pub fn cells(&self, e: C64) -> Result<SchifferParams> {
        if self.cells.is_empty() {
            return Err(Error::InvalidSchiffer("the scene has no Schiffer cells".into()));
        }
        let cells = self
            .cells
            .iter()
            .map(|c| SchifferCell::round(c.center, c.radius)?.with_epsilon_max(c.epsilon_max))
            .collect::<Result<Vec<_>>>()?;
        SchifferParams::new(cells, vec![e; self.cells.len()])
    }
}

/// How a measured value is compared with its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">")]
    Above,
}

/// One pass/fail check with its measurement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub measured: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl Assertion {
    pub fn new(name: &str, measured: f64, relation: Relation, threshold: f64) -> Self {
        let passed = match relation {
            Relation::Below => measured < threshold,
            Relation::AtMost => measured <= threshold,
            Relation::Above => measured > threshold,
        };
        Assertion { name: name.into(), measured, relation, threshold, passed }
    }
}

/// Everything an experiment produces.
#[derive(Clone, Debug)]
pub struct Report {
    pub kind: ExperimentKind,
    pub csv: Vec<u8>,
    pub assertions: Vec<Assertion>,
    pub plots: Vec<Plot>,
}

#[derive(Serialize)]
struct Summary<'a> {
    experiment: &'static str,
    passed: bool,
    seed: u64,
    resolution: usize,
    tol: f64,
    assertions: &'a [Assertion],
}

impl Report {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    /// Writes `results.csv`, `summary.json` and `plots/*.svg` under `dir`.
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("plots"))?;
        fs::write(dir.join("results.csv"), &self.csv)?;
        let summary = Summary {
            experiment: self.kind.tag(),
            passed: self.passed(),
            seed: cfg.seed,
            resolution: cfg.resolution,
            tol: cfg.tol,
            assertions: &self.assertions,
        };
        let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Evaluation(e.to_string()))?;
        fs::write(dir.join("summary.json"), json + "\n")?;
        for p in &self.plots {
            fs::write(dir.join("plots").join(format!("{}.svg", p.name)), p.render()?)?;
        }
        Ok(())
    }
}

/// A CSV row type with its header.
trait Row: Serialize {
    const HEADER: &'static [&'static str];
}

fn to_csv<T: Row>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let err = |e: csv::Error| Error::Evaluation(format!("csv: {e}"));
    w.write_record(T::HEADER).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Evaluation(format!("csv: {e}")))
}

/// Loads the scene named by `cfg`, or the default scene.
pub fn load_scene(cfg: &ExperimentConfig) -> Result<Scene> {
    match &cfg.scene {
        Some(p) => Scene::load(p),
        None => Ok(Scene::default()),
    }
}

/// Runs one experiment inside a pool of `cfg.jobs` workers.
pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig, scene: &Scene) -> Result<Report> {
    if let Some(tag) = cfg.experiment {
        if tag != kind {
            return Err(Error::Parse(format!("config is for {:?}, not {:?}", tag.tag(), kind.tag())));
        }
    }
    cfg.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Error::Evaluation(format!("worker pool: {e}")))?;
    pool.install(|| match kind {
        ExperimentKind::Sew => sew(cfg, scene),
        ExperimentKind::SchifferSweep => schiffer_sweep(cfg, scene),
        ExperimentKind::FiberRoundtrip => fiber_roundtrip(cfg, scene),
        ExperimentKind::SectionCheck => section_check(cfg, scene),
        ExperimentKind::Holomorphy => holomorphy(cfg, scene),
        ExperimentKind::BoundsSuite => bounds_suite(cfg),
    })
}

fn re_im(p: SpherePoint) -> (f64, f64) {
    match p {
        SpherePoint::Finite(z) => (z.re, z.im),
        SpherePoint::Infinity => (f64::INFINITY, f64::INFINITY),
    }
}

fn is_conformal_gamma(g: &CircleHomeo) -> bool {
    matches!(g, CircleHomeo::Identity)
}

#[derive(Serialize)]
struct SewRow {
    cap: usize,
    puncture_re: f64,
    puncture_im: f64,
    center_offset: f64,
    antiholomorphic: f64,
    boundary_error: f64,
    interior_error: f64,
    extension_dilatation: f64,
}

impl Row for SewRow {
    const HEADER: &'static [&'static str] = &[
        "cap",
        "puncture_re",
        "puncture_im",
        "center_offset",
        "antiholomorphic",
        "boundary_error",
        "interior_error",
        "extension_dilatation",
    ];
}

fn sew(cfg: &ExperimentConfig, scene: &Scene) -> Result<Report> {
    let data = scene.bordered()?;
    let out = sew_caps(&data, &cfg.sew_options())?;
    let rows: Vec<SewRow> = out
        .report
        .caps
        .iter()
        .zip(out.sphere.base.punctures())
        .enumerate()
        .map(|(i, (c, &p))| {
            let (re, im) = re_im(p);
            SewRow {
                cap: i,
                puncture_re: re,
                puncture_im: im,
                center_offset: c.center_offset,
                antiholomorphic: c.antiholomorphic,
                boundary_error: c.boundary_error,
                interior_error: c.interior_error,
                extension_dilatation: c.extension_dilatation,
            }
        })
        .collect();
    let base = scene.base()?;
    let drift = if base.len() == 4 {
        (cross_ratio(&out.sphere.base)? - cross_ratio(&base)?).norm()
    } else {
        out.sphere.base.distance(&base)
    };
    let th = &cfg.thresholds;
    let mut assertions = vec![Assertion::new("max_antiholomorphic", out.report.max_antiholomorphic(), Relation::Below, th.sew_conformality)];
    // a conformal reparametrization leaves the sewn sphere where it was
    if data.boundaries.iter().all(|b| is_conformal_gamma(&b.gamma)) {
        assertions.insert(0, Assertion::new("cross_ratio_drift", drift, Relation::Below, th.sew_drift));
    }
    let plot = Plot::new("sew_residuals", "per-cap sewing residuals", "cap", "residual")
        .log_y()
        .with_series("boundary error", rows.iter().map(|r| (r.cap as f64, r.boundary_error)).collect())
        .with_series("antiholomorphic", rows.iter().map(|r| (r.cap as f64, r.antiholomorphic)).collect());
    Ok(Report { kind: ExperimentKind::Sew, csv: to_csv(&rows)?, assertions, plots: vec![plot] })
}

fn lambda_of(base: &PuncturedSphere, scene: &Scene, e: C64, opts: &SchifferOptions) -> Result<C64> {
    cross_ratio(&schiffer_variation_s(base, &scene.cells(e)?, opts)?)
}

#[derive(Serialize)]
struct SweepRow {
    eps_re: f64,
    eps_im: f64,
    h: f64,
    lambda_re: f64,
    lambda_im: f64,
    residual: f64,
}

impl Row for SweepRow {
    const HEADER: &'static [&'static str] = &["eps_re", "eps_im", "h", "lambda_re", "lambda_im", "residual"];
}

fn schiffer_sweep(cfg: &ExperimentConfig, scene: &Scene) -> Result<Report> {
    let base = scene.base()?;
    let opts = cfg.schiffer_options(cfg.resolution);
    let l0 = cross_ratio(&base)?;
    let f = |e: C64| -> Result<Vec<C64>> { Ok(vec![lambda_of(&base, scene, e, &opts)?]) };
    let jobs: Vec<(C64, f64)> = cfg.epsilons.iter().flat_map(|&e| cfg.h.iter().map(move |&h| (e, h))).collect();
    let lambdas: Vec<C64> = cfg.epsilons.par_iter().map(|&e| lambda_of(&base, scene, e, &opts)).collect::<Result<_>>()?;
    let residuals: Vec<f64> = jobs.par_iter().map(|&(e, h)| holomorphy_residual(f, e, h)).collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = jobs
        .iter()
        .zip(&residuals)
        .map(|(&(e, h), &r)| {
            let l = lambdas[cfg.epsilons.iter().position(|&x| x == e).unwrap_or(0)];
            SweepRow { eps_re: e.re, eps_im: e.im, h, lambda_re: l.re, lambda_im: l.im, residual: r }
        })
        .collect();
    let th = &cfg.thresholds;
    let calib = holomorphy_residual(|e| Ok(vec![e.conj()]), cfg.e0, cfg.h[0])?;
    let mut assertions = vec![Assertion::new(
        "max_residual",
        residuals.iter().copied().fold(0.0, f64::max),
        Relation::Below,
        th.holomorphy_ratio * calib,
    )];
    // nondegeneracy: the coordinate moves, and half the parameter moves it about half as far
    if let Some((i, &e)) = cfg.epsilons.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())) {
        if e != ZERO {
            let far = (lambdas[i] - l0).norm();
            let half = (lambda_of(&base, scene, 0.5 * e, &opts)? - l0).norm();
            assertions.push(Assertion::new("largest_move", far, Relation::Above, th.schiffer_move));
            assertions.push(Assertion::new("half_step_deviation", (half / far - 0.5).abs(), Relation::Below, th.half_step));
        }
    }
    let mut plot = Plot::new("residual_vs_h", "Cauchy-Riemann residual of the Schiffer coordinate", "h", "residual").log_log();
    for &e in &cfg.epsilons {
        let pts = rows.iter().filter(|r| r.eps_re == e.re && r.eps_im == e.im).map(|r| (r.h, r.residual)).collect();
        plot = plot.with_series(&format!("eps = {:.3}{:+.3}i", e.re, e.im), pts);
    }
    Ok(Report { kind: ExperimentKind::SchifferSweep, csv: to_csv(&rows)?, assertions, plots: vec![plot] })
}

/// One rigging of the fiber-roundtrip corpus with its bordered representative.
struct RoundtripCase {
    kind: &'static str,
    fiber: FiberId,
    rigging: RiggedSphere,
    data: BorderedSphereData,
    membership: f64,
    threshold: f64,
}

fn random_twist(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    let mut twists = vec![ZERO; n];
    let k = rng.gen_range(0..n);
    twists[k] = C64::from_polar(rng.gen_range(0.05..0.15), rng.gen_range(0.0..TAU));
    twists
}

/// Half analytic riggings, half riggings produced by sewing sin-perturbed boundaries.
fn roundtrip_corpus(cfg: &ExperimentConfig, scene: &Scene) -> Result<Vec<RoundtripCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base = scene.base()?;
    let n = base.len();
    let radii = default_chart_radii(&base);
    let th = &cfg.thresholds;
    let mut plans = Vec::with_capacity(cfg.riggings);
    for j in 0..cfg.riggings {
        let local: Vec<f64> = radii.iter().map(|r| r * rng.gen_range(0.35..0.6)).collect();
        let twists = random_twist(&mut rng, n);
        let perturbed = j % 2 == 1;
        let gamma = CircleHomeo::Sin { amplitude: rng.gen_range(0.05..0.15), frequency: rng.gen_range(1..=2), phase: rng.gen_range(0.0..TAU) };
        let cap = rng.gen_range(0..n);
        plans.push((local, twists, perturbed.then_some((cap, gamma))));
    }
    let sew_opts = cfg.sew_options();
    plans
        .into_par_iter()
        .map(|(local, twists, perturbation)| {
            let round = RiggedSphere::round(base.clone(), &local)?;
            match perturbation {
                None => {
                    // Möbius reparametrization with its conformal extension: P⁻¹ of an analytic rigging
                    let mut data = bordered_representative(&round, &twists)?;
                    data.method = ExtensionMethod::Analytic;
                    Ok(RoundtripCase {
                        kind: "analytic",
                        fiber: FiberId::new(base.clone())?,
                        rigging: round,
                        data,
                        membership: MEMBERSHIP_TOL,
                        threshold: th.roundtrip_analytic,
                    })
                }
                Some((cap, gamma)) => {
                    let mut src = BorderedSphereData::from_rigged(&round);
                    src.method = ExtensionMethod::DouadyEarle;
                    src.boundaries[cap].gamma = gamma;
                    let rigging = sew_caps(&src, &sew_opts)?.sphere;
                    let data = bordered_representative(&rigging, &twists)?;
                    Ok(RoundtripCase {
                        kind: "perturbed",
                        fiber: FiberId::new(rigging.base.clone())?,
                        rigging,
                        data,
                        membership: th.membership_perturbed,
                        threshold: th.roundtrip_perturbed,
                    })
                }
            }
        })
        .collect()
}

#[derive(Serialize)]
struct RoundtripRow {
    idx: usize,
    kind: &'static str,
    sup_mu: f64,
    fiber_gap: f64,
    sup_error: f64,
    threshold: f64,
}

impl Row for RoundtripRow {
    const HEADER: &'static [&'static str] = &["idx", "kind", "sup_mu", "fiber_gap", "sup_error", "threshold"];
}

fn fiber_roundtrip(cfg: &ExperimentConfig, scene: &Scene) -> Result<Report> {
    let cases = roundtrip_corpus(cfg, scene)?;
    let opts = cfg.sew_options();
    let rows: Vec<RoundtripRow> = cases
        .par_iter()
        .enumerate()
        .map(|(idx, c)| {
            // Λ ∘ 𝒫⁻¹ ∘ L (φ)
            let point = fiber_l(&c.fiber, &c.rigging.caps)?;
            let b = BorderedPoint::sew(c.data.clone(), &opts)?;
            let gap = sewing_map_c(&b)?.distance(&c.fiber);
            let sup_error = match lambda(&b, &c.fiber, c.membership) {
                Ok(phi) => RiggedSphere::new(point.base_point().clone(), phi)?.boundary_distance(point.rigging(), DEFAULT_BOUNDARY_SAMPLES),
                Err(Error::NotInFiber(_)) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            Ok(RoundtripRow { idx, kind: c.kind, sup_mu: b.report().sup_mu, fiber_gap: gap, sup_error, threshold: c.threshold })
        })
        .collect::<Result<_>>()?;
    let th = &cfg.thresholds;
    let worst = |k: &str| rows.iter().filter(|r| r.kind == k).map(|r| r.sup_error).fold(0.0, f64::max);
    let mut assertions = Vec::new();
    if rows.iter().any(|r| r.kind == "analytic") {
        assertions.push(Assertion::new("analytic_sup_error", worst("analytic"), Relation::Below, th.roundtrip_analytic));
    }
    if rows.iter().any(|r| r.kind == "perturbed") {
        assertions.push(Assertion::new("perturbed_sup_error", worst("perturbed"), Relation::Below, th.roundtrip_perturbed));
    }
    let series = |k: &str| rows.iter().filter(|r| r.kind == k).map(|r| (r.idx as f64, r.sup_error.max(1e-17))).collect();
    let plot = Plot::new("roundtrip_errors", "fiber roundtrip boundary error", "rigging", "sup error")
        .log_y()
        .with_series("analytic", series("analytic"))
        .with_series("perturbed", series("perturbed"));
    Ok(Report { kind: ExperimentKind::FiberRoundtrip, csv: to_csv(&rows)?, assertions, plots: vec![plot] })
}

/// Square grid of side `2r` with `k × k` nodes.
pub fn epsilon_grid(r: f64, k: usize) -> Vec<C64> {
    let t = |j: usize| if k == 1 { 0.0 } else { -r + 2.0 * r * j as f64 / (k - 1) as f64 };
    (0..k).flat_map(|j| (0..k).map(move |l| C64::new(t(l), t(j)))).collect()
}

#[derive(Serialize)]
struct SectionRow {
    family: &'static str,
    eps_re: f64,
    eps_im: f64,
    fraction: f64,
    lambda_s_re: f64,
    lambda_s_im: f64,
    lambda_c_re: f64,
    lambda_c_im: f64,
    diff: f64,
}

impl Row for SectionRow {
    const HEADER: &'static [&'static str] =
        &["family", "eps_re", "eps_im", "fraction", "lambda_s_re", "lambda_s_im", "lambda_c_re", "lambda_c_im", "diff"];
}

fn spread(v: &[C64]) -> f64 {
    let mut d = 0.0f64;
    for a in v {
        for b in v {
            d = d.max((a - b).norm());
        }
    }
    d
}

fn section_check(cfg: &ExperimentConfig, scene: &Scene) -> Result<Report> {
    let rigged = scene.rigged()?;
    let base = rigged.base.clone();
    let fid = FiberId::new(base.clone())?;
    let sch = cfg.schiffer_options(cfg.resolution);
    let sew = cfg.sew_options();
    let grid = epsilon_grid(cfg.grid_radius, cfg.grid_points);
    let fixed = grid.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(ZERO);
    // ε-grid at fixed φ, then φ-grid at ε = 0 and at the largest ε
    let mut jobs: Vec<(&'static str, C64, f64)> = grid.iter().map(|&e| ("eps-grid", e, scene.cap_fraction)).collect();
    for &f in &cfg.phi_fractions {
        jobs.push(("phi-grid", ZERO, f));
    }
    for &f in &cfg.phi_fractions {
        jobs.push(("phi-grid-deformed", fixed, f));
    }
    let rows: Vec<SectionRow> = jobs
        .par_iter()
        .map(|&(family, e, fraction)| {
            let params = scene.cells(e)?;
            let phi = scene.rigged_with(fraction)?;
            let ls = cross_ratio(&schiffer_variation_s(&base, &params, &sch)?)?;
            let b = if family == "eps-grid" {
                schiffer_section_eta(&phi, &params, &sch, &sew)?
            } else {
                product_chart(&params, &phi.caps, &fid, &sch, &sew)?
            };
            let lc = cross_ratio(sewing_map_c(&b)?.sphere())?;
            Ok(SectionRow {
                family,
                eps_re: e.re,
                eps_im: e.im,
                fraction,
                lambda_s_re: ls.re,
                lambda_s_im: ls.im,
                lambda_c_re: lc.re,
                lambda_c_im: lc.im,
                diff: (ls - lc).norm(),
            })
        })
        .collect::<Result<_>>()?;
    let th = &cfg.thresholds;
    let lc = |r: &SectionRow| C64::new(r.lambda_c_re, r.lambda_c_im);
    fn family<'r>(rows: &'r [SectionRow], f: &'static str) -> impl Iterator<Item = &'r SectionRow> {
        rows.iter().filter(move |r| r.family == f)
    }
    let max_diff = family(&rows, "eps-grid").map(|r| r.diff).fold(0.0, f64::max);
    let eps_range = spread(&family(&rows, "eps-grid").map(lc).collect::<Vec<_>>());
    let phi_spread = spread(&family(&rows, "phi-grid").map(lc).collect::<Vec<_>>());
    let deformed_spread = spread(&family(&rows, "phi-grid-deformed").map(lc).collect::<Vec<_>>());
    let assertions = vec![
        Assertion::new("section_max_diff", max_diff, Relation::Below, th.section),
        Assertion::new("eps_grid_range", eps_range, Relation::Above, th.transversal_range),
        Assertion::new("phi_grid_spread", phi_spread, Relation::Below, th.fiber_constancy),
        Assertion::new("phi_grid_spread_deformed", deformed_spread, Relation::Below, th.fiber_constancy),
    ];
    let pts = |f: &'static str| family(&rows, f).map(|r| (r.lambda_c_re, r.lambda_c_im)).collect::<Vec<_>>();
    let plot = Plot::new("cross_ratios", "sewn cross-ratios of the product chart", "Re lambda", "Im lambda")
        .with_series("eps-grid", pts("eps-grid"))
        .with_series("phi-grid", pts("phi-grid"))
        .with_series("phi-grid (deformed)", pts("phi-grid-deformed"));
    Ok(Report { kind: ExperimentKind::SectionCheck, csv: to_csv(&rows)?, assertions, plots: vec![plot] })
}

/// Base function and direction of the χ-line used by the point-evaluation target.
pub fn point_evaluation_line() -> Result<(crate::oqc::PreSchwarzianCoords, Series, C64)> {
    let f = OqcFunction::quadratic(C64::new(0.2, 0.1), DEFAULT_ORDER)?;
    let dir = Series::from_fn(DEFAULT_ORDER, |k| if k == 1 { C64::new(0.3, -0.2) } else { ZERO });
    Ok((chi(&f)?, dir, C64::new(0.1, 0.05)))
}

/// `t ↦ ψ_t(0.3)` with `ψ_t = χ⁻¹(χ(ψ₀) + t·direction)`.
pub fn point_evaluation_map(t: C64) -> Result<Vec<C64>> {
    let (coords, dir, dc) = point_evaluation_line()?;
    let psi = chi_inverse(&coords.along_line(&dir, dc, t))?;
    Ok(vec![point_evaluation(&psi, C64::new(0.3, 0.0))?])
}

/// `φ_t`: the scene rigging with its last cap moved along a χ-line.
fn rigging_curve(scene: &Scene, t: C64) -> Result<RiggedSphere> {
    let mut r = scene.rigged()?;
    let k = r.caps.len() - 1;
    let fs = surface_chart_t(&r)?;
    let mut coeffs = fs[k].coeffs().to_vec();
    coeffs.resize(DEFAULT_ORDER + 1, ZERO);
    let coords = chi(&OqcFunction::new(coeffs)?)?;
    let dir = Series::from_fn(DEFAULT_ORDER, |j| if j == 1 { C64::new(0.2, 0.1) } else { ZERO });
    let ft = chi_inverse(&coords.along_line(&dir, 0.1 * coords.c, t))?;
    r.caps[k] = CapMap::from_oqc(r.caps[k].chart, &ft);
    Ok(r)
}

/// `Λ(𝒫⁻¹(L(φ_t)))` for the rigging curve.
fn lambda_curve(scene: &Scene, t: C64, opts: &SewOptions) -> Result<Vec<CapMap>> {
    let r = rigging_curve(scene, t)?;
    let fid = FiberId::new(r.base.clone())?;
    let b = BorderedPoint::sew(bordered_representative(&r, &vec![ZERO; r.caps.len()])?, opts)?;
    lambda(&b, &fid, MEMBERSHIP_TOL)
}

fn holomorphy_map<'a>(target: HolomorphyTarget, scene: &'a Scene, cfg: &ExperimentConfig, n: usize) -> Result<impl Fn(C64) -> Result<Vec<C64>> + Sync + 'a> {
    let base = scene.base()?;
    let fid = FiberId::new(base.clone())?;
    let phi = scene.rigged()?.caps;
    let sch = cfg.schiffer_options(n);
    let sew = cfg.sew_options();
    Ok(move |e: C64| -> Result<Vec<C64>> {
        match target {
            HolomorphyTarget::Schiffer => Ok(vec![lambda_of(&base, scene, e, &sch)?]),
            HolomorphyTarget::ProductChart => {
                let b = product_chart(&scene.cells(e)?, &phi, &fid, &sch, &sew)?;
                Ok(vec![cross_ratio(sewing_map_c(&b)?.sphere())?])
            }
            HolomorphyTarget::PointEvaluation => point_evaluation_map(e),
            HolomorphyTarget::LambdaBoundary => {
                let caps = lambda_curve(scene, e, &sew)?;
                let cap = caps.last().ok_or_else(|| Error::InvalidRigging("no caps".into()))?;
                Ok((0..8).map(|j| cap.local(C64::from_polar(1.0, TAU * j as f64 / 8.0))).collect())
            }
            HolomorphyTarget::LambdaChi => {
                let caps = lambda_curve(scene, e, &sew)?;
                let cap = caps.last().ok_or_else(|| Error::InvalidRigging("no caps".into()))?;
                let x = chi(&cap.to_oqc()?)?;
                let mut out: Vec<C64> = x.v.series().coeffs().iter().take(6).copied().collect();
                out.push(x.c);
                Ok(out)
            }
        }
    })
}

#[derive(Serialize)]
struct HolomorphyRow {
    target: HolomorphyTarget,
    n: usize,
    h: f64,
    residual: f64,
    roundoff_floor: f64,
}

impl Row for HolomorphyRow {
    const HEADER: &'static [&'static str] = &["target", "N", "h", "residual", "roundoff_floor"];
}

fn holomorphy(cfg: &ExperimentConfig, scene: &Scene) -> Result<Report> {
    let target = cfg.target;
    let ns: Vec<usize> = if target.uses_solver_grid() && !cfg.resolutions.is_empty() { cfg.resolutions.clone() } else { vec![cfg.resolution] };
    let mut rows = Vec::new();
    for &n in &ns {
        let f = holomorphy_map(target, scene, cfg, n)?;
        let scale = f(cfg.e0)?.iter().map(|v| v.norm()).fold(1.0, f64::max);
        for &h in &cfg.h {
            let residual = holomorphy_residual(&f, cfg.e0, h)?;
            rows.push(HolomorphyRow { target, n, h, residual, roundoff_floor: 16.0 * f64::EPSILON * scale / h });
        }
    }
    // joint refinement: step i pairs the i-th resolution with the i-th stencil step
    let steps = ns.len().max(cfg.h.len());
    let path: Vec<(f64, f64)> = (0..steps)
        .map(|i| {
            let r = &rows[i.min(ns.len() - 1) * cfg.h.len() + i.min(cfg.h.len() - 1)];
            (r.residual, r.roundoff_floor)
        })
        .collect();
    let th = &cfg.thresholds;
    let calib = holomorphy_residual(|e| Ok(vec![e.conj()]), cfg.e0, cfg.h[0])?;
    let worst_step = path.windows(2).map(|w| if w[1].0 <= w[1].1 { 0.0 } else { w[1].0 / w[0].0 }).fold(0.0, f64::max);
    let finest = path.last().map(|p| p.0).unwrap_or(f64::NAN);
    let mut assertions = vec![
        Assertion::new("calibration_error", (calib - 2.0).abs(), Relation::Below, th.calibration),
        Assertion::new("refinement_ratio", worst_step, Relation::Below, 1.0),
        Assertion::new("finest_residual", finest, Relation::Below, th.holomorphy_ratio * calib),
    ];
    if target == HolomorphyTarget::PointEvaluation {
        assertions.push(Assertion::new("point_evaluation_residual", finest, Relation::Below, th.point_evaluation));
    }
    let mut plot = Plot::new("residual_vs_h", "Cauchy-Riemann residual", "h", "residual").log_log();
    for &n in &ns {
        plot = plot.with_series(&format!("N = {n}"), rows.iter().filter(|r| r.n == n).map(|r| (r.h, r.residual)).collect());
    }
    Ok(Report { kind: ExperimentKind::Holomorphy, csv: to_csv(&rows)?, assertions, plots: vec![plot] })
}

#[derive(Serialize)]
struct BoundsRow {
    idx: usize,
    family: SchwarzFamily,
    derivative: f64,
    norm: f64,
    pointwise: f64,
    tail: f64,
}

impl Row for BoundsRow {
    const HEADER: &'static [&'static str] = &["idx", "family", "derivative", "norm", "pointwise", "tail"];
}

fn bounds_suite(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let corpus = schwarz_corpus(&mut rng, cfg.corpus_size, DEFAULT_ORDER);
    let measured: Vec<std::result::Result<BoundsRow, String>> = corpus
        .par_iter()
        .enumerate()
        .map(|(idx, s)| match schwarz_report(&s.psi) {
            Ok(r) => Ok(BoundsRow { idx, family: s.family, derivative: r.derivative, norm: r.norm, pointwise: r.pointwise, tail: s.tail }),
            Err(e) => Err(format!("sample {idx}: {e}")),
        })
        .collect();
    let failures = measured.iter().filter(|m| m.is_err()).count();
    let rows: Vec<BoundsRow> = measured.into_iter().flatten().collect();
    let th = &cfg.thresholds;
    let max = |f: fn(&BoundsRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let assertions = vec![
        Assertion::new("samples", rows.len() as f64, Relation::AtMost, cfg.corpus_size as f64),
        Assertion::new("failures", failures as f64, Relation::AtMost, 0.0),
        Assertion::new("max_derivative", max(|r| r.derivative), Relation::AtMost, 1.0 + th.derivative_slack),
        Assertion::new("max_norm", max(|r| r.norm), Relation::AtMost, 6.0 + th.norm_slack),
        Assertion::new("max_pointwise", max(|r| r.pointwise), Relation::AtMost, 4.0 + th.norm_slack),
    ];
    let plot = Plot::new("schwarz_bounds", "Schwarz-lemma bounds over the corpus", "sample", "value")
        .with_series("|psi'(0)|", rows.iter().map(|r| (r.idx as f64, r.derivative)).collect())
        .with_series("||A(psi)||", rows.iter().map(|r| (r.idx as f64, r.norm)).collect())
        .with_series("pointwise", rows.iter().map(|r| (r.idx as f64, r.pointwise)).collect());
    Ok(Report { kind: ExperimentKind::BoundsSuite, csv: to_csv(&rows)?, assertions, plots: vec![plot] })
}

/// Process exit status for an experiment error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::InvalidGrid(_)
        | Error::InvalidSphere(_)
        | Error::InvalidRigging(_)
        | Error::InvalidBoundary(_)
        | Error::InvalidSchiffer(_)
        | Error::EscapesChart { .. }
        | Error::Io(_) => 2,
        _ => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_json() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
        let scene: Scene = serde_json::from_str(&serde_json::to_string(&Scene::default()).unwrap()).unwrap();
        assert_eq!(scene, Scene::default());
    }

    #[test]
    fn config_validation() {
        let bad = |f: fn(&mut ExperimentConfig)| {
            let mut c = ExperimentConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.resolution = 300));
        assert!(bad(|c| c.tol = 1e-12));
        assert!(bad(|c| c.tol = 1e-2));
        assert!(bad(|c| c.h = vec![]));
        assert!(bad(|c| c.jobs = Some(0)));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"resolutoin": 256}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment": "sweep"}"#).is_err());
    }

    #[test]
    fn scene_json_schema() {
        let s: Scene = serde_json::from_str(
            r#"{"punctures": [[0,0],[1,0],"inf",[2,1]], "cap_fraction": 0.5,
                "boundaries": [{"cap": 3, "gamma": {"kind": "sin", "amplitude": 0.1, "frequency": 1, "phase": 0.0}}],
                "cells": [{"center": [4, 0], "radius": 0.5}]}"#,
        )
        .unwrap();
        assert_eq!(s.boundaries[0].gamma, CircleHomeo::sin(0.1, 1));
        assert_eq!(s.cells[0].epsilon_max, DEFAULT_EPSILON_MAX);
        s.bordered().unwrap();
        let mut out = s.clone();
        out.boundaries[0].cap = 7;
        assert!(out.bordered().is_err());
    }

    #[test]
    fn epsilon_grid_is_square() {
        let g = epsilon_grid(0.1, 5);
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], C64::new(-0.1, -0.1));
        assert_eq!(g[12], ZERO);
        assert_eq!(g[24], C64::new(0.1, 0.1));
    }

    #[test]
    fn csv_has_header_even_when_empty() {
        let empty: Vec<BoundsRow> = Vec::new();
        assert_eq!(String::from_utf8(to_csv(&empty).unwrap()).unwrap(), "idx,family,derivative,norm,pointwise,tail\n");
    }

    #[test]
    fn assertion_relations() {
        assert!(Assertion::new("a", 1.0, Relation::AtMost, 1.0).passed);
        assert!(!Assertion::new("a", 1.0, Relation::Below, 1.0).passed);
        assert!(!Assertion::new("a", f64::NAN, Relation::Below, 1.0).passed);
        assert!(Assertion::new("a", 2.0, Relation::Above, 1.0).passed);
    }

    #[test]
    fn error_exit_codes() {
        assert_eq!(exit_code(&Error::Parse("x".into())), 2);
        assert_eq!(exit_code(&Error::NoConvergence { iterations: 1, last_update: 1.0 }), 3);
        assert_eq!(exit_code(&Error::Sewing("x".into())), 3);
    }

    #[test]
    fn point_evaluation_line_is_holomorphic() {
        let r = holomorphy_residual(point_evaluation_map, ZERO, 1e-3).unwrap();
        assert!(r < 1e-6, "{r}");
        let coarse = holomorphy_residual(point_evaluation_map, ZERO, 1e-2).unwrap();
        assert!(r < coarse || r < 1e-12);
    }
}
