use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field support reaches the grid boundary (support radius {support} >= half width {half_width})")]
    SupportTouchesBoundary { support: f64, half_width: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("Beltrami coefficient sup-norm {0} exceeds the admissible bound")]
    DilatationTooLarge(f64),
    #[error("Neumann iteration did not converge after {iterations} steps (last update {last_update:e})")]
    NoConvergence { iterations: usize, last_update: f64 },
    #[error("map is not orientation preserving at node ({j}, {k}): jacobian {jacobian:e}")]
    NotOrientationPreserving { j: usize, k: usize, jacobian: f64 },
    #[error("degenerate denominator {0:e} in dilatation composition")]
    DegenerateComposition(f64),
    #[error("derivative vanishes at {0}")]
    VanishingDerivative(num_complex::Complex64),
    #[error("series truncation {0} is too short")]
    TruncationTooShort(usize),
    #[error("series blow-up: coefficient {index} has magnitude {magnitude:e}")]
    SeriesBlowUp { index: usize, magnitude: f64 },
    #[error("hyperbolic norm diverges (value {0:e} at the finest radius)")]
    NormDiverges(f64),
    #[error("point {0} lies outside the unit disk")]
    OutsideDisk(num_complex::Complex64),
    #[error("univalence witness failed: {0}")]
    NotUnivalent(String),
    #[error("function is not disk valued: max |psi| = {0} on the witness circle")]
    NotDiskValued(f64),
    #[error("Schwarz bound violated: {0}")]
    BoundViolated(String),
    #[error("invalid punctured sphere: {0}")]
    InvalidSphere(String),
    #[error("invalid rigging: {0}")]
    InvalidRigging(String),
    #[error("cap {cap} escapes its chart domain (extent {extent} >= radius {radius})")]
    EscapesChart { cap: usize, extent: f64, radius: f64 },
    #[error("invalid boundary parametrization: {0}")]
    InvalidBoundary(String),
    #[error("extension too wild: dilatation sup-norm {0}")]
    ExtensionTooWild(f64),
    #[error("sewing failed: {0}")]
    Sewing(String),
    #[error("invalid Schiffer data: {0}")]
    InvalidSchiffer(String),
    #[error("bordered point is not in the requested fiber (puncture mismatch {0:e})")]
    NotInFiber(f64),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
