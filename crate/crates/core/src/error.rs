use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // ratlin
    #[error("polynomial has no roots (zero polynomial or degree 0)")]
    NoRoots,
    #[error("evaluation hit a pole of entry ({row}, {col}) at s = {s_re}{s_im:+}j")]
    Pole { row: usize, col: usize, s_re: f64, s_im: f64 },
    #[error("denominator is the zero polynomial")]
    ZeroDenominator,
    #[error("matrix is structurally singular (determinant numerator vanishes identically)")]
    StructurallySingular,
    #[error("matrix dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("degenerate loop: det(I + L) numerator vanishes identically")]
    DegenerateLoop,

    // network
    #[error("invalid grid model: {0}")]
    InvalidModel(String),
    #[error("Kron reduction failed: interior block is singular")]
    ReductionSingular,
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.6e} below floor {floor:.6e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64, floor: f64 },
    #[error("degenerate injection at node '{node}': apparent power is zero")]
    DegenerateInjection { node: String },
    #[error("invalid operating point: {0}")]
    InvalidOperatingPoint(String),

    // netjac
    #[error("s = {s_re}{s_im:+}j is a pole of the network dynamics (±j·omega0)")]
    NetworkPole { s_re: f64, s_im: f64 },
    #[error("node index {node} out of range for {count} converters")]
    NodeOutOfRange { node: usize, count: usize },

    // zerocalc
    #[error("s = {z} is not a zero: relative residual {residual:.3e} exceeds {tolerance:.1e}")]
    NotAZero { z: f64, residual: f64, tolerance: f64 },
    #[error("bisection did not converge in bracket [{lo}, {hi}]")]
    Bisection { lo: f64, hi: f64 },
    #[error("invalid scan range: {0}")]
    InvalidRange(String),

    // margin
    #[error("T(0) is singular; low-frequency normalization undefined")]
    SingularLowFrequency,
    #[error("frequency grid invalid: {0}")]
    InvalidGrid(String),

    // reshape
    #[error("zero eigenvalue is not isolated: |λ|min = {smallest:.3e}, next = {second:.3e}")]
    ZeroEigenvalueNotIsolated { smallest: f64, second: f64 },
    #[error("defective zero: |lᴴ ∂J/∂s r| = {denominator:.3e} below tolerance")]
    DefectiveZero { denominator: f64 },

    // fixtures / io
    #[error("unknown fixture '{0}'")]
    UnknownFixture(String),
    #[error("fixture '{name}' is malformed: {reason}")]
    MalformedFixture { name: String, reason: String },
    #[error("{0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes and C status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NoRoots
            | Error::Pole { .. }
            | Error::StructurallySingular
            | Error::DegenerateLoop
            | Error::ReductionSingular
            | Error::NotPositiveSemidefinite { .. }
            | Error::NetworkPole { .. }
            | Error::NotAZero { .. }
            | Error::Bisection { .. }
            | Error::SingularLowFrequency
            | Error::ZeroEigenvalueNotIsolated { .. }
            | Error::DefectiveZero { .. }
            | Error::Numerical(_) => ErrorClass::Numerical,
            _ => ErrorClass::Input,
        }
    }
}
