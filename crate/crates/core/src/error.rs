use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("Hilbert space dimension {dim} exceeds the cap of {cap}")]
    DimensionOverflow { dim: usize, cap: usize },
    #[error("{value} MHz is outside the coupler band [{lo}, {hi}] MHz")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("waveform sample {index} ({value} MHz) is outside the coupler band")]
    SampleOutOfRange { index: usize, value: f64 },
    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    EigenConvergence { sweeps: usize },
    #[error("state tracking ambiguous near {at} MHz (best overlap² {overlap:.3})")]
    TrackingAmbiguous { at: f64, overlap: f64 },
    #[error("tracked energy jumped by {jump} MHz near {at} MHz")]
    EnergyJump { at: f64, jump: f64 },
    #[error("zeta does not change sign on [{lo}, {hi}] MHz ({zeta_lo} MHz, {zeta_hi} MHz)")]
    NoSignChange { lo: f64, hi: f64, zeta_lo: f64, zeta_hi: f64 },
    #[error("zeta vanishes identically on the bracket")]
    DegenerateFlat,
    #[error("no usable adiabatic factor points (all gaps singular)")]
    SingularGap,
    #[error("constraint violated: {0}")]
    ConstraintViolation(String),
    #[error("requested G = {requested} exceeds the integrated range {available}")]
    RangeExceeded { requested: f64, available: f64 },
    #[error("dt-halving check failed at dt = {dt} ns (population shift {shift:e})")]
    ConvergenceFailure { dt: f64, shift: f64 },
    #[error("target phase {target} rad unreachable (max-band pulse gives {reached} rad)")]
    Unreachable { target: f64, reached: f64 },
    #[error("only {found} peaks found, at least 3 are needed")]
    InsufficientPeaks { found: usize },
    #[error("oscillation amplitude below the noise floor")]
    FitDegenerate,
    #[error("minimizer stopped after {iterations} iterations (objective {objective})")]
    NonConvergence { iterations: usize, objective: f64 },
    #[error("Jacobian is singular: parameter '{0}' has no effect on the residuals")]
    SingularJacobian(String),
    #[error("all observed success fractions are equal; decay is unidentifiable")]
    DegenerateData,
    #[error("only {kept} of {total} Monte Carlo samples were physical")]
    InsufficientPhysicalSamples { kept: usize, total: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::DimensionOverflow { .. }
                | Error::OutOfRange { .. }
                | Error::SampleOutOfRange { .. }
                | Error::ConstraintViolation(_)
                | Error::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
