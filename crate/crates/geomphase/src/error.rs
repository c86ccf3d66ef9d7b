use thiserror::Error;

/// Errors surfaced by state construction, phase evaluation and the
/// operator cross-check path.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// The nonlinearity denominator `(n+1) L_n^0(eta^2)` fell below the
    /// singular threshold; `f(n)` has a pole there and every series that
    /// divides by `f(n)!` would be corrupted.
    #[error("nonlinearity is singular at n = {n} (|denominator| = {denominator:.3e})")]
    SingularNonlinearity { n: usize, denominator: f64 },

    /// `f(n) = 0` exactly, which leaves `1/f(n)` (and the dual ladder
    /// operators) undefined.
    #[error("nonlinearity vanishes at n = {n}; dual ladder operators need 1/f(n)")]
    ZeroNonlinearity { n: usize },

    /// A tabulated nonlinearity was asked for a level outside its table.
    #[error("tabulated nonlinearity has no entry for n = {n} (table length {len})")]
    IndexOutOfRange { n: usize, len: usize },

    /// The relative tail test was still failing when the series hit the
    /// hard truncation cap.
    #[error("series tail test unmet at the truncation cap n_max = {cap}")]
    TruncationCapReached { cap: usize },

    /// The squeezed-family norm series failed to converge below the cap.
    /// Expected as tanh(r) -> 1 for slowly decaying nonlinearities.
    #[error("squeezed norm series did not converge below n_max = {cap}")]
    DivergentSeries { cap: usize },

    /// Initial and evolved states are (numerically) orthogonal, so the
    /// total phase has no meaning there.
    #[error("overlap magnitude {overlap:.3e} at t = {t} is below the floor; phase undefined")]
    UndefinedPhase { t: f64, overlap: f64 },

    /// Continuity unwrapping of the total phase did not stabilise under
    /// grid refinement.
    #[error("phase unwrapping did not stabilise under refinement (last change {last_change:.3e})")]
    UnstableUnwrap { last_change: f64 },

    /// The matrix exponential failed its inverse-consistency residual
    /// check at the maximum squaring depth.
    #[error("matrix exponential residual {residual:.3e} exceeds tolerance")]
    NonConvergent { residual: f64 },

    /// Quadrature of the connection moved by more than the tolerance when
    /// the step was halved.
    #[error("quadrature unstable: {detail} (change {change:.3e})")]
    QuadratureUnstable { detail: String, change: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
