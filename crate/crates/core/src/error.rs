use thiserror::Error;

/// Errors raised by the numerical pipeline.
///
/// Variants are grouped by how a caller should react: `Precondition` means the
/// request itself is invalid, `Numerical` variants mean a computation broke
/// down for the given inputs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: fields live on different grids")]
    GridMismatch,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("unresolved: {0}")]
    Unresolved(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("spectral failure: {0}")]
    SpectralFailure(String),

    #[error("spectral classification failed: {0}")]
    Classification(String),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("not near the ground-state manifold: {0}")]
    NotNearManifold(String),

    #[error("degenerate modulation system: {0}")]
    Degenerate(String),

    #[error("modulation breakdown: {0}")]
    ModulationBreakdown(String),

    #[error("frequency window too large: |omega - omega0| = {distance} > {limit}")]
    WindowTooLarge { distance: f64, limit: f64 },

    #[error("numerical blow-up: {0}")]
    NumericalBlowUp(String),

    #[error("bad bracket: {0}")]
    BadBracket(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("iteration not contracting: {0}")]
    NotContracting(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("format: {0}")]
    Format(String),
}

impl Error {
    /// True for errors caused by the request rather than by the numerics.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_)
                | Error::GridMismatch
                | Error::LengthMismatch { .. }
                | Error::InvalidParameter(_)
                | Error::Precondition(_)
                | Error::Unresolved(_)
                | Error::WindowTooLarge { .. }
                | Error::BadBracket(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
