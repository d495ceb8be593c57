use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("wavefunctions live on different grids")]
    GridMismatch,
    #[error("index {index} has no neighbours on a grid of {n} points")]
    BoundaryIndex { index: usize, n: usize },
    #[error("maximum sits at the edge of the series (index {index} of {len}); recording window too short")]
    PeakAtBoundary { index: usize, len: usize },
    #[error("series too short for peak refinement ({0} samples)")]
    SeriesTooShort(usize),
    #[error("no barrier: the field strength must be positive (E0 = {0})")]
    NoBarrier(f64),
    #[error("over the barrier: E0 = {e0} reaches the threshold {threshold}")]
    OverBarrier { e0: f64, threshold: f64 },
    #[error("eigensolver did not converge after {0} iterations")]
    NotConverged(usize),
    #[error("energy variance {0:e} is at the numerical floor; Mandelstam-Tamm time is infinite")]
    InfiniteMandelstamTamm(f64),
    #[error("density {0:e} vanishes at the current peak")]
    VanishingDensity(f64),
    #[error("no interior maximum at positive momentum")]
    NoPositiveMomentumPeak,
    #[error("free norm {0:e} is negligible")]
    NegligibleFreeNorm(f64),
    #[error("classical trajectory recaptured at t = {t}, x = {x}")]
    Recaptured { t: f64, x: f64 },
    #[error("tau_2 outside window: no sign change of the momentum mismatch in [{lo}, {hi}]")]
    Tau2OutsideWindow { lo: f64, hi: f64 },
    #[error("closed-form Wigner time invalid: negative radicand {0}")]
    NegativeRadicand(f64),
    #[error("wavefunction became non-finite at t = {0}")]
    NonFinite(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
