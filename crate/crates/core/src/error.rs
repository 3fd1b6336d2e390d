//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by construction and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Series failed a shape or finiteness invariant.
    #[error("invalid series: {0}")]
    InvalidSeries(String),

    /// Requested block plan cannot hold at least two observations per block.
    #[error("invalid block plan: T={t} is too short for B={b} blocks (need T >= 2B)")]
    InvalidPlan { t: usize, b: usize },

    /// Block length too short to carry any testable Fourier frequency.
    #[error("frequency grid too small: block length {block_len} < 6")]
    GridTooSmall { block_len: usize },

    /// Taper count must stay below the block length.
    #[error("too many tapers: K={tapers} must be < block length {block_len}")]
    TooManyTapers { tapers: usize, block_len: usize },

    /// An index fell outside the valid block/taper/frequency range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// Demeaning over a single block is identically zero and must not be tested.
    #[error("degenerate demean: B=1 leaves nothing to contrast")]
    DegenerateDemean,

    /// Scan window is empty or extends off the frequency grid.
    #[error("invalid scan window: {0}")]
    InvalidWindow(String),

    /// Test grid indices must be a subset of the observed functional grid.
    #[error("invalid test grid: {0}")]
    InvalidTestGrid(String),

    /// Covariance factorization failed even after the jitter escalation.
    #[error("factorization failed: matrix still indefinite after jitter {max_jitter:e}")]
    Factorization { max_jitter: f64 },

    /// Frequency band contains no Fourier frequency.
    #[error("empty band: ({lo}, {hi}) covers no Fourier frequency")]
    EmptyBand { lo: f64, hi: f64 },

    /// A numeric argument violated its domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
