use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("convergent index {0} overflows 64-bit integers")]
    ConvergentOverflow(usize),

    #[error("grid of {points} points is too coarse (need a power of two >= {required})")]
    UnderResolvedGrid { points: usize, required: usize },

    #[error("grid mismatch: expected {expected} samples, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("cutoff wavenumber {cutoff} cannot resolve energies up to {target} (minimum {minimum:.3})")]
    CutoffTooLow { cutoff: f64, target: f64, minimum: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("localized modes do not form an energy prefix: mode {extended} is extended but mode {localized} is localized")]
    NonPrefixLocalization { extended: usize, localized: usize },

    #[error("mode index {index} out of range 1..={count}")]
    ModeIndex { index: usize, count: usize },

    #[error("pair coupling chi_jk = {0:e} is too small for a dimer reduction")]
    WeakPairCoupling(f64),

    #[error("modes are not orthonormal: overlap {0:e}")]
    NotOrthonormal(f64),

    #[error("state reached the singular boundary |z| = 1 at tau = {tau}")]
    Singular { tau: f64 },

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("mode subset of size {0} is too large for the four-index lattice (max {1})")]
    SubsetTooLarge(usize, usize),

    #[error("signal is not oscillatory: {0} maxima found, at least 3 needed")]
    NonOscillatory(usize),

    #[error("maxima are irregular: spacing {mean:.3} +- {std:.3}")]
    IrregularPeriod { mean: f64, std: f64 },

    #[error("evolution turned non-finite at t = {t}; {} observations kept", partial.observations.len())]
    Truncated {
        t: f64,
        partial: Box<crate::gpe::TrajectoryRecord>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
