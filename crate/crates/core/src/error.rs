//! Error type shared across the toolkit.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A constructor or operation received a value outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Calibration beat magnitude below the detectability threshold.
    #[error("calibration tone too small: |beat| = {magnitude:.6e} < {threshold:.6e} s^-1")]
    CalibrationTooSmall { magnitude: f64, threshold: f64 },

    /// eta_c = 1 makes the Fano q parameter divide by zero.
    #[error("overcoupled-limit undefined q: eta_c = 1 (kappa_0 = 0)")]
    OvercoupledQ,

    /// A requested frequency lies outside the trace span.
    #[error("frequency {freq_hz:.6e} Hz outside trace span [{lo_hz:.6e}, {hi_hz:.6e}] Hz")]
    OutOfSpan { freq_hz: f64, lo_hz: f64, hi_hz: f64 },

    /// The trace grid cannot resolve the mechanical linewidth.
    #[error("under-resolved: {bins:.2} bins across the mechanical FWHM, need >= {min_bins}")]
    UnderResolved { bins: f64, min_bins: usize },

    /// Spectral peak readout failed.
    #[error("peak not detected: {0}")]
    PeakNotDetected(String),

    /// A sweep was requested over an empty detuning grid.
    #[error("empty detuning grid")]
    EmptyGrid,

    /// Levenberg-Marquardt could not find a descent direction.
    #[error("no descent direction: singular normal equations at maximum damping")]
    NoDescentDirection,

    /// The fit model returned a non-finite value.
    #[error("model evaluation failed: non-finite output at x = {0:.6e}")]
    ModelEvaluationFailed(f64),

    /// Fewer data points than fit parameters.
    #[error("underdetermined fit: {points} points for {params} parameters")]
    Underdetermined { points: usize, params: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
