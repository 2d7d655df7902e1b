use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("polynomial is identically zero")]
    ZeroPolynomial,

    #[error("transfer function is improper (numerator degree {num} > denominator degree {den})")]
    Improper { num: usize, den: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("closed loop is structurally singular (1 + H C_tau + R C_qdot vanishes)")]
    SingularLoop,

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no bandwidth crossing found below {limit} rad/s")]
    NoBandwidthCrossing { limit: f64 },

    #[error("DC gain {dc_db:.3} dB is not within 0.1 dB of unity")]
    NonUnityDcGain { dc_db: f64 },

    #[error("no positive passivity bound found")]
    NoPositiveBound,

    #[error("inner loop already non-passive (min Re Z = {min_real:e} at {omega:.4} rad/s)")]
    InnerNonPassive { min_real: f64, omega: f64 },

    #[error("inner loop is unstable")]
    UnstableInner,

    #[error("impedance relative degree {0} outside [-1, 1]")]
    RelativeDegree(i64),

    #[error("FFT bin mismatch: nearest bin at {bin_hz:.6} Hz for excitation at {f0:.6} Hz")]
    BinMismatch { f0: f64, bin_hz: f64 },

    #[error("no excitation energy at {f0} Hz")]
    NoExcitation { f0: f64 },

    #[error("simulation diverged at t = {time:.4} s: {detail}")]
    Divergence { time: f64, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
