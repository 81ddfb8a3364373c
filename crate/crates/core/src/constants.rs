//! Physical constants (CODATA 2018) and frequency-unit helpers.

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054571817e-34;

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// 2*pi, for Hz <-> rad/s conversions.
pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Ordinary frequency (Hz) to angular frequency (rad/s).
#[inline]
pub fn hz_to_angular(f: f64) -> f64 {
    TWO_PI * f
}

/// Angular frequency (rad/s) to ordinary frequency (Hz).
#[inline]
pub fn angular_to_hz(omega: f64) -> f64 {
    omega / TWO_PI
}
