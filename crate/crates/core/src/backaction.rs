//! Closed-form dynamical backaction: optical-spring frequency shift and
//! optomechanical damping versus detuning.
//!
//! Both shifts are leading-order expressions; the susceptibility is not
//! re-evaluated self-consistently at the shifted frequency.

use crate::model::{intracavity_photon_number, Drive, MechanicalMode, OpticalCavity};

/// Effective mechanical parameters at one detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackactionPoint {
    pub delta: f64,
    pub omega_eff: f64,
    pub gamma_eff: f64,
}

impl BackactionPoint {
    /// Anti-damping has driven the net linewidth to zero or below.
    pub fn is_unstable(&self) -> bool {
        self.gamma_eff <= 0.0
    }
}

/// Spring shift from raw scalars with the g0^2 n_cav prefactor supplied;
/// shared with the fitting module so the fit model can evaluate candidate
/// parameters without constructing records.
pub(crate) fn spring_shift_core(
    kappa: f64,
    g0_sq_n_cav: f64,
    omega_m: f64,
    delta: f64,
) -> f64 {
    let quarter = kappa * kappa / 4.0;
    let red = delta - omega_m;
    let blue = delta + omega_m;
    g0_sq_n_cav * (red / (quarter + red * red) + blue / (quarter + blue * blue))
}

/// Damping shift from raw scalars with the g0^2 n_cav prefactor supplied.
pub(crate) fn damping_shift_core(
    kappa: f64,
    g0_sq_n_cav: f64,
    omega_m: f64,
    delta: f64,
) -> f64 {
    let quarter = kappa * kappa / 4.0;
    let red = delta - omega_m;
    let blue = delta + omega_m;
    g0_sq_n_cav * (kappa / (quarter + blue * blue) - kappa / (quarter + red * red))
}

/// Optical-spring frequency shift
/// delta_Omega_m = g0^2 n_cav [ (D-Om)/(k^2/4+(D-Om)^2) + (D+Om)/(k^2/4+(D+Om)^2) ],
/// with n_cav the intracavity photon number at the same detuning.
pub fn delta_omega_m(
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    delta: f64,
) -> f64 {
    let n_cav = intracavity_photon_number(cavity, drive, delta);
    spring_shift_core(cavity.kappa(), mech.g0() * mech.g0() * n_cav, mech.omega_m(), delta)
}

/// Optomechanical damping shift
/// delta_Gamma_m = g0^2 n_cav [ k/(k^2/4+(D+Om)^2) - k/(k^2/4+(D-Om)^2) ],
/// positive on the red-detuned side (Delta < 0).
pub fn delta_gamma_m(
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    delta: f64,
) -> f64 {
    let n_cav = intracavity_photon_number(cavity, drive, delta);
    damping_shift_core(cavity.kappa(), mech.g0() * mech.g0() * n_cav, mech.omega_m(), delta)
}

/// Effective mechanical frequency and linewidth at one detuning.
pub fn effective_mech_params(
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    delta: f64,
) -> BackactionPoint {
    let point = BackactionPoint {
        delta,
        omega_eff: mech.omega_m() + delta_omega_m(cavity, drive, mech, delta),
        gamma_eff: mech.gamma_m() + delta_gamma_m(cavity, drive, mech, delta),
    };
    if point.is_unstable() {
        log::warn!(
            "parametric instability regime: Gamma_eff = {:.6e} rad/s at Delta = {:.6e} rad/s",
            point.gamma_eff,
            point.delta
        );
    }
    point
}
