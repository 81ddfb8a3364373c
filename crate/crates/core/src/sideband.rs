//! Steady-state intracavity field components at the carrier, calibration,
//! and mechanical frequencies.
//!
//! The mechanical motion is treated as a prescribed coherent tone at
//! Omega_m with complex amplitude x_m; the solver does not close the
//! mechanical Langevin loop. Validity requires the calibration tone to stay
//! clear of the mechanical line, |Omega_m - Omega_c| >> Gamma_m.

use num_complex::Complex64;

use crate::model::{Drive, Interferometer, MechanicalMode, OpticalCavity, PathIndex};

/// Complex steady-state amplitudes: carrier `a0`, calibration sidebands at
/// -+Omega_c, and mechanical sidebands at -+Omega_m ("minus" rotates with
/// e^{-i omega t}).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateAmplitudes {
    pub a0: Complex64,
    pub a_minus_c: Complex64,
    pub a_plus_c: Complex64,
    pub a_minus_m: Complex64,
    pub a_plus_m: Complex64,
}

fn warn_if_tones_overlap(drive: &Drive, mech: &MechanicalMode) {
    let gap = (mech.omega_m() - drive.omega_c()).abs();
    if gap < 10.0 * mech.gamma_m() {
        log::warn!(
            "calibration tone within 10 mechanical linewidths of the mechanical mode \
             (|Omega_m - Omega_c| = {:.3e} rad/s, Gamma_m = {:.3e} rad/s); \
             the single-tone expansion is unreliable here",
            gap,
            mech.gamma_m()
        );
    }
}

/// Steady-state amplitudes of the bare cavity (no beam splitter, no
/// propagation phases):
///
/// - a0        = sqrt(kappa_ex) s0 chi(0)
/// - a-(Oc)    = sqrt(kappa_ex) s_c chi(Omega_c)
/// - a+(Oc)    = -sqrt(kappa_ex) s_c chi(-Omega_c)
/// - a-(Om)    = i sqrt(kappa_ex) g0 x_m  s0 chi(0) chi(Omega_m)
/// - a+(Om)    = i sqrt(kappa_ex) g0 x_m* s0 chi(0) chi(-Omega_m)
pub fn steady_state(
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    delta: f64,
) -> SteadyStateAmplitudes {
    warn_if_tones_overlap(drive, mech);
    let sqrt_kex = cavity.kappa_ex().sqrt();
    let chi0 = cavity.susceptibility(delta, 0.0);
    let s0 = drive.s0();
    let s_c = drive.s_c();

    let mech_common = Complex64::i() * sqrt_kex * mech.g0() * s0 * chi0;
    SteadyStateAmplitudes {
        a0: sqrt_kex * s0 * chi0,
        a_minus_c: sqrt_kex * s_c * cavity.susceptibility(delta, drive.omega_c()),
        a_plus_c: -sqrt_kex * s_c * cavity.susceptibility(delta, -drive.omega_c()),
        a_minus_m: mech_common * mech.x_m() * cavity.susceptibility(delta, mech.omega_m()),
        a_plus_m: mech_common * mech.x_m().conj() * cavity.susceptibility(delta, -mech.omega_m()),
    }
}

/// Steady-state amplitudes including beam-splitter transmission and the
/// path-2 propagation phases: every component of [`steady_state`] is
/// multiplied by t e^{i k L2}, and the calibration sidebands carry the
/// additional one-way modulation phases e^{+-i phi_2(Omega_c)}.
pub fn steady_state_shifted(
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    interf: &Interferometer,
    delta: f64,
) -> SteadyStateAmplitudes {
    let bare = steady_state(cavity, drive, mech, delta);
    let k_l2 = interf.carrier_wavenumber(drive.omega_l()) * interf.l2();
    let common = interf.t() * Complex64::new(0.0, k_l2).exp();
    let phi2_c = interf.path_phase(PathIndex::Omc, drive.omega_c());
    let rot_c = Complex64::new(0.0, phi2_c).exp();

    SteadyStateAmplitudes {
        a0: common * bare.a0,
        a_minus_c: common * bare.a_minus_c * rot_c,
        a_plus_c: common * bare.a_plus_c * rot_c.conj(),
        a_minus_m: common * bare.a_minus_m,
        a_plus_m: common * bare.a_plus_m,
    }
}
