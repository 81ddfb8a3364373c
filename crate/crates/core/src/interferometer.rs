//! Two-path beam-splitter model: total output-field coefficients, beat
//! notes at the calibration and mechanical frequencies, the
//! mechanics/calibration power ratio eta_g, reflection lineshapes, the
//! Fano-parameter identification, and the measured-g0 bias sweep.
//!
//! All output coefficients are quoted in the rotating frame with the common
//! factor e^{i(omega_L t - 2 k L2)} removed; it cancels in every measurable
//! combination used here.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Drive, Interferometer, MechanicalMode, OpticalCavity, PathIndex};

/// Total output-field coefficients after the beam splitter.
///
/// The detected field is
/// A e^{0} + B_c e^{-i Omega_c t} + C_c e^{+i Omega_c t}
///         + B_m e^{-i Omega_m t} + C_m e^{+i Omega_m t},
/// times the removed common carrier phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputCoefficients {
    pub a_carrier: Complex64,
    pub b_cal: Complex64,
    pub c_cal: Complex64,
    pub b_mech: Complex64,
    pub c_mech: Complex64,
}

/// Which beat note of the detected intensity to form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeatComponent {
    Calibration,
    Mechanical,
}

/// Relative scale used by the default calibration-beat detectability
/// threshold eps_cal = CAL_BEAT_THRESHOLD_REL * |s0|^2 * t^2.
pub const CAL_BEAT_THRESHOLD_REL: f64 = 1e-9;

/// Default detectability threshold for the calibration beat (units s^-1).
pub fn default_cal_threshold(drive: &Drive, interf: &Interferometer) -> f64 {
    let t = interf.t();
    CAL_BEAT_THRESHOLD_REL * drive.s0().powi(2) * t * t
}

/// Output coefficients of the combined mirror + cavity paths.
///
/// With psi = theta + 2 k Delta L and D(w) = 1 - kappa_ex chi(w):
///
/// - A   = [ r^2 r_m e^{i psi} + t^2 D(0) ] s0
/// - B_c = [ r^2 r_m e^{i(psi + 2 phi_1(Oc))} + t^2 D(+Oc) e^{+2i phi_2(Oc)} ] s_c
/// - C_c = -[ r^2 r_m e^{i(psi - 2 phi_1(Oc))} + t^2 D(-Oc) e^{-2i phi_2(Oc)} ] s_c
/// - B_m = -i t^2 kappa_ex g0 chi(0) s0 x_m  chi(+Om) e^{+i phi_2(Om)}
/// - C_m = -i t^2 kappa_ex g0 chi(0) s0 x_m* chi(-Om) e^{-i phi_2(Om)}
///
/// The mechanical components carry the carrier amplitude s0 (they are
/// transduced from the carrier, not from the modulation sidebands).
pub fn output_coefficients(
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    interf: &Interferometer,
    delta: f64,
) -> OutputCoefficients {
    let r2rm = interf.r() * interf.r() * interf.r_m();
    let t2 = 1.0 - interf.r() * interf.r();
    let kex = cavity.kappa_ex();
    let psi = interf.combined_phase(drive.omega_l());
    let omega_c = drive.omega_c();
    let omega_m = mech.omega_m();

    let phi1_c = interf.path_phase(PathIndex::Mirror, omega_c);
    let phi2_c = interf.path_phase(PathIndex::Omc, omega_c);
    let phi2_m = interf.path_phase(PathIndex::Omc, omega_m);

    let d0 = 1.0 - kex * cavity.susceptibility(delta, 0.0);
    let d_plus = 1.0 - kex * cavity.susceptibility(delta, omega_c);
    let d_minus = 1.0 - kex * cavity.susceptibility(delta, -omega_c);

    let phase = |arg: f64| Complex64::new(0.0, arg).exp();

    let a_carrier = (r2rm * phase(psi) + t2 * d0) * drive.s0();
    let b_cal = (r2rm * phase(psi + 2.0 * phi1_c) + t2 * d_plus * phase(2.0 * phi2_c)) * drive.s_c();
    let c_cal =
        -(r2rm * phase(psi - 2.0 * phi1_c) + t2 * d_minus * phase(-2.0 * phi2_c)) * drive.s_c();

    let mech_common = -Complex64::i()
        * t2
        * kex
        * mech.g0()
        * cavity.susceptibility(delta, 0.0)
        * drive.s0();
    let b_mech =
        mech_common * mech.x_m() * cavity.susceptibility(delta, omega_m) * phase(phi2_m);
    let c_mech =
        mech_common * mech.x_m().conj() * cavity.susceptibility(delta, -omega_m) * phase(-phi2_m);

    OutputCoefficients { a_carrier, b_cal, c_cal, b_mech, c_mech }
}

/// Complex beat amplitude A* B + A C* of the selected intensity-modulation
/// component; the physical modulation is this value times e^{-i Omega t}
/// plus its conjugate.
pub fn beat_amplitude(coeffs: &OutputCoefficients, which: BeatComponent) -> Complex64 {
    let a = coeffs.a_carrier;
    match which {
        BeatComponent::Calibration => a.conj() * coeffs.b_cal + a * coeffs.c_cal.conj(),
        BeatComponent::Mechanical => a.conj() * coeffs.b_mech + a * coeffs.c_mech.conj(),
    }
}

/// Mechanics/calibration detected power ratio
/// eta_g = |A* B_m + A C_m*|^2 / |A* B_c + A C_c*|^2, using the default
/// calibration-beat threshold.
pub fn eta_g(
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    interf: &Interferometer,
    delta: f64,
) -> Result<f64> {
    eta_g_with_threshold(cavity, drive, mech, interf, delta, default_cal_threshold(drive, interf))
}

/// [`eta_g`] with an explicit calibration-beat detectability threshold.
pub fn eta_g_with_threshold(
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    interf: &Interferometer,
    delta: f64,
    eps_cal: f64,
) -> Result<f64> {
    let coeffs = output_coefficients(cavity, drive, mech, interf, delta);
    let cal = beat_amplitude(&coeffs, BeatComponent::Calibration).norm();
    if cal < eps_cal {
        return Err(Error::CalibrationTooSmall { magnitude: cal, threshold: eps_cal });
    }
    let mech_beat = beat_amplitude(&coeffs, BeatComponent::Mechanical).norm();
    Ok((mech_beat / cal).powi(2))
}

/// Exact reflected photon flux
/// |A|^2 = |s0|^2 |r^2 r_m e^{i psi} + t^2 (1 - kappa_ex chi(0))|^2.
pub fn reflection_exact(
    cavity: &OpticalCavity,
    drive: &Drive,
    interf: &Interferometer,
    delta: f64,
) -> f64 {
    let r2rm = interf.r() * interf.r() * interf.r_m();
    let t2 = 1.0 - interf.r() * interf.r();
    let psi = interf.combined_phase(drive.omega_l());
    let d0 = 1.0 - cavity.kappa_ex() * cavity.susceptibility(delta, 0.0);
    let amp = r2rm * Complex64::new(0.0, psi).exp() + t2 * d0;
    drive.s0().powi(2) * amp.norm_sqr()
}

/// Expanded reflection lineshape: constant term plus the
/// Lorentzian-and-dispersive term weighted by kappa (eta_c - eta_c^2).
///
/// Differs from [`reflection_exact`] by the detuning-independent constant
/// |s0|^2 t^4 sin^2(psi), which a lineshape fit absorbs into its offset.
pub fn reflection_expanded(
    cavity: &OpticalCavity,
    drive: &Drive,
    interf: &Interferometer,
    delta: f64,
) -> f64 {
    let r2rm = interf.r() * interf.r() * interf.r_m();
    let t2 = 1.0 - interf.r() * interf.r();
    let psi = interf.combined_phase(drive.omega_l());
    let kappa = cavity.kappa();
    let eta_c = cavity.eta_c();
    let qp = if eta_c < 1.0 { r2rm / (t2 * (1.0 - eta_c)) } else { f64::INFINITY };
    let half_kappa = kappa / 2.0;
    let lorentz_den = half_kappa * half_kappa + delta * delta;

    let constant = (r2rm.abs() + t2 * psi.cos()).powi(2);
    // For r = 0 the q' terms vanish; keep that exact even when eta_c = 1.
    let numerator = if r2rm == 0.0 {
        half_kappa
    } else {
        half_kappa * (1.0 + qp * psi.cos()) + delta * qp * psi.sin()
    };
    let dip = 2.0 * t2 * t2 * kappa * (eta_c - eta_c * eta_c) * numerator / lorentz_den;
    drive.s0().powi(2) * (constant - dip)
}

/// Fano-lineshape parameters identified from the expanded reflection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanoParameters {
    /// Offset h = |s0|^2 (|r^2 r_m| + t^2 cos psi)^2.
    pub h: f64,
    /// Amplitude A = 2 |s0|^2 t^4 kappa (eta_c - eta_c^2).
    pub a_amp: f64,
    /// Fano asymmetry q = r^2 r_m / (t^2 (1 - eta_c)) * sin psi.
    pub q: f64,
    /// Combined phase psi = theta + 2 k Delta L used in the identification.
    pub psi: f64,
    /// Positive root of the consistency constraint cos psi = -sin^2 psi,
    /// i.e. psi_root = arccos((1 - sqrt(5))/2); the full solution set is
    /// +-psi_root modulo 2 pi.
    pub psi_root: f64,
}

/// Root of cos psi = -sin^2 psi with |cos psi| <= 1: cos psi = (1 - sqrt5)/2.
pub fn fano_constraint_cos() -> f64 {
    (1.0 - 5.0f64.sqrt()) / 2.0
}

/// Identification of the offset, amplitude, and Fano parameter from the
/// interferometer configuration.
///
/// The mapping is exact only at the constraint root and for
/// r^2 r_m = t^2 (1 - eta_c); elsewhere it is the leading approximation.
/// Note the sign convention: a direct least-squares fit of the exact
/// lineshape returns a q of opposite sign to the identified value (the
/// dispersive term enters the lineshape with weight -q' sin psi).
pub fn fano_identification(
    cavity: &OpticalCavity,
    drive: &Drive,
    interf: &Interferometer,
) -> Result<FanoParameters> {
    let eta_c = cavity.eta_c();
    if eta_c >= 1.0 {
        return Err(Error::OvercoupledQ);
    }
    let r2rm = interf.r() * interf.r() * interf.r_m();
    let t2 = 1.0 - interf.r() * interf.r();
    let psi = interf.combined_phase(drive.omega_l());
    let s0_sq = drive.s0().powi(2);

    Ok(FanoParameters {
        h: s0_sq * (r2rm.abs() + t2 * psi.cos()).powi(2),
        a_amp: 2.0 * s0_sq * t2 * t2 * cavity.kappa() * (eta_c - eta_c * eta_c),
        q: r2rm / (t2 * (1.0 - eta_c)) * psi.sin(),
        psi,
        psi_root: fano_constraint_cos().acos(),
    })
}

/// One accepted point of a measured-g0 bias sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasPoint {
    pub delta: f64,
    pub g0_measured: f64,
}

/// One grid point dropped from a sweep, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedPoint {
    pub delta: f64,
    pub reason: String,
}

/// Result of [`g0_bias_sweep`]: accepted points in grid order plus the
/// skipped points with reasons.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasSweep {
    pub points: Vec<BiasPoint>,
    pub skipped: Vec<SkippedPoint>,
}

/// Measured g0 over a detuning grid, normalized per point to the r = 0
/// reference: g0_measured(Delta) = g0_true sqrt(eta_g(Delta) / eta_g_ref(Delta)).
///
/// Grid points where either the biased or the reference calibration beat
/// falls below the detectability threshold are omitted and recorded.
pub fn g0_bias_sweep(
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    interf: &Interferometer,
    delta_grid: &[f64],
    g0_true: f64,
) -> Result<BiasSweep> {
    if delta_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let reference =
        Interferometer::new(0.0, interf.r_m(), interf.theta(), interf.l1(), interf.l2(), interf.n())
            .expect("r = 0 keeps the remaining parameters valid");

    let mut points = Vec::with_capacity(delta_grid.len());
    let mut skipped = Vec::new();
    for &delta in delta_grid {
        let biased = eta_g(cavity, drive, mech, interf, delta);
        let baseline = eta_g(cavity, drive, mech, &reference, delta);
        match (biased, baseline) {
            (Ok(e), Ok(e0)) => {
                points.push(BiasPoint { delta, g0_measured: g0_true * (e / e0).sqrt() })
            }
            (Err(err), _) => skipped.push(SkippedPoint { delta, reason: err.to_string() }),
            (_, Err(err)) => {
                skipped.push(SkippedPoint { delta, reason: format!("r=0 reference: {err}") })
            }
        }
    }
    Ok(BiasSweep { points, skipped })
}
