//! Physical parameter records and the elementary optical/thermal quantities.
//!
//! Conventions: every frequency is angular (rad/s), detuning is
//! Delta = omega_L - omega_o, and the static mechanical displacement is
//! absorbed into the (redefined) detuning, so only the redefined Delta
//! appears anywhere in this crate.

use num_complex::Complex64;

use crate::constants::{BOLTZMANN, HBAR, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

/// Optical cavity mode: resonance frequency and loss rates.
///
/// Invariants enforced at construction: `kappa_0 >= 0`, `kappa_ex > 0`,
/// hence `kappa > 0` and `eta_c = kappa_ex / kappa` in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalCavity {
    omega_o: f64,
    kappa_0: f64,
    kappa_ex: f64,
}

impl OpticalCavity {
    pub fn new(omega_o: f64, kappa_0: f64, kappa_ex: f64) -> Result<Self> {
        if !(omega_o.is_finite() && omega_o > 0.0) {
            return Err(Error::invalid(format!("omega_o must be > 0, got {omega_o}")));
        }
        if !(kappa_0.is_finite() && kappa_0 >= 0.0) {
            return Err(Error::invalid(format!("kappa_0 must be >= 0, got {kappa_0}")));
        }
        if !(kappa_ex.is_finite() && kappa_ex > 0.0) {
            return Err(Error::invalid(format!("kappa_ex must be > 0, got {kappa_ex}")));
        }
        Ok(Self { omega_o, kappa_0, kappa_ex })
    }

    pub fn omega_o(&self) -> f64 {
        self.omega_o
    }

    pub fn kappa_0(&self) -> f64 {
        self.kappa_0
    }

    pub fn kappa_ex(&self) -> f64 {
        self.kappa_ex
    }

    /// Total loss rate kappa = kappa_0 + kappa_ex.
    pub fn kappa(&self) -> f64 {
        self.kappa_0 + self.kappa_ex
    }

    /// Coupling efficiency eta_c = kappa_ex / kappa.
    pub fn eta_c(&self) -> f64 {
        self.kappa_ex / self.kappa()
    }

    /// Optical susceptibility chi(omega) = 1 / (kappa/2 - i (Delta + omega)).
    ///
    /// |chi| <= 2/kappa, with equality exactly at Delta + omega = 0.
    pub fn susceptibility(&self, delta: f64, omega: f64) -> Complex64 {
        1.0 / Complex64::new(self.kappa() / 2.0, -(delta + omega))
    }
}

/// Mechanical mode: frequency, intrinsic linewidth, vacuum coupling rate, and
/// the dimensionless coherent displacement amplitude `x_m`.
///
/// The displacement is x(t) = x_m e^{-i Omega_m t} + x_m* e^{+i Omega_m t},
/// so <x^2> = 2 |x_m|^2. A thermal state of occupation n_th uses
/// |x_m|^2 = (2 n_th + 1) / 2, i.e. <x^2> = 2 n_th + 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalMode {
    omega_m: f64,
    gamma_m: f64,
    g0: f64,
    x_m: Complex64,
}

impl MechanicalMode {
    pub fn new(omega_m: f64, gamma_m: f64, g0: f64, x_m: Complex64) -> Result<Self> {
        if !(omega_m.is_finite() && omega_m > 0.0) {
            return Err(Error::invalid(format!("omega_m must be > 0, got {omega_m}")));
        }
        if !(gamma_m.is_finite() && gamma_m > 0.0) {
            return Err(Error::invalid(format!("gamma_m must be > 0, got {gamma_m}")));
        }
        if !(g0.is_finite() && g0 >= 0.0) {
            return Err(Error::invalid(format!("g0 must be >= 0, got {g0}")));
        }
        if !x_m.re.is_finite() || !x_m.im.is_finite() {
            return Err(Error::invalid("x_m must be finite".to_string()));
        }
        Ok(Self { omega_m, gamma_m, g0, x_m })
    }

    /// Mode with a real thermal amplitude |x_m| = sqrt((2 n_th + 1) / 2).
    pub fn thermal(omega_m: f64, gamma_m: f64, g0: f64, n_th: f64) -> Result<Self> {
        if !(n_th.is_finite() && n_th >= 0.0) {
            return Err(Error::invalid(format!("n_th must be >= 0, got {n_th}")));
        }
        let x_m = ((2.0 * n_th + 1.0) / 2.0).sqrt();
        Self::new(omega_m, gamma_m, g0, Complex64::new(x_m, 0.0))
    }

    pub fn omega_m(&self) -> f64 {
        self.omega_m
    }

    pub fn gamma_m(&self) -> f64 {
        self.gamma_m
    }

    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn x_m(&self) -> Complex64 {
        self.x_m
    }

    /// Copy with a different displacement amplitude.
    pub fn with_x_m(mut self, x_m: Complex64) -> Self {
        self.x_m = x_m;
        self
    }

    /// Copy with a different coupling rate.
    pub fn with_g0(self, g0: f64) -> Result<Self> {
        Self::new(self.omega_m, self.gamma_m, g0, self.x_m)
    }

    /// Single-photon cooperativity C0 = 4 g0^2 / (Gamma_m kappa).
    pub fn cooperativity(&self, cavity: &OpticalCavity) -> f64 {
        4.0 * self.g0 * self.g0 / (self.gamma_m * cavity.kappa())
    }
}

/// Index of an interferometer arm: path 1 ends at the parasitic mirror,
/// path 2 at the optomechanical cavity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathIndex {
    Mirror = 1,
    Omc = 2,
}

impl TryFrom<u8> for PathIndex {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            1 => Ok(PathIndex::Mirror),
            2 => Ok(PathIndex::Omc),
            other => Err(Error::invalid(format!("path index must be 1 or 2, got {other}"))),
        }
    }
}

/// Two-path beam-splitter interferometer in front of the cavity.
///
/// The beam splitter has amplitude reflection `r` and transmission
/// t = sqrt(1 - r^2); the parasitic mirror reflects with amplitude `r_m` and
/// phase `theta`; `l1`/`l2` are the mirror/cavity path lengths in a medium of
/// refractive index `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferometer {
    r: f64,
    r_m: f64,
    theta: f64,
    l1: f64,
    l2: f64,
    n: f64,
}

impl Interferometer {
    pub fn new(r: f64, r_m: f64, theta: f64, l1: f64, l2: f64, n: f64) -> Result<Self> {
        if !(r.is_finite() && (0.0..1.0).contains(&r)) {
            return Err(Error::invalid(format!("r must be in [0, 1), got {r}")));
        }
        if !(r_m.is_finite() && (0.0..=1.0).contains(&r_m)) {
            return Err(Error::invalid(format!("r_m must be in [0, 1], got {r_m}")));
        }
        if !theta.is_finite() {
            return Err(Error::invalid(format!("theta must be finite, got {theta}")));
        }
        if !(l1.is_finite() && l1 >= 0.0) || !(l2.is_finite() && l2 >= 0.0) {
            return Err(Error::invalid(format!("path lengths must be >= 0, got {l1}, {l2}")));
        }
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::invalid(format!("refractive index must be > 0, got {n}")));
        }
        Ok(Self { r, r_m, theta, l1, l2, n })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn r_m(&self) -> f64 {
        self.r_m
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    /// Beam-splitter amplitude transmission t = sqrt(1 - r^2).
    pub fn t(&self) -> f64 {
        (1.0 - self.r * self.r).sqrt()
    }

    /// Path-length difference Delta L = L1 - L2 (may be negative).
    pub fn delta_l(&self) -> f64 {
        self.l1 - self.l2
    }

    /// One-way propagation phase phi_j(Omega) = n L_j Omega / c.
    pub fn path_phase(&self, which: PathIndex, omega: f64) -> f64 {
        let l = match which {
            PathIndex::Mirror => self.l1,
            PathIndex::Omc => self.l2,
        };
        self.n * l * omega / SPEED_OF_LIGHT
    }

    /// Carrier wavenumber k = n omega_L / c.
    pub fn carrier_wavenumber(&self, omega_l: f64) -> f64 {
        self.n * omega_l / SPEED_OF_LIGHT
    }

    /// Combined interferometer phase psi = theta + 2 k Delta L, the single
    /// phase that controls the reflection lineshape.
    pub fn combined_phase(&self, omega_l: f64) -> f64 {
        self.theta + 2.0 * self.carrier_wavenumber(omega_l) * self.delta_l()
    }

    /// Copy with theta adjusted so that the combined phase at `omega_l`
    /// equals `psi`. Raw path lengths stay authoritative.
    pub fn with_combined_phase(mut self, psi: f64, omega_l: f64) -> Self {
        self.theta = psi - 2.0 * self.carrier_wavenumber(omega_l) * self.delta_l();
        self
    }
}

/// Laser drive: carrier frequency, input power, and the calibration-tone
/// phase modulation (frequency Omega_c, depth phi0).
///
/// The phase-modulated input is expanded to first order in phi0, giving
/// sideband amplitude s_c = (phi0/2) s0; valid for phi0 << 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    omega_l: f64,
    power: f64,
    omega_c: f64,
    phi0: f64,
}

impl Drive {
    pub fn new(omega_l: f64, power: f64, omega_c: f64, phi0: f64) -> Result<Self> {
        if !(omega_l.is_finite() && omega_l > 0.0) {
            return Err(Error::invalid(format!("omega_l must be > 0, got {omega_l}")));
        }
        if !(power.is_finite() && power >= 0.0) {
            return Err(Error::invalid(format!("power must be >= 0, got {power}")));
        }
        if !(omega_c.is_finite() && omega_c > 0.0) {
            return Err(Error::invalid(format!("omega_c must be > 0, got {omega_c}")));
        }
        if !(phi0.is_finite() && phi0 >= 0.0) {
            return Err(Error::invalid(format!("phi0 must be >= 0, got {phi0}")));
        }
        Ok(Self { omega_l, power, omega_c, phi0 })
    }

    pub fn omega_l(&self) -> f64 {
        self.omega_l
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    /// Photon-flux amplitude s0 = sqrt(P / (hbar omega_L)), units s^(-1/2).
    pub fn s0(&self) -> f64 {
        (self.power / (HBAR * self.omega_l)).sqrt()
    }

    /// Calibration sideband amplitude s_c = (phi0 / 2) s0.
    pub fn s_c(&self) -> f64 {
        0.5 * self.phi0 * self.s0()
    }

    /// Detuning Delta = omega_L - omega_o against a cavity.
    pub fn detuning(&self, cavity: &OpticalCavity) -> f64 {
        self.omega_l - cavity.omega_o()
    }
}

/// Thermal environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    temperature: f64,
}

impl Environment {
    pub fn new(temperature: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(Error::invalid(format!("temperature must be >= 0 K, got {temperature}")));
        }
        Ok(Self { temperature })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// High-temperature thermal occupation n_th = k_B T / (hbar Omega_m).
    pub fn thermal_occupation(&self, omega_m: f64) -> Result<f64> {
        if !(omega_m.is_finite() && omega_m > 0.0) {
            return Err(Error::invalid(format!("omega_m must be > 0, got {omega_m}")));
        }
        Ok(BOLTZMANN * self.temperature / (HBAR * omega_m))
    }
}

/// Intracavity photon number
/// n_cav = kappa_ex P / (hbar omega_L (Delta^2 + (kappa/2)^2)),
/// equal to kappa_ex |s0 chi(0)|^2.
pub fn intracavity_photon_number(cavity: &OpticalCavity, drive: &Drive, delta: f64) -> f64 {
    let half_kappa = cavity.kappa() / 2.0;
    cavity.kappa_ex() * drive.power()
        / (HBAR * drive.omega_l() * (delta * delta + half_kappa * half_kappa))
}
