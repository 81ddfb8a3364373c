//! JSON experiment configuration.
//!
//! All config frequencies are ordinary (Hz) with explicit unit suffixes;
//! conversion to the crate's internal angular convention happens in the
//! accessor methods and nowhere else. The laser frequency defaults to the
//! cavity resonance (sweeps then mean detuning relative to resonance with
//! the carrier parameters frozen).

use serde::{Deserialize, Serialize};

use crate::calibration::TraceGrid;
use crate::constants::hz_to_angular;
use crate::error::{Error, Result};
use crate::model::{Drive, Environment, Interferometer, MechanicalMode, OpticalCavity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub omega_o_hz: f64,
    pub kappa_0_hz: f64,
    pub kappa_ex_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechConfig {
    pub omega_m_hz: f64,
    pub gamma_m_hz: f64,
    pub g0_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    /// Laser frequency; defaults to the cavity resonance when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laser_hz: Option<f64>,
    pub power_w: f64,
    pub omega_c_hz: f64,
    pub phi0_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferometerConfig {
    pub r: f64,
    pub r_m: f64,
    /// Mirror phase. When omitted and `psi_rad` is given, theta is derived
    /// so the combined phase theta + 2 k Delta L equals psi; raw lengths
    /// stay authoritative when both are present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_rad: Option<f64>,
    pub l1_m: f64,
    pub l2_m: f64,
    pub n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub temperature_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub delta_start_hz: f64,
    pub delta_stop_hz: f64,
    pub points: usize,
}

/// Optional trace-synthesis block for the g0-estimation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub f_start_hz: f64,
    pub f_step_hz: f64,
    pub points: usize,
    pub enbw_hz: f64,
    #[serde(default)]
    pub noise_floor: f64,
    /// Analyzer averages for the multiplicative bin-noise model.
    #[serde(default = "default_n_avg")]
    pub n_avg: u32,
}

fn default_n_avg() -> u32 {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub cavity: CavityConfig,
    pub mechanics: Vec<MechConfig>,
    pub drive: DriveConfig,
    pub interferometer: InterferometerConfig,
    pub environment: EnvironmentConfig,
    pub sweep: SweepConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        let config: Self = serde_json::from_str(text)?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.mechanics.is_empty() || self.mechanics.len() > 3 {
            return Err(Error::invalid(format!(
                "mechanics must hold 1 to 3 modes, got {}",
                self.mechanics.len()
            )));
        }
        if self.sweep.points < 2 {
            return Err(Error::invalid(format!(
                "sweep.points must be >= 2, got {}",
                self.sweep.points
            )));
        }
        self.cavity()?;
        for i in 0..self.mechanics.len() {
            self.mechanical_mode(i)?;
        }
        self.drive()?;
        self.interferometer()?;
        self.environment()?;
        Ok(())
    }

    pub fn cavity(&self) -> Result<OpticalCavity> {
        OpticalCavity::new(
            hz_to_angular(self.cavity.omega_o_hz),
            hz_to_angular(self.cavity.kappa_0_hz),
            hz_to_angular(self.cavity.kappa_ex_hz),
        )
    }

    /// Laser angular frequency: explicit value or the cavity resonance.
    pub fn omega_l(&self) -> f64 {
        hz_to_angular(self.drive.laser_hz.unwrap_or(self.cavity.omega_o_hz))
    }

    pub fn drive(&self) -> Result<Drive> {
        Drive::new(
            self.omega_l(),
            self.drive.power_w,
            hz_to_angular(self.drive.omega_c_hz),
            self.drive.phi0_rad,
        )
    }

    /// Mechanical mode `index` with a thermal displacement amplitude taken
    /// from the configured environment temperature.
    pub fn mechanical_mode(&self, index: usize) -> Result<MechanicalMode> {
        let mech = self.mechanics.get(index).ok_or_else(|| {
            Error::invalid(format!(
                "mode index {index} out of range ({} modes configured)",
                self.mechanics.len()
            ))
        })?;
        let omega_m = hz_to_angular(mech.omega_m_hz);
        let n_th = self.environment()?.thermal_occupation(omega_m)?;
        MechanicalMode::thermal(omega_m, hz_to_angular(mech.gamma_m_hz), hz_to_angular(mech.g0_hz), n_th)
    }

    pub fn interferometer(&self) -> Result<Interferometer> {
        let c = &self.interferometer;
        let theta = match (c.theta_rad, c.psi_rad) {
            (Some(theta), _) => theta,
            (None, None) => 0.0,
            (None, Some(_)) => 0.0, // placeholder, adjusted below
        };
        let interf = Interferometer::new(c.r, c.r_m, theta, c.l1_m, c.l2_m, c.n)?;
        Ok(match (c.theta_rad, c.psi_rad) {
            (None, Some(psi)) => interf.with_combined_phase(psi, self.omega_l()),
            _ => interf,
        })
    }

    /// Interferometer with the combined phase forced to `psi` (used by the
    /// per-phase sweep commands).
    pub fn interferometer_with_phase(&self, psi: f64) -> Result<Interferometer> {
        Ok(self.interferometer()?.with_combined_phase(psi, self.omega_l()))
    }

    pub fn environment(&self) -> Result<Environment> {
        Environment::new(self.environment.temperature_k)
    }

    /// Detuning grid in angular units, `sweep.points` long, inclusive.
    pub fn delta_grid(&self) -> Vec<f64> {
        let n = self.sweep.points.max(2);
        let start = hz_to_angular(self.sweep.delta_start_hz);
        let stop = hz_to_angular(self.sweep.delta_stop_hz);
        let step = (stop - start) / (n - 1) as f64;
        (0..n).map(|i| start + i as f64 * step).collect()
    }

    /// Trace grid from the `trace` block, or a default grid spanning the
    /// selected mode and the calibration tone with 32 bins per linewidth.
    pub fn trace_grid(&self, mode_index: usize) -> Result<TraceGrid> {
        if let Some(t) = &self.trace {
            return Ok(TraceGrid {
                f_start: t.f_start_hz,
                f_step: t.f_step_hz,
                points: t.points,
                enbw: t.enbw_hz,
            });
        }
        let mech = self
            .mechanics
            .get(mode_index)
            .ok_or_else(|| Error::invalid(format!("mode index {mode_index} out of range")))?;
        let f_m = mech.omega_m_hz;
        let f_c = self.drive.omega_c_hz;
        let gamma_hz = mech.gamma_m_hz;
        let center = 0.5 * (f_m + f_c);
        let half_span = (0.5 * (f_m - f_c).abs() + 10.0 * gamma_hz).max(16.0 * gamma_hz);
        let f_step = gamma_hz / 32.0;
        let points = (2.0 * half_span / f_step).ceil() as usize + 1;
        Ok(TraceGrid { f_start: center - half_span, f_step, points, enbw: 2.0 * f_step })
    }

    /// Noise floor of the synthesis block (zero when absent).
    pub fn noise_floor(&self) -> f64 {
        self.trace.as_ref().map(|t| t.noise_floor).unwrap_or(0.0)
    }

    pub fn n_avg(&self) -> u32 {
        self.trace.as_ref().map(|t| t.n_avg).unwrap_or_else(default_n_avg)
    }
}
