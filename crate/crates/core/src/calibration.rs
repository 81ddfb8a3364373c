//! Detector power-spectral-density synthesis and the calibration-tone g0
//! estimator.
//!
//! The estimator reads the mechanical peak (local Lorentzian fit) and the
//! calibration tone (max bin near Omega_c) off a [`SpectrumTrace`] and
//! inverts
//!
//! g0 = sqrt( phi0^2 Omega_c^2 / (4 n_th)
//!            * (S_mech Gamma_m / 4) / (S_cal * 2 pi f_ENBW) ),
//!
//! with angular Gamma_m, Omega_c and the analyzer ENBW in Hz converted to
//! angular units in the denominator. The synthesizer deposits the
//! calibration-tone power spread over one angular ENBW, so the pair closes
//! the round trip identically.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::backaction::effective_mech_params;
use crate::constants::TWO_PI;
use crate::error::{Error, Result};
use crate::fitting::{nlls_solve, NllsOptions};
use crate::interferometer::{beat_amplitude, output_coefficients, BeatComponent};
use crate::model::{Drive, Environment, Interferometer, MechanicalMode, OpticalCavity};

/// Minimum number of grid bins across the mechanical FWHM for synthesis.
pub const MIN_BINS_ACROSS_FWHM: usize = 8;

/// Uniform-grid detector PSD trace. Frequencies are ordinary (Hz); the
/// sample at index i sits at `f_start + i * f_step`. `enbw` is the
/// effective noise bandwidth of one analyzer bin in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    f_start: f64,
    f_step: f64,
    values: Vec<f64>,
    enbw: f64,
}

impl SpectrumTrace {
    pub fn new(f_start: f64, f_step: f64, values: Vec<f64>, enbw: f64) -> Result<Self> {
        if !(f_step.is_finite() && f_step > 0.0) {
            return Err(Error::invalid(format!("f_step must be > 0, got {f_step}")));
        }
        if !(enbw.is_finite() && enbw > 0.0) {
            return Err(Error::invalid(format!("enbw must be > 0, got {enbw}")));
        }
        if !f_start.is_finite() || f_start < 0.0 {
            return Err(Error::invalid(format!("f_start must be >= 0, got {f_start}")));
        }
        if values.is_empty() {
            return Err(Error::invalid("trace must hold at least one sample".to_string()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("trace values must be finite".to_string()));
        }
        Ok(Self { f_start, f_step, values, enbw })
    }

    pub fn f_start(&self) -> f64 {
        self.f_start
    }

    pub fn f_step(&self) -> f64 {
        self.f_step
    }

    pub fn enbw(&self) -> f64 {
        self.enbw
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Frequency of sample `i` in Hz.
    pub fn frequency(&self, i: usize) -> f64 {
        self.f_start + i as f64 * self.f_step
    }

    /// Last grid frequency in Hz.
    pub fn f_end(&self) -> f64 {
        self.frequency(self.values.len() - 1)
    }

    fn require_in_span(&self, f_hz: f64) -> Result<()> {
        if f_hz < self.f_start || f_hz > self.f_end() {
            return Err(Error::OutOfSpan { freq_hz: f_hz, lo_hz: self.f_start, hi_hz: self.f_end() });
        }
        Ok(())
    }

    /// Index of the grid bin closest to `f_hz`.
    pub fn nearest_bin(&self, f_hz: f64) -> Result<usize> {
        self.require_in_span(f_hz)?;
        let raw = ((f_hz - self.f_start) / self.f_step).round();
        Ok((raw as usize).min(self.values.len() - 1))
    }
}

/// Shape of a trace to synthesize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceGrid {
    pub f_start: f64,
    pub f_step: f64,
    pub points: usize,
    pub enbw: f64,
}

impl TraceGrid {
    /// Symmetric grid of `points` bins centered on `f_center`.
    pub fn centered(f_center: f64, half_span: f64, points: usize, enbw: f64) -> Self {
        let f_step = 2.0 * half_span / (points.max(2) - 1) as f64;
        Self { f_start: f_center - half_span, f_step, points, enbw }
    }
}

/// Multiplicative analyzer bin noise: every bin is scaled by an independent
/// chi-squared variate with mean one, emulating an `n_avg`-fold averaged
/// periodogram. Relative bin scatter is 1/sqrt(n_avg).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinNoise {
    pub seed: u64,
    pub n_avg: u32,
}

impl BinNoise {
    /// Noise with the default 100 averages.
    pub fn seeded(seed: u64) -> Self {
        Self { seed, n_avg: 100 }
    }
}

/// Synthesize a detector PSD: a noise floor, a mechanical Lorentzian of FWHM
/// Gamma_eff centered at Omega_eff whose per-Hz area equals the mechanical
/// beat power, and a single-bin calibration tone carrying the calibration
/// beat power spread over one angular ENBW. Deterministic for a fixed noise
/// seed; noiseless when `noise` is `None`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_psd(
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    interf: &Interferometer,
    env: &Environment,
    delta: f64,
    grid: &TraceGrid,
    noise_floor: f64,
    noise: Option<BinNoise>,
) -> Result<SpectrumTrace> {
    if grid.points < 2 {
        return Err(Error::invalid("grid needs at least two points".to_string()));
    }
    if !(noise_floor.is_finite() && noise_floor >= 0.0) {
        return Err(Error::invalid(format!("noise_floor must be >= 0, got {noise_floor}")));
    }
    let n_th = env.thermal_occupation(mech.omega_m())?;
    let thermal = MechanicalMode::thermal(mech.omega_m(), mech.gamma_m(), mech.g0(), n_th)?;

    let point = effective_mech_params(cavity, drive, &thermal, delta);
    let f_eff = point.omega_eff / TWO_PI;
    let gamma_eff_hz = point.gamma_eff / TWO_PI;
    let f_cal = drive.omega_c() / TWO_PI;

    let mut trace =
        SpectrumTrace::new(grid.f_start, grid.f_step, vec![noise_floor; grid.points], grid.enbw)?;
    trace.require_in_span(mech.omega_m() / TWO_PI)?;
    trace.require_in_span(f_cal)?;

    let bins_across = gamma_eff_hz / grid.f_step;
    if bins_across < MIN_BINS_ACROSS_FWHM as f64 {
        return Err(Error::UnderResolved { bins: bins_across, min_bins: MIN_BINS_ACROSS_FWHM });
    }

    let coeffs = output_coefficients(cavity, drive, &thermal, interf, delta);
    let p_mech = beat_amplitude(&coeffs, BeatComponent::Mechanical).norm_sqr();
    let p_cal = beat_amplitude(&coeffs, BeatComponent::Calibration).norm_sqr();

    // Unit-area Lorentzian in Hz: (gamma/2pi) / ((f-f0)^2 + (gamma/2)^2).
    let half = gamma_eff_hz / 2.0;
    let norm = gamma_eff_hz / TWO_PI;
    for i in 0..grid.points {
        let df = trace.frequency(i) - f_eff;
        trace.values[i] += p_mech * norm / (df * df + half * half);
    }

    let cal_bin = trace.nearest_bin(f_cal)?;
    trace.values[cal_bin] += p_cal / (TWO_PI * grid.enbw);

    if let Some(bin_noise) = noise {
        if bin_noise.n_avg == 0 {
            return Err(Error::invalid("n_avg must be >= 1".to_string()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(bin_noise.seed);
        let shape = bin_noise.n_avg as f64;
        let gamma = Gamma::new(shape, 1.0 / shape)
            .map_err(|e| Error::invalid(format!("noise distribution: {e}")))?;
        for value in &mut trace.values {
            *value *= gamma.sample(&mut rng);
        }
    }
    Ok(trace)
}

/// Calibration-tone estimate and the intermediate readouts it used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G0Estimate {
    pub g0: f64,
    pub s_mech_peak: f64,
    pub s_cal_peak: f64,
    pub gamma_m_used: f64,
    pub n_th_used: f64,
}

/// Peak-readout windows of [`estimate_g0`].
#[derive(Debug, Clone, Copy)]
pub struct EstimatorOptions {
    /// Half-width of the mechanical fit window, in mechanical linewidths.
    pub mech_window_linewidths: f64,
    /// Half-width of the calibration-tone search window, in ENBWs.
    pub cal_window_enbws: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self { mech_window_linewidths: 5.0, cal_window_enbws: 3.0 }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Estimate g0 from a PSD trace with the default readout windows.
pub fn estimate_g0(
    trace: &SpectrumTrace,
    omega_m: f64,
    omega_c: f64,
    gamma_m: f64,
    phi0: f64,
    n_th: f64,
) -> Result<G0Estimate> {
    estimate_g0_with_options(trace, omega_m, omega_c, gamma_m, phi0, n_th, &EstimatorOptions::default())
}

/// Estimate g0 from a PSD trace.
///
/// The mechanical peak height is the amplitude of a local Lorentzian-plus-
/// baseline fit around Omega_m (robust to bin noise); the calibration tone
/// is the maximum bin near Omega_c minus the local median floor. Both
/// heights are above-floor quantities, so a flat analyzer floor cancels.
///
/// The tone should sit close to the mechanical line (within a few tens of
/// MHz) so both see the same cavity transfer; the separation is guidance,
/// not enforced.
pub fn estimate_g0_with_options(
    trace: &SpectrumTrace,
    omega_m: f64,
    omega_c: f64,
    gamma_m: f64,
    phi0: f64,
    n_th: f64,
    options: &EstimatorOptions,
) -> Result<G0Estimate> {
    if !phi0.is_finite() || phi0 <= 0.0 {
        return Err(Error::invalid(format!("phi0 must be > 0, got {phi0}")));
    }
    if !n_th.is_finite() || n_th <= 0.0 {
        return Err(Error::invalid(format!("n_th must be > 0, got {n_th}")));
    }
    if !gamma_m.is_finite() || gamma_m <= 0.0 {
        return Err(Error::invalid(format!("gamma_m must be > 0, got {gamma_m}")));
    }
    let f_m = omega_m / TWO_PI;
    let f_c = omega_c / TWO_PI;
    trace.require_in_span(f_m)?;
    trace.require_in_span(f_c)?;

    let gamma_hz = gamma_m / TWO_PI;
    let mech_half = options.mech_window_linewidths * gamma_hz;
    let cal_half = options.cal_window_enbws * trace.enbw();
    let cal_exclusion = cal_half.max(2.0 * trace.f_step());

    // Mechanical window, excluding the calibration-tone neighborhood.
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..trace.len() {
        let f = trace.frequency(i);
        if (f - f_m).abs() <= mech_half && (f - f_c).abs() > cal_exclusion {
            xs.push(f);
            ys.push(trace.values()[i]);
        }
    }
    if xs.len() < 6 {
        return Err(Error::PeakNotDetected(format!(
            "only {} usable bins around the mechanical line",
            xs.len()
        )));
    }

    let base0 = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let peak0 = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let f_peak0 = xs[ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)];
    let p0 = [base0, (peak0 - base0).max(0.0), f_peak0, gamma_hz];
    let model = |p: &[f64], f: f64| {
        let half = p[3] / 2.0;
        p[0] + p[1] * half * half / ((f - p[2]) * (f - p[2]) + half * half)
    };
    let fit = nlls_solve(model, &xs, &ys, &p0, &["floor", "peak", "f0", "fwhm"], &NllsOptions::default())
        .map_err(|e| Error::PeakNotDetected(format!("mechanical peak fit failed: {e}")))?;
    let s_mech = fit.params[1].max(0.0);
    let mech_floor = fit.params[0];

    // Calibration tone: max bin within the search window, minus the local
    // median floor (excluding the tone bin and its direct neighbors). The
    // max bin must be a strict interior local maximum; a sloping Lorentzian
    // shoulder or a flat floor has its window maximum at an edge and is not
    // a tone.
    let cal_bins: Vec<(usize, f64)> = (0..trace.len())
        .filter(|&i| (trace.frequency(i) - f_c).abs() <= cal_half)
        .map(|i| (i, trace.values()[i]))
        .collect();
    if cal_bins.is_empty() {
        return Err(Error::PeakNotDetected("no bins inside the calibration window".to_string()));
    }
    let &(tone_idx, tone_value) =
        cal_bins.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let is_local_max = tone_idx > 0
        && tone_idx + 1 < trace.len()
        && tone_value > trace.values()[tone_idx - 1]
        && tone_value > trace.values()[tone_idx + 1];
    if !is_local_max {
        return Err(Error::PeakNotDetected(
            "no local maximum above the floor in the calibration window".to_string(),
        ));
    }
    let mut floor_pool: Vec<f64> = cal_bins
        .iter()
        .filter(|(i, _)| i.abs_diff(tone_idx) > 1)
        .map(|&(_, v)| v)
        .collect();
    let cal_floor = if floor_pool.len() >= 3 { median(&mut floor_pool) } else { mech_floor };
    let s_cal = tone_value - cal_floor;
    if s_cal <= 0.0 {
        return Err(Error::PeakNotDetected(
            "calibration tone not above the local floor".to_string(),
        ));
    }

    let ratio = (s_mech * gamma_m / 4.0) / (s_cal * TWO_PI * trace.enbw());
    let g0 = (phi0 * phi0 * omega_c * omega_c / (4.0 * n_th) * ratio).sqrt();
    Ok(G0Estimate { g0, s_mech_peak: s_mech, s_cal_peak: s_cal, gamma_m_used: gamma_m, n_th_used: n_th })
}
