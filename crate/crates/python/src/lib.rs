//! Python bindings for the omcal toolkit.
//!
//! The module mirrors the Rust API: angular frequencies (rad/s) everywhere,
//! records as thin immutable classes, composite results as dicts. Errors
//! surface as ValueError with the Rust error message.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use omcal as core;
use omcal::calibration as cal;
use omcal::fitting as fitting;
use omcal::interferometer as interf_mod;

fn err(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Optical cavity mode (angular frequencies, rad/s).
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct OpticalCavity {
    inner: core::OpticalCavity,
}

#[pymethods]
impl OpticalCavity {
    #[new]
    fn new(omega_o: f64, kappa_0: f64, kappa_ex: f64) -> PyResult<Self> {
        Ok(Self { inner: core::OpticalCavity::new(omega_o, kappa_0, kappa_ex).map_err(err)? })
    }

    #[getter]
    fn omega_o(&self) -> f64 {
        self.inner.omega_o()
    }

    #[getter]
    fn kappa_0(&self) -> f64 {
        self.inner.kappa_0()
    }

    #[getter]
    fn kappa_ex(&self) -> f64 {
        self.inner.kappa_ex()
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa()
    }

    #[getter]
    fn eta_c(&self) -> f64 {
        self.inner.eta_c()
    }

    /// chi(omega) = 1 / (kappa/2 - i (delta + omega)).
    fn susceptibility(&self, delta: f64, omega: f64) -> Complex64 {
        self.inner.susceptibility(delta, omega)
    }

    fn __repr__(&self) -> String {
        format!(
            "OpticalCavity(omega_o={:e}, kappa_0={:e}, kappa_ex={:e})",
            self.inner.omega_o(),
            self.inner.kappa_0(),
            self.inner.kappa_ex()
        )
    }
}

/// Mechanical mode with a coherent displacement amplitude x_m.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct MechanicalMode {
    inner: core::MechanicalMode,
}

#[pymethods]
impl MechanicalMode {
    #[new]
    fn new(omega_m: f64, gamma_m: f64, g0: f64, x_m: Complex64) -> PyResult<Self> {
        Ok(Self { inner: core::MechanicalMode::new(omega_m, gamma_m, g0, x_m).map_err(err)? })
    }

    /// Mode with |x_m|^2 = (2 n_th + 1) / 2 (thermal occupation n_th).
    #[staticmethod]
    fn thermal(omega_m: f64, gamma_m: f64, g0: f64, n_th: f64) -> PyResult<Self> {
        Ok(Self { inner: core::MechanicalMode::thermal(omega_m, gamma_m, g0, n_th).map_err(err)? })
    }

    #[getter]
    fn omega_m(&self) -> f64 {
        self.inner.omega_m()
    }

    #[getter]
    fn gamma_m(&self) -> f64 {
        self.inner.gamma_m()
    }

    #[getter]
    fn g0(&self) -> f64 {
        self.inner.g0()
    }

    #[getter]
    fn x_m(&self) -> Complex64 {
        self.inner.x_m()
    }

    /// Single-photon cooperativity 4 g0^2 / (Gamma_m kappa).
    fn cooperativity(&self, cavity: &OpticalCavity) -> f64 {
        self.inner.cooperativity(&cavity.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "MechanicalMode(omega_m={:e}, gamma_m={:e}, g0={:e})",
            self.inner.omega_m(),
            self.inner.gamma_m(),
            self.inner.g0()
        )
    }
}

/// Two-path beam-splitter interferometer.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Interferometer {
    inner: core::Interferometer,
}

#[pymethods]
impl Interferometer {
    #[new]
    fn new(r: f64, r_m: f64, theta: f64, l1: f64, l2: f64, n: f64) -> PyResult<Self> {
        Ok(Self { inner: core::Interferometer::new(r, r_m, theta, l1, l2, n).map_err(err)? })
    }

    #[getter]
    fn r(&self) -> f64 {
        self.inner.r()
    }

    #[getter]
    fn r_m(&self) -> f64 {
        self.inner.r_m()
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta()
    }

    #[getter]
    fn l1(&self) -> f64 {
        self.inner.l1()
    }

    #[getter]
    fn l2(&self) -> f64 {
        self.inner.l2()
    }

    #[getter]
    fn n(&self) -> f64 {
        self.inner.n()
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t()
    }

    #[getter]
    fn delta_l(&self) -> f64 {
        self.inner.delta_l()
    }

    /// One-way propagation phase of path 1 (mirror) or 2 (cavity).
    fn path_phase(&self, which: u8, omega: f64) -> PyResult<f64> {
        let path = core::PathIndex::try_from(which).map_err(err)?;
        Ok(self.inner.path_phase(path, omega))
    }

    fn carrier_wavenumber(&self, omega_l: f64) -> f64 {
        self.inner.carrier_wavenumber(omega_l)
    }

    fn combined_phase(&self, omega_l: f64) -> f64 {
        self.inner.combined_phase(omega_l)
    }

    /// Copy with theta adjusted so the combined phase equals psi.
    fn with_combined_phase(&self, psi: f64, omega_l: f64) -> Self {
        Self { inner: self.inner.with_combined_phase(psi, omega_l) }
    }

    fn __repr__(&self) -> String {
        format!(
            "Interferometer(r={}, r_m={}, theta={}, l1={:e}, l2={:e}, n={})",
            self.inner.r(),
            self.inner.r_m(),
            self.inner.theta(),
            self.inner.l1(),
            self.inner.l2(),
            self.inner.n()
        )
    }
}

/// Laser drive with the calibration phase modulation.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Drive {
    inner: core::Drive,
}

#[pymethods]
impl Drive {
    #[new]
    fn new(omega_l: f64, power: f64, omega_c: f64, phi0: f64) -> PyResult<Self> {
        Ok(Self { inner: core::Drive::new(omega_l, power, omega_c, phi0).map_err(err)? })
    }

    #[getter]
    fn omega_l(&self) -> f64 {
        self.inner.omega_l()
    }

    #[getter]
    fn power(&self) -> f64 {
        self.inner.power()
    }

    #[getter]
    fn omega_c(&self) -> f64 {
        self.inner.omega_c()
    }

    #[getter]
    fn phi0(&self) -> f64 {
        self.inner.phi0()
    }

    #[getter]
    fn s0(&self) -> f64 {
        self.inner.s0()
    }

    #[getter]
    fn s_c(&self) -> f64 {
        self.inner.s_c()
    }

    fn detuning(&self, cavity: &OpticalCavity) -> f64 {
        self.inner.detuning(&cavity.inner)
    }
}

/// Thermal environment.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Environment {
    inner: core::Environment,
}

#[pymethods]
impl Environment {
    #[new]
    fn new(temperature: f64) -> PyResult<Self> {
        Ok(Self { inner: core::Environment::new(temperature).map_err(err)? })
    }

    #[getter]
    fn temperature(&self) -> f64 {
        self.inner.temperature()
    }

    /// n_th = k_B T / (hbar Omega_m).
    fn thermal_occupation(&self, omega_m: f64) -> PyResult<f64> {
        self.inner.thermal_occupation(omega_m).map_err(err)
    }
}

/// Uniform-grid detector PSD trace (frequencies in Hz).
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct SpectrumTrace {
    inner: cal::SpectrumTrace,
}

#[pymethods]
impl SpectrumTrace {
    #[new]
    fn new(f_start: f64, f_step: f64, values: Vec<f64>, enbw: f64) -> PyResult<Self> {
        Ok(Self { inner: cal::SpectrumTrace::new(f_start, f_step, values, enbw).map_err(err)? })
    }

    #[getter]
    fn f_start(&self) -> f64 {
        self.inner.f_start()
    }

    #[getter]
    fn f_step(&self) -> f64 {
        self.inner.f_step()
    }

    #[getter]
    fn enbw(&self) -> f64 {
        self.inner.enbw()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn frequencies(&self) -> Vec<f64> {
        (0..self.inner.len()).map(|i| self.inner.frequency(i)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
fn intracavity_photon_number(cavity: &OpticalCavity, drive: &Drive, delta: f64) -> f64 {
    core::model::intracavity_photon_number(&cavity.inner, &drive.inner, delta)
}

fn amplitudes_dict<'py>(
    py: Python<'py>,
    ss: &core::sideband::SteadyStateAmplitudes,
) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("a0", ss.a0)?;
    dict.set_item("a_minus_c", ss.a_minus_c)?;
    dict.set_item("a_plus_c", ss.a_plus_c)?;
    dict.set_item("a_minus_m", ss.a_minus_m)?;
    dict.set_item("a_plus_m", ss.a_plus_m)?;
    Ok(dict)
}

/// Steady-state intracavity amplitudes of the bare cavity.
#[pyfunction]
fn steady_state<'py>(
    py: Python<'py>,
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    delta: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let ss = core::sideband::steady_state(&cavity.inner, &drive.inner, &mech.inner, delta);
    amplitudes_dict(py, &ss)
}

/// Steady-state amplitudes with beam-splitter transmission and path phases.
#[pyfunction]
fn steady_state_shifted<'py>(
    py: Python<'py>,
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    interf: &Interferometer,
    delta: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let ss = core::sideband::steady_state_shifted(
        &cavity.inner,
        &drive.inner,
        &mech.inner,
        &interf.inner,
        delta,
    );
    amplitudes_dict(py, &ss)
}

/// Total output-field coefficients after the beam splitter.
#[pyfunction]
fn output_coefficients<'py>(
    py: Python<'py>,
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    interf: &Interferometer,
    delta: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let c = interf_mod::output_coefficients(
        &cavity.inner,
        &drive.inner,
        &mech.inner,
        &interf.inner,
        delta,
    );
    let dict = PyDict::new(py);
    dict.set_item("a_carrier", c.a_carrier)?;
    dict.set_item("b_cal", c.b_cal)?;
    dict.set_item("c_cal", c.c_cal)?;
    dict.set_item("b_mech", c.b_mech)?;
    dict.set_item("c_mech", c.c_mech)?;
    Ok(dict)
}

/// (calibration, mechanical) intensity beat amplitudes A* B + A C*.
#[pyfunction]
fn beat_amplitudes(
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    interf: &Interferometer,
    delta: f64,
) -> (Complex64, Complex64) {
    let c = interf_mod::output_coefficients(
        &cavity.inner,
        &drive.inner,
        &mech.inner,
        &interf.inner,
        delta,
    );
    (
        interf_mod::beat_amplitude(&c, interf_mod::BeatComponent::Calibration),
        interf_mod::beat_amplitude(&c, interf_mod::BeatComponent::Mechanical),
    )
}

/// Mechanics/calibration detected power ratio.
#[pyfunction]
fn eta_g(
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    interf: &Interferometer,
    delta: f64,
) -> PyResult<f64> {
    interf_mod::eta_g(&cavity.inner, &drive.inner, &mech.inner, &interf.inner, delta).map_err(err)
}

/// Exact reflected photon flux |A(delta)|^2.
#[pyfunction]
fn reflection_exact(
    cavity: &OpticalCavity,
    drive: &Drive,
    interf: &Interferometer,
    delta: f64,
) -> f64 {
    interf_mod::reflection_exact(&cavity.inner, &drive.inner, &interf.inner, delta)
}

/// Expanded (constant + Lorentzian/dispersive) reflection lineshape.
#[pyfunction]
fn reflection_expanded(
    cavity: &OpticalCavity,
    drive: &Drive,
    interf: &Interferometer,
    delta: f64,
) -> f64 {
    interf_mod::reflection_expanded(&cavity.inner, &drive.inner, &interf.inner, delta)
}

/// Fano parameters (h, a_amp, q) identified from the interferometer, plus
/// the combined phase and the consistency-constraint root.
#[pyfunction]
fn fano_identification<'py>(
    py: Python<'py>,
    cavity: &OpticalCavity,
    drive: &Drive,
    interf: &Interferometer,
) -> PyResult<Bound<'py, PyDict>> {
    let fano =
        interf_mod::fano_identification(&cavity.inner, &drive.inner, &interf.inner).map_err(err)?;
    let dict = PyDict::new(py);
    dict.set_item("h", fano.h)?;
    dict.set_item("a_amp", fano.a_amp)?;
    dict.set_item("q", fano.q)?;
    dict.set_item("psi", fano.psi)?;
    dict.set_item("psi_root", fano.psi_root)?;
    Ok(dict)
}

/// Measured g0 over a detuning grid, normalized to the r = 0 reference.
/// Returns {"points": [(delta, g0_measured)], "skipped": [(delta, reason)]}.
#[pyfunction]
fn g0_bias_sweep<'py>(
    py: Python<'py>,
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    interf: &Interferometer,
    delta_grid: Vec<f64>,
    g0_true: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sweep = interf_mod::g0_bias_sweep(
        &cavity.inner,
        &drive.inner,
        &mech.inner,
        &interf.inner,
        &delta_grid,
        g0_true,
    )
    .map_err(err)?;
    let dict = PyDict::new(py);
    let points = PyList::new(py, sweep.points.iter().map(|p| (p.delta, p.g0_measured)))?;
    let skipped = PyList::new(py, sweep.skipped.iter().map(|s| (s.delta, s.reason.clone())))?;
    dict.set_item("points", points)?;
    dict.set_item("skipped", skipped)?;
    Ok(dict)
}

/// Optical-spring frequency shift at one detuning.
#[pyfunction]
fn delta_omega_m(cavity: &OpticalCavity, drive: &Drive, mech: &MechanicalMode, delta: f64) -> f64 {
    core::backaction::delta_omega_m(&cavity.inner, &drive.inner, &mech.inner, delta)
}

/// Optomechanical damping shift at one detuning.
#[pyfunction]
fn delta_gamma_m(cavity: &OpticalCavity, drive: &Drive, mech: &MechanicalMode, delta: f64) -> f64 {
    core::backaction::delta_gamma_m(&cavity.inner, &drive.inner, &mech.inner, delta)
}

/// Effective mechanical parameters {delta, omega_eff, gamma_eff, unstable}.
#[pyfunction]
fn effective_mech_params<'py>(
    py: Python<'py>,
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    delta: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let point =
        core::backaction::effective_mech_params(&cavity.inner, &drive.inner, &mech.inner, delta);
    let dict = PyDict::new(py);
    dict.set_item("delta", point.delta)?;
    dict.set_item("omega_eff", point.omega_eff)?;
    dict.set_item("gamma_eff", point.gamma_eff)?;
    dict.set_item("unstable", point.is_unstable())?;
    Ok(dict)
}

/// Synthesize a detector PSD trace. `seed=None` means noiseless.
#[pyfunction]
#[pyo3(signature = (cavity, drive, mech, interf, env, delta, f_start, f_step, points, enbw, noise_floor=0.0, seed=None, n_avg=100))]
#[allow(clippy::too_many_arguments)]
fn synthesize_psd(
    cavity: &OpticalCavity,
    drive: &Drive,
    mech: &MechanicalMode,
    interf: &Interferometer,
    env: &Environment,
    delta: f64,
    f_start: f64,
    f_step: f64,
    points: usize,
    enbw: f64,
    noise_floor: f64,
    seed: Option<u64>,
    n_avg: u32,
) -> PyResult<SpectrumTrace> {
    let grid = cal::TraceGrid { f_start, f_step, points, enbw };
    let noise = seed.map(|s| cal::BinNoise { seed: s, n_avg });
    let trace = cal::synthesize_psd(
        &cavity.inner,
        &drive.inner,
        &mech.inner,
        &interf.inner,
        &env.inner,
        delta,
        &grid,
        noise_floor,
        noise,
    )
    .map_err(err)?;
    Ok(SpectrumTrace { inner: trace })
}

/// Calibration-tone g0 estimate from a trace.
#[pyfunction]
fn estimate_g0<'py>(
    py: Python<'py>,
    trace: &SpectrumTrace,
    omega_m: f64,
    omega_c: f64,
    gamma_m: f64,
    phi0: f64,
    n_th: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let estimate =
        cal::estimate_g0(&trace.inner, omega_m, omega_c, gamma_m, phi0, n_th).map_err(err)?;
    let dict = PyDict::new(py);
    dict.set_item("g0", estimate.g0)?;
    dict.set_item("s_mech_peak", estimate.s_mech_peak)?;
    dict.set_item("s_cal_peak", estimate.s_cal_peak)?;
    dict.set_item("gamma_m_used", estimate.gamma_m_used)?;
    dict.set_item("n_th_used", estimate.n_th_used)?;
    Ok(dict)
}

fn fit_result_dict<'py>(py: Python<'py>, fit: &fitting::FitResult) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    let params = PyDict::new(py);
    let sigma = PyDict::new(py);
    for (i, name) in fit.names.iter().enumerate() {
        params.set_item(name, fit.params[i])?;
        sigma.set_item(name, fit.sigma(i))?;
    }
    dict.set_item("params", params)?;
    dict.set_item("sigma", sigma)?;
    dict.set_item("converged", fit.converged)?;
    dict.set_item("iterations", fit.iterations)?;
    dict.set_item("residual_norm", fit.residual_norm)?;
    dict.set_item("warnings", fit.warnings.clone())?;
    Ok(dict)
}

/// Fano lineshape fit; params h, a_amp, q, kappa, delta0 in the input units.
#[pyfunction]
#[pyo3(signature = (deltas, values, window_linewidths=3.0))]
fn fit_fano<'py>(
    py: Python<'py>,
    deltas: Vec<f64>,
    values: Vec<f64>,
    window_linewidths: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let options =
        fitting::LineshapeOptions { window_linewidths, ..fitting::LineshapeOptions::default() };
    let fit = fitting::fit_fano(&deltas, &values, None, &options).map_err(err)?;
    fit_result_dict(py, &fit)
}

/// Lorentzian (q = 0) lineshape fit.
#[pyfunction]
#[pyo3(signature = (deltas, values, window_linewidths=3.0))]
fn fit_lorentzian<'py>(
    py: Python<'py>,
    deltas: Vec<f64>,
    values: Vec<f64>,
    window_linewidths: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let options =
        fitting::LineshapeOptions { window_linewidths, ..fitting::LineshapeOptions::default() };
    let fit = fitting::fit_lorentzian(&deltas, &values, None, &options).map_err(err)?;
    fit_result_dict(py, &fit)
}

/// Joint backaction fit over (delta, omega_eff) and (delta, gamma_eff)
/// points sharing one g0. `coupled=True` fits g0^2 P instead of g0.
#[pyfunction]
#[pyo3(signature = (omega_points, gamma_points, kappa, kappa_ex, power, omega_l, p0, coupled=false))]
#[allow(clippy::too_many_arguments)]
fn fit_backaction<'py>(
    py: Python<'py>,
    omega_points: Vec<(f64, f64)>,
    gamma_points: Vec<(f64, f64)>,
    kappa: f64,
    kappa_ex: f64,
    power: f64,
    omega_l: f64,
    p0: (f64, f64, f64),
    coupled: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let fixed = fitting::BackactionFixed { kappa, kappa_ex, power, omega_l };
    let mode = if coupled { fitting::FitScaleMode::Coupled } else { fitting::FitScaleMode::FixedPower };
    let fit = fitting::fit_backaction(
        &omega_points,
        &gamma_points,
        &fixed,
        &[p0.0, p0.1, p0.2],
        mode,
        &fitting::NllsOptions::default(),
    )
    .map_err(err)?;
    fit_result_dict(py, &fit)
}

#[pymodule]
fn omcal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<OpticalCavity>()?;
    m.add_class::<MechanicalMode>()?;
    m.add_class::<Interferometer>()?;
    m.add_class::<Drive>()?;
    m.add_class::<Environment>()?;
    m.add_class::<SpectrumTrace>()?;

    m.add_function(wrap_pyfunction!(intracavity_photon_number, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state_shifted, m)?)?;
    m.add_function(wrap_pyfunction!(output_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(beat_amplitudes, m)?)?;
    m.add_function(wrap_pyfunction!(eta_g, m)?)?;
    m.add_function(wrap_pyfunction!(reflection_exact, m)?)?;
    m.add_function(wrap_pyfunction!(reflection_expanded, m)?)?;
    m.add_function(wrap_pyfunction!(fano_identification, m)?)?;
    m.add_function(wrap_pyfunction!(g0_bias_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(delta_omega_m, m)?)?;
    m.add_function(wrap_pyfunction!(delta_gamma_m, m)?)?;
    m.add_function(wrap_pyfunction!(effective_mech_params, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize_psd, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_g0, m)?)?;
    m.add_function(wrap_pyfunction!(fit_fano, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lorentzian, m)?)?;
    m.add_function(wrap_pyfunction!(fit_backaction, m)?)?;

    m.add("HBAR", core::constants::HBAR)?;
    m.add("BOLTZMANN", core::constants::BOLTZMANN)?;
    m.add("SPEED_OF_LIGHT", core::constants::SPEED_OF_LIGHT)?;
    m.add("TWO_PI", core::constants::TWO_PI)?;
    Ok(())
}
