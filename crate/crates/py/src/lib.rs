//! Python module `tslif`: neuron simulation, linear analysis, metrics, energy
//! accounting and the desk-scale benchmarks.
//!
//! Series cross the boundary as lists of rows (`list[list[float]]`, one inner
//! list per time step).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tslif_core::analysis;
use tslif_core::network::NeuronKind;
use tslif_core::neuron::{simulate_population, simulate_two_compartment, SimOptions, SpikeMode, TwoCompartmentParams};
use tslif_core::tasks::{self, forecast, xor};
use tslif_core::{Kappa, SeriesFrame};

fn err(e: tslif_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn frame(rows: Vec<Vec<f64>>) -> PyResult<SeriesFrame> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("all rows must have the same length"));
    }
    let t = rows.len();
    SeriesFrame::new(SeriesFrame::synth_names(n), t, rows.concat()).map_err(err)
}

fn rows(f: &SeriesFrame) -> Vec<Vec<f64>> {
    (0..f.rows()).map(|t| f.row(t).to_vec()).collect()
}

/// Coefficients of one TS-LIF population.
#[pyclass(name = "NeuronParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyNeuronParams {
    inner: tslif_core::NeuronParams,
}

#[pymethods]
impl PyNeuronParams {
    #[new]
    #[pyo3(signature = (alpha1, alpha2, beta1, beta2, gamma1=0.0, gamma2=0.0, v_th=1.0, kappa=0.5))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        alpha1: f64,
        alpha2: f64,
        beta1: f64,
        beta2: f64,
        gamma1: f64,
        gamma2: f64,
        v_th: f64,
        kappa: f64,
    ) -> PyResult<Self> {
        let inner = tslif_core::NeuronParams::linear(alpha1, alpha2, beta1, beta2)
            .and_then(|p| p.with_reset(gamma1, gamma2))
            .and_then(|p| p.with_threshold(v_th))
            .and_then(|p| p.with_kappa(Kappa::Shared(kappa)))
            .map_err(err)?;
        Ok(Self { inner })
    }

    /// Low-pass dendrite, high-pass soma: alpha = (0.95, 0.05), beta = (0, -0.9).
    #[staticmethod]
    fn frequency_split() -> Self {
        Self {
            inner: tslif_core::NeuronParams::frequency_split(),
        }
    }

    #[getter]
    fn alpha1(&self) -> f64 {
        self.inner.alpha1()
    }
    #[getter]
    fn alpha2(&self) -> f64 {
        self.inner.alpha2()
    }
    #[getter]
    fn beta1(&self) -> f64 {
        self.inner.beta1()
    }
    #[getter]
    fn beta2(&self) -> f64 {
        self.inner.beta2()
    }
    #[getter]
    fn gamma1(&self) -> f64 {
        self.inner.gamma1()
    }
    #[getter]
    fn gamma2(&self) -> f64 {
        self.inner.gamma2()
    }
    #[getter]
    fn v_th(&self) -> f64 {
        self.inner.v_th()
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa().at(0)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "NeuronParams(alpha1={}, alpha2={}, beta1={}, beta2={}, gamma1={}, gamma2={}, v_th={}, kappa={})",
            p.alpha1(),
            p.alpha2(),
            p.beta1(),
            p.beta2(),
            p.gamma1(),
            p.gamma2(),
            p.v_th(),
            p.kappa().at(0)
        )
    }
}

fn trace_dict<'py>(py: Python<'py>, t: &tslif_core::neuron::Trace) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (k, f) in [("v_d", &t.v_d), ("v_s", &t.v_s), ("s_d", &t.s_d), ("s_s", &t.s_s), ("s_mix", &t.s_mix)] {
        if let Some(f) = f {
            d.set_item(k, rows(f))?;
        }
    }
    Ok(d)
}

/// Runs a TS-LIF population over `currents` (rows = steps, columns = neurons).
#[pyfunction]
#[pyo3(signature = (params, currents, spiking=true))]
fn simulate<'py>(
    py: Python<'py>,
    params: &PyNeuronParams,
    currents: Vec<Vec<f64>>,
    spiking: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = SimOptions {
        spiking: if spiking { SpikeMode::Enabled } else { SpikeMode::Disabled },
        ..SimOptions::default()
    };
    let trace = simulate_population(&params.inner, &frame(currents)?, &opts).map_err(err)?;
    trace_dict(py, &trace)
}

/// The TC-LIF two-compartment baseline (alpha = 1, 1; beta = -0.5, 0.5).
#[pyfunction]
#[pyo3(signature = (currents, spiking=true))]
fn simulate_tclif<'py>(py: Python<'py>, currents: Vec<Vec<f64>>, spiking: bool) -> PyResult<Bound<'py, PyDict>> {
    let opts = SimOptions {
        spiking: if spiking { SpikeMode::Enabled } else { SpikeMode::Disabled },
        ..SimOptions::default()
    };
    let trace = simulate_two_compartment(&TwoCompartmentParams::tc_lif(), &frame(currents)?, &opts).map_err(err)?;
    trace_dict(py, &trace)
}

/// Eigenvalues as `(re, im)` pairs, spectral radius and verdict.
#[pyfunction]
fn stability<'py>(py: Python<'py>, params: &PyNeuronParams) -> PyResult<Bound<'py, PyDict>> {
    let r = analysis::stability(&params.inner);
    let d = PyDict::new(py);
    d.set_item(
        "eigenvalues",
        vec![(r.lambda1.re, r.lambda1.im), (r.lambda2.re, r.lambda2.im)],
    )?;
    d.set_item("spectral_radius", r.spectral_radius)?;
    d.set_item("verdict", r.verdict.as_str())?;
    Ok(d)
}

/// `{"dendrite": (num, den), "soma": (num, den)}` in powers of z^-1.
#[pyfunction]
fn transfer_functions<'py>(py: Python<'py>, params: &PyNeuronParams) -> PyResult<Bound<'py, PyDict>> {
    let (h_d, h_s) = analysis::transfer_functions(&params.inner);
    let d = PyDict::new(py);
    d.set_item("dendrite", (h_d.num.to_vec(), h_d.den.to_vec()))?;
    d.set_item("soma", (h_s.num.to_vec(), h_s.den.to_vec()))?;
    Ok(d)
}

/// `(mag_d, phase_d, mag_s, phase_s)` at `omega` in [0, pi].
#[pyfunction]
fn frequency_response(params: &PyNeuronParams, omega: f64) -> PyResult<(f64, f64, f64, f64)> {
    let (h_d, h_s) = analysis::transfer_functions(&params.inner);
    let d = h_d.evaluate(omega).map_err(err)?;
    let s = h_s.evaluate(omega).map_err(err)?;
    Ok((d.magnitude, d.phase, s.magnitude, s.phase))
}

/// First `n` terms of the dendritic and somatic impulse responses.
#[pyfunction]
fn impulse_response(params: &PyNeuronParams, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (h_d, h_s) = analysis::transfer_functions(&params.inner);
    (h_d.impulse_response(n), h_s.impulse_response(n))
}

/// `[(beta_product, spectral_radius, verdict), ...]`
#[pyfunction]
fn sweep_stability_region(alpha1: f64, alpha2: f64, beta_products: Vec<f64>) -> PyResult<Vec<(f64, f64, String)>> {
    let rows = analysis::sweep_stability_region(alpha1, alpha2, &beta_products).map_err(err)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.beta_product, r.spectral_radius, r.verdict.as_str().to_string()))
        .collect())
}

/// The two-tone stimulus as one current value per step.
#[pyfunction]
#[pyo3(signature = (amp_low=3.0, freq_low=0.5, amp_high=5.0, freq_high=4.0, sample_rate=100.0, duration=10.0))]
fn mixed_stimulus(
    amp_low: f64,
    freq_low: f64,
    amp_high: f64,
    freq_high: f64,
    sample_rate: f64,
    duration: f64,
) -> PyResult<Vec<f64>> {
    let s = tasks::MixedStimulus {
        amp_low,
        freq_low,
        amp_high,
        freq_high,
        sample_rate,
        duration,
    };
    Ok(tasks::generate_stimulus(&s).map_err(err)?.column(0))
}

/// One-sided power spectrum `(frequency, power)` averaged over columns.
#[pyfunction]
fn power_spectrum(trace: Vec<Vec<f64>>, sample_rate: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let s = tasks::spectrum(&frame(trace)?, sample_rate).map_err(err)?;
    Ok((s.frequency, s.power))
}

/// Dominant dendrite/soma frequencies of TS-LIF (frequency split) and TC-LIF
/// under the default two-tone stimulus.
#[pyfunction]
fn decomposition_demo<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
    let r = tasks::decomposition_demo(
        &tslif_core::NeuronParams::frequency_split(),
        &TwoCompartmentParams::tc_lif(),
        &tasks::MixedStimulus::default(),
    )
    .map_err(err)?;
    let d = PyDict::new(py);
    for m in &r.models {
        let e = PyDict::new(py);
        e.set_item("dendrite_hz", m.dendrite_hz)?;
        e.set_item("soma_hz", m.soma_hz)?;
        e.set_item("diverged", m.diverged)?;
        e.set_item("spike_rate", m.spike_rate)?;
        d.set_item(&m.model, e)?;
    }
    Ok(d)
}

/// Relative squared error over rows of predictions and truths.
#[pyfunction]
fn rse(pred: Vec<Vec<f64>>, truth: Vec<Vec<f64>>) -> PyResult<f64> {
    tasks::rse(&frame(pred)?, &frame(truth)?).map_err(err)
}

/// Coefficient of determination averaged over columns.
#[pyfunction]
fn r2(pred: Vec<Vec<f64>>, truth: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(tasks::r2(&frame(pred)?, &frame(truth)?).map_err(err)?.value)
}

/// Energy in mJ of one layer of `flops` operations.
#[pyfunction]
#[pyo3(signature = (flops, spiking=false, timesteps=1.0, rate=0.0))]
fn energy_mj(flops: f64, spiking: bool, timesteps: f64, rate: f64) -> PyResult<f64> {
    let model = tasks::EnergyModel::single(flops, timesteps, rate);
    Ok(tasks::energy_estimate(&model, spiking).map_err(err)?.total_mj)
}

/// Delayed XOR grid; returns `[(delay, seed, neuron, accuracy), ...]`.
#[pyfunction]
#[pyo3(signature = (delays, seeds, neurons, iterations=None, eval_episodes=None, jobs=1))]
fn xor_benchmark(
    py: Python<'_>,
    delays: Vec<usize>,
    seeds: Vec<u64>,
    neurons: Vec<String>,
    iterations: Option<usize>,
    eval_episodes: Option<usize>,
    jobs: usize,
) -> PyResult<Vec<(usize, u64, String, f64)>> {
    let mut cfg = xor::XorConfig::default();
    if let Some(n) = iterations {
        cfg.iterations = n;
    }
    if let Some(n) = eval_episodes {
        cfg.eval_episodes = n;
    }
    let kinds = neurons
        .iter()
        .map(|n| n.parse::<NeuronKind>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let rows = py
        .detach(|| xor::xor_benchmark(&cfg, &delays, &seeds, &kinds, jobs))
        .map_err(err)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.delay, r.seed, r.neuron.as_str().to_string(), r.accuracy))
        .collect())
}

/// Trains the spiking forecaster on synthetic sinusoids per seed and scores
/// the test split at each missing ratio: `[(ratio, seed, r2, rse), ...]`.
#[pyfunction]
#[pyo3(signature = (ratios, seeds, epochs=None))]
fn robustness_sweep(
    py: Python<'_>,
    ratios: Vec<f64>,
    seeds: Vec<u64>,
    epochs: Option<usize>,
) -> PyResult<Vec<(f64, u64, f64, f64)>> {
    let mut cfg = forecast::ForecastConfig::default();
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    let rows = py
        .detach(|| forecast::robustness_sweep(&cfg, &ratios, &seeds))
        .map_err(err)?;
    Ok(rows.into_iter().map(|r| (r.ratio, r.seed, r.r2, r.rse)).collect())
}

#[pymodule]
fn tslif(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNeuronParams>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_tclif, m)?)?;
    m.add_function(wrap_pyfunction!(stability, m)?)?;
    m.add_function(wrap_pyfunction!(transfer_functions, m)?)?;
    m.add_function(wrap_pyfunction!(frequency_response, m)?)?;
    m.add_function(wrap_pyfunction!(impulse_response, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_stability_region, m)?)?;
    m.add_function(wrap_pyfunction!(mixed_stimulus, m)?)?;
    m.add_function(wrap_pyfunction!(power_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(decomposition_demo, m)?)?;
    m.add_function(wrap_pyfunction!(rse, m)?)?;
    m.add_function(wrap_pyfunction!(r2, m)?)?;
    m.add_function(wrap_pyfunction!(energy_mj, m)?)?;
    m.add_function(wrap_pyfunction!(xor_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(robustness_sweep, m)?)?;
    Ok(())
}
