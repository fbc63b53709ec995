use serde::Serialize;

use super::spectrum::{spectrum, Spectrum};
use super::stimulus::{generate_stimulus, MixedStimulus};
use crate::error::Result;
use crate::frame::SeriesFrame;
use crate::neuron::{
    simulate_population, simulate_two_compartment, NeuronParams, SimOptions, Trace, TwoCompartmentParams,
};

/// Potentials beyond this magnitude count as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDecomposition {
    pub model: String,
    /// Dominant dendritic frequency in Hz; `None` after divergence.
    pub dendrite_hz: Option<f64>,
    pub soma_hz: Option<f64>,
    pub diverged: bool,
    /// Mean mixed spike output over the run.
    pub spike_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub stimulus: MixedStimulus,
    pub models: Vec<ModelDecomposition>,
}

/// Spectra of both compartment potentials of a recorded trace.
pub struct CompartmentSpectra {
    pub dendrite: Spectrum,
    pub soma: Spectrum,
}

pub fn trace_diverged(frame: &SeriesFrame) -> bool {
    frame.data().iter().any(|x| !x.is_finite() || x.abs() > DIVERGENCE_LIMIT)
}

pub fn compartment_spectra(trace: &Trace, sample_rate: f64) -> Result<Option<CompartmentSpectra>> {
    let (Some(v_d), Some(v_s)) = (&trace.v_d, &trace.v_s) else {
        return Ok(None);
    };
    if trace_diverged(v_d) || trace_diverged(v_s) {
        return Ok(None);
    }
    Ok(Some(CompartmentSpectra {
        dendrite: spectrum(v_d, sample_rate)?,
        soma: spectrum(v_s, sample_rate)?,
    }))
}

/// Dominant frequencies of a trace. The DC bin is excluded: the stimulus has
/// no constant part and any offset comes from the onset transient.
pub fn summarize(model: &str, trace: &Trace, sample_rate: f64) -> Result<ModelDecomposition> {
    let spike_rate = trace
        .s_mix
        .as_ref()
        .map_or(0.0, |s| s.data().iter().sum::<f64>() / s.data().len() as f64);
    let spectra = compartment_spectra(trace, sample_rate)?;
    Ok(ModelDecomposition {
        model: model.to_string(),
        dendrite_hz: spectra.as_ref().map(|s| s.dendrite.dominant(true)),
        soma_hz: spectra.as_ref().map(|s| s.soma.dominant(true)),
        diverged: spectra.is_none(),
        spike_rate,
    })
}

/// Drives both models with the mixed stimulus (spiking enabled) and reports
/// the dominant frequency of each compartment.
pub fn decomposition_demo(
    tslif: &NeuronParams,
    tclif: &TwoCompartmentParams,
    s: &MixedStimulus,
) -> Result<DecompositionReport> {
    let current = generate_stimulus(s)?;
    let opts = SimOptions::default();
    let ts = simulate_population(tslif, &current, &opts)?;
    let tc = simulate_two_compartment(tclif, &current, &opts)?;
    Ok(DecompositionReport {
        stimulus: *s,
        models: vec![
            summarize("tslif", &ts, s.sample_rate)?,
            summarize("tclif", &tc, s.sample_rate)?,
        ],
    })
}
