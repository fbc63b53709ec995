use clap::Args;
use serde::Serialize;
use std::path::PathBuf;

use tslif_core::dataio::parse_csv;
use tslif_core::neuron::{simulate_population, simulate_two_compartment, SimOptions, SpikeMode};
use tslif_core::tasks::decomposition::{compartment_spectra, summarize};
use tslif_core::tasks::{generate_stimulus, MixedStimulus};
use tslif_core::SeriesFrame;

use crate::params::{self, Model, ParamFlags, ParamSummary};
use crate::{CliError, Run};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    params: ParamFlags,
    /// Built-in stimulus; only `a4` (two-tone mixed current) is defined.
    #[arg(long)]
    stimulus: Option<String>,
    /// CSV of input currents, one column per neuron. Replaces the stimulus.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Sample rate in Hz used for spectra (and the stimulus).
    #[arg(long)]
    sample_rate: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    /// Record the linear system: no spikes, no resets.
    #[arg(long)]
    no_spikes: bool,
}

#[derive(Serialize)]
struct Summary {
    params: ParamSummary,
    stimulus: String,
    rows: usize,
    channels: usize,
    sample_rate: f64,
    spiking: bool,
    dendrite_hz: Option<f64>,
    soma_hz: Option<f64>,
    diverged: bool,
    spike_rate: f64,
}

fn stimulus(run: &Run, a: &SimulateArgs) -> Result<(String, SeriesFrame, f64), CliError> {
    let s = &run.settings;
    let mut stim = MixedStimulus::default();
    for (key, slot) in [
        ("amp_low", &mut stim.amp_low),
        ("freq_low", &mut stim.freq_low),
        ("amp_high", &mut stim.amp_high),
        ("freq_high", &mut stim.freq_high),
    ] {
        if let Some(v) = s.f64(key, None)? {
            *slot = v;
        }
    }
    let rate = s.f64("sample_rate", a.sample_rate)?;
    let duration = s.f64("duration", a.duration)?;
    let name = s.string("stimulus", a.stimulus.clone())?;
    let input = s.string("input", a.input.as_ref().map(|p| p.display().to_string()))?;
    match (input, name) {
        (Some(_), Some(_)) => Err(CliError::Usage("--input and --stimulus are exclusive".into())),
        (Some(path), None) => {
            let bytes = std::fs::read(&path).map_err(|e| CliError::Usage(format!("cannot read input {path}: {e}")))?;
            let frame = parse_csv(&bytes, b',', true).map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
            Ok((path, frame, rate.unwrap_or(stim.sample_rate)))
        }
        (None, name) => {
            let name = name.unwrap_or_else(|| "a4".into());
            if name != "a4" {
                return Err(CliError::Usage(format!("unknown stimulus '{name}' (expected a4)")));
            }
            stim.sample_rate = rate.unwrap_or(stim.sample_rate);
            stim.duration = duration.unwrap_or(stim.duration);
            let frame = generate_stimulus(&stim).map_err(|e| CliError::Usage(e.to_string()))?;
            Ok((name, frame, stim.sample_rate))
        }
    }
}

pub fn run(run: &Run, a: SimulateArgs) -> Result<(), CliError> {
    let (preset, model) = params::resolve(&run.settings, &a.params)?;
    let (stim_name, current, rate) = stimulus(run, &a)?;
    let spiking = run.settings.bool("spiking", a.no_spikes.then_some(false))?.unwrap_or(true);
    run.settings.finish()?;

    let opts = SimOptions {
        spiking: if spiking { SpikeMode::Enabled } else { SpikeMode::Disabled },
        ..SimOptions::default()
    };
    let trace = match &model {
        Model::Tslif(p) => simulate_population(p, &current, &opts)?,
        Model::Tclif(p) => simulate_two_compartment(p, &current, &opts)?,
    };
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    run.out.write("trace.csv", csv)?;

    let report = summarize(model.name(), &trace, rate)?;
    if let Some(spec) = compartment_spectra(&trace, rate)? {
        let mut text = String::from("frequency,dendrite,soma\n");
        for i in 0..spec.dendrite.frequency.len() {
            text.push_str(&format!(
                "{},{},{}\n",
                spec.dendrite.frequency[i], spec.dendrite.power[i], spec.soma.power[i]
            ));
        }
        run.out.write("spectrum.csv", text)?;
    }
    let summary = Summary {
        params: model.summary(&preset),
        stimulus: stim_name,
        rows: current.rows(),
        channels: current.channels(),
        sample_rate: rate,
        spiking,
        dendrite_hz: report.dendrite_hz,
        soma_hz: report.soma_hz,
        diverged: report.diverged,
        spike_rate: report.spike_rate,
    };
    run.out.write_json("summary.json", &summary)?;
    match (summary.dendrite_hz, summary.soma_hz) {
        (Some(d), Some(s)) => println!("{}: dendrite {d} Hz, soma {s} Hz", model.name()),
        _ => println!("{}: potentials diverged, spectrum skipped", model.name()),
    }
    Ok(())
}
