use clap::Args;

use tslif_core::tasks::{energy_estimate, EnergyModel};

use crate::{CliError, Run};

#[derive(Debug, Args)]
pub struct EnergyArgs {
    /// Floating-point operations of one dense inference.
    #[arg(long)]
    flops: Option<f64>,
    /// Price every operation as a multiply-accumulate.
    #[arg(long, conflicts_with = "snn")]
    ann: bool,
    /// Price spike-driven accumulates: flops x timesteps x rate.
    #[arg(long)]
    snn: bool,
    #[arg(long)]
    timesteps: Option<f64>,
    /// Mean firing rate.
    #[arg(long)]
    rate: Option<f64>,
    /// Picojoules per MAC.
    #[arg(long)]
    e_mac: Option<f64>,
    /// Picojoules per accumulate.
    #[arg(long)]
    e_ac: Option<f64>,
}

pub fn run(run: &Run, a: EnergyArgs) -> Result<(), CliError> {
    let s = &run.settings;
    let flops = s
        .f64("flops", a.flops)?
        .ok_or_else(|| CliError::Usage("energy needs --flops".into()))?;
    let mode = s.string(
        "mode",
        if a.ann {
            Some("ann".into())
        } else if a.snn {
            Some("snn".into())
        } else {
            None
        },
    )?;
    let spiking = match mode.as_deref() {
        Some("ann") => false,
        Some("snn") | None => true,
        Some(other) => return Err(CliError::Usage(format!("mode must be ann or snn, got '{other}'"))),
    };
    let timesteps = s.f64("timesteps", a.timesteps)?;
    let rate = s.f64("rate", a.rate)?;
    let e_mac = s.f64("e_mac", a.e_mac)?;
    let e_ac = s.f64("e_ac", a.e_ac)?;
    s.finish()?;

    let (timesteps, rate) = match (spiking, timesteps, rate) {
        (false, t, r) => (t.unwrap_or(1.0), r.unwrap_or(0.0)),
        (true, Some(t), Some(r)) => (t, r),
        (true, _, _) => return Err(CliError::Usage("SNN energy needs --timesteps and --rate".into())),
    };
    let mut model = EnergyModel::single(flops, timesteps, rate);
    if let Some(e) = e_mac {
        model.e_mac = e;
    }
    if let Some(e) = e_ac {
        model.e_ac = e;
    }
    model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let report = energy_estimate(&model, spiking)?;
    run.out.write_json("energy.json", &report)?;
    println!(
        "{} energy: {} mJ",
        if spiking { "SNN" } else { "ANN" },
        report.total_mj
    );
    Ok(())
}
