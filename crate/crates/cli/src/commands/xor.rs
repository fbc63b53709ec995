use clap::Args;
use serde::Serialize;

use tslif_core::autodiff::SurrogateSpec;
use tslif_core::network::NeuronKind;
use tslif_core::tasks::xor::{mean_accuracy, xor_benchmark, XorConfig};

use crate::config::{as_str, as_u64};
use crate::{CliError, Run};

#[derive(Debug, Args)]
pub struct XorArgs {
    /// Delay lengths in steps, e.g. 10,20.
    #[arg(long, value_delimiter = ',')]
    delays: Option<Vec<usize>>,
    /// Seeds per cell, e.g. 0,1,2 (default: --seed).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Neuron kinds, e.g. lif,tslif.
    #[arg(long, value_delimiter = ',')]
    neurons: Option<Vec<NeuronKind>>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    surrogate_width: Option<f64>,
}

#[derive(Serialize)]
struct MeanRow {
    delay: usize,
    neuron: &'static str,
    mean_accuracy: Option<f64>,
}

#[derive(Serialize)]
struct XorSummary {
    config: XorConfig,
    means: Vec<MeanRow>,
    diverged_cells: usize,
}

pub fn run(run: &Run, a: XorArgs) -> Result<(), CliError> {
    let s = &run.settings;
    let delays = s
        .list("delays", a.delays.map(|d| d.into_iter().map(|x| x as u64).collect()), as_u64)?
        .map(|v| v.into_iter().map(|x| x as usize).collect::<Vec<_>>())
        .unwrap_or_else(|| vec![10, 20]);
    let seeds = s.list("seeds", a.seeds, as_u64)?.unwrap_or_else(|| vec![run.seed]);
    let kinds = match s.list("neurons", a.neurons.map(|k| k.iter().map(|k| k.as_str().to_string()).collect()), as_str)? {
        Some(names) => names
            .iter()
            .map(|n| n.parse::<NeuronKind>().map_err(|e| CliError::Usage(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![NeuronKind::Lif, NeuronKind::Tslif],
    };
    let mut cfg = XorConfig::default();
    for (key, flag, slot) in [
        ("iterations", a.iterations, &mut cfg.iterations),
        ("batch", a.batch, &mut cfg.batch),
        ("eval_episodes", a.eval_episodes, &mut cfg.eval_episodes),
        ("hidden", a.hidden, &mut cfg.hidden),
        ("channels", None, &mut cfg.channels),
        ("block", None, &mut cfg.block),
    ] {
        if let Some(v) = s.usize(key, flag)? {
            *slot = v;
        }
    }
    for (key, flag, slot) in [
        ("lr", a.lr, &mut cfg.lr),
        ("p_high", None, &mut cfg.p_high),
        ("p_low", None, &mut cfg.p_low),
        ("p_noise", None, &mut cfg.p_noise),
    ] {
        if let Some(v) = s.f64(key, flag)? {
            *slot = v;
        }
    }
    if let Some(w) = s.f64("surrogate_width", a.surrogate_width)? {
        cfg.surrogate = SurrogateSpec::new(cfg.surrogate.kind, w).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    s.finish()?;
    if delays.is_empty() || seeds.is_empty() || kinds.is_empty() {
        return Err(CliError::Usage("delays, seeds and neurons must be non-empty".into()));
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let rows = xor_benchmark(&cfg, &delays, &seeds, &kinds, run.jobs)?;
    let mut csv = String::from("delay,seed,neuron,accuracy\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}\n", r.delay, r.seed, r.neuron.as_str(), r.accuracy));
    }
    run.out.write("xor.csv", csv)?;
    let means: Vec<MeanRow> = delays
        .iter()
        .flat_map(|&d| {
            let rows = &rows;
            kinds.iter().map(move |&k| MeanRow {
                delay: d,
                neuron: k.as_str(),
                mean_accuracy: mean_accuracy(rows, d, k),
            })
        })
        .collect();
    for m in &means {
        match m.mean_accuracy {
            Some(acc) => println!("delay {:>3} {:>6}: {acc:.3}", m.delay, m.neuron),
            None => println!("delay {:>3} {:>6}: all cells diverged", m.delay, m.neuron),
        }
    }
    let summary = XorSummary {
        config: cfg,
        means,
        diverged_cells: rows.iter().filter(|r| r.diverged).count(),
    };
    run.out.write_json("xor_summary.json", &summary)?;
    Ok(())
}
