use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use tslif_core::dataio::{load_csv, split_and_window, DatasetSpec, Splits};
use tslif_core::network::{load_checkpoint, save_checkpoint};
use tslif_core::tasks::forecast::{evaluate_forecaster, synthetic_sinusoids, train_forecaster, ForecastConfig, ForecastScore};
use tslif_core::SeriesFrame;

use crate::config::as_f64;
use crate::{CliError, Run};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// CSV with one column per channel; synthetic sinusoids when absent.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    /// Label written next to scores.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    context: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    segments: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint manifest (default: model.json in the output directory).
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
    /// Missing-value ratios in [0, 1), e.g. 0,0.2,0.4.
    #[arg(long, value_delimiter = ',')]
    mask_ratios: Option<Vec<f64>>,
    /// Split to score: test or val.
    #[arg(long)]
    split: Option<String>,
}

/// Everything needed to rebuild the data a checkpoint was trained on.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunRecord {
    name: String,
    seed: u64,
    data: Option<String>,
    delimiter: char,
    header: bool,
    ratios: [f64; 3],
    config: ForecastConfig,
}

impl RunRecord {
    fn splits(&self) -> Result<Splits, CliError> {
        let frame: SeriesFrame = match &self.data {
            Some(path) => {
                let mut spec = DatasetSpec::new(path, self.config.context, self.config.horizon);
                spec.delimiter = self.delimiter as u8;
                spec.has_header = self.header;
                load_csv(&spec).map_err(|e| CliError::Usage(e.to_string()))?
            }
            None => synthetic_sinusoids(self.config.rows, self.config.channels, self.config.noise, self.seed),
        };
        let mut spec = DatasetSpec::new(
            self.data.as_deref().unwrap_or("synthetic"),
            self.config.context,
            self.config.horizon,
        );
        spec.ratios = self.ratios;
        split_and_window(&frame, &spec).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Serialize)]
struct TrainReport {
    name: String,
    seed: u64,
    windows: [usize; 3],
    loss: Vec<f64>,
    val: ForecastScore,
}

fn record(run: &Run, a: &TrainArgs) -> Result<RunRecord, CliError> {
    let s = &run.settings;
    let mut cfg = ForecastConfig::default();
    for (key, flag, slot) in [
        ("context", a.context, &mut cfg.context),
        ("horizon", a.horizon, &mut cfg.horizon),
        ("epochs", a.epochs, &mut cfg.epochs),
        ("batch", a.batch, &mut cfg.batch),
        ("segments", a.segments, &mut cfg.segments),
        ("rows", None, &mut cfg.rows),
        ("channels", None, &mut cfg.channels),
        ("encoder_channels", None, &mut cfg.encoder_channels),
        ("kernel", None, &mut cfg.kernel),
    ] {
        if let Some(v) = s.usize(key, flag)? {
            *slot = v;
        }
    }
    for (key, flag, slot) in [("lr", a.lr, &mut cfg.lr), ("noise", None, &mut cfg.noise)] {
        if let Some(v) = s.f64(key, flag)? {
            *slot = v;
        }
    }
    let data = s.string("data", a.data.as_ref().map(|p| p.display().to_string()))?;
    let delimiter = match s.string("delimiter", None)? {
        None => ',',
        Some(d) if d.len() == 1 && d.is_ascii() => d.chars().next().unwrap_or(','),
        Some(d) => return Err(CliError::Usage(format!("delimiter must be one ASCII character, got '{d}'"))),
    };
    let header = s.bool("header", None)?.unwrap_or(true);
    let ratios = match s.list("ratios", None, as_f64)? {
        None => DatasetSpec::new("", 1, 1).ratios,
        Some(r) if r.len() == 3 => [r[0], r[1], r[2]],
        Some(r) => return Err(CliError::Usage(format!("ratios needs 3 values, got {}", r.len()))),
    };
    let name = s.string("name", a.name.clone())?.unwrap_or_else(|| "tslif".into());
    Ok(RunRecord {
        name,
        seed: run.seed,
        data,
        delimiter,
        header,
        ratios,
        config: cfg,
    })
}

pub fn train(run: &Run, a: TrainArgs) -> Result<(), CliError> {
    let mut rec = record(run, &a)?;
    run.settings.finish()?;
    rec.config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let splits = rec.splits()?;
    // a CSV decides the channel count
    rec.config.channels = splits.train.channels;

    let (stack, loss) = train_forecaster(&splits, &rec.config, rec.seed)?;
    let val = evaluate_forecaster(&stack, &splits.val, 0.0, rec.seed)?;
    save_checkpoint(&stack, &run.out.prepare("model.json")?)?;
    splits.stats.save(&run.out.prepare("norm.json")?)?;
    run.out.write_json("run.json", &rec)?;
    run.out.write_json(
        "train.json",
        &TrainReport {
            name: rec.name.clone(),
            seed: rec.seed,
            windows: [splits.train.len(), splits.val.len(), splits.test.len()],
            loss: loss.clone(),
            val,
        },
    )?;
    println!(
        "{}: final loss {}, validation R2 {}, RSE {}",
        rec.name,
        loss.last().copied().unwrap_or(f64::NAN),
        val.r2,
        val.rse
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalRow {
    ratio: f64,
    #[serde(flatten)]
    score: ForecastScore,
}

#[derive(Serialize)]
struct EvalReport {
    name: String,
    split: String,
    seed: u64,
    scores: Vec<EvalRow>,
}

fn read_record(model: &Path) -> Result<RunRecord, CliError> {
    let path = model.with_file_name("run.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn eval(run: &Run, a: EvalArgs) -> Result<(), CliError> {
    let s = &run.settings;
    let model = match s.string("model", a.model.as_ref().map(|p| p.display().to_string()))? {
        Some(p) => PathBuf::from(p),
        None => run.out.path("model.json")?,
    };
    let ratios = s.list("mask_ratios", a.mask_ratios, as_f64)?.unwrap_or_else(|| vec![0.0]);
    let split = s.string("split", a.split)?.unwrap_or_else(|| "test".into());
    s.finish()?;
    if ratios.is_empty() || ratios.iter().any(|r| !(0.0..1.0).contains(r)) {
        return Err(CliError::Usage(format!("mask ratios must lie in [0, 1), got {ratios:?}")));
    }
    if !model.is_file() {
        return Err(CliError::Usage(format!("model checkpoint {} not found", model.display())));
    }
    let rec = read_record(&model)?;
    let stack = load_checkpoint(&model)?;
    let splits = rec.splits()?;
    let set = match split.as_str() {
        "test" => &splits.test,
        "val" => &splits.val,
        other => return Err(CliError::Usage(format!("split must be test or val, got '{other}'"))),
    };

    let mut scores = Vec::with_capacity(ratios.len());
    let mut csv = String::from("ratio,model,r2,rse\n");
    for &ratio in &ratios {
        let score = evaluate_forecaster(&stack, set, ratio, run.seed)?;
        csv.push_str(&format!("{ratio},{},{},{}\n", rec.name, score.r2, score.rse));
        println!("{} ratio {ratio}: R2 {}, RSE {}", rec.name, score.r2, score.rse);
        scores.push(EvalRow { ratio, score });
    }
    run.out.write("robustness.csv", csv)?;
    run.out.write_json(
        "eval.json",
        &EvalReport {
            name: rec.name,
            split,
            seed: run.seed,
            scores,
        },
    )?;
    Ok(())
}
