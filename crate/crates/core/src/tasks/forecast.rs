use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::masking::mask_indices;
use super::metrics::{r2, rse};
use super::{train_step, Loss};
use crate::autodiff::optim::Adam;
use crate::dataio::{split_and_window, DatasetSpec, Splits, WindowSet};
use crate::error::{Error, Result};
use crate::frame::SeriesFrame;
use crate::network::{forecast_backbone, LayerStack, SpikeEncoderConfig};

/// Sum-of-sines channels with per-channel periods and phases plus light noise.
pub fn synthetic_sinusoids(rows: usize, channels: usize, noise: f64, seed: u64) -> SeriesFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps: Vec<[(f64, f64, f64); 2]> = (0..channels)
        .map(|c| {
            let p1 = 12.0 + 5.0 * c as f64;
            let p2 = 5.0 + 1.5 * c as f64;
            [
                (1.0, p1, rng.random_range(0.0..2.0 * PI)),
                (0.5, p2, rng.random_range(0.0..2.0 * PI)),
            ]
        })
        .collect();
    let mut data = Vec::with_capacity(rows * channels);
    for t in 0..rows {
        for comp in &comps {
            let clean: f64 = comp.iter().map(|(a, p, ph)| a * (2.0 * PI * t as f64 / p + ph).sin()).sum();
            data.push(clean + noise * rng.random_range(-1.0..1.0));
        }
    }
    SeriesFrame::new(SeriesFrame::synth_names(channels), rows, data).expect("sized")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub rows: usize,
    pub channels: usize,
    pub noise: f64,
    pub context: usize,
    pub horizon: usize,
    pub encoder_channels: usize,
    pub kernel: usize,
    pub segments: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            rows: 600,
            channels: 2,
            noise: 0.05,
            context: 24,
            horizon: 4,
            encoder_channels: 16,
            kernel: 3,
            segments: 1,
            epochs: 30,
            batch: 32,
            lr: 3e-3,
        }
    }
}

impl ForecastConfig {
    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec::new("synthetic", self.context, self.horizon)
    }

    pub fn encoder(&self) -> SpikeEncoderConfig {
        SpikeEncoderConfig::new(self.channels, self.encoder_channels, self.kernel, self.segments)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 || !(self.lr > 0.0) {
            return Err(Error::InvalidParameter("epochs, batch and lr must be positive".into()));
        }
        self.encoder().validate()?;
        self.dataset_spec().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForecastScore {
    pub r2: f64,
    pub rse: f64,
    pub excluded: usize,
}

/// Trains on the train split with minibatch Adam, reshuffling every epoch.
/// Returns the model and the mean loss of each epoch.
pub fn train_forecaster(splits: &Splits, cfg: &ForecastConfig, seed: u64) -> Result<(LayerStack, Vec<f64>)> {
    cfg.validate()?;
    let train = &splits.train;
    if train.is_empty() {
        return Err(Error::EmptyInput("training windows"));
    }
    let mut stack = forecast_backbone(cfg.encoder(), cfg.context, cfg.horizon, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut opt = Adam::new(cfg.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut n) = (0.0, 0);
        for idx in order.chunks(cfg.batch) {
            let x = train.batch_inputs(idx);
            let y = train.batch_targets(idx);
            total += train_step(
                &mut stack,
                &mut opt,
                &x,
                train.context,
                idx.len(),
                train.channels,
                &y,
                Loss::Mse,
            )?;
            n += 1;
        }
        history.push(total / n as f64);
    }
    Ok((stack, history))
}

/// Predictions for every window, one row per sample. Inputs are masked
/// first when `mask_ratio > 0`, each sample with its own nested mask.
pub fn predict_windows(stack: &LayerStack, set: &WindowSet, mask_ratio: f64, seed: u64) -> Result<SeriesFrame> {
    let width = set.horizon * set.channels;
    let mut out = Vec::with_capacity(set.len() * width);
    let cells = set.context * set.channels;
    let all: Vec<usize> = (0..set.len()).collect();
    for idx in all.chunks(256) {
        let mut x = set.batch_inputs(idx);
        if mask_ratio > 0.0 {
            let b = idx.len();
            for (j, &m) in idx.iter().enumerate() {
                for cell in mask_indices(cells, mask_ratio, seed.wrapping_mul(1_000_003).wrapping_add(m as u64))? {
                    let (t, c) = (cell / set.channels, cell % set.channels);
                    x[(t * b + j) * set.channels + c] = 0.0;
                }
            }
        }
        let (y, _) = stack.predict(&x, set.context, idx.len(), set.channels)?;
        out.extend_from_slice(y.data());
    }
    SeriesFrame::new(set.target_frame().names().to_vec(), set.len(), out)
}

/// R² and RSE in normalized space.
pub fn evaluate_forecaster(stack: &LayerStack, set: &WindowSet, mask_ratio: f64, seed: u64) -> Result<ForecastScore> {
    let pred = predict_windows(stack, set, mask_ratio, seed)?;
    let truth = set.target_frame();
    let score = r2(&pred, &truth)?;
    Ok(ForecastScore {
        r2: score.value,
        rse: rse(&pred, &truth)?,
        excluded: score.excluded,
    })
}

/// Synthetic data, windows, and a trained model for one seed.
pub fn synthetic_run(cfg: &ForecastConfig, seed: u64) -> Result<(Splits, LayerStack)> {
    let frame = synthetic_sinusoids(cfg.rows, cfg.channels, cfg.noise, seed);
    let splits = split_and_window(&frame, &cfg.dataset_spec())?;
    let (stack, _) = train_forecaster(&splits, cfg, seed)?;
    Ok((splits, stack))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub ratio: f64,
    pub seed: u64,
    pub r2: f64,
    pub rse: f64,
}

/// Trains once per seed on clean data, then scores the test split at each
/// missing ratio.
pub fn robustness_sweep(cfg: &ForecastConfig, ratios: &[f64], seeds: &[u64]) -> Result<Vec<RobustnessRow>> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let (splits, stack) = synthetic_run(cfg, seed)?;
        for &ratio in ratios {
            let s = evaluate_forecaster(&stack, &splits.test, ratio, seed)?;
            rows.push(RobustnessRow {
                ratio,
                seed,
                r2: s.r2,
                rse: s.rse,
            });
        }
    }
    Ok(rows)
}
