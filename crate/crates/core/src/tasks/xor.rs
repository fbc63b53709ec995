use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_step, Loss};
use crate::autodiff::optim::Adam;
use crate::autodiff::SurrogateSpec;
use crate::error::{Error, Result};
use crate::network::{mlp_backbone, LayerStack, NeuronConfig, NeuronKind};

/// Episode encoding and training budget of the delayed XOR task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XorConfig {
    pub channels: usize,
    pub hidden: usize,
    /// Steps per input block.
    pub block: usize,
    pub p_high: f64,
    pub p_low: f64,
    pub p_noise: f64,
    pub iterations: usize,
    pub batch: usize,
    pub lr: f64,
    pub eval_episodes: usize,
    pub surrogate: SurrogateSpec,
}

impl Default for XorConfig {
    fn default() -> Self {
        Self {
            channels: 20,
            hidden: 20,
            block: 10,
            p_high: 0.8,
            p_low: 0.2,
            p_noise: 0.05,
            iterations: 2500,
            batch: 32,
            lr: 5e-3,
            eval_episodes: 1000,
            surrogate: SurrogateSpec {
                width: 0.5,
                ..SurrogateSpec::default()
            },
        }
    }
}

impl XorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_high", self.p_high), ("p_low", self.p_low), ("p_noise", self.p_noise)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.channels == 0 || self.hidden == 0 || self.block == 0 || self.batch == 0 {
            return Err(Error::InvalidParameter("xor sizes must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidParameter(format!("lr must be positive, got {}", self.lr)));
        }
        Ok(())
    }

    pub fn steps(&self, delay: usize) -> usize {
        2 * self.block + delay
    }
}

/// A batch of episodes laid out `[steps, batch, channels]` with 0/1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct XorBatch {
    pub steps: usize,
    pub batch: usize,
    pub inputs: Vec<f64>,
    pub labels: Vec<f64>,
    pub bits: Vec<(bool, bool)>,
}

/// First block, `delay` noise steps, second block. Each block carries one
/// rate-coded bit on every channel.
pub fn generate_batch<R: Rng>(cfg: &XorConfig, delay: usize, batch: usize, rng: &mut R) -> XorBatch {
    let steps = cfg.steps(delay);
    let c = cfg.channels;
    let mut inputs = vec![0.0; steps * batch * c];
    let mut labels = Vec::with_capacity(batch);
    let mut bits = Vec::with_capacity(batch);
    for b in 0..batch {
        let (x1, x2) = (rng.random_bool(0.5), rng.random_bool(0.5));
        for t in 0..steps {
            let p = if t < cfg.block {
                if x1 { cfg.p_high } else { cfg.p_low }
            } else if t < cfg.block + delay {
                cfg.p_noise
            } else if x2 {
                cfg.p_high
            } else {
                cfg.p_low
            };
            for ch in 0..c {
                if rng.random_bool(p) {
                    inputs[(t * batch + b) * c + ch] = 1.0;
                }
            }
        }
        labels.push(f64::from(u8::from(x1 != x2)));
        bits.push((x1, x2));
    }
    XorBatch {
        steps,
        batch,
        inputs,
        labels,
        bits,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XorRow {
    pub delay: usize,
    pub seed: u64,
    pub neuron: NeuronKind,
    pub accuracy: f64,
    pub diverged: bool,
}

/// Neuron template for each benchmark arm. The LIF arm is a vanilla LIF
/// with a fixed decay.
pub fn xor_neuron(cfg: &XorConfig, kind: NeuronKind) -> NeuronConfig {
    let mut n = NeuronConfig::new(kind, cfg.hidden);
    n.surrogate = cfg.surrogate;
    n
}

fn stream(seed: u64, delay: usize, salt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((delay as u64) << 8 | salt);
    rng
}

/// Fraction of correctly classified episodes.
pub fn accuracy(stack: &LayerStack, cfg: &XorConfig, delay: usize, episodes: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let chunk = 250;
    let mut correct = 0usize;
    let mut left = episodes;
    while left > 0 {
        let n = left.min(chunk);
        let b = generate_batch(cfg, delay, n, rng);
        let (logits, _) = stack.predict(&b.inputs, b.steps, n, cfg.channels)?;
        correct += logits
            .data()
            .iter()
            .zip(&b.labels)
            .filter(|(z, y)| (**z > 0.0) == (**y == 1.0))
            .count();
        left -= n;
    }
    Ok(correct as f64 / episodes.max(1) as f64)
}

/// Trains one (delay, seed, neuron) cell and evaluates on fresh episodes.
pub fn train_cell(cfg: &XorConfig, delay: usize, seed: u64, kind: NeuronKind) -> Result<(LayerStack, XorRow)> {
    cfg.validate()?;
    let mut stack = mlp_backbone([cfg.channels, cfg.hidden, 1], xor_neuron(cfg, kind), seed)?;
    let mut data_rng = stream(seed, delay, 1);
    let mut opt = Adam::new(cfg.lr);
    let mut diverged = false;
    for _ in 0..cfg.iterations {
        let b = generate_batch(cfg, delay, cfg.batch, &mut data_rng);
        if train_step(
            &mut stack,
            &mut opt,
            &b.inputs,
            b.steps,
            b.batch,
            cfg.channels,
            &b.labels,
            Loss::BceWithLogits,
        )
        .is_err()
        {
            diverged = true;
            break;
        }
    }
    let acc = if diverged {
        f64::NAN
    } else {
        accuracy(&stack, cfg, delay, cfg.eval_episodes, &mut stream(seed, delay, 2))?
    };
    Ok((
        stack,
        XorRow {
            delay,
            seed,
            neuron: kind,
            accuracy: acc,
            diverged,
        },
    ))
}

/// Every (delay, seed, neuron) cell, in that nesting order. Cells run on up to
/// `jobs` threads; results do not depend on `jobs`.
pub fn xor_benchmark(
    cfg: &XorConfig,
    delays: &[usize],
    seeds: &[u64],
    kinds: &[NeuronKind],
    jobs: usize,
) -> Result<Vec<XorRow>> {
    cfg.validate()?;
    let cells: Vec<(usize, u64, NeuronKind)> = delays
        .iter()
        .flat_map(|&d| seeds.iter().flat_map(move |&s| kinds.iter().map(move |&k| (d, s, k))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|&(d, s, k)| train_cell(cfg, d, s, k).map(|(_, row)| row))
            .collect()
    })
}

/// Mean accuracy per (delay, neuron) over seeds, skipping diverged cells.
pub fn mean_accuracy(rows: &[XorRow], delay: usize, kind: NeuronKind) -> Option<f64> {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.delay == delay && r.neuron == kind && !r.diverged)
        .map(|r| r.accuracy)
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}
