use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{NeuronConfig, NeuronLayer, TsLifInit};
use super::{Binding, Mode, ParamId, ParamRegistry};
use crate::autodiff::{SurrogateSpec, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::frame::SeriesFrame;

fn default_segments() -> usize {
    1
}

fn default_momentum() -> f64 {
    0.1
}

fn default_eps() -> f64 {
    1e-5
}

/// Convolutional spike encoder: per-segment kernel banks, shared batch
/// normalization, and a TS-LIF population over `T * segments` SNN steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEncoderConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    /// Variance floor of the normalization.
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub surrogate: SurrogateSpec,
    #[serde(default)]
    pub tslif: TsLifInit,
}

impl SpikeEncoderConfig {
    pub fn new(in_channels: usize, out_channels: usize, kernel_size: usize, segments: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_size,
            segments,
            momentum: default_momentum(),
            eps: default_eps(),
            surrogate: SurrogateSpec::default(),
            tslif: TsLifInit::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.in_channels == 0 || self.out_channels == 0 {
            return bad("encoder channel counts must be positive".into());
        }
        if self.kernel_size == 0 {
            return bad("kernel_size must be at least 1".into());
        }
        if self.segments == 0 {
            return bad("segments must be at least 1".into());
        }
        if !(self.momentum > 0.0 && self.momentum <= 1.0) {
            return bad(format!("momentum must be in (0, 1], got {}", self.momentum));
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        Ok(())
    }

    /// SNN steps produced from `t` input steps.
    pub fn snn_steps(&self, t: usize) -> usize {
        t * self.segments
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeEncoder {
    pub config: SpikeEncoderConfig,
    kernels: Vec<ParamId>,
    biases: Vec<ParamId>,
    scale: ParamId,
    shift: ParamId,
    running_mean: ParamId,
    running_var: ParamId,
    neuron: NeuronLayer,
}

/// Encoder spikes in SNN order (step-major, segment-minor) plus pending
/// normalization statistics.
pub struct EncoderOutput {
    pub spikes: Vec<Var>,
    pub stats: Vec<(ParamId, Tensor)>,
}

impl SpikeEncoder {
    pub fn new<R: Rng>(
        config: SpikeEncoderConfig,
        registry: &mut ParamRegistry,
        prefix: &str,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let fan_in = config.kernel_size * config.in_channels;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let c_out = config.out_channels;
        let mut kernels = Vec::with_capacity(config.segments);
        let mut biases = Vec::with_capacity(config.segments);
        for s in 0..config.segments {
            let w = (0..fan_in * c_out).map(|_| rng.random_range(-bound..bound)).collect();
            kernels.push(registry.add(
                format!("{prefix}.kernel{s}"),
                Tensor::matrix(fan_in, c_out, w)?,
                true,
            ));
            biases.push(registry.add(format!("{prefix}.bias{s}"), Tensor::zeros(&[c_out]), true));
        }
        let scale = registry.add(format!("{prefix}.bn_scale"), Tensor::full(&[c_out], 1.0), true);
        let shift = registry.add(format!("{prefix}.bn_shift"), Tensor::zeros(&[c_out]), true);
        let running_mean = registry.add(format!("{prefix}.running_mean"), Tensor::zeros(&[c_out]), false);
        let running_var = registry.add(format!("{prefix}.running_var"), Tensor::full(&[c_out], 1.0), false);
        let mut ncfg = NeuronConfig::tslif(c_out);
        ncfg.surrogate = config.surrogate;
        ncfg.tslif = config.tslif;
        let neuron = NeuronLayer::new(ncfg, registry, &format!("{prefix}.neuron"))?;
        Ok(Self {
            config,
            kernels,
            biases,
            scale,
            shift,
            running_mean,
            running_var,
            neuron,
        })
    }

    pub fn kernel(&self, segment: usize) -> ParamId {
        self.kernels[segment]
    }

    pub fn bias(&self, segment: usize) -> ParamId {
        self.biases[segment]
    }

    pub fn running_mean(&self) -> ParamId {
        self.running_mean
    }

    pub fn running_var(&self) -> ParamId {
        self.running_var
    }

    pub fn neuron(&self) -> &NeuronLayer {
        &self.neuron
    }

    /// `inputs` holds one `[batch, in_channels]` variable per time step.
    pub fn forward(&self, tape: &mut Tape, binding: &Binding, inputs: &[Var], mode: Mode) -> Result<EncoderOutput> {
        let cfg = &self.config;
        let t_len = inputs.len();
        if t_len == 0 {
            return Err(Error::EmptyInput("encoder inputs"));
        }
        if t_len < cfg.kernel_size {
            return Err(Error::SequenceTooShort {
                requested: cfg.kernel_size,
                available: t_len,
            });
        }
        let batch = tape.shape(inputs[0])[0];
        for &x in inputs {
            if tape.shape(x) != [batch, cfg.in_channels] {
                return Err(Error::ShapeMismatch {
                    op: "encoder input",
                    lhs: vec![batch, cfg.in_channels],
                    rhs: tape.shape(x).to_vec(),
                });
            }
        }

        // Same padding: output step t sees inputs t - pad .. t - pad + K - 1.
        let pad = (cfg.kernel_size - 1) / 2;
        let zero = tape.constant(Tensor::zeros(&[batch, cfg.in_channels]));
        let mut windows = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let parts: Vec<Var> = (0..cfg.kernel_size)
                .map(|k| {
                    let src = t as isize + k as isize - pad as isize;
                    if src < 0 || src >= t_len as isize {
                        zero
                    } else {
                        inputs[src as usize]
                    }
                })
                .collect();
            windows.push(if parts.len() == 1 { parts[0] } else { tape.concat_cols(&parts)? });
        }
        let mut conv = Vec::with_capacity(t_len * cfg.segments);
        for &w in &windows {
            for s in 0..cfg.segments {
                let y = tape.matmul(w, binding.var(self.kernels[s]))?;
                conv.push(tape.add(y, binding.var(self.biases[s]))?);
            }
        }

        let c_out = cfg.out_channels;
        let mut stats = Vec::new();
        let (mean, var) = match mode {
            Mode::Train => {
                let n = (conv.len() * batch) as f64;
                let mut mean = vec![0.0; c_out];
                for &y in &conv {
                    for row in tape.value(y).data().chunks(c_out) {
                        for (m, v) in mean.iter_mut().zip(row) {
                            *m += v;
                        }
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                let mut var = vec![0.0; c_out];
                for &y in &conv {
                    for row in tape.value(y).data().chunks(c_out) {
                        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                            *s += (v - m) * (v - m);
                        }
                    }
                }
                var.iter_mut().for_each(|s| *s /= n);
                let mom = cfg.momentum;
                let rm = running_update(tape, binding, self.running_mean, &mean, mom);
                let rv = running_update(tape, binding, self.running_var, &var, mom);
                stats.push((self.running_mean, rm));
                stats.push((self.running_var, rv));
                (mean, var)
            }
            Mode::Eval => (
                tape.value(binding.var(self.running_mean)).data().to_vec(),
                tape.value(binding.var(self.running_var)).data().to_vec(),
            ),
        };
        // Statistics enter as constants; gradients flow through the affine part.
        let inv: Vec<f64> = var.iter().map(|v| 1.0 / (v.max(0.0) + cfg.eps).sqrt()).collect();
        let offset: Vec<f64> = mean.iter().zip(&inv).map(|(m, i)| -m * i).collect();
        let inv = tape.constant(Tensor::vector(inv));
        let offset = tape.constant(Tensor::vector(offset));
        let scale = binding.var(self.scale);
        let shift = binding.var(self.shift);
        let mut currents = Vec::with_capacity(conv.len());
        for y in conv {
            let z = tape.mul(y, inv)?;
            let z = tape.add(z, offset)?;
            let z = tape.mul(z, scale)?;
            currents.push(tape.add(z, shift)?);
        }
        let spikes = self.neuron.forward_sequence(tape, binding, &currents)?;
        Ok(EncoderOutput { spikes, stats })
    }
}

fn running_update(tape: &Tape, binding: &Binding, id: ParamId, batch: &[f64], momentum: f64) -> Tensor {
    let old = tape.value(binding.var(id)).data();
    Tensor::vector(
        old.iter()
            .zip(batch)
            .map(|(o, b)| (1.0 - momentum) * o + momentum * b)
            .collect(),
    )
}

/// Runs the encoder in inference mode on one `T x C` series and returns
/// spikes shaped `[segments, T, out_channels]`.
pub fn encode(encoder: &SpikeEncoder, registry: &ParamRegistry, x: &SeriesFrame) -> Result<Tensor> {
    let cfg = &encoder.config;
    if x.is_empty() {
        return Err(Error::EmptyInput("encoder series"));
    }
    if x.channels() != cfg.in_channels {
        return Err(Error::DimensionMismatch {
            context: "encoder input channels",
            expected: cfg.in_channels,
            got: x.channels(),
        });
    }
    let mut tape = Tape::new();
    let binding = registry.bind(&mut tape);
    let inputs = super::sequence_constants(&mut tape, x.data(), x.rows(), 1, x.channels())?;
    let out = encoder.forward(&mut tape, &binding, &inputs, Mode::Eval)?;
    let (t_len, segs, c) = (x.rows(), cfg.segments, cfg.out_channels);
    let mut data = vec![0.0; segs * t_len * c];
    for (i, v) in out.spikes.iter().enumerate() {
        let (t, s) = (i / segs, i % segs);
        data[(s * t_len + t) * c..(s * t_len + t + 1) * c].copy_from_slice(tape.value(*v).data());
    }
    Tensor::new(vec![segs, t_len, c], data)
}
