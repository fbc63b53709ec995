use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{SpikeEncoder, SpikeEncoderConfig};
use super::layers::{Dense, NeuronConfig, NeuronKind, NeuronLayer};
use super::{Binding, Mode, ParamId, ParamRegistry};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// One entry of a stack description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LayerConfig {
    Dense { inputs: usize, outputs: usize },
    Neuron(NeuronConfig),
    Encoder(SpikeEncoderConfig),
    /// `c_t = x_t W_in + s_{t-1} W_rec + b` feeding a neuron population.
    RecurrentSpiking {
        inputs: usize,
        hidden: usize,
        neuron: NeuronConfig,
    },
    /// Mean over time.
    RateReadout,
    /// Concatenates all steps along features, step-major.
    Flatten,
}

/// Shape of the activation flowing between layers (batch excluded).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowShape {
    Sequence { steps: usize, features: usize },
    Flat { features: usize },
}

/// Activation flowing between layers.
#[derive(Debug, Clone)]
pub enum Flow {
    Sequence(Vec<Var>),
    Flat(Var),
}

impl Flow {
    pub fn shape(&self, tape: &Tape) -> FlowShape {
        match self {
            Flow::Sequence(v) => FlowShape::Sequence {
                steps: v.len(),
                features: v.first().map_or(0, |x| tape.shape(*x)[1]),
            },
            Flow::Flat(x) => FlowShape::Flat {
                features: tape.shape(*x)[1],
            },
        }
    }

    /// The single output variable of a stack ending in a flat layer.
    pub fn flat(&self) -> Result<Var> {
        match self {
            Flow::Flat(v) => Ok(*v),
            Flow::Sequence(_) => Err(Error::InvalidParameter("stack output is a sequence".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Block {
    Dense(Dense),
    Neuron(NeuronLayer),
    Encoder(SpikeEncoder),
    Recurrent {
        input: Dense,
        recurrent: ParamId,
        neuron: NeuronLayer,
    },
    RateReadout,
    Flatten,
}

pub struct ForwardOutput {
    pub output: Flow,
    /// Running statistics to commit with [`LayerStack::commit`].
    pub stats: Vec<(ParamId, Tensor)>,
    /// Mean output of each spiking population, in layer order.
    pub spike_rates: Vec<f64>,
}

/// Ordered layers plus the registry holding their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    configs: Vec<LayerConfig>,
    blocks: Vec<Block>,
    pub registry: ParamRegistry,
}

fn mismatch(context: &'static str, expected: usize, got: usize) -> Error {
    Error::DimensionMismatch {
        context,
        expected,
        got,
    }
}

fn need_sequence(shape: FlowShape, what: &'static str) -> Result<(usize, usize)> {
    match shape {
        FlowShape::Sequence { steps, features } => Ok((steps, features)),
        FlowShape::Flat { .. } => Err(Error::InvalidParameter(format!("{what} needs a sequence input"))),
    }
}

impl LayerConfig {
    /// Output shape for a given input shape.
    pub fn output_shape(&self, input: FlowShape) -> Result<FlowShape> {
        let features = match input {
            FlowShape::Sequence { features, .. } | FlowShape::Flat { features } => features,
        };
        match *self {
            LayerConfig::Dense { inputs, outputs } => {
                if features != inputs {
                    return Err(mismatch("dense inputs", inputs, features));
                }
                Ok(match input {
                    FlowShape::Sequence { steps, .. } => FlowShape::Sequence {
                        steps,
                        features: outputs,
                    },
                    FlowShape::Flat { .. } => FlowShape::Flat { features: outputs },
                })
            }
            LayerConfig::Neuron(n) => {
                let (steps, f) = need_sequence(input, "neuron layer")?;
                if f != n.size {
                    return Err(mismatch("neuron size", n.size, f));
                }
                Ok(input.with_steps(steps))
            }
            LayerConfig::Encoder(e) => {
                let (steps, f) = need_sequence(input, "encoder")?;
                if f != e.in_channels {
                    return Err(mismatch("encoder in_channels", e.in_channels, f));
                }
                if steps < e.kernel_size {
                    return Err(Error::SequenceTooShort {
                        requested: e.kernel_size,
                        available: steps,
                    });
                }
                Ok(FlowShape::Sequence {
                    steps: e.snn_steps(steps),
                    features: e.out_channels,
                })
            }
            LayerConfig::RecurrentSpiking { inputs, hidden, .. } => {
                let (steps, f) = need_sequence(input, "recurrent layer")?;
                if f != inputs {
                    return Err(mismatch("recurrent inputs", inputs, f));
                }
                Ok(FlowShape::Sequence {
                    steps,
                    features: hidden,
                })
            }
            LayerConfig::RateReadout => {
                let (steps, f) = need_sequence(input, "rate readout")?;
                if steps == 0 {
                    return Err(Error::EmptyInput("rate readout"));
                }
                Ok(FlowShape::Flat { features: f })
            }
            LayerConfig::Flatten => {
                let (steps, f) = need_sequence(input, "flatten")?;
                Ok(FlowShape::Flat { features: steps * f })
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |x: usize, what: &str| {
            if x == 0 {
                Err(Error::InvalidParameter(format!("{what} must be positive")))
            } else {
                Ok(())
            }
        };
        match self {
            LayerConfig::Dense { inputs, outputs } => {
                positive(*inputs, "dense inputs")?;
                positive(*outputs, "dense outputs")
            }
            LayerConfig::Neuron(n) => positive(n.size, "neuron size"),
            LayerConfig::Encoder(e) => e.validate(),
            LayerConfig::RecurrentSpiking { inputs, hidden, neuron } => {
                positive(*inputs, "recurrent inputs")?;
                positive(*hidden, "recurrent hidden")?;
                if neuron.size != *hidden {
                    return Err(mismatch("recurrent neuron size", *hidden, neuron.size));
                }
                Ok(())
            }
            LayerConfig::RateReadout | LayerConfig::Flatten => Ok(()),
        }
    }
}

impl FlowShape {
    fn with_steps(self, steps: usize) -> Self {
        match self {
            FlowShape::Sequence { features, .. } => FlowShape::Sequence { steps, features },
            flat => flat,
        }
    }
}

impl LayerStack {
    /// Builds the layers with parameters drawn from a seeded generator.
    pub fn new(configs: Vec<LayerConfig>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(configs, &mut rng)
    }

    pub fn with_rng<R: Rng>(configs: Vec<LayerConfig>, rng: &mut R) -> Result<Self> {
        if configs.is_empty() {
            return Err(Error::EmptyInput("layer stack"));
        }
        let mut registry = ParamRegistry::new();
        let mut blocks = Vec::with_capacity(configs.len());
        for (i, cfg) in configs.iter().enumerate() {
            cfg.validate()?;
            let prefix = format!("layer{i}");
            let block = match *cfg {
                LayerConfig::Dense { inputs, outputs } => {
                    Block::Dense(Dense::new(&mut registry, &prefix, inputs, outputs, rng))
                }
                LayerConfig::Neuron(n) => Block::Neuron(NeuronLayer::new(n, &mut registry, &prefix)?),
                LayerConfig::Encoder(e) => Block::Encoder(SpikeEncoder::new(e, &mut registry, &prefix, rng)?),
                LayerConfig::RecurrentSpiking { inputs, hidden, neuron } => {
                    let input = Dense::new(&mut registry, &format!("{prefix}.input"), inputs, hidden, rng);
                    let bound = 1.0 / (hidden as f64).sqrt();
                    let w = (0..hidden * hidden).map(|_| rng.random_range(-bound..bound)).collect();
                    let recurrent = registry.add(
                        format!("{prefix}.recurrent"),
                        Tensor::matrix(hidden, hidden, w)?,
                        true,
                    );
                    let neuron = NeuronLayer::new(neuron, &mut registry, &format!("{prefix}.neuron"))?;
                    Block::Recurrent {
                        input,
                        recurrent,
                        neuron,
                    }
                }
                LayerConfig::RateReadout => Block::RateReadout,
                LayerConfig::Flatten => Block::Flatten,
            };
            blocks.push(block);
        }
        Ok(Self {
            configs,
            blocks,
            registry,
        })
    }

    pub fn configs(&self) -> &[LayerConfig] {
        &self.configs
    }

    /// Output shape for an input of `steps x features`.
    pub fn output_shape(&self, steps: usize, features: usize) -> Result<FlowShape> {
        self.configs
            .iter()
            .try_fold(FlowShape::Sequence { steps, features }, |s, c| c.output_shape(s))
    }

    /// The first neuron population of the stack, wherever it lives.
    pub fn first_neuron(&self) -> Option<&NeuronLayer> {
        self.blocks.iter().find_map(|b| match b {
            Block::Neuron(n) => Some(n),
            Block::Recurrent { neuron, .. } => Some(neuron),
            Block::Encoder(e) => Some(e.neuron()),
            _ => None,
        })
    }

    /// Spiking populations in layer order.
    pub fn neurons(&self) -> Vec<&NeuronLayer> {
        self.blocks
            .iter()
            .filter_map(|b| match b {
                Block::Neuron(n) => Some(n),
                Block::Recurrent { neuron, .. } => Some(neuron),
                Block::Encoder(e) => Some(e.neuron()),
                _ => None,
            })
            .collect()
    }

    /// Dense layers in order, for inspection and tests.
    pub fn dense_layers(&self) -> Vec<&Dense> {
        self.blocks
            .iter()
            .filter_map(|b| match b {
                Block::Dense(d) => Some(d),
                _ => None,
            })
            .collect()
    }

    pub fn encoder(&self) -> Option<&SpikeEncoder> {
        self.blocks.iter().find_map(|b| match b {
            Block::Encoder(e) => Some(e),
            _ => None,
        })
    }

    /// `inputs` holds one `[batch, features]` variable per step.
    pub fn forward(&self, tape: &mut Tape, binding: &Binding, inputs: &[Var], mode: Mode) -> Result<ForwardOutput> {
        let first = inputs.first().ok_or(Error::EmptyInput("stack inputs"))?;
        let features = tape.shape(*first)[1];
        self.output_shape(inputs.len(), features)?;
        let mut flow = Flow::Sequence(inputs.to_vec());
        let mut stats = Vec::new();
        let mut spike_rates = Vec::new();
        let rate = |tape: &Tape, seq: &[Var]| {
            let (sum, n) = seq.iter().fold((0.0, 0usize), |(s, n), v| {
                let d = tape.value(*v).data();
                (s + d.iter().sum::<f64>(), n + d.len())
            });
            sum / n.max(1) as f64
        };
        for block in &self.blocks {
            flow = match (block, flow) {
                (Block::Dense(d), Flow::Sequence(seq)) => Flow::Sequence(
                    seq.into_iter()
                        .map(|x| d.forward(tape, binding, x))
                        .collect::<Result<_>>()?,
                ),
                (Block::Dense(d), Flow::Flat(x)) => Flow::Flat(d.forward(tape, binding, x)?),
                (Block::Neuron(n), Flow::Sequence(seq)) => {
                    let out = n.forward_sequence(tape, binding, &seq)?;
                    if n.config.kind != NeuronKind::Relu {
                        spike_rates.push(rate(tape, &out));
                    }
                    Flow::Sequence(out)
                }
                (Block::Encoder(e), Flow::Sequence(seq)) => {
                    let out = e.forward(tape, binding, &seq, mode)?;
                    stats.extend(out.stats);
                    spike_rates.push(rate(tape, &out.spikes));
                    Flow::Sequence(out.spikes)
                }
                (
                    Block::Recurrent {
                        input,
                        recurrent,
                        neuron,
                    },
                    Flow::Sequence(seq),
                ) => {
                    let batch = tape.shape(seq[0])[0];
                    let mut stepper = neuron.begin(tape, binding, batch);
                    let w_rec = binding.var(*recurrent);
                    let mut out = Vec::with_capacity(seq.len());
                    let mut prev: Option<Var> = None;
                    for x in seq {
                        let mut c = input.forward(tape, binding, x)?;
                        if let Some(s) = prev {
                            let r = tape.matmul(s, w_rec)?;
                            c = tape.add(c, r)?;
                        }
                        let s = stepper.step(tape, c)?;
                        out.push(s);
                        prev = Some(s);
                    }
                    if neuron.config.kind != NeuronKind::Relu {
                        spike_rates.push(rate(tape, &out));
                    }
                    Flow::Sequence(out)
                }
                (Block::RateReadout, Flow::Sequence(seq)) => {
                    let n = seq.len();
                    let mut acc = seq[0];
                    for &x in &seq[1..] {
                        acc = tape.add(acc, x)?;
                    }
                    Flow::Flat(tape.scale(acc, 1.0 / n as f64))
                }
                (Block::Flatten, Flow::Sequence(seq)) => {
                    Flow::Flat(if seq.len() == 1 { seq[0] } else { tape.concat_cols(&seq)? })
                }
                _ => unreachable!("shape check admits only valid layer inputs"),
            };
        }
        Ok(ForwardOutput {
            output: flow,
            stats,
            spike_rates,
        })
    }

    /// Writes pending running statistics into the registry.
    pub fn commit(&mut self, stats: Vec<(ParamId, Tensor)>) -> Result<()> {
        for (id, t) in stats {
            self.registry.set(id, t)?;
        }
        Ok(())
    }

    /// Inference on a `[steps, batch, features]` buffer. Returns the flat
    /// output `[batch, out]` and the per-population spike rates.
    pub fn predict(&self, data: &[f64], steps: usize, batch: usize, features: usize) -> Result<(Tensor, Vec<f64>)> {
        let mut tape = Tape::new();
        let binding = self.registry.bind_constants(&mut tape);
        let inputs = super::sequence_constants(&mut tape, data, steps, batch, features)?;
        let out = self.forward(&mut tape, &binding, &inputs, Mode::Eval)?;
        let y = out.output.flat()?;
        Ok((tape.value(y).clone(), out.spike_rates))
    }

    /// Replaces every tensor of the registry by name; shapes must match.
    pub fn load_tensors(&mut self, tensors: Vec<(String, Tensor)>) -> Result<()> {
        if tensors.len() != self.registry.entries().len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                self.registry.entries().len(),
                tensors.len()
            )));
        }
        for (name, t) in tensors {
            let id = self
                .registry
                .find(&name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown tensor '{name}'")))?;
            self.registry
                .set(id, t)
                .map_err(|e| Error::Checkpoint(format!("tensor '{name}': {e}")))?;
        }
        Ok(())
    }
}

/// `Dense -> neuron -> rate readout -> Dense`.
pub fn mlp_backbone(sizes: [usize; 3], neuron: NeuronConfig, seed: u64) -> Result<LayerStack> {
    let [i, h, o] = sizes;
    LayerStack::new(
        vec![
            LayerConfig::Dense { inputs: i, outputs: h },
            LayerConfig::Neuron(neuron.resized(h)),
            LayerConfig::RateReadout,
            LayerConfig::Dense { inputs: h, outputs: o },
        ],
        seed,
    )
}

/// Recurrent spiking layer -> rate readout -> Dense.
pub fn recurrent_backbone(sizes: [usize; 3], neuron: NeuronConfig, seed: u64) -> Result<LayerStack> {
    let [i, h, o] = sizes;
    LayerStack::new(
        vec![
            LayerConfig::RecurrentSpiking {
                inputs: i,
                hidden: h,
                neuron: neuron.resized(h),
            },
            LayerConfig::RateReadout,
            LayerConfig::Dense { inputs: h, outputs: o },
        ],
        seed,
    )
}

/// Encoder -> flatten -> linear head producing `horizon * channels` values.
pub fn forecast_backbone(
    encoder: SpikeEncoderConfig,
    history: usize,
    horizon: usize,
    seed: u64,
) -> Result<LayerStack> {
    let flat = encoder.snn_steps(history) * encoder.out_channels;
    LayerStack::new(
        vec![
            LayerConfig::Encoder(encoder),
            LayerConfig::Flatten,
            LayerConfig::Dense {
                inputs: flat,
                outputs: horizon * encoder.in_channels,
            },
        ],
        seed,
    )
}
