//! Differentiable spiking layers and the stacks built from them.
//!
//! Every layer works on a sequence of `[batch, features]` tape variables, one
//! per time step. Parameters live in a [`ParamRegistry`]; each training step
//! binds the registry onto a fresh [`Tape`](crate::autodiff::Tape).

mod checkpoint;
mod encoder;
mod layers;
mod stack;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use encoder::{encode, EncoderOutput, SpikeEncoder, SpikeEncoderConfig};
pub use layers::{
    Dense, LifInit, NeuronConfig, NeuronKind, NeuronLayer, NeuronState, NeuronStepper, TsLifInit,
};
pub use stack::{
    forecast_backbone, mlp_backbone, recurrent_backbone, Flow, FlowShape, ForwardOutput, LayerConfig,
    LayerStack,
};

use crate::autodiff::{optim::Optimizer, Gradients, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Whether normalization statistics are updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub tensor: Tensor,
    pub learnable: bool,
}

/// Named tensors in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamRegistry {
    entries: Vec<ParamEntry>,
}

impl ParamRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor, learnable: bool) -> ParamId {
        self.entries.push(ParamEntry {
            name: name.into(),
            tensor,
            learnable,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn set(&mut self, id: ParamId, tensor: Tensor) -> Result<()> {
        let slot = &mut self.entries[id.0];
        if slot.tensor.shape() != tensor.shape() {
            return Err(Error::ShapeMismatch {
                op: "ParamRegistry::set",
                lhs: slot.tensor.shape().to_vec(),
                rhs: tensor.shape().to_vec(),
            });
        }
        slot.tensor = tensor;
        Ok(())
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    /// Number of learnable scalars.
    pub fn learnable_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.learnable)
            .map(|e| e.tensor.len())
            .sum()
    }

    /// Puts every tensor on `tape`: learnable ones as leaves, the rest as constants.
    pub fn bind(&self, tape: &mut Tape) -> Binding {
        let vars = self
            .entries
            .iter()
            .map(|e| {
                if e.learnable {
                    tape.leaf(e.tensor.clone())
                } else {
                    tape.constant(e.tensor.clone())
                }
            })
            .collect();
        Binding { vars }
    }

    /// Puts every tensor on `tape` as a constant, for inference.
    pub fn bind_constants(&self, tape: &mut Tape) -> Binding {
        let vars = self
            .entries
            .iter()
            .map(|e| tape.constant(e.tensor.clone()))
            .collect();
        Binding { vars }
    }

    /// One optimizer update from the gradients of a bound tape.
    pub fn apply<O: Optimizer>(&mut self, opt: &mut O, binding: &Binding, grads: &Gradients) {
        let idx: Vec<usize> = (0..self.entries.len())
            .filter(|&i| self.entries[i].learnable)
            .collect();
        let mut params: Vec<Tensor> = idx.iter().map(|&i| self.entries[i].tensor.clone()).collect();
        let g: Vec<Tensor> = idx.iter().map(|&i| grads.get(binding.vars[i])).collect();
        opt.step(&mut params, &g);
        for (i, p) in idx.into_iter().zip(params) {
            self.entries[i].tensor = p;
        }
    }

    /// True when every learnable tensor is finite.
    pub fn is_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.tensor.data().iter().all(|x| x.is_finite()))
    }
}

/// Tape variables for a registry, indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Binding {
    vars: Vec<Var>,
}

impl Binding {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }
}

/// Splits a `[time, batch, features]` buffer into per-step constants.
pub fn sequence_constants(
    tape: &mut Tape,
    data: &[f64],
    steps: usize,
    batch: usize,
    features: usize,
) -> Result<Vec<Var>> {
    if data.len() != steps * batch * features {
        return Err(Error::DimensionMismatch {
            context: "sequence_constants",
            expected: steps * batch * features,
            got: data.len(),
        });
    }
    let width = batch * features;
    Ok((0..steps)
        .map(|t| {
            let slice = data[t * width..(t + 1) * width].to_vec();
            tape.constant(Tensor::matrix(batch, features, slice).expect("sized"))
        })
        .collect())
}
