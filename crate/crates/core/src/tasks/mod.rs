//! Desk-scale experiments and the metrics they report.

pub mod decomposition;
pub mod energy;
pub mod forecast;
pub mod masking;
pub mod metrics;
pub mod spectrum;
pub mod stimulus;
pub mod xor;

pub use decomposition::{decomposition_demo, DecompositionReport, ModelDecomposition};
pub use energy::{energy_estimate, EnergyModel, EnergyReport, LayerCost};
pub use masking::{mask_missing, mask_missing_with};
pub use metrics::{r2, r2_pointwise, rse, R2Score};
pub use spectrum::{power_spectrum, spectrum, Spectrum};
pub use stimulus::{generate_stimulus, MixedStimulus};

use serde::{Deserialize, Serialize};

use crate::autodiff::{optim::Optimizer, Tape, Tensor};
use crate::error::{Error, Result};
use crate::network::{sequence_constants, LayerStack, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    Mse,
    BceWithLogits,
}

/// One optimizer step on a `[steps, batch, features]` minibatch. Returns the
/// loss before the update.
#[allow(clippy::too_many_arguments)]
pub fn train_step<O: Optimizer>(
    stack: &mut LayerStack,
    opt: &mut O,
    inputs: &[f64],
    steps: usize,
    batch: usize,
    features: usize,
    targets: &[f64],
    loss: Loss,
) -> Result<f64> {
    let mut tape = Tape::new();
    let binding = stack.registry.bind(&mut tape);
    let xs = sequence_constants(&mut tape, inputs, steps, batch, features)?;
    let out = stack.forward(&mut tape, &binding, &xs, Mode::Train)?;
    let y = out.output.flat()?;
    let width = tape.shape(y)[1];
    let t = tape.constant(Tensor::matrix(batch, width, targets.to_vec())?);
    let l = match loss {
        Loss::Mse => tape.mse(y, t)?,
        Loss::BceWithLogits => tape.bce_with_logits(y, t)?,
    };
    let value = tape.value(l).item();
    if !value.is_finite() {
        return Err(Error::InvalidParameter(format!("training loss became {value}")));
    }
    let grads = tape.backward(l)?;
    stack.registry.apply(opt, &binding, &grads);
    stack.commit(out.stats)?;
    if !stack.registry.is_finite() {
        return Err(Error::InvalidParameter("parameters became non-finite".into()));
    }
    Ok(value)
}
