//! Temporal-segment LIF (TS-LIF) neurons.
//!
//! * [`neuron`]: exact discrete-time LIF, two-compartment and TS-LIF populations.
//! * [`analysis`]: eigenvalues, transfer functions and frequency response of the
//!   spike-free system.
//! * [`autodiff`]: a small reverse-mode tape with surrogate spike gradients.
//! * [`network`]: differentiable spiking layers, backbones and checkpoints.
//! * [`tasks`]: stimulus generation, spectra, metrics, energy accounting,
//!   delayed XOR and synthetic forecasting experiments.
//! * [`dataio`]: CSV ingestion, normalization and sliding windows.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod autodiff;
pub mod dataio;
pub mod error;
pub mod frame;
pub mod network;
pub mod neuron;
pub mod tasks;

pub use error::{Error, Result};
pub use frame::SeriesFrame;
pub use neuron::{CompartmentState, Kappa, LifParams, NeuronParams, StepOutput};
