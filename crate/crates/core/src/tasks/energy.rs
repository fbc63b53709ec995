use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Energy per multiply-accumulate at 45 nm, picojoules.
pub const E_MAC_PJ: f64 = 4.6;
/// Energy per accumulate at 45 nm, picojoules.
pub const E_AC_PJ: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    pub name: String,
    pub flops: f64,
    pub timesteps: f64,
    /// Firing rate of the layer input in `[0, 1]`.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub e_mac: f64,
    pub e_ac: f64,
    pub layers: Vec<LayerCost>,
}

impl EnergyModel {
    pub fn new(layers: Vec<LayerCost>) -> Self {
        Self {
            e_mac: E_MAC_PJ,
            e_ac: E_AC_PJ,
            layers,
        }
    }

    /// One layer with the given cost figures.
    pub fn single(flops: f64, timesteps: f64, rate: f64) -> Self {
        Self::new(vec![LayerCost {
            name: "layer0".into(),
            flops,
            timesteps,
            rate,
        }])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_mac >= 0.0 && self.e_ac >= 0.0) {
            return Err(Error::InvalidParameter("energy per operation must be non-negative".into()));
        }
        for l in &self.layers {
            if !(l.flops >= 0.0 && l.timesteps >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "layer '{}': FLOPs and timesteps must be non-negative",
                    l.name
                )));
            }
            if !(0.0..=1.0).contains(&l.rate) {
                return Err(Error::InvalidParameter(format!(
                    "layer '{}': firing rate {} outside [0, 1]",
                    l.name, l.rate
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerEnergy {
    pub name: String,
    /// FLOPs for an ANN layer, SOPs for a spiking one.
    pub operations: f64,
    pub millijoules: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub spiking: bool,
    pub total_mj: f64,
    pub layers: Vec<LayerEnergy>,
}

/// Spiking layers cost `E_AC * T * rate * FLOPs`, ANN layers `E_MAC * FLOPs`.
pub fn energy_estimate(model: &EnergyModel, is_snn: bool) -> Result<EnergyReport> {
    model.validate()?;
    let layers: Vec<LayerEnergy> = model
        .layers
        .iter()
        .map(|l| {
            let (ops, pj) = if is_snn {
                (l.timesteps * l.rate * l.flops, model.e_ac)
            } else {
                (l.flops, model.e_mac)
            };
            LayerEnergy {
                name: l.name.clone(),
                operations: ops,
                // pJ -> mJ by division keeps round figures exact.
                millijoules: pj * ops / 1e9,
            }
        })
        .collect();
    Ok(EnergyReport {
        spiking: is_snn,
        total_mj: layers.iter().map(|l| l.millijoules).sum(),
        layers,
    })
}
