//! Built-in neuron presets and per-coefficient overrides.

use serde::Serialize;
use tslif_core::neuron::TwoCompartmentParams;
use tslif_core::{Kappa, NeuronParams};

use crate::config::Settings;
use crate::CliError;

pub const PRESETS: &[&str] = &["sec44", "a4-tclif", "unstable"];

/// Coefficient flags accepted wherever a preset is.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct ParamFlags {
    /// One of sec44, a4-tclif, unstable.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long)]
    pub v_th: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum Model {
    Tslif(NeuronParams),
    Tclif(TwoCompartmentParams),
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamSummary {
    pub model: &'static str,
    pub preset: String,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<f64>,
    pub v_th: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Tslif(_) => "tslif",
            Model::Tclif(_) => "tclif",
        }
    }

    pub fn summary(&self, preset: &str) -> ParamSummary {
        match self {
            Model::Tslif(p) => ParamSummary {
                model: self.name(),
                preset: preset.to_string(),
                alpha1: p.alpha1(),
                alpha2: p.alpha2(),
                beta1: p.beta1(),
                beta2: p.beta2(),
                gamma1: Some(p.gamma1()),
                gamma2: Some(p.gamma2()),
                v_th: p.v_th(),
                kappa: Some(p.kappa().at(0)),
            },
            Model::Tclif(p) => ParamSummary {
                model: self.name(),
                preset: preset.to_string(),
                alpha1: p.alpha1,
                alpha2: p.alpha2,
                beta1: p.beta1,
                beta2: p.beta2,
                gamma1: None,
                gamma2: None,
                v_th: p.v_th,
                kappa: None,
            },
        }
    }
}

/// Preset name and the resolved coefficients. Invalid values count as
/// configuration errors.
pub fn resolve(settings: &Settings, flags: &ParamFlags) -> Result<(String, Model), CliError> {
    let preset = settings
        .string("preset", flags.preset.clone())?
        .unwrap_or_else(|| "sec44".into());
    let get = |k: &str, f: Option<f64>| settings.f64(k, f);
    let a1 = get("alpha1", flags.alpha1)?;
    let a2 = get("alpha2", flags.alpha2)?;
    let b1 = get("beta1", flags.beta1)?;
    let b2 = get("beta2", flags.beta2)?;
    let g1 = get("gamma1", flags.gamma1)?;
    let g2 = get("gamma2", flags.gamma2)?;
    let v_th = get("v_th", flags.v_th)?;
    let kappa = get("kappa", flags.kappa)?;
    let usage = |e: tslif_core::Error| CliError::Usage(e.to_string());

    let tslif = |base: NeuronParams| -> Result<Model, CliError> {
        let p = NeuronParams::linear(
            a1.unwrap_or(base.alpha1()),
            a2.unwrap_or(base.alpha2()),
            b1.unwrap_or(base.beta1()),
            b2.unwrap_or(base.beta2()),
        )
        .and_then(|p| p.with_reset(g1.unwrap_or(base.gamma1()), g2.unwrap_or(base.gamma2())))
        .and_then(|p| p.with_threshold(v_th.unwrap_or(base.v_th())))
        .and_then(|p| p.with_kappa(Kappa::Shared(kappa.unwrap_or(base.kappa().at(0)))))
        .map_err(usage)?;
        Ok(Model::Tslif(p))
    };
    let model = match preset.as_str() {
        "sec44" => tslif(NeuronParams::frequency_split())?,
        // couples two slow compartments with a positive loop gain
        "unstable" => tslif(NeuronParams::linear(0.9, 0.9, 0.5, 0.5).map_err(usage)?)?,
        "a4-tclif" => {
            if g1.is_some() || g2.is_some() || kappa.is_some() {
                return Err(CliError::Usage(
                    "gamma1, gamma2 and kappa do not apply to the a4-tclif preset".into(),
                ));
            }
            let base = TwoCompartmentParams::tc_lif();
            let p = TwoCompartmentParams {
                alpha1: a1.unwrap_or(base.alpha1),
                alpha2: a2.unwrap_or(base.alpha2),
                beta1: b1.unwrap_or(base.beta1),
                beta2: b2.unwrap_or(base.beta2),
                v_th: v_th.unwrap_or(base.v_th),
            };
            let finite = [p.alpha1, p.alpha2, p.beta1, p.beta2].iter().all(|x| x.is_finite());
            if !finite || !(p.v_th > 0.0) {
                return Err(CliError::Usage("two-compartment coefficients must be finite with v_th > 0".into()));
            }
            Model::Tclif(p)
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown preset '{other}' (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok((preset, model))
}
