use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Binding, ParamId, ParamRegistry};
use crate::autodiff::{logit, sigmoid, softplus, softplus_inv, SurrogateSpec, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::neuron::{Kappa, LifParams, NeuronParams};

/// Fully connected projection `y = x W + b` applied per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    weight: ParamId,
    bias: ParamId,
}

impl Dense {
    /// Weights uniform in `+-1/sqrt(inputs)`, zero bias.
    pub fn new<R: Rng>(
        registry: &mut ParamRegistry,
        prefix: &str,
        inputs: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let w = (0..inputs * outputs)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let weight = registry.add(
            format!("{prefix}.weight"),
            Tensor::matrix(inputs, outputs, w).expect("sized"),
            true,
        );
        let bias = registry.add(format!("{prefix}.bias"), Tensor::zeros(&[outputs]), true);
        Self {
            inputs,
            outputs,
            weight,
            bias,
        }
    }

    pub fn weight(&self) -> ParamId {
        self.weight
    }

    pub fn bias(&self) -> ParamId {
        self.bias
    }

    pub fn forward(&self, tape: &mut Tape, binding: &Binding, x: Var) -> Result<Var> {
        let xw = tape.matmul(x, binding.var(self.weight))?;
        tape.add(xw, binding.var(self.bias))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeuronKind {
    Tslif,
    Lif,
    Relu,
}

impl std::str::FromStr for NeuronKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tslif" | "ts-lif" => Ok(NeuronKind::Tslif),
            "lif" => Ok(NeuronKind::Lif),
            "relu" => Ok(NeuronKind::Relu),
            other => Err(Error::InvalidParameter(format!("unknown neuron kind '{other}'"))),
        }
    }
}

impl NeuronKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NeuronKind::Tslif => "tslif",
            NeuronKind::Lif => "lif",
            NeuronKind::Relu => "relu",
        }
    }
}

/// Initial TS-LIF coefficients (post-squashing values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsLifInit {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub kappa: f64,
}

impl Default for TsLifInit {
    fn default() -> Self {
        Self {
            alpha1: 0.9,
            alpha2: 0.1,
            beta1: 0.0,
            beta2: -0.5,
            gamma1: 0.1,
            gamma2: 0.1,
            kappa: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifInit {
    pub alpha: f64,
    pub learnable: bool,
}

impl Default for LifInit {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            learnable: false,
        }
    }
}

fn default_v_th() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// Activation block of a layer stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronConfig {
    pub kind: NeuronKind,
    pub size: usize,
    #[serde(default = "default_v_th")]
    pub v_th: f64,
    #[serde(default)]
    pub surrogate: SurrogateSpec,
    /// When false, spikes are never emitted and the layer outputs zeros;
    /// the membrane recursion stays differentiable.
    #[serde(default = "default_true")]
    pub spiking: bool,
    #[serde(default)]
    pub tslif: TsLifInit,
    #[serde(default)]
    pub lif: LifInit,
}

impl NeuronConfig {
    pub fn new(kind: NeuronKind, size: usize) -> Self {
        Self {
            kind,
            size,
            v_th: 1.0,
            surrogate: SurrogateSpec::default(),
            spiking: true,
            tslif: TsLifInit::default(),
            lif: LifInit::default(),
        }
    }

    pub fn tslif(size: usize) -> Self {
        Self::new(NeuronKind::Tslif, size)
    }

    pub fn resized(mut self, size: usize) -> Self {
        self.size = size;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
enum NeuronParamIds {
    Tslif {
        alpha1: ParamId,
        alpha2: ParamId,
        beta1: ParamId,
        beta2: ParamId,
        gamma1: ParamId,
        gamma2: ParamId,
        kappa: ParamId,
    },
    Lif {
        alpha: ParamId,
    },
    Relu,
}

/// A population of spiking (or ReLU) units driven by per-step currents.
///
/// TS-LIF decays and the mixing weight are stored as logits, resets through an
/// inverse softplus, couplings unconstrained. All but `kappa` are shared by
/// the population; `kappa` is per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronLayer {
    pub config: NeuronConfig,
    ids: NeuronParamIds,
}

enum Coeffs {
    Tslif {
        a1: Var,
        a2: Var,
        om_a1: Var,
        om_a2: Var,
        b1: Var,
        b2: Var,
        g1: Var,
        g2: Var,
        kappa: Var,
        om_kappa: Var,
    },
    Lif {
        alpha: Var,
    },
    Relu,
}

/// Tape variables holding a population state. LIF uses `v_d`/`s_d` only.
#[derive(Debug, Clone, Copy)]
pub struct NeuronState {
    pub v_d: Var,
    pub v_s: Var,
    pub s_d: Var,
    pub s_s: Var,
}

/// Runs a [`NeuronLayer`] one step at a time on a tape.
pub struct NeuronStepper<'a> {
    layer: &'a NeuronLayer,
    coeffs: Coeffs,
    v_th: Var,
    zeros: Var,
    pub state: NeuronState,
}

impl NeuronLayer {
    pub fn new(config: NeuronConfig, registry: &mut ParamRegistry, prefix: &str) -> Result<Self> {
        if config.size == 0 {
            return Err(Error::InvalidParameter("neuron layer size must be positive".into()));
        }
        if !(config.v_th > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {}",
                config.v_th
            )));
        }
        let scalar = |registry: &mut ParamRegistry, name: &str, v: f64| {
            registry.add(format!("{prefix}.{name}"), Tensor::scalar(v), true)
        };
        let ids = match config.kind {
            NeuronKind::Tslif => {
                let i = config.tslif;
                let unit = |x: f64, what: &str| {
                    if x > 0.0 && x < 1.0 {
                        Ok(logit(x))
                    } else {
                        Err(Error::InvalidParameter(format!("{what} init must be in (0, 1), got {x}")))
                    }
                };
                let pos = |x: f64, what: &str| {
                    if x > 0.0 {
                        Ok(softplus_inv(x))
                    } else {
                        Err(Error::InvalidParameter(format!("{what} init must be positive, got {x}")))
                    }
                };
                let kappa_raw = unit(i.kappa, "kappa")?;
                NeuronParamIds::Tslif {
                    alpha1: scalar(registry, "alpha1_raw", unit(i.alpha1, "alpha1")?),
                    alpha2: scalar(registry, "alpha2_raw", unit(i.alpha2, "alpha2")?),
                    beta1: scalar(registry, "beta1", i.beta1),
                    beta2: scalar(registry, "beta2", i.beta2),
                    gamma1: scalar(registry, "gamma1_raw", pos(i.gamma1, "gamma1")?),
                    gamma2: scalar(registry, "gamma2_raw", pos(i.gamma2, "gamma2")?),
                    kappa: registry.add(
                        format!("{prefix}.kappa_raw"),
                        Tensor::full(&[config.size], kappa_raw),
                        true,
                    ),
                }
            }
            NeuronKind::Lif => {
                let a = config.lif.alpha;
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "LIF alpha init must be in (0, 1), got {a}"
                    )));
                }
                NeuronParamIds::Lif {
                    alpha: registry.add(
                        format!("{prefix}.alpha_raw"),
                        Tensor::scalar(logit(a)),
                        config.lif.learnable,
                    ),
                }
            }
            NeuronKind::Relu => NeuronParamIds::Relu,
        };
        Ok(Self { config, ids })
    }

    /// Current TS-LIF coefficients as a neuron-core parameter set.
    pub fn neuron_params(&self, registry: &ParamRegistry) -> Result<NeuronParams> {
        let NeuronParamIds::Tslif {
            alpha1,
            alpha2,
            beta1,
            beta2,
            gamma1,
            gamma2,
            kappa,
        } = &self.ids
        else {
            return Err(Error::InvalidParameter("not a TS-LIF layer".into()));
        };
        let s = |id: &ParamId| registry.get(*id).item();
        let kappa = registry.get(*kappa).data().iter().map(|&r| sigmoid(r)).collect();
        NeuronParams::linear(sigmoid(s(alpha1)), sigmoid(s(alpha2)), s(beta1), s(beta2))?
            .with_reset(softplus(s(gamma1)), softplus(s(gamma2)))?
            .with_threshold(self.config.v_th)?
            .with_kappa(Kappa::PerChannel(kappa))
    }

    pub fn lif_params(&self, registry: &ParamRegistry) -> Result<LifParams> {
        match &self.ids {
            NeuronParamIds::Lif { alpha } => {
                LifParams::new(sigmoid(registry.get(*alpha).item()), self.config.v_th)
            }
            _ => Err(Error::InvalidParameter("not a LIF layer".into())),
        }
    }

    fn coefficients(&self, tape: &mut Tape, binding: &Binding) -> Coeffs {
        match &self.ids {
            NeuronParamIds::Tslif {
                alpha1,
                alpha2,
                beta1,
                beta2,
                gamma1,
                gamma2,
                kappa,
            } => {
                let a1 = tape.sigmoid(binding.var(*alpha1));
                let a2 = tape.sigmoid(binding.var(*alpha2));
                let om_a1 = tape.rsub(1.0, a1);
                let om_a2 = tape.rsub(1.0, a2);
                let g1 = tape.softplus(binding.var(*gamma1));
                let g2 = tape.softplus(binding.var(*gamma2));
                let kappa = tape.sigmoid(binding.var(*kappa));
                let om_kappa = tape.rsub(1.0, kappa);
                Coeffs::Tslif {
                    a1,
                    a2,
                    om_a1,
                    om_a2,
                    b1: binding.var(*beta1),
                    b2: binding.var(*beta2),
                    g1,
                    g2,
                    kappa,
                    om_kappa,
                }
            }
            NeuronParamIds::Lif { alpha } => Coeffs::Lif {
                alpha: tape.sigmoid(binding.var(*alpha)),
            },
            NeuronParamIds::Relu => Coeffs::Relu,
        }
    }

    pub fn begin<'a>(&'a self, tape: &mut Tape, binding: &Binding, batch: usize) -> NeuronStepper<'a> {
        let coeffs = self.coefficients(tape, binding);
        let zeros = tape.constant(Tensor::zeros(&[batch, self.config.size]));
        let v_th = tape.constant(Tensor::scalar(self.config.v_th));
        NeuronStepper {
            layer: self,
            coeffs,
            v_th,
            zeros,
            state: NeuronState {
                v_d: zeros,
                v_s: zeros,
                s_d: zeros,
                s_s: zeros,
            },
        }
    }

    /// Outputs (`s_mix` for TS-LIF) for every step of `inputs`.
    pub fn forward_sequence(&self, tape: &mut Tape, binding: &Binding, inputs: &[Var]) -> Result<Vec<Var>> {
        Ok(self.forward_states(tape, binding, inputs)?.0)
    }

    /// Outputs plus the post-step state of every step.
    pub fn forward_states(
        &self,
        tape: &mut Tape,
        binding: &Binding,
        inputs: &[Var],
    ) -> Result<(Vec<Var>, Vec<NeuronState>)> {
        let first = inputs.first().ok_or(Error::EmptyInput("neuron layer inputs"))?;
        let batch = tape.shape(*first)[0];
        let mut stepper = self.begin(tape, binding, batch);
        let mut outs = Vec::with_capacity(inputs.len());
        let mut states = Vec::with_capacity(inputs.len());
        for &c in inputs {
            outs.push(stepper.step(tape, c)?);
            states.push(stepper.state);
        }
        Ok((outs, states))
    }
}

impl NeuronStepper<'_> {
    fn fire(&self, tape: &mut Tape, v: Var) -> Result<Var> {
        let cfg = &self.layer.config;
        if !cfg.spiking {
            return Ok(self.zeros);
        }
        let x = tape.sub(v, self.v_th)?;
        Ok(tape.spike(x, cfg.surrogate))
    }

    /// Advances one step with input current `c` (`[batch, size]`).
    pub fn step(&mut self, tape: &mut Tape, c: Var) -> Result<Var> {
        let want = [tape.shape(self.zeros)[0], self.layer.config.size];
        if tape.shape(c) != want {
            return Err(Error::ShapeMismatch {
                op: "neuron step",
                lhs: want.to_vec(),
                rhs: tape.shape(c).to_vec(),
            });
        }
        let prev = self.state;
        match self.coeffs {
            Coeffs::Tslif {
                a1,
                a2,
                om_a1,
                om_a2,
                b1,
                b2,
                g1,
                g2,
                kappa,
                om_kappa,
            } => {
                // v_d = a1 v_d' + b1 v_s' + (1 - a1) c - g1 s_d'
                let t1 = tape.mul(a1, prev.v_d)?;
                let t2 = tape.mul(b1, prev.v_s)?;
                let t3 = tape.mul(om_a1, c)?;
                let t4 = tape.mul(g1, prev.s_d)?;
                let acc = tape.add(t1, t2)?;
                let acc = tape.add(acc, t3)?;
                let v_d = tape.sub(acc, t4)?;
                // v_s = a2 v_s' + b2 v_d + (1 - a2) c - g2 s_s'
                let u1 = tape.mul(a2, prev.v_s)?;
                let u2 = tape.mul(b2, v_d)?;
                let u3 = tape.mul(om_a2, c)?;
                let u4 = tape.mul(g2, prev.s_s)?;
                let acc = tape.add(u1, u2)?;
                let acc = tape.add(acc, u3)?;
                let v_s = tape.sub(acc, u4)?;
                let s_d = self.fire(tape, v_d)?;
                let s_s = self.fire(tape, v_s)?;
                let m1 = tape.mul(kappa, s_d)?;
                let m2 = tape.mul(om_kappa, s_s)?;
                let mix = tape.add(m1, m2)?;
                self.state = NeuronState { v_d, v_s, s_d, s_s };
                Ok(mix)
            }
            Coeffs::Lif { alpha } => {
                let t1 = tape.mul(alpha, prev.v_d)?;
                let acc = tape.add(t1, c)?;
                let reset = tape.scale(prev.s_d, self.layer.config.v_th);
                let v = tape.sub(acc, reset)?;
                let s = self.fire(tape, v)?;
                self.state = NeuronState {
                    v_d: v,
                    v_s: self.zeros,
                    s_d: s,
                    s_s: self.zeros,
                };
                Ok(s)
            }
            Coeffs::Relu => Ok(tape.relu(c)),
        }
    }
}
