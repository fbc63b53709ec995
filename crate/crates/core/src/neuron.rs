//! Discrete-time LIF, generic two-compartment and TS-LIF neuron populations.
//!
//! A population is a set of independent neurons, one per input channel. All
//! step functions are pure: they take the previous state by reference and
//! return the next one.

use std::io::Write;

use crate::error::{Error, Result};
use crate::frame::SeriesFrame;

/// Heaviside step with `H(0) = 1`.
#[inline]
pub fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Whether threshold crossings emit spikes.
///
/// `Disabled` behaves as an infinite threshold: no spike is ever emitted, so
/// reset terms vanish and the dynamics are exactly the linear system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpikeMode {
    #[default]
    Enabled,
    Disabled,
}

impl SpikeMode {
    #[inline]
    fn fire(self, v: f64, v_th: f64) -> f64 {
        match self {
            SpikeMode::Enabled => heaviside(v - v_th),
            SpikeMode::Disabled => 0.0,
        }
    }
}

fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        });
    }
    Ok(())
}

fn check_binary(which: &'static str, s: &[f64]) -> Result<()> {
    match s.iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
        Some((index, &value)) => Err(Error::NonBinarySpike {
            which,
            index,
            value,
        }),
        None => Ok(()),
    }
}

/// Single-compartment LIF coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifParams {
    alpha: f64,
    v_th: f64,
}

impl LifParams {
    /// `alpha` must lie in `[0, 1)` and `v_th` must be positive.
    pub fn new(alpha: f64, v_th: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "LIF decay alpha must be in [0, 1), got {alpha}"
            )));
        }
        if !(v_th > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {v_th}"
            )));
        }
        Ok(Self { alpha, v_th })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn v_th(&self) -> f64 {
        self.v_th
    }
}

/// One LIF step: `v = alpha * v_prev + c - v_th * s_prev`, `s = H(v - v_th)`.
pub fn lif_step(
    params: &LifParams,
    v_prev: &[f64],
    s_prev: &[f64],
    c: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    lif_step_with(params, v_prev, s_prev, c, SpikeMode::Enabled)
}

pub fn lif_step_with(
    params: &LifParams,
    v_prev: &[f64],
    s_prev: &[f64],
    c: &[f64],
    mode: SpikeMode,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = v_prev.len();
    check_len("lif_step s_prev", n, s_prev.len())?;
    check_len("lif_step c", n, c.len())?;
    check_binary("s_prev", s_prev)?;
    let v: Vec<f64> = (0..n)
        .map(|i| params.alpha * v_prev[i] + c[i] - params.v_th * s_prev[i])
        .collect();
    let s = v.iter().map(|&x| mode.fire(x, params.v_th)).collect();
    Ok((v, s))
}

/// Unrolls a single LIF neuron from `v[0] = 0`, `s[0] = 0` for `steps` steps.
///
/// `c[k]` is the input at step `k + 1`; the result holds `v[1..=steps]`.
pub fn lif_unrolled(
    params: &LifParams,
    c: &[f64],
    steps: usize,
    mode: SpikeMode,
) -> Result<Vec<f64>> {
    if steps > c.len() {
        return Err(Error::SequenceTooShort {
            requested: steps,
            available: c.len(),
        });
    }
    let mut v = 0.0;
    let mut s = 0.0;
    let mut out = Vec::with_capacity(steps);
    for &ct in &c[..steps] {
        v = params.alpha * v + ct - params.v_th * s;
        s = mode.fire(v, params.v_th);
        out.push(v);
    }
    Ok(out)
}

/// Mixing weight between dendritic and somatic spikes.
#[derive(Debug, Clone, PartialEq)]
pub enum Kappa {
    Shared(f64),
    PerChannel(Vec<f64>),
}

impl Kappa {
    #[inline]
    pub fn at(&self, channel: usize) -> f64 {
        match self {
            Kappa::Shared(k) => *k,
            Kappa::PerChannel(ks) => ks[channel],
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Kappa::Shared(k) => std::slice::from_ref(k),
            Kappa::PerChannel(ks) => ks,
        }
    }

    fn check_channels(&self, n: usize) -> Result<()> {
        match self {
            Kappa::Shared(_) => Ok(()),
            Kappa::PerChannel(ks) => check_len("kappa channels", n, ks.len()),
        }
    }
}

/// Coefficients of one TS-LIF population.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronParams {
    alpha1: f64,
    alpha2: f64,
    beta1: f64,
    beta2: f64,
    gamma1: f64,
    gamma2: f64,
    v_th: f64,
    kappa: Kappa,
}

impl NeuronParams {
    /// Coupled linear coefficients with no reset, threshold 1 and `kappa = 0.5`.
    pub fn linear(alpha1: f64, alpha2: f64, beta1: f64, beta2: f64) -> Result<Self> {
        let p = Self {
            alpha1,
            alpha2,
            beta1,
            beta2,
            gamma1: 0.0,
            gamma2: 0.0,
            v_th: 1.0,
            kappa: Kappa::Shared(0.5),
        };
        p.validate()?;
        Ok(p)
    }

    /// Low-pass dendrite, high-pass soma: `alpha = (0.95, 0.05)`, `beta = (0, -0.9)`.
    pub fn frequency_split() -> Self {
        Self::linear(0.95, 0.05, 0.0, -0.9).expect("valid preset")
    }

    pub fn with_reset(mut self, gamma1: f64, gamma2: f64) -> Result<Self> {
        self.gamma1 = gamma1;
        self.gamma2 = gamma2;
        self.validate()?;
        Ok(self)
    }

    pub fn with_threshold(mut self, v_th: f64) -> Result<Self> {
        self.v_th = v_th;
        self.validate()?;
        Ok(self)
    }

    pub fn with_kappa(mut self, kappa: Kappa) -> Result<Self> {
        self.kappa = kappa;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        let finite = [
            self.alpha1,
            self.alpha2,
            self.beta1,
            self.beta2,
            self.gamma1,
            self.gamma2,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "neuron coefficients must be finite".into(),
            ));
        }
        if !unit.contains(&self.alpha1) || !unit.contains(&self.alpha2) {
            return Err(Error::InvalidParameter(format!(
                "alpha1/alpha2 must be in [0, 1], got {}/{}",
                self.alpha1, self.alpha2
            )));
        }
        if !(self.v_th > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must be positive, got {}",
                self.v_th
            )));
        }
        if self.gamma1 < 0.0 || self.gamma2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "reset magnitudes must be non-negative, got {}/{}",
                self.gamma1, self.gamma2
            )));
        }
        if let Some(k) = self.kappa.values().iter().find(|k| !unit.contains(*k)) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be in [0, 1], got {k}"
            )));
        }
        Ok(())
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }
    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }
    pub fn beta1(&self) -> f64 {
        self.beta1
    }
    pub fn beta2(&self) -> f64 {
        self.beta2
    }
    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }
    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }
    pub fn v_th(&self) -> f64 {
        self.v_th
    }
    pub fn kappa(&self) -> &Kappa {
        &self.kappa
    }
}

/// Membrane potentials and last spikes of a population.
#[derive(Debug, Clone, PartialEq)]
pub struct CompartmentState {
    pub v_d: Vec<f64>,
    pub v_s: Vec<f64>,
    pub s_d: Vec<f64>,
    pub s_s: Vec<f64>,
}

impl CompartmentState {
    pub fn zeros(n: usize) -> Self {
        Self {
            v_d: vec![0.0; n],
            v_s: vec![0.0; n],
            s_d: vec![0.0; n],
            s_s: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v_d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_d.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let n = self.v_d.len();
        check_len("state v_s", n, self.v_s.len())?;
        check_len("state s_d", n, self.s_d.len())?;
        check_len("state s_s", n, self.s_s.len())?;
        check_binary("s_d", &self.s_d)?;
        check_binary("s_s", &self.s_s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub state: CompartmentState,
    pub s_mix: Vec<f64>,
}

/// Coefficients of the generic dendrite/soma model where only the soma spikes
/// and the input reaches the soma through the dendrite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoCompartmentParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub v_th: f64,
}

impl TwoCompartmentParams {
    /// The TC-LIF configuration `alpha = (1, 1)`, `beta = (-0.5, 0.5)`, threshold 1.
    pub fn tc_lif() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 1.0,
            beta1: -0.5,
            beta2: 0.5,
            v_th: 1.0,
        }
    }
}

pub fn two_compartment_step(
    params: &TwoCompartmentParams,
    state: &CompartmentState,
    c: &[f64],
) -> Result<CompartmentState> {
    two_compartment_step_with(params, state, c, SpikeMode::Enabled)
}

pub fn two_compartment_step_with(
    params: &TwoCompartmentParams,
    state: &CompartmentState,
    c: &[f64],
    mode: SpikeMode,
) -> Result<CompartmentState> {
    state.validate()?;
    let n = state.len();
    check_len("two_compartment_step c", n, c.len())?;
    let p = params;
    let mut next = CompartmentState::zeros(n);
    for i in 0..n {
        let v_d = p.alpha1 * state.v_d[i] + p.beta1 * state.v_s[i] + c[i];
        let v_s = p.alpha2 * state.v_s[i] + p.beta2 * v_d - p.v_th * state.s_s[i];
        next.v_d[i] = v_d;
        next.v_s[i] = v_s;
        next.s_s[i] = mode.fire(v_s, p.v_th);
    }
    Ok(next)
}

/// One TS-LIF step with spiking enabled.
pub fn tslif_step(
    params: &NeuronParams,
    state: &CompartmentState,
    c: &[f64],
) -> Result<StepOutput> {
    tslif_step_with(params, state, c, SpikeMode::Enabled)
}

/// One TS-LIF step. The soma update reads the dendritic potential of the
/// current step; resets subtract the previous step's spikes.
pub fn tslif_step_with(
    params: &NeuronParams,
    state: &CompartmentState,
    c: &[f64],
    mode: SpikeMode,
) -> Result<StepOutput> {
    state.validate()?;
    let n = state.len();
    check_len("tslif_step c", n, c.len())?;
    params.kappa.check_channels(n)?;
    let p = params;
    let mut next = CompartmentState::zeros(n);
    let mut s_mix = vec![0.0; n];
    for i in 0..n {
        let v_d = p.alpha1 * state.v_d[i] + p.beta1 * state.v_s[i] + (1.0 - p.alpha1) * c[i]
            - p.gamma1 * state.s_d[i];
        let v_s = p.alpha2 * state.v_s[i] + p.beta2 * v_d + (1.0 - p.alpha2) * c[i]
            - p.gamma2 * state.s_s[i];
        let s_d = mode.fire(v_d, p.v_th);
        let s_s = mode.fire(v_s, p.v_th);
        let k = p.kappa.at(i);
        next.v_d[i] = v_d;
        next.v_s[i] = v_s;
        next.s_d[i] = s_d;
        next.s_s[i] = s_s;
        s_mix[i] = k * s_d + (1.0 - k) * s_s;
    }
    Ok(StepOutput {
        state: next,
        s_mix,
    })
}

/// Which traces [`simulate_population`] keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordFlags {
    pub v_d: bool,
    pub v_s: bool,
    pub s_d: bool,
    pub s_s: bool,
    pub s_mix: bool,
}

impl Default for RecordFlags {
    fn default() -> Self {
        Self {
            v_d: true,
            v_s: true,
            s_d: true,
            s_s: true,
            s_mix: true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub spiking: SpikeMode,
    pub record: RecordFlags,
    /// Zero state when `None`.
    pub initial: Option<CompartmentState>,
}

impl SimOptions {
    pub fn linear() -> Self {
        Self {
            spiking: SpikeMode::Disabled,
            ..Self::default()
        }
    }
}

/// Per-step recordings, one row per input row and one column per neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub v_d: Option<SeriesFrame>,
    pub v_s: Option<SeriesFrame>,
    pub s_d: Option<SeriesFrame>,
    pub s_s: Option<SeriesFrame>,
    pub s_mix: Option<SeriesFrame>,
}

impl Trace {
    /// Long-format CSV: `t,channel,v_d,v_s,s_d,s_s,s_mix`. Requires every trace.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let missing = || Error::InvalidParameter("CSV export needs every trace recorded".into());
        let v_d = self.v_d.as_ref().ok_or_else(missing)?;
        let v_s = self.v_s.as_ref().ok_or_else(missing)?;
        let s_d = self.s_d.as_ref().ok_or_else(missing)?;
        let s_s = self.s_s.as_ref().ok_or_else(missing)?;
        let s_mix = self.s_mix.as_ref().ok_or_else(missing)?;
        writeln!(w, "t,channel,v_d,v_s,s_d,s_s,s_mix")?;
        for t in 0..v_d.rows() {
            for c in 0..v_d.channels() {
                writeln!(
                    w,
                    "{t},{c},{},{},{},{},{}",
                    v_d.get(t, c),
                    v_s.get(t, c),
                    s_d.get(t, c),
                    s_s.get(t, c),
                    s_mix.get(t, c)
                )?;
            }
        }
        Ok(())
    }
}

struct Recorder {
    flags: RecordFlags,
    names: Vec<String>,
    rows: usize,
    bufs: [Vec<f64>; 5],
}

impl Recorder {
    fn new(flags: RecordFlags, names: &[String], rows: usize) -> Self {
        let cap = rows * names.len();
        Self {
            flags,
            names: names.to_vec(),
            rows,
            bufs: std::array::from_fn(|_| Vec::with_capacity(cap)),
        }
    }

    fn push(&mut self, state: &CompartmentState, s_mix: &[f64]) {
        let f = self.flags;
        let sources: [(bool, &[f64]); 5] = [
            (f.v_d, &state.v_d),
            (f.v_s, &state.v_s),
            (f.s_d, &state.s_d),
            (f.s_s, &state.s_s),
            (f.s_mix, s_mix),
        ];
        for (buf, (on, src)) in self.bufs.iter_mut().zip(sources) {
            if on {
                buf.extend_from_slice(src);
            }
        }
    }

    fn finish(self) -> Trace {
        let f = self.flags;
        let on = [f.v_d, f.v_s, f.s_d, f.s_s, f.s_mix];
        let mut frames = self.bufs.into_iter().zip(on).map(|(buf, on)| {
            on.then(|| SeriesFrame::new(self.names.clone(), self.rows, buf).expect("sized"))
        });
        Trace {
            v_d: frames.next().flatten(),
            v_s: frames.next().flatten(),
            s_d: frames.next().flatten(),
            s_s: frames.next().flatten(),
            s_mix: frames.next().flatten(),
        }
    }
}

fn initial_state(opts: &SimOptions, n: usize) -> Result<CompartmentState> {
    match &opts.initial {
        Some(s) => {
            check_len("initial state", n, s.len())?;
            s.validate()?;
            Ok(s.clone())
        }
        None => Ok(CompartmentState::zeros(n)),
    }
}

/// Runs a TS-LIF population over every row of `currents`, one neuron per channel.
pub fn simulate_population(
    params: &NeuronParams,
    currents: &SeriesFrame,
    opts: &SimOptions,
) -> Result<Trace> {
    if currents.is_empty() {
        return Err(Error::EmptyInput("simulate_population currents"));
    }
    let n = currents.channels();
    let mut state = initial_state(opts, n)?;
    let mut rec = Recorder::new(opts.record, currents.names(), currents.rows());
    for t in 0..currents.rows() {
        let out = tslif_step_with(params, &state, currents.row(t), opts.spiking)?;
        rec.push(&out.state, &out.s_mix);
        state = out.state;
    }
    Ok(rec.finish())
}

/// Runs the generic two-compartment model; `s_d` stays zero and `s_mix = s_s`.
pub fn simulate_two_compartment(
    params: &TwoCompartmentParams,
    currents: &SeriesFrame,
    opts: &SimOptions,
) -> Result<Trace> {
    if currents.is_empty() {
        return Err(Error::EmptyInput("simulate_two_compartment currents"));
    }
    let n = currents.channels();
    let mut state = initial_state(opts, n)?;
    let mut rec = Recorder::new(opts.record, currents.names(), currents.rows());
    for t in 0..currents.rows() {
        state = two_compartment_step_with(params, &state, currents.row(t), opts.spiking)?;
        let s_mix = state.s_s.clone();
        rec.push(&state, &s_mix);
    }
    Ok(rec.finish())
}
