//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::time::Instant;

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tslif_core::analysis::{stability, sweep_stability_region, system_matrix, transfer_functions, Verdict};
use tslif_core::autodiff::Tape;
use tslif_core::network::{sequence_constants, NeuronConfig, NeuronKind, NeuronLayer, ParamRegistry, TsLifInit};
use tslif_core::neuron::{simulate_population, NeuronParams, SimOptions, TwoCompartmentParams};
use tslif_core::tasks::forecast::{robustness_sweep, ForecastConfig};
use tslif_core::tasks::xor::{mean_accuracy, xor_benchmark, XorConfig};
use tslif_core::tasks::{
    decomposition_demo, energy_estimate, r2, r2_pointwise, rse, spectrum, generate_stimulus, EnergyModel,
    MixedStimulus,
};
use tslif_core::SeriesFrame;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Collects sub-check details; the criterion passes only if all pass.
struct Checks {
    parts: Vec<(bool, String)>,
}

impl Checks {
    fn new() -> Self {
        Self { parts: Vec::new() }
    }

    fn add(&mut self, ok: bool, detail: String) {
        self.parts.push((ok, detail));
    }

    fn finish(self) -> Outcome {
        let ok = self.parts.iter().all(|(ok, _)| *ok);
        let text = self
            .parts
            .iter()
            .map(|(ok, d)| format!("{}{d}", if *ok { "" } else { "[x] " }))
            .collect::<Vec<_>>()
            .join("; ");
        check(ok, text)
    }
}

fn ac1_worked_example() -> Outcome {
    let p = NeuronParams::frequency_split();
    let mut c = Checks::new();
    let st = stability(&p);
    let l1 = st.lambda1.re;
    let l2 = st.lambda2.re;
    c.add(
        (l1 - 0.95).abs() <= 1e-12 && (l2 - 0.05).abs() <= 1e-12 && st.lambda1.im == 0.0 && st.lambda2.im == 0.0,
        format!("eigenvalues {l1:.15}, {l2:.15}"),
    );
    // independent eigen-solver oracle
    let a = system_matrix(&p);
    let m = Matrix2::new(a.a11, a.a12, a.a21, a.a22);
    let mut ev: Vec<f64> = m.eigenvalues().expect("real spectrum").iter().copied().collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    c.add(
        (ev[0] - l1).abs() <= 1e-12 && (ev[1] - l2).abs() <= 1e-12,
        format!("nalgebra {:.15}, {:.15}", ev[0], ev[1]),
    );
    let (hd, hs) = transfer_functions(&p);
    let hd0 = hd.evaluate(0.0).map_err(|e| e.to_string())?.magnitude;
    let hs0 = hs.evaluate(0.0).map_err(|e| e.to_string())?.magnitude;
    let hspi = hs.evaluate(std::f64::consts::PI).map_err(|e| e.to_string())?.magnitude;
    c.add((hd0 - 1.0).abs() <= 1e-12, format!("|H_d(1)| = {hd0:.15}"));
    c.add((hs0 - 0.0526).abs() <= 1e-4, format!("|H_s(1)| = {hs0:.6}"));
    c.add((hspi - 0.8829).abs() <= 1e-4, format!("|H_s(-1)| = {hspi:.6} vs 0.8829"));
    c.finish()
}

fn ac2_coefficients() -> Outcome {
    let (hd, hs) = transfer_functions(&NeuronParams::frequency_split());
    let mut c = Checks::new();
    let close = |got: &[f64], want: &[f64]| got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 1e-15);
    c.add(close(&hd.num, &[0.05, -0.0025]), format!("H_d num {:?}", hd.num));
    c.add(close(&hs.num, &[0.905, -0.9025]), format!("H_s num {:?}", hs.num));
    c.add(close(&hd.den, &[1.0, -1.0, 0.0475]), format!("den {:?}", hd.den));
    c.add(close(&hs.den, &hd.den), "shared denominator".into());
    c.finish()
}

fn ac3_bridge() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 64;
    let mut worst: f64 = 0.0;
    let mut sets = 0;
    while sets < 50 {
        let p = NeuronParams::linear(
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .map_err(|e| e.to_string())?;
        if stability(&p).verdict != Verdict::Stable {
            continue;
        }
        sets += 1;
        let mut impulse = vec![0.0; n];
        impulse[0] = 1.0;
        let frame = SeriesFrame::new(vec!["c".into()], n, impulse).unwrap();
        let trace = simulate_population(&p, &frame, &SimOptions::linear()).map_err(|e| e.to_string())?;
        let (hd, hs) = transfer_functions(&p);
        for (h, v) in [(hd, trace.v_d.unwrap()), (hs, trace.v_s.unwrap())] {
            for (a, b) in h.impulse_response(n).iter().zip(v.data()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(worst <= 1e-9, format!("50 stable sets x 64 terms, max |diff| = {worst:.3e}"))
}

fn ac4_boundary() -> Outcome {
    let grid: Vec<f64> = (0..100).map(|i| -4.0 + 6.0 * (i as f64 + 0.5) / 100.0).collect();
    let rows = sweep_stability_region(1.0, 1.0, &grid).map_err(|e| e.to_string())?;
    let mut wrong = Vec::new();
    for r in &rows {
        let ok = if r.beta_product <= 0.0 {
            (r.spectral_radius - 1.0).abs() <= 1e-9 && r.verdict == Verdict::Marginal
        } else {
            r.spectral_radius > 1.0 && r.verdict == Verdict::Unstable
        };
        if !ok {
            wrong.push(format!("{:.3}->{:.12}", r.beta_product, r.spectral_radius));
        }
    }
    check(
        wrong.is_empty(),
        format!("{} grid points on (-4, 2), misclassified: {:?}", rows.len(), wrong),
    )
}

fn ac5_decomposition() -> Outcome {
    let s = MixedStimulus::default();
    let r = decomposition_demo(&NeuronParams::frequency_split(), &TwoCompartmentParams::tc_lif(), &s)
        .map_err(|e| e.to_string())?;
    let sp = spectrum(&generate_stimulus(&s).unwrap(), s.sample_rate).unwrap();
    let f_lo = sp.frequency[sp.bin_of(0.5)];
    let f_hi = sp.frequency[sp.bin_of(4.0)];
    let ts = &r.models[0];
    let (d, so) = (ts.dendrite_hz, ts.soma_hz);
    check(
        !ts.diverged && d == Some(f_lo) && so == Some(f_hi),
        format!(
            "dendrite {d:?} Hz (bin of 0.5 = {f_lo}), soma {so:?} Hz (bin of 4 = {f_hi}); tclif reported {:?}/{:?}",
            r.models[1].dendrite_hz, r.models[1].soma_hz
        ),
    )
}

fn ac6_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = 1e-5;
    let mut checked = 0;
    let mut worst = (0.0f64, String::new());
    for g in 0..100 {
        let steps = rng.random_range(1..=10);
        let n = rng.random_range(1..=4);
        let mut cfg = NeuronConfig::new(NeuronKind::Tslif, n);
        cfg.spiking = false;
        cfg.tslif = TsLifInit {
            alpha1: rng.random_range(0.05..0.95),
            alpha2: rng.random_range(0.05..0.95),
            beta1: rng.random_range(-1.0..1.0),
            beta2: rng.random_range(-1.0..1.0),
            ..TsLifInit::default()
        };
        let mut registry = ParamRegistry::new();
        let layer = NeuronLayer::new(cfg, &mut registry, "n").map_err(|e| e.to_string())?;
        let input: Vec<f64> = (0..steps * n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let wd: Vec<f64> = (0..steps * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ws: Vec<f64> = (0..steps * n).map(|_| rng.random_range(-1.0..1.0)).collect();

        let eval = |reg: &ParamRegistry, want_grad: bool| -> (f64, Vec<Vec<f64>>) {
            let mut tape = Tape::new();
            let binding = reg.bind(&mut tape);
            let xs = sequence_constants(&mut tape, &input, steps, 1, n).unwrap();
            let (_, states) = layer.forward_states(&mut tape, &binding, &xs).unwrap();
            let mut terms = Vec::new();
            for (t, s) in states.iter().enumerate() {
                let cd = tape.constant(tslif_core::autodiff::Tensor::matrix(1, n, wd[t * n..(t + 1) * n].to_vec()).unwrap());
                let cs = tape.constant(tslif_core::autodiff::Tensor::matrix(1, n, ws[t * n..(t + 1) * n].to_vec()).unwrap());
                let a = tape.mul(cd, s.v_d).unwrap();
                let sq = tape.mul(s.v_s, s.v_s).unwrap();
                let b = tape.mul(cs, sq).unwrap();
                terms.push(tape.add(a, b).unwrap());
            }
            let mut acc = terms[0];
            for &t in &terms[1..] {
                acc = tape.add(acc, t).unwrap();
            }
            let loss = tape.sum(acc);
            let value = tape.value(loss).item();
            if !want_grad {
                return (value, Vec::new());
            }
            let grads = tape.backward(loss).unwrap();
            let gs = reg
                .entries()
                .iter()
                .map(|e| grads.get(binding.var(reg.find(&e.name).unwrap())).data().to_vec())
                .collect();
            (value, gs)
        };
        let (_, grads) = eval(&registry, true);
        for (pi, entry) in registry.entries().iter().enumerate() {
            for k in 0..entry.tensor.len() {
                let id = registry.find(&entry.name).unwrap();
                let mut plus = registry.clone();
                let mut minus = registry.clone();
                let mut tp = entry.tensor.clone();
                tp.data_mut()[k] += h;
                plus.set(id, tp).unwrap();
                let mut tm = entry.tensor.clone();
                tm.data_mut()[k] -= h;
                minus.set(id, tm).unwrap();
                let fd = (eval(&plus, false).0 - eval(&minus, false).0) / (2.0 * h);
                let an = grads[pi][k];
                let err = (an - fd).abs();
                let tol = (1e-5 * fd.abs()).max(1e-8);
                checked += 1;
                if err / tol > worst.0 {
                    worst = (err / tol, format!("graph {g} {}[{k}]: {an:.10e} vs {fd:.10e}", entry.name));
                }
            }
        }
    }
    check(
        worst.0 <= 1.0,
        format!("{checked} partials over 100 graphs, worst err/tol = {:.3} ({})", worst.0, worst.1),
    )
}

fn ac7_xor() -> Outcome {
    let cfg = XorConfig::default();
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let rows = xor_benchmark(&cfg, &[10, 20], &[0, 1, 2], &[NeuronKind::Lif, NeuronKind::Tslif], jobs)
        .map_err(|e| e.to_string())?;
    let get = |d, k| mean_accuracy(&rows, d, k).unwrap_or(f64::NAN);
    let (ts10, lif10, ts20, lif20) = (
        get(10, NeuronKind::Tslif),
        get(10, NeuronKind::Lif),
        get(20, NeuronKind::Tslif),
        get(20, NeuronKind::Lif),
    );
    let mut c = Checks::new();
    c.add(ts10 >= 0.9, format!("tslif@10 = {ts10:.3}"));
    c.add(ts10 - lif10 >= 0.1, format!("tslif-lif@10 = {:.3} (lif {lif10:.3})", ts10 - lif10));
    c.add(ts20 - lif20 >= 0.1, format!("tslif-lif@20 = {:.3} (tslif {ts20:.3}, lif {lif20:.3})", ts20 - lif20));
    c.finish()
}

fn ac8_metrics() -> Outcome {
    let col = |v: &[f64]| SeriesFrame::from_columns(vec!["y".into()], &[v.to_vec()]).unwrap();
    let (truth, pred) = (col(&[1.0, 3.0]), col(&[2.0, 2.0]));
    let e = rse(&pred, &truth).map_err(|e| e.to_string())?;
    let r = r2(&pred, &truth).map_err(|e| e.to_string())?.value;
    let rp = r2_pointwise(&pred, &truth).map_err(|e| e.to_string())?.value;
    let e0 = rse(&truth, &truth).map_err(|e| e.to_string())?;
    let r1 = r2(&truth, &truth).map_err(|e| e.to_string())?.value;
    check(
        e == 1.0 && r == 0.0 && rp == 0.0 && e0 == 0.0 && r1 == 1.0,
        format!("worked example RSE {e}, R2 {r} (pointwise {rp}); identity RSE {e0}, R2 {r1}"),
    )
}

fn ac9_energy() -> Outcome {
    let ann = energy_estimate(&EnergyModel::single(1e9, 1.0, 0.0), false).map_err(|e| e.to_string())?;
    let snn = energy_estimate(&EnergyModel::single(1e9, 4.0, 0.25), true).map_err(|e| e.to_string())?;
    check(
        ann.total_mj == 4.6 && snn.total_mj == 0.9 && snn.layers[0].operations == 1e9,
        format!("ANN {} mJ, SNN {} mJ ({} SOPs)", ann.total_mj, snn.total_mj, snn.layers[0].operations),
    )
}

fn ac10_forecast() -> Outcome {
    let ratios = [0.0, 0.2, 0.4, 0.8];
    let seeds = [0, 1, 2];
    let rows = robustness_sweep(&ForecastConfig::default(), &ratios, &seeds).map_err(|e| e.to_string())?;
    let means: Vec<f64> = ratios
        .iter()
        .map(|&q| {
            let v: Vec<f64> = rows.iter().filter(|r| r.ratio == q).map(|r| r.r2).collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect();
    let mut c = Checks::new();
    c.add(means[0] > 0.9, format!("clean R2 {:.4}", means[0]));
    c.add(
        means.windows(2).all(|w| w[1] <= w[0]),
        format!(
            "R2 by ratio {}",
            ratios
                .iter()
                .zip(&means)
                .map(|(q, m)| format!("{q}:{m:.4}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    );
    c.finish()
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 10] = [
        ("AC1", "worked example exactness", ac1_worked_example),
        ("AC2", "transfer-function coefficients", ac2_coefficients),
        ("AC3", "analysis/simulation bridge", ac3_bridge),
        ("AC4", "stability boundary", ac4_boundary),
        ("AC5", "frequency decomposition", ac5_decomposition),
        ("AC6", "gradient correctness", ac6_gradients),
        ("AC7", "delayed XOR ordering", ac7_xor),
        ("AC8", "RSE/R2 metrics", ac8_metrics),
        ("AC9", "energy model", ac9_energy),
        ("AC10", "synthetic forecasting and robustness", ac10_forecast),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {id} {name} ({secs:.2}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {id} {name} ({secs:.2}s): {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
