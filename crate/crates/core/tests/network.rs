use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::tempdir;

use tslif_core::autodiff::{Tape, Tensor};
use tslif_core::network::{
    encode, load_checkpoint, mlp_backbone, recurrent_backbone, save_checkpoint, sequence_constants,
    FlowShape, LayerConfig, LayerStack, Mode, NeuronConfig, NeuronKind, NeuronLayer, ParamRegistry,
    SpikeEncoder, SpikeEncoderConfig, TsLifInit,
};
use tslif_core::neuron::{simulate_population, SimOptions};
use tslif_core::SeriesFrame;

fn random_series(rng: &mut ChaCha8Rng, steps: usize, channels: usize, scale: f64) -> Vec<f64> {
    (0..steps * channels).map(|_| rng.random_range(-scale..scale)).collect()
}

#[test]
fn layer_forward_matches_simulation_bit_for_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 6;
    let steps = 50;
    let mut registry = ParamRegistry::new();
    let mut cfg = NeuronConfig::tslif(n);
    cfg.tslif = TsLifInit {
        alpha1: 0.8,
        alpha2: 0.3,
        beta1: 0.2,
        beta2: -0.6,
        gamma1: 0.4,
        gamma2: 0.25,
        kappa: 0.35,
    };
    let layer = NeuronLayer::new(cfg, &mut registry, "n").unwrap();
    let data = random_series(&mut rng, steps, n, 3.0);

    let mut tape = Tape::new();
    let binding = registry.bind(&mut tape);
    let inputs = sequence_constants(&mut tape, &data, steps, 1, n).unwrap();
    let (outs, states) = layer.forward_states(&mut tape, &binding, &inputs).unwrap();

    let params = layer.neuron_params(&registry).unwrap();
    let frame = SeriesFrame::new(SeriesFrame::synth_names(n), steps, data).unwrap();
    let trace = simulate_population(&params, &frame, &SimOptions::default()).unwrap();
    let (v_d, v_s, mix) = (
        trace.v_d.unwrap(),
        trace.v_s.unwrap(),
        trace.s_mix.unwrap(),
    );
    let mut spikes = 0.0;
    for t in 0..steps {
        assert_eq!(tape.value(outs[t]).data(), mix.row(t), "s_mix at step {t}");
        assert_eq!(tape.value(states[t].v_d).data(), v_d.row(t), "v_d at step {t}");
        assert_eq!(tape.value(states[t].v_s).data(), v_s.row(t), "v_s at step {t}");
        spikes += mix.row(t).iter().sum::<f64>();
    }
    assert!(spikes > 0.0, "parity check must exercise resets");
}

#[test]
fn kappa_half_mixes_dendrite_spike() {
    // alpha2 tiny and beta2 strongly negative: the dendrite fires, the soma does not.
    let mut registry = ParamRegistry::new();
    let mut cfg = NeuronConfig::tslif(1);
    cfg.tslif.alpha1 = 0.01;
    cfg.tslif.alpha2 = 0.01;
    cfg.tslif.beta2 = -2.0;
    let layer = NeuronLayer::new(cfg, &mut registry, "n").unwrap();
    let mut tape = Tape::new();
    let binding = registry.bind(&mut tape);
    let c = tape.constant(Tensor::matrix(1, 1, vec![1.5]).unwrap());
    let (outs, states) = layer.forward_states(&mut tape, &binding, &[c]).unwrap();
    assert_eq!(tape.value(states[0].s_d).item(), 1.0);
    assert_eq!(tape.value(states[0].s_s).item(), 0.0);
    assert_eq!(tape.value(outs[0]).item(), 0.5);
}

#[test]
fn linear_mode_gradient_matches_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 3;
    let steps = 12;
    let mut cfg = NeuronConfig::tslif(n);
    cfg.spiking = false;
    cfg.tslif.beta1 = 0.15;
    let mut registry = ParamRegistry::new();
    let layer = NeuronLayer::new(cfg, &mut registry, "n").unwrap();
    let data = random_series(&mut rng, steps, n, 1.0);

    let loss_of = |registry: &ParamRegistry| -> (f64, Vec<Tensor>) {
        let mut tape = Tape::new();
        let binding = registry.bind(&mut tape);
        let inputs = sequence_constants(&mut tape, &data, steps, 1, n).unwrap();
        let (_, states) = layer.forward_states(&mut tape, &binding, &inputs).unwrap();
        let mut acc = tape.mul(states[0].v_s, states[0].v_d).unwrap();
        for s in &states[1..] {
            let a = tape.mul(s.v_s, s.v_s).unwrap();
            let b = tape.mul(s.v_d, s.v_s).unwrap();
            acc = tape.add(acc, a).unwrap();
            acc = tape.add(acc, b).unwrap();
        }
        let loss = tape.sum(acc);
        let grads = tape.backward(loss).unwrap();
        let g = registry
            .entries()
            .iter()
            .enumerate()
            .map(|(i, _)| grads.get(binding_var(&binding, registry, i)))
            .collect();
        (tape.value(loss).item(), g)
    };
    fn binding_var(
        b: &tslif_core::network::Binding,
        r: &ParamRegistry,
        i: usize,
    ) -> tslif_core::autodiff::Var {
        b.var(r.find(&r.entries()[i].name).unwrap())
    }

    let (_, grads) = loss_of(&registry);
    let h = 1e-6;
    for name in ["n.alpha1_raw", "n.alpha2_raw", "n.beta1", "n.beta2"] {
        let id = registry.find(name).unwrap();
        let base = registry.get(id).item();
        let mut plus = registry.clone();
        plus.set(id, Tensor::scalar(base + h)).unwrap();
        let mut minus = registry.clone();
        minus.set(id, Tensor::scalar(base - h)).unwrap();
        let fd = (loss_of(&plus).0 - loss_of(&minus).0) / (2.0 * h);
        let idx = registry.entries().iter().position(|e| e.name == name).unwrap();
        let g = grads[idx].item();
        assert!((g - fd).abs() < 1e-5 * fd.abs().max(1.0), "{name}: {g} vs {fd}");
    }
}

#[test]
fn mlp_parameter_count() {
    let stack = mlp_backbone([20, 20, 1], NeuronConfig::tslif(20), 0).unwrap();
    // dense 20x20+20, dense 20x1+1, six shared scalars, kappa per channel
    assert_eq!(stack.registry.learnable_count(), 20 * 20 + 20 + 20 + 1 + 6 + 20);
}

#[test]
fn zero_input_reads_out_bias() {
    let mut stack = mlp_backbone([4, 8, 2], NeuronConfig::tslif(8), 1).unwrap();
    let head = stack.dense_layers()[1].bias();
    stack.registry.set(head, Tensor::vector(vec![0.25, -1.5])).unwrap();
    let (y, rates) = stack.predict(&vec![0.0; 10 * 3 * 4], 10, 3, 4).unwrap();
    assert_eq!(y.shape(), &[3, 2]);
    for row in y.data().chunks(2) {
        assert_eq!(row, &[0.25, -1.5]);
    }
    assert_eq!(rates, vec![0.0]);
}

#[test]
fn swapping_neuron_kind_changes_only_activation_block() {
    let ts = mlp_backbone([5, 7, 3], NeuronConfig::tslif(7), 9).unwrap();
    let lif = mlp_backbone([5, 7, 3], NeuronConfig::new(NeuronKind::Lif, 7), 9).unwrap();
    let names = |s: &LayerStack| -> Vec<(String, Vec<usize>)> {
        s.registry
            .entries()
            .iter()
            .filter(|e| !e.name.starts_with("layer1."))
            .map(|e| (e.name.clone(), e.tensor.shape().to_vec()))
            .collect()
    };
    assert_eq!(names(&ts), names(&lif));
    for (a, b) in ts.dense_layers().iter().zip(lif.dense_layers()) {
        assert_eq!(ts.registry.get(a.weight()), lif.registry.get(b.weight()));
    }
    assert_eq!(ts.output_shape(11, 5).unwrap(), lif.output_shape(11, 5).unwrap());
    let data = vec![0.3; 11 * 2 * 5];
    assert_eq!(lif.predict(&data, 11, 2, 5).unwrap().0.shape(), &[2, 3]);
    assert_eq!(lif.neurons()[0].lif_params(&lif.registry).unwrap().alpha(), 0.5);
}

#[test]
fn recurrent_backbone_runs() {
    let stack = recurrent_backbone([3, 6, 2], NeuronConfig::tslif(6), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = random_series(&mut rng, 9 * 2 * 3, 1, 4.0);
    let (y, rates) = stack.predict(&data, 9, 2, 3).unwrap();
    assert_eq!(y.shape(), &[2, 2]);
    assert!(y.data().iter().all(|v| v.is_finite()));
    assert_eq!(rates.len(), 1);
}

fn encoder_registry(cfg: SpikeEncoderConfig, seed: u64) -> (ParamRegistry, SpikeEncoder) {
    let mut registry = ParamRegistry::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc = SpikeEncoder::new(cfg, &mut registry, "enc", &mut rng).unwrap();
    (registry, enc)
}

#[test]
fn encoder_zero_input_gives_zero_spikes() {
    let (registry, enc) = encoder_registry(SpikeEncoderConfig::new(2, 4, 3, 2), 0);
    let x = SeriesFrame::zeros(SeriesFrame::synth_names(2), 16);
    let s = encode(&enc, &registry, &x).unwrap();
    assert_eq!(s.shape(), &[2, 16, 4]);
    assert!(s.data().iter().all(|&v| v == 0.0));

    // training-mode statistics of an all-zero batch also map to zero
    let mut tape = Tape::new();
    let binding = registry.bind(&mut tape);
    let inputs = sequence_constants(&mut tape, x.data(), 16, 1, 2).unwrap();
    let out = enc.forward(&mut tape, &binding, &inputs, Mode::Train).unwrap();
    assert!(out.spikes.iter().all(|v| tape.value(*v).data().iter().all(|&x| x == 0.0)));
}

#[test]
fn encoder_single_segment_shape() {
    let (registry, enc) = encoder_registry(SpikeEncoderConfig::new(3, 5, 4, 1), 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = SeriesFrame::new(SeriesFrame::synth_names(3), 10, random_series(&mut rng, 10, 3, 2.0)).unwrap();
    assert_eq!(encode(&enc, &registry, &x).unwrap().shape(), &[1, 10, 5]);
}

#[test]
fn encoder_rejects_short_series() {
    let (registry, enc) = encoder_registry(SpikeEncoderConfig::new(1, 2, 5, 1), 0);
    let x = SeriesFrame::zeros(SeriesFrame::synth_names(1), 4);
    assert!(matches!(
        encode(&enc, &registry, &x),
        Err(tslif_core::Error::SequenceTooShort { requested: 5, available: 4 })
    ));
}

#[test]
fn encoder_saturates_on_large_constant_input() {
    let (mut registry, enc) = encoder_registry(SpikeEncoderConfig::new(1, 1, 3, 1), 0);
    // centre tap only
    registry.set(enc.kernel(0), Tensor::matrix(3, 1, vec![0.0, 1.0, 0.0]).unwrap()).unwrap();
    let x = SeriesFrame::new(SeriesFrame::synth_names(1), 30, vec![50.0; 30]).unwrap();
    let s = encode(&enc, &registry, &x).unwrap();
    let warmup = 5;
    assert!(s.data()[warmup..].iter().all(|&v| v == 1.0), "{:?}", s.data());
}

#[test]
fn encoder_batch_norm_train_vs_eval() {
    let cfg = SpikeEncoderConfig::new(2, 3, 3, 2);
    let (registry, enc) = encoder_registry(cfg, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = random_series(&mut rng, 12 * 4, 2, 3.0);

    let run = |registry: &ParamRegistry, mode: Mode| {
        let mut tape = Tape::new();
        let binding = registry.bind(&mut tape);
        let inputs = sequence_constants(&mut tape, &data, 12, 4, 2).unwrap();
        let out = enc.forward(&mut tape, &binding, &inputs, mode).unwrap();
        let spikes: Vec<Vec<f64>> = out.spikes.iter().map(|v| tape.value(*v).data().to_vec()).collect();
        (spikes, out.stats)
    };
    let (eval_a, stats) = run(&registry, Mode::Eval);
    assert!(stats.is_empty());
    let (eval_b, _) = run(&registry, Mode::Eval);
    assert_eq!(eval_a, eval_b);

    let (_, stats) = run(&registry, Mode::Train);
    assert_eq!(stats.len(), 2);
    let mut updated = registry.clone();
    for (id, t) in stats {
        updated.set(id, t).unwrap();
    }
    assert_ne!(updated.get(enc.running_mean()), registry.get(enc.running_mean()));
    assert!(updated.get(enc.running_var()).data().iter().all(|&v| v > 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn encoder_output_lies_on_kappa_lattice(seed in 0u64..1000, kappa in 0.05f64..0.95, scale in 0.1f64..8.0) {
        let mut cfg = SpikeEncoderConfig::new(2, 3, 3, 2);
        cfg.tslif.kappa = kappa;
        let (registry, enc) = encoder_registry(cfg, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let x = SeriesFrame::new(SeriesFrame::synth_names(2), 8, random_series(&mut rng, 8, 2, scale)).unwrap();
        let s = encode(&enc, &registry, &x).unwrap();
        let k = tslif_core::autodiff::sigmoid(tslif_core::autodiff::logit(kappa));
        let lattice = [0.0, k, 1.0 - k, 1.0];
        for v in s.data() {
            prop_assert!(lattice.contains(v), "{v} not in {lattice:?}");
        }
    }

    #[test]
    fn stack_shape_algebra(
        steps in 3usize..9,
        features in 1usize..5,
        hidden in 1usize..6,
        outputs in 1usize..4,
        kind in 0usize..3,
        layout in 0usize..4,
        batch in 1usize..3,
        seed in 0u64..100,
    ) {
        let kind = [NeuronKind::Tslif, NeuronKind::Lif, NeuronKind::Relu][kind];
        let neuron = NeuronConfig::new(kind, hidden);
        let configs = match layout {
            0 => vec![
                LayerConfig::Dense { inputs: features, outputs: hidden },
                LayerConfig::Neuron(neuron),
                LayerConfig::RateReadout,
                LayerConfig::Dense { inputs: hidden, outputs },
            ],
            1 => vec![
                LayerConfig::RecurrentSpiking { inputs: features, hidden, neuron },
                LayerConfig::Flatten,
            ],
            2 => vec![
                LayerConfig::Encoder(SpikeEncoderConfig::new(features, hidden, 3, 2)),
                LayerConfig::Flatten,
                LayerConfig::Dense { inputs: steps * 2 * hidden, outputs },
            ],
            _ => vec![
                LayerConfig::Dense { inputs: features, outputs: hidden },
                LayerConfig::Neuron(neuron),
                LayerConfig::Dense { inputs: hidden, outputs },
            ],
        };
        let stack = LayerStack::new(configs, seed).unwrap();
        let predicted = stack.output_shape(steps, features).unwrap();
        let mut tape = Tape::new();
        let binding = stack.registry.bind(&mut tape);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = random_series(&mut rng, steps * batch, features, 2.0);
        let inputs = sequence_constants(&mut tape, &data, steps, batch, features).unwrap();
        let out = stack.forward(&mut tape, &binding, &inputs, Mode::Train).unwrap();
        prop_assert_eq!(out.output.shape(&tape), predicted);
        if let FlowShape::Flat { features } = predicted {
            prop_assert_eq!(tape.shape(out.output.flat().unwrap()), &[batch, features]);
        }
    }
}

#[test]
fn checkpoint_round_trip() {
    let cfg = SpikeEncoderConfig::new(2, 3, 3, 2);
    let mut stack = tslif_core::network::forecast_backbone(cfg, 8, 2, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for e in stack.registry.clone().entries() {
        let id = stack.registry.find(&e.name).unwrap();
        let t = Tensor::new(
            e.tensor.shape().to_vec(),
            (0..e.tensor.len()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        stack.registry.set(id, t).unwrap();
    }
    let dir = tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_checkpoint(&stack, &path).unwrap();
    let bytes = std::fs::read(dir.path().join("model.bin")).unwrap();
    assert_eq!(&bytes[..6], b"TSLIF1");
    let loaded = load_checkpoint(&path).unwrap();
    assert_eq!(loaded, stack);

    let data = random_series(&mut rng, 8, 2, 1.0);
    assert_eq!(
        loaded.predict(&data, 8, 1, 2).unwrap(),
        stack.predict(&data, 8, 1, 2).unwrap()
    );
}

#[test]
fn checkpoint_rejects_truncated_binary() {
    let stack = mlp_backbone([2, 3, 1], NeuronConfig::tslif(3), 0).unwrap();
    let dir = tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_checkpoint(&stack, &path).unwrap();
    let bin = dir.path().join("m.bin");
    let bytes = std::fs::read(&bin).unwrap();
    std::fs::write(&bin, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(load_checkpoint(&path), Err(tslif_core::Error::Checkpoint(_))));
}
