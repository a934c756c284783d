use proptest::prelude::*;
use rand::Rng as _;
use voltpred::nn::*;
use voltpred::rng::{substream, Domain};
use voltpred::Exec;

fn small_lstm(layers: usize, hidden: usize, input: usize, seq: usize) -> NetSpec {
    NetSpec { arch: Arch::Lstm, input_dim: input, hidden, layers, classes: 5, seq_len: seq }
}

fn random_net(spec: &NetSpec, seed: u64, scale: f64) -> Network {
    let mut rng = substream(seed, Domain::Init, 99);
    let p = (0..spec.param_count()).map(|_| rng.random_range(-scale..scale)).collect();
    Network::new(spec.clone(), p).unwrap()
}

fn random_input(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, Domain::Shuffle, 7);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn scalar_cell_matches_hand_arithmetic() {
    let mut p = LayerParams::zeros(1, 1);
    for g in [&mut p.forget, &mut p.input, &mut p.candidate, &mut p.output] {
        g.w = vec![1.0];
        g.u = vec![1.0];
    }
    let (h, c, cache) = lstm_block_forward(&p, &[1.0], &[0.0], &[1.0]).unwrap();
    // Independent scalar evaluation.
    let s1 = 1.0 / (1.0 + (-1.0f64).exp());
    let ct = 1.0f64.tanh();
    let c_want = s1 * 1.0 + s1 * ct;
    let h_want = s1 * c_want.tanh();
    assert!((c[0] - c_want).abs() <= 1e-12);
    assert!((h[0] - h_want).abs() <= 1e-12);
    assert!((cache.f[0] - 0.731_059).abs() < 1e-6);
    assert!((cache.c_tilde[0] - 0.761_594).abs() < 1e-6);
    // Values from a separate scalar script.
    assert!((c[0] - 1.287_828_519_775_944_7).abs() <= 1e-12);
    assert!((h[0] - 0.627_655_286_117_523_1).abs() <= 1e-12);
}

#[test]
fn zero_cell_pins_gates_at_half() {
    let p = LayerParams::zeros(3, 2);
    let (h, c, cache) = lstm_block_forward(&p, &[0.4, -2.0], &[0.0; 3], &[0.0; 3]).unwrap();
    assert_eq!(h, vec![0.0; 3]);
    assert_eq!(c, vec![0.0; 3]);
    assert_eq!(cache.f, vec![0.5; 3]);
    assert_eq!(cache.o, vec![0.5; 3]);
    let c0 = [1.0, -3.0, 0.2];
    let (h, c, _) = lstm_block_forward(&p, &[0.4, -2.0], &[0.0; 3], &c0).unwrap();
    for j in 0..3 {
        assert_eq!(c[j], 0.5 * c0[j]);
        assert_eq!(h[j], 0.5 * (0.5 * c0[j]).tanh());
    }
}

#[test]
fn cell_rejects_bad_shapes() {
    let p = LayerParams::zeros(3, 2);
    assert!(matches!(lstm_block_forward(&p, &[0.0; 3], &[0.0; 3], &[0.0; 3]), Err(NnError::ShapeMismatch(_))));
}

#[test]
fn zero_networks_output_uniform() {
    for spec in [NetSpec::lstm(7, 60), NetSpec::ffnn(7)] {
        let net = Network::zeros(spec.clone()).unwrap();
        let p = net.forward_window(&random_input(spec.sample_len(), 1)).unwrap();
        assert_eq!(p, vec![0.2; 5]);
    }
}

#[test]
fn zero_network_head_bias_gradient_is_p_minus_y() {
    let spec = small_lstm(2, 4, 6, 5);
    let net = Network::zeros(spec.clone()).unwrap();
    let f = net.forward(&random_input(30, 2), 1, None, true).unwrap();
    let g = net.backward(&f, &[3]).unwrap();
    let hb = &g.grad[net.layout().head_b.clone()];
    for (k, &v) in hb.iter().enumerate() {
        let want = 0.2 - if k == 3 { 1.0 } else { 0.0 };
        assert!((v - want).abs() < 1e-10, "{k}: {v}");
    }
    assert!((g.loss_sum - 5f64.ln()).abs() < 1e-10);
}

#[test]
fn batched_network_matches_stepwise_cells() {
    let spec = small_lstm(3, 4, 6, 7);
    let net = random_net(&spec, 5, 0.7);
    let x = random_input(2 * spec.sample_len(), 3);
    let probs = net.forward(&x, 2, None, false).unwrap().probs;
    let layers: Vec<_> = (0..3).map(|l| net.lstm_layer(l).unwrap()).collect();
    for b in 0..2 {
        let mut h = vec![vec![0.0; 4]; 3];
        let mut c = vec![vec![0.0; 4]; 3];
        for t in 0..7 {
            let mut inp = x[(b * 7 + t) * 6..(b * 7 + t + 1) * 6].to_vec();
            for l in 0..3 {
                let (hn, cn, _) = lstm_block_forward(&layers[l], &inp, &h[l], &c[l]).unwrap();
                h[l] = hn.clone();
                c[l] = cn;
                inp = hn;
            }
        }
        let hw = &net.params()[net.layout().head_w.clone()];
        let hb = &net.params()[net.layout().head_b.clone()];
        let logits: Vec<f64> = (0..5).map(|k| hb[k] + (0..4).map(|j| hw[k * 4 + j] * h[2][j]).sum::<f64>()).collect();
        let want = softmax(&logits);
        for k in 0..5 {
            assert!((probs[b * 5 + k] - want[k]).abs() < 1e-13);
        }
    }
}

#[test]
fn lstm_gradients_match_finite_differences() {
    let start = std::time::Instant::now();
    let mut worst: f64 = 0.0;
    for trial in 0..20u64 {
        let layers = 1 + (trial as usize % 2);
        let hidden = 1 + (trial as usize % 4);
        worst = worst.max(gradient_check(&small_lstm(layers, hidden, 6, 5), 1, trial).unwrap());
    }
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn ffnn_gradients_match_finite_differences() {
    let spec = NetSpec { hidden: 4, ..NetSpec::ffnn(6) };
    let worst = gradient_check(&spec, 4, 11).unwrap();
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
}

#[test]
fn backward_is_pure_and_needs_a_cache() {
    let spec = small_lstm(2, 3, 6, 5);
    let net = random_net(&spec, 1, 0.5);
    let x = random_input(30, 1);
    let f = net.forward(&x, 1, None, true).unwrap();
    assert_eq!(net.backward(&f, &[2]).unwrap(), net.backward(&f, &[2]).unwrap());
    let bare = net.forward(&x, 1, None, false).unwrap();
    assert!(matches!(net.backward(&bare, &[2]), Err(NnError::MissingCache)));
}

#[test]
fn masked_connections_get_zero_gradient() {
    let spec = small_lstm(1, 3, 6, 4);
    let net = random_net(&spec, 2, 0.5);
    let mut rng = substream(0, Domain::Dropout, 0);
    let mut masks = sample_dropout_masks(&mut rng, 0.0, 0.0, &spec).unwrap();
    masks.input[0][2] = 0.0;
    let f = net.forward(&random_input(24, 4), 1, Some(std::slice::from_ref(&masks)), true).unwrap();
    let g = net.backward(&f, &[1]).unwrap().grad;
    let w = net.layout().layers[0].w.clone();
    for row in 0..12 {
        assert_eq!(g[w.start + row * 6 + 2], 0.0);
    }
}

#[test]
fn sequence_length_is_enforced() {
    let net = Network::zeros(NetSpec::lstm(4, 60)).unwrap();
    assert!(matches!(
        net.forward_window(&[0.0; 4 * 30]),
        Err(NnError::SequenceLengthMismatch { expected: 60, got: 30 })
    ));
    assert!(matches!(net.forward_window(&[0.0; 7]), Err(NnError::ShapeMismatch(_))));
}

#[test]
fn early_steps_reach_the_output() {
    let spec = NetSpec::lstm(6, 60);
    let net = Network::init(spec.clone(), 9).unwrap();
    let x = random_input(spec.sample_len(), 9);
    let mut y = x.clone();
    y[0] += 1.0;
    let a = net.forward_window(&x).unwrap();
    assert_eq!(a, net.forward_window(&x).unwrap());
    assert_ne!(a, net.forward_window(&y).unwrap());
}

#[test]
fn batch_stats_do_not_depend_on_workers() {
    let spec = small_lstm(2, 5, 6, 8);
    let net = random_net(&spec, 4, 0.4);
    let n = 70;
    let x = random_input(n * spec.sample_len(), 5);
    let targets: Vec<usize> = (0..n).map(|i| i % 5).collect();
    let seq = net.batch_stats(&x, &targets, None, Exec::Sequential).unwrap();
    for w in [2, 8] {
        assert_eq!(net.batch_stats(&x, &targets, None, Exec::with_workers(w)).unwrap(), seq);
    }
    let probs = net.predict(&x, n, Exec::with_workers(3)).unwrap();
    assert_eq!(probs, net.forward(&x, n, None, false).unwrap().probs);
    let loss: f64 = (0..n).map(|b| cross_entropy_index(&probs[b * 5..b * 5 + 5], targets[b])).sum();
    assert!((seq.loss_sum - loss).abs() < 1e-9);
}

#[test]
fn dropout_rates() {
    let mut rng = substream(1, Domain::Dropout, 0);
    assert!(bernoulli_mask(&mut rng, 100, 0.0).iter().all(|&v| v == 1.0));
    let m = bernoulli_mask(&mut rng, 1_000_000, 0.5);
    let kept = m.iter().filter(|&&v| v != 0.0).count() as f64 / 1e6;
    assert!((0.498..=0.502).contains(&kept), "{kept}");
    assert!(m.iter().all(|&v| v == 0.0 || v == 2.0));
    let spec = NetSpec::lstm(52, 60);
    let masks = sample_dropout_masks(&mut rng, 0.5, 0.5, &spec).unwrap();
    assert_eq!(masks.input[0].len(), 52);
    assert_eq!(masks.input[2].len(), 32);
    assert_eq!(masks.recurrent.len(), 3);
    assert!(sample_dropout_masks(&mut rng, 1.0, 0.0, &spec).is_err());
}

#[test]
fn adam_closed_forms() {
    let cfg = AdamConfig::default();
    let mut p = vec![1.0, -2.0, 0.5];
    let mut st = AdamState::new(3);
    st.step(&mut p, &[0.3, -7.0, 1e-3], &cfg).unwrap();
    let want = [1.0 - 1e-4, -2.0 + 1e-4, 0.5 - 1e-4];
    for k in 0..3 {
        assert!((p[k] - want[k]).abs() <= 1e-4 * 1e-3, "{k}");
    }
    let before = p.clone();
    let m0 = st.m.clone();
    st.step(&mut p, &[0.0; 3], &cfg).unwrap();
    assert!(st.m.iter().zip(&m0).all(|(a, b)| a.abs() < b.abs()));
    assert_eq!(st.t, 2);
    // Momentum keeps moving parameters; a fresh state with zero gradient does not.
    let mut q = before.clone();
    AdamState::new(3).step(&mut q, &[0.0; 3], &cfg).unwrap();
    assert_eq!(q, before);
    assert!(st.step(&mut p, &[0.0; 2], &cfg).is_err());
}

#[test]
fn adam_is_deterministic() {
    let run = || {
        let mut p = vec![0.1; 4];
        let mut st = AdamState::new(4);
        for k in 0..50 {
            let g: Vec<f64> = (0..4).map(|i| ((k * 4 + i) as f64).sin()).collect();
            st.step(&mut p, &g, &AdamConfig::default()).unwrap();
        }
        p
    };
    assert_eq!(run(), run());
}

#[test]
fn checkpoint_round_trip_and_guards() {
    let dir = tempfile::tempdir().unwrap();
    let spec = NetSpec { hidden: 6, ..NetSpec::lstm(9, 10) };
    let net = Network::init(spec, 42).unwrap();
    let norm = Normalization { mean: (0..9).map(|i| i as f64 / 3.0).collect(), std: vec![0.1 + 1e-17; 9] };
    let ck = Checkpoint::new(net, norm, 42, "abc".into());
    ck.save(dir.path()).unwrap();
    let back = Checkpoint::load_for(dir.path(), 9).unwrap();
    assert_eq!(back, ck);
    assert!(back.net.params().iter().zip(ck.net.params()).all(|(a, b)| a.to_bits() == b.to_bits()));

    assert!(matches!(Checkpoint::load_for(dir.path(), 10), Err(NnError::DimensionMismatch { expected: 10, got: 9 })));

    let blob = dir.path().join(PARAMS_FILE);
    let mut bytes = std::fs::read(&blob).unwrap();
    bytes[17] ^= 1;
    std::fs::write(&blob, bytes).unwrap();
    assert!(matches!(Checkpoint::load(dir.path()), Err(NnError::CorruptCheckpoint(_))));
}

proptest! {
    #[test]
    fn cell_outputs_stay_bounded(
        w in prop::collection::vec(-4.0f64..4.0, 4 * 3 * 2),
        u in prop::collection::vec(-4.0f64..4.0, 4 * 3 * 3),
        x in prop::collection::vec(-5.0f64..5.0, 2),
        h in prop::collection::vec(-1.0f64..1.0, 3),
        c in prop::collection::vec(-10.0f64..10.0, 3),
    ) {
        let mut p = LayerParams::zeros(3, 2);
        for (g, gate) in [&mut p.forget, &mut p.input, &mut p.candidate, &mut p.output].into_iter().enumerate() {
            gate.w = w[g * 6..(g + 1) * 6].to_vec();
            gate.u = u[g * 9..(g + 1) * 9].to_vec();
        }
        let (hn, cn, cache) = lstm_block_forward(&p, &x, &h, &c).unwrap();
        for j in 0..3 {
            for v in [cache.f[j], cache.i[j], cache.o[j]] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(cache.c_tilde[j].abs() <= 1.0);
            prop_assert!(hn[j].abs() <= 1.0);
            prop_assert!((cn[j] - (cache.f[j] * c[j] + cache.i[j] * cache.c_tilde[j])).abs() < 1e-12);
            prop_assert!((hn[j] - cache.o[j] * cn[j].tanh()).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_sums_to_one_and_ignores_shifts(z in prop::collection::vec(-30.0f64..30.0, 1..8), shift in -50.0f64..50.0) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        let q = softmax(&z.iter().map(|v| v + shift).collect::<Vec<_>>());
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_is_nonnegative(z in prop::collection::vec(-10.0f64..10.0, 5), k in 0usize..5) {
        let p = softmax(&z);
        let y = voltpred::scenario::StabilityClass::from_index(k).unwrap().one_hot();
        prop_assert!(cross_entropy(&p, &y) >= 0.0);
        prop_assert_eq!(cross_entropy(&p, &y), cross_entropy_index(&p, k));
    }
}
