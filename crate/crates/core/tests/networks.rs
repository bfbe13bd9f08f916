use polecart::autodiff::{ParameterSet, Tensor};
use polecart::env::PartialObservation;
use polecart::qnets::{
    self, drqn, dtqn, forward, forward_batch, init_parameters, layout, multi_head_self_attention,
    ArchitectureConfig, Init, ObservationWindow, Readout, Variant,
};
use polecart::stream;
use polecart::verify::random_window;

/// `0.5 sin(1.7 t + 0.31 k + phase)` for element `k` of the `t`-th tensor of
/// the layout.
fn filled(config: &ArchitectureConfig, phase: f64) -> ParameterSet {
    let mut set = ParameterSet::new();
    for (t, (name, rows, cols, _)) in layout(config).into_iter().enumerate() {
        let v = (0..rows * cols)
            .map(|k| 0.5 * (1.7 * t as f64 + 0.31 * k as f64 + phase).sin())
            .collect();
        set.insert(name, Tensor::param(rows, cols, v).unwrap()).unwrap();
    }
    set
}

fn window(obs: &[(f64, f64)]) -> ObservationWindow {
    ObservationWindow::from_observations(obs.iter().map(|&(x, t)| PartialObservation::new(x, t)))
}

fn oracle_windows() -> [ObservationWindow; 2] {
    [
        window(&[(0.1, -0.05), (0.3, 0.02), (-0.4, 0.11), (1.2, -0.2)]),
        window(&[(-1.0, 0.15), (0.0, 0.0), (0.5, -0.1), (2.0, 0.05)]),
    ]
}

fn assert_close(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len());
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!((g - w).abs() <= tol, "entry {i}: {g} vs {w}");
    }
}

fn batch_q(config: &ArchitectureConfig, params: &ParameterSet) -> Vec<f64> {
    let windows = oracle_windows();
    let refs: Vec<&ObservationWindow> = windows.iter().collect();
    forward_batch(config, params, &refs).unwrap().to_vec()
}

fn dqn_config() -> ArchitectureConfig {
    ArchitectureConfig {
        hidden_dim: 3,
        ..ArchitectureConfig::new(Variant::Dqn)
    }
}

fn drqn_config() -> ArchitectureConfig {
    ArchitectureConfig {
        gru_input_dim: 3,
        gru_hidden_dim: 4,
        ..ArchitectureConfig::new(Variant::Drqn)
    }
}

fn dtqn_config() -> ArchitectureConfig {
    ArchitectureConfig {
        model_dim: 4,
        n_heads: 2,
        n_layers: 2,
        feedforward_dim: 6,
        ..ArchitectureConfig::new(Variant::Dtqn)
    }
}

// Reference values below come from the same parameters loaded into
// torch.nn.Linear / GRUCell / TransformerEncoderLayer in float64.

#[test]
fn dqn_matches_reference_mlp() {
    let q = batch_q(&dqn_config(), &filled(&dqn_config(), 1.0));
    let want = [
        -0.03670823862288737,
        -0.18770982956757654,
        0.03429754278277497,
        -0.1573768467237402,
    ];
    assert_close(&q, &want, 1e-12);
}

#[test]
fn drqn_matches_reference_gru() {
    let q = batch_q(&drqn_config(), &filled(&drqn_config(), 0.2));
    let want = [0.5489393014176075, 0.5642600024960363, 0.574248599714652, 0.5955860625084486];
    assert_close(&q, &want, 1e-12);
}

#[test]
fn dtqn_matches_reference_encoder() {
    let config = dtqn_config();
    let params = filled(&config, 0.2);
    let q = batch_q(&config, &params);
    let want = [
        -0.33008947353509044,
        -0.5694856230132612,
        -0.33880086824998906,
        -0.5838628460714698,
    ];
    assert_close(&q, &want, 1e-12);

    let windows = oracle_windows();
    let refs: Vec<&ObservationWindow> = windows.iter().collect();
    let (_, weights) = dtqn::encode(&config, &params, &refs).unwrap();
    let w00 = [
        0.21467585071565937, 0.31880566098566754, 0.3593827358627913, 0.10713575243588196,
        0.20759597002049476, 0.32408313134464284, 0.37327621305068426, 0.09504468558417815,
        0.23267855941431337, 0.2952215301174857, 0.31879839494857865, 0.15330151551962218,
        0.2325760851170471, 0.29936486230405723, 0.31927076180731956, 0.14878829077157604,
    ];
    let w11 = [
        0.24132067690669057, 0.2778973113554187, 0.24468224378167988, 0.23609976795621085,
        0.24022925662202954, 0.2833468653822377, 0.24386840199274154, 0.23255547600299117,
        0.23551122023291557, 0.29296662583304606, 0.24108840178652424, 0.23043375214751416,
        0.20589121429202104, 0.3700843578634939, 0.2209017821391023, 0.2031226457053827,
    ];
    assert_close(&weights[0][0][0].to_vec(), &w00, 1e-12);
    assert_close(&weights[0][1][1].to_vec(), &w11, 1e-12);
}

#[test]
fn dtqn_mean_pool_without_positions_matches_reference() {
    let config = ArchitectureConfig {
        positional_encoding: false,
        readout: Readout::MeanPool,
        ..dtqn_config()
    };
    let q = batch_q(&config, &filled(&config, 0.2));
    let want = [
        -0.11321682657898743,
        -0.2806970354622246,
        -0.08727779744873364,
        -0.2609412955313019,
    ];
    assert_close(&q, &want, 1e-12);
}

#[test]
fn dqn_zero_window_and_zero_head_gives_zero() {
    let config = ArchitectureConfig::new(Variant::Dqn);
    let params = init_parameters(&config, &mut stream(3)).unwrap();
    params.get("out.weight").unwrap().data_mut().fill(0.0);
    let w = ObservationWindow::padded(PartialObservation::new(0.0, 0.0), 4);
    assert_eq!(forward(&config, &params, &w).unwrap().0, [0.0, 0.0]);
}

#[test]
fn drqn_with_zero_gru_weights_follows_hand_recurrence() {
    // r = z = sigmoid(0) = 1/2 and n = tanh(1) at every step, so
    // h_t = tanh(1)/2 + h_{t-1}/2 and h_4 = (15/16) tanh(1).
    let config = ArchitectureConfig {
        gru_input_dim: 2,
        gru_hidden_dim: 3,
        ..ArchitectureConfig::new(Variant::Drqn)
    };
    let params = init_parameters(&config, &mut stream(5)).unwrap();
    for (name, t) in params.iter() {
        if name.starts_with("gru.") {
            t.data_mut().fill(if name == "gru.b_in" { 1.0 } else { 0.0 });
        }
    }
    params.get("out.weight").unwrap().data_mut().fill(1.0);
    params.get("out.bias").unwrap().data_mut().copy_from_slice(&[0.5, -0.5]);
    let w = window(&[(0.3, 0.1), (-0.2, 0.05), (1.0, -0.1), (0.7, 0.2)]);
    let q = forward(&config, &params, &w).unwrap().0;
    assert_close(&q, &[2.6419835636255886, 1.6419835636255886], 1e-15);
}

fn scalar_gru(params: &ParameterSet, x: &[f64], h: &[f64]) -> Vec<f64> {
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let hidden = h.len();
    let affine = |w: &str, b: &str, v: &[f64], j: usize| {
        let w = params.get(w).unwrap().to_vec();
        let b = params.get(b).unwrap().to_vec();
        b[j] + v.iter().enumerate().map(|(i, vi)| vi * w[i * hidden + j]).sum::<f64>()
    };
    (0..hidden)
        .map(|j| {
            let r = sig(affine("gru.w_ir", "gru.b_ir", x, j) + affine("gru.w_hr", "gru.b_hr", h, j));
            let z = sig(affine("gru.w_iz", "gru.b_iz", x, j) + affine("gru.w_hz", "gru.b_hz", h, j));
            let n = (affine("gru.w_in", "gru.b_in", x, j) + r * affine("gru.w_hn", "gru.b_hn", h, j)).tanh();
            (1.0 - z) * n + z * h[j]
        })
        .collect()
}

#[test]
fn single_step_window_is_one_gru_cell() {
    let config = ArchitectureConfig {
        window_length: 1,
        gru_input_dim: 3,
        gru_hidden_dim: 4,
        ..ArchitectureConfig::new(Variant::Drqn)
    };
    let params = filled(&config, 0.4);
    let w = window(&[(0.6, -0.15)]);
    let proj = drqn::project_step(&params, &[&w], 0).unwrap().to_vec();
    let h = scalar_gru(&params, &proj, &[0.0; 4]);
    assert_close(&drqn::final_hidden(&params, &[&w]).unwrap().to_vec(), &h, 1e-15);

    let out_w = params.get("out.weight").unwrap().to_vec();
    let out_b = params.get("out.bias").unwrap().to_vec();
    let q: Vec<f64> = (0..2)
        .map(|a| out_b[a] + (0..4).map(|j| h[j] * out_w[j * 2 + a]).sum::<f64>())
        .collect();
    assert_close(&forward(&config, &params, &w).unwrap().0, &q, 1e-15);
}

#[test]
fn drqn_unroll_matches_incremental_cell() {
    let config = drqn_config();
    let params = filled(&config, 0.9);
    let mut rng = stream(17);
    for _ in 0..10 {
        let long = random_window(&mut rng, 5);
        let prefix = ObservationWindow::from_observations(long.iter().take(4).copied());
        let h4 = drqn::final_hidden(&params, &[&prefix]).unwrap();
        let x5 = drqn::project_step(&params, &[&long], 4).unwrap();
        let stepped = drqn::gru_cell(&params, &x5, Some(&h4)).unwrap();
        let unrolled = drqn::final_hidden(&params, &[&long]).unwrap();
        assert_eq!(stepped.to_vec(), unrolled.to_vec());
    }
}

#[test]
fn attention_hand_example() {
    // Two positions, one head of width 2, identity query/key maps.
    let config = ArchitectureConfig {
        model_dim: 2,
        n_heads: 1,
        ..ArchitectureConfig::new(Variant::Dtqn)
    };
    let mut params = ParameterSet::new();
    let eye = || Tensor::param(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    params.insert("layer0.attn.head0.query", eye()).unwrap();
    params.insert("layer0.attn.head0.key", eye()).unwrap();
    params
        .insert("layer0.attn.head0.value", Tensor::param(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap())
        .unwrap();
    params.insert("layer0.attn.out.weight", eye()).unwrap();
    params.insert("layer0.attn.out.bias", Tensor::param(1, 2, vec![0.0, 0.0]).unwrap()).unwrap();
    let x = Tensor::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let out = multi_head_self_attention(&config, &params, 0, &x, 2).unwrap();
    // a = softmax([1/sqrt 2, 0])[0]
    let a = 0.6697615493266569;
    assert_close(&out.weights[0][0].to_vec(), &[a, 1.0 - a, 1.0 - a, a], 1e-15);
    assert_close(
        &out.output.to_vec(),
        &[1.6604769013466862, 2.6604769013466862, 2.3395230986533138, 3.3395230986533138],
        1e-14,
    );

    let single = Tensor::new(1, 2, vec![0.5, -2.0]).unwrap();
    let out = multi_head_self_attention(&config, &params, 0, &single, 1).unwrap();
    assert_eq!(out.weights[0][0].to_vec(), vec![1.0]);
    assert_close(&out.output.to_vec(), &[0.5 - 6.0, 1.0 - 8.0], 1e-15);
}

#[test]
fn attention_rows_sum_to_one() {
    let config = dtqn_config();
    let params = init_parameters(&config, &mut stream(8)).unwrap();
    let mut rng = stream(9);
    let windows: Vec<_> = (0..3).map(|_| random_window(&mut rng, 4)).collect();
    let refs: Vec<&ObservationWindow> = windows.iter().collect();
    let (_, weights) = dtqn::encode(&config, &params, &refs).unwrap();
    for layer in &weights {
        for seq in layer {
            for head in seq {
                for row in head.to_vec().chunks(4) {
                    assert!(row.iter().all(|&v| v >= 0.0));
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn identical_observations_without_positions_attend_uniformly() {
    let config = ArchitectureConfig {
        positional_encoding: false,
        ..dtqn_config()
    };
    let params = init_parameters(&config, &mut stream(21)).unwrap();
    let w = ObservationWindow::padded(PartialObservation::new(0.4, -0.07), 4);
    let (_, weights) = dtqn::encode(&config, &params, &[&w]).unwrap();
    for layer in &weights {
        for head in &layer[0] {
            for v in head.to_vec() {
                assert!((v - 0.25).abs() < 1e-15, "{v}");
            }
        }
    }
}

fn permuted(w: &ObservationWindow, order: &[usize]) -> ObservationWindow {
    let obs: Vec<PartialObservation> = w.iter().copied().collect();
    ObservationWindow::from_observations(order.iter().map(|&i| obs[i]))
}

#[test]
fn mean_pooled_dtqn_without_positions_is_permutation_invariant() {
    let config = ArchitectureConfig {
        positional_encoding: false,
        readout: Readout::MeanPool,
        ..ArchitectureConfig::new(Variant::Dtqn)
    };
    let params = init_parameters(&config, &mut stream(4)).unwrap();
    let mut rng = stream(5);
    for _ in 0..20 {
        let w = random_window(&mut rng, 4);
        let base = forward(&config, &params, &w).unwrap().0;
        for order in [[3, 2, 1, 0], [1, 0, 3, 2], [2, 3, 0, 1]] {
            let q = forward(&config, &params, &permuted(&w, &order)).unwrap().0;
            assert_close(&q, &base, 1e-12);
        }
    }
}

#[test]
fn positional_encoding_breaks_permutation_invariance() {
    let config = ArchitectureConfig {
        readout: Readout::MeanPool,
        ..ArchitectureConfig::new(Variant::Dtqn)
    };
    let params = init_parameters(&config, &mut stream(4)).unwrap();
    let w = random_window(&mut stream(6), 4);
    let a = forward(&config, &params, &w).unwrap().0;
    let b = forward(&config, &params, &permuted(&w, &[3, 2, 1, 0])).unwrap().0;
    assert!((a[0] - b[0]).abs() > 1e-9 || (a[1] - b[1]).abs() > 1e-9);
}

#[test]
fn positional_encoding_table() {
    let pe = dtqn::positional_encoding(3, 4);
    // position 0: sin 0, cos 0; position 2, pair 1: sin/cos(2 / 100)
    assert_eq!(&pe[..4], &[0.0, 1.0, 0.0, 1.0]);
    assert_close(&pe[8..], &[2f64.sin(), 2f64.cos(), 0.02f64.sin(), 0.02f64.cos()], 0.0);
}

#[test]
fn every_variant_returns_two_finite_values() {
    let mut rng = stream(30);
    for variant in Variant::ALL {
        let config = ArchitectureConfig::new(variant);
        let params = init_parameters(&config, &mut rng).unwrap();
        for _ in 0..20 {
            let q = forward(&config, &params, &random_window(&mut rng, 4)).unwrap();
            assert!(q.0.iter().all(|v| v.is_finite()));
        }
        let windows: Vec<_> = (0..5).map(|_| random_window(&mut rng, 4)).collect();
        let refs: Vec<&ObservationWindow> = windows.iter().collect();
        assert_eq!(forward_batch(&config, &params, &refs).unwrap().shape(), [5, 2]);
    }
}

#[test]
fn batched_forward_matches_single_windows() {
    let mut rng = stream(31);
    for variant in Variant::ALL {
        let config = ArchitectureConfig::new(variant);
        let params = init_parameters(&config, &mut rng).unwrap();
        let windows: Vec<_> = (0..4).map(|_| random_window(&mut rng, 4)).collect();
        let refs: Vec<&ObservationWindow> = windows.iter().collect();
        let batch = forward_batch(&config, &params, &refs).unwrap().to_vec();
        for (i, w) in windows.iter().enumerate() {
            let q = forward(&config, &params, w).unwrap().0;
            assert_close(&q, &batch[2 * i..2 * i + 2], 1e-12);
        }
    }
}

#[test]
fn wrong_window_length_is_rejected() {
    let short = random_window(&mut stream(1), 3);
    for variant in Variant::ALL {
        let config = ArchitectureConfig::new(variant);
        let params = init_parameters(&config, &mut stream(2)).unwrap();
        assert!(matches!(
            forward(&config, &params, &short),
            Err(polecart::Error::WindowLength { expected: 4, got: 3 })
        ));
    }
    let dqn = ArchitectureConfig::new(Variant::Dqn);
    let params = init_parameters(&dqn, &mut stream(2)).unwrap();
    assert!(qnets::forward_drqn(&dqn, &params, &random_window(&mut stream(1), 4)).is_err());
}

#[test]
fn heads_must_divide_model_dim() {
    let config = ArchitectureConfig {
        model_dim: 6,
        n_heads: 4,
        ..ArchitectureConfig::new(Variant::Dtqn)
    };
    assert!(config.validate().is_err());
    assert!(init_parameters(&config, &mut stream(0)).is_err());
}

#[test]
fn init_draws_match_layout() {
    let config = ArchitectureConfig::new(Variant::Dtqn);
    let params = init_parameters(&config, &mut stream(12)).unwrap();
    for ((name, t), (lname, rows, _, init)) in params.iter().zip(layout(&config)) {
        assert_eq!(name, lname);
        let bound = (1.0 / rows as f64).sqrt();
        match init {
            Init::Zeros => assert!(t.data().iter().all(|&v| v == 0.0)),
            Init::Ones => assert!(t.data().iter().all(|&v| v == 1.0)),
            Init::Uniform => assert!(t.data().iter().all(|&v| v.abs() <= bound)),
        }
    }
}
