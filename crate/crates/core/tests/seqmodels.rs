use regpomdp::rng::seeded;
use regpomdp::seqmodels::{
    linear_attention_dual_check, lru_init, lru_recurrence, Backbone, BackboneConfig, Bound, Carry, GptConfig, LruConfig, LstmConfig,
    ModelError, ScanMode,
};
use regpomdp::tensor::gradcheck::check;
use regpomdp::tensor::{ParamStore, Tape, Tensor, TensorError, Var};

fn configs() -> Vec<BackboneConfig> {
    vec![
        BackboneConfig::Lstm(LstmConfig { hidden: 5, layers: 2 }),
        BackboneConfig::Gpt(GptConfig {
            hidden: 6,
            heads: 2,
            layers: 2,
            max_positions: 40,
        }),
        BackboneConfig::Lru(LruConfig::new(5, 2)),
        BackboneConfig::Lru(LruConfig {
            mode: ScanMode::Scan,
            ..LruConfig::new(5, 2)
        }),
    ]
}

fn build(cfg: &BackboneConfig, input_dim: usize, seed: u64) -> (Backbone, ParamStore) {
    let mut store = ParamStore::new();
    let m = Backbone::new(cfg, input_dim, &mut store, "m", &mut seeded(seed)).unwrap();
    (m, store)
}

fn run(m: &Backbone, store: &ParamStore, u: &Tensor, carry: &Carry) -> (Tensor, Carry) {
    let tape = Tape::new();
    let p = Bound::frozen(&tape, store);
    let (y, c) = m.forward(&p, tape.constant(u.clone()), carry).unwrap();
    (y.to_tensor(), c)
}

fn rows(t: &Tensor, from: usize, to: usize) -> Vec<f64> {
    let per = t.len() / t.shape()[0];
    t.data()[from * per..to * per].to_vec()
}

#[test]
fn chunked_processing_equals_one_shot() {
    for cfg in configs() {
        let (m, store) = build(&cfg, 3, 1);
        let u = Tensor::randn(&[12, 2, 3], 1.0, &mut seeded(2));
        let (full, _) = run(&m, &store, &u, &m.initial_carry(2));
        let mut carry = m.initial_carry(2);
        let mut pieces = vec![];
        for (a, b) in [(0, 5), (5, 6), (6, 12)] {
            let chunk = Tensor::new(&[b - a, 2, 3], rows(&u, a, b)).unwrap();
            let (y, c) = run(&m, &store, &chunk, &carry);
            pieces.extend_from_slice(y.data());
            carry = c;
        }
        let diff = full.data().iter().zip(&pieces).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{}: chunked differs by {}", cfg.kind_name(), diff);
    }
}

#[test]
fn gpt_token_by_token_cache_matches_full_forward() {
    let cfg = BackboneConfig::Gpt(GptConfig {
        hidden: 16,
        heads: 4,
        layers: 2,
        max_positions: 64,
    });
    let (m, store) = build(&cfg, 4, 3);
    let u = Tensor::randn(&[30, 3, 4], 1.0, &mut seeded(4));
    let (full, _) = run(&m, &store, &u, &m.initial_carry(3));
    let mut carry = m.initial_carry(3);
    let mut max = 0.0f64;
    for t in 0..30 {
        let step = Tensor::new(&[1, 3, 4], rows(&u, t, t + 1)).unwrap();
        let (y, c) = run(&m, &store, &step, &carry);
        carry = c;
        for (a, b) in y.data().iter().zip(rows(&full, t, t + 1)) {
            max = max.max((a - b).abs());
        }
    }
    assert!(max < 1e-8, "cache vs full: {}", max);
}

#[test]
fn outputs_are_causal() {
    for cfg in configs() {
        let (m, store) = build(&cfg, 3, 5);
        let u = Tensor::randn(&[10, 1, 3], 1.0, &mut seeded(6));
        let (base, _) = run(&m, &store, &u, &m.initial_carry(1));
        for j in [3, 7, 9] {
            let mut v = u.clone();
            v.data_mut()[j * 3] += 0.5;
            let (pert, _) = run(&m, &store, &v, &m.initial_carry(1));
            assert_eq!(rows(&base, 0, j), rows(&pert, 0, j), "{}: step {} leaks backwards", cfg.kind_name(), j);
            assert_ne!(rows(&base, j, j + 1), rows(&pert, j, j + 1));
        }
    }
}

#[test]
fn lru_sequential_and_scan_agree_at_length_256() {
    let mut rng = seeded(7);
    let init = lru_init(&mut rng, 16, 0.5, 0.99, std::f64::consts::PI / 10.0).unwrap();
    let lambda: Vec<f64> = init
        .modulus()
        .iter()
        .zip(&init.theta)
        .flat_map(|(r, th)| [r * th.cos(), r * th.sin()])
        .collect();
    let inputs = Tensor::randn(&[2, 256, 32], 1.0, &mut rng);
    let x0 = Tensor::randn(&[2, 32], 1.0, &mut rng);
    let eval = |mode| {
        let tape = Tape::new();
        lru_recurrence(
            tape.constant(Tensor::from_vec(lambda.clone())),
            tape.constant(inputs.clone()),
            tape.constant(x0.clone()),
            mode,
        )
        .unwrap()
        .to_tensor()
    };
    let diff = eval(ScanMode::Sequential).max_abs_diff(&eval(ScanMode::Scan));
    assert!(diff < 1e-10, "sequential vs scan: {}", diff);

    let (m, store) = build(&BackboneConfig::Lru(LruConfig::new(8, 2)), 3, 8);
    let Backbone::Lru(lru) = &m else { unreachable!() };
    let u = Tensor::randn(&[256, 2, 3], 1.0, &mut rng);
    let tape = Tape::new();
    let p = Bound::frozen(&tape, &store);
    let (a, _) = lru.forward_with_mode(&p, tape.constant(u.clone()), &m.initial_carry(2), ScanMode::Sequential).unwrap();
    let (b, _) = lru.forward_with_mode(&p, tape.constant(u), &m.initial_carry(2), ScanMode::Scan).unwrap();
    assert!(a.value().max_abs_diff(&b.value()) < 1e-10);
}

#[test]
fn linear_attention_forms_agree_at_length_128() {
    let r = linear_attention_dual_check(&mut seeded(9), 128, 16);
    assert!(r.max_diff < 1e-8, "{}", r.max_diff);
}

fn as_tensor_error(e: ModelError) -> TensorError {
    match e {
        ModelError::Tensor(t) => t,
        other => TensorError::Invalid {
            op: "model",
            msg: other.to_string(),
        },
    }
}

#[test]
fn model_gradients_match_finite_differences() {
    for cfg in configs() {
        for seed in 0..20 {
            let (m, store) = build(&cfg, 2, 100 + seed);
            let mut inputs = store.tensors().to_vec();
            inputs.push(Tensor::randn(&[5, 1, 2], 1.0, &mut seeded(200 + seed)));
            let w = Tensor::randn(&[5, 1, cfg.hidden()], 1.0, &mut seeded(300 + seed));
            let carry = m.initial_carry(1);
            let r = check(&inputs, 1e-5, |tape, vars| {
                let (params, u) = vars.split_at(vars.len() - 1);
                let p = Bound::from_vars(params.to_vec());
                let (y, _) = m.forward(&p, u[0], &carry).map_err(as_tensor_error)?;
                Ok(y.mul(tape.constant(w.clone()))?.sum())
            })
            .unwrap();
            assert!(r.max_relative_error() < 1e-4, "{} seed {}: {:?}", cfg.kind_name(), seed, r.relative_errors);
        }
    }
}

#[test]
fn lru_init_is_uniform_in_area_on_the_ring() {
    let (lo, hi) = (0.5f64, 0.99f64);
    let init = lru_init(&mut seeded(10), 10_000, lo, hi, std::f64::consts::PI / 10.0).unwrap();
    let r = init.modulus();
    assert!(r.iter().all(|&x| x >= lo - 1e-12 && x <= hi + 1e-12 && x < 1.0));
    let mid = (lo * lo + hi * hi) / 2.0;
    let below = r.iter().filter(|&&x| x * x < mid).count() as f64 / r.len() as f64;
    assert!((below - 0.5).abs() < 0.02, "area split {}", below);
    let mean_theta = init.theta.iter().sum::<f64>() / init.theta.len() as f64;
    assert!((mean_theta - std::f64::consts::PI / 20.0).abs() < 0.01);
}

#[test]
fn gpt_overflow_and_zero_weight_cases() {
    let cfg = BackboneConfig::Gpt(GptConfig {
        hidden: 4,
        heads: 1,
        layers: 1,
        max_positions: 8,
    });
    let (m, store) = build(&cfg, 2, 11);
    let tape = Tape::new();
    let p = Bound::frozen(&tape, &store);
    let (_, carry) = m.forward(&p, tape.constant(Tensor::zeros(&[6, 1, 2])), &m.initial_carry(1)).unwrap();
    let err = m.forward(&p, tape.constant(Tensor::zeros(&[3, 1, 2])), &carry).unwrap_err();
    assert!(matches!(err, ModelError::PositionOverflow { needed: 9, max: 8 }));
    let _: Var = tape.constant(Tensor::scalar(0.0));
}
