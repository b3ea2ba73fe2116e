use regpomdp::automata::{build_language, Language};
use regpomdp::envs::{Episodic, LangPomdp, TMaze, Task};
use regpomdp::rl::{
    collect_episode, dqn_loss, epsilon_at, soft_update, train, Agent, AgentPair, AgentSpec, DqnConfig, EpisodeBatch, QHeadSpec, Step,
    Trajectory,
};
use regpomdp::rng::seeded;
use regpomdp::seqmodels::{BackboneConfig, Bound, EmbeddingConfig, GptConfig, LruConfig, LstmConfig};
use regpomdp::tensor::{ParamStore, Tape, Tensor};

fn lstm_spec(h_o: usize, hidden: usize) -> AgentSpec {
    AgentSpec {
        embedding: EmbeddingConfig { h_o, h_a: 0, h_r: 0 },
        backbone: BackboneConfig::Lstm(LstmConfig { hidden, layers: 1 }),
        q_head: QHeadSpec::Linear,
    }
}

fn parity(n: usize) -> Task {
    Task::Lang(LangPomdp::bounded(build_language(Language::Parity).dfa, n).unwrap())
}

#[test]
fn random_policy_scores_half_on_parity() {
    let env = parity(10);
    let (agent, store) = Agent::new(&lstm_spec(4, 4), env.obs_dim(), env.num_actions(), &mut seeded(0)).unwrap();
    let mut rng = seeded(1);
    let episodes = 10_000;
    let mut total = 0.0;
    for _ in 0..episodes {
        let t = collect_episode(&agent, &store, &env, 1.0, &mut rng).unwrap();
        assert!(t.len() <= 11);
        total += t.total_reward();
    }
    let mean = total / episodes as f64;
    assert!((mean - 0.5).abs() < 0.02, "random return {}", mean);
}

#[test]
fn q_head_arity_matches_the_task() {
    let lang = parity(5);
    let maze = Task::Tmaze(TMaze::new(4).unwrap());
    for (env, arity) in [(lang, 2), (maze, 4)] {
        let spec = AgentSpec {
            q_head: QHeadSpec::Mlp { hidden: vec![8, 8] },
            ..lstm_spec(4, 4)
        };
        let (agent, store) = Agent::new(&spec, env.obs_dim(), env.num_actions(), &mut seeded(2)).unwrap();
        let tape = Tape::new();
        let p = Bound::frozen(&tape, &store);
        let z = |d| tape.constant(Tensor::zeros(&[3, 2, d]));
        let out = agent.forward(&p, z(env.obs_dim()), z(env.num_actions()), z(1), &agent.initial_carry(2)).unwrap();
        assert_eq!(out.q.shape(), vec![3, 2, arity]);
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Plain-f64 forward of the one-layer LSTM agent over a single episode.
fn hand_q(store: &ParamStore, obs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let get = |name: &str| store.get(store.find(name).unwrap()).clone();
    let (ew, eb) = (get("embed.obs.weight"), get("embed.obs.bias"));
    let (wx, b, wh) = (
        get("backbone.layer0.input.weight"),
        get("backbone.layer0.input.bias"),
        get("backbone.layer0.recurrent.weight"),
    );
    let (qw, qb) = (get("q_head.0.weight"), get("q_head.0.bias"));
    let affine = |x: &[f64], w: &Tensor, bias: Option<&Tensor>| -> Vec<f64> {
        let (i, o) = (w.shape()[0], w.shape()[1]);
        (0..o)
            .map(|j| (0..i).map(|k| x[k] * w.data()[k * o + j]).sum::<f64>() + bias.map_or(0.0, |b| b.data()[j]))
            .collect()
    };
    let hd = wh.shape()[0];
    let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
    let mut qs = vec![];
    for o in obs {
        let u = affine(o, &ew, Some(&eb));
        let zx = affine(&u, &wx, Some(&b));
        let zh = affine(&h, &wh, None);
        let z: Vec<f64> = zx.iter().zip(&zh).map(|(a, b)| a + b).collect();
        for j in 0..hd {
            let (i, f, g, og) = (sigmoid(z[j]), sigmoid(z[hd + j]), z[2 * hd + j].tanh(), sigmoid(z[3 * hd + j]));
            c[j] = f * c[j] + i * g;
            h[j] = og * c[j].tanh();
        }
        qs.push(affine(&h, &qw, Some(&qb)));
    }
    qs
}

#[test]
fn two_step_loss_matches_hand_computation() {
    let spec = lstm_spec(2, 2);
    let (agent, online) = Agent::new(&spec, 3, 2, &mut seeded(3)).unwrap();
    let mut pair = AgentPair::new(agent, online);
    for t in pair.target.tensors_mut() {
        t.data_mut().iter_mut().for_each(|v| *v += 0.3);
    }
    let obs = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
    let traj = Trajectory::new(vec![
        Step {
            observation: obs[0].clone(),
            action: 0,
            reward: 0.0,
            done: false,
        },
        Step {
            observation: obs[1].clone(),
            action: 1,
            reward: 1.0,
            done: true,
        },
    ])
    .unwrap();
    let gamma = 0.9;
    let qo = hand_q(&pair.online, &obs);
    let qt = hand_q(&pair.target, &obs);
    let a_star = if qo[1][1] > qo[1][0] { 1 } else { 0 };
    let y0 = gamma * qt[1][a_star];
    let expected = ((qo[0][0] - y0).powi(2) + (qo[1][1] - 1.0).powi(2)) / 2.0;

    let batch = EpisodeBatch::new(&[&traj], 3, 2).unwrap();
    let tape = Tape::new();
    let p = Bound::trainable(&tape, &pair.online);
    let loss = dqn_loss(&pair, &p, &batch, gamma).unwrap().item();
    assert!((loss - expected).abs() < 1e-12, "{} vs {}", loss, expected);

    // gamma = 0 leaves only the immediate rewards as targets.
    let tape = Tape::new();
    let p = Bound::trainable(&tape, &pair.online);
    let loss0 = dqn_loss(&pair, &p, &batch, 0.0).unwrap().item();
    let expected0 = (qo[0][0].powi(2) + (qo[1][1] - 1.0).powi(2)) / 2.0;
    assert!((loss0 - expected0).abs() < 1e-12);
}

#[test]
fn soft_update_cases() {
    let (_, online) = Agent::new(&lstm_spec(2, 3), 3, 2, &mut seeded(4)).unwrap();
    let (_, other) = Agent::new(&lstm_spec(2, 3), 3, 2, &mut seeded(5)).unwrap();

    let mut t = other.clone();
    soft_update(&mut t, &online, 1.0).unwrap();
    assert_eq!(t, online);

    let mut same = online.clone();
    soft_update(&mut same, &online, 0.005).unwrap();
    for (a, b) in same.tensors().iter().zip(online.tensors()) {
        assert!(a.max_abs_diff(b) < 1e-15);
    }

    let tau = 0.05;
    let mut t = other.clone();
    for _ in 0..40 {
        soft_update(&mut t, &online, tau).unwrap();
    }
    let ratio = (1.0 - tau).powi(40);
    for ((a, o), s) in t.tensors().iter().zip(online.tensors()).zip(other.tensors()) {
        for ((x, y), z) in a.data().iter().zip(o.data()).zip(s.data()) {
            assert!((x - y - ratio * (z - y)).abs() < 1e-12);
        }
    }

    let (_, wide) = Agent::new(&lstm_spec(2, 4), 3, 2, &mut seeded(6)).unwrap();
    assert!(soft_update(&mut t, &wide, 0.5).is_err());
    assert!(soft_update(&mut t, &online, 0.0).is_err());
}

#[test]
fn epsilon_schedule_is_monotone() {
    let cfg = DqnConfig::new(1000, 10, 10, 10);
    assert_eq!(epsilon_at(&cfg, 0), 1.0);
    assert!((epsilon_at(&cfg, 100) - 0.05).abs() < 1e-12);
    let mut last = f64::INFINITY;
    for s in 0..1000 {
        let e = epsilon_at(&cfg, s);
        assert!(e <= last);
        last = e;
    }
}

#[test]
fn invalid_configs_rejected() {
    let env = parity(5);
    let mut cfg = DqnConfig::new(0, 10, 10, 10);
    assert!(train(&env, &lstm_spec(4, 4), &cfg, 0, |_, _| {}).is_err());
    cfg.env_steps = 100;
    cfg.gamma = 1.5;
    assert!(train(&env, &lstm_spec(4, 4), &cfg, 0, |_, _| {}).is_err());
}

#[test]
fn training_is_deterministic_for_every_backbone() {
    let env = parity(6);
    let backbones = [
        BackboneConfig::Lstm(LstmConfig { hidden: 8, layers: 1 }),
        BackboneConfig::Gpt(GptConfig {
            hidden: 8,
            heads: 2,
            layers: 1,
            max_positions: 16,
        }),
        BackboneConfig::Lru(LruConfig::new(8, 1)),
    ];
    for backbone in backbones {
        let spec = AgentSpec {
            embedding: EmbeddingConfig { h_o: 8, h_a: 0, h_r: 0 },
            backbone,
            q_head: QHeadSpec::Linear,
        };
        let mut cfg = DqnConfig::new(600, 60, 20, 20);
        cfg.batch_size = 8;
        let a = train(&env, &spec, &cfg, 7, |_, _| {}).unwrap();
        let b = train(&env, &spec, &cfg, 7, |_, _| {}).unwrap();
        assert!(!a.rows.is_empty());
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.pair.online, b.pair.online);
        assert!(a.rows.iter().all(|r| r.loss.map_or(true, f64::is_finite)));
    }
}
