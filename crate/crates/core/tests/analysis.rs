use proptest::prelude::*;
use regpomdp::analysis::{extrapolation_eval, probe_hidden, silhouette_score, Decider, ProbeLabel};
use regpomdp::automata::{build_language, Language};
use regpomdp::envs::LangPomdp;
use regpomdp::rl::{Agent, AgentSpec, QHeadSpec};
use regpomdp::rng::seeded;
use regpomdp::seqmodels::{BackboneConfig, EmbeddingConfig, LstmConfig};

fn parity(n: usize) -> LangPomdp {
    LangPomdp::bounded(build_language(Language::Parity).dfa, n).unwrap()
}

#[test]
fn oracle_extrapolates_perfectly_and_random_is_at_chance() {
    for lang in Language::ALL {
        let env = LangPomdp::bounded(build_language(lang).dfa, 25).unwrap();
        let r = extrapolation_eval(Decider::Oracle, &env, 25, &[1, 2, 3, 4, 8, 16, 32], 200, &mut seeded(1)).unwrap();
        assert_eq!(r.rows.len(), 8);
        assert!(r.rows.iter().all(|row| row.accuracy == Some(1.0)), "{}: {:?}", lang, r.rows);
    }
    let r = extrapolation_eval(Decider::Random, &parity(25), 25, &[8], 2000, &mut seeded(2)).unwrap();
    for row in &r.rows {
        let acc = row.accuracy.unwrap();
        assert!((acc - 0.5).abs() < 0.05, "{:?}", row);
    }
}

#[test]
fn probe_labels_every_step_and_the_terminal() {
    let spec = AgentSpec {
        embedding: EmbeddingConfig { h_o: 8, h_a: 0, h_r: 0 },
        backbone: BackboneConfig::Lstm(LstmConfig { hidden: 6, layers: 1 }),
        q_head: QHeadSpec::Linear,
    };
    let env = parity(10);
    let (agent, store) = Agent::new(&spec, 3, 2, &mut seeded(0)).unwrap();
    let episodes = 40;
    let set = probe_hidden(&agent, &store, &env, episodes, &mut seeded(5)).unwrap();
    let count = |pred: &dyn Fn(&ProbeLabel) -> bool| set.labels.iter().filter(|l| pred(l)).count();
    assert_eq!(count(&|l| *l == ProbeLabel::Terminal), episodes);
    assert_eq!(count(&|l| matches!(l, ProbeLabel::State { w: None, .. })), episodes);
    assert!(set.labels.iter().all(|l| match l {
        ProbeLabel::State { q, w } => *q < 2 && w.is_none_or(|a| a < 2),
        ProbeLabel::Terminal => true,
    }));
    assert!(set.hiddens.iter().all(|h| h.len() == 6));
    assert!(set.silhouette().unwrap().abs() <= 1.0);
}

fn cloud() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (6usize..20).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), n),
            prop::collection::vec(0usize..3, n).prop_filter("two labels", |l| l.iter().any(|&x| x != l[0])),
        )
    })
}

proptest! {
    #[test]
    fn silhouette_ignores_point_order((pts, labels) in cloud(), rot in 0usize..20) {
        let a = silhouette_score(&pts, &labels).unwrap();
        let k = rot % pts.len();
        let mut p2 = pts.clone();
        let mut l2 = labels.clone();
        p2.rotate_left(k);
        l2.rotate_left(k);
        p2.reverse();
        l2.reverse();
        let b = silhouette_score(&p2, &l2).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn silhouette_is_invariant_to_isometry_and_scale(
        (pts, labels) in cloud(),
        angle in 0.0f64..6.3,
        shift in prop::collection::vec(-10.0f64..10.0, 3),
        scale in 0.1f64..10.0,
    ) {
        let (c, s) = (angle.cos(), angle.sin());
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| vec![
                scale * (c * p[0] - s * p[1]) + shift[0],
                scale * (s * p[0] + c * p[1]) + shift[1],
                scale * p[2] + shift[2],
            ])
            .collect();
        let a = silhouette_score(&pts, &labels).unwrap();
        let b = silhouette_score(&moved, &labels).unwrap();
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }
}
