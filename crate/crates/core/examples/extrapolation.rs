//! Trains LSTM and GPT agents on PARITY with words up to length 10, then
//! measures greedy accuracy on exactly-length-k words beyond that bound.
//!
//! ```text
//! cargo run --release --example extrapolation
//! ```

use regpomdp::analysis::{extrapolation_eval, extrapolation_lengths, Decider};
use regpomdp::automata::{build_language, Language};
use regpomdp::envs::{LangPomdp, Task};
use regpomdp::rl::{train, AgentSpec, DqnConfig, QHeadSpec};
use regpomdp::rng::seeded;
use regpomdp::seqmodels::{BackboneConfig, EmbeddingConfig, GptConfig, LstmConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 10;
    let offsets = [1, 2, 4, 8, 16, 32];
    let env = LangPomdp::bounded(build_language(Language::Parity).dfa, n)?;
    let models = [
        ("lstm", 32, BackboneConfig::Lstm(LstmConfig { hidden: 64, layers: 1 })),
        (
            "gpt",
            64,
            BackboneConfig::Gpt(GptConfig {
                hidden: 64,
                heads: 2,
                layers: 2,
                max_positions: 2 * (n + 33),
            }),
        ),
    ];
    let mut cfg = DqnConfig::new(100_000, 4_000, 100, 100);
    cfg.batch_size = 32;
    cfg.stop_at_success = Some(0.95);
    cfg.stop_patience = 2;

    print!("{:>6}", "model");
    for len in extrapolation_lengths(n, &offsets) {
        print!(" {:>6}", len);
    }
    println!();
    for (name, h_o, backbone) in models {
        let spec = AgentSpec {
            embedding: EmbeddingConfig { h_o, h_a: 0, h_r: 0 },
            backbone,
            q_head: QHeadSpec::Linear,
        };
        let out = train(&Task::Lang(env.clone()), &spec, &cfg, 0, |_, _| {})?;
        let decider = Decider::Agent {
            agent: &out.pair.agent,
            store: &out.pair.online,
        };
        let report = extrapolation_eval(decider, &env, n, &offsets, 500, &mut seeded(4))?;
        print!("{:>6}", name);
        for row in &report.rows {
            match row.accuracy {
                Some(a) => print!(" {:>6.3}", a),
                None => print!(" {:>6}", "n/a"),
            }
        }
        println!();
    }
    Ok(())
}
