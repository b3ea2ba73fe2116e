//! Trains an agent on the passive T-Maze: the goal side is shown only at the
//! first step and must be recalled at the junction.
//!
//! ```text
//! cargo run --release --example tmaze -- [corridor length] [lstm|gpt|lru] [seed]
//! ```

use regpomdp::envs::{TMaze, Task};
use regpomdp::rl::{train, AgentSpec, DqnConfig, QHeadSpec};
use regpomdp::seqmodels::{BackboneConfig, EmbeddingConfig, GptConfig, LruConfig, LstmConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let len: usize = args.first().map_or(Ok(10), |s| s.parse())?;
    let kind = args.get(1).map_or("lru", String::as_str);
    let seed: u64 = args.get(2).map_or(Ok(0), |s| s.parse())?;

    let (embedding, backbone) = match kind {
        "lstm" => (
            EmbeddingConfig { h_o: 32, h_a: 16, h_r: 0 },
            BackboneConfig::Lstm(LstmConfig { hidden: 64, layers: 1 }),
        ),
        "gpt" => (
            EmbeddingConfig { h_o: 64, h_a: 0, h_r: 0 },
            BackboneConfig::Gpt(GptConfig {
                hidden: 64,
                heads: 1,
                layers: 1,
                max_positions: len + 2,
            }),
        ),
        "lru" => (EmbeddingConfig { h_o: 64, h_a: 64, h_r: 0 }, BackboneConfig::Lru(LruConfig::new(64, 1))),
        other => return Err(format!("unknown model {}", other).into()),
    };
    let spec = AgentSpec {
        embedding,
        backbone,
        q_head: QHeadSpec::Mlp { hidden: vec![64, 64] },
    };
    let mut cfg = DqnConfig::new(40_000, 2_000, 20, 20);
    cfg.batch_size = 32;
    let out = train(&Task::Tmaze(TMaze::new(len)?), &spec, &cfg, seed, |row, _| {
        println!("env {:>6} grad {:>5} return {:.3}", row.env_steps, row.grad_steps, row.eval_return);
    })?;
    println!("final return {:.3}", out.rows.last().map_or(0.0, |r| r.eval_return));
    Ok(())
}
