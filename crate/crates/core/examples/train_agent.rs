//! Trains a recurrent DQN agent on a language task and prints each
//! evaluation.
//!
//! ```text
//! cargo run --release --example train_agent -- [PARITY|EVEN_PAIRS|SYM5] [n] [lstm|gpt|lru] [seed]
//! ```

use std::time::Instant;

use regpomdp::automata::{build_language, Language};
use regpomdp::envs::{LangPomdp, Task};
use regpomdp::rl::{train, AgentSpec, DqnConfig, QHeadSpec};
use regpomdp::seqmodels::{BackboneConfig, EmbeddingConfig, GptConfig, LruConfig, LstmConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let lang: Language = args.first().map_or("PARITY", String::as_str).parse()?;
    let n: usize = args.get(1).map_or(Ok(10), |s| s.parse())?;
    let kind = args.get(2).map_or("lstm", String::as_str);
    let seed: u64 = args.get(3).map_or(Ok(0), |s| s.parse())?;

    let (h_o, backbone) = match kind {
        "lstm" => (32, BackboneConfig::Lstm(LstmConfig { hidden: 128, layers: 1 })),
        "gpt" => (
            64,
            BackboneConfig::Gpt(GptConfig {
                hidden: 64,
                heads: 2,
                layers: 2,
                max_positions: 2 * (n + 33),
            }),
        ),
        "lru" => (64, BackboneConfig::Lru(LruConfig::new(64, 2))),
        other => return Err(format!("unknown model {}", other).into()),
    };
    let spec = AgentSpec {
        embedding: EmbeddingConfig { h_o, h_a: 0, h_r: 0 },
        backbone,
        q_head: QHeadSpec::Linear,
    };
    let task = Task::Lang(LangPomdp::bounded(build_language(lang).dfa, n)?);
    let mut cfg = DqnConfig::new(40_000, 4_000, 100, 100);
    cfg.stop_at_success = Some(0.95);
    cfg.stop_patience = 2;

    let start = Instant::now();
    let out = train(&task, &spec, &cfg, seed, |row, _| {
        println!(
            "{:>7.1}s env {:>6} grad {:>5} return {:.3} success {:.2} loss {}",
            start.elapsed().as_secs_f64(),
            row.env_steps,
            row.grad_steps,
            row.eval_return,
            row.eval_success,
            row.loss.map_or("-".into(), |l| format!("{:.5}", l)),
        );
    })?;
    println!("final success {:.2} (stopped early: {})", out.final_success(), out.stopped_early);
    Ok(())
}
