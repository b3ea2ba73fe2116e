//! Trains an LSTM agent on PARITY(10), then labels its hidden states by the
//! true DFA state and current symbol and scores the clustering.
//!
//! ```text
//! cargo run --release --example probe_hidden -- [out.csv]
//! ```

use std::collections::BTreeMap;

use regpomdp::analysis::probe_hidden;
use regpomdp::automata::{build_language, Language};
use regpomdp::envs::{LangPomdp, Task};
use regpomdp::rl::{train, AgentSpec, DqnConfig, QHeadSpec};
use regpomdp::rng::seeded;
use regpomdp::seqmodels::{BackboneConfig, EmbeddingConfig, LstmConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let env = LangPomdp::bounded(build_language(Language::Parity).dfa, 10)?;
    let spec = AgentSpec {
        embedding: EmbeddingConfig { h_o: 32, h_a: 0, h_r: 0 },
        backbone: BackboneConfig::Lstm(LstmConfig { hidden: 64, layers: 1 }),
        q_head: QHeadSpec::Linear,
    };
    let mut cfg = DqnConfig::new(100_000, 4_000, 100, 100);
    cfg.batch_size = 32;
    cfg.stop_at_success = Some(0.95);
    cfg.stop_patience = 2;
    let out = train(&Task::Lang(env.clone()), &spec, &cfg, 0, |_, _| {})?;
    println!("trained to success {:.2}", out.final_success());

    let set = probe_hidden(&out.pair.agent, &out.pair.online, &env, 200, &mut seeded(9))?;
    let mut counts = BTreeMap::new();
    for l in &set.labels {
        *counts.entry(l.to_string()).or_insert(0) += 1;
    }
    println!("{} hidden states: {:?}", set.len(), counts);
    println!("silhouette {:.3}", set.silhouette()?);
    if let Some(path) = std::env::args().nth(1) {
        set.write_csv(std::fs::File::create(&path)?)?;
        println!("wrote {}", path);
    }
    Ok(())
}
