use serde::{Deserialize, Serialize};

use super::Result;
use crate::envs::Task;
use crate::rl::{train, AgentSpec, DqnConfig, MetricRow};
use crate::seqmodels::{BackboneConfig, GptConfig};

/// One point of the GPT size grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GptSize {
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
}

impl GptSize {
    pub fn label(&self) -> String {
        format!("h{}_l{}_nh{}", self.hidden, self.layers, self.heads)
    }
}

#[derive(Clone, Debug)]
pub struct ScaleRun {
    pub size: GptSize,
    pub seed: u64,
    pub rows: Vec<MetricRow>,
}

impl ScaleRun {
    pub fn final_success(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.eval_success)
    }
}

/// Trains the base agent once per `(size, seed)` with the GPT backbone
/// resized; every other setting is shared.
pub fn scale_study(task: &Task, base: &AgentSpec, cfg: &DqnConfig, sizes: &[GptSize], seeds: &[u64], max_positions: usize) -> Result<Vec<ScaleRun>> {
    let mut runs = vec![];
    for &size in sizes {
        let spec = AgentSpec {
            backbone: BackboneConfig::Gpt(GptConfig {
                hidden: size.hidden,
                heads: size.heads,
                layers: size.layers,
                max_positions,
            }),
            ..base.clone()
        };
        for &seed in seeds {
            let out = train(task, &spec, cfg, seed, |_, _| {})?;
            runs.push(ScaleRun { size, seed, rows: out.rows });
        }
    }
    Ok(runs)
}

/// `hidden,layers,heads,seed,env_steps,grad_steps,eval_return,eval_success`
/// for every evaluation of every run.
pub fn write_scale_csv<W: std::io::Write>(mut w: W, runs: &[ScaleRun]) -> std::io::Result<()> {
    writeln!(w, "hidden,layers,heads,seed,env_steps,grad_steps,eval_return,eval_success")?;
    for r in runs {
        for m in &r.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.size.hidden, r.size.layers, r.size.heads, r.seed, m.env_steps, m.grad_steps, m.eval_return, m.eval_success
            )?;
        }
    }
    Ok(())
}
