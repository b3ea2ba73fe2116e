use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{collect_episode, dqn_loss, evaluate, soft_update, Agent, AgentPair, AgentSpec, EpisodeBatch, ReplayBuffer, Result, RlError};
use crate::envs::{Episodic, Task};
use crate::rng::stream;
use crate::seqmodels::{Backbone, Bound};
use crate::tensor::{clip_grad_norm, Adam, AdamConfig, Tape, Tensor};

fn default_gamma() -> f64 {
    0.99
}
fn default_lr() -> f64 {
    3e-4
}
fn default_batch() -> usize {
    64
}
fn default_tau() -> f64 {
    0.005
}
fn default_eps_start() -> f64 {
    1.0
}
fn default_eps_end() -> f64 {
    0.05
}
fn default_eps_decay() -> f64 {
    0.1
}
fn default_capacity() -> usize {
    10_000
}
fn default_patience() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DqnConfig {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Episodes per gradient step.
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_eps_start")]
    pub eps_start: f64,
    #[serde(default = "default_eps_end")]
    pub eps_end: f64,
    /// Fraction of the env-step budget over which ε decays linearly.
    #[serde(default = "default_eps_decay")]
    pub eps_decay_fraction: f64,
    pub env_steps: u64,
    pub grad_steps: u64,
    /// Evaluate every this many collected episodes.
    pub eval_interval: u64,
    pub eval_episodes: usize,
    #[serde(default = "default_capacity")]
    pub buffer_capacity: usize,
    /// Episodes collected before the first gradient step; defaults to the
    /// batch size.
    #[serde(default)]
    pub learning_starts: Option<usize>,
    #[serde(default)]
    pub grad_clip: Option<f64>,
    /// Stop once this many consecutive evaluations reach `stop_at_success`.
    #[serde(default)]
    pub stop_at_success: Option<f64>,
    #[serde(default = "default_patience")]
    pub stop_patience: usize,
}

impl DqnConfig {
    pub fn new(env_steps: u64, grad_steps: u64, eval_interval: u64, eval_episodes: usize) -> Self {
        Self {
            gamma: default_gamma(),
            lr: default_lr(),
            batch_size: default_batch(),
            tau: default_tau(),
            eps_start: default_eps_start(),
            eps_end: default_eps_end(),
            eps_decay_fraction: default_eps_decay(),
            env_steps,
            grad_steps,
            eval_interval,
            eval_episodes,
            buffer_capacity: default_capacity(),
            learning_starts: None,
            grad_clip: None,
            stop_at_success: None,
            stop_patience: default_patience(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RlError::InvalidConfig(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {} outside (0, 1]", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau {} outside (0, 1]", self.tau));
        }
        if self.env_steps == 0 || self.grad_steps == 0 {
            return bad("env_steps and grad_steps must be positive".into());
        }
        if self.batch_size == 0 || self.eval_interval == 0 || self.buffer_capacity == 0 || self.stop_patience == 0 {
            return bad("batch_size, eval_interval, buffer_capacity and stop_patience must be positive".into());
        }
        let unit = 0.0..=1.0;
        if !unit.contains(&self.eps_start) || !unit.contains(&self.eps_end) || self.eps_end > self.eps_start {
            return bad(format!("need 0 <= eps_end <= eps_start <= 1, got {} -> {}", self.eps_start, self.eps_end));
        }
        if !unit.contains(&self.eps_decay_fraction) || !(self.lr > 0.0) {
            return bad("eps_decay_fraction must lie in [0, 1] and lr must be positive".into());
        }
        Ok(())
    }
}

/// Linear decay from `eps_start` to `eps_end` over the first
/// `eps_decay_fraction` of the env-step budget, then constant.
pub fn epsilon_at(cfg: &DqnConfig, env_steps: u64) -> f64 {
    let horizon = cfg.eps_decay_fraction * cfg.env_steps as f64;
    if horizon <= 0.0 {
        return cfg.eps_end;
    }
    let frac = (env_steps as f64 / horizon).min(1.0);
    cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac
}

/// One evaluation record.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub env_steps: u64,
    pub grad_steps: u64,
    pub eval_return: f64,
    pub eval_success: f64,
    /// Mean loss since the previous evaluation, if any step was taken.
    pub loss: Option<f64>,
}

impl MetricRow {
    pub const CSV_HEADER: &'static str = "env_steps,grad_steps,eval_return,eval_success,loss";

    pub fn write_csv<W: Write>(mut w: W, rows: &[MetricRow]) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in rows {
            let loss = r.loss.map(|l| l.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", r.env_steps, r.grad_steps, r.eval_return, r.eval_success, loss)?;
        }
        Ok(())
    }
}

pub struct TrainOutcome {
    pub pair: AgentPair,
    pub rows: Vec<MetricRow>,
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn final_success(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.eval_success)
    }
}

/// Collects episodes and takes one gradient step per episode until the
/// gradient budget is spent, then only collects, until the env-step
/// budget is spent. Evaluates greedily every `eval_interval` episodes and
/// once more at the end. Deterministic for a fixed seed.
pub fn train(task: &Task, spec: &AgentSpec, cfg: &DqnConfig, seed: u64, mut on_eval: impl FnMut(&MetricRow, &AgentPair)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut init_rng = stream(seed, 0);
    let mut collect_rng = stream(seed, 1);
    let mut replay_rng = stream(seed, 2);
    let mut eval_rng = stream(seed, 3);

    let (agent, store) = Agent::new(spec, task.obs_dim(), task.num_actions(), &mut init_rng)?;
    let mut pair = AgentPair::new(agent, store);
    let mut adam = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        &pair.online,
    );
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let learning_starts = cfg.learning_starts.unwrap_or(cfg.batch_size).max(1);

    let (mut env_steps, mut grad_steps, mut episodes) = (0u64, 0u64, 0u64);
    let (mut loss_sum, mut loss_count) = (0.0, 0u64);
    let mut rows = Vec::new();
    let mut streak = 0;
    let mut stopped_early = false;

    let mut record = |pair: &AgentPair, env_steps, grad_steps, loss: Option<f64>, rows: &mut Vec<MetricRow>| -> Result<MetricRow> {
        if let Backbone::Lru(lru) = &pair.agent.backbone {
            let r = lru.max_lambda_modulus(&pair.online);
            if r >= 1.0 {
                return Err(RlError::InvalidConfig(format!("LRU eigenvalue modulus reached {}", r)));
            }
        }
        let (eval_return, eval_success) = evaluate(&pair.agent, &pair.online, task, cfg.eval_episodes, &mut eval_rng)?;
        let row = MetricRow {
            env_steps,
            grad_steps,
            eval_return,
            eval_success,
            loss,
        };
        on_eval(&row, pair);
        rows.push(row.clone());
        Ok(row)
    };

    // Ends at whichever budget runs out first.
    while env_steps < cfg.env_steps && grad_steps < cfg.grad_steps {
        let eps = epsilon_at(cfg, env_steps);
        let traj = collect_episode(&pair.agent, &pair.online, task, eps, &mut collect_rng)?;
        env_steps += traj.len() as u64;
        episodes += 1;
        buffer.push(traj);

        if grad_steps < cfg.grad_steps && buffer.len() >= learning_starts {
            let sample = buffer.sample(cfg.batch_size, &mut replay_rng);
            let batch = EpisodeBatch::new(&sample, pair.agent.obs_dim, pair.agent.num_actions)?;
            let tape = Tape::new();
            let p = Bound::trainable(&tape, &pair.online);
            let loss = dqn_loss(&pair, &p, &batch, cfg.gamma)?;
            loss_sum += loss.item();
            loss_count += 1;
            let grads = tape.backward(loss)?;
            let mut g: Vec<Tensor> = p.vars().iter().map(|v| grads.get_or_zeros(*v)).collect();
            if let Some(c) = cfg.grad_clip {
                clip_grad_norm(&mut g, c);
            }
            adam.step(&mut pair.online, &g)?;
            soft_update(&mut pair.target, &pair.online, cfg.tau)?;
            grad_steps += 1;
        }

        if episodes % cfg.eval_interval == 0 {
            let loss = (loss_count > 0).then(|| loss_sum / loss_count as f64);
            (loss_sum, loss_count) = (0.0, 0);
            let row = record(&pair, env_steps, grad_steps, loss, &mut rows)?;
            if let Some(th) = cfg.stop_at_success {
                streak = if row.eval_success >= th { streak + 1 } else { 0 };
                if streak >= cfg.stop_patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }
    if !stopped_early && episodes % cfg.eval_interval != 0 {
        let loss = (loss_count > 0).then(|| loss_sum / loss_count as f64);
        record(&pair, env_steps, grad_steps, loss, &mut rows)?;
    }
    Ok(TrainOutcome { pair, rows, stopped_early })
}
