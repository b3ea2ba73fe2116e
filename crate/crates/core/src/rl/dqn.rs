use super::{Agent, Result, RlError, Trajectory};
use crate::seqmodels::Bound;
use crate::tensor::{ParamStore, Tape, Tensor, Var};

/// Online and target parameters for one agent architecture.
#[derive(Clone, Debug)]
pub struct AgentPair {
    pub agent: Agent,
    pub online: ParamStore,
    pub target: ParamStore,
}

impl AgentPair {
    pub fn new(agent: Agent, online: ParamStore) -> Self {
        let target = online.clone();
        Self { agent, online, target }
    }
}

/// `target <- (1 - tau) * target + tau * online`, parameter-wise.
pub fn soft_update(target: &mut ParamStore, online: &ParamStore, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(RlError::InvalidConfig(format!("tau {} outside (0, 1]", tau)));
    }
    if !target.same_layout(online) {
        return Err(RlError::InvalidConfig("target and online parameters differ in layout".into()));
    }
    for (t, o) in target.tensors_mut().iter_mut().zip(online.tensors()) {
        for (a, b) in t.data_mut().iter_mut().zip(o.data()) {
            *a = (1.0 - tau) * *a + tau * b;
        }
    }
    Ok(())
}

/// Episodes padded to a common length, time-major. Row `t * batch + b` of
/// the flat vectors belongs to step `t` of episode `b`.
#[derive(Clone, Debug)]
pub struct EpisodeBatch {
    pub steps: usize,
    pub batch: usize,
    pub obs: Tensor,
    pub prev_action: Tensor,
    pub prev_reward: Tensor,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub valid: Vec<bool>,
}

impl EpisodeBatch {
    pub fn new(episodes: &[&Trajectory], obs_dim: usize, num_actions: usize) -> Result<Self> {
        if episodes.is_empty() {
            return Err(RlError::InvalidConfig("empty batch".into()));
        }
        let batch = episodes.len();
        let steps = episodes.iter().map(|e| e.len()).max().unwrap_or(0);
        let n = steps * batch;
        let mut obs = vec![0.0; n * obs_dim];
        let mut prev_action = vec![0.0; n * num_actions];
        let mut prev_reward = vec![0.0; n];
        let mut actions = vec![0; n];
        let mut rewards = vec![0.0; n];
        let mut dones = vec![false; n];
        let mut valid = vec![false; n];
        for (b, ep) in episodes.iter().enumerate() {
            for (t, s) in ep.steps().iter().enumerate() {
                let i = t * batch + b;
                if s.observation.len() != obs_dim || s.action >= num_actions {
                    return Err(RlError::InvalidTrajectory("observation width or action out of range".into()));
                }
                obs[i * obs_dim..(i + 1) * obs_dim].copy_from_slice(&s.observation);
                if t > 0 {
                    let p = &ep.steps()[t - 1];
                    prev_action[i * num_actions + p.action] = 1.0;
                    prev_reward[i] = p.reward;
                }
                actions[i] = s.action;
                rewards[i] = s.reward;
                dones[i] = s.done;
                valid[i] = true;
            }
        }
        Ok(Self {
            steps,
            batch,
            obs: Tensor::new(&[steps, batch, obs_dim], obs)?,
            prev_action: Tensor::new(&[steps, batch, num_actions], prev_action)?,
            prev_reward: Tensor::new(&[steps, batch, 1], prev_reward)?,
            actions,
            rewards,
            dones,
            valid,
        })
    }
}

fn frozen_q_values(agent: &Agent, store: &ParamStore, batch: &EpisodeBatch) -> Result<Tensor> {
    let tape = Tape::new();
    let p = Bound::frozen(&tape, store);
    let out = agent.forward(
        &p,
        tape.constant(batch.obs.clone()),
        tape.constant(batch.prev_action.clone()),
        tape.constant(batch.prev_reward.clone()),
        &agent.initial_carry(batch.batch),
    )?;
    Ok(out.q.to_tensor())
}

/// Double-DQN regression loss over every valid step of every episode.
///
/// Hiddens come from full-episode forwards starting at the initial carry.
/// `y_t = r_t + gamma (1 - done_t) Q_target(x_{t+1}, argmax_a Q_online(x_{t+1}, a))`.
pub fn dqn_loss<'t>(pair: &AgentPair, online: &Bound<'t>, batch: &EpisodeBatch, gamma: f64) -> Result<Var<'t>> {
    let agent = &pair.agent;
    let tape = online
        .vars()
        .first()
        .map(|v| v.tape())
        .ok_or_else(|| RlError::InvalidConfig("agent has no parameters".into()))?;
    let out = agent.forward(
        online,
        tape.constant(batch.obs.clone()),
        tape.constant(batch.prev_action.clone()),
        tape.constant(batch.prev_reward.clone()),
        &agent.initial_carry(batch.batch),
    )?;
    let q_online = out.q.to_tensor();
    let q_target = frozen_q_values(agent, &pair.target, batch)?;
    let (na, b) = (agent.num_actions, batch.batch);
    let n = batch.steps * b;
    let mut y = vec![0.0; n];
    let mut mask = vec![0.0; n];
    for i in 0..n {
        if !batch.valid[i] {
            continue;
        }
        mask[i] = 1.0;
        y[i] = batch.rewards[i];
        if !batch.dones[i] {
            let j = i + b;
            let a = super::greedy(&q_online.data()[j * na..(j + 1) * na]);
            y[i] += gamma * q_target.data()[j * na + a];
        }
    }
    let count: f64 = mask.iter().sum();
    let q_sa = out.q.reshape(&[n, na])?.pick_last(&batch.actions)?;
    let diff = q_sa.sub(tape.constant(Tensor::from_vec(y)))?;
    let loss = diff.mul(diff)?.mul(tape.constant(Tensor::from_vec(mask)))?.sum().scale(1.0 / count);
    if !loss.item().is_finite() {
        return Err(RlError::NonFiniteLoss);
    }
    Ok(loss)
}
