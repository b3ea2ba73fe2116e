use rand::Rng;

use super::{Agent, Result, RlError, Step, Trajectory};
use crate::envs::{Episodic, StepResult};
use crate::seqmodels::Bound;
use crate::tensor::{ParamStore, Tape, Tensor};

/// One decision, seen just before the environment advances.
pub struct StepView<'a, S> {
    pub episode: usize,
    pub t: usize,
    /// Environment state before the action.
    pub state: &'a S,
    pub observation: &'a [f64],
    pub hidden: &'a [f64],
    pub q: &'a [f64],
    pub action: usize,
    pub result: &'a StepResult,
}

pub enum Event<'a, S> {
    Step(StepView<'a, S>),
    /// Hidden after feeding the observation that followed the final action.
    Terminal { episode: usize, hidden: &'a [f64] },
}

pub fn greedy(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// Runs one episode per start state in lockstep, acting ε-greedily on the
/// agent's Q-values with the recurrent carry threaded through. With
/// `with_terminal`, each finished episode gets one extra forward on its
/// terminal observation, reported as [`Event::Terminal`].
#[allow(clippy::too_many_arguments)]
pub fn run_episodes<E: Episodic, R: Rng + ?Sized>(
    agent: &Agent,
    store: &ParamStore,
    env: &E,
    starts: Vec<(E::State, Vec<f64>)>,
    epsilon: f64,
    with_terminal: bool,
    rng: &mut R,
    mut visit: impl FnMut(Event<'_, E::State>),
) -> Result<Vec<Trajectory>> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(RlError::InvalidConfig(format!("epsilon {} outside [0, 1]", epsilon)));
    }
    let batch = starts.len();
    let (od, na) = (agent.obs_dim, agent.num_actions);
    let tape = Tape::new();
    let p = Bound::frozen(&tape, store);
    let mut carry = agent.initial_carry(batch);
    let (mut states, mut obs): (Vec<E::State>, Vec<Vec<f64>>) = starts.into_iter().unzip();
    let mut prev: Vec<Option<(usize, f64)>> = vec![None; batch];
    let mut steps: Vec<Vec<Step>> = vec![vec![]; batch];
    // 0 = acting, 1 = awaiting terminal forward, 2 = finished.
    let mut phase = vec![0u8; batch];
    let mut t = 0;
    while phase.iter().any(|&ph| ph < 2) {
        let mut o = vec![0.0; batch * od];
        let mut a = vec![0.0; batch * na];
        let mut r = vec![0.0; batch];
        for b in 0..batch {
            if phase[b] < 2 {
                o[b * od..(b + 1) * od].copy_from_slice(&obs[b]);
                if let Some((pa, pr)) = prev[b] {
                    a[b * na + pa] = 1.0;
                    r[b] = pr;
                }
            }
        }
        let out = agent.forward(
            &p,
            tape.constant(Tensor::new(&[1, batch, od], o)?),
            tape.constant(Tensor::new(&[1, batch, na], a)?),
            tape.constant(Tensor::new(&[1, batch, 1], r)?),
            &carry,
        )?;
        carry = out.carry;
        let q = out.q.to_tensor();
        let hidden = out.hidden.to_tensor();
        let h = hidden.len() / batch;
        for b in 0..batch {
            let hb = &hidden.data()[b * h..(b + 1) * h];
            match phase[b] {
                0 => {
                    let qb = &q.data()[b * na..(b + 1) * na];
                    let action = if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
                        rng.gen_range(0..na)
                    } else {
                        greedy(qb)
                    };
                    let before = states[b].clone();
                    let result = env.step(&mut states[b], action, rng)?;
                    visit(Event::Step(StepView {
                        episode: b,
                        t,
                        state: &before,
                        observation: &obs[b],
                        hidden: hb,
                        q: qb,
                        action,
                        result: &result,
                    }));
                    steps[b].push(Step {
                        observation: std::mem::replace(&mut obs[b], result.observation),
                        action,
                        reward: result.reward,
                        done: result.done,
                    });
                    prev[b] = Some((action, result.reward));
                    if result.done {
                        phase[b] = if with_terminal { 1 } else { 2 };
                    }
                }
                1 => {
                    visit(Event::Terminal { episode: b, hidden: hb });
                    phase[b] = 2;
                }
                _ => {}
            }
        }
        t += 1;
    }
    steps.into_iter().map(Trajectory::new).collect()
}

/// One ε-greedy episode from a fresh reset.
pub fn collect_episode<E: Episodic, R: Rng + ?Sized>(agent: &Agent, store: &ParamStore, env: &E, epsilon: f64, rng: &mut R) -> Result<Trajectory> {
    let start = env.reset(rng);
    let mut out = run_episodes(agent, store, env, vec![start], epsilon, false, rng, |_| {})?;
    Ok(out.pop().expect("one episode"))
}

/// Greedy evaluation over `episodes` fresh resets, run in lockstep.
/// Returns `(mean return, success rate)`.
pub fn evaluate<E: Episodic, R: Rng + ?Sized>(agent: &Agent, store: &ParamStore, env: &E, episodes: usize, rng: &mut R) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Ok((0.0, 0.0));
    }
    let starts = (0..episodes).map(|_| env.reset(rng)).collect();
    let trajs = run_episodes(agent, store, env, starts, 0.0, false, rng, |_| {})?;
    let ret = trajs.iter().map(|t| t.total_reward()).sum::<f64>() / episodes as f64;
    let succ = trajs.iter().filter(|t| env.is_success(t.final_reward())).count() as f64 / episodes as f64;
    Ok((ret, succ))
}
