//! Episodic environments: DFA-derived POMDPs and the passive T-Maze.

mod lang;
mod tmaze;

pub use lang::{
    compile_pomdp, oracle_policy, DfaShadow, LangPomdp, LangState, LengthDist, Overflow, Symbol, ACCEPT, REJECT,
};
pub use tmaze::{TMaze, TMazeState, DOWN, LEFT, RIGHT, UP};

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("step called after the episode finished")]
    StepAfterDone,
    #[error("action {action} outside 0..{num_actions}")]
    InvalidAction { action: usize, num_actions: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Common episodic interface; states are plain values owned by the caller.
pub trait Episodic {
    type State: Clone;

    fn obs_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Upper bound on decisions per episode, if any.
    fn max_episode_len(&self) -> Option<usize>;
    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> (Self::State, Vec<f64>);
    fn step<R: Rng + ?Sized>(&self, state: &mut Self::State, action: usize, rng: &mut R) -> Result<StepResult, EnvError>;
    /// Whether an episode ending with `final_reward` solved the task.
    fn is_success(&self, final_reward: f64) -> bool;
}

/// Any supported task, serialized as the environment spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum Task {
    Lang(LangPomdp),
    Tmaze(TMaze),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TaskState {
    Lang(LangState),
    Tmaze(TMazeState),
}

impl Task {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("task serializes")
    }

    pub fn as_lang(&self) -> Option<&LangPomdp> {
        match self {
            Task::Lang(l) => Some(l),
            Task::Tmaze(_) => None,
        }
    }
}

impl Episodic for Task {
    type State = TaskState;

    fn obs_dim(&self) -> usize {
        match self {
            Task::Lang(e) => e.obs_dim(),
            Task::Tmaze(e) => e.obs_dim(),
        }
    }

    fn num_actions(&self) -> usize {
        match self {
            Task::Lang(e) => e.num_actions(),
            Task::Tmaze(e) => e.num_actions(),
        }
    }

    fn max_episode_len(&self) -> Option<usize> {
        match self {
            Task::Lang(e) => e.max_episode_len(),
            Task::Tmaze(e) => e.max_episode_len(),
        }
    }

    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> (TaskState, Vec<f64>) {
        match self {
            Task::Lang(e) => {
                let (s, o) = e.reset(rng);
                (TaskState::Lang(s), o)
            }
            Task::Tmaze(e) => {
                let (s, o) = e.reset(rng);
                (TaskState::Tmaze(s), o)
            }
        }
    }

    fn step<R: Rng + ?Sized>(&self, state: &mut TaskState, action: usize, rng: &mut R) -> Result<StepResult, EnvError> {
        match (self, state) {
            (Task::Lang(e), TaskState::Lang(s)) => e.step(s, action, rng),
            (Task::Tmaze(e), TaskState::Tmaze(s)) => e.step(s, action, rng),
            _ => Err(EnvError::InvalidConfig("state belongs to a different task".into())),
        }
    }

    fn is_success(&self, final_reward: f64) -> bool {
        match self {
            Task::Lang(e) => e.is_success(final_reward),
            Task::Tmaze(e) => e.is_success(final_reward),
        }
    }
}

/// One row of an episode log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub t: usize,
    pub observation: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
}

/// Writes `t,obs,action,reward,done` rows; the observation vector is
/// `;`-separated inside its cell.
pub fn write_episode_csv<W: Write>(mut w: W, rows: &[LogRow]) -> std::io::Result<()> {
    writeln!(w, "t,obs,action,reward,done")?;
    for r in rows {
        let obs: Vec<String> = r.observation.iter().map(|v| format!("{}", v)).collect();
        writeln!(w, "{},{},{},{},{}", r.t, obs.join(";"), r.action, r.reward, r.done)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::{build_language, Language};
    use crate::rng::seeded;

    #[test]
    fn task_spec_round_trips_through_json() {
        let t = Task::Lang(LangPomdp::bounded(build_language(Language::Sym5).dfa, 25).unwrap());
        let back: Task = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(back, t);
        let m = Task::Tmaze(TMaze::new(20).unwrap());
        assert_eq!(serde_json::from_str::<Task>(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn episode_csv_layout() {
        let env = Task::Lang(LangPomdp::bounded(build_language(Language::Parity).dfa, 3).unwrap());
        let mut rng = seeded(5);
        let (mut s, mut obs) = env.reset(&mut rng);
        let mut rows = vec![];
        for t in 0.. {
            let r = env.step(&mut s, ACCEPT, &mut rng).unwrap();
            rows.push(LogRow {
                t,
                observation: obs.clone(),
                action: ACCEPT,
                reward: r.reward,
                done: r.done,
            });
            obs = r.observation;
            if r.done {
                break;
            }
        }
        let mut buf = vec![];
        write_episode_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,obs,action,reward,done"));
        assert_eq!(lines.count(), rows.len());
        assert!(text.trim_end().ends_with("true"));
    }
}
