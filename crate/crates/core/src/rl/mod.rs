//! Recurrent double DQN trained on whole episodes.

mod agent;
mod dqn;
mod replay;
mod rollout;
mod train;

pub use agent::{Agent, AgentOutput, AgentSpec, QHeadSpec};
pub use dqn::{dqn_loss, soft_update, AgentPair, EpisodeBatch};
pub use replay::ReplayBuffer;
pub use rollout::{collect_episode, evaluate, greedy, run_episodes, Event, StepView};
pub use train::{epsilon_at, train, DqnConfig, MetricRow, TrainOutcome};

use thiserror::Error;

use crate::envs::EnvError;
use crate::seqmodels::ModelError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum RlError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid rl config: {0}")]
    InvalidConfig(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("loss became non-finite")]
    NonFiniteLoss,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RlError>;

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    /// Observation the action was chosen on.
    pub observation: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
}

/// A complete episode: exactly one `done`, on the final step.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    steps: Vec<Step>,
}

impl Trajectory {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        let dones = steps.iter().filter(|s| s.done).count();
        if steps.is_empty() || dones != 1 || !steps.last().unwrap().done {
            return Err(RlError::InvalidTrajectory(format!(
                "{} steps with {} terminal flags; need exactly one, at the end",
                steps.len(),
                dones
            )));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn final_reward(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.reward)
    }
}
