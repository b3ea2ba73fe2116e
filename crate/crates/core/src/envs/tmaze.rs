//! Passive T-Maze: a corridor `O -> J` of length `L` with goals above and
//! below `J`. The goal signal is visible only at `O`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvError, Episodic, StepResult};

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const UP: usize = 2;
pub const DOWN: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TMaze {
    pub corridor_length: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TMazeState {
    pub x: usize,
    /// 0 in the corridor, +1 / -1 in the upper / lower goal.
    pub y: i32,
    /// Decisions taken so far.
    pub t: usize,
    pub goal_up: bool,
    pub done: bool,
}

impl TMaze {
    pub fn new(corridor_length: usize) -> Result<Self, EnvError> {
        if corridor_length == 0 {
            return Err(EnvError::InvalidConfig("corridor length must be at least 1".into()));
        }
        Ok(Self { corridor_length })
    }

    /// `(x / L, y, signal, informative)`; all zeros away from `O`, `J` and
    /// the goals.
    pub fn observe(&self, s: &TMazeState) -> Vec<f64> {
        let l = self.corridor_length;
        let at_origin = s.x == 0 && s.y == 0;
        let informative = at_origin || s.x == l;
        if !informative {
            return vec![0.0; 4];
        }
        let signal = if at_origin {
            if s.goal_up {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        };
        vec![s.x as f64 / l as f64, s.y as f64, signal, 1.0]
    }

    /// Optimal action: run right, then turn toward the remembered goal.
    pub fn oracle_action(&self, s: &TMazeState) -> usize {
        if s.x < self.corridor_length {
            RIGHT
        } else if s.goal_up {
            UP
        } else {
            DOWN
        }
    }
}

impl Episodic for TMaze {
    type State = TMazeState;

    fn obs_dim(&self) -> usize {
        4
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn max_episode_len(&self) -> Option<usize> {
        Some(self.corridor_length + 1)
    }

    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> (TMazeState, Vec<f64>) {
        let s = TMazeState {
            x: 0,
            y: 0,
            t: 0,
            goal_up: rng.gen_bool(0.5),
            done: false,
        };
        let obs = self.observe(&s);
        (s, obs)
    }

    fn step<R: Rng + ?Sized>(&self, s: &mut TMazeState, action: usize, _rng: &mut R) -> Result<StepResult, EnvError> {
        if s.done {
            return Err(EnvError::StepAfterDone);
        }
        if action >= 4 {
            return Err(EnvError::InvalidAction { action, num_actions: 4 });
        }
        let l = self.corridor_length;
        match action {
            LEFT if s.x > 0 => s.x -= 1,
            RIGHT if s.x < l => s.x += 1,
            UP if s.x == l => s.y = 1,
            DOWN if s.x == l => s.y = -1,
            _ => {}
        }
        s.t += 1;
        let reward = if s.t <= l {
            let on_time = if s.x >= s.t { 1.0 } else { 0.0 };
            (on_time - 1.0) / l as f64
        } else {
            s.done = true;
            let hit = (s.y == 1 && s.goal_up) || (s.y == -1 && !s.goal_up);
            if hit {
                1.0
            } else {
                0.0
            }
        };
        Ok(StepResult {
            observation: self.observe(s),
            reward,
            done: s.done,
        })
    }

    fn is_success(&self, final_reward: f64) -> bool {
        final_reward >= 1.0
    }
}
