//! Regular-language POMDP workbench.
//!
//! Regular languages are compiled into partially observable episodic tasks,
//! recurrent DQN agents with LSTM, causal-transformer or LRU backbones are
//! trained on them (and on a passive T-Maze), and the trained hidden states
//! are probed for structure and length extrapolation.

pub mod analysis;
pub mod automata;
pub mod cli;
pub mod envs;
pub mod rl;
pub mod rng;
pub mod seqmodels;
pub mod tensor;
