//! POMDP compiled from a DFA: the agent watches a word one symbol at a time,
//! then the end marker `#`, and is paid 1 for the correct accept/reject call
//! at `#`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvError, Episodic, StepResult};
use crate::automata::Dfa;

pub const ACCEPT: usize = 0;
pub const REJECT: usize = 1;

/// What the agent sees at a step: a letter of the word or the end marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Letter(usize),
    End,
}

impl Symbol {
    /// Index into the observation alphabet `Σ ∪ {#}`; `#` is last.
    pub fn index(self, alphabet_size: usize) -> usize {
        match self {
            Symbol::Letter(a) => a,
            Symbol::End => alphabet_size,
        }
    }
}

/// How geometric lengths interact with a horizon bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overflow {
    /// Emit `#` as soon as the bound is reached.
    #[default]
    Truncate,
    /// Redraw the whole length until it fits the bound.
    Resample,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LengthDist {
    /// Each observation is `#` with probability `p_end`, otherwise a uniform
    /// letter. `p_end = 1 / (|Σ| + 1)` draws uniformly from `Σ ∪ {#}`.
    Geometric {
        p_end: f64,
        #[serde(default)]
        overflow: Overflow,
    },
    /// Word length drawn uniformly from `min_len..=max_len` at reset.
    Uniform { min_len: usize, max_len: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LangPomdp {
    pub dfa: Dfa,
    pub horizon_bound: Option<usize>,
    pub length_dist: LengthDist,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LangState {
    pub dfa_state: usize,
    pub current_symbol: Symbol,
    pub steps_elapsed: usize,
    /// Letters still to come before `#`, when the length was drawn up front.
    pub pending_word_len: Option<usize>,
    pub emitted: usize,
    pub done: bool,
}

pub fn compile_pomdp(
    dfa: Dfa,
    horizon_bound: Option<usize>,
    length_dist: LengthDist,
    gamma: f64,
) -> Result<LangPomdp, EnvError> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(EnvError::InvalidConfig(format!("gamma {} outside [0, 1]", gamma)));
    }
    if horizon_bound == Some(0) {
        return Err(EnvError::InvalidConfig("horizon bound must be positive".into()));
    }
    match length_dist {
        LengthDist::Geometric { p_end, .. } => {
            if !(p_end > 0.0 && p_end <= 1.0) {
                return Err(EnvError::InvalidConfig(format!("p_end {} outside (0, 1]", p_end)));
            }
        }
        LengthDist::Uniform { min_len, max_len } => {
            if min_len > max_len {
                return Err(EnvError::InvalidConfig(format!(
                    "uniform lengths {}..={} are empty",
                    min_len, max_len
                )));
            }
            if let Some(n) = horizon_bound {
                if max_len > n {
                    return Err(EnvError::InvalidConfig(format!(
                        "max length {} exceeds horizon bound {}",
                        max_len, n
                    )));
                }
            }
        }
    }
    Ok(LangPomdp {
        dfa,
        horizon_bound,
        length_dist,
        gamma,
    })
}

impl LangPomdp {
    /// `M^L(n)` with the default uniform lengths `1..=n`.
    pub fn bounded(dfa: Dfa, n: usize) -> Result<Self, EnvError> {
        compile_pomdp(dfa, Some(n), LengthDist::Uniform { min_len: 1, max_len: n }, 0.99)
    }

    pub fn alphabet_size(&self) -> usize {
        self.dfa.alphabet_size()
    }

    pub fn one_hot(&self, s: Symbol) -> Vec<f64> {
        let mut v = vec![0.0; self.alphabet_size() + 1];
        v[s.index(self.alphabet_size())] = 1.0;
        v
    }

    /// Observation after the episode has ended.
    pub fn terminal_observation(&self) -> Vec<f64> {
        vec![0.0; self.alphabet_size() + 1]
    }

    fn sample_letter<R: Rng + ?Sized>(&self, rng: &mut R) -> Symbol {
        Symbol::Letter(rng.gen_range(0..self.alphabet_size()))
    }

    fn sample_geometric_len<R: Rng + ?Sized>(&self, p_end: f64, rng: &mut R) -> usize {
        let mut len = 0;
        while !rng.gen_bool(p_end) {
            len += 1;
        }
        len
    }

    fn next_symbol<R: Rng + ?Sized>(&self, state: &LangState, rng: &mut R) -> Symbol {
        if let Some(pending) = state.pending_word_len {
            return if pending == 0 { Symbol::End } else { self.sample_letter(rng) };
        }
        if self.horizon_bound.is_some_and(|n| state.emitted >= n) {
            return Symbol::End;
        }
        let p_end = match self.length_dist {
            LengthDist::Geometric { p_end, .. } => p_end,
            LengthDist::Uniform { .. } => unreachable!("uniform lengths are drawn at reset"),
        };
        if rng.gen_bool(p_end) {
            Symbol::End
        } else {
            self.sample_letter(rng)
        }
    }

    /// Starts an episode whose word has exactly `len` letters.
    pub fn reset_with_length<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> (LangState, Vec<f64>) {
        self.start_episode(Some(len), rng)
    }

    fn start_episode<R: Rng + ?Sized>(&self, pending: Option<usize>, rng: &mut R) -> (LangState, Vec<f64>) {
        let mut state = LangState {
            dfa_state: self.dfa.start(),
            current_symbol: Symbol::End,
            steps_elapsed: 0,
            pending_word_len: pending,
            emitted: 0,
            done: false,
        };
        state.current_symbol = self.next_symbol(&state, rng);
        let obs = self.one_hot(state.current_symbol);
        (state, obs)
    }

    /// Correct terminal action for the word read so far.
    pub fn correct_action(&self, state: &LangState) -> usize {
        if self.dfa.is_accepting(state.dfa_state) {
            ACCEPT
        } else {
            REJECT
        }
    }
}

impl Episodic for LangPomdp {
    type State = LangState;

    fn obs_dim(&self) -> usize {
        self.alphabet_size() + 1
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn max_episode_len(&self) -> Option<usize> {
        match (self.horizon_bound, self.length_dist) {
            (Some(n), _) => Some(n + 1),
            (None, LengthDist::Uniform { max_len, .. }) => Some(max_len + 1),
            (None, LengthDist::Geometric { .. }) => None,
        }
    }

    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> (LangState, Vec<f64>) {
        let pending = match self.length_dist {
            LengthDist::Uniform { min_len, max_len } => Some(rng.gen_range(min_len..=max_len)),
            LengthDist::Geometric {
                p_end,
                overflow: Overflow::Resample,
            } => {
                let mut len = self.sample_geometric_len(p_end, rng);
                if let Some(n) = self.horizon_bound {
                    while len > n {
                        len = self.sample_geometric_len(p_end, rng);
                    }
                }
                Some(len)
            }
            LengthDist::Geometric {
                overflow: Overflow::Truncate,
                ..
            } => None,
        };
        self.start_episode(pending, rng)
    }

    fn step<R: Rng + ?Sized>(&self, state: &mut LangState, action: usize, rng: &mut R) -> Result<StepResult, EnvError> {
        if state.done {
            return Err(EnvError::StepAfterDone);
        }
        if action >= 2 {
            return Err(EnvError::InvalidAction { action, num_actions: 2 });
        }
        state.steps_elapsed += 1;
        match state.current_symbol {
            Symbol::End => {
                state.done = true;
                let reward = if action == self.correct_action(state) { 1.0 } else { 0.0 };
                Ok(StepResult {
                    observation: self.terminal_observation(),
                    reward,
                    done: true,
                })
            }
            Symbol::Letter(a) => {
                state.dfa_state = self.dfa.step(state.dfa_state, a);
                state.emitted += 1;
                if let Some(p) = state.pending_word_len.as_mut() {
                    *p -= 1;
                }
                state.current_symbol = self.next_symbol(state, rng);
                Ok(StepResult {
                    observation: self.one_hot(state.current_symbol),
                    reward: 0.0,
                    done: false,
                })
            }
        }
    }

    fn is_success(&self, final_reward: f64) -> bool {
        final_reward >= 1.0
    }
}

/// The optimal policy: at `#` accept iff the tracked DFA state is accepting;
/// before `#` the action is irrelevant and fixed to accept.
pub fn oracle_policy(dfa: &Dfa, running_state: usize, observation: Symbol) -> usize {
    match observation {
        Symbol::End if !dfa.is_accepting(running_state) => REJECT,
        _ => ACCEPT,
    }
}

/// Follows a DFA from observations alone, for oracle play and for labeling
/// hidden states.
#[derive(Clone, Debug)]
pub struct DfaShadow<'a> {
    dfa: &'a Dfa,
    state: usize,
}

impl<'a> DfaShadow<'a> {
    pub fn new(dfa: &'a Dfa) -> Self {
        Self {
            dfa,
            state: dfa.start(),
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Decodes a one-hot observation over `Σ ∪ {#}`.
    pub fn decode(&self, observation: &[f64]) -> Option<Symbol> {
        let k = self.dfa.alphabet_size();
        let idx = observation.iter().position(|&v| v > 0.5)?;
        Some(if idx == k { Symbol::End } else { Symbol::Letter(idx) })
    }

    /// Action for this observation, then advances on a letter.
    pub fn act(&mut self, observation: Symbol) -> usize {
        let a = oracle_policy(self.dfa, self.state, observation);
        if let Symbol::Letter(s) = observation {
            self.state = self.dfa.step(self.state, s);
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automata::{build_language, Language};
    use crate::rng::seeded;

    fn parity_env(n: usize) -> LangPomdp {
        LangPomdp::bounded(build_language(Language::Parity).dfa, n).unwrap()
    }

    fn play_word(env: &LangPomdp, word: &[usize], action: usize) -> StepResult {
        let mut rng = seeded(0);
        let (mut st, _) = env.reset_with_length(0, &mut rng);
        // drive the state through the exact word
        st.current_symbol = if word.is_empty() { Symbol::End } else { Symbol::Letter(word[0]) };
        st.pending_word_len = Some(word.len());
        for i in 0..word.len() {
            let r = env.step(&mut st, REJECT, &mut rng).unwrap();
            assert_eq!((r.reward, r.done), (0.0, false));
            st.current_symbol = if i + 1 < word.len() { Symbol::Letter(word[i + 1]) } else { Symbol::End };
        }
        env.step(&mut st, action, &mut rng).unwrap()
    }

    #[test]
    fn terminal_reward_follows_membership() {
        let env = parity_env(25);
        assert_eq!(play_word(&env, &[1, 1], ACCEPT).reward, 1.0);
        assert_eq!(play_word(&env, &[1], ACCEPT).reward, 0.0);
        assert_eq!(play_word(&env, &[1], REJECT).reward, 1.0);
        assert_eq!(play_word(&env, &[], ACCEPT).reward, 1.0);
    }

    #[test]
    fn forced_empty_word_starts_with_end_marker() {
        let env = compile_pomdp(
            build_language(Language::Parity).dfa,
            Some(5),
            LengthDist::Uniform { min_len: 0, max_len: 0 },
            0.99,
        )
        .unwrap();
        let mut rng = seeded(1);
        for _ in 0..20 {
            let (_, obs) = env.reset(&mut rng);
            assert_eq!(obs, vec![0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn geometric_first_observation_is_end_a_third_of_the_time() {
        let env = compile_pomdp(
            build_language(Language::Parity).dfa,
            None,
            LengthDist::Geometric {
                p_end: 1.0 / 3.0,
                overflow: Overflow::Truncate,
            },
            0.99,
        )
        .unwrap();
        let mut rng = seeded(2);
        let n = 100_000;
        let ends = (0..n).filter(|_| env.reset(&mut rng).1[2] == 1.0).count();
        assert!((ends as f64 / n as f64 - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn step_after_done_is_an_error() {
        let env = parity_env(3);
        let mut rng = seeded(3);
        let (mut st, _) = env.reset_with_length(0, &mut rng);
        assert!(env.step(&mut st, ACCEPT, &mut rng).unwrap().done);
        assert!(matches!(env.step(&mut st, ACCEPT, &mut rng), Err(EnvError::StepAfterDone)));
    }

    #[test]
    fn bounds_are_validated() {
        let dfa = build_language(Language::Parity).dfa;
        let u = |a, b| LengthDist::Uniform { min_len: a, max_len: b };
        assert!(compile_pomdp(dfa.clone(), Some(5), u(1, 6), 0.9).is_err());
        assert!(compile_pomdp(dfa.clone(), None, u(3, 2), 0.9).is_err());
        assert!(compile_pomdp(dfa.clone(), Some(5), u(1, 5), 1.5).is_err());
        assert!(compile_pomdp(dfa, Some(5), u(1, 5), 0.0).is_ok());
    }

    #[test]
    fn truncated_geometric_respects_horizon() {
        let env = compile_pomdp(
            build_language(Language::Parity).dfa,
            Some(4),
            LengthDist::Geometric {
                p_end: 0.05,
                overflow: Overflow::Truncate,
            },
            0.99,
        )
        .unwrap();
        let mut rng = seeded(4);
        for _ in 0..500 {
            let (mut st, _) = env.reset(&mut rng);
            let mut steps = 0;
            loop {
                steps += 1;
                if env.step(&mut st, ACCEPT, &mut rng).unwrap().done {
                    break;
                }
            }
            assert!(steps <= 5);
        }
    }
}
