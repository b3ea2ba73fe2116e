use rand::Rng;
use serde::Serialize;

use super::Result;
use crate::envs::{oracle_policy, DfaShadow, Episodic, LangPomdp};
use crate::rl::{run_episodes, Agent, RlError};
use crate::seqmodels::ModelError;
use crate::tensor::ParamStore;

/// Who makes the terminal decision.
#[derive(Clone, Copy)]
pub enum Decider<'a> {
    Agent { agent: &'a Agent, store: &'a ParamStore },
    /// Tracks the DFA and always answers correctly.
    Oracle,
    /// Uniform accept/reject.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtrapolationRow {
    pub length: usize,
    /// `None` when the model cannot represent sequences this long.
    pub accuracy: Option<f64>,
    pub episodes: usize,
    pub structural_failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtrapolationReport {
    pub train_n: usize,
    pub rows: Vec<ExtrapolationRow>,
}

impl ExtrapolationReport {
    pub fn accuracy_at(&self, length: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.length == length).and_then(|r| r.accuracy)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "length,accuracy,episodes,structural_failure")?;
        for r in &self.rows {
            let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{}", r.length, acc, r.episodes, r.structural_failure.as_deref().unwrap_or(""))?;
        }
        Ok(())
    }
}

/// Evaluation lengths `{n/2} ∪ {n + i}`.
pub fn extrapolation_lengths(train_n: usize, offsets: &[usize]) -> Vec<usize> {
    let mut lengths = vec![train_n / 2];
    lengths.extend(offsets.iter().map(|i| train_n + i));
    lengths
}

/// Terminal-decision accuracy on words of exactly each length.
pub fn extrapolation_eval<R: Rng + ?Sized>(
    decider: Decider<'_>,
    env: &LangPomdp,
    train_n: usize,
    offsets: &[usize],
    episodes: usize,
    rng: &mut R,
) -> Result<ExtrapolationReport> {
    let mut rows = vec![];
    for length in extrapolation_lengths(train_n, offsets) {
        let starts: Vec<_> = (0..episodes).map(|_| env.reset_with_length(length, rng)).collect();
        let correct = match decider {
            Decider::Agent { agent, store } => {
                match run_episodes(agent, store, env, starts, 0.0, false, rng, |_| {}) {
                    Ok(trajs) => Some(trajs.iter().filter(|t| t.final_reward() >= 1.0).count()),
                    Err(RlError::Model(e @ ModelError::PositionOverflow { .. })) => {
                        rows.push(ExtrapolationRow {
                            length,
                            accuracy: None,
                            episodes,
                            structural_failure: Some(e.to_string()),
                        });
                        None
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            Decider::Oracle => {
                let mut ok = 0;
                for (mut s, mut obs) in starts {
                    let mut shadow = DfaShadow::new(&env.dfa);
                    loop {
                        let sym = shadow.decode(&obs).expect("observation decodes");
                        let a = shadow.act(sym);
                        debug_assert_eq!(a, oracle_policy(&env.dfa, s.dfa_state, sym));
                        let r = env.step(&mut s, a, rng)?;
                        if r.done {
                            ok += usize::from(r.reward >= 1.0);
                            break;
                        }
                        obs = r.observation;
                    }
                }
                Some(ok)
            }
            Decider::Random => {
                let mut ok = 0;
                for (mut s, _) in starts {
                    loop {
                        let r = env.step(&mut s, rng.gen_range(0..2), rng)?;
                        if r.done {
                            ok += usize::from(r.reward >= 1.0);
                            break;
                        }
                    }
                }
                Some(ok)
            }
        };
        if let Some(c) = correct {
            rows.push(ExtrapolationRow {
                length,
                accuracy: Some(c as f64 / episodes.max(1) as f64),
                episodes,
                structural_failure: None,
            });
        }
    }
    Ok(ExtrapolationReport { train_n, rows })
}
