use std::fmt;

use rand::Rng;
use serde::Serialize;

use super::{silhouette_score, AnalysisError, Result};
use crate::envs::{Episodic, LangPomdp, Symbol};
use crate::rl::{run_episodes, Agent, Event};
use crate::tensor::ParamStore;

/// True DFA state and current symbol, or the post-terminal marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProbeLabel {
    State { q: usize, w: Option<usize> },
    Terminal,
}

impl fmt::Display for ProbeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbeLabel::State { q, w: Some(a) } => write!(f, "(q{},{})", q, a),
            ProbeLabel::State { q, w: None } => write!(f, "(q{},#)", q),
            ProbeLabel::Terminal => write!(f, "T"),
        }
    }
}

impl Serialize for ProbeLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LabeledHiddenSet {
    pub hiddens: Vec<Vec<f64>>,
    pub labels: Vec<ProbeLabel>,
}

impl LabeledHiddenSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn silhouette(&self) -> Result<f64> {
        silhouette_score(&self.hiddens, &self.labels)
    }

    /// `label,h0,h1,...` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let width = self.hiddens.first().map_or(0, Vec::len);
        let header: Vec<String> = (0..width).map(|i| format!("h{}", i)).collect();
        writeln!(w, "label,{}", header.join(","))?;
        for (h, l) in self.hiddens.iter().zip(&self.labels) {
            let vals: Vec<String> = h.iter().map(|v| v.to_string()).collect();
            writeln!(w, "\"{}\",{}", l, vals.join(","))?;
        }
        Ok(())
    }
}

/// Runs greedy episodes and records the final backbone output at every
/// decision, labelled by the true `(q, w)`, plus one `T` row per episode
/// for the hidden after the terminal observation.
pub fn probe_hidden<R: Rng + ?Sized>(agent: &Agent, store: &ParamStore, env: &LangPomdp, episodes: usize, rng: &mut R) -> Result<LabeledHiddenSet> {
    if agent.obs_dim != env.obs_dim() || agent.num_actions != env.num_actions() {
        return Err(AnalysisError::Invalid(format!(
            "agent expects {} observations and {} actions, task has {} and {}",
            agent.obs_dim,
            agent.num_actions,
            env.obs_dim(),
            env.num_actions()
        )));
    }
    let starts = (0..episodes).map(|_| env.reset(rng)).collect();
    let mut per_episode: Vec<LabeledHiddenSet> = vec![LabeledHiddenSet::default(); episodes];
    run_episodes(agent, store, env, starts, 0.0, true, rng, |ev| match ev {
        Event::Step(v) => {
            let w = match v.state.current_symbol {
                Symbol::Letter(a) => Some(a),
                Symbol::End => None,
            };
            let set = &mut per_episode[v.episode];
            set.hiddens.push(v.hidden.to_vec());
            set.labels.push(ProbeLabel::State { q: v.state.dfa_state, w });
        }
        Event::Terminal { episode, hidden } => {
            per_episode[episode].hiddens.push(hidden.to_vec());
            per_episode[episode].labels.push(ProbeLabel::Terminal);
        }
    })?;
    let mut out = LabeledHiddenSet::default();
    for s in per_episode {
        out.hiddens.extend(s.hiddens);
        out.labels.extend(s.labels);
    }
    Ok(out)
}
