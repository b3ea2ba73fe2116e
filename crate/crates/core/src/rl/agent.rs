use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Result;
use crate::seqmodels::{Backbone, BackboneConfig, Bound, Carry, Embedder, EmbeddingConfig, Linear};
use crate::tensor::{ParamStore, Var};

/// Q-value head on top of the backbone hiddens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QHeadSpec {
    Linear,
    /// ReLU MLP with the given hidden widths, then a linear output.
    Mlp { hidden: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub embedding: EmbeddingConfig,
    pub backbone: BackboneConfig,
    pub q_head: QHeadSpec,
}

/// Embedder, backbone and Q-head. Holds structure only; values live in a
/// [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Agent {
    pub spec: AgentSpec,
    pub obs_dim: usize,
    pub num_actions: usize,
    embedder: Embedder,
    pub backbone: Backbone,
    head: Vec<Linear>,
}

/// Per-step outputs of one agent forward pass.
pub struct AgentOutput<'t> {
    /// `[T, B, num_actions]`.
    pub q: Var<'t>,
    /// Final backbone layer, `[T, B, hidden]`.
    pub hidden: Var<'t>,
    pub carry: Carry,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(spec: &AgentSpec, obs_dim: usize, num_actions: usize, rng: &mut R) -> Result<(Self, ParamStore)> {
        let mut store = ParamStore::new();
        let embedder = Embedder::new(spec.embedding, obs_dim, num_actions, &mut store, "embed", rng)?;
        let backbone = Backbone::new(&spec.backbone, spec.embedding.width(), &mut store, "backbone", rng)?;
        let mut widths = vec![backbone.hidden()];
        if let QHeadSpec::Mlp { hidden } = &spec.q_head {
            widths.extend(hidden);
        }
        widths.push(num_actions);
        let head = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(&mut store, &format!("q_head.{}", i), w[0], w[1], true, rng))
            .collect();
        Ok((
            Self {
                spec: spec.clone(),
                obs_dim,
                num_actions,
                embedder,
                backbone,
                head,
            },
            store,
        ))
    }

    pub fn initial_carry(&self, batch: usize) -> Carry {
        self.backbone.initial_carry(batch)
    }

    /// Inputs are `[T, B, obs_dim]`, `[T, B, num_actions]` (one-hot of the
    /// previous action, zeros at the first step) and `[T, B, 1]`.
    pub fn forward<'t>(&self, p: &Bound<'t>, obs: Var<'t>, prev_action: Var<'t>, prev_reward: Var<'t>, carry: &Carry) -> Result<AgentOutput<'t>> {
        let u = self.embedder.forward(p, obs, prev_action, prev_reward)?;
        let (hidden, carry) = self.backbone.forward(p, u, carry)?;
        let mut q = hidden;
        for (i, layer) in self.head.iter().enumerate() {
            q = layer.forward(p, q)?;
            if i + 1 < self.head.len() {
                q = q.relu();
            }
        }
        Ok(AgentOutput { q, hidden, carry })
    }
}
