use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Bound, Linear, ModelError, Result};
use crate::tensor::{ParamStore, Var};

/// Widths of the observation, previous-action and previous-reward
/// embeddings; 0 disables a channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub h_o: usize,
    pub h_a: usize,
    pub h_r: usize,
}

impl EmbeddingConfig {
    pub fn width(&self) -> usize {
        self.h_o + self.h_a + self.h_r
    }
}

/// Concatenated linear embeddings of `(o_t, a_{t-1}, r_{t-1})`.
#[derive(Clone, Debug)]
pub struct Embedder {
    pub config: EmbeddingConfig,
    obs: Option<Linear>,
    action: Option<Linear>,
    reward: Option<Linear>,
}

impl Embedder {
    pub fn new<R: Rng + ?Sized>(
        config: EmbeddingConfig,
        obs_dim: usize,
        num_actions: usize,
        store: &mut ParamStore,
        name: &str,
        rng: &mut R,
    ) -> Result<Self> {
        if config.width() == 0 {
            return Err(ModelError::InvalidConfig("all embedding widths are zero".into()));
        }
        let mut make = |width: usize, in_dim: usize, part: &str| {
            (width > 0).then(|| Linear::new(store, &format!("{}.{}", name, part), in_dim, width, true, rng))
        };
        let obs = make(config.h_o, obs_dim, "obs");
        let action = make(config.h_a, num_actions, "action");
        let reward = make(config.h_r, 1, "reward");
        Ok(Self {
            config,
            obs,
            action,
            reward,
        })
    }

    /// Inputs are `[T, B, obs_dim]`, `[T, B, num_actions]` and `[T, B, 1]`;
    /// output is `[T, B, width]`.
    pub fn forward<'t>(&self, p: &Bound<'t>, obs: Var<'t>, prev_action: Var<'t>, prev_reward: Var<'t>) -> Result<Var<'t>> {
        let mut parts = Vec::with_capacity(3);
        for (layer, x) in [(&self.obs, obs), (&self.action, prev_action), (&self.reward, prev_reward)] {
            if let Some(l) = layer {
                parts.push(l.forward(p, x)?);
            }
        }
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let axis = parts[0].shape().len() - 1;
        Ok(Var::concat(&parts, axis)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::tensor::{Tape, Tensor};

    fn embed(cfg: EmbeddingConfig) -> Vec<usize> {
        let mut store = ParamStore::new();
        let e = Embedder::new(cfg, 3, 2, &mut store, "emb", &mut seeded(0)).unwrap();
        let tape = Tape::new();
        let p = Bound::frozen(&tape, &store);
        let o = tape.constant(Tensor::zeros(&[4, 2, 3]));
        let a = tape.constant(Tensor::zeros(&[4, 2, 2]));
        let r = tape.constant(Tensor::zeros(&[4, 2, 1]));
        e.forward(&p, o, a, r).unwrap().shape()
    }

    #[test]
    fn widths_follow_the_profiles() {
        assert_eq!(embed(EmbeddingConfig { h_o: 32, h_a: 0, h_r: 0 }), vec![4, 2, 32]);
        assert_eq!(embed(EmbeddingConfig { h_o: 64, h_a: 64, h_r: 0 }), vec![4, 2, 128]);
    }

    #[test]
    fn all_zero_widths_rejected() {
        let mut store = ParamStore::new();
        let cfg = EmbeddingConfig { h_o: 0, h_a: 0, h_r: 0 };
        assert!(Embedder::new(cfg, 3, 2, &mut store, "e", &mut seeded(0)).is_err());
    }

    #[test]
    fn zero_input_with_zero_bias_embeds_to_zero() {
        let mut store = ParamStore::new();
        let cfg = EmbeddingConfig { h_o: 8, h_a: 0, h_r: 0 };
        let e = Embedder::new(cfg, 3, 2, &mut store, "e", &mut seeded(1)).unwrap();
        let tape = Tape::new();
        let p = Bound::frozen(&tape, &store);
        let z = |d| tape.constant(Tensor::zeros(&[1, 1, d]));
        let u = e.forward(&p, z(3), z(2), z(1)).unwrap();
        assert!(u.value().data().iter().all(|&v| v == 0.0));
    }
}
