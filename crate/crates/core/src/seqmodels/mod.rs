//! Sequence backbones over time-major inputs `[T, B, d]`.
//!
//! Every backbone maps inputs to per-step hiddens `[T, B, h]` and threads a
//! [`Carry`] so a sequence can be processed in one call or in chunks.
//! Parameters live in a [`ParamStore`]; a forward pass binds them onto a
//! tape with [`Bound`].

mod embed;
mod gpt;
mod linear_attention;
mod lru;
mod lstm;

pub use embed::{Embedder, EmbeddingConfig};
pub use gpt::{Gpt, GptConfig, GptLayerCache};
pub use linear_attention::{linear_attention_dual_check, linear_attention_parallel, linear_attention_recurrent, DualCheck};
pub use lru::{lru_init, lru_recurrence, LambdaInit, Lru, LruConfig, ScanMode};
pub use lstm::{Lstm, LstmConfig};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{ParamId, ParamStore, Tape, Tensor, TensorError, Var};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("carry does not match the model: {0}")]
    CarryMismatch(String),
    #[error("sequence needs {needed} positions but the table holds {max}")]
    PositionOverflow { needed: usize, max: usize },
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Parameters of a store placed on a tape, indexed by [`ParamId`].
pub struct Bound<'t> {
    vars: Vec<Var<'t>>,
}

impl<'t> Bound<'t> {
    /// Tracked leaves; gradients flow into every parameter.
    pub fn trainable(tape: &'t Tape, store: &ParamStore) -> Self {
        Self {
            vars: store.tensors().iter().map(|t| tape.param(t.clone())).collect(),
        }
    }

    /// Untracked leaves for inference.
    pub fn frozen(tape: &'t Tape, store: &ParamStore) -> Self {
        Self {
            vars: store.tensors().iter().map(|t| tape.constant(t.clone())).collect(),
        }
    }

    /// Uses existing tape variables, one per store entry in order.
    pub fn from_vars(vars: Vec<Var<'t>>) -> Self {
        Self { vars }
    }

    pub fn get(&self, id: ParamId) -> Var<'t> {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var<'t>] {
        &self.vars
    }
}

/// Affine map on the last axis.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    /// Weights uniform in `±1/sqrt(in_dim)`, biases zero.
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, bias: bool, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        Self::with_weight(store, name, Tensor::uniform(&[in_dim, out_dim], bound, rng), bias)
    }

    pub fn with_weight(store: &mut ParamStore, name: &str, weight: Tensor, bias: bool) -> Self {
        let (in_dim, out_dim) = (weight.shape()[0], weight.shape()[1]);
        let weight = store.add(format!("{}.weight", name), weight);
        let bias = bias.then(|| store.add(format!("{}.bias", name), Tensor::zeros(&[out_dim])));
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Result<Var<'t>> {
        let y = x.matmul(p.get(self.weight))?;
        Ok(match self.bias {
            Some(b) => y.add(p.get(b))?,
            None => y,
        })
    }
}

/// Layer norm with learned gain and bias.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

pub const LN_EPS: f64 = 1e-5;

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        Self {
            gain: store.add(format!("{}.gain", name), Tensor::full(&[dim], 1.0)),
            bias: store.add(format!("{}.bias", name), Tensor::zeros(&[dim])),
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Result<Var<'t>> {
        Ok(x.layer_norm(LN_EPS).mul(p.get(self.gain))?.add(p.get(self.bias))?)
    }
}

/// Backbone architecture and sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackboneConfig {
    Lstm(LstmConfig),
    Gpt(GptConfig),
    Lru(LruConfig),
}

impl BackboneConfig {
    pub fn hidden(&self) -> usize {
        match self {
            BackboneConfig::Lstm(c) => c.hidden,
            BackboneConfig::Gpt(c) => c.hidden,
            BackboneConfig::Lru(c) => c.hidden,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            BackboneConfig::Lstm(_) => "lstm",
            BackboneConfig::Gpt(_) => "gpt",
            BackboneConfig::Lru(_) => "lru",
        }
    }
}

#[derive(Clone, Debug)]
pub enum Backbone {
    Lstm(Lstm),
    Gpt(Gpt),
    Lru(Lru),
}

/// Recurrent state carried between calls.
#[derive(Clone, Debug, PartialEq)]
pub enum Carry {
    /// Per layer `(h, c)`, each `[B, hidden]`.
    Lstm(Vec<(Tensor, Tensor)>),
    /// Per layer key/value cache, `[B * heads, len, head_dim]`.
    Gpt { layers: Vec<GptLayerCache>, len: usize },
    /// Per layer complex state as interleaved pairs, `[B, 2 * state]`.
    Lru(Vec<Tensor>),
}

impl Carry {
    pub fn batch(&self) -> usize {
        match self {
            Carry::Lstm(l) => l.first().map_or(0, |(h, _)| h.shape()[0]),
            Carry::Gpt { layers, .. } => layers.first().map_or(0, |c| c.batch),
            Carry::Lru(l) => l.first().map_or(0, |x| x.shape()[0]),
        }
    }
}

impl Backbone {
    pub fn new<R: Rng + ?Sized>(cfg: &BackboneConfig, input_dim: usize, store: &mut ParamStore, name: &str, rng: &mut R) -> Result<Self> {
        Ok(match cfg {
            BackboneConfig::Lstm(c) => Backbone::Lstm(Lstm::new(c, input_dim, store, name, rng)?),
            BackboneConfig::Gpt(c) => Backbone::Gpt(Gpt::new(c, input_dim, store, name, rng)?),
            BackboneConfig::Lru(c) => Backbone::Lru(Lru::new(c, input_dim, store, name, rng)?),
        })
    }

    pub fn hidden(&self) -> usize {
        match self {
            Backbone::Lstm(m) => m.config.hidden,
            Backbone::Gpt(m) => m.config.hidden,
            Backbone::Lru(m) => m.config.hidden,
        }
    }

    pub fn initial_carry(&self, batch: usize) -> Carry {
        match self {
            Backbone::Lstm(m) => m.initial_carry(batch),
            Backbone::Gpt(m) => m.initial_carry(batch),
            Backbone::Lru(m) => m.initial_carry(batch),
        }
    }

    /// `inputs` is `[T, B, input_dim]`; returns `[T, B, hidden]`.
    pub fn forward<'t>(&self, p: &Bound<'t>, inputs: Var<'t>, carry: &Carry) -> Result<(Var<'t>, Carry)> {
        match self {
            Backbone::Lstm(m) => m.forward(p, inputs, carry),
            Backbone::Gpt(m) => m.forward(p, inputs, carry),
            Backbone::Lru(m) => m.forward(p, inputs, carry),
        }
    }

    /// Largest total sequence length the backbone can represent.
    pub fn max_len(&self) -> Option<usize> {
        match self {
            Backbone::Gpt(m) => Some(m.config.max_positions),
            _ => None,
        }
    }
}

pub(crate) fn check_input<'t>(inputs: Var<'t>, input_dim: usize) -> Result<(usize, usize)> {
    let s = inputs.shape();
    if s.len() != 3 || s[2] != input_dim {
        return Err(ModelError::InvalidConfig(format!(
            "expected inputs [T, B, {}], got {:?}",
            input_dim, s
        )));
    }
    Ok((s[0], s[1]))
}
