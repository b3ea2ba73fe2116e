use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_input, Bound, Carry, LayerNorm, Linear, ModelError, Result};
use crate::tensor::{ParamId, ParamStore, Tensor, Var};

const INIT_STD: f64 = 0.02;

/// Tanh approximation of GELU.
pub fn gelu<'t>(x: Var<'t>) -> Result<Var<'t>> {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let inner = x.add(x.mul(x)?.mul(x)?.scale(0.044715))?.scale(c).tanh().add_scalar(1.0);
    Ok(x.mul(inner)?.scale(0.5))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GptConfig {
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    /// Rows of the learned position table.
    pub max_positions: usize,
}

/// Keys and values seen so far by one layer, `[batch * heads, len, head_dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GptLayerCache {
    pub batch: usize,
    pub keys: Tensor,
    pub values: Tensor,
}

#[derive(Clone, Debug)]
struct Block {
    ln_attn: LayerNorm,
    query: Linear,
    key: Linear,
    value: Linear,
    out: Linear,
    ln_mlp: LayerNorm,
    fc: Linear,
    proj: Linear,
}

/// Pre-norm causal transformer with learned absolute positions.
#[derive(Clone, Debug)]
pub struct Gpt {
    pub config: GptConfig,
    pub input_dim: usize,
    input: Linear,
    positions: ParamId,
    blocks: Vec<Block>,
    ln_final: LayerNorm,
}

fn normal_linear<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, i: usize, o: usize, rng: &mut R) -> Linear {
    Linear::with_weight(store, name, Tensor::randn(&[i, o], INIT_STD, rng), true)
}

impl Gpt {
    pub fn new<R: Rng + ?Sized>(config: &GptConfig, input_dim: usize, store: &mut ParamStore, name: &str, rng: &mut R) -> Result<Self> {
        let h = config.hidden;
        if h == 0 || config.heads == 0 || h % config.heads != 0 {
            return Err(ModelError::InvalidConfig(format!("hidden {} must be a positive multiple of heads {}", h, config.heads)));
        }
        if config.layers == 0 || config.max_positions == 0 {
            return Err(ModelError::InvalidConfig("gpt needs layers > 0 and max_positions > 0".into()));
        }
        let input = Linear::new(store, &format!("{}.input", name), input_dim, h, true, rng);
        let positions = store.add(format!("{}.positions", name), Tensor::randn(&[config.max_positions, h], INIT_STD, rng));
        let blocks = (0..config.layers)
            .map(|l| {
                let n = format!("{}.block{}", name, l);
                Block {
                    ln_attn: LayerNorm::new(store, &format!("{}.ln_attn", n), h),
                    query: normal_linear(store, &format!("{}.query", n), h, h, rng),
                    key: normal_linear(store, &format!("{}.key", n), h, h, rng),
                    value: normal_linear(store, &format!("{}.value", n), h, h, rng),
                    out: normal_linear(store, &format!("{}.out", n), h, h, rng),
                    ln_mlp: LayerNorm::new(store, &format!("{}.ln_mlp", n), h),
                    fc: normal_linear(store, &format!("{}.fc", n), h, 4 * h, rng),
                    proj: normal_linear(store, &format!("{}.proj", n), 4 * h, h, rng),
                }
            })
            .collect();
        let ln_final = LayerNorm::new(store, &format!("{}.ln_final", name), h);
        Ok(Self {
            config: *config,
            input_dim,
            input,
            positions,
            blocks,
            ln_final,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.config.hidden / self.config.heads
    }

    pub fn initial_carry(&self, batch: usize) -> Carry {
        let empty = Tensor::zeros(&[batch * self.config.heads, 0, self.head_dim()]);
        let layer = GptLayerCache {
            batch,
            keys: empty.clone(),
            values: empty,
        };
        Carry::Gpt {
            layers: vec![layer; self.config.layers],
            len: 0,
        }
    }

    /// `[B, T, H] -> [B * heads, T, head_dim]`.
    fn split<'t>(&self, x: Var<'t>, batch: usize, steps: usize) -> Result<Var<'t>> {
        let (nh, dh) = (self.config.heads, self.head_dim());
        Ok(x.reshape(&[batch, steps, nh, dh])?.permute(&[0, 2, 1, 3])?.reshape(&[batch * nh, steps, dh])?)
    }

    fn merge<'t>(&self, x: Var<'t>, batch: usize, steps: usize) -> Result<Var<'t>> {
        let (nh, dh) = (self.config.heads, self.head_dim());
        Ok(x.reshape(&[batch, nh, steps, dh])?.permute(&[0, 2, 1, 3])?.reshape(&[batch, steps, nh * dh])?)
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, inputs: Var<'t>, carry: &Carry) -> Result<(Var<'t>, Carry)> {
        let (steps, batch) = check_input(inputs, self.input_dim)?;
        let (caches, offset) = match carry {
            Carry::Gpt { layers, len }
                if layers.len() == self.blocks.len()
                    && layers.iter().all(|c| c.batch == batch && c.keys.shape() == [batch * self.config.heads, *len, self.head_dim()]) =>
            {
                (layers, *len)
            }
            _ => return Err(ModelError::CarryMismatch(format!("expected a {}-layer cache for batch {}", self.blocks.len(), batch))),
        };
        let total = offset + steps;
        if total > self.config.max_positions {
            return Err(ModelError::PositionOverflow {
                needed: total,
                max: self.config.max_positions,
            });
        }
        let tape = inputs.tape();
        let h = self.config.hidden;
        if steps == 0 {
            return Ok((tape.constant(Tensor::zeros(&[0, batch, h])), carry.clone()));
        }
        let mut mask = Tensor::zeros(&[steps, total]);
        for i in 0..steps {
            for j in offset + i + 1..total {
                mask.data_mut()[i * total + j] = f64::NEG_INFINITY;
            }
        }
        let mask = tape.constant(mask);
        let scale = 1.0 / (self.head_dim() as f64).sqrt();

        let pos = p.get(self.positions).slice(0, offset, total)?;
        let mut x = self.input.forward(p, inputs.permute(&[1, 0, 2])?)?.add(pos)?;
        let mut next = Vec::with_capacity(self.blocks.len());
        for (b, cache) in self.blocks.iter().zip(caches) {
            let a = b.ln_attn.forward(p, x)?;
            let q = self.split(b.query.forward(p, a)?, batch, steps)?;
            let mut k = self.split(b.key.forward(p, a)?, batch, steps)?;
            let mut v = self.split(b.value.forward(p, a)?, batch, steps)?;
            if offset > 0 {
                k = Var::concat(&[tape.constant(cache.keys.clone()), k], 1)?;
                v = Var::concat(&[tape.constant(cache.values.clone()), v], 1)?;
            }
            let att = q.bmm(k, true)?.scale(scale).add(mask)?.softmax().bmm(v, false)?;
            x = x.add(b.out.forward(p, self.merge(att, batch, steps)?)?)?;
            let m = b.ln_mlp.forward(p, x)?;
            x = x.add(b.proj.forward(p, gelu(b.fc.forward(p, m)?)?)?)?;
            next.push(GptLayerCache {
                batch,
                keys: k.to_tensor(),
                values: v.to_tensor(),
            });
        }
        let y = self.ln_final.forward(p, x)?.permute(&[1, 0, 2])?;
        Ok((y, Carry::Gpt { layers: next, len: total }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::tensor::Tape;

    fn model(layers: usize) -> (Gpt, ParamStore) {
        let mut store = ParamStore::new();
        let cfg = GptConfig {
            hidden: 8,
            heads: 2,
            layers,
            max_positions: 6,
        };
        let m = Gpt::new(&cfg, 3, &mut store, "gpt", &mut seeded(4)).unwrap();
        (m, store)
    }

    #[test]
    fn single_token_attention_is_its_own_value() {
        let (m, store) = model(1);
        let tape = Tape::new();
        let p = Bound::frozen(&tape, &store);
        let u = tape.constant(Tensor::randn(&[1, 1, 3], 1.0, &mut seeded(2)));
        let (y, _) = m.forward(&p, u, &m.initial_carry(1)).unwrap();

        let b = &m.blocks[0];
        let x = m.input.forward(&p, u.reshape(&[1, 3]).unwrap()).unwrap();
        let x = x.add(p.get(m.positions).slice(0, 0, 1).unwrap()).unwrap();
        let a = b.ln_attn.forward(&p, x).unwrap();
        let x = x.add(b.out.forward(&p, b.value.forward(&p, a).unwrap()).unwrap()).unwrap();
        let mlp = b.proj.forward(&p, gelu(b.fc.forward(&p, b.ln_mlp.forward(&p, x).unwrap()).unwrap()).unwrap()).unwrap();
        let expected = m.ln_final.forward(&p, x.add(mlp).unwrap()).unwrap();
        assert!(y.value().max_abs_diff(&expected.to_tensor().reshape(&[1, 1, 8]).unwrap()) < 1e-12);
    }

    #[test]
    fn position_overflow_is_an_error() {
        let (m, store) = model(1);
        let tape = Tape::new();
        let p = Bound::frozen(&tape, &store);
        let u = tape.constant(Tensor::zeros(&[7, 1, 3]));
        assert!(matches!(
            m.forward(&p, u, &m.initial_carry(1)),
            Err(ModelError::PositionOverflow { needed: 7, max: 6 })
        ));
    }

    #[test]
    fn heads_must_divide_hidden() {
        let cfg = GptConfig {
            hidden: 6,
            heads: 4,
            layers: 1,
            max_positions: 4,
        };
        assert!(Gpt::new(&cfg, 2, &mut ParamStore::new(), "g", &mut seeded(0)).is_err());
    }
}
