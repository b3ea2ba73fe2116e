use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_input, Bound, Carry, Linear, ModelError, Result};
use crate::tensor::{ParamStore, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LstmConfig {
    pub hidden: usize,
    pub layers: usize,
}

#[derive(Clone, Debug)]
struct LstmLayer {
    /// Input map to the four gates `[i, f, g, o]`, with the shared bias.
    input: Linear,
    /// Hidden map to the gates, no bias.
    recurrent: Linear,
}

/// Stacked LSTM; returns the last layer's hiddens.
#[derive(Clone, Debug)]
pub struct Lstm {
    pub config: LstmConfig,
    pub input_dim: usize,
    layers: Vec<LstmLayer>,
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(config: &LstmConfig, input_dim: usize, store: &mut ParamStore, name: &str, rng: &mut R) -> Result<Self> {
        if config.hidden == 0 || config.layers == 0 {
            return Err(ModelError::InvalidConfig("lstm needs hidden > 0 and layers > 0".into()));
        }
        let h = config.hidden;
        let bound = 1.0 / (h as f64).sqrt();
        let layers = (0..config.layers)
            .map(|l| {
                let d = if l == 0 { input_dim } else { h };
                let name = format!("{}.layer{}", name, l);
                LstmLayer {
                    input: Linear::with_weight(store, &format!("{}.input", name), Tensor::uniform(&[d, 4 * h], bound, rng), true),
                    recurrent: Linear::with_weight(store, &format!("{}.recurrent", name), Tensor::uniform(&[h, 4 * h], bound, rng), false),
                }
            })
            .collect();
        Ok(Self {
            config: *config,
            input_dim,
            layers,
        })
    }

    pub fn initial_carry(&self, batch: usize) -> Carry {
        let z = Tensor::zeros(&[batch, self.config.hidden]);
        Carry::Lstm(vec![(z.clone(), z); self.config.layers])
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, inputs: Var<'t>, carry: &Carry) -> Result<(Var<'t>, Carry)> {
        let (steps, batch) = check_input(inputs, self.input_dim)?;
        let h = self.config.hidden;
        let states = match carry {
            Carry::Lstm(s) if s.len() == self.layers.len() && s.iter().all(|(a, c)| a.shape() == [batch, h] && c.shape() == [batch, h]) => s,
            _ => return Err(ModelError::CarryMismatch(format!("expected {} LSTM layers of [{}, {}]", self.layers.len(), batch, h))),
        };
        let tape = inputs.tape();
        let mut x = inputs;
        let mut next = Vec::with_capacity(self.layers.len());
        for (layer, (h0, c0)) in self.layers.iter().zip(states) {
            let proj = layer.input.forward(p, x)?;
            let mut hs = tape.constant(h0.clone());
            let mut cs = tape.constant(c0.clone());
            let mut outs = Vec::with_capacity(steps);
            for t in 0..steps {
                let z = proj.slice(0, t, t + 1)?.reshape(&[batch, 4 * h])?.add(layer.recurrent.forward(p, hs)?)?;
                let i = z.slice(1, 0, h)?.sigmoid();
                let f = z.slice(1, h, 2 * h)?.sigmoid();
                let g = z.slice(1, 2 * h, 3 * h)?.tanh();
                let o = z.slice(1, 3 * h, 4 * h)?.sigmoid();
                cs = f.mul(cs)?.add(i.mul(g)?)?;
                hs = o.mul(cs.tanh())?;
                outs.push(hs);
            }
            next.push((hs.to_tensor(), cs.to_tensor()));
            x = if steps == 0 {
                tape.constant(Tensor::zeros(&[0, batch, h]))
            } else {
                Var::concat(&outs, 0)?.reshape(&[steps, batch, h])?
            };
        }
        Ok((x, Carry::Lstm(next)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::tensor::Tape;

    #[test]
    fn zero_weights_give_zero_hiddens() {
        let mut store = ParamStore::new();
        let cfg = LstmConfig { hidden: 4, layers: 2 };
        let m = Lstm::new(&cfg, 3, &mut store, "lstm", &mut seeded(0)).unwrap();
        for t in store.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let tape = Tape::new();
        let p = Bound::frozen(&tape, &store);
        let u = tape.constant(Tensor::randn(&[5, 2, 3], 1.0, &mut seeded(1)));
        let (y, _) = m.forward(&p, u, &m.initial_carry(2)).unwrap();
        assert_eq!(y.shape(), vec![5, 2, 4]);
        assert!(y.value().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn carry_batch_mismatch_is_an_error() {
        let mut store = ParamStore::new();
        let m = Lstm::new(&LstmConfig { hidden: 4, layers: 1 }, 3, &mut store, "lstm", &mut seeded(0)).unwrap();
        let tape = Tape::new();
        let p = Bound::frozen(&tape, &store);
        let u = tape.constant(Tensor::zeros(&[2, 3, 3]));
        assert!(matches!(m.forward(&p, u, &m.initial_carry(2)), Err(ModelError::CarryMismatch(_))));
    }
}
