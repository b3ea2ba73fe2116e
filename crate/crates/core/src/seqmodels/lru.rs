use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_input, Bound, Carry, LayerNorm, Linear, ModelError, Result};
use crate::tensor::{ParamId, ParamStore, Tensor, Var};

/// How the linear recurrence is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScanMode {
    #[default]
    Sequential,
    /// Hillis-Steele prefix combination, `log2 T` levels.
    Scan,
}

fn default_r_min() -> f64 {
    0.5
}

fn default_r_max() -> f64 {
    0.99
}

fn default_theta_max() -> f64 {
    std::f64::consts::PI / 10.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LruConfig {
    /// Model width; the complex state has the same number of units.
    pub hidden: usize,
    pub layers: usize,
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_theta_max")]
    pub theta_max: f64,
    #[serde(default)]
    pub mode: ScanMode,
}

impl LruConfig {
    pub fn new(hidden: usize, layers: usize) -> Self {
        Self {
            hidden,
            layers,
            r_min: default_r_min(),
            r_max: default_r_max(),
            theta_max: default_theta_max(),
            mode: ScanMode::Sequential,
        }
    }
}

/// Initial diagonal: `λ = exp(-exp(ν) + iθ)` and `γ = sqrt(1 - |λ|²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaInit {
    pub nu: Vec<f64>,
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl LambdaInit {
    pub fn modulus(&self) -> Vec<f64> {
        self.nu.iter().map(|&nu| (-nu.exp()).exp()).collect()
    }
}

/// Samples `units` eigenvalues uniformly by area on the ring
/// `r_min <= |λ| <= r_max` with phase in `[0, theta_max]`.
pub fn lru_init<R: Rng + ?Sized>(rng: &mut R, units: usize, r_min: f64, r_max: f64, theta_max: f64) -> Result<LambdaInit> {
    if !(0.0 <= r_min && r_min < r_max && r_max < 1.0) || !(theta_max >= 0.0) {
        return Err(ModelError::InvalidConfig(format!(
            "need 0 <= r_min < r_max < 1 and theta_max >= 0, got ({}, {}, {})",
            r_min, r_max, theta_max
        )));
    }
    let mut init = LambdaInit {
        nu: Vec::with_capacity(units),
        theta: Vec::with_capacity(units),
        gamma: Vec::with_capacity(units),
    };
    for _ in 0..units {
        let u: f64 = rng.gen();
        let r = (u * (r_max * r_max - r_min * r_min) + r_min * r_min).sqrt().max(f64::MIN_POSITIVE);
        init.nu.push((-r.ln()).ln());
        init.theta.push(rng.gen::<f64>() * theta_max);
        init.gamma.push((1.0 - r * r).sqrt());
    }
    Ok(init)
}

/// Interleaves `[n]` real and imaginary parts into `[2n]` pairs.
fn interleave<'t>(re: Var<'t>, im: Var<'t>) -> Result<Var<'t>> {
    let n = re.shape()[0];
    Ok(Var::concat(&[re.reshape(&[n, 1])?, im.reshape(&[n, 1])?], 1)?.reshape(&[2 * n])?)
}

/// Runs `x_t = λ ⊙ x_{t-1} + b_t` over complex pairs.
///
/// `lambda` is `[2N]`, `inputs` is batch-major `[B, T, 2N]`, `x0` is
/// `[B, 2N]`. Returns every state, `[B, T, 2N]`.
pub fn lru_recurrence<'t>(lambda: Var<'t>, inputs: Var<'t>, x0: Var<'t>, mode: ScanMode) -> Result<Var<'t>> {
    let s = inputs.shape();
    if s.len() != 3 || lambda.shape() != [s[2]] || x0.shape() != [s[0], s[2]] {
        return Err(ModelError::InvalidConfig(format!(
            "recurrence shapes: lambda {:?}, inputs {:?}, x0 {:?}",
            lambda.shape(),
            s,
            x0.shape()
        )));
    }
    let (batch, steps, width) = (s[0], s[1], s[2]);
    if steps == 0 {
        return Ok(inputs);
    }
    let tape = inputs.tape();
    match mode {
        ScanMode::Sequential => {
            let mut x = x0;
            let mut outs = Vec::with_capacity(steps);
            for t in 0..steps {
                let b = inputs.slice(1, t, t + 1)?.reshape(&[batch, width])?;
                x = x.complex_pair_mul(lambda)?.add(b)?;
                outs.push(x);
            }
            Ok(Var::concat(&outs, 0)?.reshape(&[steps, batch, width])?.permute(&[1, 0, 2])?)
        }
        ScanMode::Scan => {
            let first = inputs
                .slice(1, 0, 1)?
                .add(x0.complex_pair_mul(lambda)?.reshape(&[batch, 1, width])?)?;
            let mut b = if steps > 1 {
                Var::concat(&[first, inputs.slice(1, 1, steps)?], 1)?
            } else {
                first
            };
            let ones = tape.constant(Tensor::full(&[steps, 1], 1.0));
            let mut a = ones.matmul(lambda.reshape(&[1, width])?)?;
            let mut offset = 1;
            while offset < steps {
                let keep = b.slice(1, 0, offset)?;
                let earlier = b.slice(1, 0, steps - offset)?;
                let later_a = a.slice(0, offset, steps)?;
                let combined = earlier.complex_pair_mul(later_a)?.add(b.slice(1, offset, steps)?)?;
                b = Var::concat(&[keep, combined], 1)?;
                if offset * 2 < steps {
                    let prod = later_a.complex_pair_mul(a.slice(0, 0, steps - offset)?)?;
                    a = Var::concat(&[a.slice(0, 0, offset)?, prod], 0)?;
                }
                offset *= 2;
            }
            Ok(b)
        }
    }
}

#[derive(Clone, Debug)]
struct LruLayer {
    norm: LayerNorm,
    nu: ParamId,
    theta: ParamId,
    /// `log γ`, trained freely from its initial value.
    gamma_log: ParamId,
    /// `[H, 2N]`, columns interleave real and imaginary parts.
    b: Linear,
    /// `[2N, H]`, realizes `Re(C x)` on interleaved pairs.
    c: Linear,
    d: ParamId,
    glu_value: Linear,
    glu_gate: Linear,
}

impl LruLayer {
    fn lambda<'t>(&self, p: &Bound<'t>) -> Result<Var<'t>> {
        let modulus = p.get(self.nu).exp().neg().exp();
        let theta = p.get(self.theta);
        interleave(modulus.mul(theta.cos())?, modulus.mul(theta.sin())?)
    }

    fn gamma<'t>(&self, p: &Bound<'t>) -> Result<Var<'t>> {
        let g = p.get(self.gamma_log).exp();
        interleave(g, g)
    }
}

/// Stacked linear recurrent units with pre-norm, a gated pointwise MLP and
/// a skip connection around each layer.
#[derive(Clone, Debug)]
pub struct Lru {
    pub config: LruConfig,
    pub input_dim: usize,
    input: Linear,
    layers: Vec<LruLayer>,
    ln_final: LayerNorm,
}

impl Lru {
    pub fn new<R: Rng + ?Sized>(config: &LruConfig, input_dim: usize, store: &mut ParamStore, name: &str, rng: &mut R) -> Result<Self> {
        let h = config.hidden;
        if h == 0 || config.layers == 0 {
            return Err(ModelError::InvalidConfig("lru needs hidden > 0 and layers > 0".into()));
        }
        let input = Linear::new(store, &format!("{}.input", name), input_dim, h, true, rng);
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let n = format!("{}.layer{}", name, l);
            let init = lru_init(rng, h, config.r_min, config.r_max, config.theta_max)?;
            let b_std = 1.0 / (2.0 * h as f64).sqrt();
            let c_std = 1.0 / (h as f64).sqrt();
            layers.push(LruLayer {
                norm: LayerNorm::new(store, &format!("{}.norm", n), h),
                nu: store.add(format!("{}.nu", n), Tensor::from_vec(init.nu)),
                theta: store.add(format!("{}.theta", n), Tensor::from_vec(init.theta)),
                gamma_log: store.add(format!("{}.gamma_log", n), Tensor::from_vec(init.gamma.iter().map(|g| g.ln()).collect())),
                b: Linear::with_weight(store, &format!("{}.b", n), Tensor::randn(&[h, 2 * h], b_std, rng), false),
                c: Linear::with_weight(store, &format!("{}.c", n), Tensor::randn(&[2 * h, h], c_std, rng), false),
                d: store.add(format!("{}.d", n), Tensor::randn(&[h], 1.0, rng)),
                glu_value: Linear::new(store, &format!("{}.glu_value", n), h, h, true, rng),
                glu_gate: Linear::new(store, &format!("{}.glu_gate", n), h, h, true, rng),
            });
        }
        let ln_final = LayerNorm::new(store, &format!("{}.ln_final", name), h);
        Ok(Self {
            config: *config,
            input_dim,
            input,
            layers,
            ln_final,
        })
    }

    pub fn initial_carry(&self, batch: usize) -> Carry {
        Carry::Lru(vec![Tensor::zeros(&[batch, 2 * self.config.hidden]); self.layers.len()])
    }

    /// Largest `|λ_i|` across layers; stays below 1 by construction.
    pub fn max_lambda_modulus(&self, store: &ParamStore) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| store.get(l.nu).data().iter().map(|&nu| (-nu.exp()).exp()))
            .fold(0.0, f64::max)
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, inputs: Var<'t>, carry: &Carry) -> Result<(Var<'t>, Carry)> {
        self.forward_with_mode(p, inputs, carry, self.config.mode)
    }

    pub fn forward_with_mode<'t>(&self, p: &Bound<'t>, inputs: Var<'t>, carry: &Carry, mode: ScanMode) -> Result<(Var<'t>, Carry)> {
        let (steps, batch) = check_input(inputs, self.input_dim)?;
        let h = self.config.hidden;
        let states = match carry {
            Carry::Lru(s) if s.len() == self.layers.len() && s.iter().all(|x| x.shape() == [batch, 2 * h]) => s,
            _ => return Err(ModelError::CarryMismatch(format!("expected {} LRU states of [{}, {}]", self.layers.len(), batch, 2 * h))),
        };
        let tape = inputs.tape();
        if steps == 0 {
            return Ok((tape.constant(Tensor::zeros(&[0, batch, h])), carry.clone()));
        }
        let mut x = self.input.forward(p, inputs.permute(&[1, 0, 2])?)?;
        let mut next = Vec::with_capacity(self.layers.len());
        for (layer, x0) in self.layers.iter().zip(states) {
            let u = layer.norm.forward(p, x)?;
            let bu = layer.b.forward(p, u)?.mul(layer.gamma(p)?)?;
            let hs = lru_recurrence(layer.lambda(p)?, bu, tape.constant(x0.clone()), mode)?;
            next.push(hs.slice(1, steps - 1, steps)?.reshape(&[batch, 2 * h])?.to_tensor());
            let y = layer.c.forward(p, hs)?.add(u.mul(p.get(layer.d))?)?;
            let glu = layer.glu_value.forward(p, y)?.mul(layer.glu_gate.forward(p, y)?.sigmoid())?;
            x = x.add(glu)?;
        }
        let y = self.ln_final.forward(p, x)?.permute(&[1, 0, 2])?;
        Ok((y, Carry::Lru(next)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::tensor::Tape;

    fn run(lambda: Vec<f64>, inputs: &Tensor, mode: ScanMode) -> Tensor {
        let tape = Tape::new();
        let batch = inputs.shape()[0];
        let width = inputs.shape()[2];
        let out = lru_recurrence(
            tape.constant(Tensor::from_vec(lambda)),
            tape.constant(inputs.clone()),
            tape.constant(Tensor::zeros(&[batch, width])),
            mode,
        )
        .unwrap();
        out.to_tensor()
    }

    #[test]
    fn zero_lambda_is_memoryless() {
        let u = Tensor::randn(&[2, 7, 4], 1.0, &mut seeded(0));
        for mode in [ScanMode::Sequential, ScanMode::Scan] {
            assert!(run(vec![0.0; 4], &u, mode).max_abs_diff(&u) < 1e-15);
        }
    }

    #[test]
    fn unit_lambda_gives_prefix_sums() {
        let u = Tensor::randn(&[1, 9, 2], 1.0, &mut seeded(1));
        let mut expected = u.clone();
        for t in 1..9 {
            for j in 0..2 {
                expected.data_mut()[t * 2 + j] += expected.data()[(t - 1) * 2 + j];
            }
        }
        for mode in [ScanMode::Sequential, ScanMode::Scan] {
            assert!(run(vec![1.0, 0.0], &u, mode).max_abs_diff(&expected) < 1e-12);
        }
    }

    #[test]
    fn init_stays_inside_the_ring() {
        let init = lru_init(&mut seeded(3), 1000, 0.5, 0.99, 0.3).unwrap();
        for (r, g) in init.modulus().iter().zip(&init.gamma) {
            assert!((0.5 - 1e-12..=0.99 + 1e-12).contains(r));
            assert!((g * g + r * r - 1.0).abs() < 1e-12);
        }
        assert!(init.theta.iter().all(|t| (0.0..=0.3).contains(t)));
    }

    #[test]
    fn degenerate_ring_pins_the_radius() {
        let init = lru_init(&mut seeded(4), 100, 0.9 - 1e-9, 0.9, 0.1).unwrap();
        assert!(init.modulus().iter().all(|r| (r - 0.9).abs() < 1e-8));
    }

    #[test]
    fn invalid_bounds_rejected() {
        assert!(lru_init(&mut seeded(0), 4, 0.9, 0.5, 0.1).is_err());
        assert!(lru_init(&mut seeded(0), 4, 0.5, 1.0, 0.1).is_err());
        assert!(lru_init(&mut seeded(0), 4, -0.1, 0.5, 0.1).is_err());
    }

    #[test]
    fn fresh_model_lambda_below_one() {
        let mut store = ParamStore::new();
        let m = Lru::new(&LruConfig::new(8, 2), 3, &mut store, "lru", &mut seeded(5)).unwrap();
        let r = m.max_lambda_modulus(&store);
        assert!(r < 1.0 && r > 0.4);
    }
}
