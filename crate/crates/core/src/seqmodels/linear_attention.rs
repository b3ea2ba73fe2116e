//! Causal linear attention with the positive kernel `φ(x) = elu(x) + 1`,
//! computed as a masked `T x T` kernel product and as the running
//! `(s_i, z_i)` recurrence.

use rand::Rng;

use crate::tensor::Tensor;

fn phi(x: f64) -> f64 {
    if x > 0.0 {
        x + 1.0
    } else {
        x.exp()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out_i = Σ_{j<=i} (φ(q_i)·φ(k_j)) v_j / Σ_{j<=i} φ(q_i)·φ(k_j)`; all
/// inputs are `[T, h]`.
pub fn linear_attention_parallel(q: &Tensor, k: &Tensor, v: &Tensor) -> Tensor {
    let (steps, h) = (q.shape()[0], q.shape()[1]);
    let fq = q.map(phi);
    let fk = k.map(phi);
    let mut out = Tensor::zeros(&[steps, h]);
    for i in 0..steps {
        let weights: Vec<f64> = (0..=i).map(|j| dot(fq.row(i), fk.row(j))).collect();
        let norm: f64 = weights.iter().sum();
        let row = &mut out.data_mut()[i * h..(i + 1) * h];
        for (j, w) in weights.iter().enumerate() {
            for (o, x) in row.iter_mut().zip(v.row(j)) {
                *o += w * x;
            }
        }
        row.iter_mut().for_each(|o| *o /= norm);
    }
    out
}

/// `s_i = s_{i-1} + φ(k_i) v_i^T`, `z_i = z_{i-1} + φ(k_i)`,
/// `out_i = φ(q_i)^T s_i / φ(q_i)·z_i`.
pub fn linear_attention_recurrent(q: &Tensor, k: &Tensor, v: &Tensor) -> Tensor {
    let (steps, h) = (q.shape()[0], q.shape()[1]);
    let mut s = vec![0.0; h * h];
    let mut z = vec![0.0; h];
    let mut out = Tensor::zeros(&[steps, h]);
    for i in 0..steps {
        let fk: Vec<f64> = k.row(i).iter().map(|&x| phi(x)).collect();
        let fq: Vec<f64> = q.row(i).iter().map(|&x| phi(x)).collect();
        for a in 0..h {
            z[a] += fk[a];
            for (b, vb) in v.row(i).iter().enumerate() {
                s[a * h + b] += fk[a] * vb;
            }
        }
        let norm = dot(&fq, &z);
        let row = &mut out.data_mut()[i * h..(i + 1) * h];
        for (b, o) in row.iter_mut().enumerate() {
            *o = (0..h).map(|a| fq[a] * s[a * h + b]).sum::<f64>() / norm;
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct DualCheck {
    pub parallel: Tensor,
    pub recurrent: Tensor,
    pub max_diff: f64,
}

/// Random inputs `[T, h]` and projections, both evaluation orders.
pub fn linear_attention_dual_check<R: Rng + ?Sized>(rng: &mut R, steps: usize, h: usize) -> DualCheck {
    let u = Tensor::randn(&[steps, h], 1.0, rng);
    let std = 1.0 / (h.max(1) as f64).sqrt();
    let project = |w: &Tensor| {
        let mut out = Tensor::zeros(&[steps, h]);
        for t in 0..steps {
            for j in 0..h {
                out.data_mut()[t * h + j] = (0..h).map(|i| u.row(t)[i] * w.data()[i * h + j]).sum();
            }
        }
        out
    };
    let (wq, wk, wv) = (
        Tensor::randn(&[h, h], std, rng),
        Tensor::randn(&[h, h], std, rng),
        Tensor::randn(&[h, h], std, rng),
    );
    let (q, k, v) = (project(&wq), project(&wk), project(&wv));
    let parallel = linear_attention_parallel(&q, &k, &v);
    let recurrent = linear_attention_recurrent(&q, &k, &v);
    let max_diff = parallel.max_abs_diff(&recurrent);
    DualCheck {
        parallel,
        recurrent,
        max_diff,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn single_step_forms_agree() {
        assert!(linear_attention_dual_check(&mut seeded(0), 1, 4).max_diff < 1e-14);
    }

    #[test]
    fn constant_kernel_averages_values() {
        let zeros = Tensor::zeros(&[5, 3]);
        let v = Tensor::randn(&[5, 3], 1.0, &mut seeded(1));
        let out = linear_attention_recurrent(&zeros, &zeros, &v);
        for i in 0..5 {
            for j in 0..3 {
                let mean = (0..=i).map(|t| v.row(t)[j]).sum::<f64>() / (i + 1) as f64;
                assert!((out.row(i)[j] - mean).abs() < 1e-12);
            }
        }
        assert!(linear_attention_parallel(&zeros, &zeros, &v).max_abs_diff(&out) < 1e-12);
    }
}
