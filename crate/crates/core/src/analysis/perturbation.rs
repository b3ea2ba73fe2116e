use rand::Rng;
use serde::Serialize;

use super::{AnalysisError, Result};
use crate::rng::stream;
use crate::seqmodels::{Backbone, BackboneConfig, Bound, GptConfig};
use crate::tensor::{ParamStore, Tape, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationRow {
    pub n: usize,
    pub max_delta: f64,
    pub mean_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub config: GptConfig,
    pub seed: u64,
    pub trials: usize,
    /// `‖u(a) - u(b)‖` between the two token embeddings.
    pub embedding_distance: f64,
    pub rows: Vec<PerturbationRow>,
    /// Least-squares slope of `ln max_delta` against `ln n`.
    pub slope: f64,
}

impl PerturbationReport {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,max_delta,mean_delta")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.n, r.max_delta, r.mean_delta)?;
        }
        Ok(())
    }
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// A randomly initialized GPT over a two-token vocabulary.
pub struct TokenGpt {
    pub model: Backbone,
    pub store: ParamStore,
    /// Rows are the token embeddings, `[2, dim]`.
    pub embeddings: Tensor,
}

impl TokenGpt {
    pub fn new(cfg: &GptConfig, dim: usize, seed: u64) -> Result<Self> {
        let mut rng = stream(seed, 0);
        let mut store = ParamStore::new();
        let model = Backbone::new(&BackboneConfig::Gpt(*cfg), dim, &mut store, "gpt", &mut rng)?;
        let embeddings = Tensor::randn(&[2, dim], 1.0, &mut rng);
        Ok(Self { model, store, embeddings })
    }

    pub fn embedding_distance(&self) -> f64 {
        self.embeddings
            .row(0)
            .iter()
            .zip(self.embeddings.row(1))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Final-position outputs for each token sequence (all the same length).
    pub fn last_hiddens(&self, sequences: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
        let batch = sequences.len();
        let n = sequences[0].len();
        let dim = self.embeddings.shape()[1];
        let mut data = vec![0.0; n * batch * dim];
        for (b, seq) in sequences.iter().enumerate() {
            for (t, &tok) in seq.iter().enumerate() {
                let at = (t * batch + b) * dim;
                data[at..at + dim].copy_from_slice(self.embeddings.row(tok));
            }
        }
        let tape = Tape::new();
        let p = Bound::frozen(&tape, &self.store);
        let (y, _) = self.model.forward(&p, tape.constant(Tensor::new(&[n, batch, dim], data)?), &self.model.initial_carry(batch))?;
        let y = y.value();
        let h = y.shape()[2];
        Ok((0..batch)
            .map(|b| y.data()[((n - 1) * batch + b) * h..((n - 1) * batch + b + 1) * h].to_vec())
            .collect())
    }
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// For each `n`, flips one token at a uniformly drawn position `i < n` of a
/// random sequence and records `‖x_n - x_n'‖`.
pub fn perturbation_probe(cfg: &GptConfig, dim: usize, n_grid: &[usize], trials: usize, seed: u64) -> Result<PerturbationReport> {
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] < 2 {
        return Err(AnalysisError::Invalid("n grid must be strictly increasing, at least two values, each >= 2".into()));
    }
    if *n_grid.last().unwrap() > cfg.max_positions {
        return Err(AnalysisError::Invalid(format!(
            "n = {} exceeds the position table ({})",
            n_grid.last().unwrap(),
            cfg.max_positions
        )));
    }
    if trials == 0 {
        return Err(AnalysisError::Invalid("trials must be positive".into()));
    }
    let model = TokenGpt::new(cfg, dim, seed)?;
    let mut rows = vec![];
    for (k, &n) in n_grid.iter().enumerate() {
        let mut rng = stream(seed, 1 + k as u64);
        let chunk = (2048 / n).clamp(1, trials);
        let mut deltas = Vec::with_capacity(trials);
        let mut done = 0;
        while done < trials {
            let m = chunk.min(trials - done);
            let mut seqs = Vec::with_capacity(2 * m);
            for _ in 0..m {
                let seq: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
                let mut flipped = seq.clone();
                let i = rng.gen_range(0..n - 1);
                flipped[i] = 1 - flipped[i];
                seqs.push(seq);
                seqs.push(flipped);
            }
            let outs = model.last_hiddens(&seqs)?;
            deltas.extend(outs.chunks(2).map(|p| l2(&p[0], &p[1])));
            done += m;
        }
        rows.push(PerturbationRow {
            n,
            max_delta: deltas.iter().cloned().fold(0.0, f64::max),
            mean_delta: deltas.iter().sum::<f64>() / deltas.len() as f64,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.max_delta.ln()).collect();
    Ok(PerturbationReport {
        config: *cfg,
        seed,
        trials,
        embedding_distance: model.embedding_distance(),
        rows,
        slope: fit_slope(&xs, &ys),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> GptConfig {
        GptConfig {
            hidden: 16,
            heads: 2,
            layers: 1,
            max_positions: 64,
        }
    }

    #[test]
    fn identical_sequences_have_zero_delta() {
        let m = TokenGpt::new(&cfg(), 8, 0).unwrap();
        let s = vec![0, 1, 1, 0, 1];
        let out = m.last_hiddens(&[s.clone(), s]).unwrap();
        assert_eq!(l2(&out[0], &out[1]), 0.0);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let x: Vec<f64> = [16.0f64, 32.0, 64.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [16.0f64, 32.0, 64.0].iter().map(|v| (3.0 / v).ln()).collect();
        assert!((fit_slope(&x, &y) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_must_fit_the_position_table() {
        assert!(perturbation_probe(&cfg(), 8, &[16, 128], 2, 0).is_err());
        assert!(perturbation_probe(&cfg(), 8, &[32, 16], 2, 0).is_err());
    }

    #[test]
    fn report_is_reproducible() {
        let a = perturbation_probe(&cfg(), 8, &[4, 8, 16], 4, 3).unwrap();
        let b = perturbation_probe(&cfg(), 8, &[4, 8, 16], 4, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.rows.iter().all(|r| r.max_delta > 0.0 && r.mean_delta <= r.max_delta));
    }
}
