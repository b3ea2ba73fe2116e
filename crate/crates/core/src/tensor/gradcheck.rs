//! Central finite-difference checks for tape gradients.

use super::{Result, Tape, Tensor, Var};

/// Outcome of comparing analytic and numeric gradients for each input.
#[derive(Clone, Debug)]
pub struct GradCheck {
    /// Per input: `||analytic - numeric|| / max(||analytic||, ||numeric||, floor)`.
    pub relative_errors: Vec<f64>,
}

impl GradCheck {
    pub fn max_relative_error(&self) -> f64 {
        self.relative_errors.iter().cloned().fold(0.0, f64::max)
    }
}

/// Denominator floor so an identically-zero gradient compares as absolute
/// error instead of dividing rounding noise by rounding noise.
pub const NORM_FLOOR: f64 = 1e-6;

/// Differentiates `f` at `inputs` both by backward pass and by central
/// differences with step `h`. `f` must build a scalar on the given tape.
pub fn check<F>(inputs: &[Tensor], h: f64, f: F) -> Result<GradCheck>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let analytic: Vec<Tensor> = {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.param(t.clone())).collect();
        let loss = f(&tape, &vars)?;
        let grads = tape.backward(loss)?;
        vars.iter().map(|v| grads.get_or_zeros(*v)).collect()
    };
    let eval = |probe: &[Tensor]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = probe.iter().map(|t| tape.constant(t.clone())).collect();
        Ok(f(&tape, &vars)?.item())
    };
    let mut probe: Vec<Tensor> = inputs.to_vec();
    let mut relative_errors = Vec::with_capacity(inputs.len());
    for (which, a) in analytic.iter().enumerate() {
        let mut numeric = vec![0.0; a.len()];
        for (j, slot) in numeric.iter_mut().enumerate() {
            let orig = probe[which].data()[j];
            probe[which].data_mut()[j] = orig + h;
            let up = eval(&probe)?;
            probe[which].data_mut()[j] = orig - h;
            let down = eval(&probe)?;
            probe[which].data_mut()[j] = orig;
            *slot = (up - down) / (2.0 * h);
        }
        let diff: f64 = a
            .data()
            .iter()
            .zip(&numeric)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let na = a.norm();
        let nn = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
        relative_errors.push(diff / na.max(nn).max(NORM_FLOOR));
    }
    Ok(GradCheck { relative_errors })
}
