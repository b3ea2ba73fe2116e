//! Diagnostics on trained and random models: hidden-state probing,
//! silhouette scores, length extrapolation, the single-token perturbation
//! probe, and the GPT size sweep.

mod extrapolation;
mod perturbation;
mod probe;
mod scale;
mod silhouette;

pub use extrapolation::{extrapolation_eval, extrapolation_lengths, Decider, ExtrapolationReport, ExtrapolationRow};
pub use perturbation::{fit_slope, perturbation_probe, PerturbationReport, PerturbationRow, TokenGpt};
pub use probe::{probe_hidden, LabeledHiddenSet, ProbeLabel};
pub use scale::{scale_study, write_scale_csv, GptSize, ScaleRun};
pub use silhouette::silhouette_score;

use thiserror::Error;

use crate::envs::EnvError;
use crate::rl::RlError;
use crate::seqmodels::ModelError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;
