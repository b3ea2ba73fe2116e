use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{CliError, Result};
use crate::automata::{build_language, Language};
use crate::envs::{Episodic, LangPomdp, TMaze, Task};
use crate::rl::{AgentSpec, DqnConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Budgets in shipped presets are this factor below the published ones.
pub const FULL_BUDGET_FACTOR: u64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Lang { language: Language, n: usize },
    Tmaze { corridor_length: usize },
}

impl TaskConfig {
    pub fn build(&self) -> Result<Task> {
        Ok(match *self {
            TaskConfig::Lang { language, n } => Task::Lang(LangPomdp::bounded(build_language(language).dfa, n)?),
            TaskConfig::Tmaze { corridor_length } => Task::Tmaze(TMaze::new(corridor_length)?),
        })
    }

    pub fn label(&self) -> String {
        match self {
            TaskConfig::Lang { language, n } => format!("{}({})", language, n),
            TaskConfig::Tmaze { corridor_length } => format!("TMAZE({})", corridor_length),
        }
    }
}

/// A training experiment: one task, one agent, one DQN setup, many seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub task: TaskConfig,
    pub model: AgentSpec,
    pub rl: DqnConfig,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses and validates; schema errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {}", path.display(), e)))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "schema_version {} is not supported (expected {})",
                self.schema_version, SCHEMA_VERSION
            )));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Schema("seeds: at least one seed is required".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(CliError::Schema("seeds: duplicates are not allowed".into()));
        }
        self.rl.validate().map_err(|e| CliError::Schema(format!("rl: {}", e)))?;
        let task = self.task.build()?;
        let mut rng = crate::rng::seeded(0);
        crate::rl::Agent::new(&self.model, task.obs_dim(), task.num_actions(), &mut rng)
            .map_err(|e| CliError::Schema(format!("model: {}", e)))?;
        Ok(())
    }

    /// Restores the published env-step budget.
    pub fn with_full_budgets(mut self) -> Self {
        self.rl.env_steps *= FULL_BUDGET_FACTOR;
        self
    }
}
