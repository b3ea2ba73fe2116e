//! Config-driven entry point: inspect languages, train seeds into run
//! directories, and run the diagnostics against saved checkpoints.

mod config;
mod run;

pub use config::{ExperimentConfig, TaskConfig, FULL_BUDGET_FACTOR, SCHEMA_VERSION};
pub use run::{
    code_version, load_agent, run_experiment, run_seed, seed_dir, thread_cap, write_atomic, AgentMetadata, LoadedAgent, RunManifest, SeedRun,
    SeedStatus, CHECKPOINT_DIR, CONFIG_FILE, METRICS_FILE, RUN_MANIFEST,
};

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use crate::analysis::{
    extrapolation_eval, perturbation_probe, probe_hidden, scale_study, write_scale_csv, AnalysisError, Decider, GptSize,
};
use crate::automata::{build_language, transition_monoid, AutomataError, Language};
use crate::envs::EnvError;
use crate::rl::{evaluate, RlError};
use crate::rng::stream;
use crate::seqmodels::{BackboneConfig, GptConfig, ModelError};
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Schema(String),
    #[error("{0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Automata(#[from] AutomataError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Schema(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "regpomdp", version, about = "Regular-language POMDPs and recurrent DQN agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a built-in language's DFA, monoid order and hardness class.
    Lang { name: String },
    /// Train every seed of an experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Train only this seed instead of the config's list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip seeds whose run directory already has a manifest.
        #[arg(long)]
        resume: bool,
        /// Multiply env-step budgets back to the published scale.
        #[arg(long)]
        full_budgets: bool,
    },
    /// Greedy evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label hidden states by DFA state and score their clustering.
    Probe {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Greedy accuracy at lengths beyond the training bound.
    Extrapolate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,8,16,32")]
        offsets: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-token perturbation effect of a random GPT against length.
    Perturb {
        #[arg(long = "n", value_delimiter = ',', default_value = "16,32,64,128,256,512")]
        lengths: Vec<usize>,
        #[arg(long, default_value_t = 64)]
        trials: usize,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long, default_value_t = 2)]
        heads: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train GPT agents of several sizes on the config's task.
    Scale {
        #[arg(long)]
        config: PathBuf,
        /// `hidden x layers x heads` triples.
        #[arg(long, value_delimiter = ',', default_value = "32x1x1,64x2x2,128x4x4")]
        sizes: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        full_budgets: bool,
    },
}

fn parse_size(s: &str) -> Result<GptSize> {
    let parts: Vec<&str> = s.split('x').collect();
    let nums: std::result::Result<Vec<usize>, _> = parts.iter().map(|p| p.trim().parse::<usize>()).collect();
    match nums.as_deref() {
        Ok([hidden, layers, heads]) => Ok(GptSize {
            hidden: *hidden,
            layers: *layers,
            heads: *heads,
        }),
        _ => Err(CliError::Invalid(format!("size {:?} is not HIDDENxLAYERSxHEADS", s))),
    }
}

fn write_sidecar(out: &Option<PathBuf>, name: &str, value: &serde_json::Value) -> Result<()> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_atomic(&dir.join(name), serde_json::to_string_pretty(value)?.as_bytes())?;
    }
    Ok(())
}

fn write_csv_file(out: &Option<PathBuf>, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut buf = Vec::new();
        f(&mut buf)?;
        write_atomic(&dir.join(name), &buf)?;
    }
    Ok(())
}

pub fn lang_report(name: &str) -> Result<serde_json::Value> {
    let lang: Language = name.parse()?;
    let spec = build_language(lang);
    let monoid = transition_monoid(&spec.dfa, 1 << 16)?;
    Ok(json!({
        "name": lang.name(),
        "dfa": serde_json::from_str::<serde_json::Value>(&spec.dfa.to_json())?,
        "monoid_order": monoid.order(),
        "hardness": monoid.hardness().to_string(),
    }))
}

fn train_command(config: &Path, seed: Option<u64>, out: Option<PathBuf>, resume: bool, full_budgets: bool) -> Result<bool> {
    let mut cfg = ExperimentConfig::load(config)?;
    if full_budgets {
        cfg = cfg.with_full_budgets();
    }
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    let out = out
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| CliError::Invalid("no output directory: pass --out or set out_dir".into()))?;
    let runs = run_experiment(&cfg, &out, resume, thread_cap());
    let mut all_ok = true;
    for r in &runs {
        match &r.status {
            SeedStatus::Completed(m) => println!("seed {} completed: final success {:.3} ({})", r.seed, m.final_success, r.dir.display()),
            SeedStatus::Skipped(m) => println!("seed {} already complete: final success {:.3}", r.seed, m.final_success),
            SeedStatus::Failed(e) => {
                all_ok = false;
                eprintln!("seed {} failed: {}", r.seed, e);
            }
        }
    }
    Ok(all_ok)
}

/// Executes a parsed command. `Ok(false)` means some seeds failed.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Lang { name } => {
            println!("{}", serde_json::to_string_pretty(&lang_report(&name)?)?);
        }
        Command::Train {
            config,
            seed,
            out,
            resume,
            full_budgets,
        } => return train_command(&config, seed, out, resume, full_budgets),
        Command::Eval { ckpt, episodes, seed, out } => {
            let l = load_agent(&ckpt)?;
            let (mean_return, success) = evaluate(&l.agent, &l.store, &l.task, episodes, &mut stream(seed, 3))?;
            let report = json!({
                "task": l.meta.task, "episodes": episodes, "seed": seed,
                "mean_return": mean_return, "success_rate": success,
                "checkpoint_hash": l.content_hash,
            });
            write_sidecar(&out, "eval.json", &report)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Probe { ckpt, episodes, seed, out } => {
            let l = load_agent(&ckpt)?;
            let env = l
                .task
                .as_lang()
                .ok_or_else(|| CliError::Invalid("probing needs a language task".into()))?;
            let set = probe_hidden(&l.agent, &l.store, env, episodes, &mut stream(seed, 3))?;
            let silhouette = set.silhouette()?;
            write_csv_file(&out, "hiddens.csv", |w| set.write_csv(w))?;
            let report = json!({
                "task": l.meta.task, "model": l.meta.model, "episodes": episodes, "seed": seed,
                "points": set.len(), "silhouette": silhouette, "checkpoint_hash": l.content_hash,
            });
            write_sidecar(&out, "probe.json", &report)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Extrapolate {
            ckpt,
            offsets,
            episodes,
            seed,
            out,
        } => {
            let l = load_agent(&ckpt)?;
            let env = l
                .task
                .as_lang()
                .ok_or_else(|| CliError::Invalid("extrapolation needs a language task".into()))?;
            let TaskConfig::Lang { n, .. } = l.meta.task else { unreachable!() };
            let decider = Decider::Agent {
                agent: &l.agent,
                store: &l.store,
            };
            let report = extrapolation_eval(decider, env, n, &offsets, episodes, &mut stream(seed, 3))?;
            write_csv_file(&out, "extrapolation.csv", |w| report.write_csv(w))?;
            let side = json!({
                "task": l.meta.task, "offsets": offsets, "episodes": episodes, "seed": seed,
                "rows": report.rows, "checkpoint_hash": l.content_hash,
            });
            write_sidecar(&out, "extrapolation.json", &side)?;
            println!("{}", serde_json::to_string_pretty(&side)?);
        }
        Command::Perturb {
            lengths,
            trials,
            hidden,
            heads,
            layers,
            dim,
            seed,
            out,
        } => {
            let cfg = GptConfig {
                hidden,
                heads,
                layers,
                max_positions: lengths.iter().copied().max().unwrap_or(0),
            };
            let report = perturbation_probe(&cfg, dim, &lengths, trials, seed)?;
            write_csv_file(&out, "perturbation.csv", |w| report.write_csv(w))?;
            let side = serde_json::to_value(&report)?;
            write_sidecar(&out, "perturbation.json", &side)?;
            println!("{}", serde_json::to_string_pretty(&side)?);
        }
        Command::Scale {
            config,
            sizes,
            out,
            full_budgets,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if full_budgets {
                cfg = cfg.with_full_budgets();
            }
            let sizes = sizes.iter().map(|s| parse_size(s)).collect::<Result<Vec<_>>>()?;
            let max_positions = match &cfg.model.backbone {
                BackboneConfig::Gpt(g) => g.max_positions,
                _ => return Err(CliError::Invalid("scale needs a config with a gpt backbone".into())),
            };
            let task = cfg.task.build()?;
            let runs = scale_study(&task, &cfg.model, &cfg.rl, &sizes, &cfg.seeds, max_positions)?;
            write_csv_file(&out, "scale.csv", |w| write_scale_csv(w, &runs))?;
            let finals: Vec<_> = runs
                .iter()
                .map(|r| json!({"size": r.size, "seed": r.seed, "final_success": r.final_success()}))
                .collect();
            let side = json!({"config": cfg, "runs": finals});
            write_sidecar(&out, "scale.json", &side)?;
            println!("{}", serde_json::to_string_pretty(&side)?);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_triples_parse() {
        assert_eq!(
            parse_size("64x2x4").unwrap(),
            GptSize {
                hidden: 64,
                layers: 2,
                heads: 4
            }
        );
        assert!(parse_size("64x2").is_err());
    }

    #[test]
    fn lang_reports_order_and_class() {
        let r = lang_report("SYM5").unwrap();
        assert_eq!(r["monoid_order"], 120);
        assert_eq!(r["hardness"], "NC1_COMPLETE");
        let r = lang_report("PARITY").unwrap();
        assert_eq!(r["monoid_order"], 2);
        assert_eq!(r["hardness"], "IN_TC0");
        assert!(lang_report("NOPE").is_err());
    }
}
