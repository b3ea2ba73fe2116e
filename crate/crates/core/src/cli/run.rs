use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{CliError, ExperimentConfig, Result, TaskConfig};
use crate::envs::{Episodic, Task};
use crate::rl::{train, Agent, AgentSpec, MetricRow};
use crate::tensor::{load_checkpoint, save_checkpoint, ParamStore};

pub const RUN_MANIFEST: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_DIR: &str = "checkpoint";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub code_version: String,
    pub artifacts: Vec<String>,
    pub final_success: f64,
    pub stopped_early: bool,
    pub checkpoint_hash: String,
}

/// What the checkpoint metadata records so an agent can be rebuilt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentMetadata {
    pub task: TaskConfig,
    pub model: AgentSpec,
    pub seed: u64,
}

pub fn code_version() -> String {
    format!("regpomdp {}", env!("CARGO_PKG_VERSION"))
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{}", seed))
}

#[derive(Clone, Debug, PartialEq)]
pub enum SeedStatus {
    Completed(RunManifest),
    /// A completed manifest was already present and `--resume` was given.
    Skipped(RunManifest),
    Failed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub dir: PathBuf,
    pub status: SeedStatus,
}

impl SeedRun {
    pub fn ok(&self) -> bool {
        !matches!(self.status, SeedStatus::Failed(_))
    }
}

/// Trains one seed into `dir`: config copy, metrics, checkpoint, then the
/// manifest last so its presence marks completion.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<RunManifest> {
    let started = now();
    fs::create_dir_all(dir)?;
    let mut resolved = cfg.clone();
    resolved.seeds = vec![seed];
    write_atomic(&dir.join(CONFIG_FILE), resolved.to_json().as_bytes())?;

    let task = cfg.task.build()?;
    let out = train(&task, &cfg.model, &cfg.rl, seed, |_, _| {})?;
    let mut csv = Vec::new();
    MetricRow::write_csv(&mut csv, &out.rows)?;
    write_atomic(&dir.join(METRICS_FILE), &csv)?;
    let meta = AgentMetadata {
        task: cfg.task,
        model: cfg.model.clone(),
        seed,
    };
    let ckpt = save_checkpoint(&dir.join(CHECKPOINT_DIR), &out.pair.online, serde_json::to_value(&meta)?)?;

    let manifest = RunManifest {
        config: resolved,
        seed,
        started_unix: started,
        finished_unix: now(),
        code_version: code_version(),
        artifacts: vec![CONFIG_FILE.into(), METRICS_FILE.into(), CHECKPOINT_DIR.into()],
        final_success: out.final_success(),
        stopped_early: out.stopped_early,
        checkpoint_hash: ckpt.content_hash,
    };
    write_atomic(&dir.join(RUN_MANIFEST), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(manifest)
}

fn read_manifest(path: &Path) -> Result<RunManifest> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Number of seeds trained concurrently, from `REGPOMDP_THREADS`.
pub fn thread_cap() -> usize {
    std::env::var("REGPOMDP_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// Trains every seed of `cfg` under `out`. A seed whose manifest already
/// exists is skipped with `resume` and refused without it.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, resume: bool, threads: usize) -> Vec<SeedRun> {
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, cfg.seeds.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&seed) = cfg.seeds.get(i) else { break };
                let dir = seed_dir(out, seed);
                let manifest = dir.join(RUN_MANIFEST);
                let status = if manifest.exists() {
                    match (resume, read_manifest(&manifest)) {
                        (true, Ok(m)) => SeedStatus::Skipped(m),
                        (true, Err(e)) => SeedStatus::Failed(format!("unreadable manifest: {}", e)),
                        (false, _) => SeedStatus::Failed(format!(
                            "{} already holds a completed run; pass --resume or choose another --out",
                            dir.display()
                        )),
                    }
                } else {
                    match run_seed(cfg, seed, &dir) {
                        Ok(m) => SeedStatus::Completed(m),
                        Err(e) => SeedStatus::Failed(e.to_string()),
                    }
                };
                results.lock().unwrap().push((i, SeedRun { seed, dir, status }));
            });
        }
    });
    let mut runs = results.into_inner().unwrap();
    runs.sort_by_key(|(i, _)| *i);
    runs.into_iter().map(|(_, r)| r).collect()
}

/// An agent rebuilt from a training checkpoint.
pub struct LoadedAgent {
    pub agent: Agent,
    pub store: ParamStore,
    pub meta: AgentMetadata,
    pub task: Task,
    pub content_hash: String,
}

/// Accepts either a checkpoint directory or a seed run directory.
pub fn load_agent(path: &Path) -> Result<LoadedAgent> {
    let dir = if path.join(CHECKPOINT_DIR).is_dir() {
        path.join(CHECKPOINT_DIR)
    } else {
        path.to_path_buf()
    };
    let (store, manifest) = load_checkpoint(&dir)?;
    let meta: AgentMetadata = serde_json::from_value(manifest.metadata.clone())
        .map_err(|e| CliError::Schema(format!("checkpoint metadata: {}", e)))?;
    let task = meta.task.build()?;
    let (agent, fresh) = Agent::new(&meta.model, task.obs_dim(), task.num_actions(), &mut crate::rng::seeded(meta.seed))?;
    if !fresh.same_layout(&store) || fresh.names() != store.names() {
        return Err(CliError::Invalid(format!(
            "checkpoint at {} does not match its recorded model",
            dir.display()
        )));
    }
    Ok(LoadedAgent {
        agent,
        store,
        meta,
        task,
        content_hash: manifest.content_hash,
    })
}
