use crate::Failure;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use transloop::checkers::{FuzzConfig, ToolchainConfig};
use transloop::llm::BackendConfig;
use transloop::pipeline::{DEFAULT_MAX_ITERATIONS, DEFAULT_RUNS_PER_CELL, DEFAULT_RUN_WALL_CAP_SECS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckerKind {
    Toolchain,
    Simulated,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckerSection {
    pub kind: CheckerKind,
    /// Rule file for the simulated checker.
    #[serde(default)]
    pub rules: Option<PathBuf>,
    #[serde(default)]
    pub toolchain: ToolchainConfig,
    #[serde(default)]
    pub fuzz: FuzzConfig,
}

impl Default for CheckerSection {
    fn default() -> Self {
        CheckerSection { kind: CheckerKind::Toolchain, rules: None, toolchain: ToolchainConfig::default(), fuzz: FuzzConfig::default() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbSection {
    /// Model used by model-assisted perturbations; the first model when unset.
    pub model: Option<String>,
    /// Fuzzing budget per function for self-checks.
    pub self_check_secs: u64,
    /// Self-check model-assisted perturbations during `translate`.
    pub self_check_in_translate: bool,
}

impl Default for PerturbSection {
    fn default() -> Self {
        PerturbSection { model: None, self_check_secs: 30, self_check_in_translate: true }
    }
}

/// The experiment configuration file. Relative paths are resolved against
/// `workspace_root`, which is itself relative to the file's directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default)]
    pub workspace_root: Option<PathBuf>,
    pub corpus: PathBuf,
    #[serde(default)]
    pub groups: Option<PathBuf>,
    #[serde(default = "default_ledger")]
    pub ledger: PathBuf,
    #[serde(default = "default_report_dir")]
    pub report_dir: PathBuf,
    /// Perturbation ids, or `["all"]`.
    #[serde(default = "default_perturbations")]
    pub perturbations: Vec<String>,
    #[serde(default = "default_runs")]
    pub runs_per_cell: u32,
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(default = "default_iterations")]
    pub max_iterations: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_wall_cap")]
    pub run_wall_cap_secs: u64,
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
    #[serde(default)]
    pub work_dir: Option<PathBuf>,
    /// External tokenizer command (reads source on stdin, prints a count).
    #[serde(default)]
    pub tokenizer: Option<Vec<String>>,
    #[serde(default)]
    pub models: Vec<BackendConfig>,
    #[serde(default)]
    pub checker: CheckerSection,
    #[serde(default)]
    pub perturb: PerturbSection,
    /// Sampled perturbation sets for the robust/augmented distribution.
    #[serde(default)]
    pub sampling: Option<Sampling>,
    #[serde(skip)]
    root: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub set_size: usize,
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_ledger() -> PathBuf {
    "out/ledger.jsonl".into()
}
fn default_report_dir() -> PathBuf {
    "out/report".into()
}
fn default_perturbations() -> Vec<String> {
    vec![transloop::perturb::IDENTITY.to_string()]
}
fn default_runs() -> u32 {
    DEFAULT_RUNS_PER_CELL
}
fn default_k() -> u32 {
    5
}
fn default_iterations() -> u32 {
    DEFAULT_MAX_ITERATIONS
}
fn default_parallelism() -> usize {
    1
}
fn default_wall_cap() -> u64 {
    DEFAULT_RUN_WALL_CAP_SECS
}
fn default_true() -> bool {
    true
}

/// Flags that override config fields.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Corpus directory.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Ledger file.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    /// Report output directory.
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
    /// Comma-separated perturbation ids, or `all`.
    #[arg(long, value_delimiter = ',')]
    pub perturbations: Option<Vec<String>>,
    /// Runs per (file, perturbation, model) cell.
    #[arg(long)]
    pub runs: Option<u32>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub max_iterations: Option<u32>,
    /// Fuzzing budget per function, in seconds.
    #[arg(long)]
    pub fuzz_timeout: Option<u64>,
    #[arg(long)]
    pub parallelism: Option<usize>,
}

impl CliConfig {
    pub fn load(path: &Path, o: &Overrides) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let mut c: CliConfig = toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        c.root = match &c.workspace_root {
            Some(r) => dir.join(r),
            None => dir,
        };
        if let Some(v) = &o.corpus {
            c.corpus = absolute(v);
        }
        if let Some(v) = &o.ledger {
            c.ledger = absolute(v);
        }
        if let Some(v) = &o.report_dir {
            c.report_dir = absolute(v);
        }
        if let Some(v) = &o.perturbations {
            c.perturbations = v.clone();
        }
        c.runs_per_cell = o.runs.unwrap_or(c.runs_per_cell);
        c.k = o.k.unwrap_or(c.k);
        c.max_iterations = o.max_iterations.unwrap_or(c.max_iterations);
        c.parallelism = o.parallelism.unwrap_or(c.parallelism);
        if let Some(t) = o.fuzz_timeout {
            c.checker.fuzz.timeout_secs = t;
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), Failure> {
        if self.runs_per_cell == 0 || self.max_iterations == 0 || self.k == 0 || self.parallelism == 0 {
            return Err(Failure::config("runs_per_cell, k, max_iterations and parallelism must be positive"));
        }
        if self.perturb.self_check_secs == 0 {
            return Err(Failure::config("perturb.self_check_secs must be positive"));
        }
        self.checker.fuzz.validate().map_err(|e| Failure::config(e.to_string()))?;
        if self.checker.kind == CheckerKind::Simulated && self.checker.rules.is_none() {
            return Err(Failure::config("the simulated checker needs a `rules` file"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.models {
            m.validate().map_err(|e| Failure::config(e.to_string()))?;
            if !seen.insert(&m.model_id) {
                return Err(Failure::config(format!("model `{}` is listed twice", m.model_id)));
            }
        }
        if let Some(s) = &self.sampling {
            if s.set_size == 0 || s.count == 0 {
                return Err(Failure::config("sampling.set_size and sampling.count must be positive"));
            }
        }
        Ok(())
    }

    /// Resolves a config path against the workspace root.
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.path(&self.corpus)
    }

    /// Backend configs with script paths resolved.
    pub fn model_configs(&self) -> Vec<BackendConfig> {
        self.models
            .iter()
            .map(|m| {
                let mut m = m.clone();
                m.script = m.script.as_deref().map(|s| self.path(s));
                m
            })
            .collect()
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::env::current_dir().map(|d| d.join(p)).unwrap_or_else(|_| p.to_path_buf())
}
