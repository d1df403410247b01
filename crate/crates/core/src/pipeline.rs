//! The feedback loop: prompt, generate, check, re-prompt. Runs are collected
//! in an append-only JSON-lines ledger that can be resumed.

use crate::checkers::{run_cascade, CheckReport, CheckStage, Checker};
use crate::corpus::SourceUnit;
use crate::llm::{
    build_feedback_prompt, build_translation_prompt, extract_code, ChatBackend, Conversation, FeedbackItem, LlmError,
    Role, TokenUsage, DEFAULT_DIAGNOSTIC_CAP,
};
use crate::perturb::{self, Mode, PerturbError, PerturbationSpec, PerturbedUnit};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MAX_ITERATIONS: u32 = 5;
pub const DEFAULT_RUNS_PER_CELL: u32 = 20;
pub const DEFAULT_RUN_WALL_CAP_SECS: u64 = 30 * 60;

/// Why a run ended without success when the model was not at fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorCategory {
    FuzzingSetup,
    FuzzingException,
    TranslationSystem,
    LlmApi,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 4] =
        [ErrorCategory::FuzzingSetup, ErrorCategory::FuzzingException, ErrorCategory::TranslationSystem, ErrorCategory::LlmApi];
}

impl std::fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ErrorCategory::FuzzingSetup => "Fuzzing Setup",
            ErrorCategory::FuzzingException => "Fuzzing Exception",
            ErrorCategory::TranslationSystem => "Translation System",
            ErrorCategory::LlmApi => "LLM API",
        })
    }
}

/// What went wrong outside the model's control.
#[derive(Debug, Clone)]
pub enum FailureContext {
    HarnessGeneration(String),
    HarnessBuild(String),
    FuzzerCrash(String),
    FuzzerHang(String),
    Backend(LlmError),
    RunTimeout(Duration),
    Internal(String),
}

pub fn classify_error(ctx: &FailureContext) -> ErrorCategory {
    match ctx {
        FailureContext::HarnessGeneration(_) | FailureContext::HarnessBuild(_) => ErrorCategory::FuzzingSetup,
        FailureContext::FuzzerCrash(_) | FailureContext::FuzzerHang(_) => ErrorCategory::FuzzingException,
        FailureContext::Backend(_) => ErrorCategory::LlmApi,
        FailureContext::RunTimeout(_) | FailureContext::Internal(_) => ErrorCategory::TranslationSystem,
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Ledger { path: PathBuf, line: usize, message: String },
    #[error("ledger {path} was written by a different experiment (config hash {found}, expected {expected})")]
    ConfigMismatch { path: PathBuf, found: String, expected: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    /// 1-based.
    pub iteration: u32,
    pub rust_source: String,
    /// Reports of the stages that ran, in stage order.
    pub reports: Vec<CheckReport>,
    pub usage: TokenUsage,
    #[serde(rename = "wall_time_secs", with = "secs")]
    pub wall_time: Duration,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// How the input of a run was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Identity,
    Deterministic,
    Stochastic,
}

impl ExperimentKind {
    pub fn of(spec: &PerturbationSpec) -> Self {
        match (spec.is_identity(), spec.mode) {
            (true, _) => ExperimentKind::Identity,
            (false, Mode::Deterministic) => ExperimentKind::Deterministic,
            (false, Mode::Stochastic) => ExperimentKind::Stochastic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub source_id: String,
    pub group: String,
    pub perturbation_id: String,
    pub perturbation_kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation_seed: Option<u64>,
    pub model_id: String,
    pub run_index: u32,
    /// Whether the translated file has a fuzzable interface.
    pub fuzzable: bool,
    pub attempts: Vec<AttemptRecord>,
    pub first_iteration_per_stage: BTreeMap<CheckStage, u32>,
    pub success: bool,
    pub error_category: Option<ErrorCategory>,
    /// Set when no translation was attempted, e.g. a quarantined perturbation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

pub type RunKey = (String, String, String, u32);

impl RunRecord {
    pub fn key(&self) -> RunKey {
        (self.source_id.clone(), self.perturbation_id.clone(), self.model_id.clone(), self.run_index)
    }

    pub fn usage(&self) -> TokenUsage {
        self.attempts.iter().map(|a| a.usage).sum()
    }

    /// Whether `stage` was reached within the first `cap` iterations.
    pub fn reached_within(&self, stage: CheckStage, cap: u32) -> bool {
        self.first_iteration_per_stage.get(&stage).is_some_and(|&i| i <= cap)
    }

    /// Checks the structural invariants of a record.
    pub fn is_consistent(&self, max_iterations: u32) -> bool {
        let budget = self.attempts.len() <= max_iterations as usize;
        let numbered = self.attempts.iter().enumerate().all(|(i, a)| a.iteration as usize == i + 1);
        let fuzz_ok = self
            .attempts
            .iter()
            .any(|a| a.reports.iter().any(|r| r.stage == CheckStage::Fuzzed && r.success));
        let mut prev = 0;
        let mut monotone = true;
        for s in CheckStage::ALL {
            match self.first_iteration_per_stage.get(&s) {
                Some(&i) if i >= prev => prev = i,
                Some(_) => monotone = false,
                None => prev = u32::MAX,
            }
        }
        budget && numbered && fuzz_ok == self.success && monotone && !(self.success && self.error_category.is_some())
    }
}

#[derive(Debug, Clone)]
pub struct TranslateOptions {
    pub max_iterations: u32,
    pub run_wall_cap: Duration,
    pub diagnostic_cap: usize,
    /// When false, attempt wall times are recorded as zero so that ledgers
    /// are byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for TranslateOptions {
    fn default() -> Self {
        TranslateOptions {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            run_wall_cap: Duration::from_secs(DEFAULT_RUN_WALL_CAP_SECS),
            diagnostic_cap: DEFAULT_DIAGNOSTIC_CAP,
            record_wall_time: true,
        }
    }
}

/// The outcome of one run before it is labelled with experiment keys.
#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub attempts: Vec<AttemptRecord>,
    pub first_iteration_per_stage: BTreeMap<CheckStage, u32>,
    pub success: bool,
    pub error_category: Option<ErrorCategory>,
}

fn feedback_items(report: &CheckReport) -> Vec<FeedbackItem> {
    let mut items: Vec<FeedbackItem> = report.diagnostics.iter().cloned().map(FeedbackItem::Message).collect();
    if let Some(c) = &report.counterexample {
        items.push(FeedbackItem::Counterexample(c.clone()));
    }
    if items.is_empty() {
        items.push(FeedbackItem::Message(format!("The {} check failed without further diagnostics.", report.stage)));
    }
    items
}

/// Translates `unit` with up to `opts.max_iterations` model calls, feeding
/// the first failing check back after each attempt.
pub fn translate_with_feedback(
    unit: &SourceUnit,
    backend: &dyn ChatBackend,
    checker: &dyn Checker,
    opts: &TranslateOptions,
    workdir: &Path,
) -> Result<Translation, PipelineError> {
    if unit.interfaces.is_empty() {
        return Err(PipelineError::Precondition(format!("{} defines no functions", unit.id)));
    }
    if opts.max_iterations == 0 {
        return Err(PipelineError::Precondition("max_iterations must be at least 1".into()));
    }
    let prompt = build_translation_prompt(&unit.text).map_err(|e| PipelineError::Precondition(e.to_string()))?;
    let started = Instant::now();
    let mut conv = Conversation::new();
    conv.push(Role::User, prompt);
    let mut out =
        Translation { attempts: Vec::new(), first_iteration_per_stage: BTreeMap::new(), success: false, error_category: None };
    for iteration in 1..=opts.max_iterations {
        if started.elapsed() > opts.run_wall_cap {
            out.error_category = Some(classify_error(&FailureContext::RunTimeout(started.elapsed())));
            break;
        }
        let t0 = Instant::now();
        let completion = match backend.complete(&conv) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("{}: model call failed: {e}", unit.id);
                out.error_category = Some(classify_error(&FailureContext::Backend(e)));
                break;
            }
        };
        let rust_source = extract_code(&completion.text).map(|(c, _)| c).unwrap_or_default();
        let reports = run_cascade(checker, unit, &rust_source, workdir);
        let wall_time = if opts.record_wall_time { t0.elapsed() } else { Duration::ZERO };
        for r in reports.iter().filter(|r| r.success) {
            out.first_iteration_per_stage.entry(r.stage).or_insert(iteration);
        }
        let last = reports.last().cloned();
        out.attempts.push(AttemptRecord { iteration, rust_source, reports, usage: completion.usage, wall_time });
        let Some(last) = last else {
            out.error_category = Some(classify_error(&FailureContext::Internal("the check cascade produced no report".into())));
            break;
        };
        if let Some(cat) = last.infra_error {
            out.error_category = Some(cat);
            break;
        }
        if last.success && last.stage == CheckStage::Fuzzed {
            out.success = true;
            break;
        }
        if started.elapsed() > opts.run_wall_cap {
            out.error_category = Some(classify_error(&FailureContext::RunTimeout(started.elapsed())));
            break;
        }
        if iteration < opts.max_iterations {
            let feedback = build_feedback_prompt(&feedback_items(&last), opts.diagnostic_cap)
                .map_err(|e| PipelineError::Precondition(e.to_string()))?;
            let reply = if completion.text.trim().is_empty() { "(empty response)".to_string() } else { completion.text };
            conv.push(Role::Assistant, reply);
            conv.push(Role::User, feedback);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerMetadata {
    pub config_hash: String,
    pub toolchain: BTreeMap<String, String>,
    pub seed_rule: String,
    pub runs_per_cell: u32,
    pub max_iterations: u32,
    pub models: Vec<String>,
    pub perturbations: Vec<String>,
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LineBody {
    Metadata(LedgerMetadata),
    Run(Box<RunRecord>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Line {
    schema_version: u32,
    #[serde(flatten)]
    body: LineBody,
}

/// The contents of a ledger file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentLedger {
    pub metadata: Option<LedgerMetadata>,
    pub records: Vec<RunRecord>,
}

impl ExperimentLedger {
    pub fn from_records(records: Vec<RunRecord>) -> Self {
        ExperimentLedger { metadata: None, records }
    }

    /// Reads a ledger. A truncated final line left by an interrupted writer is ignored.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let f = File::open(path).map_err(io_err(path))?;
        let mut out = ExperimentLedger::default();
        let mut keys = BTreeSet::new();
        let lines: Vec<String> = BufReader::new(f).lines().collect::<Result<_, _>>().map_err(io_err(path))?;
        let complete = fs::read(path).map_err(io_err(path))?.last().is_none_or(|&b| b == b'\n');
        for (i, text) in lines.iter().enumerate() {
            if text.trim().is_empty() {
                continue;
            }
            let err = |message: String| PipelineError::Ledger { path: path.to_path_buf(), line: i + 1, message };
            let line: Line = match serde_json::from_str(text) {
                Ok(l) => l,
                Err(_) if i + 1 == lines.len() && !complete => break,
                Err(e) => return Err(err(e.to_string())),
            };
            if line.schema_version != SCHEMA_VERSION {
                return Err(err(format!("unsupported schema version {}", line.schema_version)));
            }
            match line.body {
                LineBody::Metadata(m) if out.metadata.is_none() && out.records.is_empty() => out.metadata = Some(m),
                LineBody::Metadata(_) => return Err(err("metadata must be the first line".into())),
                LineBody::Run(r) => {
                    if !keys.insert(r.key()) {
                        return Err(err(format!("duplicate run {:?}", r.key())));
                    }
                    out.records.push(*r);
                }
            }
        }
        Ok(out)
    }

    pub fn keys(&self) -> BTreeSet<RunKey> {
        self.records.iter().map(RunRecord::key).collect()
    }

    /// Mean number of attempts per run.
    pub fn mean_iterations(&self) -> Option<f64> {
        let runs: Vec<&RunRecord> = self.records.iter().filter(|r| r.skipped.is_none()).collect();
        if runs.is_empty() {
            return None;
        }
        Some(runs.iter().map(|r| r.attempts.len()).sum::<usize>() as f64 / runs.len() as f64)
    }

    pub fn total_usage(&self) -> TokenUsage {
        self.records.iter().map(RunRecord::usage).sum()
    }

    pub fn extend(&mut self, other: ExperimentLedger) {
        self.records.extend(other.records);
    }
}

/// Appends lines to a ledger file. One writer per file.
pub struct LedgerWriter {
    path: PathBuf,
    file: File,
}

impl LedgerWriter {
    /// Opens `path` for appending, cutting off a partial final line.
    pub fn open(path: &Path) -> Result<Self, PipelineError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        if path.exists() {
            let bytes = fs::read(path).map_err(io_err(path))?;
            if bytes.last().is_some_and(|&b| b != b'\n') {
                let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
                let f = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
                f.set_len(keep as u64).map_err(io_err(path))?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
        Ok(LedgerWriter { path: path.to_path_buf(), file })
    }

    fn write_line(&mut self, body: LineBody) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string(&Line { schema_version: SCHEMA_VERSION, body })
            .map_err(|e| PipelineError::Precondition(format!("cannot serialize ledger line: {e}")))?;
        text.push('\n');
        self.file.write_all(text.as_bytes()).map_err(io_err(&self.path))?;
        self.file.flush().map_err(io_err(&self.path))
    }

    pub fn write_metadata(&mut self, m: &LedgerMetadata) -> Result<(), PipelineError> {
        self.write_line(LineBody::Metadata(m.clone()))
    }

    pub fn append(&mut self, r: &RunRecord) -> Result<(), PipelineError> {
        self.write_line(LineBody::Run(Box::new(r.clone())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub runs_per_cell: u32,
    pub max_iterations: u32,
    pub parallelism: usize,
    pub run_wall_cap_secs: u64,
    pub record_wall_time: bool,
    pub diagnostic_cap: usize,
    /// Where per-run scratch directories are created; the system temp dir when unset.
    pub work_root: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            runs_per_cell: DEFAULT_RUNS_PER_CELL,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            parallelism: 1,
            run_wall_cap_secs: DEFAULT_RUN_WALL_CAP_SECS,
            record_wall_time: true,
            diagnostic_cap: DEFAULT_DIAGNOSTIC_CAP,
            work_root: None,
        }
    }
}

impl ExperimentConfig {
    pub fn translate_options(&self) -> TranslateOptions {
        TranslateOptions {
            max_iterations: self.max_iterations,
            run_wall_cap: Duration::from_secs(self.run_wall_cap_secs),
            diagnostic_cap: self.diagnostic_cap,
            record_wall_time: self.record_wall_time,
        }
    }
}

/// Produces the perturbed input of one run.
pub trait Perturber: Send + Sync {
    fn perturb(&self, spec: &PerturbationSpec, unit: &SourceUnit, seed: u64) -> Result<PerturbedUnit, PerturbError>;
}

/// Applies perturbations without a model or self-check.
pub struct PlainPerturber;

impl Perturber for PlainPerturber {
    fn perturb(&self, spec: &PerturbationSpec, unit: &SourceUnit, seed: u64) -> Result<PerturbedUnit, PerturbError> {
        perturb::apply(spec, unit, seed, None)
    }
}

pub struct ExperimentPlan<'a> {
    pub units: &'a [SourceUnit],
    pub perturbations: &'a [PerturbationSpec],
    pub backends: &'a [Arc<dyn ChatBackend>],
    pub checker: &'a dyn Checker,
    pub perturber: &'a dyn Perturber,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
struct Job {
    unit: usize,
    perturbation: usize,
    backend: usize,
    run_index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub total_runs: usize,
    pub existing: usize,
    pub appended: usize,
}

pub const SEED_RULE: &str = "sha256(len-prefixed source_id, perturbation_id, run_index LE u32), first 8 bytes LE";

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl<'a> ExperimentPlan<'a> {
    fn jobs(&self) -> Vec<Job> {
        let mut jobs = Vec::new();
        for unit in 0..self.units.len() {
            for perturbation in 0..self.perturbations.len() {
                for backend in 0..self.backends.len() {
                    for run_index in 0..self.config.runs_per_cell {
                        jobs.push(Job { unit, perturbation, backend, run_index });
                    }
                }
            }
        }
        jobs
    }

    pub fn metadata(&self) -> LedgerMetadata {
        let mut cfg = self.config.clone();
        cfg.parallelism = 0;
        cfg.work_root = None;
        let toolchain = self.checker.describe();
        let identity = serde_json::json!({
            "config": cfg,
            "sources": self.units.iter().map(|u| (u.id.clone(), sha_hex(u.text.as_bytes()))).collect::<BTreeMap<_, _>>(),
            "perturbations": self.perturbations,
            "models": self.backends.iter().map(|b| b.model_id().to_string()).collect::<Vec<_>>(),
            "toolchain": toolchain,
        });
        LedgerMetadata {
            config_hash: sha_hex(identity.to_string().as_bytes()),
            toolchain,
            seed_rule: SEED_RULE.to_string(),
            runs_per_cell: self.config.runs_per_cell,
            max_iterations: self.config.max_iterations,
            models: self.backends.iter().map(|b| b.model_id().to_string()).collect(),
            perturbations: self.perturbations.iter().map(|p| p.id.clone()).collect(),
            sources: self.units.iter().map(|u| u.id.clone()).collect(),
        }
    }

    fn key(&self, j: &Job) -> RunKey {
        (
            self.units[j.unit].id.clone(),
            self.perturbations[j.perturbation].id.clone(),
            self.backends[j.backend].model_id().to_string(),
            j.run_index,
        )
    }

    fn execute(&self, j: &Job) -> RunRecord {
        let unit = &self.units[j.unit];
        let spec = &self.perturbations[j.perturbation];
        let backend = &self.backends[j.backend];
        let seed = perturb::default_seed(&unit.id, &spec.id, j.run_index);
        let mut rec = RunRecord {
            source_id: unit.id.clone(),
            group: unit.group.clone(),
            perturbation_id: spec.id.clone(),
            perturbation_kind: ExperimentKind::of(spec),
            perturbation_seed: (spec.mode == Mode::Stochastic).then_some(seed),
            model_id: backend.model_id().to_string(),
            run_index: j.run_index,
            fuzzable: unit.is_fuzzable(),
            attempts: Vec::new(),
            first_iteration_per_stage: BTreeMap::new(),
            success: false,
            error_category: None,
            skipped: None,
        };
        let input = match self.perturber.perturb(spec, unit, seed) {
            Ok(p) => p.to_source_unit(),
            Err(e @ PerturbError::Quarantined { .. }) => {
                rec.skipped = Some(e.to_string());
                return rec;
            }
            Err(e) => {
                log::warn!("{}: perturbation {} failed: {e}", unit.id, spec.id);
                rec.error_category = Some(e.category().unwrap_or(ErrorCategory::TranslationSystem));
                return rec;
            }
        };
        rec.fuzzable = input.is_fuzzable();
        let scratch = match &self.config.work_root {
            Some(root) => fs::create_dir_all(root).and_then(|_| tempfile::Builder::new().prefix("run-").tempdir_in(root)),
            None => tempfile::Builder::new().prefix("transloop-run-").tempdir(),
        };
        let scratch = match scratch {
            Ok(d) => d,
            Err(e) => {
                log::warn!("cannot create a scratch directory: {e}");
                rec.error_category = Some(classify_error(&FailureContext::Internal(e.to_string())));
                return rec;
            }
        };
        match translate_with_feedback(&input, backend.as_ref(), self.checker, &self.config.translate_options(), scratch.path()) {
            Ok(t) => {
                rec.attempts = t.attempts;
                rec.first_iteration_per_stage = t.first_iteration_per_stage;
                rec.success = t.success;
                rec.error_category = t.error_category;
            }
            Err(e) => {
                log::warn!("{}: {e}", unit.id);
                rec.error_category = Some(classify_error(&FailureContext::Internal(e.to_string())));
            }
        }
        if !rec.success {
            let kept = scratch.keep();
            log::info!("kept scratch directory {} of failed run {:?}", kept.display(), rec.key());
        }
        rec
    }
}

/// Runs every missing (file, perturbation, model, run) cell and appends the
/// records to `ledger_path` in plan order. At most `limit` new records are
/// written when set. `progress` sees each record as it is written.
pub fn run_experiment(
    plan: &ExperimentPlan,
    ledger_path: &Path,
    limit: Option<usize>,
    progress: &mut dyn FnMut(&RunRecord),
) -> Result<ExperimentSummary, PipelineError> {
    if plan.config.max_iterations == 0 || plan.config.runs_per_cell == 0 {
        return Err(PipelineError::Precondition("runs_per_cell and max_iterations must be positive".into()));
    }
    let metadata = plan.metadata();
    let existing = if ledger_path.exists() { ExperimentLedger::load(ledger_path)? } else { ExperimentLedger::default() };
    if let Some(m) = &existing.metadata {
        if m.config_hash != metadata.config_hash {
            return Err(PipelineError::ConfigMismatch {
                path: ledger_path.to_path_buf(),
                found: m.config_hash.clone(),
                expected: metadata.config_hash,
            });
        }
    }
    let done = existing.keys();
    let all = plan.jobs();
    let total_runs = all.len();
    let mut todo: Vec<Job> = all.into_iter().filter(|j| !done.contains(&plan.key(j))).collect();
    if let Some(l) = limit {
        todo.truncate(l);
    }
    let mut writer = LedgerWriter::open(ledger_path)?;
    if existing.metadata.is_none() && existing.records.is_empty() {
        writer.write_metadata(&metadata)?;
    }
    let summary = ExperimentSummary { total_runs, existing: done.len(), appended: todo.len() };
    if todo.is_empty() {
        return Ok(summary);
    }
    let workers = plan.config.parallelism.clamp(1, todo.len());
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, RunRecord)>();
    let mut result = Ok(());
    std::thread::scope(|s| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, stop, todo) = (&next, &stop, &todo);
            s.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = todo.get(i) else { break };
                let rec = plan.execute(job);
                if tx.send((i, rec)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // Records are written in plan order so that ledgers do not depend on scheduling.
        let mut pending = BTreeMap::new();
        let mut expect = 0;
        for (i, rec) in rx {
            pending.insert(i, rec);
            while let Some(rec) = pending.remove(&expect) {
                if let Err(e) = writer.append(&rec) {
                    result = Err(e);
                    stop.store(true, Ordering::Relaxed);
                    return;
                }
                progress(&rec);
                expect += 1;
            }
        }
    });
    result.map(|_| summary)
}
