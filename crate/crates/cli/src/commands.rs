use crate::config::{CheckerKind, CliConfig};
use crate::Failure;
use anyhow::Context;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use transloop::checkers::{Checker, CheckStage, SimulatedChecker, ToolchainChecker, VariantVerdict};
use transloop::corpus::{corpus_report, load_corpus, load_group_manifest, CommandTokenizer, CorpusIndex, DefaultTokenizer, SourceUnit, Tokenizer};
use transloop::evalkit::{
    aggregate_over_perturbations, aggregate_sampled, emit_report, error_distribution, failure_histogram, pass_table_by_iteration,
    per_perturbation, solved_sets, token_cost_curve, AggregateKind, EvalError, Report, TABLE_STAGES,
};
use transloop::llm::{build_backend, ChatBackend};
use transloop::perturb::{self, apply, apply_checked, default_seed, registry, self_check_many, PerturbError, PerturbationSpec, PerturbedUnit};
use transloop::pipeline::{run_experiment, ExperimentConfig, ExperimentLedger, ExperimentPlan, PipelineError, Perturber, RunRecord};

fn load_units(c: &CliConfig) -> Result<CorpusIndex, Failure> {
    let groups = match &c.groups {
        Some(g) => Some(load_group_manifest(&c.path(g)).map_err(|e| Failure::config(e.to_string()))?),
        None => None,
    };
    let idx = load_corpus(&c.corpus_dir(), groups.as_ref()).map_err(|e| Failure::config(e.to_string()))?;
    for w in &idx.warnings {
        eprintln!("warning: {w}");
    }
    Ok(idx)
}

fn resolve_perturbations(c: &CliConfig) -> Result<Vec<PerturbationSpec>, Failure> {
    if c.perturbations.iter().any(|p| p == "all") {
        return Ok(registry());
    }
    c.perturbations.iter().map(|id| perturb::lookup(id).map_err(|e| Failure::config(e.to_string()))).collect()
}

/// The backend used by model-assisted perturbations, if any is selected.
fn perturbation_model(c: &CliConfig, specs: &[PerturbationSpec]) -> Result<Option<Arc<dyn ChatBackend>>, Failure> {
    let Some(first) = specs.iter().find(|s| s.needs_model) else {
        return Ok(None);
    };
    let models = c.model_configs();
    let chosen = match &c.perturb.model {
        Some(id) => models.iter().find(|m| &m.model_id == id).ok_or_else(|| Failure::config(format!("perturb.model `{id}` is not configured")))?,
        None => models.first().ok_or_else(|| Failure::config(format!("perturbation {} needs a model backend but none is configured", first.id)))?,
    };
    build_backend(chosen).map(Some).map_err(|e| Failure::config(e.to_string()))
}

fn toolchain_checker(c: &CliConfig) -> anyhow::Result<ToolchainChecker> {
    let t = ToolchainChecker::new(c.checker.toolchain.clone(), c.checker.fuzz.clone());
    t.verify().context("toolchain check failed")?;
    Ok(t)
}

fn scratch_dir(c: &CliConfig, name: &str) -> anyhow::Result<PathBuf> {
    let base = c.work_dir.as_deref().map(|p| c.path(p)).unwrap_or_else(std::env::temp_dir);
    let d = base.join(format!("transloop-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
    Ok(d)
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn stats(c: &CliConfig, group: Option<&str>) -> anyhow::Result<()> {
    let idx = load_units(c)?;
    if let Some(g) = group {
        if !idx.units.iter().any(|u| u.group == g) {
            return Err(Failure::config(format!("no file belongs to group `{g}`")).into());
        }
    }
    let tokenizer: Box<dyn Tokenizer> = match &c.tokenizer {
        Some(cmd) if !cmd.is_empty() => Box::new(CommandTokenizer { program: cmd[0].clone(), args: cmd[1..].to_vec() }),
        _ => Box::new(DefaultTokenizer),
    };
    let report = corpus_report(&idx, tokenizer.as_ref(), group)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let dir = c.path(&c.report_dir);
    let suffix = group.map(|g| format!("_{g}")).unwrap_or_default();
    write_file(&dir.join(format!("corpus_stats{suffix}.csv")), &report.to_csv()?)?;
    write_file(&dir.join(format!("corpus_stats{suffix}.json")), &(report.to_json() + "\n"))?;
    eprintln!("{} files summarized into {}", report.files.len(), dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    source_id: String,
    perturbation_id: String,
    seed: u64,
    identity: bool,
    noop: bool,
    verdict: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Manifest {
    corpus: String,
    perturbation_id: String,
    run_index: u32,
    entries: Vec<ManifestEntry>,
}

pub fn perturb(c: &CliConfig, run_index: u32, out_root: Option<PathBuf>, self_check: bool) -> anyhow::Result<()> {
    let idx = load_units(c)?;
    let specs = resolve_perturbations(c)?;
    let model = perturbation_model(c, &specs)?;
    let checker = match (self_check, c.checker.kind) {
        (true, CheckerKind::Toolchain) => Some(toolchain_checker(c)?),
        _ => None,
    };
    let corpus_dir = c.corpus_dir();
    let corpus_name = corpus_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "corpus".into());
    let out_root = out_root.or_else(|| corpus_dir.parent().map(Path::to_path_buf)).unwrap_or_default();

    // results[spec][unit]
    let mut results: Vec<Vec<(u64, Result<PerturbedUnit, String>)>> = Vec::new();
    for spec in &specs {
        let mut row = Vec::new();
        for u in &idx.units {
            let seed = default_seed(&u.id, &spec.id, run_index);
            match apply(spec, u, seed, model.as_deref()) {
                Ok(p) => row.push((seed, Ok(p))),
                Err(e @ PerturbError::NeedsModel(_)) => return Err(Failure::config(e.to_string()).into()),
                Err(e) => {
                    eprintln!("{} on {}: {e}", spec.id, u.id);
                    row.push((seed, Err(e.to_string())));
                }
            }
        }
        results.push(row);
    }

    let mut verdicts: Vec<Vec<String>> = vec![vec![String::new(); idx.units.len()]; specs.len()];
    let mut failures = Vec::new();
    let work = if checker.is_some() { Some(scratch_dir(c, "selfcheck")?) } else { None };
    for (ui, u) in idx.units.iter().enumerate() {
        let mut pending = Vec::new();
        for (si, row) in results.iter().enumerate() {
            verdicts[si][ui] = match &row[ui].1 {
                Err(e) => format!("error: {e}"),
                Ok(p) if p.identity => "identity".into(),
                Ok(p) if p.is_noop() => "no-op".into(),
                Ok(_) if checker.is_none() => "skipped".into(),
                Ok(_) if !u.is_fuzzable() => "not-fuzzable".into(),
                Ok(p) => {
                    pending.push((si, p.clone()));
                    continue;
                }
            };
        }
        let (Some(checker), Some(work)) = (&checker, &work) else { continue };
        if pending.is_empty() {
            continue;
        }
        eprintln!("self-checking {} perturbed copies of {}", pending.len(), u.id);
        let units: Vec<PerturbedUnit> = pending.iter().map(|(_, p)| p.clone()).collect();
        let vs = self_check_many(checker, u, &units, c.perturb.self_check_secs, work)?;
        for ((si, p), v) in pending.iter().zip(vs) {
            if v != VariantVerdict::EquivalentWithinBudget {
                failures.push(format!("{} on {}: {}", p.perturbation_id, u.id, v.label()));
            }
            verdicts[*si][ui] = v.label().to_string();
        }
    }
    if let Some(w) = work {
        let _ = std::fs::remove_dir_all(w);
    }

    for (si, spec) in specs.iter().enumerate() {
        let dir = out_root.join(format!("{corpus_name}__{}__{run_index}", spec.id));
        let mut entries = Vec::new();
        for (ui, u) in idx.units.iter().enumerate() {
            let (seed, r) = &results[si][ui];
            if let Ok(p) = r {
                write_file(&dir.join(&u.id), &p.text)?;
            }
            entries.push(ManifestEntry {
                source_id: u.id.clone(),
                perturbation_id: spec.id.clone(),
                seed: *seed,
                identity: r.as_ref().is_ok_and(|p| p.identity),
                noop: r.as_ref().is_ok_and(|p| p.is_noop()),
                verdict: verdicts[si][ui].clone(),
                notes: r.as_ref().map(|p| p.notes.clone()).unwrap_or_default(),
            });
        }
        for h in &idx.headers {
            let to = dir.join(h);
            if let Some(p) = to.parent() {
                std::fs::create_dir_all(p)?;
            }
            std::fs::copy(corpus_dir.join(h), &to).with_context(|| format!("copying header {h}"))?;
        }
        let manifest = Manifest { corpus: corpus_name.clone(), perturbation_id: spec.id.clone(), run_index, entries };
        write_file(&dir.join("manifest.json"), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
        eprintln!("wrote {}", dir.display());
    }
    if !failures.is_empty() {
        return Err(Failure::self_check(format!("self-check failed for {} perturbed files: {}", failures.len(), failures.join("; "))).into());
    }
    Ok(())
}

/// Applies perturbations; model-assisted ones are self-checked when a
/// toolchain is available.
struct CliPerturber {
    model: Option<Arc<dyn ChatBackend>>,
    checker: Option<ToolchainChecker>,
    budget_secs: u64,
    work: PathBuf,
}

impl Perturber for CliPerturber {
    fn perturb(&self, spec: &PerturbationSpec, unit: &SourceUnit, seed: u64) -> Result<PerturbedUnit, PerturbError> {
        let model = self.model.as_deref();
        match &self.checker {
            Some(checker) if spec.needs_model && unit.is_fuzzable() => {
                let name: String = unit.id.chars().map(|ch| if ch.is_ascii_alphanumeric() { ch } else { '_' }).collect();
                let work = self.work.join(format!("{name}-{}-{seed:016x}", spec.id));
                let r = apply_checked(spec, unit, seed, model, checker, self.budget_secs, &work);
                let _ = std::fs::remove_dir_all(&work);
                r
            }
            _ => apply(spec, unit, seed, model),
        }
    }
}

fn status(r: &RunRecord) -> String {
    if let Some(s) = &r.skipped {
        return format!("skipped ({s})");
    }
    if r.success {
        let at = r.first_iteration_per_stage.get(&CheckStage::Fuzzed).copied().unwrap_or(0);
        return format!("success at iteration {at}");
    }
    match r.error_category {
        Some(cat) => format!("failed: {cat}"),
        None => format!("failed after {} attempts", r.attempts.len()),
    }
}

pub fn translate(c: &CliConfig, limit: Option<usize>) -> anyhow::Result<()> {
    let idx = load_units(c)?;
    let specs = resolve_perturbations(c)?;
    if c.models.is_empty() {
        return Err(Failure::config("no models configured").into());
    }
    let backends: Vec<Arc<dyn ChatBackend>> =
        c.model_configs().iter().map(|m| build_backend(m).map_err(|e| Failure::config(e.to_string()))).collect::<Result<_, _>>()?;
    let perturb_model = perturbation_model(c, &specs)?;
    let (checker, toolchain): (Box<dyn Checker>, Option<ToolchainChecker>) = match c.checker.kind {
        CheckerKind::Simulated => {
            let rules = c.path(c.checker.rules.as_deref().expect("validated"));
            (Box::new(SimulatedChecker::from_file(&rules).map_err(|e| Failure::config(format!("{}: {e}", rules.display())))?), None)
        }
        CheckerKind::Toolchain => {
            let t = toolchain_checker(c)?;
            (Box::new(t.clone()), Some(t))
        }
    };
    let work = scratch_dir(c, "translate")?;
    let perturber = CliPerturber {
        model: perturb_model,
        checker: toolchain.filter(|_| c.perturb.self_check_in_translate),
        budget_secs: c.perturb.self_check_secs,
        work: work.join("perturb"),
    };
    let plan = ExperimentPlan {
        units: &idx.units,
        perturbations: &specs,
        backends: &backends,
        checker: checker.as_ref(),
        perturber: &perturber,
        config: ExperimentConfig {
            runs_per_cell: c.runs_per_cell,
            max_iterations: c.max_iterations,
            parallelism: c.parallelism,
            run_wall_cap_secs: c.run_wall_cap_secs,
            record_wall_time: c.record_wall_time,
            work_root: Some(work.join("runs")),
            ..ExperimentConfig::default()
        },
    };
    let ledger = c.path(&c.ledger);
    if let Some(p) = ledger.parent() {
        std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    }
    let mut done = 0usize;
    let result = run_experiment(&plan, &ledger, limit, &mut |r| {
        done += 1;
        eprintln!("[{done}] {} {} {} run {}: {}", r.model_id, r.source_id, r.perturbation_id, r.run_index, status(r));
    });
    let _ = std::fs::remove_dir_all(&work);
    let summary = match result {
        Ok(s) => s,
        Err(e @ PipelineError::ConfigMismatch { .. }) => return Err(Failure::config(e.to_string()).into()),
        Err(e) => return Err(e.into()),
    };
    eprintln!(
        "{} new runs ({} already in the ledger, {} planned) in {}",
        summary.appended,
        summary.existing,
        summary.total_runs,
        ledger.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Analyses {
    /// pass@k by stage and iteration cap, on unperturbed inputs.
    #[arg(long)]
    pub pass_table: bool,
    /// Worst case over the configured perturbations.
    #[arg(long)]
    pub robust: bool,
    /// Best case over the configured perturbations.
    #[arg(long)]
    pub augmented: bool,
    /// Generated tokens against pass@k.
    #[arg(long)]
    pub token_curve: bool,
    /// Count tokens spent on reasoning in the token curve.
    #[arg(long)]
    pub include_reasoning: bool,
    /// Failing stage per iteration.
    #[arg(long)]
    pub failure_hist: bool,
    /// Error categories by experiment kind.
    #[arg(long)]
    pub errors: bool,
    /// Files solved by each model and their overlaps.
    #[arg(long)]
    pub solved_sets: bool,
}

fn file_name(model: &str) -> String {
    model.chars().map(|ch| if ch.is_ascii_alphanumeric() || ch == '-' || ch == '.' { ch } else { '_' }).collect()
}

fn gap(e: EvalError, gaps: &mut Vec<String>) -> anyhow::Result<()> {
    match e {
        EvalError::Coverage { gaps: g } => {
            gaps.extend(g);
            Ok(())
        }
        EvalError::CorpusMismatch(m) => {
            gaps.push(m);
            Ok(())
        }
        e => Err(e.into()),
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

pub fn evaluate(c: &CliConfig, a: &Analyses, extra: &[PathBuf]) -> anyhow::Result<()> {
    let mut a = a.clone();
    if !(a.pass_table || a.robust || a.augmented || a.token_curve || a.failure_hist || a.errors || a.solved_sets) {
        a.pass_table = true;
    }
    let mut ledger = ExperimentLedger::default();
    for p in std::iter::once(c.path(&c.ledger)).chain(extra.iter().cloned()) {
        if !p.exists() {
            return Err(Failure::config(format!("ledger {} does not exist", p.display())).into());
        }
        ledger.extend(ExperimentLedger::load(&p)?);
    }
    let specs = resolve_perturbations(c)?;
    let set: Vec<String> = specs.iter().map(|s| s.id.clone()).collect();
    let levels: BTreeMap<String, String> =
        registry().into_iter().map(|s| (s.id, s.level.map(|l| l.to_string()).unwrap_or_else(|| "-".into()))).collect();
    let mut by_model: BTreeMap<String, Vec<RunRecord>> = BTreeMap::new();
    for r in ledger.records {
        by_model.entry(r.model_id.clone()).or_default().push(r);
    }
    if by_model.is_empty() {
        return Err(Failure::coverage("the ledger holds no runs").into());
    }
    let dir = c.path(&c.report_dir);
    let caps: Vec<u32> = (1..=c.max_iterations).collect();
    let mut gaps = Vec::new();
    let mut robustness = Vec::new();
    let mut written = 0usize;
    for (model, records) in &by_model {
        let identity: Vec<RunRecord> = records.iter().filter(|r| r.perturbation_id == perturb::IDENTITY).cloned().collect();
        let mut report = Report::default();
        if a.pass_table {
            if identity.is_empty() {
                gaps.push(format!("{model}: no unperturbed runs for the pass table"));
            } else {
                let t = pass_table_by_iteration(&identity, &TABLE_STAGES, &caps, c.k)?;
                gaps.extend(t.incomplete.iter().map(|i| format!("{model}: {i} has fewer than {} runs", c.k)));
                report.pass_tables.push(("identity".into(), t));
            }
        }
        if a.robust || a.augmented {
            let mut row = vec![model.clone(), set.len().to_string()];
            let mut kinds = vec![AggregateKind::Mean];
            if a.robust {
                kinds.insert(0, AggregateKind::Min);
            }
            if a.augmented {
                kinds.push(AggregateKind::Max);
            }
            let mut ok = true;
            for kind in kinds {
                match aggregate_over_perturbations(records, &set, kind, c.k) {
                    Ok(v) => {
                        report.aggregates.push(("configured".into(), kind, v));
                        row.push(fmt(v));
                    }
                    Err(e) => {
                        gap(e, &mut gaps)?;
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                robustness.push(row);
            }
            match per_perturbation(records, c.k) {
                Ok(scores) => report.per_perturbation = Some((scores, levels.clone())),
                Err(e) => gap(e, &mut gaps)?,
            }
            if let Some(s) = &c.sampling {
                let sets = perturb::sample_sets(&specs, s.set_size, s.count, s.seed).map_err(|e| Failure::config(e.to_string()))?;
                match aggregate_sampled(records, &sets, c.k) {
                    Ok(v) => report.sampled = Some(v),
                    Err(e) => gap(e, &mut gaps)?,
                }
            }
        }
        if a.token_curve {
            let ks: Vec<u32> = (1..=c.k).collect();
            match token_cost_curve(&identity, &ks, &caps, a.include_reasoning) {
                Ok(curve) => {
                    if !curve.missing_usage.is_empty() {
                        eprintln!("warning: {model}: {} runs have no token usage", curve.missing_usage.len());
                    }
                    report.token_curve = Some(curve);
                }
                Err(e) => gap(e, &mut gaps)?,
            }
        }
        if a.failure_hist {
            report.failures = Some(failure_histogram(records));
        }
        if a.errors {
            report.errors = Some(error_distribution(records));
        }
        written += emit_report(&report, &dir.join(file_name(model)))?.len();
    }
    if a.robust || a.augmented {
        let mut header = vec!["model", "perturbations"];
        if a.robust {
            header.push("robust");
        }
        header.push("mean");
        if a.augmented {
            header.push("augmented");
        }
        let mut text = header.join(",") + "\n";
        for r in &robustness {
            text += &(r.join(",") + "\n");
        }
        write_file(&dir.join("robustness.csv"), &text)?;
        written += 1;
    }
    if a.solved_sets {
        let ledgers: Vec<(String, Vec<RunRecord>)> = by_model
            .iter()
            .map(|(m, rs)| (m.clone(), rs.iter().filter(|r| r.perturbation_id == perturb::IDENTITY).cloned().collect()))
            .collect();
        match solved_sets(&ledgers) {
            Ok(s) => {
                for r in &s.regions {
                    eprintln!("solved by exactly {}: {} files", r.models.join(" + "), r.files.len());
                }
                written += emit_report(&Report { solved: Some(s), ..Report::default() }, &dir)?.len();
            }
            Err(e) => gap(e, &mut gaps)?,
        }
    }
    eprintln!("{written} report files written to {}", dir.display());
    if !gaps.is_empty() {
        return Err(Failure::coverage(format!("coverage gaps: {}", gaps.join("; "))).into());
    }
    Ok(())
}
