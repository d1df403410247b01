//! Whole-experiment runs with scripted backends and simulated checkers.

use std::path::Path;
use std::sync::Arc;
use transloop::checkers::{CheckStage, SimRule, SimulatedChecker};
use transloop::corpus::SourceUnit;
use transloop::llm::{ChatBackend, ScriptEntry, ScriptedBackend};
use transloop::perturb::{lookup, PerturbationSpec};
use transloop::pipeline::{
    run_experiment, ExperimentConfig, ExperimentLedger, ExperimentPlan, PipelineError, PlainPerturber, RunRecord,
};

fn units() -> Vec<SourceUnit> {
    vec![
        SourceUnit::from_text("a.c", "default", "int inc(int x) { return x + 1; }\n"),
        SourceUnit::from_text("b.c", "default", "int dec(int x) {\n    if (x > 0 && x < 9) { return x - 1; }\n    return x;\n}\n"),
    ]
}

fn backend() -> Arc<dyn ChatBackend> {
    Arc::new(ScriptedBackend::new(
        "mock",
        vec![
            ScriptEntry::when("inc", "```rust\npub fn inc(x: i32) -> i32 { x + 1 }\n```"),
            ScriptEntry::when("mistakes", "```rust\npub fn dec(x: i32) -> i32 { x }\n```"),
            ScriptEntry::when("dec", "```rust\nBROKEN dec\n```"),
        ],
    ))
}

fn checker() -> SimulatedChecker {
    SimulatedChecker::new(vec![SimRule::fail(CheckStage::Compiled, "BROKEN", "error: expected item")])
}

fn config(runs: u32, parallelism: usize, root: &Path) -> ExperimentConfig {
    ExperimentConfig {
        runs_per_cell: runs,
        parallelism,
        record_wall_time: false,
        work_root: Some(root.join("work")),
        ..ExperimentConfig::default()
    }
}

fn run(perts: &[PerturbationSpec], cfg: ExperimentConfig, path: &Path, limit: Option<usize>) -> Result<usize, PipelineError> {
    let (u, b, c) = (units(), vec![backend()], checker());
    let plan = ExperimentPlan { units: &u, perturbations: perts, backends: &b, checker: &c, perturber: &PlainPerturber, config: cfg };
    let mut seen = 0;
    let s = run_experiment(&plan, path, limit, &mut |_: &RunRecord| seen += 1)?;
    assert_eq!(s.appended, seen);
    Ok(s.appended)
}

#[test]
fn counts_resume_and_idempotence() {
    let d = tempfile::tempdir().unwrap();
    let ids = [lookup("Identity").unwrap()];
    let full = d.path().join("full.jsonl");
    assert_eq!(run(&ids, config(3, 1, d.path()), &full, None).unwrap(), 6);
    assert_eq!(run(&ids, config(3, 1, d.path()), &full, None).unwrap(), 0);
    let part = d.path().join("part.jsonl");
    assert_eq!(run(&ids, config(3, 1, d.path()), &part, Some(4)).unwrap(), 4);
    assert_eq!(run(&ids, config(3, 1, d.path()), &part, None).unwrap(), 2);
    assert_eq!(std::fs::read(&full).unwrap(), std::fs::read(&part).unwrap());

    let l = ExperimentLedger::load(&full).unwrap();
    assert_eq!(l.records.len(), 6);
    for r in &l.records {
        assert!(r.is_consistent(5), "{r:?}");
    }
    let b = l.records.iter().find(|r| r.source_id == "b.c").unwrap();
    assert!(b.success);
    assert_eq!(b.first_iteration_per_stage[&CheckStage::Compiled], 2);
    assert_eq!(l.mean_iterations(), Some(1.5));
    assert!(l.metadata.unwrap().toolchain.contains_key("checker"));
}

#[test]
fn parallel_runs_write_the_same_ledger() {
    let d = tempfile::tempdir().unwrap();
    let perts = [lookup("Identity").unwrap(), lookup("DeMorgan").unwrap(), lookup("CommentTypos").unwrap()];
    let serial = d.path().join("s.jsonl");
    let parallel = d.path().join("p.jsonl");
    run(&perts, config(4, 1, d.path()), &serial, None).unwrap();
    run(&perts, config(4, 3, d.path()), &parallel, None).unwrap();
    assert_eq!(std::fs::read(&serial).unwrap(), std::fs::read(&parallel).unwrap());
}

#[test]
fn changed_config_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let ids = [lookup("Identity").unwrap()];
    let p = d.path().join("l.jsonl");
    run(&ids, config(2, 1, d.path()), &p, None).unwrap();
    let mut cfg = config(2, 1, d.path());
    cfg.max_iterations = 1;
    assert!(matches!(run(&ids, cfg, &p, None), Err(PipelineError::ConfigMismatch { .. })));
}
