//! Table-driven checker for runs without compilers.

use super::{CheckReport, CheckStage, Checker, CheckerError, Counterexample, FailureKind};
use crate::corpus::SourceUnit;
use crate::pipeline::ErrorCategory;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SimVerdict {
    Fail {
        diagnostic: String,
    },
    Counterexample {
        #[serde(default = "default_kind")]
        kind: FailureKind,
        #[serde(default)]
        detail: Option<String>,
    },
    Infra {
        category: ErrorCategory,
        #[serde(default)]
        message: String,
    },
}

fn default_kind() -> FailureKind {
    FailureKind::ValueMismatch
}

/// Applies `verdict` at `stage` when the Rust source contains `contains`
/// (and, if set, the unit id equals `unit`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRule {
    pub stage: CheckStage,
    pub contains: String,
    #[serde(default)]
    pub unit: Option<String>,
    #[serde(flatten)]
    pub verdict: SimVerdict,
}

impl SimRule {
    pub fn fail(stage: CheckStage, contains: &str, diagnostic: &str) -> Self {
        SimRule {
            stage,
            contains: contains.into(),
            unit: None,
            verdict: SimVerdict::Fail { diagnostic: diagnostic.into() },
        }
    }
}

/// Every stage passes unless a rule matches; the first matching rule wins.
/// Empty sources always fail the compile stage.
#[derive(Debug, Clone, Default)]
pub struct SimulatedChecker {
    pub rules: Vec<SimRule>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RuleFile {
    List(Vec<SimRule>),
    Wrapped { rules: Vec<SimRule> },
}

impl SimulatedChecker {
    pub fn new(rules: Vec<SimRule>) -> Self {
        SimulatedChecker { rules }
    }

    pub fn from_json(text: &str) -> Result<Self, CheckerError> {
        let f: RuleFile = serde_json::from_str(text).map_err(|e| CheckerError::Rules(e.to_string()))?;
        Ok(SimulatedChecker::new(match f {
            RuleFile::List(r) | RuleFile::Wrapped { rules: r } => r,
        }))
    }

    pub fn from_file(path: &Path) -> Result<Self, CheckerError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn verdict(&self, stage: CheckStage, unit: Option<&SourceUnit>, src: &str) -> CheckReport {
        if stage == CheckStage::Compiled && src.trim().is_empty() {
            return CheckReport::fail(stage, vec!["error: the translation is empty".into()]);
        }
        let hit = self.rules.iter().find(|r| {
            r.stage == stage && src.contains(&r.contains) && r.unit.as_deref().is_none_or(|u| unit.is_some_and(|x| x.id == u))
        });
        match hit.map(|r| &r.verdict) {
            None => CheckReport::pass(stage),
            Some(SimVerdict::Fail { diagnostic }) => CheckReport::fail(stage, vec![diagnostic.clone()]),
            Some(SimVerdict::Infra { category, message }) => CheckReport::infra(stage, *category, message.clone()),
            Some(SimVerdict::Counterexample { kind, detail }) => {
                let function = unit.and_then(|u| u.fuzz_targets().first().map(|f| f.name.clone())).unwrap_or_default();
                let rust_output = match kind {
                    FailureKind::ValueMismatch => Some(vec![("return".to_string(), "1".to_string())]),
                    FailureKind::RustOnlyRuntimeError => None,
                };
                CheckReport::counterexample(Counterexample {
                    function,
                    raw_input: vec![0; 4],
                    rendered_inputs: vec![("x".into(), "0".into())],
                    c_output: vec![("return".into(), "0".into())],
                    rust_output,
                    failure_kind: *kind,
                    detail: detail.clone(),
                    artifact: None,
                })
            }
        }
    }
}

impl Checker for SimulatedChecker {
    fn describe(&self) -> BTreeMap<String, String> {
        BTreeMap::from([("checker".to_string(), format!("simulated ({} rules)", self.rules.len()))])
    }

    fn check_compile(&self, rust_source: &str, _workdir: &Path) -> CheckReport {
        self.verdict(CheckStage::Compiled, None, rust_source)
    }

    fn check_lint(&self, rust_source: &str, _workdir: &Path) -> CheckReport {
        self.verdict(CheckStage::Linted, None, rust_source)
    }

    fn run_differential_fuzz(&self, unit: &SourceUnit, rust_source: &str, _workdir: &Path) -> CheckReport {
        self.verdict(CheckStage::Fuzzed, Some(unit), rust_source)
    }
}
