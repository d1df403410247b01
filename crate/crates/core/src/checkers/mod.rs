//! The check cascade: compile check, lint check and differential fuzzing of a
//! Rust translation against the original C file.

pub mod harness;
pub mod layout;
mod simulated;
mod toolchain;

pub use harness::{CCall, Target};
pub use simulated::{SimRule, SimVerdict, SimulatedChecker};
pub use toolchain::{CVariant, FuzzOutcome, FuzzerBinary, SideB, ToolchainChecker, VariantVerdict};

use crate::corpus::{CType, FunctionInterface, Scalar, SourceUnit};
use crate::pipeline::ErrorCategory;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckerError {
    #[error("{tool} is not available: {message}")]
    ToolMissing { tool: String, message: String },
    #[error("{tool} version `{found}` does not match pinned `{expected}`")]
    VersionPin { tool: String, expected: String, found: String },
    #[error("invalid checker configuration: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse simulated checker rules: {0}")]
    Rules(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CheckStage {
    Compiled,
    Linted,
    Fuzzed,
}

impl CheckStage {
    pub const ALL: [CheckStage; 3] = [CheckStage::Compiled, CheckStage::Linted, CheckStage::Fuzzed];
}

impl fmt::Display for CheckStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStage::Compiled => "Compiled",
            CheckStage::Linted => "Linted",
            CheckStage::Fuzzed => "Fuzzed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    ValueMismatch,
    RustOnlyRuntimeError,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureKind::ValueMismatch => "value-mismatch",
            FailureKind::RustOnlyRuntimeError => "rust-only-runtime-error",
        })
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

/// An input on which the two sides disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub function: String,
    #[serde(with = "hex_bytes")]
    pub raw_input: Vec<u8>,
    pub rendered_inputs: Vec<(String, String)>,
    pub c_output: Vec<(String, String)>,
    /// Absent for runtime errors that only the Rust side raised.
    pub rust_output: Option<Vec<(String, String)>>,
    pub failure_kind: FailureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    /// File name of the persisted input bytes (`cex-<sha256>.bin`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub stage: CheckStage,
    pub success: bool,
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infra_error: Option<ErrorCategory>,
}

impl CheckReport {
    pub fn pass(stage: CheckStage) -> Self {
        CheckReport { stage, success: true, diagnostics: Vec::new(), counterexample: None, infra_error: None }
    }

    pub fn fail(stage: CheckStage, diagnostics: Vec<String>) -> Self {
        CheckReport { stage, success: false, diagnostics, counterexample: None, infra_error: None }
    }

    pub fn counterexample(cex: Counterexample) -> Self {
        CheckReport {
            stage: CheckStage::Fuzzed,
            success: false,
            diagnostics: Vec::new(),
            counterexample: Some(cex),
            infra_error: None,
        }
    }

    pub fn infra(stage: CheckStage, category: ErrorCategory, message: impl Into<String>) -> Self {
        CheckReport {
            stage,
            success: false,
            diagnostics: vec![message.into()],
            counterexample: None,
            infra_error: Some(category),
        }
    }

    /// Checks the structural invariants of a report.
    pub fn is_consistent(&self) -> bool {
        let cex_ok = self.counterexample.is_none() || (self.stage == CheckStage::Fuzzed && !self.success);
        let infra_ok = !(self.success && self.infra_error.is_some());
        let kind_ok = self
            .counterexample
            .as_ref()
            .is_none_or(|c| c.failure_kind != FailureKind::RustOnlyRuntimeError || c.rust_output.is_none());
        cex_ok && infra_ok && kind_ok
    }
}

/// How one supported C type crosses the foreign-function boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeMapping {
    pub c_type: CType,
    pub ffi_type: String,
    pub conversion: String,
}

fn ffi_scalar(s: Scalar) -> &'static str {
    match s {
        Scalar::Bool => "bool",
        Scalar::Char => "CChar (i8)",
        other => other.rust_ffi(),
    }
}

/// The mapping table for every supported type shape, parameterised by an
/// array length for the array rows.
pub fn type_mappings(array_len: usize) -> Vec<TypeMapping> {
    let mut out = Vec::new();
    for s in Scalar::ALL {
        let ffi = ffi_scalar(s);
        out.push(TypeMapping {
            c_type: CType::Scalar { scalar: s },
            ffi_type: ffi.to_string(),
            conversion: format!("checked TryFrom from {ffi} into the Rust parameter type; result checked back into {ffi}"),
        });
        for is_const in [true, false] {
            out.push(TypeMapping {
                c_type: CType::Pointer { pointee: s, is_const },
                ffi_type: ffi.to_string(),
                conversion: format!(
                    "pointee copied into a {ffi} slot passed as &mut/&/raw pointer/slice of length 1{}",
                    if is_const { "" } else { "; slot copied back after the call" }
                ),
            });
        }
        out.push(TypeMapping {
            c_type: CType::Array { elem: s, len: array_len },
            ffi_type: format!("[{ffi}; {array_len}]"),
            conversion: "array copied into a slot passed as &mut [T; N], slice, Vec or raw pointer; copied back after the call"
                .to_string(),
        });
    }
    for is_const in [true, false] {
        out.push(TypeMapping {
            c_type: CType::Str { is_const },
            ffi_type: "[u8; CAP + 1]".to_string(),
            conversion: "NUL-terminated ASCII buffer passed as &str, String, byte slice, CStr or raw char pointer; owned values written back up to CAP bytes".to_string(),
        });
    }
    out
}

fn same_shape(a: &CType, b: &CType) -> bool {
    match (a, b) {
        (CType::Array { elem: x, .. }, CType::Array { elem: y, .. }) => x == y,
        _ => a == b,
    }
}

/// True when `mappings` covers every type used by `iface`.
pub fn mappings_cover(iface: &FunctionInterface, mappings: &[TypeMapping]) -> bool {
    let mut types: Vec<&CType> = iface.params.iter().filter_map(|p| p.ty.ctype()).collect();
    types.extend(iface.managed_globals().filter_map(|g| g.ty.ctype()));
    types.extend(iface.return_type.ctype());
    types.iter().all(|t| mappings.iter().any(|m| same_shape(&m.c_type, t)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LintSeverity {
    /// Warnings and errors fail the stage.
    #[default]
    Warnings,
    /// Only errors fail the stage.
    #[serde(alias = "warnings-allowed")]
    ErrorsOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuzzConfig {
    /// Fuzzing budget per function.
    pub timeout_secs: u64,
    pub max_input_len: usize,
    /// Allowed float difference in units of least precision; 0 means bit-exact.
    pub float_ulps: u64,
    /// Maximum string length encoded in a fuzz input.
    pub string_cap: usize,
    /// CPU budget for a single call of either side.
    pub per_call_timeout_ms: u64,
    pub seed: u64,
    pub rss_limit_mb: u64,
    /// Keep build directories after a clean verdict.
    pub keep_workdirs: bool,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            timeout_secs: 60,
            max_input_len: 4096,
            float_ulps: 0,
            string_cap: 16,
            per_call_timeout_ms: 1000,
            seed: 1,
            rss_limit_mb: 2048,
            keep_workdirs: false,
        }
    }
}

impl FuzzConfig {
    pub fn validate(&self) -> Result<(), CheckerError> {
        if self.timeout_secs == 0 {
            return Err(CheckerError::Config("fuzz timeout must be positive".into()));
        }
        if self.string_cap == 0 {
            return Err(CheckerError::Config("string capacity must be positive".into()));
        }
        if self.per_call_timeout_ms == 0 {
            return Err(CheckerError::Config("per-call timeout must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToolchainConfig {
    pub rustc: String,
    pub clippy_driver: String,
    pub clang: String,
    pub edition: String,
    pub lint_severity: LintSeverity,
    /// Lints passed as `-A` to both the compiler and the linter.
    pub allowed_lints: Vec<String>,
    pub overflow_checks: bool,
    /// Expected substrings of each tool's `--version` output, keyed by
    /// `rustc`, `clippy` or `clang`.
    pub pins: BTreeMap<String, String>,
    /// Extra `-I` directories for the C side.
    pub include_dirs: Vec<PathBuf>,
}

impl Default for ToolchainConfig {
    fn default() -> Self {
        ToolchainConfig {
            rustc: "rustc".into(),
            clippy_driver: "clippy-driver".into(),
            clang: "clang".into(),
            edition: "2021".into(),
            lint_severity: LintSeverity::Warnings,
            allowed_lints: ["dead_code", "non_snake_case", "non_upper_case_globals", "non_camel_case_types"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            overflow_checks: true,
            pins: BTreeMap::new(),
            include_dirs: Vec::new(),
        }
    }
}

/// A compile / lint / fuzz oracle.
pub trait Checker: Send + Sync {
    /// Tool names and versions, recorded in ledger metadata.
    fn describe(&self) -> BTreeMap<String, String>;
    fn check_compile(&self, rust_source: &str, workdir: &Path) -> CheckReport;
    fn check_lint(&self, rust_source: &str, workdir: &Path) -> CheckReport;
    fn run_differential_fuzz(&self, unit: &SourceUnit, rust_source: &str, workdir: &Path) -> CheckReport;
}

/// Runs the stages in order and stops at the first one that does not succeed.
pub fn run_cascade(checker: &dyn Checker, unit: &SourceUnit, rust_source: &str, workdir: &Path) -> Vec<CheckReport> {
    let mut out = Vec::new();
    for stage in CheckStage::ALL {
        let r = match stage {
            CheckStage::Compiled => checker.check_compile(rust_source, workdir),
            CheckStage::Linted => checker.check_lint(rust_source, workdir),
            CheckStage::Fuzzed => checker.run_differential_fuzz(unit, rust_source, workdir),
        };
        let ok = r.success;
        out.push(r);
        if !ok {
            break;
        }
    }
    out
}

/// Generated sources for one function.
#[derive(Debug, Clone)]
pub struct HarnessSources {
    pub types_header: String,
    pub c_side: String,
    pub driver: String,
    pub rust_shim: String,
}

impl HarnessSources {
    /// The C part as a single listing (header, side wrapper, driver).
    pub fn c_harness_source(&self) -> String {
        format!("/* fz_types.h */\n{}\n/* side_a.c */\n{}\n/* harness.c */\n{}", self.types_header, self.c_side, self.driver)
    }
}

/// Generates the harness for a single function of a file whose file-scope
/// symbols are `renames`.
pub fn generate_harness(
    iface: &FunctionInterface,
    mappings: &[TypeMapping],
    config: &FuzzConfig,
    renames: &[String],
) -> Result<HarnessSources, CheckReport> {
    let setup = |m: String| CheckReport::infra(CheckStage::Fuzzed, ErrorCategory::FuzzingSetup, m);
    if !iface.is_fuzzable() {
        return Err(setup(format!("`{}` cannot be fuzzed: {}", iface.name, iface.unsupported_reasons().join("; "))));
    }
    if !mappings_cover(iface, mappings) {
        return Err(setup(format!("no type mapping for some type used by `{}`", iface.name)));
    }
    let target = Target::new(iface, config.string_cap).ok_or_else(|| setup(format!("`{}` has no input layout", iface.name)))?;
    let call = CCall {
        callee: iface.name.clone(),
        globals: iface.managed_globals().map(|g| g.name.clone()).collect(),
        perm: (0..iface.params.len()).collect(),
    };
    let targets = [target];
    Ok(HarnessSources {
        types_header: harness::types_header(&targets, config.string_cap),
        c_side: harness::c_side_source("a", "fz_a_", "orig.c", renames, &targets, &[call]),
        driver: harness::driver_source(&targets, &["b0".to_string()]),
        rust_shim: harness::rust_shim("b0", &targets, config.string_cap),
    })
}

/// File-scope symbols defined by a C file: functions and non-extern globals.
pub fn file_symbols(text: &str) -> Vec<String> {
    let pu = crate::corpus::parse::parse(text);
    let mut out: Vec<String> = pu.functions.iter().map(|f| f.name.clone()).collect();
    out.extend(pu.globals.iter().filter(|g| !g.is_extern).map(|g| g.name.clone()));
    out.sort();
    out.dedup();
    out
}
