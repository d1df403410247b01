//! Checker backed by real tools: `rustc`, `clippy-driver`, and clang with
//! libFuzzer for differential fuzzing.

use super::harness::{self, CCall, Target};
use super::layout::decode_input;
use super::{file_symbols, CheckReport, CheckStage, Checker, CheckerError, Counterexample, FailureKind, FuzzConfig, LintSeverity, ToolchainConfig};
use crate::corpus::SourceUnit;
use crate::pipeline::ErrorCategory;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::time::{Duration, Instant};

fn sha_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn probe(program: &str) -> Result<String, String> {
    let out = Command::new(program)
        .arg("--version")
        .stdin(Stdio::null())
        .output()
        .map_err(|e| format!("cannot run `{program}`: {e}"))?;
    if !out.status.success() {
        return Err(format!("`{program} --version` exited with {}", out.status));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    Ok(text.lines().find(|l| !l.trim().is_empty()).unwrap_or("").trim().to_string())
}

/// A perturbed copy of a C file checked against the original.
#[derive(Debug, Clone, Default)]
pub struct CVariant {
    pub text: String,
    /// Original name to renamed symbol (functions and globals).
    pub symbol_map: BTreeMap<String, String>,
    /// Per function, `order[i]` is the original index of the parameter now at position `i`.
    pub param_orders: BTreeMap<String, Vec<usize>>,
}

/// What the fuzzer compares against the original C file.
#[derive(Debug, Clone)]
pub enum SideB {
    Rust(String),
    C(Vec<CVariant>),
}

/// A linked fuzzer executable covering every fuzz target of one file.
#[derive(Debug, Clone)]
pub struct FuzzerBinary {
    pub dir: PathBuf,
    pub exe: PathBuf,
    pub targets: Vec<Target>,
    pub variants: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FuzzOutcome {
    Clean,
    Counterexample { variant: usize, cex: Box<Counterexample> },
    Failed { category: ErrorCategory, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum VariantVerdict {
    EquivalentWithinBudget,
    Counterexample(Box<Counterexample>),
    CompileFailure(String),
}

impl VariantVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            VariantVerdict::EquivalentWithinBudget => "equivalent-within-budget",
            VariantVerdict::Counterexample(_) => "counterexample",
            VariantVerdict::CompileFailure(_) => "compile-failure",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct CexBlock {
    kind: String,
    function: String,
    variant: usize,
    inputs: Vec<(String, String)>,
    c_out: Vec<(String, String)>,
    r_out: Vec<(String, String)>,
    detail: Option<String>,
}

fn split_kv(s: &str) -> (String, String) {
    match s.split_once('=') {
        Some((k, v)) => (k.to_string(), v.to_string()),
        None => (s.to_string(), String::new()),
    }
}

fn parse_cex_block(stderr: &str) -> Option<CexBlock> {
    let start = stderr.rfind("FZ-CEX ")?;
    let mut lines = stderr[start..].lines();
    let head = lines.next()?;
    let mut b = CexBlock::default();
    for part in head.split_whitespace().skip(1) {
        let (k, v) = split_kv(part);
        match k.as_str() {
            "kind" => b.kind = v,
            "fn" => b.function = v,
            "variant" => b.variant = v.parse().unwrap_or(0),
            _ => {}
        }
    }
    for l in lines {
        if l == "FZ-END" {
            break;
        } else if let Some(r) = l.strip_prefix("FZ-IN ") {
            b.inputs.push(split_kv(r));
        } else if let Some(r) = l.strip_prefix("FZ-C ") {
            b.c_out.push(split_kv(r));
        } else if let Some(r) = l.strip_prefix("FZ-R ") {
            b.r_out.push(split_kv(r));
        } else if let Some(r) = l.strip_prefix("FZ-DETAIL ") {
            b.detail = Some(r.to_string());
        }
    }
    Some(b)
}

fn tail(text: &str, lines: usize) -> String {
    let all: Vec<&str> = text.lines().collect();
    all[all.len().saturating_sub(lines)..].join("\n")
}

/// Rendered compiler diagnostics from `--error-format=json` output, as
/// (level, rendered text). Summary lines are dropped.
fn json_diagnostics(stderr: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for line in stderr.lines().filter(|l| l.starts_with('{')) {
        let Ok(v) = serde_json::from_str::<serde_json::Value>(line) else { continue };
        if v.get("$message_type").and_then(|m| m.as_str()).is_some_and(|m| m != "diagnostic") {
            continue;
        }
        let level = v["level"].as_str().unwrap_or("").to_string();
        let message = v["message"].as_str().unwrap_or("");
        if message.starts_with("aborting due to") || message.contains("warning emitted") || message.contains("warnings emitted") {
            continue;
        }
        if !matches!(level.as_str(), "error" | "warning" | "error: internal compiler error") {
            continue;
        }
        let rendered = v["rendered"].as_str().unwrap_or(message).trim_end().to_string();
        out.push((level, rendered));
    }
    out
}

enum RunEnd {
    Exited(ExitStatus),
    Killed,
}

fn run_with_deadline(mut cmd: Command, dir: &Path, tag: &str, deadline: Duration) -> std::io::Result<(RunEnd, String)> {
    let err_path = dir.join(format!("{tag}.stderr"));
    let out_path = dir.join(format!("{tag}.stdout"));
    cmd.stdin(Stdio::null()).stdout(fs::File::create(&out_path)?).stderr(fs::File::create(&err_path)?);
    let mut child = cmd.spawn()?;
    let start = Instant::now();
    let end = loop {
        if let Some(st) = child.try_wait()? {
            break RunEnd::Exited(st);
        }
        if start.elapsed() > deadline {
            let _ = child.kill();
            let _ = child.wait();
            break RunEnd::Killed;
        }
        std::thread::sleep(Duration::from_millis(20));
    };
    let bytes = fs::read(&err_path)?;
    Ok((end, String::from_utf8_lossy(&bytes).into_owned()))
}

#[derive(Debug, Clone)]
pub struct ToolchainChecker {
    cfg: ToolchainConfig,
    fuzz: FuzzConfig,
    versions: BTreeMap<String, Result<String, String>>,
}

impl ToolchainChecker {
    /// Probes the configured tools; missing tools surface later as
    /// infrastructure errors in the reports.
    pub fn new(cfg: ToolchainConfig, fuzz: FuzzConfig) -> Self {
        let versions = BTreeMap::from([
            ("rustc".to_string(), probe(&cfg.rustc)),
            ("clippy".to_string(), probe(&cfg.clippy_driver)),
            ("clang".to_string(), probe(&cfg.clang)),
        ]);
        ToolchainChecker { cfg, fuzz, versions }
    }

    pub fn config(&self) -> &ToolchainConfig {
        &self.cfg
    }

    pub fn fuzz_config(&self) -> &FuzzConfig {
        &self.fuzz
    }

    pub fn set_fuzz_config(&mut self, fuzz: FuzzConfig) {
        self.fuzz = fuzz;
    }

    /// Fails if a tool is missing or does not match its pin.
    pub fn verify(&self) -> Result<(), CheckerError> {
        self.fuzz.validate()?;
        for (tool, v) in &self.versions {
            let found = v.as_ref().map_err(|e| CheckerError::ToolMissing { tool: tool.clone(), message: e.clone() })?;
            if let Some(expected) = self.cfg.pins.get(tool) {
                if !found.contains(expected.as_str()) {
                    return Err(CheckerError::VersionPin { tool: tool.clone(), expected: expected.clone(), found: found.clone() });
                }
            }
        }
        Ok(())
    }

    fn tool_ok(&self, tool: &str) -> Result<(), String> {
        match self.versions.get(tool) {
            Some(Ok(_)) => Ok(()),
            Some(Err(e)) => Err(e.clone()),
            None => Err(format!("unknown tool {tool}")),
        }
    }

    fn scratch(&self, workdir: &Path, tag: &str, parts: &[&[u8]]) -> std::io::Result<PathBuf> {
        let dir = workdir.join(format!("{tag}-{}", &sha_hex(parts)[..16]));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn cleanup(&self, dir: &Path) {
        if !self.fuzz.keep_workdirs {
            let _ = fs::remove_dir_all(dir);
        }
    }

    fn rust_flags(&self) -> Vec<String> {
        let mut a = vec!["--edition".to_string(), self.cfg.edition.clone()];
        if self.cfg.overflow_checks {
            a.extend(["-C".to_string(), "overflow-checks=on".to_string()]);
        }
        for l in &self.cfg.allowed_lints {
            a.extend(["-A".to_string(), l.clone()]);
        }
        a
    }

    fn rust_check(&self, stage: CheckStage, src: &str, workdir: &Path) -> CheckReport {
        if src.trim().is_empty() {
            return CheckReport::fail(stage, vec!["error: the translation is empty".into()]);
        }
        let (tool, program) = match stage {
            CheckStage::Linted => ("clippy", &self.cfg.clippy_driver),
            _ => ("rustc", &self.cfg.rustc),
        };
        if let Err(e) = self.tool_ok(tool) {
            return CheckReport::infra(stage, ErrorCategory::TranslationSystem, e);
        }
        let tag = if stage == CheckStage::Linted { "lint" } else { "compile" };
        let dir = match self.scratch(workdir, tag, &[src.as_bytes()]) {
            Ok(d) => d,
            Err(e) => return CheckReport::infra(stage, ErrorCategory::TranslationSystem, format!("cannot create {tag} directory: {e}")),
        };
        if let Err(e) = fs::write(dir.join("translation.rs"), src) {
            return CheckReport::infra(stage, ErrorCategory::TranslationSystem, format!("cannot write translation: {e}"));
        }
        let mut cmd = Command::new(program);
        cmd.current_dir(&dir)
            .args(self.rust_flags())
            .args(["--crate-type", "staticlib", "--crate-name", "translation", "--emit=metadata", "--error-format=json"])
            .args(["-o", "translation.rmeta", "translation.rs"])
            .stdin(Stdio::null());
        let out = match cmd.output() {
            Ok(o) => o,
            Err(e) => return CheckReport::infra(stage, ErrorCategory::TranslationSystem, format!("cannot run {program}: {e}")),
        };
        let stderr = String::from_utf8_lossy(&out.stderr);
        let diags = json_diagnostics(&stderr);
        let failing: Vec<String> = diags
            .into_iter()
            .filter(|(level, _)| {
                level.starts_with("error") || (stage == CheckStage::Linted && self.cfg.lint_severity == LintSeverity::Warnings)
            })
            .map(|(_, r)| r)
            .collect();
        let report = if out.status.success() && failing.is_empty() {
            CheckReport::pass(stage)
        } else if failing.is_empty() {
            CheckReport::fail(stage, vec![tail(&stderr, 40)])
        } else {
            CheckReport::fail(stage, failing)
        };
        if report.success {
            self.cleanup(&dir);
        }
        report
    }

    fn include_args(&self, unit_id: &str) -> Vec<String> {
        let mut out = Vec::new();
        for d in &self.cfg.include_dirs {
            out.push(format!("-I{}", d.display()));
            if let Some(parent) = Path::new(unit_id).parent().filter(|p| !p.as_os_str().is_empty()) {
                let sub = d.join(parent);
                if sub.is_dir() {
                    out.push(format!("-I{}", sub.display()));
                }
            }
        }
        out
    }

    fn clang_compile(&self, dir: &Path, src: &str, obj: &str, includes: &[String]) -> Result<(), String> {
        let out = Command::new(&self.cfg.clang)
            .current_dir(dir)
            .args(["-c", "-O1", "-g0", "-fsanitize=fuzzer-no-link", "-w", "-I."])
            .args(includes)
            .args([src, "-o", obj])
            .stdin(Stdio::null())
            .output()
            .map_err(|e| format!("cannot run clang: {e}"))?;
        if out.status.success() {
            Ok(())
        } else {
            Err(format!("compiling {src} failed:\n{}", tail(&String::from_utf8_lossy(&out.stderr), 40)))
        }
    }

    /// Writes and builds the fuzzer for every fuzz target of `unit` in `dir`.
    pub fn build_fuzzer(&self, dir: &Path, unit: &SourceUnit, side_b: &SideB) -> Result<FuzzerBinary, String> {
        for tool in ["clang", "rustc"] {
            self.tool_ok(tool)?;
        }
        let cap = self.fuzz.string_cap;
        let mut targets = Vec::new();
        for f in unit.fuzz_targets() {
            let t = Target::new(f, cap).ok_or_else(|| format!("`{}` cannot be fuzzed: {}", f.name, f.unsupported_reasons().join("; ")))?;
            if t.input_len() > self.fuzz.max_input_len {
                return Err(format!("inputs of `{}` need {} bytes, more than the limit of {}", f.name, t.input_len(), self.fuzz.max_input_len));
            }
            targets.push(t);
        }
        if targets.is_empty() {
            return Err(format!("{} defines no function to fuzz", unit.id));
        }
        fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        let io = |e: std::io::Error| format!("cannot write harness files: {e}");
        let includes = self.include_args(&unit.id);
        fs::write(dir.join("fz_types.h"), harness::types_header(&targets, cap)).map_err(io)?;
        fs::write(dir.join("orig.c"), &unit.text).map_err(io)?;
        let identity: Vec<CCall> = targets
            .iter()
            .map(|t| CCall {
                callee: t.iface.name.clone(),
                globals: t.iface.managed_globals().map(|g| g.name.clone()).collect(),
                perm: (0..t.iface.params.len()).collect(),
            })
            .collect();
        let renames = file_symbols(&unit.text);
        fs::write(dir.join("side_a.c"), harness::c_side_source("a", "fz_a_", "orig.c", &renames, &targets, &identity)).map_err(io)?;
        self.clang_compile(dir, "side_a.c", "side_a.o", &includes)?;
        let mut objects = vec!["side_a.o".to_string()];
        let sides: Vec<String>;
        match side_b {
            SideB::Rust(src) => {
                sides = vec!["b0".to_string()];
                let full = format!("{src}{}", harness::rust_shim("b0", &targets, cap));
                fs::write(dir.join("fz_rust.rs"), full).map_err(io)?;
                let mut cmd = Command::new(&self.cfg.rustc);
                cmd.current_dir(dir)
                    .args(["--edition", &self.cfg.edition, "--crate-type", "staticlib", "--crate-name", "fz_rust"])
                    .args(["-C", "opt-level=1", "-C", "debuginfo=0", "-C", "passes=sancov-module"])
                    .args([
                        "-C",
                        "llvm-args=-sanitizer-coverage-level=3",
                        "-C",
                        "llvm-args=-sanitizer-coverage-inline-8bit-counters",
                        "-C",
                        "llvm-args=-sanitizer-coverage-pc-table",
                        "-C",
                        "llvm-args=-sanitizer-coverage-trace-compares",
                    ])
                    .args(["--cap-lints", "allow", "--error-format=json"]);
                if self.cfg.overflow_checks {
                    cmd.args(["-C", "overflow-checks=on"]);
                }
                let out = cmd.args(["-o", "libfz_rust.a", "fz_rust.rs"]).stdin(Stdio::null()).output().map_err(|e| format!("cannot run rustc: {e}"))?;
                if !out.status.success() {
                    let stderr = String::from_utf8_lossy(&out.stderr);
                    let errs: Vec<String> = json_diagnostics(&stderr).into_iter().filter(|(l, _)| l.starts_with("error")).map(|(_, r)| r).collect();
                    return Err(format!(
                        "the fuzzing shim does not build against the translation (expected `pub fn` items with the C names and compatible types):\n{}",
                        if errs.is_empty() { tail(&stderr, 40) } else { errs.join("\n") }
                    ));
                }
                objects.push("libfz_rust.a".to_string());
            }
            SideB::C(variants) => {
                sides = (0..variants.len()).map(|j| format!("b{j}")).collect();
                for (j, v) in variants.iter().enumerate() {
                    let calls: Vec<CCall> = targets
                        .iter()
                        .map(|t| {
                            let map = |n: &str| v.symbol_map.get(n).cloned().unwrap_or_else(|| n.to_string());
                            CCall {
                                callee: map(&t.iface.name),
                                globals: t.iface.managed_globals().map(|g| map(&g.name)).collect(),
                                perm: v.param_orders.get(&t.iface.name).cloned().unwrap_or_else(|| (0..t.iface.params.len()).collect()),
                            }
                        })
                        .collect();
                    let file = format!("variant_{j}.c");
                    fs::write(dir.join(&file), &v.text).map_err(io)?;
                    let side = format!("b{j}");
                    let wrapper = harness::c_side_source(&side, &format!("fz_{side}_"), &file, &file_symbols(&v.text), &targets, &calls);
                    fs::write(dir.join(format!("side_{side}.c")), wrapper).map_err(io)?;
                    self.clang_compile(dir, &format!("side_{side}.c"), &format!("side_{side}.o"), &includes)?;
                    objects.push(format!("side_{side}.o"));
                }
            }
        }
        fs::write(dir.join("harness.c"), harness::driver_source(&targets, &sides)).map_err(io)?;
        let out = Command::new(&self.cfg.clang)
            .current_dir(dir)
            .args(["-fsanitize=fuzzer", "-O1", "-g0", "-w", "-I.", "harness.c"])
            .args(&objects)
            .args(["-lpthread", "-ldl", "-lm", "-o", "fuzzer"])
            .stdin(Stdio::null())
            .output()
            .map_err(|e| format!("cannot run clang: {e}"))?;
        if !out.status.success() {
            return Err(format!("linking the fuzzer failed:\n{}", tail(&String::from_utf8_lossy(&out.stderr), 40)));
        }
        Ok(FuzzerBinary { dir: dir.to_path_buf(), exe: dir.join("fuzzer"), variants: sides.len(), targets })
    }

    fn fuzzer_command(&self, bin: &FuzzerBinary, k: usize, disabled: u64) -> Command {
        let mut cmd = Command::new(&bin.exe);
        cmd.current_dir(&bin.dir)
            .env("FZ_FUNC", k.to_string())
            .env("FZ_DISABLED", disabled.to_string())
            .env("FZ_CALL_MS", self.fuzz.per_call_timeout_ms.to_string())
            .env("FZ_ULPS", self.fuzz.float_ulps.to_string())
            .env("RUST_BACKTRACE", "0");
        cmd
    }

    fn to_counterexample(&self, bin: &FuzzerBinary, k: usize, b: CexBlock, raw: Option<Vec<u8>>) -> Counterexample {
        let target = &bin.targets[k];
        let failure_kind =
            if b.kind == "rust-only-runtime-error" { FailureKind::RustOnlyRuntimeError } else { FailureKind::ValueMismatch };
        let rendered_inputs = match &raw {
            Some(bytes) => decode_input(&target.fields, bytes, self.fuzz.string_cap)
                .into_iter()
                .map(|(n, v)| (n, v.to_string()))
                .collect(),
            None => b.inputs.clone(),
        };
        let rust_output = match failure_kind {
            FailureKind::RustOnlyRuntimeError => None,
            FailureKind::ValueMismatch if b.r_out.is_empty() => {
                Some(vec![("note".to_string(), b.detail.clone().unwrap_or_else(|| "no output".to_string()))])
            }
            FailureKind::ValueMismatch => Some(b.r_out.clone()),
        };
        let raw_input = raw.unwrap_or_default();
        let artifact = if raw_input.is_empty() && target.input_len() > 0 {
            None
        } else {
            let name = format!("cex-{}.bin", hex::encode(Sha256::digest(&raw_input)));
            fs::write(bin.dir.join(&name), &raw_input).ok().map(|_| name)
        };
        Counterexample {
            function: target.iface.name.clone(),
            raw_input,
            rendered_inputs,
            c_output: b.c_out,
            rust_output,
            failure_kind,
            detail: b.detail,
            artifact,
        }
    }

    /// Fuzzes target `k` for `budget`, skipping side-B variants in the `disabled` mask.
    pub fn fuzz_function(&self, bin: &FuzzerBinary, k: usize, budget: Duration, disabled: u64) -> FuzzOutcome {
        let target = &bin.targets[k];
        let art = bin.dir.join(format!("art-{k}"));
        let _ = fs::remove_dir_all(&art);
        if let Err(e) = fs::create_dir_all(&art) {
            return FuzzOutcome::Failed { category: ErrorCategory::FuzzingSetup, message: e.to_string() };
        }
        let secs = budget.as_secs().max(1);
        let mut cmd = self.fuzzer_command(bin, k, disabled);
        if target.input_len() == 0 {
            cmd.arg("-runs=16");
        } else {
            cmd.arg(format!("-max_total_time={secs}"));
        }
        cmd.args([
            format!("-max_len={}", target.input_len().max(1)),
            format!("-seed={}", self.fuzz.seed.clamp(1, u32::MAX as u64)),
            format!("-timeout={}", self.fuzz.per_call_timeout_ms * 2 / 1000 + 5),
            format!("-rss_limit_mb={}", self.fuzz.rss_limit_mb),
            format!("-artifact_prefix=art-{k}/"),
            "-print_final_stats=0".to_string(),
            "-close_fd_mask=1".to_string(),
        ]);
        let deadline = Duration::from_secs(secs + 60);
        let (end, stderr) = match run_with_deadline(cmd, &bin.dir, &format!("fuzz-{k}"), deadline) {
            Ok(r) => r,
            Err(e) => return FuzzOutcome::Failed { category: ErrorCategory::FuzzingSetup, message: format!("cannot run the fuzzer: {e}") },
        };
        if let Some(block) = parse_cex_block(&stderr) {
            let raw = stderr
                .lines()
                .filter_map(|l| l.split_once("Test unit written to ").map(|(_, p)| p.trim().to_string()))
                .next_back()
                .and_then(|p| fs::read(bin.dir.join(p)).ok());
            let variant = block.variant;
            let cex = self.to_counterexample(bin, k, block, raw);
            return FuzzOutcome::Counterexample { variant, cex: Box::new(cex) };
        }
        match end {
            RunEnd::Exited(st) if st.success() => FuzzOutcome::Clean,
            RunEnd::Exited(st) => FuzzOutcome::Failed {
                category: ErrorCategory::FuzzingException,
                message: format!("fuzzer for `{}` exited with {st}:\n{}", target.iface.name, tail(&stderr, 30)),
            },
            RunEnd::Killed => FuzzOutcome::Failed {
                category: ErrorCategory::FuzzingException,
                message: format!("fuzzer for `{}` did not finish within {}s and was killed", target.iface.name, deadline.as_secs()),
            },
        }
    }

    /// Runs a single input through target `k`; returns the counterexample it triggers, if any.
    pub fn replay(&self, bin: &FuzzerBinary, k: usize, input: &[u8]) -> Result<Option<Counterexample>, String> {
        let name = format!("replay-{}.bin", &sha_hex(&[input])[..16]);
        fs::write(bin.dir.join(&name), input).map_err(|e| e.to_string())?;
        let mut cmd = self.fuzzer_command(bin, k, 0);
        cmd.arg("-close_fd_mask=1").arg(&name);
        let (end, stderr) = run_with_deadline(cmd, &bin.dir, &format!("replay-{k}"), Duration::from_secs(60)).map_err(|e| e.to_string())?;
        if let Some(block) = parse_cex_block(&stderr) {
            return Ok(Some(self.to_counterexample(bin, k, block, Some(input.to_vec()))));
        }
        match end {
            RunEnd::Exited(st) if st.success() => Ok(None),
            _ => Err(format!("replay failed:\n{}", tail(&stderr, 20))),
        }
    }

    /// Runs one input through target `k` and returns the outputs of side A and
    /// the first side B, as printed by the harness.
    pub fn trace(&self, bin: &FuzzerBinary, k: usize, input: &[u8]) -> Result<(Vec<(String, String)>, Vec<(String, String)>), String> {
        let name = format!("trace-{}.bin", &sha_hex(&[input])[..16]);
        fs::write(bin.dir.join(&name), input).map_err(|e| e.to_string())?;
        let mut cmd = self.fuzzer_command(bin, k, 0);
        cmd.env("FZ_TRACE", "1").arg("-close_fd_mask=1").arg(&name);
        let (end, stderr) = run_with_deadline(cmd, &bin.dir, &format!("trace-{k}"), Duration::from_secs(60)).map_err(|e| e.to_string())?;
        if !matches!(end, RunEnd::Exited(st) if st.success()) {
            return Err(format!("trace run failed:\n{}", tail(&stderr, 20)));
        }
        let grab = |tag: &str| stderr.lines().filter_map(|l| l.strip_prefix(tag)).map(split_kv).collect::<Vec<_>>();
        Ok((grab("FZ-TRACE-C "), grab("FZ-TRACE-R ")))
    }

    /// Differentially fuzzes each perturbed variant against the original C
    /// file. All variants share one fuzzer; a variant that produces a
    /// counterexample is disabled for the rest of the budget.
    pub fn self_check_variants(&self, original: &SourceUnit, variants: &[CVariant], workdir: &Path) -> Result<Vec<VariantVerdict>, String> {
        let mut verdicts = vec![VariantVerdict::EquivalentWithinBudget; variants.len()];
        let mut live = Vec::new();
        let dir = self
            .scratch(workdir, "selfcheck", &[original.text.as_bytes(), &(variants.len() as u64).to_le_bytes()])
            .map_err(|e| e.to_string())?;
        let includes = self.include_args(&original.id);
        for (j, v) in variants.iter().enumerate() {
            if v.text == original.text && v.symbol_map.is_empty() && v.param_orders.is_empty() {
                continue;
            }
            let file = format!("syntax_{j}.c");
            fs::write(dir.join(&file), &v.text).map_err(|e| e.to_string())?;
            let out = Command::new(&self.cfg.clang)
                .current_dir(&dir)
                .args(["-fsyntax-only", "-w"])
                .args(&includes)
                .arg(&file)
                .output()
                .map_err(|e| format!("cannot run clang: {e}"))?;
            if out.status.success() {
                live.push(j);
            } else {
                verdicts[j] = VariantVerdict::CompileFailure(tail(&String::from_utf8_lossy(&out.stderr), 40));
            }
        }
        if !original.is_fuzzable() {
            return Err(format!("{} cannot be fuzzed", original.id));
        }
        for chunk in live.chunks(64) {
            let vs: Vec<CVariant> = chunk.iter().map(|&j| variants[j].clone()).collect();
            let bin = self.build_fuzzer(&dir.join(format!("bin-{}", chunk[0])), original, &SideB::C(vs))?;
            for k in 0..bin.targets.len() {
                let mut disabled: u64 = 0;
                for (i, &j) in chunk.iter().enumerate() {
                    if verdicts[j] != VariantVerdict::EquivalentWithinBudget {
                        disabled |= 1 << i;
                    }
                }
                let start = Instant::now();
                let budget = Duration::from_secs(self.fuzz.timeout_secs);
                while disabled.count_ones() < chunk.len() as u32 {
                    let left = budget.saturating_sub(start.elapsed());
                    if left < Duration::from_secs(1) {
                        break;
                    }
                    match self.fuzz_function(&bin, k, left, disabled) {
                        FuzzOutcome::Clean => break,
                        FuzzOutcome::Counterexample { variant, cex } => {
                            disabled |= 1 << variant;
                            verdicts[chunk[variant]] = VariantVerdict::Counterexample(cex);
                        }
                        FuzzOutcome::Failed { message, .. } => return Err(message),
                    }
                }
            }
        }
        if verdicts.iter().all(|v| !matches!(v, VariantVerdict::Counterexample(_))) {
            self.cleanup(&dir);
        }
        Ok(verdicts)
    }
}

impl Checker for ToolchainChecker {
    fn describe(&self) -> BTreeMap<String, String> {
        self.versions
            .iter()
            .map(|(k, v)| (k.clone(), v.clone().unwrap_or_else(|e| format!("unavailable: {e}"))))
            .collect()
    }

    fn check_compile(&self, rust_source: &str, workdir: &Path) -> CheckReport {
        self.rust_check(CheckStage::Compiled, rust_source, workdir)
    }

    fn check_lint(&self, rust_source: &str, workdir: &Path) -> CheckReport {
        self.rust_check(CheckStage::Linted, rust_source, workdir)
    }

    fn run_differential_fuzz(&self, unit: &SourceUnit, rust_source: &str, workdir: &Path) -> CheckReport {
        let stage = CheckStage::Fuzzed;
        if !unit.is_fuzzable() {
            let reasons: Vec<String> = unit.fuzz_targets().iter().flat_map(|f| f.unsupported_reasons()).collect();
            let msg = if reasons.is_empty() { format!("{} defines no function to fuzz", unit.id) } else { reasons.join("; ") };
            return CheckReport::infra(stage, ErrorCategory::FuzzingSetup, msg);
        }
        let dir = match self.scratch(workdir, "fuzz", &[unit.text.as_bytes(), rust_source.as_bytes()]) {
            Ok(d) => d,
            Err(e) => return CheckReport::infra(stage, ErrorCategory::FuzzingSetup, e.to_string()),
        };
        let bin = match self.build_fuzzer(&dir, unit, &SideB::Rust(rust_source.to_string())) {
            Ok(b) => b,
            Err(e) => return CheckReport::infra(stage, ErrorCategory::FuzzingSetup, e),
        };
        for k in 0..bin.targets.len() {
            match self.fuzz_function(&bin, k, Duration::from_secs(self.fuzz.timeout_secs), 0) {
                FuzzOutcome::Clean => {}
                FuzzOutcome::Counterexample { cex, .. } => return CheckReport::counterexample(*cex),
                FuzzOutcome::Failed { category, message } => return CheckReport::infra(stage, category, message),
            }
        }
        self.cleanup(&dir);
        CheckReport::pass(stage)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_cex_block() {
        let s = "INFO: noise\nFZ-CEX kind=value-mismatch fn=inc variant=0\nFZ-IN x=5\nFZ-C return=6\nFZ-R return=7\nFZ-END\n==1== ERROR: deadly signal\n";
        let b = parse_cex_block(s).unwrap();
        assert_eq!(b.function, "inc");
        assert_eq!(b.kind, "value-mismatch");
        assert_eq!(b.inputs, vec![("x".to_string(), "5".to_string())]);
        assert_eq!(b.r_out, vec![("return".to_string(), "7".to_string())]);
        assert!(parse_cex_block("no block here").is_none());
    }

    #[test]
    fn filters_summary_diagnostics() {
        let s = r#"{"$message_type":"diagnostic","message":"cannot find value `b` in this scope","level":"error","rendered":"error[E0425]: cannot find value `b`\n"}
{"$message_type":"diagnostic","message":"aborting due to 1 previous error","level":"error","rendered":"error: aborting due to 1 previous error\n"}
{"$message_type":"diagnostic","message":"For more information about this error, try `rustc --explain E0425`.","level":"failure-note","rendered":"x"}"#;
        let d = json_diagnostics(s);
        assert_eq!(d.len(), 1);
        assert!(d[0].1.contains("cannot find value `b`"));
    }

    #[test]
    fn missing_tool_is_infra_error() {
        let cfg = ToolchainConfig { rustc: "/nonexistent/rustc".into(), ..ToolchainConfig::default() };
        let c = ToolchainChecker::new(cfg, FuzzConfig::default());
        let dir = tempfile::tempdir().unwrap();
        let r = c.check_compile("pub fn f() {}", dir.path());
        assert_eq!(r.infra_error, Some(ErrorCategory::TranslationSystem));
        assert!(c.verify().is_err());
    }
}
