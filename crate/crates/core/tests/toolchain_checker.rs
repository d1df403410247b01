//! Differential fuzzing with the real toolchain. Skipped when rustc, clippy or
//! clang with libFuzzer are not installed.

use std::path::Path;
use std::sync::Mutex;
use transloop::checkers::{CheckStage, Checker, FailureKind, FuzzConfig, LintSeverity, SideB, ToolchainChecker, ToolchainConfig};
use transloop::corpus::SourceUnit;
use transloop::pipeline::ErrorCategory;

static SERIAL: Mutex<()> = Mutex::new(());

fn checker(timeout_secs: u64) -> Option<ToolchainChecker> {
    let c = ToolchainChecker::new(ToolchainConfig::default(), FuzzConfig { timeout_secs, ..FuzzConfig::default() });
    match c.verify() {
        Ok(()) => Some(c),
        Err(e) => {
            eprintln!("skipping: {e}");
            None
        }
    }
}

fn unit(text: &str) -> SourceUnit {
    SourceUnit::from_text("t.c", "test", text)
}

fn fuzz(c: &ToolchainChecker, c_src: &str, rust: &str, dir: &Path) -> transloop::checkers::CheckReport {
    c.run_differential_fuzz(&unit(c_src), rust, dir)
}

#[test]
fn compile_check_accepts_and_rejects() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let Some(c) = checker(5) else { return };
    let d = tempfile::tempdir().unwrap();
    assert!(c.check_compile("pub fn add(a: i32, b: i32) -> i32 { a + b }", d.path()).success);
    let r = c.check_compile("pub fn add(a: i32) -> i32 { a + b }", d.path());
    assert!(!r.success && r.infra_error.is_none());
    assert!(r.diagnostics.iter().any(|m| m.contains("`b`")), "{:?}", r.diagnostics);
    assert!(!r.diagnostics.iter().any(|m| m.contains("aborting due to")));
    assert!(!c.check_compile("", d.path()).success);
}

#[test]
fn lint_check_respects_severity() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let Some(c) = checker(5) else { return };
    let d = tempfile::tempdir().unwrap();
    let src = "pub fn len(s: &String) -> usize { let t = s.clone(); t.len() }\n";
    assert!(c.check_compile(src, d.path()).success);
    let r = c.check_lint(src, d.path());
    assert!(!r.success);
    assert!(r.diagnostics.iter().any(|m| m.contains("clippy::")), "{:?}", r.diagnostics);
    assert!(c.check_lint("pub fn add(a: i32, b: i32) -> i32 { a + b }\n", d.path()).success);
    let relaxed = ToolchainChecker::new(
        ToolchainConfig { lint_severity: LintSeverity::ErrorsOnly, ..ToolchainConfig::default() },
        FuzzConfig::default(),
    );
    assert!(relaxed.check_lint(src, d.path()).success);
}

#[test]
fn planted_bug_is_found_and_replays() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let Some(c) = checker(10) else { return };
    let d = tempfile::tempdir().unwrap();
    let u = unit("int inc(int x) { return x + 1; }\n");
    let rust = "pub fn inc(x: i32) -> i32 { x.wrapping_add(2) }\n";
    let r = c.run_differential_fuzz(&u, rust, d.path());
    let cex = r.counterexample.clone().unwrap_or_else(|| panic!("{r:?}"));
    assert_eq!(cex.failure_kind, FailureKind::ValueMismatch);
    assert!(cex.raw_input.len() <= 4);
    let dir = d.path().join("replay");
    let bin = c.build_fuzzer(&dir, &u, &SideB::Rust(rust.into())).unwrap();
    let again = c.replay(&bin, 0, &cex.raw_input).unwrap().expect("replay reproduces");
    assert_eq!(again.c_output, cex.c_output);
    assert_eq!(again.rust_output, cex.rust_output);
}

#[test]
fn both_sides_trapping_is_not_a_counterexample() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let Some(c) = checker(5) else { return };
    let d = tempfile::tempdir().unwrap();
    let r = fuzz(&c, "int quot(int a, int b) { return a / b; }\n", "pub fn quot(a: i32, b: i32) -> i32 { a / b }\n", d.path());
    assert!(r.success, "{r:?}");
}

#[test]
fn rust_only_panic_is_reported() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let Some(c) = checker(10) else { return };
    let d = tempfile::tempdir().unwrap();
    let r = fuzz(
        &c,
        "int pick(int i) { int t[4] = {1, 2, 3, 4}; return (i >= 0 && i < 4) ? t[i] : 0; }\n",
        "pub fn pick(i: i32) -> i32 { let t = [1, 2, 3, 4]; if i < 4 { t[i as usize] } else { 0 } }\n",
        d.path(),
    );
    let cex = r.counterexample.unwrap_or_else(|| panic!("{:?}", r.diagnostics));
    assert_eq!(cex.failure_kind, FailureKind::RustOnlyRuntimeError);
    assert!(cex.rust_output.is_none());
    assert!(cex.detail.unwrap().contains("panic"));
}

#[test]
fn pointers_arrays_strings_and_globals() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let Some(c) = checker(3) else { return };
    let d = tempfile::tempdir().unwrap();
    let c_src = r#"
#include <string.h>
static int counter = 0;
void bump(int *p, unsigned char by) { *p += by; counter++; }
int sum4(const int a[4]) { long s = 0; for (int i = 0; i < 4; i++) s += a[i]; return (int)(s & 0xffff); }
int vowels(const char *s) { int n = 0; for (; *s; s++) if (strchr("aeiou", *s)) n++; return n; }
void upper(char *s) { for (; *s; s++) if (*s >= 'a' && *s <= 'z') *s -= 32; }
double half(double x) { return x / 2.0; }
_Bool odd(long v) { return v % 2 != 0; }
"#;
    let rust = r#"
static mut COUNTER_UNUSED: i32 = 0;
#[allow(non_upper_case_globals)]
pub static mut counter: i32 = 0;
pub fn bump(p: &mut i32, by: u8) { *p = p.wrapping_add(by as i32); unsafe { counter = counter.wrapping_add(1); } }
pub fn sum4(a: &[i32; 4]) -> i32 { (a.iter().map(|&x| x as i64).sum::<i64>() & 0xffff) as i32 }
pub fn vowels(s: &str) -> i32 { s.chars().filter(|c| "aeiou".contains(*c)).count() as i32 }
pub fn upper(s: &mut String) { *s = s.to_ascii_uppercase(); }
pub fn half(x: f64) -> f64 { x / 2.0 }
pub fn odd(v: i64) -> bool { v % 2 != 0 }
"#;
    let r = fuzz(&c, c_src, rust, d.path());
    assert!(r.success, "{r:?}");
    let buggy = rust.replace("counter.wrapping_add(1)", "counter.wrapping_add(2)");
    let r = fuzz(&c, c_src, &buggy, d.path());
    let cex = r.counterexample.clone().unwrap_or_else(|| panic!("{r:?}"));
    assert_eq!(cex.function, "bump");
    assert!(cex.c_output.iter().any(|(k, _)| k == "counter"));
}

#[test]
fn shim_mismatch_is_setup_error() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let Some(c) = checker(2) else { return };
    let d = tempfile::tempdir().unwrap();
    let r = fuzz(&c, "int f(int x) { return x; }\n", "pub fn g(x: i32) -> i32 { x }\n", d.path());
    assert_eq!(r.infra_error, Some(ErrorCategory::FuzzingSetup));
    assert_eq!(r.stage, CheckStage::Fuzzed);
}

#[test]
fn add_harness_decodes_little_endian_pairs() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let Some(c) = checker(1) else { return };
    let d = tempfile::tempdir().unwrap();
    let u = unit("int add(int a, int b) { return a + b; }\n");
    let bin = c.build_fuzzer(d.path(), &u, &SideB::Rust("pub fn add(a: i32, b: i32) -> i32 { a.wrapping_add(b) }\n".into())).unwrap();
    assert_eq!(bin.targets[0].input_len(), 8);
    for (a, b) in [(0i32, 0i32), (1, 2), (-7, 3), (i32::MAX, 1), (123456, -654321)] {
        let mut bytes = a.to_le_bytes().to_vec();
        bytes.extend(b.to_le_bytes());
        let (cs, rs) = c.trace(&bin, 0, &bytes).unwrap();
        let expected = vec![("return".to_string(), a.wrapping_add(b).to_string())];
        assert_eq!(cs, expected);
        assert_eq!(rs, expected);
    }
    // Short inputs are zero-padded.
    let (cs, _) = c.trace(&bin, 0, &[5]).unwrap();
    assert_eq!(cs, vec![("return".to_string(), "5".to_string())]);
}
