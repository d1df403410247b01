//! Perturbations on the fixture corpus, checked against the original C with
//! the real toolchain. Fuzzing tests are skipped when clang with libFuzzer is
//! not installed.

use std::path::Path;
use std::sync::Mutex;
use transloop::checkers::{FuzzConfig, ToolchainChecker, ToolchainConfig, VariantVerdict};
use transloop::corpus::{load_corpus, SourceUnit};
use transloop::perturb::{apply, lookup, registry, self_check, self_check_many, Mode, PerturbedUnit};

static SERIAL: Mutex<()> = Mutex::new(());

fn checker() -> Option<ToolchainChecker> {
    let c = ToolchainChecker::new(ToolchainConfig::default(), FuzzConfig::default());
    match c.verify() {
        Ok(()) => Some(c),
        Err(e) => {
            eprintln!("skipping: {e}");
            None
        }
    }
}

fn fixtures() -> Vec<SourceUnit> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/selfcheck");
    load_corpus(&dir, None).unwrap().units
}

#[test]
fn fixtures_are_fuzzable_and_every_transform_applies_somewhere() {
    let units = fixtures();
    assert_eq!(units.len(), 10);
    for u in &units {
        assert!(u.is_fuzzable(), "{}: {:?}", u.id, u.interfaces);
    }
    for spec in registry().iter().filter(|s| s.mode == Mode::Deterministic && !s.is_identity()) {
        let changed = units.iter().filter(|u| !apply(spec, u, 0, None).unwrap().is_noop()).count();
        assert!(changed > 0, "{} never applies", spec.id);
    }
}

/// Reference evaluation of `!(a && b)` and the De Morgan form.
fn truth_table_agrees(a_vals: &[bool], b_vals: &[bool]) -> bool {
    a_vals.iter().all(|&a| b_vals.iter().all(|&b| !(a && b) == (!a || !b)))
}

#[test]
fn de_morgan_is_equivalent_within_budget() {
    assert!(truth_table_agrees(&[false, true], &[false, true]));
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let Some(c) = checker() else { return };
    let src = "int both(int a, int b, int c) {\n    if (!(a > 0 && b > 0)) {\n        return c;\n    }\n    return !(c || a < b);\n}\n";
    let u = SourceUnit::from_text("dm.c", "test", src);
    let p = apply(&lookup("DeMorgan").unwrap(), &u, 0, None).unwrap();
    assert!(p.text.contains("!(a > 0) || !(b > 0)"), "{}", p.text);
    let d = tempfile::tempdir().unwrap();
    let v = self_check(&c, &u, &p, 3, d.path()).unwrap();
    assert_eq!(v, VariantVerdict::EquivalentWithinBudget);
    let id = self_check(&c, &u, &PerturbedUnit::identity_of(&u), 3, d.path()).unwrap();
    assert_eq!(id, VariantVerdict::EquivalentWithinBudget);
}

#[test]
fn broken_boundary_is_a_counterexample() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let Some(c) = checker() else { return };
    let src = "int below(int x, int limit) {\n    return x < limit;\n}\n";
    let u = SourceUnit::from_text("lt.c", "test", src);
    let mut p = PerturbedUnit::identity_of(&u);
    p.identity = false;
    p.perturbation_id = "Broken".into();
    p.text = src.replace("x < limit", "x <= limit");
    // Direct evaluation: equal arguments separate the two forms.
    let (x, limit) = (7, 7);
    assert_ne!(x < limit, x <= limit);
    let d = tempfile::tempdir().unwrap();
    match self_check(&c, &u, &p, 10, d.path()).unwrap() {
        VariantVerdict::Counterexample(cex) => assert_eq!(cex.function, "below"),
        v => panic!("expected a counterexample, got {v:?}"),
    }
    let mut q = p.clone();
    q.text = "int below(int x, int limit) { return x < limit }\n".into();
    assert!(matches!(self_check(&c, &u, &q, 1, d.path()).unwrap(), VariantVerdict::CompileFailure(_)));
}

#[test]
fn deterministic_perturbations_pass_a_short_self_check() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let Some(c) = checker() else { return };
    let d = tempfile::tempdir().unwrap();
    let specs: Vec<_> = registry().into_iter().filter(|s| s.mode == Mode::Deterministic && !s.is_identity()).collect();
    for u in fixtures().iter().take(4) {
        let ps: Vec<PerturbedUnit> = specs.iter().map(|s| apply(s, u, 0, None).unwrap()).collect();
        let verdicts = self_check_many(&c, u, &ps, 2, d.path()).unwrap();
        for (p, v) in ps.iter().zip(&verdicts) {
            assert_eq!(*v, VariantVerdict::EquivalentWithinBudget, "{} on {}:\n{}", p.perturbation_id, u.id, p.text);
        }
    }
}
