//! Behavior-preserving transformations of C sources, grouped into six levels
//! from comments and layout up to decision logic.

mod code;
mod model;
mod rename;
mod transforms;

pub use model::{
    CODE_EXTRACTION_PROMPT, COMMENT_INSERTION_PROMPT, COMMENT_TRANSLATION_PROMPT, IDENTIFIER_IMPROVEMENT_PROMPT,
    IDENTIFIER_TRANSLATION_PROMPT,
};

use crate::checkers::{CVariant, ToolchainChecker, VariantVerdict};
use crate::corpus::parse::parse;
use crate::corpus::SourceUnit;
use crate::llm::{ChatBackend, LlmError};
use crate::pipeline::ErrorCategory;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const IDENTITY: &str = "Identity";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    I,
    II,
    III,
    IV,
    V,
    VI,
}

impl Level {
    pub const ALL: [Level; 6] = [Level::I, Level::II, Level::III, Level::IV, Level::V, Level::VI];

    pub fn describe(self) -> &'static str {
        match self {
            Level::I => "comments and indentation",
            Level::II => "identifiers",
            Level::III => "constants, dead code and declarations",
            Level::IV => "functions and signatures",
            Level::V => "control flow",
            Level::VI => "decision logic and expressions",
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Deterministic,
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub id: String,
    /// `None` only for Identity.
    pub level: Option<Level>,
    pub mode: Mode,
    pub needs_model: bool,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl PerturbationSpec {
    fn new(id: &str, level: Option<Level>, mode: Mode, needs_model: bool) -> Self {
        PerturbationSpec { id: id.to_string(), level, mode, needs_model, params: BTreeMap::new() }
    }

    fn with(mut self, key: &str, value: serde_json::Value) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn is_identity(&self) -> bool {
        self.id == IDENTITY
    }

    fn param_str(&self, key: &str, default: &str) -> String {
        self.params.get(key).and_then(|v| v.as_str()).unwrap_or(default).to_string()
    }

    fn param_f64(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).and_then(|v| v.as_f64()).unwrap_or(default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedUnit {
    pub source_id: String,
    pub group: String,
    pub perturbation_id: String,
    /// Recorded for stochastic perturbations only.
    pub seed: Option<u64>,
    pub text: String,
    pub identity: bool,
    /// Original name to new name for renamed identifiers.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub symbol_map: BTreeMap<String, String>,
    /// Per function, `order[i]` is the original index of the parameter now at position `i`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub param_orders: BTreeMap<String, Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl PerturbedUnit {
    pub fn identity_of(unit: &SourceUnit) -> Self {
        PerturbedUnit {
            source_id: unit.id.clone(),
            group: unit.group.clone(),
            perturbation_id: IDENTITY.to_string(),
            seed: None,
            text: unit.text.clone(),
            identity: true,
            symbol_map: BTreeMap::new(),
            param_orders: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn is_noop(&self) -> bool {
        self.notes.iter().any(|n| n.starts_with("no-op"))
    }

    /// The perturbed file as a unit to translate. It keeps the original id.
    pub fn to_source_unit(&self) -> SourceUnit {
        SourceUnit::from_text(self.source_id.clone(), self.group.clone(), self.text.clone())
    }

    pub fn to_variant(&self) -> CVariant {
        CVariant { text: self.text.clone(), symbol_map: self.symbol_map.clone(), param_orders: self.param_orders.clone() }
    }
}

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("unknown perturbation `{0}`")]
    Unknown(String),
    #[error("perturbation `{0}` needs a model backend")]
    NeedsModel(String),
    #[error("model call failed: {0}")]
    Llm(LlmError),
    #[error("unusable model output: {0}")]
    ModelOutput(String),
    #[error("set size {set_size} exceeds the {available} available perturbations")]
    SetSize { set_size: usize, available: usize },
    #[error("{0} has no fuzzable functions")]
    NotFuzzable(String),
    #[error("self-check infrastructure failure: {0}")]
    Infra(String),
    #[error("perturbation `{id}` of {source_id} quarantined: {verdict}")]
    Quarantined { source_id: String, id: String, verdict: String },
}

impl PerturbError {
    pub fn category(&self) -> Option<ErrorCategory> {
        match self {
            PerturbError::Llm(_) | PerturbError::ModelOutput(_) => Some(ErrorCategory::LlmApi),
            PerturbError::Infra(_) => Some(ErrorCategory::FuzzingSetup),
            _ => None,
        }
    }
}

/// Identity followed by every named perturbation, ordered by level.
pub fn registry() -> Vec<PerturbationSpec> {
    use serde_json::json;
    use Level::*;
    use Mode::*;
    let s = |id, level, mode, model| PerturbationSpec::new(id, Some(level), mode, model);
    vec![
        PerturbationSpec::new(IDENTITY, None, Deterministic, false),
        s("CommentRoundTrip", I, Stochastic, true).with("language", json!("German")),
        s("CommentTypos", I, Stochastic, false).with("rate", json!(0.3)),
        s("CommentRemoval", I, Deterministic, false),
        s("LLMCommentInsertion", I, Stochastic, true),
        s("IndentationReformat", I, Deterministic, false).with("indent", json!("\t")),
        s("IdentifierTypos", II, Stochastic, false).with("rate", json!(0.5)),
        s("NamingConventionSwap", II, Deterministic, false),
        s("ShortIdentifiers", II, Deterministic, false),
        s("IdentifierRoundTrip", II, Stochastic, true).with("language", json!("German")),
        s("LLMIdentifierImprovement", II, Stochastic, true).with("prompt", json!(IDENTIFIER_IMPROVEMENT_PROMPT)),
        s("ConstantInsertion", III, Deterministic, false),
        s("DeadCodeInsertion", III, Deterministic, false),
        s("IncludeDeclarationInsertion", III, Deterministic, false),
        s("LLMCodeExtraction", IV, Stochastic, true),
        s("SignatureChange", IV, Deterministic, false),
        s("ForWhileSwap", V, Deterministic, false),
        s("ConditionSwap", V, Deterministic, false),
        s("ConditionDuplication", VI, Deterministic, false),
        s("DeMorgan", VI, Deterministic, false),
    ]
}

pub fn lookup(id: &str) -> Result<PerturbationSpec, PerturbError> {
    registry().into_iter().find(|s| s.id == id).ok_or_else(|| PerturbError::Unknown(id.to_string()))
}

/// Seed for run `run_index` of a perturbation applied to one file.
pub fn default_seed(source_id: &str, perturbation_id: &str, run_index: u32) -> u64 {
    let mut h = Sha256::new();
    for part in [source_id.as_bytes(), perturbation_id.as_bytes(), &run_index.to_le_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

/// Applies `spec` to `unit`. Deterministic perturbations ignore `seed`.
pub fn apply(
    spec: &PerturbationSpec,
    unit: &SourceUnit,
    seed: u64,
    model: Option<&dyn ChatBackend>,
) -> Result<PerturbedUnit, PerturbError> {
    let mut out = PerturbedUnit::identity_of(unit);
    if spec.is_identity() {
        return Ok(out);
    }
    out.identity = false;
    out.perturbation_id = spec.id.clone();
    out.seed = (spec.mode == Mode::Stochastic).then_some(seed);
    if spec.needs_model && model.is_none() {
        return Err(PerturbError::NeedsModel(spec.id.clone()));
    }
    let pu = parse(&unit.text);
    let lx = &pu.lexed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = match spec.id.as_str() {
        "CommentRemoval" => transforms::comment_removal(lx),
        "CommentTypos" => transforms::comment_typos(lx, &mut rng, spec.param_f64("rate", 0.3)),
        "IndentationReformat" => transforms::indentation_reformat(lx, &spec.param_str("indent", "\t")),
        "IdentifierTypos" => rename::identifier_typos(&pu, &mut rng, spec.param_f64("rate", 0.5)),
        "NamingConventionSwap" => rename::naming_convention_swap(&pu),
        "ShortIdentifiers" => rename::short_identifiers(&pu),
        "ConstantInsertion" => transforms::constant_insertion(&pu),
        "DeadCodeInsertion" => transforms::dead_code_insertion(&pu),
        "IncludeDeclarationInsertion" => transforms::include_declaration_insertion(&pu),
        "SignatureChange" => transforms::signature_change(&pu),
        "ForWhileSwap" => transforms::for_while_swap(lx),
        "ConditionSwap" => transforms::condition_swap(lx),
        "ConditionDuplication" => transforms::condition_duplication(lx),
        "DeMorgan" => transforms::de_morgan(lx),
        id => {
            let backend = model.ok_or_else(|| PerturbError::NeedsModel(id.to_string()))?;
            match id {
                "CommentRoundTrip" => model::comment_round_trip(lx, backend, &spec.param_str("language", "German"))?,
                "LLMCommentInsertion" => model::comment_insertion(&pu, backend)?,
                "IdentifierRoundTrip" => model::identifier_round_trip(&pu, backend, &spec.param_str("language", "German"))?,
                "LLMIdentifierImprovement" => {
                    model::identifier_improvement(&pu, backend, &spec.param_str("prompt", IDENTIFIER_IMPROVEMENT_PROMPT))?
                }
                "LLMCodeExtraction" => model::code_extraction(&pu, backend)?,
                _ => return Err(PerturbError::Unknown(id.to_string())),
            }
        }
    };
    out.notes = r.notes;
    match r.noop {
        Some(reason) => out.notes.insert(0, format!("no-op: {reason}")),
        None if r.text == unit.text && r.param_orders.is_empty() => {
            out.notes.insert(0, "no-op: the text is unchanged".to_string())
        }
        None => {
            out.text = r.text;
            out.symbol_map = r.symbol_map;
            out.param_orders = r.param_orders;
        }
    }
    Ok(out)
}

/// Differentially fuzzes each perturbed copy against `original`, with a
/// budget of `budget_secs` per function.
pub fn self_check_many(
    checker: &ToolchainChecker,
    original: &SourceUnit,
    perturbed: &[PerturbedUnit],
    budget_secs: u64,
    workdir: &Path,
) -> Result<Vec<VariantVerdict>, PerturbError> {
    checker.verify().map_err(|e| PerturbError::Infra(e.to_string()))?;
    if !original.is_fuzzable() {
        return Err(PerturbError::NotFuzzable(original.id.clone()));
    }
    let mut checker = checker.clone();
    let mut fuzz = checker.fuzz_config().clone();
    fuzz.timeout_secs = budget_secs;
    checker.set_fuzz_config(fuzz);
    let variants: Vec<CVariant> = perturbed.iter().map(PerturbedUnit::to_variant).collect();
    checker.self_check_variants(original, &variants, workdir).map_err(PerturbError::Infra)
}

pub fn self_check(
    checker: &ToolchainChecker,
    original: &SourceUnit,
    perturbed: &PerturbedUnit,
    budget_secs: u64,
    workdir: &Path,
) -> Result<VariantVerdict, PerturbError> {
    let mut v = self_check_many(checker, original, std::slice::from_ref(perturbed), budget_secs, workdir)?;
    Ok(v.remove(0))
}

/// Applies a model-assisted perturbation and keeps the result only if it
/// passes the self-check.
pub fn apply_checked(
    spec: &PerturbationSpec,
    unit: &SourceUnit,
    seed: u64,
    model: Option<&dyn ChatBackend>,
    checker: &ToolchainChecker,
    budget_secs: u64,
    workdir: &Path,
) -> Result<PerturbedUnit, PerturbError> {
    let p = apply(spec, unit, seed, model)?;
    if p.identity || p.is_noop() {
        return Ok(p);
    }
    match self_check(checker, unit, &p, budget_secs, workdir)? {
        VariantVerdict::EquivalentWithinBudget => Ok(p),
        v => Err(PerturbError::Quarantined { source_id: unit.id.clone(), id: spec.id.clone(), verdict: v.label().to_string() }),
    }
}

/// Draws `count` perturbation sets of `set_size` ids each. Identity is always
/// a member; the others are drawn without replacement.
pub fn sample_sets(
    registry: &[PerturbationSpec],
    set_size: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<String>>, PerturbError> {
    let others: Vec<&PerturbationSpec> = registry.iter().filter(|s| !s.is_identity()).collect();
    let available = others.len() + 1;
    if set_size == 0 || set_size > available {
        return Err(PerturbError::SetSize { set_size, available });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = Vec::with_capacity(count);
    for _ in 0..count {
        let mut idx = sample(&mut rng, others.len(), set_size - 1).into_vec();
        idx.sort_unstable();
        let mut set = vec![IDENTITY.to_string()];
        set.extend(idx.into_iter().map(|i| others[i].id.clone()));
        sets.push(set);
    }
    Ok(sets)
}

/// Internal result of one transformation.
#[derive(Debug, Clone, Default)]
pub(crate) struct Rewritten {
    pub text: String,
    pub symbol_map: BTreeMap<String, String>,
    pub param_orders: BTreeMap<String, Vec<usize>>,
    pub notes: Vec<String>,
    pub noop: Option<String>,
}

impl Rewritten {
    pub fn text(text: String) -> Self {
        Rewritten { text, ..Default::default() }
    }

    pub fn noop(reason: &str) -> Self {
        Rewritten { noop: Some(reason.to_string()), ..Default::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ScriptEntry, ScriptedBackend};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    const SRC: &str = "#include <string.h>\n\n/* sums */\nint total(int *xs, int n) {\n    int total_sum = 0;\n    for (int i = 0; i < n; i++) {\n        total_sum += xs[i];\n    }\n    return total_sum;\n}\n\nint pick(int a, int b) {\n    if (!(a > 0 && b > 0)) {\n        return 0;\n    } else {\n        return a;\n    }\n}\n";

    fn unit() -> SourceUnit {
        SourceUnit::from_text("f.c", "default", SRC)
    }

    #[test]
    fn registry_shape() {
        let r = registry();
        let ids: BTreeSet<&str> = r.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids.len(), r.len());
        assert_eq!(r.len(), 20);
        for l in Level::ALL {
            assert!(r.iter().any(|s| s.level == Some(l)), "{l}");
        }
        let dm = lookup("DeMorgan").unwrap();
        assert_eq!((dm.level, dm.mode), (Some(Level::VI), Mode::Deterministic));
        assert!(r.iter().filter(|s| s.needs_model).all(|s| s.id.starts_with("LLM") || s.id.ends_with("RoundTrip")));
    }

    #[test]
    fn identity_and_noop() {
        let u = unit();
        let p = apply(&lookup(IDENTITY).unwrap(), &u, 3, None).unwrap();
        assert!(p.identity);
        assert_eq!(p.text, u.text);
        let bare = SourceUnit::from_text("g.c", "default", "int f(void) { return 1; }\n");
        let p = apply(&lookup("CommentRemoval").unwrap(), &bare, 0, None).unwrap();
        assert_eq!(p.text, bare.text);
        assert!(p.is_noop(), "{:?}", p.notes);
        let p = apply(&lookup("ConditionSwap").unwrap(), &bare, 0, None).unwrap();
        assert!(p.is_noop());
        assert!(!p.identity);
    }

    #[test]
    fn deterministic_examples() {
        let u = unit();
        let p = apply(&lookup("DeMorgan").unwrap(), &u, 0, None).unwrap();
        assert!(p.text.contains("if (!(a > 0) || !(b > 0))"), "{}", p.text);
        assert_eq!(p.seed, None);
        let p = apply(&lookup("ShortIdentifiers").unwrap(), &u, 0, None).unwrap();
        assert!(!p.text.contains("total_sum"));
        let short = &p.symbol_map["total_sum"];
        assert_eq!(p.text.matches(&format!(" {short} ")).count() + p.text.matches(&format!(" {short};")).count(), 3);
        let p = apply(&lookup("SignatureChange").unwrap(), &u, 0, None).unwrap();
        assert!(p.text.contains("int total(int n, int *xs)"), "{}", p.text);
        assert_eq!(p.param_orders["pick"], vec![1, 0]);
    }

    #[test]
    fn model_needed() {
        let u = unit();
        let e = apply(&lookup("CommentRoundTrip").unwrap(), &u, 0, None).unwrap_err();
        assert!(matches!(e, PerturbError::NeedsModel(_)));
    }

    #[test]
    fn model_perturbations_with_script() {
        let u = unit();
        let b = ScriptedBackend::new("m", vec![ScriptEntry::reply("1: Summen"), ScriptEntry::reply("1: totals")]);
        let p = apply(&lookup("CommentRoundTrip").unwrap(), &u, 5, Some(&b)).unwrap();
        assert!(p.text.contains("/* totals */"), "{}", p.text);
        assert_eq!(p.seed, Some(5));

        let b = ScriptedBackend::new("m", vec![ScriptEntry::reply(r#"{"total": "Adds the values.", "nope": "x"}"#)]);
        let p = apply(&lookup("LLMCommentInsertion").unwrap(), &u, 0, Some(&b)).unwrap();
        assert!(p.text.contains("/* Adds the values. */\nint total("), "{}", p.text);

        let b = ScriptedBackend::new(
            "m",
            vec![ScriptEntry::reply(r#"{"total_sum": "gesamt_summe", "xs": "werte"}"#), ScriptEntry::reply(r#"{"gesamt_summe": "acc", "werte": "int"}"#)],
        );
        let p = apply(&lookup("IdentifierRoundTrip").unwrap(), &u, 0, Some(&b)).unwrap();
        assert_eq!(p.symbol_map.get("total_sum").map(String::as_str), Some("acc"));
        assert!(!p.symbol_map.contains_key("xs"));
        assert!(p.notes.iter().any(|n| n.contains("`int`")), "{:?}", p.notes);

        let b = ScriptedBackend::new("m", vec![ScriptEntry::reply("I cannot help with that.")]);
        let e = apply(&lookup("LLMIdentifierImprovement").unwrap(), &u, 0, Some(&b)).unwrap_err();
        assert_eq!(e.category(), Some(ErrorCategory::LlmApi));

        let bad = "```c\nint total(int *xs) { return 0; }\n```";
        let b = ScriptedBackend::new("m", vec![ScriptEntry::reply(bad)]);
        let e = apply(&lookup("LLMCodeExtraction").unwrap(), &u, 0, Some(&b)).unwrap_err();
        assert!(matches!(e, PerturbError::ModelOutput(_)), "{e}");
        let good = format!("```c\nstatic int helper(int a) {{ return a > 0; }}\n{}\n```", SRC.replace("#include <string.h>\n", ""));
        let b = ScriptedBackend::new("m", vec![ScriptEntry::reply(good)]);
        let p = apply(&lookup("LLMCodeExtraction").unwrap(), &u, 0, Some(&b)).unwrap();
        assert!(p.text.contains("helper"));
    }

    #[test]
    fn seeds_and_sampling() {
        assert_eq!(default_seed("a.c", "X", 1), default_seed("a.c", "X", 1));
        assert_ne!(default_seed("a.c", "X", 1), default_seed("a.c", "X", 2));
        assert_ne!(default_seed("a.cX", "", 1), default_seed("a.c", "X", 1));
        let r = registry();
        let full = sample_sets(&r, r.len(), 3, 1).unwrap();
        let all: Vec<String> = std::iter::once(IDENTITY.to_string())
            .chain(r.iter().filter(|s| !s.is_identity()).map(|s| s.id.clone()))
            .collect();
        assert!(full.iter().all(|s| *s == all));
        assert!(matches!(sample_sets(&r, r.len() + 1, 1, 1), Err(PerturbError::SetSize { .. })));
        let a = sample_sets(&r, 5, 50, 9).unwrap();
        assert_eq!(a, sample_sets(&r, 5, 50, 9).unwrap());
        assert_ne!(a, sample_sets(&r, 5, 50, 10).unwrap());
        for s in &a {
            assert_eq!(s[0], IDENTITY);
            assert_eq!(s.iter().collect::<BTreeSet<_>>().len(), 5);
        }
    }

    fn ident() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9_]{0,6}".prop_filter("not reserved", |s| !crate::corpus::lex::is_keyword(s) && s != "main")
    }

    fn program() -> impl Strategy<Value = String> {
        (ident(), ident(), ident(), ident(), 0i32..100, any::<bool>()).prop_filter_map(
            "names must differ",
            |(f, a, b, g, k, comment)| {
                let names: BTreeSet<&String> = [&f, &a, &b, &g].into_iter().collect();
                if names.len() < 4 {
                    return None;
                }
                let c = if comment { "// adds things up\n" } else { "" };
                Some(format!(
                    "int {g} = {k};\n{c}int {f}(int {a}, int {b}) {{\n    int tmp_{a} = {a} * {b};\n    while ({b} > 0 && {a} < {k}) {{ {a}++; {b}--; }}\n    {g} += tmp_{a};\n    return tmp_{a} + {g};\n}}\nint caller_{f}(int {a}) {{ return {f}({a}, {k}); }}\n"
                ))
            },
        )
    }

    fn occurrence_counts(text: &str) -> BTreeMap<String, usize> {
        let lx = crate::corpus::lex::Lexed::new(text);
        let mut m = BTreeMap::new();
        for (i, t) in lx.tokens.iter().enumerate() {
            if t.kind == crate::corpus::lex::TokenKind::Ident {
                *m.entry(lx.tok(i).to_string()).or_insert(0) += 1;
            }
        }
        m
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn identity_law(text in ".{0,200}", seed in any::<u64>()) {
            let u = SourceUnit::from_text("p.c", "default", text.clone());
            let p = apply(&lookup(IDENTITY).unwrap(), &u, seed, None).unwrap();
            prop_assert_eq!(p.text, text);
        }

        #[test]
        fn renaming_preserves_occurrence_counts(src in program(), seed in any::<u64>()) {
            let u = SourceUnit::from_text("p.c", "default", src.clone());
            let before = occurrence_counts(&src);
            for id in ["ShortIdentifiers", "NamingConventionSwap", "IdentifierTypos"] {
                let p = apply(&lookup(id).unwrap(), &u, seed, None).unwrap();
                let after = occurrence_counts(&p.text);
                for (name, n) in &before {
                    let new = p.symbol_map.get(name).unwrap_or(name);
                    prop_assert_eq!(after.get(new).copied(), Some(*n), "{} {} -> {}", id, name, new);
                }
                let mut a: Vec<usize> = before.values().copied().collect();
                let mut b: Vec<usize> = after.values().copied().collect();
                a.sort_unstable();
                b.sort_unstable();
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn stochastic_perturbations_are_seed_determined(src in program(), seed in any::<u64>()) {
            let u = SourceUnit::from_text("p.c", "default", src);
            for spec in registry().iter().filter(|s| s.mode == Mode::Stochastic && !s.needs_model) {
                let a = apply(spec, &u, seed, None).unwrap();
                let b = apply(spec, &u, seed, None).unwrap();
                prop_assert_eq!(&a, &b);
            }
        }

        #[test]
        fn sampled_sets_always_hold_identity(size in 1usize..=20, seed in any::<u64>()) {
            let sets = sample_sets(&registry(), size, 20, seed).unwrap();
            for s in sets {
                prop_assert_eq!(s.len(), size);
                prop_assert!(s.contains(&IDENTITY.to_string()));
                prop_assert_eq!(s.iter().collect::<BTreeSet<_>>().len(), size);
            }
        }
    }
}
