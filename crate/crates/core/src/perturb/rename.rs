//! Consistent identifier renaming.

use super::transforms::valid_new_name;
use super::Rewritten;
use crate::corpus::lex::{is_keyword, TokenKind};
use crate::corpus::parse::ParsedUnit;
use rand::{Rng, RngCore};
use std::collections::{BTreeMap, BTreeSet};

/// Names a new identifier must not take: Rust keywords and common C library
/// functions a header might declare.
const RESERVED: &[&str] = &[
    "as", "async", "await", "box", "crate", "dyn", "fn", "impl", "in", "let", "loop", "match", "mod", "move", "mut", "pub",
    "ref", "self", "Self", "super", "trait", "type", "unsafe", "use", "where", "yield", "try", "macro", "priv", "final",
    "override", "virtual", "abstract", "become", "unsized", "typeof", "main", "abs", "div", "exp", "log", "pow", "sin",
    "cos", "tan", "time", "rand", "srand", "free", "malloc", "calloc", "realloc", "puts", "putc", "getc", "index", "rindex",
    "y0", "y1", "yn", "j0", "j1", "jn", "gamma", "signal", "raise", "remove", "rename", "exit", "atoi", "atol", "labs",
    "printf", "scanf", "read", "write", "open", "close", "link", "send", "recv", "stat", "sleep", "errno", "select",
    "round", "floor", "ceil", "fabs", "sqrt", "fmin", "fmax", "max", "min", "clock", "kill", "wait", "pipe", "dup",
    "isalpha", "isdigit", "toupper", "tolower", "strlen", "strcmp", "memcpy", "memset", "stdin", "stdout", "stderr",
    "NULL", "EOF", "bool", "true", "false", "erf", "erfc", "exp2", "log2", "nan", "ldexp", "frexp", "modf", "fmod",
];

/// File-scope and local names that can be renamed safely, in order of first
/// occurrence.
pub(crate) fn renamable(pu: &ParsedUnit) -> Vec<String> {
    let declared = pu.declared_value_names();
    let defined: BTreeSet<&str> = pu.functions.iter().map(|f| f.name.as_str()).collect();
    let external_calls: BTreeSet<&str> =
        pu.functions.iter().flat_map(|f| f.calls.iter()).map(|s| s.as_str()).filter(|c| !defined.contains(c)).collect();
    let extern_globals: BTreeSet<&str> = pu.globals.iter().filter(|g| g.is_extern).map(|g| g.name.as_str()).collect();
    let macros: BTreeSet<&str> = pu.macros.iter().map(|m| m.name.as_str()).collect();
    let ok = |n: &str| {
        declared.contains(n)
            && n != "main"
            && !n.starts_with("__")
            && !pu.type_like_names.contains(n)
            && !macros.contains(n)
            && !external_calls.contains(n)
            && !extern_globals.contains(n)
            && !is_keyword(n)
    };
    let lx = &pu.lexed;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for i in 0..lx.tokens.len() {
        if lx.tokens[i].kind != TokenKind::Ident {
            continue;
        }
        let s = lx.tok(i);
        if ok(s) && seen.insert(s.to_string()) {
            out.push(s.to_string());
        }
    }
    out
}

/// Identifiers a new name may not collide with.
pub(crate) fn taken_names(pu: &ParsedUnit) -> BTreeSet<String> {
    let mut t = pu.all_identifiers();
    t.extend(RESERVED.iter().map(|s| s.to_string()));
    t.extend(crate::corpus::lex::KEYWORDS.iter().map(|s| s.to_string()));
    t
}

/// Rewrites every identifier token found in `map`.
pub(crate) fn apply_renames(pu: &ParsedUnit, map: &BTreeMap<String, String>) -> Rewritten {
    let lx = &pu.lexed;
    let mut edits = Vec::new();
    for (i, t) in lx.tokens.iter().enumerate() {
        if t.kind == TokenKind::Ident {
            if let Some(n) = map.get(lx.tok(i)) {
                edits.push((t.start, t.end, n.clone()));
            }
        }
    }
    Rewritten {
        text: super::code::apply_edits(&lx.text, edits),
        symbol_map: map.clone(),
        ..Rewritten::default()
    }
}

/// Keeps the proposals that are valid, fresh and pairwise distinct.
pub(crate) fn validate_map(pu: &ParsedUnit, proposals: &BTreeMap<String, String>) -> (BTreeMap<String, String>, Vec<String>) {
    let allowed: BTreeSet<String> = renamable(pu).into_iter().collect();
    let mut taken = taken_names(pu);
    let mut out = BTreeMap::new();
    let mut notes = Vec::new();
    for (old, new) in proposals {
        let new = new.trim();
        if old == new {
            continue;
        }
        if !allowed.contains(old) {
            notes.push(format!("ignored rename of `{old}`: not a renamable identifier"));
        } else if !valid_new_name(new) || taken.contains(new) {
            notes.push(format!("ignored rename `{old}` -> `{new}`: invalid or clashing name"));
        } else {
            taken.insert(new.to_string());
            out.insert(old.clone(), new.to_string());
        }
    }
    (out, notes)
}

fn to_camel(s: &str) -> Option<String> {
    let lead = s.len() - s.trim_start_matches('_').len();
    let trail = s.len() - s.trim_end_matches('_').len();
    let core = &s[lead..s.len() - trail];
    if !core.contains('_') || core.chars().any(|c| c.is_ascii_uppercase()) {
        return None;
    }
    let mut out = String::new();
    for (i, part) in core.split('_').filter(|p| !p.is_empty()).enumerate() {
        if i == 0 {
            out.push_str(part);
        } else {
            let mut c = part.chars();
            if let Some(f) = c.next() {
                out.push(f.to_ascii_uppercase());
                out.extend(c);
            }
        }
    }
    Some(format!("{}{out}{}", &s[..lead], &s[s.len() - trail..]))
}

fn to_snake(s: &str) -> Option<String> {
    if s.contains('_') || !s.chars().any(|c| c.is_ascii_uppercase()) || s.chars().all(|c| !c.is_ascii_lowercase()) {
        return None;
    }
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if c.is_ascii_uppercase() {
            if i > 0 {
                out.push('_');
            }
            out.push(c.to_ascii_lowercase());
        } else {
            out.push(c);
        }
    }
    Some(out)
}

/// snake_case names become camelCase and camelCase names become snake_case.
pub(crate) fn naming_convention_swap(pu: &ParsedUnit) -> Rewritten {
    let mut proposals = BTreeMap::new();
    for n in renamable(pu) {
        if let Some(m) = to_camel(&n).or_else(|| to_snake(&n)) {
            proposals.insert(n, m);
        }
    }
    finish(pu, proposals, "no snake_case or camelCase identifiers")
}

fn short_name(mut k: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (k % 26) as u8);
        k /= 26;
        if k == 0 {
            break;
        }
        k -= 1;
    }
    s.reverse();
    String::from_utf8(s).unwrap()
}

/// Every renamable identifier becomes the next free name in a, b, ..., z, aa, ab, ...
pub(crate) fn short_identifiers(pu: &ParsedUnit) -> Rewritten {
    let taken = taken_names(pu);
    let mut map = BTreeMap::new();
    let mut k = 0;
    for n in renamable(pu) {
        let mut cand = short_name(k);
        while taken.contains(&cand) && cand != n {
            k += 1;
            cand = short_name(k);
        }
        k += 1;
        if cand != n {
            map.insert(n, cand);
        }
    }
    finish(pu, map, "no renamable identifiers")
}

fn typo(name: &str, rng: &mut dyn RngCore) -> String {
    let mut c: Vec<char> = name.chars().collect();
    let n = c.len();
    match rng.random_range(0..3) {
        0 if n >= 3 => {
            let i = rng.random_range(1..n - 1);
            c.swap(i, i + 1);
        }
        1 if n >= 4 => {
            let i = rng.random_range(1..n);
            c.remove(i);
        }
        _ => {
            let i = rng.random_range(1..n);
            let ch = c[i];
            c.insert(i, ch);
        }
    }
    c.into_iter().collect()
}

/// Misspells about half of the renamable identifiers of length three or more.
pub(crate) fn identifier_typos(pu: &ParsedUnit, rng: &mut dyn RngCore, rate: f64) -> Rewritten {
    let mut taken = taken_names(pu);
    let mut map = BTreeMap::new();
    for n in renamable(pu) {
        if n.chars().count() < 3 || !rng.random_bool(rate) {
            continue;
        }
        for _ in 0..5 {
            let t = typo(&n, rng);
            if t != n && valid_new_name(&t) && !taken.contains(&t) {
                taken.insert(t.clone());
                map.insert(n.clone(), t);
                break;
            }
        }
    }
    finish(pu, map, "no identifiers were changed")
}

fn finish(pu: &ParsedUnit, proposals: BTreeMap<String, String>, empty_note: &str) -> Rewritten {
    let (map, notes) = validate_map(pu, &proposals);
    if map.is_empty() {
        let mut r = Rewritten::noop(empty_note);
        r.notes.extend(notes);
        return r;
    }
    let mut r = apply_renames(pu, &map);
    r.notes = notes;
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse::parse;

    const SRC: &str = "#include <string.h>\nstruct pt { int total_sum; };\nstatic int callCount = 0;\nint add_all(const int *vals, int n) {\n  int total_sum = 0;\n  callCount++;\n  for (int i = 0; i < n; i++) total_sum += vals[i];\n  return total_sum + (int)strlen(\"x\");\n}\n";

    #[test]
    fn members_library_calls_and_main_are_kept() {
        let r = renamable(&parse(SRC));
        assert!(r.contains(&"add_all".to_string()) && r.contains(&"callCount".to_string()));
        assert!(!r.contains(&"total_sum".to_string()), "struct member spelling must stay");
        assert!(!r.contains(&"strlen".to_string()));
    }

    #[test]
    fn short_identifiers_first_occurrence_order() {
        let src = "int f(int total_sum) { return total_sum * 2; }\n";
        let r = short_identifiers(&parse(src));
        assert_eq!(r.symbol_map.get("f").map(String::as_str), Some("a"));
        assert_eq!(r.symbol_map.get("total_sum").map(String::as_str), Some("b"));
        assert_eq!(r.text, "int a(int b) { return b * 2; }\n");
    }

    #[test]
    fn convention_swap_both_ways() {
        assert_eq!(to_camel("total_sum").as_deref(), Some("totalSum"));
        assert_eq!(to_camel("_x_y").as_deref(), Some("_xY"));
        assert_eq!(to_snake("callCount").as_deref(), Some("call_count"));
        assert_eq!(to_snake("N"), None);
        let r = naming_convention_swap(&parse(SRC));
        assert!(r.text.contains("int addAll(") && r.text.contains("call_count++"), "{}", r.text);
    }

    #[test]
    fn short_names_sequence() {
        assert_eq!(short_name(0), "a");
        assert_eq!(short_name(25), "z");
        assert_eq!(short_name(26), "aa");
        assert_eq!(short_name(27), "ab");
    }

    #[test]
    fn clashing_proposals_are_dropped() {
        let pu = parse("int a; int f(int b) { return a + b; }\n");
        let props = BTreeMap::from([("b".to_string(), "a".to_string()), ("f".to_string(), "2x".to_string())]);
        let (m, notes) = validate_map(&pu, &props);
        assert!(m.is_empty());
        assert_eq!(notes.len(), 2);
    }
}
