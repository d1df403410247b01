//! Rule-based transformations: comments, layout, inserted code, loops and conditions.

use super::code::{after_includes, apply_edits, is_ident, rewrite, rewrite_file, Code};
use super::Rewritten;
use crate::corpus::lex::{Lexed, TokenKind};
use crate::corpus::parse::{parse_int_literal, ParsedUnit};
use crate::corpus::{CType, DeclType};
use rand::{Rng, RngCore};
use std::collections::BTreeSet;

pub(crate) fn comment_removal(lx: &Lexed) -> Rewritten {
    let edits: Vec<(usize, usize, String)> = lx
        .tokens
        .iter()
        .filter(|t| t.is_comment())
        .map(|t| (t.start, t.end, if t.kind == TokenKind::BlockComment { " ".to_string() } else { String::new() }))
        .collect();
    if edits.is_empty() {
        return Rewritten::noop("no comments to remove");
    }
    Rewritten::text(apply_edits(&lx.text, edits))
}

fn typo_word(w: &str, rng: &mut dyn RngCore) -> String {
    let mut c: Vec<char> = w.chars().collect();
    let i = rng.random_range(1..c.len() - 2);
    c.swap(i, i + 1);
    c.into_iter().collect()
}

/// Swaps two adjacent interior letters in some words of each comment.
pub(crate) fn comment_typos(lx: &Lexed, rng: &mut dyn RngCore, rate: f64) -> Rewritten {
    let mut edits = Vec::new();
    for t in lx.tokens.iter().filter(|t| t.is_comment()) {
        let body = &lx.text[t.span()];
        let mut out = String::with_capacity(body.len());
        let mut word = String::new();
        let flush = |word: &mut String, out: &mut String, rng: &mut dyn RngCore| {
            if word.chars().count() >= 4 && word.chars().all(|c| c.is_ascii_alphabetic()) && rng.random_bool(rate) {
                out.push_str(&typo_word(word, rng));
            } else {
                out.push_str(word);
            }
            word.clear();
        };
        for ch in body.chars() {
            if ch.is_ascii_alphabetic() {
                word.push(ch);
            } else {
                flush(&mut word, &mut out, rng);
                out.push(ch);
            }
        }
        flush(&mut word, &mut out, rng);
        if out != body {
            edits.push((t.start, t.end, out));
        }
    }
    if edits.is_empty() {
        return Rewritten::noop("no comment words were changed");
    }
    Rewritten::text(apply_edits(&lx.text, edits))
}

/// Re-indents every code line by brace depth with `unit`.
pub(crate) fn indentation_reformat(lx: &Lexed, unit: &str) -> Rewritten {
    let toks = &lx.tokens;
    let mut depth = 0usize;
    let mut edits = Vec::new();
    for i in 0..toks.len() {
        let t = toks[i];
        if !t.is_trivia() && !t.in_directive && t.kind == TokenKind::Punct {
            match lx.tok(i) {
                "{" => depth += 1,
                "}" => depth = depth.saturating_sub(1),
                _ => {}
            }
        }
        if t.kind != TokenKind::Newline {
            continue;
        }
        let (ws, first) = match toks.get(i + 1) {
            Some(n) if n.kind == TokenKind::Whitespace && !lx.tok(i + 1).contains('\\') => (Some(i + 1), i + 2),
            _ => (None, i + 1),
        };
        let Some(f) = toks.get(first) else { continue };
        if f.kind == TokenKind::Newline || f.in_directive || f.kind == TokenKind::Whitespace {
            continue;
        }
        let level = if lx.tok(first) == "}" { depth.saturating_sub(1) } else { depth };
        let indent = unit.repeat(level);
        match ws {
            Some(w) => edits.push((toks[w].start, toks[w].end, indent)),
            None if !indent.is_empty() => edits.push((t.end, t.end, indent)),
            None => {}
        }
    }
    Rewritten::text(apply_edits(&lx.text, edits))
}

fn integer_literal(s: &str) -> bool {
    let lower = s.to_ascii_lowercase();
    let is_hex = lower.starts_with("0x");
    !lower.contains('.') && (is_hex || !lower.contains('e')) && !lower.contains('p') && parse_int_literal(s).is_some()
}

/// Replaces integer literals (other than 0 and 1) inside function bodies by
/// named macros defined after the includes.
pub(crate) fn constant_insertion(pu: &ParsedUnit) -> Rewritten {
    let lx = &pu.lexed;
    let taken = pu.all_identifiers();
    let mut names: Vec<(String, String)> = Vec::new();
    let mut edits = Vec::new();
    for f in &pu.functions {
        for i in f.body_open..=f.body_close {
            let t = lx.tokens[i];
            if t.kind != TokenKind::Number || t.in_directive {
                continue;
            }
            let lit = lx.tok(i);
            if !integer_literal(lit) || matches!(parse_int_literal(lit), Some(0 | 1)) {
                continue;
            }
            let name = match names.iter().find(|(l, _)| l == lit) {
                Some((_, n)) => n.clone(),
                None => {
                    let base: String = lit.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' }).collect();
                    let mut n = format!("CONST_{base}");
                    while taken.contains(&n) || names.iter().any(|(_, x)| *x == n) {
                        n.push('_');
                    }
                    names.push((lit.to_string(), n.clone()));
                    n
                }
            };
            edits.push((t.start, t.end, name));
        }
    }
    if names.is_empty() {
        return Rewritten::noop("no integer literals to name");
    }
    let mut block = String::new();
    if after_includes(lx) > 0 && !lx.text[..after_includes(lx)].ends_with('\n') {
        block.push('\n');
    }
    for (lit, n) in &names {
        block.push_str(&format!("#define {n} {lit}\n"));
    }
    let at = after_includes(lx);
    edits.push((at, at, block));
    Rewritten::text(apply_edits(&lx.text, edits))
}

/// Inserts a statement from a fixed pool at the start of each function body.
pub(crate) fn dead_code_insertion(pu: &ParsedUnit) -> Rewritten {
    let lx = &pu.lexed;
    let mut taken = pu.all_identifiers();
    let mut edits = Vec::new();
    for (k, f) in pu.functions.iter().enumerate() {
        let returns_value = match &f.return_type {
            DeclType::Void => Some(false),
            DeclType::Supported { ctype: CType::Scalar { .. } | CType::Pointer { .. } | CType::Str { .. } } => Some(true),
            _ => None,
        };
        let snippet = match (k % 3, returns_value) {
            (0, _) => {
                let mut n = format!("unused_local_{k}");
                while taken.contains(&n) {
                    n.push('_');
                }
                taken.insert(n.clone());
                format!(" int {n} = 0; (void){n};")
            }
            (1, Some(false)) => " if (0) { return; }".to_string(),
            (1, Some(true)) => " if (0) { return 0; }".to_string(),
            _ => " while (0) { }".to_string(),
        };
        let at = lx.tokens[f.body_open].end;
        edits.push((at, at, snippet));
    }
    if edits.is_empty() {
        return Rewritten::noop("no function bodies");
    }
    Rewritten::text(apply_edits(&lx.text, edits))
}

const HEADER_DECLS: &[(&str, &[(&str, &str)])] = &[
    ("stdio.h", &[("puts", "int (puts)(const char *);"), ("putchar", "int (putchar)(int);"), ("printf", "int (printf)(const char *, ...);")]),
    ("stdlib.h", &[("abs", "int (abs)(int);"), ("atoi", "int (atoi)(const char *);"), ("free", "void (free)(void *);")]),
    ("string.h", &[("strlen", "size_t (strlen)(const char *);"), ("strcmp", "int (strcmp)(const char *, const char *);"), ("memset", "void *(memset)(void *, int, size_t);")]),
    ("math.h", &[("fabs", "double (fabs)(double);"), ("sqrt", "double (sqrt)(double);")]),
    ("ctype.h", &[("isdigit", "int (isdigit)(int);"), ("toupper", "int (toupper)(int);")]),
];

/// Redeclares a few standard functions of headers the file already includes.
pub(crate) fn include_declaration_insertion(pu: &ParsedUnit) -> Rewritten {
    let defined = pu.declared_value_names();
    let mut block = String::new();
    for inc in &pu.includes {
        let name = inc.trim_matches(|c| c == '<' || c == '>' || c == '"');
        if let Some((_, decls)) = HEADER_DECLS.iter().find(|(h, _)| *h == name) {
            for (f, d) in decls.iter() {
                if !defined.contains(*f) && !pu.macros.iter().any(|m| m.name == *f) {
                    block.push_str(d);
                    block.push('\n');
                }
            }
        }
    }
    if block.is_empty() {
        return Rewritten::noop("no standard header with known declarations is included");
    }
    let lx = &pu.lexed;
    let at = after_includes(lx);
    Rewritten::text(apply_edits(&lx.text, vec![(at, at, block)]))
}

fn split_args(cd: &Code, open: usize, close: usize) -> Vec<(usize, usize)> {
    if close == open + 1 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut start = open + 1;
    for c in cd.top_level(open + 1, close - 1, ",") {
        out.push((start, c - 1));
        start = c + 1;
    }
    out.push((start, close - 1));
    out
}

/// Rotates the parameters of each eligible function left by one and updates
/// prototypes and call sites.
pub(crate) fn signature_change(pu: &ParsedUnit) -> Rewritten {
    let lx = &pu.lexed;
    let cd = Code::new(lx);
    let mut directive_idents = BTreeSet::new();
    for (i, t) in lx.tokens.iter().enumerate() {
        if t.in_directive && t.kind == TokenKind::Ident {
            directive_idents.insert(lx.tok(i).to_string());
        }
    }
    let mut edits = Vec::new();
    let mut out = Rewritten::default();
    for f in &pu.functions {
        let n = f.params.len();
        if n < 2 || f.variadic || f.name == "main" || directive_idents.contains(&f.name) {
            continue;
        }
        // Every use must be a direct call or a declaration we can rewrite.
        let decl_names: BTreeSet<usize> = std::iter::once(f.name_tok)
            .chain(pu.prototypes.iter().filter(|p| p.name == f.name).map(|p| p.name_tok))
            .filter_map(|r| cd.of_raw(r))
            .collect();
        let uses: Vec<usize> = (0..cd.len()).filter(|&j| cd.t(j) == f.name && !decl_names.contains(&j)).collect();
        if uses.iter().any(|&j| cd.t(j + 1) != "(") {
            continue;
        }
        let mut lists: Vec<(usize, usize)> = decl_names.iter().map(|&j| (j + 1, cd.matching(j + 1).unwrap_or(j + 1))).collect();
        lists.extend(uses.iter().map(|&j| (j + 1, cd.matching(j + 1).unwrap_or(j + 1))));
        let mut ok = true;
        let mut local = Vec::new();
        for (open, close) in lists {
            let parts = split_args(&cd, open, close);
            if parts.len() != n {
                ok = false;
                break;
            }
            let texts: Vec<&str> = parts.iter().map(|&(a, b)| cd.slice(a, b)).collect();
            let rotated: Vec<&str> = (0..n).map(|i| texts[(i + 1) % n]).collect();
            local.push((cd.start(parts[0].0), cd.end(parts[n - 1].1), rotated.join(", ")));
        }
        if !ok {
            continue;
        }
        edits.extend(local);
        out.param_orders.insert(f.name.clone(), (0..n).map(|i| (i + 1) % n).collect());
    }
    if edits.is_empty() {
        return Rewritten::noop("no function with two or more parameters whose uses are all direct calls");
    }
    out.text = apply_edits(&lx.text, edits);
    out
}

fn for_while_hook(cd: &Code, j: usize) -> Option<(usize, String)> {
    match cd.t(j) {
        "do" => {
            let body_end = cd.stmt_end(j + 1)?;
            let end = cd.stmt_end(j)?;
            let body = rewrite(cd, j + 1, body_end, &for_while_hook);
            Some((end, format!("do{}{}{}", cd.between(j, j + 1), body, &cd.lx.text[cd.end(body_end)..cd.end(end)])))
        }
        "while" => {
            let close = cd.matching(j + 1)?;
            let end = cd.stmt_end(close + 1)?;
            let cond = cd.slice(j + 2, close - 1).trim().to_string();
            let body = rewrite(cd, close + 1, end, &for_while_hook);
            Some((end, format!("for (; {cond}; ) {body}")))
        }
        "for" => {
            let close = cd.matching(j + 1)?;
            let semis = cd.top_level(j + 2, close - 1, ";");
            if semis.len() != 2 {
                return None;
            }
            let end = cd.stmt_end(close + 1)?;
            let part = |a: usize, b: usize| if b > a { cd.slice(a, b - 1).trim().to_string() } else { String::new() };
            let init = part(j + 2, semis[0]);
            let cond = part(semis[0] + 1, semis[1]);
            let step = part(semis[1] + 1, close);
            if !step.is_empty() && cd.contains(close + 1, end, "continue") {
                return None;
            }
            let cond = if cond.is_empty() { "1".to_string() } else { cond };
            let unwrap = cd.t(close + 1) == "{" && (end == close + 2 || !may_declare(cd, close + 2, end - 1));
            let body = if unwrap {
                if end > close + 2 {
                    rewrite(cd, close + 2, end - 1, &for_while_hook)
                } else {
                    String::new()
                }
            } else {
                rewrite(cd, close + 1, end, &for_while_hook)
            };
            let step = if step.is_empty() { String::new() } else { format!(" {step};") };
            let lp = format!("while ({cond}) {{ {body}{step} }}");
            Some((end, if init.is_empty() { lp } else { format!("{{ {init}; {lp} }}") }))
        }
        _ => None,
    }
}

const TYPE_WORDS: &[&str] = &[
    "int", "char", "short", "long", "unsigned", "signed", "float", "double", "void", "_Bool", "bool", "struct", "union",
    "enum", "const", "static", "volatile", "register", "typedef", "extern", "auto",
];

/// Conservative test for a declaration among tokens `a..=b`.
fn may_declare(cd: &Code, a: usize, b: usize) -> bool {
    let ident = |k: usize| cd.kind(k) == Some(TokenKind::Ident) && !crate::corpus::lex::is_keyword(cd.t(k));
    (a..=b).any(|k| {
        TYPE_WORDS.contains(&cd.t(k))
            || (k < b && ident(k) && ident(k + 1))
            || (k + 3 <= b
                && (k == a || matches!(cd.t(k - 1), "{" | "}" | ";"))
                && ident(k)
                && cd.t(k + 1) == "*"
                && ident(k + 2)
                && matches!(cd.t(k + 3), "=" | ";" | "," | "["))
    })
}

/// `for` loops become `while` loops and `while` loops become `for` loops.
pub(crate) fn for_while_swap(lx: &Lexed) -> Rewritten {
    let out = rewrite_file(lx, &for_while_hook);
    if out == lx.text {
        return Rewritten::noop("no loops to swap");
    }
    Rewritten::text(out)
}

fn condition_swap_hook(cd: &Code, j: usize) -> Option<(usize, String)> {
    if cd.t(j) != "if" {
        return None;
    }
    let close = cd.matching(j + 1)?;
    let then_end = cd.stmt_end(close + 1)?;
    if cd.t(then_end + 1) != "else" {
        return None;
    }
    let else_end = cd.stmt_end(then_end + 2)?;
    let cond = cd.slice(j + 2, close - 1).trim();
    let then_txt = rewrite(cd, close + 1, then_end, &condition_swap_hook);
    let else_txt = rewrite(cd, then_end + 2, else_end, &condition_swap_hook);
    Some((else_end, format!("if (!({cond})) {{ {else_txt} }} else {{ {then_txt} }}")))
}

/// `if (c) A else B` becomes `if (!(c)) { B } else { A }`.
pub(crate) fn condition_swap(lx: &Lexed) -> Rewritten {
    let out = rewrite_file(lx, &condition_swap_hook);
    if out == lx.text {
        return Rewritten::noop("no if/else statements");
    }
    Rewritten::text(out)
}

/// Conditions of side-effect-free `if`/`while` statements are repeated with `&&`.
pub(crate) fn condition_duplication(lx: &Lexed) -> Rewritten {
    let cd = Code::new(lx);
    let mut edits = Vec::new();
    for j in 0..cd.len() {
        if !matches!(cd.t(j), "if" | "while") || cd.t(j + 1) != "(" {
            continue;
        }
        let Some(close) = cd.matching(j + 1) else { continue };
        if close == j + 2 || cd.has_side_effects(j + 2, close - 1) {
            continue;
        }
        let cond = cd.slice(j + 2, close - 1).trim();
        edits.push((cd.start(j + 2), cd.end(close - 1), format!("({cond}) && ({cond})")));
    }
    if edits.is_empty() {
        return Rewritten::noop("no side-effect-free conditions");
    }
    Rewritten::text(apply_edits(&lx.text, edits))
}

fn negate(cd: &Code, a: usize, b: usize) -> String {
    let s = cd.slice(a, b).trim();
    let atomic = a == b || (cd.t(a) == "(" && cd.matching(a) == Some(b));
    if atomic {
        format!("!{s}")
    } else {
        format!("!({s})")
    }
}

fn split_top(cd: &Code, a: usize, b: usize) -> Option<(&'static str, Vec<(usize, usize)>)> {
    for (op, dual) in [("||", "&&"), ("&&", "||")] {
        let seps = cd.top_level(a, b, op);
        if seps.is_empty() {
            continue;
        }
        let mut parts = Vec::new();
        let mut s = a;
        for p in seps {
            parts.push((s, p - 1));
            s = p + 1;
        }
        parts.push((s, b));
        if parts.iter().any(|&(x, y)| y < x) {
            return None;
        }
        // Any top-level `?:` or `,` would change meaning when split.
        if !cd.top_level(a, b, "?").is_empty() || !cd.top_level(a, b, ",").is_empty() {
            return None;
        }
        return Some((dual, parts));
    }
    None
}

/// `!(a && b)` becomes `!a || !b` and `!(a || b)` becomes `!a && !b`. Files
/// without such negations get `if (a && b)` rewritten as `if (!(!a || !b))`.
pub(crate) fn de_morgan(lx: &Lexed) -> Rewritten {
    let cd = Code::new(lx);
    let mut edits = Vec::new();
    let mut covered = 0usize;
    for j in 0..cd.len() {
        if j < covered || cd.t(j) != "!" || cd.t(j + 1) != "(" {
            continue;
        }
        let Some(close) = cd.matching(j + 1) else { continue };
        if close == j + 2 {
            continue;
        }
        let Some((dual, parts)) = split_top(&cd, j + 2, close - 1) else { continue };
        let body = parts.iter().map(|&(a, b)| negate(&cd, a, b)).collect::<Vec<_>>().join(&format!(" {dual} "));
        let bare = j > 0 && cd.t(j - 1) == "(" && cd.t(close + 1) == ")";
        edits.push((cd.start(j), cd.end(close), if bare { body } else { format!("({body})") }));
        covered = close + 1;
    }
    if edits.is_empty() {
        for j in 0..cd.len() {
            if !matches!(cd.t(j), "if" | "while") || cd.t(j + 1) != "(" {
                continue;
            }
            let Some(close) = cd.matching(j + 1) else { continue };
            if close == j + 2 {
                continue;
            }
            let Some((dual, parts)) = split_top(&cd, j + 2, close - 1) else { continue };
            let body = parts.iter().map(|&(a, b)| negate(&cd, a, b)).collect::<Vec<_>>().join(&format!(" {dual} "));
            edits.push((cd.start(j + 2), cd.end(close - 1), format!("!({body})")));
        }
    }
    if edits.is_empty() {
        return Rewritten::noop("no boolean conditions with && or ||");
    }
    Rewritten::text(apply_edits(&lx.text, edits))
}

/// Simple identifier check reused by renaming.
pub(crate) fn valid_new_name(s: &str) -> bool {
    is_ident(s) && !s.starts_with("__")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse::parse;
    use rand::SeedableRng;

    fn lx(s: &str) -> Lexed {
        Lexed::new(s)
    }

    #[test]
    fn de_morgan_negated_conjunction() {
        let r = de_morgan(&lx("int f(int a, int b) { if (!(a && b)) return 1; return 0; }"));
        assert!(r.text.contains("if (!a || !b)"), "{}", r.text);
        let r = de_morgan(&lx("int g(int x, int a, int b) { return x && !(a > 1 || b); }"));
        assert!(r.text.contains("x && (!(a > 1) && !b)"), "{}", r.text);
    }

    #[test]
    fn de_morgan_positive_condition_fallback() {
        let r = de_morgan(&lx("int f(int a, int b) { if (a && b < 3) return 1; return 0; }"));
        assert!(r.text.contains("if (!(!a || !(b < 3)))"), "{}", r.text);
    }

    #[test]
    fn for_becomes_while() {
        let r = for_while_swap(&lx("int s(int n) { int i, s = 0; for(i=0;i<n;i++){s+=i;} return s; }"));
        assert!(r.text.contains("{ i=0; while (i<n) { s+=i; i++; } }"), "{}", r.text);
    }

    #[test]
    fn while_becomes_for_and_do_while_is_kept() {
        let r = for_while_swap(&lx("void f(int n) { while (n > 0) n--; do { n++; } while (n < 3); }"));
        assert!(r.text.contains("for (; n > 0; ) n--;"), "{}", r.text);
        assert!(r.text.contains("do { n++; } while (n < 3);"), "{}", r.text);
    }

    #[test]
    fn for_with_continue_is_left_alone() {
        let src = "void f(int n) { for (int i = 0; i < n; i++) { if (i) continue; } }";
        assert!(!for_while_swap(&lx(src)).text.contains("while"));
    }

    #[test]
    fn nested_loops_are_rewritten() {
        let r = for_while_swap(&lx("void f(int n) { for (int i = 0; i < n; i++) for (int j = 0; j < i; j++) g(i, j); }"));
        assert!(!r.text.contains("for"), "{}", r.text);
        assert_eq!(r.text.matches("while").count(), 2);
    }

    #[test]
    fn condition_swap_braces_branches() {
        let r = condition_swap(&lx("int f(int a) { if (a > 0) return 1; else if (a < 0) return 2; return 0; }"));
        assert!(r.text.contains("if (!(a > 0)) { if (a < 0) return 2; } else { return 1; }"), "{}", r.text);
    }

    #[test]
    fn condition_duplication_skips_side_effects() {
        let r = condition_duplication(&lx("void f(int x) { if (x>0) x = 1; while (x-- > 0) {} if (g(x)) {} }"));
        assert!(r.text.contains("if ((x>0) && (x>0))"), "{}", r.text);
        assert!(r.text.contains("while (x-- > 0)"));
        assert!(r.text.contains("if (g(x))"));
    }

    #[test]
    fn signature_rotation_updates_calls() {
        let src = "int sub(int a, int b);\nint sub(int a, int b) { return a - b; }\nint use(void) { return sub(5, 3); }\n";
        let r = signature_change(&parse(src));
        assert!(r.text.contains("int sub(int b, int a);"), "{}", r.text);
        assert!(r.text.contains("sub(3, 5)"), "{}", r.text);
        assert_eq!(r.param_orders["sub"], vec![1, 0]);
    }

    #[test]
    fn signature_change_skips_address_taken() {
        let src = "int sub(int a, int b) { return a - b; }\nint (*fp)(int, int) = sub;\n";
        assert!(signature_change(&parse(src)).noop.is_some());
    }

    #[test]
    fn comments_removed_and_typoed() {
        let src = "// leading comment\nint f(void) { /* inner words here */ return 1; }\n";
        let r = comment_removal(&lx(src));
        assert!(!r.text.contains("comment") && r.text.contains("return 1;"));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let t = comment_typos(&lx(src), &mut rng, 1.0);
        assert_ne!(t.text, src);
        assert!(t.text.contains("return 1;"));
        assert_eq!(t.text.len(), src.len());
    }

    #[test]
    fn reindent_by_depth() {
        let r = indentation_reformat(&lx("int f(int x)\n{\n      if (x) {\n  return 1;\n }\nreturn 0;\n}\n#define A 1\n"), "\t");
        assert_eq!(r.text, "int f(int x)\n{\n\tif (x) {\n\t\treturn 1;\n\t}\n\treturn 0;\n}\n#define A 1\n");
    }

    #[test]
    fn constants_and_dead_code() {
        let src = "#include <stdio.h>\nint f(int x) { return x * 10 + 0x1f + 1; }\nvoid g(void) { }\n";
        let r = constant_insertion(&parse(src));
        assert!(r.text.contains("#define CONST_10 10\n"), "{}", r.text);
        assert!(r.text.contains("x * CONST_10 + CONST_0X1F + 1"), "{}", r.text);
        let d = dead_code_insertion(&parse(src));
        assert!(d.text.contains("int unused_local_0 = 0;"));
        assert!(d.text.contains("if (0) { return; }"));
    }

    #[test]
    fn include_declarations() {
        let src = "#include <string.h>\nint f(const char *s) { return (int)strlen(s); }\n";
        let r = include_declaration_insertion(&parse(src));
        assert!(r.text.contains("size_t (strlen)(const char *);"));
        assert!(include_declaration_insertion(&parse("int x;\n")).noop.is_some());
    }
}
