//! Token-level helpers shared by the source transformations.

use crate::corpus::lex::{Lexed, TokenKind};

/// Code tokens (no trivia, no preprocessor lines) of a file.
pub(crate) struct Code<'a> {
    pub lx: &'a Lexed,
    /// Raw token index of each code token.
    pub idx: Vec<usize>,
}

impl<'a> Code<'a> {
    pub fn new(lx: &'a Lexed) -> Self {
        Code { idx: lx.code(), lx }
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn t(&self, j: usize) -> &str {
        if j < self.idx.len() {
            self.lx.tok(self.idx[j])
        } else {
            ""
        }
    }

    pub fn kind(&self, j: usize) -> Option<TokenKind> {
        self.idx.get(j).map(|&i| self.lx.tokens[i].kind)
    }

    pub fn start(&self, j: usize) -> usize {
        self.lx.tokens[self.idx[j]].start
    }

    pub fn end(&self, j: usize) -> usize {
        self.lx.tokens[self.idx[j]].end
    }

    /// Source text covering code tokens `a..=b`, trivia included.
    pub fn slice(&self, a: usize, b: usize) -> &str {
        &self.lx.text[self.start(a)..self.end(b)]
    }

    /// Text strictly between code tokens `a` and `b`.
    pub fn between(&self, a: usize, b: usize) -> &str {
        &self.lx.text[self.end(a)..self.start(b)]
    }

    /// Code index of a raw token index.
    pub fn of_raw(&self, raw: usize) -> Option<usize> {
        self.idx.binary_search(&raw).ok()
    }

    /// Index of the bracket closing the one at `j`.
    pub fn matching(&self, j: usize) -> Option<usize> {
        let (open, close) = match self.t(j) {
            "(" => ("(", ")"),
            "[" => ("[", "]"),
            "{" => ("{", "}"),
            _ => return None,
        };
        let mut depth = 0usize;
        for k in j..self.len() {
            let s = self.t(k);
            if s == open {
                depth += 1;
            } else if s == close {
                depth -= 1;
                if depth == 0 {
                    return Some(k);
                }
            }
        }
        None
    }

    /// Positions of top-level occurrences of `sep` within `a..=b`.
    pub fn top_level(&self, a: usize, b: usize, sep: &str) -> Vec<usize> {
        let mut out = Vec::new();
        let mut depth = 0i32;
        for k in a..=b {
            match self.t(k) {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                s if depth == 0 && s == sep => out.push(k),
                _ => {}
            }
        }
        out
    }

    /// Last token of the statement starting at `j`.
    pub fn stmt_end(&self, j: usize) -> Option<usize> {
        if j >= self.len() {
            return None;
        }
        match self.t(j) {
            "{" => self.matching(j),
            "if" => {
                let close = self.matching(j + 1)?;
                let e = self.stmt_end(close + 1)?;
                if self.t(e + 1) == "else" {
                    self.stmt_end(e + 2)
                } else {
                    Some(e)
                }
            }
            "for" | "while" | "switch" => {
                let close = self.matching(j + 1)?;
                self.stmt_end(close + 1)
            }
            "do" => {
                let e = self.stmt_end(j + 1)?;
                if self.t(e + 1) != "while" {
                    return None;
                }
                let close = self.matching(e + 2)?;
                (self.t(close + 1) == ";").then_some(close + 1)
            }
            "case" | "default" => {
                let colon = (j..self.len()).find(|&k| self.t(k) == ":")?;
                self.stmt_end(colon + 1)
            }
            ";" => Some(j),
            _ if self.kind(j) == Some(TokenKind::Ident) && self.t(j + 1) == ":" && self.t(j + 2) != ":" => self.stmt_end(j + 2),
            _ => {
                let mut depth = 0i32;
                for k in j..self.len() {
                    match self.t(k) {
                        "(" | "[" | "{" => depth += 1,
                        ")" | "]" | "}" => {
                            depth -= 1;
                            if depth < 0 {
                                return None;
                            }
                        }
                        ";" if depth == 0 => return Some(k),
                        _ => {}
                    }
                }
                None
            }
        }
    }

    /// True if tokens `a..=b` may modify state or call a function.
    pub fn has_side_effects(&self, a: usize, b: usize) -> bool {
        (a..=b).any(|k| {
            let s = self.t(k);
            match self.kind(k) {
                Some(TokenKind::Punct) => {
                    s == "++" || s == "--" || (s.ends_with('=') && !matches!(s, "==" | "!=" | "<=" | ">="))
                }
                Some(TokenKind::Ident) => {
                    self.t(k + 1) == "(" && !crate::corpus::lex::is_keyword(s) && k < b
                }
                _ => false,
            }
        })
    }

    pub fn contains(&self, a: usize, b: usize, word: &str) -> bool {
        (a..=b).any(|k| self.t(k) == word)
    }
}

/// Applies non-overlapping `(start, end, replacement)` edits; overlapping
/// later edits are dropped.
pub(crate) fn apply_edits(text: &str, mut edits: Vec<(usize, usize, String)>) -> String {
    edits.sort_by_key(|e| (e.0, e.1));
    let mut out = String::with_capacity(text.len() + 64);
    let mut pos = 0;
    for (s, e, r) in edits {
        if s < pos {
            continue;
        }
        out.push_str(&text[pos..s]);
        out.push_str(&r);
        pos = e;
    }
    out.push_str(&text[pos..]);
    out
}

/// Rewrites code tokens `a..=b`. `hook` may claim a construct starting at a
/// token by returning its last token and replacement text.
pub(crate) fn rewrite(cd: &Code, a: usize, b: usize, hook: &dyn Fn(&Code, usize) -> Option<(usize, String)>) -> String {
    let text = &cd.lx.text;
    let mut out = String::new();
    let mut pos = cd.start(a);
    let mut j = a;
    while j <= b {
        if let Some((end, rep)) = hook(cd, j).filter(|(end, _)| *end <= b) {
            out.push_str(&text[pos..cd.start(j)]);
            out.push_str(&rep);
            pos = cd.end(end);
            j = end + 1;
        } else {
            j += 1;
        }
    }
    out.push_str(&text[pos..cd.end(b)]);
    out
}

/// Rewrites the whole file with `hook`, keeping text outside code tokens.
pub(crate) fn rewrite_file(lx: &Lexed, hook: &dyn Fn(&Code, usize) -> Option<(usize, String)>) -> String {
    let cd = Code::new(lx);
    if cd.len() == 0 {
        return lx.text.clone();
    }
    let body = rewrite(&cd, 0, cd.len() - 1, hook);
    format!("{}{}{}", &lx.text[..cd.start(0)], body, &lx.text[cd.end(cd.len() - 1)..])
}

/// Byte offset just after the last `#include` line, or 0.
pub(crate) fn after_includes(lx: &Lexed) -> usize {
    let mut pos = 0;
    for (i, t) in lx.tokens.iter().enumerate() {
        if t.in_directive && t.kind == TokenKind::Ident && lx.tok(i) == "include" {
            let nl = lx.text[t.end..].find('\n').map_or(lx.text.len(), |p| t.end + p + 1);
            pos = nl;
        }
    }
    pos
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch == '_' || ch.is_ascii_alphabetic()) && c.all(|ch| ch == '_' || ch.is_ascii_alphanumeric())
}
