//! Lightweight declaration parser.
//!
//! Recognises file-scope declarations, function definitions, typedefs and
//! macros well enough to describe function interfaces. Expressions are not
//! parsed; function bodies are only scanned for locals, identifier uses,
//! writes, calls and decision points.

use super::lex::{is_keyword, Lexed, TokenKind};
use super::types::{CType, DeclType, FunctionInterface, GlobalRef, Param, Scalar};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone)]
pub struct ParamDecl {
    pub name: String,
    pub ty: DeclType,
    /// Token index of the parameter name, if named.
    pub name_tok: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct FunctionDef {
    pub name: String,
    pub is_static: bool,
    pub return_type: DeclType,
    pub params: Vec<ParamDecl>,
    pub variadic: bool,
    pub name_tok: usize,
    pub params_open: usize,
    pub params_close: usize,
    pub body_open: usize,
    pub body_close: usize,
    pub locals: Vec<String>,
    pub idents: BTreeSet<String>,
    pub writes: BTreeSet<String>,
    pub calls: BTreeSet<String>,
    /// Binary decision points (`if`, `for`, `while`, `case`, `&&`, `||`, `?`).
    pub decisions: u32,
}

#[derive(Debug, Clone)]
pub struct Prototype {
    pub name: String,
    pub name_tok: usize,
    pub params_open: usize,
    pub params_close: usize,
}

#[derive(Debug, Clone)]
pub struct GlobalVar {
    pub name: String,
    pub ty: DeclType,
    pub is_static: bool,
    pub is_const: bool,
    pub is_extern: bool,
    pub name_tok: usize,
}

#[derive(Debug, Clone)]
pub struct MacroDef {
    pub name: String,
    /// `Some` for function-like macros.
    pub params: Option<Vec<String>>,
    pub int_value: Option<i64>,
    pub name_tok: usize,
}

#[derive(Debug, Clone)]
pub struct ParsedUnit {
    pub lexed: Lexed,
    pub functions: Vec<FunctionDef>,
    pub prototypes: Vec<Prototype>,
    pub globals: Vec<GlobalVar>,
    pub macros: Vec<MacroDef>,
    pub includes: Vec<String>,
    /// Type names, tags, member names and enum constants.
    pub type_like_names: BTreeSet<String>,
    pub warnings: Vec<String>,
}

impl ParsedUnit {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Identifiers declared in this file as functions, variables or parameters.
    pub fn declared_value_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for f in &self.functions {
            out.insert(f.name.clone());
            out.extend(f.params.iter().filter(|p| p.name_tok.is_some()).map(|p| p.name.clone()));
            out.extend(f.locals.iter().cloned());
        }
        out.extend(self.globals.iter().filter(|g| !g.is_extern).map(|g| g.name.clone()));
        out
    }

    /// Every identifier spelling that occurs anywhere in the file.
    pub fn all_identifiers(&self) -> BTreeSet<String> {
        let lx = &self.lexed;
        (0..lx.tokens.len()).filter(|&i| lx.tokens[i].kind == TokenKind::Ident).map(|i| lx.tok(i).to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Base {
    Scalar(Scalar),
    Void,
    Enum,
    Unsupported(String),
}

#[derive(Debug, Default)]
struct Specs {
    words: Vec<String>,
    base: Option<Base>,
    is_static: bool,
    is_extern: bool,
    is_const: bool,
    is_typedef: bool,
    consumed: usize,
}

#[derive(Debug)]
struct Declarator {
    name: Option<usize>,
    stars: usize,
    arrays: Vec<Vec<usize>>,
    func: Option<(usize, usize)>,
    fn_ptr: bool,
    end: usize,
}

pub fn builtin_typedef(name: &str) -> Option<Scalar> {
    Some(match name {
        "int8_t" | "sint8" | "int_least8_t" => Scalar::I8,
        "int16_t" | "sint16" | "int_least16_t" => Scalar::I16,
        "int32_t" | "sint32" | "int_least32_t" => Scalar::I32,
        "int64_t" | "sint64" | "int_least64_t" | "ssize_t" | "ptrdiff_t" | "intptr_t" | "intmax_t" | "off_t" => {
            Scalar::I64
        }
        "uint8_t" | "uint8" | "boolean" | "uint_least8_t" => Scalar::U8,
        "uint16_t" | "uint16" | "uint_least16_t" => Scalar::U16,
        "uint32_t" | "uint32" | "uint_least32_t" => Scalar::U32,
        "uint64_t" | "uint64" | "uint_least64_t" | "size_t" | "uintptr_t" | "uintmax_t" => Scalar::U64,
        "float32" => Scalar::F32,
        "float64" => Scalar::F64,
        "bool" => Scalar::Bool,
        _ => return None,
    })
}

const STORAGE_SKIP: &[&str] = &[
    "inline",
    "__inline",
    "__inline__",
    "register",
    "auto",
    "_Thread_local",
    "__thread",
    "_Noreturn",
    "__extension__",
];
const QUALIFIERS: &[&str] = &["volatile", "restrict", "__restrict", "__restrict__", "_Atomic", "__volatile__"];
const TYPE_WORDS: &[&str] =
    &["void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "_Bool", "bool", "_Complex"];

struct Parser<'a> {
    lx: &'a Lexed,
    code: Vec<usize>,
    typedefs: BTreeMap<String, Base>,
    int_macros: BTreeMap<String, i64>,
    type_like: BTreeSet<String>,
    warnings: Vec<String>,
}

impl<'a> Parser<'a> {
    fn text(&self, p: usize) -> &'a str {
        match self.code.get(p) {
            Some(&i) => &self.lx.text[self.lx.tokens[i].span()],
            None => "",
        }
    }

    fn kind(&self, p: usize) -> Option<TokenKind> {
        self.code.get(p).map(|&i| self.lx.tokens[i].kind)
    }

    fn is_ident(&self, p: usize) -> bool {
        self.kind(p) == Some(TokenKind::Ident)
    }

    fn is_type_name(&self, name: &str) -> bool {
        self.typedefs.contains_key(name) || builtin_typedef(name).is_some()
    }

    /// Position of the bracket matching the opener at `p`.
    fn match_close(&self, p: usize) -> usize {
        let (open, close) = match self.text(p) {
            "(" => ("(", ")"),
            "[" => ("[", "]"),
            "{" => ("{", "}"),
            _ => return p,
        };
        let mut depth = 0usize;
        let mut q = p;
        while q < self.code.len() {
            let t = self.text(q);
            if t == open {
                depth += 1;
            } else if t == close {
                depth -= 1;
                if depth == 0 {
                    return q;
                }
            }
            q += 1;
        }
        self.code.len().saturating_sub(1)
    }

    /// Skips to the next `,` or `;` (or closer) at bracket depth zero.
    fn skip_initializer(&self, mut p: usize) -> usize {
        while p < self.code.len() {
            match self.text(p) {
                "(" | "[" | "{" => p = self.match_close(p) + 1,
                "," | ";" | ")" | "}" => return p,
                _ => p += 1,
            }
        }
        p
    }

    fn skip_statement(&self, mut p: usize) -> usize {
        while p < self.code.len() {
            match self.text(p) {
                "(" | "[" => p = self.match_close(p) + 1,
                "{" => return self.match_close(p) + 1,
                ";" => return p + 1,
                _ => p += 1,
            }
        }
        p
    }

    fn collect_braced_names(&mut self, open: usize, close: usize) {
        for q in open + 1..close {
            if self.is_ident(q) && !is_keyword(self.text(q)) {
                let t = self.text(q).to_string();
                self.type_like.insert(t);
            }
        }
    }

    fn parse_specs(&mut self, start: usize) -> Specs {
        let mut s = Specs::default();
        let mut p = start;
        loop {
            let t = self.text(p);
            if t.is_empty() {
                break;
            }
            if t == "static" {
                s.is_static = true;
            } else if t == "extern" {
                s.is_extern = true;
            } else if t == "typedef" {
                s.is_typedef = true;
            } else if t == "const" {
                s.is_const = true;
            } else if STORAGE_SKIP.contains(&t) || QUALIFIERS.contains(&t) {
            } else if t == "__attribute__" || t == "__declspec" || t == "__asm__" || t == "asm" {
                if self.text(p + 1) == "(" {
                    p = self.match_close(p + 1);
                }
            } else if TYPE_WORDS.contains(&t) && s.base.is_none() {
                s.words.push(t.to_string());
            } else if (t == "struct" || t == "union" || t == "enum") && s.base.is_none() && s.words.is_empty() {
                let mut q = p + 1;
                let mut tag = String::new();
                if self.is_ident(q) {
                    tag = self.text(q).to_string();
                    self.type_like.insert(tag.clone());
                    q += 1;
                }
                if self.text(q) == "{" {
                    let close = self.match_close(q);
                    self.collect_braced_names(q, close);
                    q = close + 1;
                }
                s.base = Some(if t == "enum" { Base::Enum } else { Base::Unsupported(format!("{t} {tag}").trim().to_string()) });
                p = q;
                continue;
            } else if self.is_ident(p) && s.words.is_empty() && s.base.is_none() && !is_keyword(t) {
                if let Some(b) = self.typedefs.get(t) {
                    s.base = Some(b.clone());
                } else if let Some(sc) = builtin_typedef(t) {
                    s.base = Some(Base::Scalar(sc));
                } else if self.is_ident(p + 1) || (self.text(p + 1) == "*" && self.is_ident(p + 2)) {
                    // unknown type name from a header
                    s.base = Some(Base::Unsupported(t.to_string()));
                } else {
                    break;
                }
            } else {
                break;
            }
            p += 1;
        }
        s.consumed = p - start;
        if s.base.is_none() && !s.words.is_empty() {
            s.base = Some(resolve_words(&s.words));
        }
        s
    }

    fn parse_declarator(&self, start: usize) -> Declarator {
        let mut p = start;
        let mut stars = 0;
        while self.text(p) == "*" {
            stars += 1;
            p += 1;
            while self.text(p) == "const" || QUALIFIERS.contains(&self.text(p)) {
                p += 1;
            }
        }
        let mut d = Declarator { name: None, stars, arrays: Vec::new(), func: None, fn_ptr: false, end: p };
        if self.text(p) == "(" && (self.text(p + 1) == "*" || self.text(p + 1) == "^") {
            d.fn_ptr = true;
            let close = self.match_close(p);
            for q in p + 1..close {
                if self.is_ident(q) && !is_keyword(self.text(q)) {
                    d.name = Some(q);
                }
            }
            p = close + 1;
        } else if self.is_ident(p) && !is_keyword(self.text(p)) {
            d.name = Some(p);
            p += 1;
        }
        loop {
            match self.text(p) {
                "[" => {
                    let close = self.match_close(p);
                    d.arrays.push((p + 1..close).collect());
                    p = close + 1;
                }
                "(" => {
                    let close = self.match_close(p);
                    if d.func.is_none() && !d.fn_ptr {
                        d.func = Some((p, close));
                    } else {
                        d.fn_ptr = true;
                    }
                    p = close + 1;
                }
                "__attribute__" | "__asm__" | "asm" if self.text(p + 1) == "(" => {
                    p = self.match_close(p + 1) + 1;
                }
                _ => break,
            }
        }
        d.end = p;
        d
    }

    fn array_extent(&self, toks: &[usize]) -> Option<usize> {
        if toks.len() != 1 {
            return None;
        }
        let t = self.text(toks[0]);
        if let Some(v) = parse_int_literal(t) {
            return usize::try_from(v).ok();
        }
        self.int_macros.get(t).and_then(|&v| usize::try_from(v).ok())
    }

    fn decl_type(&self, base: &Base, spec_const: bool, d: &Declarator, is_param: bool) -> DeclType {
        let spelled = || {
            let mut s = match base {
                Base::Scalar(sc) => sc.to_string(),
                Base::Void => "void".into(),
                Base::Enum => "enum".into(),
                Base::Unsupported(x) => x.clone(),
            };
            s.push_str(&"*".repeat(d.stars));
            for a in &d.arrays {
                s.push('[');
                s.push_str(&a.iter().map(|&q| self.text(q)).collect::<Vec<_>>().join(""));
                s.push(']');
            }
            s
        };
        if d.fn_ptr || (d.func.is_some() && is_param) {
            return DeclType::Unsupported { spelling: format!("function pointer ({})", spelled()) };
        }
        let base_scalar = match base {
            Base::Scalar(s) => Some(*s),
            Base::Enum => Some(Scalar::I32),
            _ => None,
        };
        match (d.stars, d.arrays.len()) {
            (0, 0) => match base {
                Base::Void => DeclType::Void,
                Base::Unsupported(x) => DeclType::Unsupported { spelling: x.clone() },
                _ => DeclType::supported(CType::scalar(base_scalar.unwrap())),
            },
            (0, 1) => match base_scalar {
                Some(sc) => match self.array_extent(&d.arrays[0]) {
                    Some(len) if len > 0 => DeclType::supported(CType::Array { elem: sc, len }),
                    _ if is_param && d.arrays[0].is_empty() => pointer_type(sc, spec_const),
                    _ => DeclType::Unsupported { spelling: spelled() },
                },
                None => DeclType::Unsupported { spelling: spelled() },
            },
            (1, 0) => match base_scalar {
                Some(sc) => pointer_type(sc, spec_const),
                None => DeclType::Unsupported { spelling: spelled() },
            },
            _ => DeclType::Unsupported { spelling: spelled() },
        }
    }

    fn parse_params(&mut self, open: usize, close: usize) -> (Vec<ParamDecl>, bool) {
        let mut params = Vec::new();
        let mut variadic = false;
        let mut pieces: Vec<(usize, usize)> = Vec::new();
        let mut p = open + 1;
        let mut seg = p;
        while p < close {
            match self.text(p) {
                "(" | "[" | "{" => p = self.match_close(p) + 1,
                "," => {
                    pieces.push((seg, p));
                    p += 1;
                    seg = p;
                }
                _ => p += 1,
            }
        }
        if seg < close {
            pieces.push((seg, close));
        }
        if pieces.len() == 1 && pieces[0].1 - pieces[0].0 == 1 && self.text(pieces[0].0) == "void" {
            return (params, false);
        }
        for (idx, (a, b)) in pieces.into_iter().enumerate() {
            if self.text(a) == "..." {
                variadic = true;
                continue;
            }
            let specs = self.parse_specs(a);
            let d = self.parse_declarator(a + specs.consumed);
            let base = specs.base.clone().unwrap_or(Base::Unsupported(
                (a..b).map(|q| self.text(q)).collect::<Vec<_>>().join(" "),
            ));
            let ty = self.decl_type(&base, specs.is_const, &d, true);
            let (name, name_tok) = match d.name {
                Some(q) => (self.text(q).to_string(), Some(self.code[q])),
                None => (format!("arg{idx}"), None),
            };
            params.push(ParamDecl { name, ty, name_tok });
        }
        (params, variadic)
    }

    fn scan_body(&mut self, def: &mut FunctionDef, open: usize, close: usize) {
        let mut p = open + 1;
        let mut stmt_start = true;
        let mut for_init_at: Option<usize> = None;
        while p < close {
            let t = self.text(p);
            if stmt_start || for_init_at == Some(p) {
                self.try_local_decl(def, p, close);
            }
            stmt_start = false;
            match t {
                "if" | "for" | "while" | "case" | "&&" | "||" | "?" => def.decisions += 1,
                _ => {}
            }
            if t == "for" && self.text(p + 1) == "(" {
                for_init_at = Some(p + 2);
            }
            if matches!(t, "{" | "}" | ";") {
                stmt_start = true;
            }
            if self.is_ident(p) && !is_keyword(t) {
                let prev = if p > 0 { self.text(p - 1) } else { "" };
                if prev != "." && prev != "->" {
                    def.idents.insert(t.to_string());
                    if self.text(p + 1) == "(" {
                        def.calls.insert(t.to_string());
                    }
                    if self.is_write(p) {
                        def.writes.insert(t.to_string());
                    }
                }
            }
            p += 1;
        }
    }

    fn is_write(&self, p: usize) -> bool {
        const ASSIGN: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", "++", "--"];
        let prev = if p > 0 { self.text(p - 1) } else { "" };
        if prev == "++" || prev == "--" {
            return true;
        }
        if prev == "&" {
            let pp = if p > 1 { self.text(p - 2) } else { "" };
            let binary = p > 1 && (self.is_ident(p - 2) || self.kind(p - 2) == Some(TokenKind::Number) || pp == ")" || pp == "]");
            if !binary {
                return true;
            }
        }
        let mut q = p + 1;
        while matches!(self.text(q), "[" | "." | "->") {
            if self.text(q) == "[" {
                q = self.match_close(q) + 1;
            } else {
                q += 2;
            }
        }
        ASSIGN.contains(&self.text(q))
    }

    fn try_local_decl(&mut self, def: &mut FunctionDef, p: usize, limit: usize) {
        let t = self.text(p);
        let starts_type = TYPE_WORDS.contains(&t)
            || matches!(t, "const" | "static" | "struct" | "union" | "enum" | "register" | "volatile" | "unsigned" | "signed")
            || (self.is_ident(p)
                && !is_keyword(t)
                && (self.is_type_name(t)
                    || self.is_ident(p + 1)
                    || (self.text(p + 1) == "*" && self.is_ident(p + 2) && matches!(self.text(p + 3), "=" | ";" | "," | "["))));
        if !starts_type || self.text(p + 1) == ":" {
            return;
        }
        let specs = self.parse_specs(p);
        if specs.consumed == 0 || specs.base.is_none() {
            return;
        }
        let mut q = p + specs.consumed;
        loop {
            if q >= limit {
                return;
            }
            let d = self.parse_declarator(q);
            match d.name {
                Some(n) => def.locals.push(self.text(n).to_string()),
                None => return,
            }
            q = d.end;
            if self.text(q) == "=" {
                q = self.skip_initializer(q + 1);
            }
            if self.text(q) == "," {
                q += 1;
                continue;
            }
            return;
        }
    }

    fn parse_typedef(&mut self, specs: &Specs, mut p: usize) -> usize {
        loop {
            let d = self.parse_declarator(p);
            if let Some(n) = d.name {
                let name = self.text(n).to_string();
                let base = specs.base.clone().unwrap_or(Base::Unsupported(name.clone()));
                let resolved = if d.stars == 0 && d.arrays.is_empty() && d.func.is_none() && !d.fn_ptr {
                    base
                } else {
                    Base::Unsupported(name.clone())
                };
                self.type_like.insert(name.clone());
                self.typedefs.insert(name, resolved);
            }
            p = d.end;
            match self.text(p) {
                "," => p += 1,
                ";" => return p + 1,
                _ => return self.skip_statement(p),
            }
        }
    }
}

fn pointer_type(sc: Scalar, is_const: bool) -> DeclType {
    if sc == Scalar::Char {
        DeclType::supported(CType::Str { is_const })
    } else {
        DeclType::supported(CType::Pointer { pointee: sc, is_const })
    }
}

fn resolve_words(words: &[String]) -> Base {
    let count = |w: &str| words.iter().filter(|x| x.as_str() == w).count();
    let unsigned = count("unsigned") > 0;
    let signed = count("signed") > 0;
    if count("_Complex") > 0 {
        return Base::Unsupported(words.join(" "));
    }
    if count("void") > 0 {
        return Base::Void;
    }
    if count("_Bool") > 0 || count("bool") > 0 {
        return Base::Scalar(Scalar::Bool);
    }
    if count("float") > 0 {
        return Base::Scalar(Scalar::F32);
    }
    if count("double") > 0 {
        return if count("long") > 0 { Base::Unsupported("long double".into()) } else { Base::Scalar(Scalar::F64) };
    }
    if count("char") > 0 {
        return Base::Scalar(if unsigned {
            Scalar::U8
        } else if signed {
            Scalar::I8
        } else {
            Scalar::Char
        });
    }
    let sc = if count("short") > 0 {
        if unsigned {
            Scalar::U16
        } else {
            Scalar::I16
        }
    } else if count("long") > 0 {
        if unsigned {
            Scalar::U64
        } else {
            Scalar::I64
        }
    } else if unsigned {
        Scalar::U32
    } else {
        Scalar::I32
    };
    Base::Scalar(sc)
}

/// Parses a C integer literal (decimal, hex, octal, with suffixes).
pub fn parse_int_literal(t: &str) -> Option<i64> {
    let body = t.trim_end_matches(['u', 'U', 'l', 'L']);
    if body.is_empty() {
        return None;
    }
    if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        return i64::from_str_radix(hex, 16).ok();
    }
    if body.len() > 1 && body.starts_with('0') {
        return i64::from_str_radix(&body[1..], 8).ok();
    }
    body.parse().ok()
}

fn scan_directives(lx: &Lexed, macros: &mut Vec<MacroDef>, includes: &mut Vec<String>) {
    let sig: Vec<usize> = lx.significant();
    let mut k = 0;
    while k < sig.len() {
        let i = sig[k];
        let tok = lx.tokens[i];
        if !(tok.in_directive && lx.tok(i) == "#") {
            k += 1;
            continue;
        }
        // gather this directive's tokens
        let mut line = Vec::new();
        let mut m = k + 1;
        while m < sig.len() && lx.tokens[sig[m]].in_directive && lx.tok(sig[m]) != "#" {
            line.push(sig[m]);
            m += 1;
        }
        if let Some(&first) = line.first() {
            match lx.tok(first) {
                "include" => {
                    if let Some(&h) = line.get(1) {
                        let raw = lx.tok(h);
                        includes.push(raw.trim_matches(|c| c == '<' || c == '>' || c == '"').to_string());
                    }
                }
                "define" if line.len() >= 2 => {
                    let name_i = line[1];
                    let name = lx.tok(name_i).to_string();
                    let fn_like = line.get(2).is_some_and(|&p| lx.tok(p) == "(" && lx.tokens[p].start == lx.tokens[name_i].end);
                    if fn_like {
                        let mut params = Vec::new();
                        for &p in &line[3..] {
                            let t = lx.tok(p);
                            if t == ")" {
                                break;
                            }
                            if t != "," {
                                params.push(t.to_string());
                            }
                        }
                        macros.push(MacroDef { name, params: Some(params), int_value: None, name_tok: name_i });
                    } else {
                        let value_toks: Vec<&str> = line[2..].iter().map(|&p| lx.tok(p)).filter(|t| *t != "(" && *t != ")").collect();
                        let int_value = match value_toks.as_slice() {
                            [v] => parse_int_literal(v),
                            ["-", v] => parse_int_literal(v).map(|x| -x),
                            _ => None,
                        };
                        macros.push(MacroDef { name, params: None, int_value, name_tok: name_i });
                    }
                }
                _ => {}
            }
        }
        k = m;
    }
}

pub fn parse(text: &str) -> ParsedUnit {
    let lexed = Lexed::new(text);
    let mut macros = Vec::new();
    let mut includes = Vec::new();
    scan_directives(&lexed, &mut macros, &mut includes);
    let code = lexed.code();

    let mut ps = Parser {
        lx: &lexed,
        code,
        typedefs: BTreeMap::new(),
        int_macros: macros.iter().filter_map(|m| m.int_value.map(|v| (m.name.clone(), v))).collect(),
        type_like: BTreeSet::new(),
        warnings: Vec::new(),
    };
    let mut functions = Vec::new();
    let mut prototypes = Vec::new();
    let mut globals: Vec<GlobalVar> = Vec::new();

    let n = ps.code.len();
    let mut p = 0;
    while p < n {
        if ps.text(p) == ";" {
            p += 1;
            continue;
        }
        let specs = ps.parse_specs(p);
        if specs.is_typedef {
            p = ps.parse_typedef(&specs, p + specs.consumed);
            continue;
        }
        let mut q = p + specs.consumed;
        if ps.text(q) == ";" {
            p = q + 1;
            continue;
        }
        let base = specs.base.clone().unwrap_or(Base::Scalar(Scalar::I32));
        let mut progressed = specs.consumed > 0;
        loop {
            let d = ps.parse_declarator(q);
            if d.end == q {
                break;
            }
            progressed = true;
            q = d.end;
            let Some(name_p) = d.name else {
                break;
            };
            let name = ps.text(name_p).to_string();
            if let (Some((open, close)), false) = (d.func, d.fn_ptr) {
                let ret_decl = Declarator { name: d.name, stars: d.stars, arrays: Vec::new(), func: None, fn_ptr: false, end: d.end };
                let return_type = ps.decl_type(&base, specs.is_const, &ret_decl, false);
                let (params, variadic) = ps.parse_params(open, close);
                if ps.text(q) == "{" {
                    let body_close = ps.match_close(q);
                    let mut def = FunctionDef {
                        name,
                        is_static: specs.is_static,
                        return_type,
                        params,
                        variadic,
                        name_tok: ps.code[name_p],
                        params_open: ps.code[open],
                        params_close: ps.code[close],
                        body_open: ps.code[q],
                        body_close: ps.code[body_close],
                        locals: Vec::new(),
                        idents: BTreeSet::new(),
                        writes: BTreeSet::new(),
                        calls: BTreeSet::new(),
                        decisions: 0,
                    };
                    ps.scan_body(&mut def, q, body_close);
                    functions.push(def);
                    q = body_close + 1;
                    // a definition ends the declaration
                    break;
                }
                if ps.text(q) != ";" && ps.text(q) != "," {
                    ps.warnings.push(format!("could not parse definition of `{name}` (old-style declarations?)"));
                    q = ps.skip_statement(q);
                    break;
                }
                prototypes.push(Prototype {
                    name,
                    name_tok: ps.code[name_p],
                    params_open: ps.code[open],
                    params_close: ps.code[close],
                });
            } else {
                let ty = ps.decl_type(&base, specs.is_const, &d, false);
                if let Some(existing) = globals.iter_mut().find(|g| g.name == name) {
                    existing.is_extern &= specs.is_extern;
                } else {
                    globals.push(GlobalVar {
                        name,
                        ty,
                        is_static: specs.is_static,
                        is_const: specs.is_const && d.stars == 0,
                        is_extern: specs.is_extern,
                        name_tok: ps.code[name_p],
                    });
                }
            }
            if ps.text(q) == "=" {
                q = ps.skip_initializer(q + 1);
            }
            match ps.text(q) {
                "," => q += 1,
                ";" => {
                    q += 1;
                    break;
                }
                _ => {
                    q = ps.skip_statement(q);
                    break;
                }
            }
        }
        if p < q && progressed {
            p = q;
        } else {
            let t = ps.text(p).to_string();
            ps.warnings.push(format!("skipped unexpected token `{t}` at file scope"));
            p = ps.skip_statement(p).max(p + 1);
        }
    }

    let mut type_like = ps.type_like;
    type_like.extend(macros.iter().map(|m| m.name.clone()));
    let warnings = ps.warnings;
    ParsedUnit { lexed, functions, prototypes, globals, macros, includes, type_like_names: type_like, warnings }
}

/// Derives the function interfaces of a parsed unit.
pub fn interfaces_of(pu: &ParsedUnit) -> Vec<FunctionInterface> {
    let defined: BTreeSet<&str> = pu.functions.iter().map(|f| f.name.as_str()).collect();
    // direct global uses, excluding shadowed names
    let direct: BTreeMap<&str, (BTreeSet<String>, BTreeSet<String>)> = pu
        .functions
        .iter()
        .map(|f| {
            let shadow: BTreeSet<&str> =
                f.params.iter().map(|p| p.name.as_str()).chain(f.locals.iter().map(|s| s.as_str())).collect();
            let mut used = BTreeSet::new();
            let mut written = BTreeSet::new();
            for g in &pu.globals {
                if shadow.contains(g.name.as_str()) || !f.idents.contains(&g.name) {
                    continue;
                }
                used.insert(g.name.clone());
                let array_decay = matches!(g.ty.ctype(), Some(CType::Array { .. }));
                if f.writes.contains(&g.name) || (array_decay && !g.is_const && f.calls.iter().any(|c| !defined.contains(c.as_str()))) {
                    written.insert(g.name.clone());
                }
            }
            (f.name.as_str(), (used, written))
        })
        .collect();

    let mut out = Vec::new();
    for f in &pu.functions {
        // transitive closure over calls to functions defined in this file
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut stack = vec![f.name.as_str()];
        let mut used = BTreeSet::new();
        let mut written = BTreeSet::new();
        while let Some(name) = stack.pop() {
            if !seen.insert(name) {
                continue;
            }
            if let Some((u, w)) = direct.get(name) {
                used.extend(u.iter().cloned());
                written.extend(w.iter().cloned());
            }
            if let Some(def) = pu.function(name) {
                stack.extend(def.calls.iter().map(|c| c.as_str()).filter(|c| defined.contains(c)));
            }
        }
        let globals = pu
            .globals
            .iter()
            .filter(|g| used.contains(&g.name))
            .map(|g| GlobalRef { name: g.name.clone(), ty: g.ty.clone(), written: written.contains(&g.name), is_const: g.is_const })
            .collect();
        out.push(FunctionInterface {
            name: f.name.clone(),
            return_type: f.return_type.clone(),
            params: f.params.iter().map(|p| Param { name: p.name.clone(), ty: p.ty.clone() }).collect(),
            globals,
            macro_like: false,
            includes: pu.includes.clone(),
            is_static: f.is_static,
            variadic: f.variadic,
        });
    }
    for m in &pu.macros {
        if let Some(params) = &m.params {
            out.push(FunctionInterface {
                name: m.name.clone(),
                return_type: DeclType::Unsupported { spelling: "macro".into() },
                params: params
                    .iter()
                    .map(|p| Param { name: p.clone(), ty: DeclType::Unsupported { spelling: "macro parameter".into() } })
                    .collect(),
                globals: Vec::new(),
                macro_like: true,
                includes: pu.includes.clone(),
                is_static: false,
                variadic: false,
            });
        }
    }
    out
}

/// Parses `text` and returns interfaces together with diagnostics.
pub fn extract(text: &str) -> (Vec<FunctionInterface>, Vec<String>) {
    let pu = parse(text);
    let ifaces = interfaces_of(&pu);
    let mut warnings = pu.warnings.clone();
    for f in &ifaces {
        if f.macro_like {
            warnings.push(format!(
                "function-like macro `{}` is not fuzzable; a translation may turn it into a function the C side lacks",
                f.name
            ));
        } else if f.name != "main" {
            for r in f.unsupported_reasons() {
                warnings.push(format!("`{}` is not fuzzable: unsupported {r}", f.name));
            }
        }
    }
    (ifaces, warnings)
}
