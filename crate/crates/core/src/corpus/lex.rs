//! Lossless C lexer.
//!
//! Every byte of the input belongs to exactly one token, so concatenating the
//! token texts reproduces the source. Perturbations rely on this to rewrite
//! individual tokens without disturbing layout elsewhere.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Whitespace,
    Newline,
    LineComment,
    BlockComment,
    Ident,
    Number,
    Str,
    Char,
    /// `<...>` after `#include`.
    HeaderName,
    Punct,
    /// Stray bytes the lexer does not understand (e.g. `@`, `$`, non-ASCII).
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
    /// Part of a preprocessor directive line (including the leading `#`).
    pub in_directive: bool,
}

impl Token {
    pub fn span(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn is_trivia(&self) -> bool {
        matches!(
            self.kind,
            TokenKind::Whitespace | TokenKind::Newline | TokenKind::LineComment | TokenKind::BlockComment
        )
    }

    pub fn is_comment(&self) -> bool {
        matches!(self.kind, TokenKind::LineComment | TokenKind::BlockComment)
    }
}

/// A lexed source text.
#[derive(Debug, Clone)]
pub struct Lexed {
    pub text: String,
    pub tokens: Vec<Token>,
}

impl Lexed {
    pub fn new(text: &str) -> Self {
        let tokens = lex(text);
        Lexed { text: text.to_string(), tokens }
    }

    pub fn tok(&self, i: usize) -> &str {
        &self.text[self.tokens[i].span()]
    }

    /// Indices of tokens that are not whitespace or comments.
    pub fn significant(&self) -> Vec<usize> {
        (0..self.tokens.len()).filter(|&i| !self.tokens[i].is_trivia()).collect()
    }

    /// Indices of significant tokens outside preprocessor directives.
    pub fn code(&self) -> Vec<usize> {
        (0..self.tokens.len())
            .filter(|&i| !self.tokens[i].is_trivia() && !self.tokens[i].in_directive)
            .collect()
    }

    /// 0-based line number of a byte offset.
    pub fn line_of(&self, offset: usize) -> usize {
        self.text[..offset].bytes().filter(|&b| b == b'\n').count()
    }
}

const PUNCTS: &[&str] = &[
    "...", "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "*=", "/=", "%=", "+=",
    "-=", "&=", "^=", "|=", "##", "<:", ":>", "<%", "%>",
];

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

pub fn lex(text: &str) -> Vec<Token> {
    let bytes = text.as_bytes();
    let mut tokens: Vec<Token> = Vec::new();
    let mut i = 0;
    let mut in_directive = false;
    // true while only whitespace/comments have been seen on the current line
    let mut line_start = true;
    // directive state: saw `#`, then saw `include`
    let mut directive_words = 0usize;
    let mut include_directive = false;

    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        let kind;
        if b == b'\n' {
            i += 1;
            kind = TokenKind::Newline;
        } else if b == b'\r' && bytes.get(i + 1) == Some(&b'\n') {
            i += 2;
            kind = TokenKind::Newline;
        } else if b == b'\\' && matches!(bytes.get(i + 1), Some(b'\n')) {
            // line splice behaves as whitespace and keeps a directive open
            i += 2;
            kind = TokenKind::Whitespace;
        } else if b == b'\\' && bytes.get(i + 1) == Some(&b'\r') && bytes.get(i + 2) == Some(&b'\n') {
            i += 3;
            kind = TokenKind::Whitespace;
        } else if b == b' ' || b == b'\t' || b == b'\x0b' || b == b'\x0c' || b == b'\r' {
            while i < bytes.len() && matches!(bytes[i], b' ' | b'\t' | b'\x0b' | b'\x0c') {
                i += 1;
            }
            if i == start {
                i += 1;
            }
            kind = TokenKind::Whitespace;
        } else if b == b'/' && bytes.get(i + 1) == Some(&b'/') {
            i += 2;
            while i < bytes.len() && bytes[i] != b'\n' {
                if bytes[i] == b'\\' && bytes.get(i + 1) == Some(&b'\n') {
                    i += 2;
                    continue;
                }
                if bytes[i] == b'\r' && bytes.get(i + 1) == Some(&b'\n') {
                    break;
                }
                i += 1;
            }
            kind = TokenKind::LineComment;
        } else if b == b'/' && bytes.get(i + 1) == Some(&b'*') {
            i += 2;
            while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/')) {
                i += 1;
            }
            i = (i + 2).min(bytes.len());
            kind = TokenKind::BlockComment;
        } else if include_directive && b == b'<' {
            while i < bytes.len() && bytes[i] != b'>' && bytes[i] != b'\n' {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'>' {
                i += 1;
            }
            kind = TokenKind::HeaderName;
        } else if let Some(len) = string_prefix_len(bytes, i) {
            let quote = bytes[i + len];
            i += len + 1;
            while i < bytes.len() && bytes[i] != quote && bytes[i] != b'\n' {
                if bytes[i] == b'\\' && i + 1 < bytes.len() {
                    i += 2;
                } else {
                    i += 1;
                }
            }
            if i < bytes.len() && bytes[i] == quote {
                i += 1;
            }
            kind = if quote == b'"' { TokenKind::Str } else { TokenKind::Char };
        } else if is_ident_start(b) {
            while i < bytes.len() && is_ident_continue(bytes[i]) {
                i += 1;
            }
            kind = TokenKind::Ident;
        } else if b.is_ascii_digit() || (b == b'.' && bytes.get(i + 1).is_some_and(|c| c.is_ascii_digit())) {
            i += 1;
            while i < bytes.len() {
                let c = bytes[i];
                if matches!(c, b'e' | b'E' | b'p' | b'P') && matches!(bytes.get(i + 1), Some(b'+') | Some(b'-')) {
                    i += 2;
                } else if is_ident_continue(c) || c == b'.' || c == b'\'' {
                    i += 1;
                } else {
                    break;
                }
            }
            kind = TokenKind::Number;
        } else if b.is_ascii_punctuation() {
            let rest = &text[i..];
            let len = PUNCTS.iter().find(|p| rest.starts_with(**p)).map_or(1, |p| p.len());
            i += len;
            kind = TokenKind::Punct;
        } else {
            // multi-byte UTF-8 or control bytes: consume one full char
            let ch_len = text[i..].chars().next().map_or(1, |c| c.len_utf8());
            i += ch_len;
            kind = TokenKind::Other;
        }

        let tok_text = &text[start..i];
        let mut tok_in_directive = in_directive;
        match kind {
            TokenKind::Newline => {
                in_directive = false;
                include_directive = false;
                directive_words = 0;
                line_start = true;
                tok_in_directive = false;
            }
            TokenKind::Whitespace | TokenKind::LineComment | TokenKind::BlockComment => {}
            _ => {
                if line_start && kind == TokenKind::Punct && (tok_text == "#" || tok_text == "%:") {
                    in_directive = true;
                    tok_in_directive = true;
                    directive_words = 0;
                } else if in_directive {
                    directive_words += 1;
                    if directive_words == 1 && kind == TokenKind::Ident && tok_text == "include" {
                        include_directive = true;
                    } else if directive_words > 1 {
                        include_directive = false;
                    }
                }
                line_start = false;
            }
        }
        // A block comment spanning lines inside a directive keeps it open.
        tokens.push(Token { kind, start, end: i, in_directive: tok_in_directive });
    }
    tokens
}

fn string_prefix_len(bytes: &[u8], i: usize) -> Option<usize> {
    let quote_at = |off: usize| matches!(bytes.get(i + off), Some(b'"') | Some(b'\''));
    match bytes[i] {
        b'"' | b'\'' => Some(0),
        b'L' | b'U' if quote_at(1) => Some(1),
        b'u' if bytes.get(i + 1) == Some(&b'8') && quote_at(2) => Some(2),
        b'u' if quote_at(1) => Some(1),
        _ => None,
    }
}

pub const KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else", "enum", "extern",
    "float", "for", "goto", "if", "inline", "int", "long", "register", "restrict", "return", "short", "signed",
    "sizeof", "static", "struct", "switch", "typedef", "union", "unsigned", "void", "volatile", "while", "_Alignas",
    "_Alignof", "_Atomic", "_Bool", "_Complex", "_Generic", "_Imaginary", "_Noreturn", "_Static_assert",
    "_Thread_local", "bool", "true", "false", "asm", "__asm__", "__attribute__", "__inline", "__inline__",
    "__restrict", "__restrict__", "__extension__", "__typeof__", "typeof",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        lex(src)
            .into_iter()
            .filter(|t| !t.is_trivia())
            .map(|t| (t.kind, src[t.span()].to_string()))
            .collect()
    }

    #[test]
    fn lossless() {
        let src = "#include <stdio.h>\n/* c */ int main(void){ printf(\"%d\\n\", 1 << 2); // x\n return 0; }\r\n";
        let toks = lex(src);
        let joined: String = toks.iter().map(|t| &src[t.span()]).collect();
        assert_eq!(joined, src);
    }

    #[test]
    fn header_name_and_directive_flag() {
        let src = "#include <stdint.h>\nint x;\n";
        let toks = lex(src);
        let hdr = toks.iter().find(|t| t.kind == TokenKind::HeaderName).unwrap();
        assert_eq!(&src[hdr.span()], "<stdint.h>");
        assert!(hdr.in_directive);
        let x = toks.iter().find(|t| &src[t.span()] == "x").unwrap();
        assert!(!x.in_directive);
    }

    #[test]
    fn directive_continues_over_splice() {
        let src = "#define A(x) \\\n  ((x)+1)\nint y;";
        let toks = lex(src);
        let plus = toks.iter().find(|t| &src[t.span()] == "+").unwrap();
        assert!(plus.in_directive);
        let y = toks.iter().find(|t| &src[t.span()] == "y").unwrap();
        assert!(!y.in_directive);
    }

    #[test]
    fn punctuators_longest_match() {
        let k = kinds("a<<=b->c&&!d...");
        let texts: Vec<_> = k.iter().map(|(_, s)| s.as_str()).collect();
        assert_eq!(texts, vec!["a", "<<=", "b", "->", "c", "&&", "!", "d", "..."]);
    }

    #[test]
    fn numbers_and_literals() {
        let k = kinds("1.5e-3f 0x1Fu 'a' L\"w\" u8\"s\"");
        assert_eq!(k[0], (TokenKind::Number, "1.5e-3f".into()));
        assert_eq!(k[1], (TokenKind::Number, "0x1Fu".into()));
        assert_eq!(k[2].0, TokenKind::Char);
        assert_eq!(k[3], (TokenKind::Str, "L\"w\"".into()));
        assert_eq!(k[4], (TokenKind::Str, "u8\"s\"".into()));
    }

    #[test]
    fn comment_like_text_inside_strings() {
        let k = kinds("\"/* not */\" x");
        assert_eq!(k.len(), 2);
        assert_eq!(k[0].0, TokenKind::Str);
    }
}
