//! Perturbations that ask a chat model for help.

use super::rename::{apply_renames, renamable, validate_map};
use super::{PerturbError, Rewritten};
use crate::corpus::lex::{Lexed, TokenKind};
use crate::corpus::parse::{interfaces_of, parse, ParsedUnit};
use crate::llm::extract_code;
use crate::llm::{ChatBackend, Conversation, Role};
use std::collections::BTreeMap;

pub const COMMENT_TRANSLATION_PROMPT: &str = "Translate each numbered comment below into {language}. Reply with one line per comment in the form `N: translation`, keeping the numbering.";
pub const COMMENT_INSERTION_PROMPT: &str = "Write a short explanatory comment for each function in the following C code. Reply with a JSON object mapping each function name to its comment.";
pub const IDENTIFIER_TRANSLATION_PROMPT: &str = "Translate the following C identifiers into {language}, keeping each a valid C identifier. Reply with a JSON object mapping each identifier to its translation.";
pub const IDENTIFIER_IMPROVEMENT_PROMPT: &str = "Suggest clearer names for the following identifiers of the C code below. Reply with a JSON object mapping each old identifier to its new name; omit identifiers that are already clear.";
pub const CODE_EXTRACTION_PROMPT: &str = "Refactor the following C code by extracting parts of function bodies into new helper functions. Keep the names, parameters and behavior of all existing functions. Reply with the complete C file in a code block.";

fn ask(backend: &dyn ChatBackend, prompt: String) -> Result<String, PerturbError> {
    let mut conv = Conversation::new();
    conv.push(Role::User, prompt);
    Ok(backend.complete(&conv).map_err(PerturbError::Llm)?.text)
}

fn json_map(reply: &str) -> Result<BTreeMap<String, String>, PerturbError> {
    let (a, b) = match (reply.find('{'), reply.rfind('}')) {
        (Some(a), Some(b)) if a < b => (a, b),
        _ => return Err(PerturbError::ModelOutput("expected a JSON object".into())),
    };
    serde_json::from_str::<BTreeMap<String, serde_json::Value>>(&reply[a..=b])
        .map(|m| m.into_iter().filter_map(|(k, v)| v.as_str().map(|s| (k, s.to_string()))).collect())
        .map_err(|e| PerturbError::ModelOutput(format!("invalid JSON object: {e}")))
}

fn numbered(reply: &str) -> BTreeMap<usize, String> {
    let mut out = BTreeMap::new();
    for line in reply.lines() {
        if let Some((n, rest)) = line.trim().split_once(':') {
            if let Ok(k) = n.trim().trim_start_matches('#').parse::<usize>() {
                out.insert(k, rest.trim().to_string());
            }
        }
    }
    out
}

fn comment_body(raw: &str) -> &str {
    if let Some(b) = raw.strip_prefix("/*") {
        b.strip_suffix("*/").unwrap_or(b)
    } else {
        raw.strip_prefix("//").unwrap_or(raw)
    }
}

fn sanitize_comment(is_block: bool, text: &str) -> String {
    let flat = text.replace(['\n', '\r'], " ");
    if is_block {
        format!("/* {} */", flat.replace("*/", "* /").trim())
    } else {
        format!("// {}", flat.trim().trim_end_matches('\\'))
    }
}

/// Translates every comment into `language` and back.
pub(crate) fn comment_round_trip(lx: &Lexed, backend: &dyn ChatBackend, language: &str) -> Result<Rewritten, PerturbError> {
    let comments: Vec<usize> = (0..lx.tokens.len()).filter(|&i| lx.tokens[i].is_comment()).collect();
    if comments.is_empty() {
        return Ok(Rewritten::noop("no comments to translate"));
    }
    let listing = |texts: &dyn Fn(usize) -> String| {
        (0..comments.len()).map(|k| format!("{}: {}", k + 1, texts(k).replace('\n', " "))).collect::<Vec<_>>().join("\n")
    };
    let original = listing(&|k| comment_body(lx.tok(comments[k])).trim().to_string());
    let there = numbered(&ask(
        backend,
        format!("{}\n\n{original}", COMMENT_TRANSLATION_PROMPT.replace("{language}", language)),
    )?);
    let forward = listing(&|k| there.get(&(k + 1)).cloned().unwrap_or_default());
    let back = numbered(&ask(backend, format!("{}\n\n{forward}", COMMENT_TRANSLATION_PROMPT.replace("{language}", "English")))?);
    let mut edits = Vec::new();
    for (k, &i) in comments.iter().enumerate() {
        if let Some(t) = back.get(&(k + 1)).filter(|t| !t.is_empty()) {
            let t0 = lx.tokens[i];
            edits.push((t0.start, t0.end, sanitize_comment(t0.kind == TokenKind::BlockComment, t)));
        }
    }
    Ok(Rewritten::text(super::code::apply_edits(&lx.text, edits)))
}

/// Inserts a model-written comment above each function definition.
pub(crate) fn comment_insertion(pu: &ParsedUnit, backend: &dyn ChatBackend) -> Result<Rewritten, PerturbError> {
    if pu.functions.is_empty() {
        return Ok(Rewritten::noop("no functions to comment"));
    }
    let map = json_map(&ask(backend, format!("{COMMENT_INSERTION_PROMPT}\n\n{}", pu.lexed.text))?)?;
    let lx = &pu.lexed;
    let mut edits = Vec::new();
    for f in &pu.functions {
        if let Some(c) = map.get(&f.name) {
            let at = lx.text[..lx.tokens[f.name_tok].start].rfind('\n').map_or(0, |p| p + 1);
            edits.push((at, at, format!("{}\n", sanitize_comment(true, c))));
        }
    }
    Ok(Rewritten::text(super::code::apply_edits(&lx.text, edits)))
}

/// Translates identifiers into `language` and back.
pub(crate) fn identifier_round_trip(pu: &ParsedUnit, backend: &dyn ChatBackend, language: &str) -> Result<Rewritten, PerturbError> {
    let names = renamable(pu);
    if names.is_empty() {
        return Ok(Rewritten::noop("no renamable identifiers"));
    }
    let there = json_map(&ask(
        backend,
        format!("{}\n\n{}", IDENTIFIER_TRANSLATION_PROMPT.replace("{language}", language), names.join("\n")),
    )?)?;
    let forward: Vec<String> = names.iter().map(|n| there.get(n).cloned().unwrap_or_else(|| n.clone())).collect();
    let back = json_map(&ask(
        backend,
        format!("{}\n\n{}", IDENTIFIER_TRANSLATION_PROMPT.replace("{language}", "English"), forward.join("\n")),
    )?)?;
    let proposals: BTreeMap<String, String> = names
        .iter()
        .zip(&forward)
        .filter_map(|(n, f)| back.get(f).map(|b| (n.clone(), b.clone())))
        .collect();
    Ok(renamed(pu, &proposals))
}

/// Renames identifiers to names the model considers clearer.
pub(crate) fn identifier_improvement(pu: &ParsedUnit, backend: &dyn ChatBackend, prompt: &str) -> Result<Rewritten, PerturbError> {
    let names = renamable(pu);
    if names.is_empty() {
        return Ok(Rewritten::noop("no renamable identifiers"));
    }
    let proposals = json_map(&ask(backend, format!("{prompt}\n\nIdentifiers:\n{}\n\nCode:\n{}", names.join("\n"), pu.lexed.text))?)?;
    Ok(renamed(pu, &proposals))
}

fn renamed(pu: &ParsedUnit, proposals: &BTreeMap<String, String>) -> Rewritten {
    let (map, notes) = validate_map(pu, proposals);
    let mut r = if map.is_empty() { Rewritten::noop("the model proposed no usable names") } else { apply_renames(pu, &map) };
    r.notes.extend(notes);
    r
}

/// Lets the model move code into helper functions; the existing function
/// interfaces must survive unchanged.
pub(crate) fn code_extraction(pu: &ParsedUnit, backend: &dyn ChatBackend) -> Result<Rewritten, PerturbError> {
    let reply = ask(backend, format!("{CODE_EXTRACTION_PROMPT}\n\n{}", pu.lexed.text))?;
    let (code, _) = extract_code(&reply).map_err(PerturbError::Llm)?;
    let before = interfaces_of(pu);
    let after = interfaces_of(&parse(&code));
    for f in before.iter().filter(|f| !f.macro_like) {
        let same = after.iter().any(|g| g.name == f.name && g.params == f.params && g.return_type == f.return_type);
        if !same {
            return Err(PerturbError::ModelOutput(format!("the refactored code changes or drops `{}`", f.name)));
        }
    }
    let mut text = code;
    if !text.ends_with('\n') {
        text.push('\n');
    }
    Ok(Rewritten::text(text))
}
