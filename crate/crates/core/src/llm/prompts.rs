use super::LlmError;
use crate::checkers::{Counterexample, FailureKind};

pub const TRANSLATION_PREFIX: &str = "Translate the following C code to Rust. Keep all identifiers exactly as they are. ";
pub const FEEDBACK_PREFIX: &str = "You made the following mistakes: ";
pub const DEFAULT_DIAGNOSTIC_CAP: usize = 16 * 1024;

pub fn build_translation_prompt(c_code: &str) -> Result<String, LlmError> {
    if c_code.trim().is_empty() {
        return Err(LlmError::Precondition("C code for translation prompt is empty".into()));
    }
    Ok(format!("{TRANSLATION_PREFIX}{c_code}"))
}

/// One piece of feedback: a verbatim tool message or a fuzzing counterexample.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackItem {
    Message(String),
    Counterexample(Counterexample),
}

impl FeedbackItem {
    pub fn render(&self) -> String {
        match self {
            FeedbackItem::Message(m) => m.trim_end().to_string(),
            FeedbackItem::Counterexample(c) => render_counterexample(c),
        }
    }
}

/// Joins rendered items with newlines, keeping the first `cap` bytes.
pub fn render_diagnostics(items: &[FeedbackItem], cap: usize) -> String {
    let joined = items.iter().map(FeedbackItem::render).collect::<Vec<_>>().join("\n");
    if joined.len() <= cap {
        return joined;
    }
    let mut end = cap;
    while !joined.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}\n[... {} more bytes of diagnostics truncated]", &joined[..end], joined.len() - end)
}

pub fn build_feedback_prompt(items: &[FeedbackItem], cap: usize) -> Result<String, LlmError> {
    if items.is_empty() {
        return Err(LlmError::Precondition("feedback prompt needs at least one diagnostic".into()));
    }
    Ok(format!("{FEEDBACK_PREFIX}{}", render_diagnostics(items, cap)))
}

const CEX_HEADER: &str = "Differential fuzzing found a counterexample";

pub fn render_counterexample(c: &Counterexample) -> String {
    let kind = match c.failure_kind {
        FailureKind::ValueMismatch => "outputs differ",
        FailureKind::RustOnlyRuntimeError => "runtime error only in the Rust code",
    };
    let mut s = format!("{CEX_HEADER} for function `{}` ({kind}).\nInput values:\n", c.function);
    for (k, v) in &c.rendered_inputs {
        s.push_str(&format!("  {k} = {v}\n"));
    }
    s.push_str("C output:\n");
    for (k, v) in &c.c_output {
        s.push_str(&format!("  {k} = {v}\n"));
    }
    s.push_str("Rust output:\n");
    match &c.rust_output {
        Some(vals) => {
            for (k, v) in vals {
                s.push_str(&format!("  {k} = {v}\n"));
            }
        }
        None => s.push_str(&format!("  runtime error: {}\n", c.detail.as_deref().unwrap_or("panic"))),
    }
    s.trim_end().to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCounterexample {
    pub function: String,
    pub failure_kind: FailureKind,
    pub inputs: Vec<(String, String)>,
    pub c_output: Vec<(String, String)>,
    pub rust_output: Option<Vec<(String, String)>>,
    pub runtime_error: Option<String>,
}

/// Inverse of [`render_counterexample`].
pub fn parse_counterexample(text: &str) -> Option<ParsedCounterexample> {
    let mut lines = text.lines();
    let head = lines.next()?.strip_prefix(CEX_HEADER)?;
    let function = head.split('`').nth(1)?.to_string();
    let failure_kind =
        if head.contains("runtime error only") { FailureKind::RustOnlyRuntimeError } else { FailureKind::ValueMismatch };
    let mut section = 0;
    let mut out = ParsedCounterexample {
        function,
        failure_kind,
        inputs: Vec::new(),
        c_output: Vec::new(),
        rust_output: Some(Vec::new()),
        runtime_error: None,
    };
    for line in lines {
        match line {
            "Input values:" => section = 1,
            "C output:" => section = 2,
            "Rust output:" => section = 3,
            _ => {
                let body = line.strip_prefix("  ")?;
                if section == 3 {
                    if let Some(msg) = body.strip_prefix("runtime error: ") {
                        out.rust_output = None;
                        out.runtime_error = Some(msg.to_string());
                        continue;
                    }
                }
                let (k, v) = body.split_once(" = ")?;
                let pair = (k.to_string(), v.to_string());
                match section {
                    1 => out.inputs.push(pair),
                    2 => out.c_output.push(pair),
                    3 => out.rust_output.as_mut()?.push(pair),
                    _ => return None,
                }
            }
        }
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeConfidence {
    Fenced,
    Unfenced,
}

struct Fence<'a> {
    tag: String,
    body: Vec<&'a str>,
}

fn fences(text: &str) -> Vec<Fence<'_>> {
    let mut out = Vec::new();
    let mut cur: Option<(Fence, usize)> = None;
    for line in text.lines() {
        let t = line.trim_start();
        let ticks = t.bytes().take_while(|&b| b == b'`').count();
        match cur.as_mut() {
            None if ticks >= 3 => {
                let tag = t[ticks..].trim().split(|c: char| c.is_whitespace() || c == ',').next().unwrap_or("").to_lowercase();
                cur = Some((Fence { tag, body: Vec::new() }, ticks));
            }
            None => {}
            Some((_, open)) if ticks >= *open && t[ticks..].trim().is_empty() => {
                out.push(cur.take().unwrap().0);
            }
            Some((f, _)) => f.body.push(line),
        }
    }
    if let Some((f, _)) = cur {
        out.push(f);
    }
    out
}

/// Picks the Rust code out of a model reply: the longest `rust`-tagged fence,
/// else the longest fence of any kind, else the whole reply.
pub fn extract_code(response: &str) -> Result<(String, CodeConfidence), LlmError> {
    if response.trim().is_empty() {
        return Err(LlmError::EmptyResponse);
    }
    let fs = fences(response);
    let longest = |it: &mut dyn Iterator<Item = &Fence>| -> Option<String> {
        let mut best: Option<&Fence> = None;
        for f in it {
            if best.is_none_or(|b| f.body.len() > b.body.len()) {
                best = Some(f);
            }
        }
        best.map(|f| f.body.join("\n").trim().to_string())
    };
    let rust = longest(&mut fs.iter().filter(|f| f.tag == "rust" || f.tag == "rs"));
    if let Some(code) = rust.or_else(|| longest(&mut fs.iter())) {
        if !code.is_empty() {
            return Ok((code, CodeConfidence::Fenced));
        }
    }
    Ok((response.trim().to_string(), CodeConfidence::Unfenced))
}
