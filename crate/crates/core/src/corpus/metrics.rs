//! LOC / NLOC / token / cyclomatic-complexity metrics and corpus summaries.

use super::lex::{Lexed, TokenKind};
use super::types::{CodeMetrics, SourceUnit};
use super::{CorpusError, CorpusIndex};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::Write;
use std::process::{Command, Stdio};

/// Counts tokens of a source text.
pub trait Tokenizer: Send + Sync {
    fn name(&self) -> String;
    fn count(&self, text: &str) -> Result<usize, CorpusError>;
}

/// Deterministic approximation of a subword tokenizer.
///
/// Every significant lexical token (identifier, number, literal, operator,
/// directive token) counts as one; a comment counts as one plus its number of
/// whitespace-separated words.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultTokenizer;

impl Tokenizer for DefaultTokenizer {
    fn name(&self) -> String {
        "lexical-v1".into()
    }

    fn count(&self, text: &str) -> Result<usize, CorpusError> {
        let lx = Lexed::new(text);
        let mut n = 0;
        for (i, t) in lx.tokens.iter().enumerate() {
            match t.kind {
                TokenKind::Whitespace | TokenKind::Newline => {}
                TokenKind::LineComment | TokenKind::BlockComment => {
                    let body = lx.tok(i).trim_start_matches("//").trim_start_matches("/*").trim_end_matches("*/");
                    n += 1 + body.split_whitespace().count();
                }
                _ => n += 1,
            }
        }
        Ok(n)
    }
}

/// Runs an external program that reads source on stdin and prints a token count.
#[derive(Debug, Clone)]
pub struct CommandTokenizer {
    pub program: String,
    pub args: Vec<String>,
}

impl Tokenizer for CommandTokenizer {
    fn name(&self) -> String {
        format!("command:{}", self.program)
    }

    fn count(&self, text: &str) -> Result<usize, CorpusError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| CorpusError::Tokenizer(format!("{}: {e}", self.program)))?;
        if let Some(mut stdin) = child.stdin.take() {
            stdin.write_all(text.as_bytes()).map_err(|e| CorpusError::Tokenizer(e.to_string()))?;
        }
        let out = child.wait_with_output().map_err(|e| CorpusError::Tokenizer(e.to_string()))?;
        if !out.status.success() {
            return Err(CorpusError::Tokenizer(format!(
                "{} exited with {}: {}",
                self.program,
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let s = String::from_utf8_lossy(&out.stdout);
        s.trim().parse().map_err(|_| CorpusError::Tokenizer(format!("unexpected tokenizer output `{}`", s.trim())))
    }
}

/// Computes metrics for one unit. Warnings are returned alongside; the CC
/// fields are absent when the file defines no function or could not be parsed.
pub fn compute_metrics(unit: &SourceUnit, tokenizer: &dyn Tokenizer) -> Result<(CodeMetrics, Vec<String>), CorpusError> {
    let text = &unit.text;
    let lx = Lexed::new(text);
    let loc = text.lines().count();
    let mut code_lines = BTreeSet::new();
    let mut line = 0usize;
    for t in &lx.tokens {
        if !t.is_trivia() {
            code_lines.insert(line);
        }
        line += text[t.span()].bytes().filter(|&b| b == b'\n').count();
    }
    let nloc = code_lines.len();
    let tokens = tokenizer.count(text)?;

    let parsed = super::parse::parse(text);
    let mut warnings = Vec::new();
    let broken = parsed.warnings.iter().any(|w| w.starts_with("could not parse") || w.starts_with("skipped unexpected"));
    let (cc_avg, cc_max) = if broken {
        warnings.push(format!("{}: parse problems, cyclomatic complexity not reported", unit.id));
        (None, None)
    } else if parsed.functions.is_empty() {
        (None, None)
    } else {
        let ccs: Vec<u32> = parsed.functions.iter().map(|f| f.decisions + 1).collect();
        let avg = ccs.iter().map(|&c| f64::from(c)).sum::<f64>() / ccs.len() as f64;
        (Some(avg), ccs.iter().copied().max())
    };
    Ok((CodeMetrics { loc, nloc, tokens, cc_avg, cc_max, functions: parsed.functions.len() }, warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    /// `all` or a group tag.
    pub scope: String,
    pub metric: String,
    pub min: f64,
    pub avg: f64,
    /// Sample standard deviation (0 for a single file).
    pub stddev: f64,
    pub max: f64,
    pub files: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileMetrics {
    pub id: String,
    pub group: String,
    pub metrics: CodeMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub tokenizer: String,
    pub files: Vec<FileMetrics>,
    pub rows: Vec<MetricRow>,
    pub warnings: Vec<String>,
}

pub const METRIC_NAMES: [&str; 5] = ["LOC", "NLOC", "Tokens", "CC", "CC max"];

fn summarize(scope: &str, metric: &str, vals: &[f64]) -> Option<MetricRow> {
    if vals.is_empty() {
        return None;
    }
    let n = vals.len() as f64;
    let avg = vals.iter().sum::<f64>() / n;
    let var = if vals.len() > 1 { vals.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Some(MetricRow {
        scope: scope.to_string(),
        metric: metric.to_string(),
        min: vals.iter().copied().fold(f64::INFINITY, f64::min),
        avg,
        stddev: var.sqrt(),
        max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        files: vals.len(),
    })
}

fn metric_values(files: &[&FileMetrics], metric: &str) -> Vec<f64> {
    files
        .iter()
        .filter_map(|f| {
            let m = &f.metrics;
            match metric {
                "LOC" => Some(m.loc as f64),
                "NLOC" => Some(m.nloc as f64),
                "Tokens" => Some(m.tokens as f64),
                "CC" => m.cc_avg,
                _ => m.cc_max.map(f64::from),
            }
        })
        .collect()
}

/// Summarizes metrics over the corpus, overall and per group. With `group`
/// set, only files of that group are considered.
pub fn corpus_report(index: &CorpusIndex, tokenizer: &dyn Tokenizer, group: Option<&str>) -> Result<CorpusReport, CorpusError> {
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    for u in index.units.iter().filter(|u| group.is_none_or(|g| u.group == g)) {
        let (metrics, w) = compute_metrics(u, tokenizer)?;
        warnings.extend(w);
        files.push(FileMetrics { id: u.id.clone(), group: u.group.clone(), metrics });
    }
    let groups: BTreeSet<&str> = files.iter().map(|f| f.group.as_str()).collect();
    let mut rows = Vec::new();
    let all: Vec<&FileMetrics> = files.iter().collect();
    for m in METRIC_NAMES {
        rows.extend(summarize("all", m, &metric_values(&all, m)));
    }
    for g in &groups {
        let sel: Vec<&FileMetrics> = files.iter().filter(|f| f.group == *g).collect();
        for m in METRIC_NAMES {
            rows.extend(summarize(g, m, &metric_values(&sel, m)));
        }
    }
    Ok(CorpusReport { tokenizer: tokenizer.name(), files, rows, warnings })
}

impl CorpusReport {
    pub fn row(&self, scope: &str, metric: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.scope == scope && r.metric == metric)
    }

    /// Summary table: `scope,metric,min,avg,stddev,max,files`.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scope", "metric", "min", "avg", "stddev", "max", "files"])?;
        for r in &self.rows {
            w.write_record([
                r.scope.clone(),
                r.metric.clone(),
                fmt_num(r.min),
                fmt_num(r.avg),
                fmt_num(r.stddev),
                fmt_num(r.max),
                r.files.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub(crate) fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}")
    }
}
