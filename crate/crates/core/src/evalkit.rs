//! pass@k and its variants over experiment ledgers, plus report and plot
//! data emission.

use crate::checkers::CheckStage;
use crate::corpus::metrics::fmt_num;
use crate::pipeline::{ErrorCategory, ExperimentKind, RunRecord};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
    #[error("missing coverage: {}", gaps.join("; "))]
    Coverage { gaps: Vec<String> },
    #[error("ledgers cover different files: {0}")]
    CorpusMismatch(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Probability that at least one of `k` runs drawn from `n`, of which `c`
/// succeeded, is a success: `1 - C(n-c, k) / C(n, k)`, as a product of ratios.
pub fn pass_at_k(n: u32, c: u32, k: u32) -> Result<f64, EvalError> {
    if k == 0 || k > n {
        return Err(EvalError::InvalidArgs(format!("k must be in 1..=n, got k={k}, n={n}")));
    }
    if c > n {
        return Err(EvalError::InvalidArgs(format!("c={c} exceeds n={n}")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    let mut miss = 1.0f64;
    for i in (n - c + 1)..=n {
        miss *= 1.0 - f64::from(k) / f64::from(i);
    }
    Ok(1.0 - miss)
}

/// One pass@k value with the keys of the cell it describes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassResult {
    pub k: u32,
    pub estimate: f64,
    pub n: u32,
    pub c: u32,
    pub stage: CheckStage,
    pub cap: u32,
    pub model: String,
    pub perturbation: String,
    pub source_id: String,
    pub group: String,
}

pub fn stage_label(stage: CheckStage) -> &'static str {
    match stage {
        CheckStage::Compiled => "Compilation success",
        CheckStage::Linted => "Lint success",
        CheckStage::Fuzzed => "Final result",
    }
}

/// Runs of one (model, perturbation, file) cell.
struct Cell<'a> {
    model: &'a str,
    perturbation: &'a str,
    source_id: &'a str,
    group: &'a str,
    fuzzable: bool,
    runs: Vec<&'a RunRecord>,
}

fn cells(records: &[RunRecord]) -> Vec<Cell<'_>> {
    let mut map: BTreeMap<(&str, &str, &str), Cell> = BTreeMap::new();
    for r in records.iter().filter(|r| r.skipped.is_none()) {
        let c = map.entry((&r.model_id, &r.perturbation_id, &r.source_id)).or_insert_with(|| Cell {
            model: &r.model_id,
            perturbation: &r.perturbation_id,
            source_id: &r.source_id,
            group: &r.group,
            fuzzable: true,
            runs: Vec::new(),
        });
        c.fuzzable &= r.fuzzable;
        c.runs.push(r);
    }
    map.into_values().collect()
}

impl Cell<'_> {
    fn pass(&self, stage: CheckStage, cap: u32, k: u32) -> Result<PassResult, EvalError> {
        let n = self.runs.len() as u32;
        let c = self.runs.iter().filter(|r| r.reached_within(stage, cap)).count() as u32;
        Ok(PassResult {
            k,
            estimate: pass_at_k(n, c, k)?,
            n,
            c,
            stage,
            cap,
            model: self.model.to_string(),
            perturbation: self.perturbation.to_string(),
            source_id: self.source_id.to_string(),
            group: self.group.to_string(),
        })
    }

    fn label(&self) -> String {
        format!("{} / {} / {}", self.model, self.perturbation, self.source_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassCell {
    pub cap: u32,
    /// Mean of per-file pass@k; `None` when no file has enough runs.
    pub estimate: Option<f64>,
    pub files: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRow {
    pub label: String,
    pub stage: CheckStage,
    pub cells: Vec<PassCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassTable {
    pub k: u32,
    pub rows: Vec<PassRow>,
    /// Cells with fewer than `k` runs, left out of the averages.
    pub incomplete: Vec<String>,
    /// Files without a fuzzable interface, left out of the "Final result" row.
    pub non_fuzzable: Vec<String>,
}

pub const DEFAULT_CAPS: [u32; 5] = [1, 2, 3, 4, 5];
pub const TABLE_STAGES: [CheckStage; 2] = [CheckStage::Compiled, CheckStage::Fuzzed];

/// Per-file pass@k averaged over files, for each stage and iteration cap.
/// A run counts as a success for cap `i` at stage `s` if it first reached
/// `s` within `i` iterations.
pub fn pass_table_by_iteration(records: &[RunRecord], stages: &[CheckStage], caps: &[u32], k: u32) -> Result<PassTable, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidArgs("k must be positive".into()));
    }
    let cells = cells(records);
    let incomplete: Vec<String> = cells.iter().filter(|c| (c.runs.len() as u32) < k).map(Cell::label).collect();
    let non_fuzzable: BTreeSet<String> = cells.iter().filter(|c| !c.fuzzable).map(|c| c.source_id.to_string()).collect();
    let mut rows = Vec::new();
    for &stage in stages {
        let mut out = Vec::new();
        for &cap in caps {
            let mut vals = Vec::new();
            for c in &cells {
                if (c.runs.len() as u32) < k || (stage == CheckStage::Fuzzed && !c.fuzzable) {
                    continue;
                }
                vals.push(c.pass(stage, cap, k)?.estimate);
            }
            let estimate = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
            out.push(PassCell { cap, estimate, files: vals.len() });
        }
        rows.push(PassRow { label: stage_label(stage).to_string(), stage, cells: out });
    }
    Ok(PassTable { k, rows, incomplete, non_fuzzable: non_fuzzable.into_iter().collect() })
}

impl PassTable {
    pub fn cell(&self, stage: CheckStage, cap: u32) -> Option<f64> {
        self.rows.iter().find(|r| r.stage == stage)?.cells.iter().find(|c| c.cap == cap)?.estimate
    }

    /// `Stage,<=1,...,<=N`, one row per stage.
    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let caps: Vec<u32> = self.rows.first().map(|r| r.cells.iter().map(|c| c.cap).collect()).unwrap_or_default();
        let mut header = vec![format!("pass@{}", self.k)];
        header.extend(caps.iter().map(|c| format!("<={c}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.label.clone()];
            rec.extend(r.cells.iter().map(|c| c.estimate.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())));
            w.write_record(&rec)?;
        }
        finish_csv(w)
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, EvalError> {
    let bytes = w.into_inner().map_err(|e| EvalError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateKind {
    /// Robust: worst case over perturbations.
    Min,
    Mean,
    /// Augmented: best case over perturbations.
    Max,
}

impl AggregateKind {
    pub const ALL: [AggregateKind; 3] = [AggregateKind::Min, AggregateKind::Mean, AggregateKind::Max];

    fn apply(self, vals: &[f64]) -> f64 {
        match self {
            AggregateKind::Min => vals.iter().copied().fold(f64::INFINITY, f64::min),
            AggregateKind::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
            AggregateKind::Max => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Final-result pass@k per (model, file) and perturbation, over all iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationMatrix {
    pub files: Vec<(String, String)>,
    pub perturbations: Vec<String>,
    /// `values[f][p]`; `None` where every run of the cell was skipped.
    pub values: Vec<Vec<Option<f64>>>,
}

impl PerturbationMatrix {
    /// Fails with the list of gaps when some fuzzable file lacks `k` runs of a perturbation.
    pub fn build(records: &[RunRecord], perturbations: &[String], k: u32) -> Result<Self, EvalError> {
        let cells = cells(records);
        let by_key: BTreeMap<(&str, &str, &str), &Cell> = cells.iter().map(|c| ((c.model, c.source_id, c.perturbation), c)).collect();
        let skipped: BTreeSet<(&str, &str, &str)> = records
            .iter()
            .filter(|r| r.skipped.is_some())
            .map(|r| (r.model_id.as_str(), r.source_id.as_str(), r.perturbation_id.as_str()))
            .collect();
        let mut files: BTreeMap<(&str, &str), bool> = BTreeMap::new();
        for r in records {
            *files.entry((&r.model_id, &r.source_id)).or_insert(true) &= r.fuzzable || r.skipped.is_some();
        }
        let files: Vec<(&str, &str)> = files.into_iter().filter(|&(_, f)| f).map(|(k, _)| k).collect();
        let mut gaps = Vec::new();
        let mut values = Vec::new();
        for &(m, s) in &files {
            let mut row = Vec::new();
            for p in perturbations {
                match by_key.get(&(m, s, p.as_str())) {
                    Some(c) if c.runs.len() as u32 >= k => row.push(Some(c.pass(CheckStage::Fuzzed, u32::MAX, k)?.estimate)),
                    Some(c) => {
                        gaps.push(format!("{m} / {p} / {s}: {} runs, need {k}", c.runs.len()));
                        row.push(None)
                    }
                    None if skipped.contains(&(m, s, p.as_str())) => row.push(None),
                    None => {
                        gaps.push(format!("{m} / {p} / {s}: no runs"));
                        row.push(None)
                    }
                }
            }
            values.push(row);
        }
        if files.is_empty() {
            gaps.push("no fuzzable files in the ledger".into());
        }
        if !gaps.is_empty() {
            return Err(EvalError::Coverage { gaps });
        }
        Ok(PerturbationMatrix {
            files: files.into_iter().map(|(m, s)| (m.to_string(), s.to_string())).collect(),
            perturbations: perturbations.to_vec(),
            values,
        })
    }

    /// Aggregates over the perturbation columns in `cols`, then averages over files.
    pub fn aggregate(&self, cols: &[usize], kind: AggregateKind) -> f64 {
        let mut total = 0.0;
        let mut files = 0usize;
        let mut vals = Vec::with_capacity(cols.len());
        for row in &self.values {
            vals.clear();
            vals.extend(cols.iter().filter_map(|&c| row[c]));
            if !vals.is_empty() {
                total += kind.apply(&vals);
                files += 1;
            }
        }
        if files == 0 {
            0.0
        } else {
            total / files as f64
        }
    }

    fn columns(&self, set: &[String]) -> Result<Vec<usize>, EvalError> {
        set.iter()
            .map(|p| {
                self.perturbations
                    .iter()
                    .position(|q| q == p)
                    .ok_or_else(|| EvalError::InvalidArgs(format!("perturbation `{p}` is not in the matrix")))
            })
            .collect()
    }
}

/// Per file, pass@k for each perturbation in `set`, combined with `kind`,
/// then averaged over files. Quarantined cells are left out.
pub fn aggregate_over_perturbations(records: &[RunRecord], set: &[String], kind: AggregateKind, k: u32) -> Result<f64, EvalError> {
    if set.is_empty() {
        return Err(EvalError::InvalidArgs("empty perturbation set".into()));
    }
    let m = PerturbationMatrix::build(records, set, k)?;
    let cols: Vec<usize> = (0..set.len()).collect();
    Ok(m.aggregate(&cols, kind))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateSample {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

/// Min/mean/max aggregates for each sampled perturbation set.
pub fn aggregate_sampled(records: &[RunRecord], sets: &[Vec<String>], k: u32) -> Result<Vec<AggregateSample>, EvalError> {
    let all: BTreeSet<String> = sets.iter().flatten().cloned().collect();
    let all: Vec<String> = all.into_iter().collect();
    let m = PerturbationMatrix::build(records, &all, k)?;
    sets.iter()
        .map(|s| {
            let cols = m.columns(s)?;
            Ok(AggregateSample {
                min: m.aggregate(&cols, AggregateKind::Min),
                mean: m.aggregate(&cols, AggregateKind::Mean),
                max: m.aggregate(&cols, AggregateKind::Max),
            })
        })
        .collect()
}

/// Mean final-result pass@k per perturbation.
pub fn per_perturbation(records: &[RunRecord], k: u32) -> Result<BTreeMap<String, f64>, EvalError> {
    let mut acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for c in cells(records).iter().filter(|c| c.fuzzable && c.runs.len() as u32 >= k) {
        acc.entry(c.perturbation.to_string()).or_default().push(c.pass(CheckStage::Fuzzed, u32::MAX, k)?.estimate);
    }
    Ok(acc.into_iter().map(|(p, v)| (p, v.iter().sum::<f64>() / v.len() as f64)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Exactly the models that solved these files.
    pub models: Vec<String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvedSets {
    pub corpus_size: usize,
    pub per_model: BTreeMap<String, BTreeSet<String>>,
    pub union: BTreeSet<String>,
    /// Files solved by every model of each subset of two or more models.
    pub intersections: Vec<Region>,
    /// Venn regions: files solved by exactly the listed models.
    pub regions: Vec<Region>,
    /// Runs per model in the union, for reading the union as pass@(models x runs).
    pub runs_per_file: BTreeMap<String, usize>,
}

fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u64..(1u64 << n)).map(move |mask| (0..n).filter(|&i| mask >> i & 1 == 1).collect())
}

/// Files solved by each model (at least one successful run), with all
/// intersections and exclusive regions.
pub fn solved_sets(ledgers: &[(String, Vec<RunRecord>)]) -> Result<SolvedSets, EvalError> {
    if ledgers.is_empty() || ledgers.len() > 16 {
        return Err(EvalError::InvalidArgs(format!("need 1 to 16 ledgers, got {}", ledgers.len())));
    }
    let corpus = |recs: &[RunRecord]| recs.iter().map(|r| r.source_id.clone()).collect::<BTreeSet<_>>();
    let base = corpus(&ledgers[0].1);
    for (label, recs) in &ledgers[1..] {
        let other = corpus(recs);
        if other != base {
            let diff: Vec<&String> = base.symmetric_difference(&other).take(5).collect();
            return Err(EvalError::CorpusMismatch(format!("{} vs {label}: {diff:?}", ledgers[0].0)));
        }
    }
    let mut per_model = BTreeMap::new();
    let mut runs_per_file = BTreeMap::new();
    for (label, recs) in ledgers {
        let solved: BTreeSet<String> = recs.iter().filter(|r| r.success).map(|r| r.source_id.clone()).collect();
        per_model.insert(label.clone(), solved);
        let max_runs = cells(recs).iter().map(|c| c.runs.len()).max().unwrap_or(0);
        runs_per_file.insert(label.clone(), max_runs);
    }
    let labels: Vec<&String> = ledgers.iter().map(|(l, _)| l).collect();
    let sets: Vec<&BTreeSet<String>> = labels.iter().map(|l| &per_model[*l]).collect();
    let union: BTreeSet<String> = sets.iter().flat_map(|s| s.iter().cloned()).collect();
    let mut intersections = Vec::new();
    let mut regions = Vec::new();
    for sub in subsets(labels.len()) {
        let models: Vec<String> = sub.iter().map(|&i| labels[i].clone()).collect();
        let inter: Vec<String> = union.iter().filter(|f| sub.iter().all(|&i| sets[i].contains(*f))).cloned().collect();
        let exact: Vec<String> =
            union.iter().filter(|f| (0..labels.len()).all(|i| sets[i].contains(*f) == sub.contains(&i))).cloned().collect();
        if sub.len() >= 2 {
            intersections.push(Region { models: models.clone(), files: inter });
        }
        regions.push(Region { models, files: exact });
    }
    Ok(SolvedSets { corpus_size: base.len(), per_model, union, intersections, regions, runs_per_file })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: u32,
    pub cap: u32,
    /// Tokens generated by all attempts within the cap.
    pub tokens: u64,
    pub pass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenCurve {
    pub points: Vec<CurvePoint>,
    /// Runs without recorded usage, left out of the curve.
    pub missing_usage: Vec<String>,
}

/// One point per (k, cap): generated tokens up to the cap against final-result pass@k.
pub fn token_cost_curve(records: &[RunRecord], ks: &[u32], caps: &[u32], include_reasoning: bool) -> Result<TokenCurve, EvalError> {
    let mut missing = Vec::new();
    let mut kept = Vec::new();
    for r in records.iter().filter(|r| r.skipped.is_none()) {
        if r.attempts.iter().any(|a| a.usage.total() == 0) {
            missing.push(format!("{} / {} / {} / run {}", r.model_id, r.perturbation_id, r.source_id, r.run_index));
        } else {
            kept.push(r.clone());
        }
    }
    let mut points = Vec::new();
    for &k in ks {
        for &cap in caps {
            let tokens: u64 = kept
                .iter()
                .flat_map(|r| r.attempts.iter().filter(|a| a.iteration <= cap))
                .map(|a| if include_reasoning { a.usage.generated() } else { a.usage.completion_tokens })
                .sum();
            let table = pass_table_by_iteration(&kept, &[CheckStage::Fuzzed], &[cap], k)?;
            let pass = table.cell(CheckStage::Fuzzed, cap).unwrap_or(0.0);
            points.push(CurvePoint { k, cap, tokens, pass });
        }
    }
    Ok(TokenCurve { points, missing_usage: missing })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationFailures {
    pub iteration: u32,
    pub compile: usize,
    pub lint: usize,
    pub fuzz: usize,
    /// Attempts cut short by an infrastructure error.
    pub infra: usize,
}

impl IterationFailures {
    pub fn total(&self) -> usize {
        self.compile + self.lint + self.fuzz + self.infra
    }
}

/// For each iteration, which check failed the attempts made at that iteration.
pub fn failure_histogram(records: &[RunRecord]) -> Vec<IterationFailures> {
    let max = records.iter().map(|r| r.attempts.len()).max().unwrap_or(0);
    let mut out: Vec<IterationFailures> =
        (1..=max as u32).map(|iteration| IterationFailures { iteration, ..Default::default() }).collect();
    for r in records.iter().filter(|r| r.skipped.is_none()) {
        for a in &r.attempts {
            let Some(last) = a.reports.last() else { continue };
            if last.success {
                continue;
            }
            let slot = &mut out[a.iteration as usize - 1];
            match (last.infra_error, last.stage) {
                (Some(_), _) => slot.infra += 1,
                (None, CheckStage::Compiled) => slot.compile += 1,
                (None, CheckStage::Linted) => slot.lint += 1,
                (None, CheckStage::Fuzzed) => slot.fuzz += 1,
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub runs: usize,
    pub counts: BTreeMap<ErrorCategory, usize>,
    pub rates: BTreeMap<ErrorCategory, f64>,
}

fn rates_of<'a>(runs: impl Iterator<Item = &'a RunRecord>) -> ErrorRates {
    let mut counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|&c| (c, 0)).collect();
    let mut n = 0;
    for r in runs {
        n += 1;
        if let Some(c) = r.error_category {
            *counts.get_mut(&c).expect("all categories present") += 1;
        }
    }
    let rates = counts.iter().map(|(&c, &k)| (c, if n == 0 { 0.0 } else { k as f64 / n as f64 })).collect();
    ErrorRates { runs: n, counts, rates }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub by_kind: BTreeMap<ExperimentKind, ErrorRates>,
    pub overall: ErrorRates,
}

/// Share of runs ended by each infrastructure error category.
pub fn error_distribution(records: &[RunRecord]) -> ErrorDistribution {
    let live: Vec<&RunRecord> = records.iter().filter(|r| r.skipped.is_none()).collect();
    let kinds: BTreeSet<ExperimentKind> = live.iter().map(|r| r.perturbation_kind).collect();
    let by_kind = kinds.into_iter().map(|k| (k, rates_of(live.iter().copied().filter(|r| r.perturbation_kind == k)))).collect();
    ErrorDistribution { by_kind, overall: rates_of(live.iter().copied()) }
}

impl ErrorDistribution {
    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["kind".to_string(), "runs".to_string()];
        header.extend(ErrorCategory::ALL.iter().map(|c| c.to_string()));
        w.write_record(&header)?;
        let rows = self
            .by_kind
            .iter()
            .map(|(k, r)| (serde_json::to_value(k).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(), r))
            .chain(std::iter::once(("all".to_string(), &self.overall)));
        for (label, r) in rows {
            let mut rec = vec![label, r.runs.to_string()];
            rec.extend(ErrorCategory::ALL.iter().map(|c| format!("{:.4}", r.rates[c])));
            w.write_record(&rec)?;
        }
        finish_csv(w)
    }
}

/// Plot data: labelled series of points or histogram bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    #[serde(flatten)]
    pub data: SeriesData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesData {
    Points(Vec<[f64; 2]>),
    Bins(Vec<Bin>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width bins over `[lo, hi]`; the last bin is closed.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<Bin> {
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<Bin> =
        (0..bins).map(|i| Bin { lo: lo + width * i as f64, hi: lo + width * (i + 1) as f64, count: 0 }).collect();
    for &v in values {
        let i = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        out[i].count += 1;
    }
    out
}

/// The analyses to write; absent ones are skipped.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub pass_tables: Vec<(String, PassTable)>,
    pub aggregates: Vec<(String, AggregateKind, f64)>,
    pub sampled: Option<Vec<AggregateSample>>,
    pub per_perturbation: Option<(BTreeMap<String, f64>, BTreeMap<String, String>)>,
    pub token_curve: Option<TokenCurve>,
    pub failures: Option<Vec<IterationFailures>>,
    pub errors: Option<ErrorDistribution>,
    pub solved: Option<SolvedSets>,
}

fn write(dir: &Path, name: &str, text: &str, out: &mut Vec<PathBuf>) -> Result<(), EvalError> {
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|source| EvalError::Io { path: p.clone(), source })?;
    out.push(p);
    Ok(())
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report data serializes");
    s.push('\n');
    s
}

/// Writes CSV tables, JSON data and plot-data JSON into `dir`. Output is a
/// pure function of the report.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    std::fs::create_dir_all(dir).map_err(|source| EvalError::Io { path: dir.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (name, t) in &report.pass_tables {
        write(dir, &format!("pass_table_{name}.csv"), &t.to_csv()?, &mut out)?;
        write(dir, &format!("pass_table_{name}.json"), &json(t), &mut out)?;
    }
    if !report.aggregates.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["set", "kind", "pass@k"])?;
        for (set, kind, v) in &report.aggregates {
            w.write_record([set.clone(), json(kind).trim().trim_matches('"').to_string(), format!("{v:.6}")])?;
        }
        write(dir, "aggregates.csv", &finish_csv(w)?, &mut out)?;
    }
    if let Some(samples) = &report.sampled {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["statistic", "min", "avg", "stddev", "max"])?;
        let mut series = Vec::new();
        for (label, vals) in [
            ("min", samples.iter().map(|s| s.min).collect::<Vec<_>>()),
            ("mean", samples.iter().map(|s| s.mean).collect()),
            ("max", samples.iter().map(|s| s.max).collect()),
        ] {
            let n = vals.len() as f64;
            let avg = vals.iter().sum::<f64>() / n;
            let sd = if vals.len() > 1 { (vals.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            w.write_record([label.to_string(), fmt_num(lo), fmt_num(avg), fmt_num(sd), fmt_num(hi)])?;
            series.push(Series { label: label.to_string(), data: SeriesData::Bins(histogram(&vals, 0.0, 1.0, 20)) });
        }
        write(dir, "sampled_aggregates.csv", &finish_csv(w)?, &mut out)?;
        write(dir, "plot_sampled_aggregates.json", &json(&PlotData { series }), &mut out)?;
    }
    if let Some((scores, levels)) = &report.per_perturbation {
        let mut by_level: BTreeMap<&str, Vec<[f64; 2]>> = BTreeMap::new();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["perturbation", "level", "pass@k"])?;
        for (i, (p, v)) in scores.iter().enumerate() {
            let level = levels.get(p).map(String::as_str).unwrap_or("-");
            w.write_record([p.as_str(), level, &format!("{v:.6}")])?;
            by_level.entry(level).or_default().push([i as f64, *v]);
        }
        write(dir, "per_perturbation.csv", &finish_csv(w)?, &mut out)?;
        let series = by_level.into_iter().map(|(l, pts)| Series { label: format!("level {l}"), data: SeriesData::Points(pts) }).collect();
        write(dir, "plot_per_perturbation.json", &json(&PlotData { series }), &mut out)?;
    }
    if let Some(curve) = &report.token_curve {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["k", "cap", "tokens", "pass@k"])?;
        let mut by_k: BTreeMap<u32, Vec<[f64; 2]>> = BTreeMap::new();
        for p in &curve.points {
            w.write_record([p.k.to_string(), p.cap.to_string(), p.tokens.to_string(), format!("{:.6}", p.pass)])?;
            by_k.entry(p.k).or_default().push([p.tokens as f64, p.pass]);
        }
        write(dir, "token_curve.csv", &finish_csv(w)?, &mut out)?;
        let series = by_k.into_iter().map(|(k, pts)| Series { label: format!("pass@{k}"), data: SeriesData::Points(pts) }).collect();
        write(dir, "plot_token_curve.json", &json(&PlotData { series }), &mut out)?;
    }
    if let Some(f) = &report.failures {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["iteration", "compile", "lint", "fuzz", "infra"])?;
        for r in f {
            w.write_record([r.iteration, r.compile as u32, r.lint as u32, r.fuzz as u32, r.infra as u32].map(|v| v.to_string()))?;
        }
        write(dir, "failure_histogram.csv", &finish_csv(w)?, &mut out)?;
        let pts = |g: fn(&IterationFailures) -> usize| f.iter().map(|r| [f64::from(r.iteration), g(r) as f64]).collect();
        let series = vec![
            Series { label: "compile".into(), data: SeriesData::Points(pts(|r| r.compile)) },
            Series { label: "lint".into(), data: SeriesData::Points(pts(|r| r.lint)) },
            Series { label: "fuzz".into(), data: SeriesData::Points(pts(|r| r.fuzz)) },
            Series { label: "infra".into(), data: SeriesData::Points(pts(|r| r.infra)) },
        ];
        write(dir, "plot_failure_histogram.json", &json(&PlotData { series }), &mut out)?;
    }
    if let Some(e) = &report.errors {
        write(dir, "errors.csv", &e.to_csv()?, &mut out)?;
        write(dir, "errors.json", &json(e), &mut out)?;
    }
    if let Some(s) = &report.solved {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["region", "files"])?;
        for r in &s.regions {
            w.write_record([r.models.join("+"), r.files.len().to_string()])?;
        }
        w.write_record(["union".to_string(), s.union.len().to_string()])?;
        write(dir, "solved_sets.csv", &finish_csv(w)?, &mut out)?;
        write(dir, "solved_sets.json", &json(s), &mut out)?;
    }
    Ok(out)
}
