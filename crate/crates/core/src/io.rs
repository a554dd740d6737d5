//! File formats: edge-list graphs, transaction ledgers and parameter JSON.
//!
//! Graph files are CSV `src_label,dst_label,weight` with a header. A row with
//! weight 0 only declares its two nodes, which is how isolated nodes survive a
//! round trip. Labels map to indices in sorted order: numerically when every
//! label is a non-negative integer, lexicographically otherwise.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::ensembles::{FitReport, ModelKind, ParamSet};
use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;

pub const SCHEMA_VERSION: u32 = 1;

/// Sorted, de-duplicated labels in the crate's canonical order.
pub fn sort_labels<I: IntoIterator<Item = String>>(labels: I) -> Vec<String> {
    let set: BTreeSet<String> = labels.into_iter().collect();
    let mut out: Vec<String> = set.into_iter().collect();
    let numeric: Option<Vec<u128>> = out.iter().map(|l| l.parse().ok()).collect();
    if let Some(keys) = numeric {
        let mut pairs: Vec<(u128, String)> = keys.into_iter().zip(out).collect();
        pairs.sort();
        out = pairs.into_iter().map(|(_, l)| l).collect();
    }
    out
}

fn graph_from_triples(rows: Vec<(String, String, u64, u64)>) -> Result<WeightedDigraph> {
    let labels = sort_labels(rows.iter().flat_map(|(a, b, _, _)| [a.clone(), b.clone()]));
    if labels.is_empty() {
        return Err(Error::InvalidGraph("no nodes".into()));
    }
    let index: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut g = WeightedDigraph::empty(labels.len())?;
    for (src, dst, w, line) in &rows {
        if *w > 0 {
            g.add_weight(index[src.as_str()], index[dst.as_str()], *w)
                .map_err(|e| Error::Parse {
                    line: *line,
                    message: e.to_string(),
                })?;
        }
    }
    g.with_labels(labels)
}

pub fn read_graph_csv<R: Read>(input: R) -> Result<WeightedDigraph> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.len() != 3 {
        return Err(Error::Schema(format!(
            "graph header must be src_label,dst_label,weight, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse { line, message };
        if rec.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, got {}", rec.len())));
        }
        let w: u64 = rec[2].parse().map_err(|_| {
            parse_err(format!(
                "weight '{}' is not a non-negative integer",
                &rec[2]
            ))
        })?;
        if rec[0] == rec[1] {
            return Err(parse_err(format!("self-loop on '{}'", &rec[0])));
        }
        rows.push((rec[0].to_string(), rec[1].to_string(), w, line));
    }
    graph_from_triples(rows)
}

pub fn write_graph_csv<W: Write>(out: W, g: &WeightedDigraph) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["src_label", "dst_label", "weight"])?;
    let n = g.n();
    for i in 0..n {
        let row = g.row(i);
        let linked = (0..n).any(|j| row[j] > 0 || g.weight(j, i) > 0);
        if !linked && n > 1 {
            let partner = if i == 0 { 1 } else { 0 };
            w.write_record([g.label(i), g.label(partner), "0".into()])?;
        }
        for (j, &wij) in row.iter().enumerate() {
            if wij > 0 {
                w.write_record([g.label(i), g.label(j), wij.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Aggregation granularity of transactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Month,
    #[default]
    Quarter,
    Year,
}

impl Period {
    /// `2010-03`, `2010Q1` or `2010`.
    pub fn key(self, date: NaiveDate) -> String {
        match self {
            Period::Month => format!("{:04}-{:02}", date.year(), date.month()),
            Period::Quarter => format!("{:04}Q{}", date.year(), (date.month() - 1) / 3 + 1),
            Period::Year => format!("{:04}", date.year()),
        }
    }
}

impl std::str::FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "month" | "monthly" => Ok(Period::Month),
            "quarter" | "quarterly" => Ok(Period::Quarter),
            "year" | "yearly" => Ok(Period::Year),
            other => Err(Error::Schema(format!("unknown period '{other}'"))),
        }
    }
}

/// One interbank loan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub date: NaiveDate,
    /// Seconds since midnight.
    pub time: Option<u32>,
    pub lender: String,
    pub borrower: String,
    /// Minor currency units.
    pub amount: u64,
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub period: Period,
    /// Abort on the first bad row instead of skipping it.
    pub strict: bool,
    /// Keep only rows whose column equals the value.
    pub filters: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedRow {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct PeriodGraph {
    pub period: String,
    pub graph: WeightedDigraph,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    /// In period order.
    pub periods: Vec<PeriodGraph>,
    pub skipped: Vec<SkippedRow>,
    pub filtered: u64,
}

fn parse_time(s: &str) -> Option<u32> {
    if let Ok(secs) = s.parse::<u32>() {
        return (secs < 86_400).then_some(secs);
    }
    let t = chrono::NaiveTime::parse_from_str(s, "%H:%M:%S").ok()?;
    Some(chrono::Timelike::num_seconds_from_midnight(&t))
}

/// Reads a transaction CSV with at least the columns `date`, `lender`,
/// `borrower`, `amount` (and optionally `time`). Other columns are ignored
/// except by `filters`.
pub fn read_transactions<R: Read>(
    input: R,
    options: &IngestOptions,
) -> Result<(Vec<TransactionRecord>, Vec<SkippedRow>, u64)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let required = ["date", "lender", "borrower", "amount"];
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(required) {
        *slot = col(name).ok_or_else(|| Error::Schema(format!("missing column '{name}'")))?;
    }
    let time_col = col("time");
    let filters = options
        .filters
        .iter()
        .map(|(c, v)| {
            col(c)
                .map(|i| (i, v.as_str()))
                .ok_or_else(|| Error::Schema(format!("filter on unknown column '{c}'")))
        })
        .collect::<Result<Vec<_>>>()?;

    let (mut records, mut skipped, mut filtered) = (Vec::new(), Vec::new(), 0u64);
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                if options.strict {
                    return Err(e.into());
                }
                skipped.push(SkippedRow {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        if filters.iter().any(|&(i, v)| rec.get(i) != Some(v)) {
            filtered += 1;
            continue;
        }
        let parsed = (|| -> std::result::Result<TransactionRecord, String> {
            let field = |i: usize| rec.get(i).unwrap_or("");
            let date = NaiveDate::parse_from_str(field(idx[0]), "%Y-%m-%d")
                .map_err(|_| format!("bad date '{}'", field(idx[0])))?;
            let time = match time_col.map(field).filter(|s| !s.is_empty()) {
                Some(s) => Some(parse_time(s).ok_or_else(|| format!("bad time '{s}'"))?),
                None => None,
            };
            let (lender, borrower) = (field(idx[1]), field(idx[2]));
            if lender.is_empty() || borrower.is_empty() {
                return Err("empty bank id".into());
            }
            if lender == borrower {
                return Err(format!("self-loop on '{lender}'"));
            }
            let amount: u64 = field(idx[3])
                .parse()
                .map_err(|_| format!("bad amount '{}'", field(idx[3])))?;
            if amount == 0 {
                return Err("amount must be at least 1".into());
            }
            Ok(TransactionRecord {
                date,
                time,
                lender: lender.to_string(),
                borrower: borrower.to_string(),
                amount,
            })
        })();
        match parsed {
            Ok(r) => records.push(r),
            Err(message) if options.strict => return Err(Error::Parse { line, message }),
            Err(message) => skipped.push(SkippedRow { line, message }),
        }
    }
    Ok((records, skipped, filtered))
}

/// Sums amounts per ordered bank pair within each period. Each period's node
/// set is the banks active in it.
pub fn aggregate(records: &[TransactionRecord], period: Period) -> Result<Vec<PeriodGraph>> {
    let mut buckets: BTreeMap<String, Vec<(String, String, u64, u64)>> = BTreeMap::new();
    for r in records {
        buckets.entry(period.key(r.date)).or_default().push((
            r.lender.clone(),
            r.borrower.clone(),
            r.amount,
            0,
        ));
    }
    buckets
        .into_iter()
        .map(|(period, rows)| {
            Ok(PeriodGraph {
                period,
                graph: graph_from_triples(rows)?,
            })
        })
        .collect()
}

pub fn ingest<R: Read>(input: R, options: &IngestOptions) -> Result<Ingested> {
    let (records, skipped, filtered) = read_transactions(input, options)?;
    Ok(Ingested {
        periods: aggregate(&records, options.period)?,
        skipped,
        filtered,
    })
}

/// Solver outcome stored next to fitted multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub converged: bool,
    pub residual_sup_norm: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub fixed_point_steps: usize,
    pub pinned: usize,
    /// `target − expectation` per constraint name.
    pub residuals: BTreeMap<String, Vec<f64>>,
}

/// JSON document for a parameter set, optionally with its fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDocument {
    pub schema_version: u32,
    pub model: ModelKind,
    pub n: usize,
    pub labels: Vec<String>,
    /// Per-node multipliers keyed by multiplier name.
    pub multipliers: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitMeta>,
}

impl ParamsDocument {
    pub fn from_params(p: &ParamSet, labels: Vec<String>) -> Self {
        let multipliers = p
            .model
            .multiplier_names()
            .iter()
            .enumerate()
            .map(|(f, name)| (name.to_string(), p.family(f).to_vec()))
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            model: p.model,
            n: p.n,
            labels,
            multipliers,
            fit: None,
        }
    }

    pub fn from_fit(r: &FitReport, tolerance: f64, labels: Vec<String>) -> Self {
        let mut doc = Self::from_params(&r.params, labels);
        let residuals = r
            .residuals
            .model
            .constraint_names()
            .iter()
            .enumerate()
            .map(|(f, name)| (name.to_string(), r.residuals.family(f).to_vec()))
            .collect();
        doc.fit = Some(FitMeta {
            converged: r.converged,
            residual_sup_norm: r.residual_sup_norm,
            tolerance,
            iterations: r.iterations,
            newton_steps: r.newton_steps,
            fixed_point_steps: r.fixed_point_steps,
            pinned: r.pinned,
            residuals,
        });
        doc
    }

    pub fn params(&self) -> Result<ParamSet> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        let mut values = Vec::with_capacity(self.model.families() * self.n);
        for name in self.model.multiplier_names() {
            let fam = self
                .multipliers
                .get(*name)
                .ok_or_else(|| Error::Schema(format!("missing multipliers '{name}'")))?;
            if fam.len() != self.n {
                return Err(Error::Schema(format!(
                    "'{name}' has {} entries, n = {}",
                    fam.len(),
                    self.n
                )));
            }
            values.extend_from_slice(fam);
        }
        ParamSet::new(self.model, self.n, values)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Labels of `g`, falling back to node indices.
pub fn labels_of(g: &WeightedDigraph) -> Vec<String> {
    (0..g.n()).map(|i| g.label(i)).collect()
}
