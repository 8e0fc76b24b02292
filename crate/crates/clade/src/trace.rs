//! CSV form of run traces and the cross-run aggregate.

use std::io::{Read, Write};

use clade_core::dsl::ActionKind;
use clade_core::engine::{RunTrace, TraceRow};
use clade_core::NodeId;

pub const TRACE_HEADER: [&str; 9] = [
    "eval_index",
    "node_id",
    "parent_id",
    "action",
    "raw_score",
    "outcome",
    "global_best_raw",
    "frozen_count",
    "temperature",
];

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: bad `{column}` value `{value}`")]
    Field { row: usize, column: &'static str, value: String },
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_trace<W: Write>(out: W, trace: &RunTrace) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.rows {
        w.write_record([
            r.eval_index.to_string(),
            r.node_id.to_string(),
            r.parent_id.to_string(),
            r.action.map_or("-", |a| a.as_str()).to_owned(),
            opt(r.raw_score),
            r.outcome.to_string(),
            opt(r.global_best_raw),
            r.frozen_count.to_string(),
            r.temperature.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn trace_to_string(trace: &RunTrace) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace).expect("writing to memory");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

pub fn read_trace<R: Read>(input: R) -> Result<RunTrace, TraceError> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header != TRACE_HEADER {
        return Err(TraceError::Header(header));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |col: usize| rec.get(col).unwrap_or("");
        let bad = |col: usize| TraceError::Field { row, column: TRACE_HEADER[col], value: field(col).to_owned() };
        let num = |col: usize| field(col).parse::<f64>().map_err(|_| bad(col));
        let int = |col: usize| field(col).parse::<u64>().map_err(|_| bad(col));
        let maybe = |col: usize| if field(col).is_empty() { Ok(None) } else { num(col).map(Some) };
        let action = match field(3) {
            "-" => None,
            s => Some(ActionKind::parse(s).ok_or_else(|| bad(3))?),
        };
        rows.push(TraceRow {
            eval_index: int(0)?,
            node_id: NodeId(int(1)? as usize),
            parent_id: NodeId(int(2)? as usize),
            action,
            raw_score: maybe(4)?,
            outcome: num(5)?,
            global_best_raw: maybe(6)?,
            frozen_count: int(7)? as usize,
            temperature: num(8)?,
        });
    }
    Ok(RunTrace { rows })
}

/// Best-so-far statistics across runs of one group at one evaluation index.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub group: String,
    pub eval_index: u64,
    pub mean_best: f64,
    /// Sample standard deviation; zero for a single run.
    pub std_best: f64,
    pub runs: usize,
}

/// Mean and sample std of best-so-far per evaluation index. Indices where
/// some run has no best yet, or has already stopped, count only the runs
/// that do.
pub fn aggregate(group: &str, traces: &[&RunTrace]) -> Vec<AggregateRow> {
    let longest = traces.iter().map(|t| t.rows.len()).max().unwrap_or(0);
    (0..longest)
        .filter_map(|i| {
            let vals: Vec<f64> = traces.iter().filter_map(|t| t.rows.get(i).and_then(|r| r.global_best_raw)).collect();
            if vals.is_empty() {
                return None;
            }
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let std = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            Some(AggregateRow { group: group.to_owned(), eval_index: i as u64 + 1, mean_best: mean, std_best: std, runs: vals.len() })
        })
        .collect()
}

pub fn write_aggregate<W: Write>(out: W, rows: &[AggregateRow]) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "eval_index", "mean_best", "std_best", "runs"])?;
    for r in rows {
        w.write_record([
            r.group.clone(),
            r.eval_index.to_string(),
            r.mean_best.to_string(),
            r.std_best.to_string(),
            r.runs.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
