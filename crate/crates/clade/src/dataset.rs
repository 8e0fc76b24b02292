//! JSON-lines instance files: one instance per line, tagged by `kind`.
//!
//! ```text
//! {"kind":"tsp","coords":[[0.1,0.7],[0.4,0.2],[0.9,0.9]]}
//! {"kind":"kp","values":[0.5],"weights":[0.2],"capacity":25.0}
//! {"kind":"bpp","sizes":[41,37,60],"capacity":100,"tag":"weibull_1k_c100"}
//! ```
//!
//! An optional `reference` field carries a known objective for TSP and KP.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clade_core::dsl::ProblemKind;
use clade_core::problems::{AcoConfig, BppInstance, Dataset, KpInstance, TspInstance};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceRecord {
    Tsp(TspInstance),
    Kp(KpInstance),
    Bpp(BppInstance),
}

impl InstanceRecord {
    fn family(&self) -> &'static str {
        match self {
            InstanceRecord::Tsp(_) => "tsp",
            InstanceRecord::Kp(_) => "kp",
            InstanceRecord::Bpp(_) => "bpp",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    Parse { path: PathBuf, line: usize, source: serde_json::Error },
    #[error("{path}: empty dataset")]
    Empty { path: PathBuf },
    #[error("dataset mixes `{0}` and `{1}` instances")]
    Mixed(&'static str, &'static str),
    #[error("dataset holds `{found}` instances but `{wanted}` was requested")]
    KindMismatch { found: &'static str, wanted: &'static str },
    #[error("instance {index} is invalid: {reason}")]
    Invalid { index: usize, reason: &'static str },
}

pub fn write_jsonl(path: &Path, records: &[InstanceRecord]) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io { path: path.to_owned(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for r in records {
        serde_json::to_writer(&mut w, r).expect("instances serialize");
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads every non-blank line; errors carry 1-based line numbers.
pub fn read_jsonl(path: &Path) -> Result<Vec<InstanceRecord>, DatasetError> {
    let io = |source| DatasetError::Io { path: path.to_owned(), source };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| DatasetError::Parse {
            path: path.to_owned(),
            line: i + 1,
            source,
        })?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(DatasetError::Empty { path: path.to_owned() });
    }
    Ok(out)
}

/// The problem family a record list holds.
pub fn records_kind(records: &[InstanceRecord]) -> Result<ProblemKind, DatasetError> {
    let first = records.first().map(InstanceRecord::family).unwrap_or("tsp");
    if let Some(other) = records.iter().map(InstanceRecord::family).find(|f| *f != first) {
        return Err(DatasetError::Mixed(first, other));
    }
    Ok(ProblemKind::parse(first).expect("family names are problem kinds"))
}

fn validate(records: &[InstanceRecord]) -> Result<(), DatasetError> {
    for (index, r) in records.iter().enumerate() {
        let reason = match r {
            InstanceRecord::Tsp(t) if t.n() < 3 => Some("a TSP instance needs at least three nodes"),
            InstanceRecord::Tsp(t) if t.coords.iter().any(|c| !c.0.is_finite() || !c.1.is_finite()) => {
                Some("coordinates must be finite")
            }
            InstanceRecord::Kp(k) if k.values.len() != k.weights.len() || k.values.is_empty() => {
                Some("values and weights must be nonempty and of equal length")
            }
            InstanceRecord::Kp(k) if k.weights.iter().any(|&w| !(w > 0.0)) || !(k.capacity >= 0.0) => {
                Some("weights must be > 0 and capacity >= 0")
            }
            InstanceRecord::Bpp(b) if b.capacity == 0 || b.sizes.iter().any(|&s| s == 0 || s > b.capacity) => {
                Some("sizes must lie in [1, capacity]")
            }
            InstanceRecord::Bpp(b) if b.sizes.is_empty() => Some("no items"),
            _ => None,
        };
        if let Some(reason) = reason {
            return Err(DatasetError::Invalid { index, reason });
        }
    }
    Ok(())
}

/// Builds an evaluation dataset for `kind`. TSP records also back `aco_tsp`.
pub fn into_dataset(
    records: Vec<InstanceRecord>,
    kind: ProblemKind,
    aco: AcoConfig,
    aco_seed: u64,
) -> Result<Dataset, DatasetError> {
    let found = records_kind(&records)?;
    validate(&records)?;
    let mismatch = || DatasetError::KindMismatch { found: found.as_str(), wanted: kind.as_str() };
    let ok = match (found, kind) {
        (ProblemKind::Tsp, ProblemKind::Tsp | ProblemKind::AcoTsp) => true,
        (f, k) => f == k,
    };
    if !ok {
        return Err(mismatch());
    }
    let tsp = || records.iter().filter_map(|r| if let InstanceRecord::Tsp(t) = r { Some(t.clone()) } else { None }).collect();
    Ok(match kind {
        ProblemKind::Tsp => Dataset::Tsp(tsp()),
        ProblemKind::AcoTsp => Dataset::AcoTsp { instances: tsp(), config: aco, seed: aco_seed },
        ProblemKind::Kp => Dataset::Kp(
            records.into_iter().filter_map(|r| if let InstanceRecord::Kp(k) = r { Some(k) } else { None }).collect(),
        ),
        ProblemKind::Bpp => Dataset::Bpp(
            records.into_iter().filter_map(|r| if let InstanceRecord::Bpp(b) = r { Some(b) } else { None }).collect(),
        ),
    })
}

/// Records making up a dataset, e.g. for writing it back out.
pub fn to_records(ds: &Dataset) -> Vec<InstanceRecord> {
    match ds {
        Dataset::Tsp(v) | Dataset::AcoTsp { instances: v, .. } => v.iter().cloned().map(InstanceRecord::Tsp).collect(),
        Dataset::Kp(v) => v.iter().cloned().map(InstanceRecord::Kp).collect(),
        Dataset::Bpp(v) => v.iter().cloned().map(InstanceRecord::Bpp).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clade_core::problems::{gen_bpp_mixture, gen_kp, gen_tsp};

    #[test]
    fn round_trip_all_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        for records in [
            gen_tsp(5, 3, 1).into_iter().map(InstanceRecord::Tsp).collect::<Vec<_>>(),
            gen_kp(4, 2.0, 2, 1).into_iter().map(InstanceRecord::Kp).collect(),
            gen_bpp_mixture(1).into_iter().map(InstanceRecord::Bpp).collect(),
        ] {
            write_jsonl(&path, &records).unwrap();
            assert_eq!(read_jsonl(&path).unwrap(), records);
        }
    }

    #[test]
    fn tsp_line_format() {
        let rec = InstanceRecord::Tsp(TspInstance::from_coords(vec![(0.0, 0.5), (1.0, 0.0), (0.0, 1.0)]));
        let text = serde_json::to_string(&rec).unwrap();
        assert_eq!(text, r#"{"kind":"tsp","coords":[[0.0,0.5],[1.0,0.0],[0.0,1.0]]}"#);
        let back: InstanceRecord = serde_json::from_str(&text).unwrap();
        let InstanceRecord::Tsp(t) = back else { panic!("wrong kind") };
        assert_eq!(t.dist(0, 1), (1.25f64).sqrt());
    }

    #[test]
    fn errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"kind\":\"kp\",\"values\":[1],\"weights\":[1],\"capacity\":1}\n{oops}\n").unwrap();
        let err = read_jsonl(&path).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
    }

    #[test]
    fn kind_checks() {
        let tsp: Vec<_> = gen_tsp(5, 2, 1).into_iter().map(InstanceRecord::Tsp).collect();
        assert!(into_dataset(tsp.clone(), ProblemKind::AcoTsp, AcoConfig::default(), 0).is_ok());
        assert!(matches!(
            into_dataset(tsp.clone(), ProblemKind::Kp, AcoConfig::default(), 0),
            Err(DatasetError::KindMismatch { .. })
        ));
        let mut mixed = tsp;
        mixed.push(InstanceRecord::Kp(gen_kp(2, 1.0, 1, 0).remove(0)));
        assert!(matches!(records_kind(&mixed), Err(DatasetError::Mixed(..))));
        let bad = vec![InstanceRecord::Bpp(BppInstance { sizes: vec![0], capacity: 10, tag: None })];
        assert!(matches!(into_dataset(bad, ProblemKind::Bpp, AcoConfig::default(), 0), Err(DatasetError::Invalid { .. })));
    }
}
