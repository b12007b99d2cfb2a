//! External run files and relevance judgments as CSV.
//!
//! ```text
//! runs:       algorithm,user,rank,item     (rank is 1-based)
//! judgments:  user,item                    (one line per relevant pair)
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::corpus::RelevanceJudgments;
use crate::reranker::RankedList;
use crate::sudden_death::RunRecord;

pub const RUNS_HEADER: [&str; 4] = ["algorithm", "user", "rank", "item"];
pub const JUDGMENTS_HEADER: [&str; 2] = ["user", "item"];

#[derive(Debug, Error)]
pub enum RunFileError {
    #[error("{what}: expected header {expected:?}, found {found:?}")]
    Header { what: &'static str, expected: String, found: String },
    #[error("{what} record {record}: {reason}")]
    Record { what: &'static str, record: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, what: &'static str, expected: &[&str]) -> Result<(), RunFileError> {
    let found: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if found != expected {
        return Err(RunFileError::Header {
            what,
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, what: &'static str, line: usize) -> Result<T, RunFileError> {
    let raw = rec.get(k).unwrap_or("").trim();
    raw.parse().map_err(|_| RunFileError::Record {
        what,
        record: line,
        reason: format!("cannot parse column {} value {raw:?}", k + 1),
    })
}

pub fn read_runs<R: Read>(source: R) -> Result<Vec<RunRecord>, RunFileError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    check_header(&mut rdr, "runs", &RUNS_HEADER)?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        out.push(RunRecord {
            algorithm: rec.get(0).unwrap_or("").to_string(),
            user: field(&rec, 1, "runs", line)?,
            rank: field(&rec, 2, "runs", line)?,
            item: field(&rec, 3, "runs", line)?,
        });
    }
    Ok(out)
}

pub fn read_judgments<R: Read>(source: R) -> Result<RelevanceJudgments, RunFileError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    check_header(&mut rdr, "judgments", &JUDGMENTS_HEADER)?;
    let mut pairs = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        pairs.push((field(&rec, 0, "judgments", k + 2)?, field(&rec, 1, "judgments", k + 2)?));
    }
    Ok(RelevanceJudgments::from_pairs(0, pairs))
}

/// Writes `lists` (per user, one list per roster entry) as a run file.
pub fn write_runs_to<W: Write>(
    sink: W,
    roster: &[String],
    lists: &BTreeMap<u32, Vec<RankedList>>,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(RUNS_HEADER)?;
    for (alg_idx, alg) in roster.iter().enumerate() {
        for (user, per_alg) in lists {
            for (rank, item) in per_alg[alg_idx].items().iter().enumerate() {
                w.write_record([alg.clone(), user.to_string(), (rank + 1).to_string(), item.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_runs(path: &Path, roster: &[String], lists: &BTreeMap<u32, Vec<RankedList>>) -> std::io::Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_runs_to(file, roster, lists).map_err(std::io::Error::other)
}

/// Writes the relevant pairs of `users` as a judgments file.
pub fn write_judgments(path: &Path, judgments: &RelevanceJudgments, users: &[u32]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", JUDGMENTS_HEADER.join(","))?;
    for &u in users {
        for i in judgments.relevant(u) {
            writeln!(w, "{u},{i}")?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_runs_and_judgments() {
        let runs = read_runs("algorithm,user,rank,item\nmf,1,1,10\nmf, 1, 2, 20\n".as_bytes()).unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[1], RunRecord { algorithm: "mf".into(), user: 1, rank: 2, item: 20 });
        let j = read_judgments("user,item\n1,20\n2,5\n".as_bytes()).unwrap();
        assert!(j.is_relevant(1, 20));
        assert!(j.is_relevant(2, 5));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(read_runs("a,b,c,d\n".as_bytes()), Err(RunFileError::Header { .. })));
        assert!(matches!(
            read_runs("algorithm,user,rank,item\nmf,x,1,2\n".as_bytes()),
            Err(RunFileError::Record { record: 2, .. })
        ));
        assert!(read_judgments("user,item\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn written_runs_read_back() {
        let roster = vec!["a".to_string(), "b".to_string()];
        let lists = BTreeMap::from([(3, vec![RankedList::new(3, vec![7, 8]), RankedList::new(3, vec![9])])]);
        let mut buf = Vec::new();
        write_runs_to(&mut buf, &roster, &lists).unwrap();
        let back = read_runs(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[2], RunRecord { algorithm: "b".into(), user: 3, rank: 1, item: 9 });
    }
}
