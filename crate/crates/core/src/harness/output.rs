//! `metrics.csv` and `sd.csv` writers.
//!
//! UTF-8, LF line endings, `.` decimal separator, six decimal places.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{ResultRow, SdRow};

pub const METRICS_HEADER: &str = "algorithm,lambda,N,metric,value";
pub const SD_HEADER: &str = "N,lambda,algorithm,sd_score,algs_roster";

pub fn metrics_csv(rows: &[ResultRow]) -> String {
    let mut s = String::with_capacity(32 * (rows.len() + 1));
    s.push_str(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{:.6},{},{},{:.6}", r.algorithm, r.lambda, r.n, r.metric, r.value);
    }
    s
}

pub fn sd_csv(reports: &[SdRow]) -> String {
    let mut s = String::from(SD_HEADER);
    s.push('\n');
    for row in reports {
        let roster = row.report.roster_label();
        for (alg, score) in row.report.roster.iter().zip(&row.report.scores) {
            let _ = writeln!(s, "{},{:.6},{},{:.6},{}", row.n, row.lambda, alg, score, roster);
        }
    }
    s
}

/// Writes both tables into `dir` and returns their paths.
pub fn emit_csv(rows: &[ResultRow], reports: &[SdRow], dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let metrics = dir.join("metrics.csv");
    std::fs::write(&metrics, metrics_csv(rows))?;
    let sd = dir.join("sd.csv");
    std::fs::write(&sd, sd_csv(reports))?;
    Ok(vec![metrics, sd])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Metric;
    use crate::sudden_death::SdReport;
    use std::collections::BTreeMap;

    fn row() -> ResultRow {
        ResultRow {
            algorithm: "spad".into(),
            lambda: 0.5,
            n: 10,
            metric: Metric::Precision,
            value: 1.0 / 3.0,
        }
    }

    #[test]
    fn one_row_two_lines() {
        let s = metrics_csv(&[row()]);
        assert_eq!(s, "algorithm,lambda,N,metric,value\nspad,0.500000,10,precision,0.333333\n");
    }

    #[test]
    fn sd_rows_carry_roster() {
        let report = SdReport {
            roster: vec!["mf".into(), "mmr".into()],
            n: 5,
            user_count: 4,
            wins: vec![3, 1],
            scores: vec![0.75, 0.25],
            awards: BTreeMap::new(),
            earliest: BTreeMap::new(),
        };
        let s = sd_csv(&[SdRow { lambda: 0.1, n: 5, report }]);
        assert_eq!(
            s,
            "N,lambda,algorithm,sd_score,algs_roster\n5,0.100000,mf,0.750000,mf|mmr\n5,0.100000,mmr,0.250000,mf|mmr\n"
        );
    }

    #[test]
    fn values_parse_with_a_csv_reader() {
        let s = metrics_csv(&[row(), row()]);
        let mut rdr = csv::Reader::from_reader(s.as_bytes());
        assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), vec!["algorithm", "lambda", "N", "metric", "value"]);
        for rec in rdr.records() {
            let rec = rec.unwrap();
            assert_eq!(rec[4].parse::<f64>().unwrap(), 0.333333);
        }
    }
}
