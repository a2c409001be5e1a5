//! `summary.csv` rows and the ranked comparison.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub controller: String,
    pub rms_accel: f64,
    pub absorbed_power_final: f64,
    pub switch_count: usize,
}

pub const SUMMARY_COLUMNS: [&str; 5] = ["scenario", "controller", "rms_accel", "absorbed_power_final", "switch_count"];

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let io = |e: csv::Error| CliError::Other(format!("writing {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    if rows.is_empty() {
        w.write_record(SUMMARY_COLUMNS).map_err(io)?;
    }
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::schema(format!("{}: {e}", path.display())))?;
    let headers = r.headers().map_err(|e| CliError::schema(format!("{}: {e}", path.display())))?.clone();
    if headers.iter().ne(SUMMARY_COLUMNS) {
        return Err(CliError::schema(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            SUMMARY_COLUMNS.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| CliError::schema(format!("{} row {}: {e}", path.display(), i + 1))))
        .collect()
}

/// `(worse - better) / worse * 100`; zero when both are zero.
pub fn relative_improvement(better: f64, worse: f64) -> Option<f64> {
    if worse == 0.0 {
        return (better == 0.0).then_some(0.0);
    }
    Some((worse - better) / worse * 100.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranked {
    pub row: SummaryRow,
    /// Improvement of this row over the next (worse) one.
    pub rms_improvement: Option<f64>,
    pub power_improvement: Option<f64>,
}

fn rank_order(a: &SummaryRow, b: &SummaryRow) -> Ordering {
    a.rms_accel
        .total_cmp(&b.rms_accel)
        .then(a.absorbed_power_final.total_cmp(&b.absorbed_power_final))
        .then(a.switch_count.cmp(&b.switch_count))
        .then_with(|| a.controller.cmp(&b.controller))
}

/// Sorts by RMS acceleration and computes adjacent-pair improvements.
pub fn compare(mut rows: Vec<SummaryRow>) -> Result<Vec<Ranked>> {
    if rows.len() < 2 {
        return Err(CliError::schema(format!("compare needs at least 2 rows, got {}", rows.len())));
    }
    let mut scenarios: Vec<&str> = rows.iter().map(|r| r.scenario.as_str()).collect();
    scenarios.sort_unstable();
    scenarios.dedup();
    if scenarios.len() > 1 {
        return Err(CliError::schema(format!(
            "refusing to compare rows from different scenarios: {}",
            scenarios.join(", ")
        )));
    }
    rows.sort_by(rank_order);
    let ranked = (0..rows.len())
        .map(|i| {
            let next = rows.get(i + 1);
            Ranked {
                row: rows[i].clone(),
                rms_improvement: next.and_then(|w| relative_improvement(rows[i].rms_accel, w.rms_accel)),
                power_improvement: next
                    .and_then(|w| relative_improvement(rows[i].absorbed_power_final, w.absorbed_power_final)),
            }
        })
        .collect();
    Ok(ranked)
}

fn pct(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.2}%")).unwrap_or_else(|| "-".into())
}

pub fn format_table(ranked: &[Ranked]) -> String {
    let mut out = String::new();
    if let Some(first) = ranked.first() {
        out.push_str(&format!("scenario: {}\n", first.row.scenario));
    }
    out.push_str(&format!(
        "{:>4}  {:<16} {:>14} {:>14} {:>8}  {:>12} {:>12}\n",
        "rank", "controller", "rms_accel", "abs_power", "switches", "rms_vs_next", "power_vs_next"
    ));
    for (i, r) in ranked.iter().enumerate() {
        out.push_str(&format!(
            "{:>4}  {:<16} {:>14.6} {:>14.6} {:>8}  {:>12} {:>12}\n",
            i + 1,
            r.row.controller,
            r.row.rms_accel,
            r.row.absorbed_power_final,
            r.row.switch_count,
            pct(r.rms_improvement),
            pct(r.power_improvement),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(controller: &str, rms: f64, power: f64) -> SummaryRow {
        SummaryRow {
            scenario: "t1".into(),
            controller: controller.into(),
            rms_accel: rms,
            absorbed_power_final: power,
            switch_count: 0,
        }
    }

    fn reference() -> Vec<SummaryRow> {
        vec![
            row("add", 3.764, 8.2293),
            row("pdd", 3.3885, 5.6376),
            row("hinf", 3.0487, 4.3078),
            row("passive", 5.5165, 10.4842),
        ]
    }

    #[test]
    fn reference_rows() {
        let ranked = compare(reference()).unwrap();
        let order: Vec<&str> = ranked.iter().map(|r| r.row.controller.as_str()).collect();
        assert_eq!(order, ["hinf", "pdd", "add", "passive"]);
        assert_eq!(format!("{:.2}", ranked[0].rms_improvement.unwrap()), "10.03");
        assert_eq!(format!("{:.2}", ranked[0].power_improvement.unwrap()), "23.59");
        assert!(ranked[3].rms_improvement.is_none());
    }

    #[test]
    fn permutation_invariant() {
        let base = compare(reference()).unwrap();
        let mut rows = reference();
        for k in 0..8 {
            rows.rotate_left(1);
            if k % 3 == 0 {
                rows.swap(0, 2);
            }
            assert_eq!(compare(rows.clone()).unwrap(), base);
        }
    }

    #[test]
    fn repeated_value_gives_zero() {
        let ranked = compare(vec![row("a", 2.0, 0.0), row("b", 2.0, 0.0), row("c", 2.0, 0.0)]).unwrap();
        assert!(ranked[..2].iter().all(|r| r.rms_improvement == Some(0.0) && r.power_improvement == Some(0.0)));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(compare(vec![row("a", 1.0, 1.0)]).is_err());
        let mut rows = reference();
        rows[2].scenario = "t2".into();
        let e = compare(rows).unwrap_err();
        assert!(e.to_string().contains("t1, t2"));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let mut rows = reference();
        rows[0].rms_accel = 0.1 + 0.2;
        rows[1].absorbed_power_final = 1.0 / 3.0;
        rows[2].rms_accel = 6.02214076e-23;
        rows[3].absorbed_power_final = f64::MAX;
        rows[3].switch_count = 1416;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        write_summary(&path, &rows).unwrap();
        let back = read_summary(&path).unwrap();
        assert_eq!(back, rows);
        for (a, b) in back.iter().zip(&rows) {
            assert_eq!(a.rms_accel.to_bits(), b.rms_accel.to_bits());
            assert_eq!(a.absorbed_power_final.to_bits(), b.absorbed_power_final.to_bits());
        }
        let head = std::fs::read_to_string(&path).unwrap();
        assert!(head.starts_with("scenario,controller,rms_accel,absorbed_power_final,switch_count\n"));
    }
}
