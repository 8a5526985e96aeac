//! Result files: `summary.csv`, per-row trace CSVs, `manifest.json`,
//! `conditions.json`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use trlinucb::conditions::ConditionReport;
use trlinucb::harness::SweepRow;

use crate::error::{BenchError, Result};

pub const SUMMARY_HEADER: [&str; 10] = [
    "policy",
    "d",
    "K",
    "T",
    "S",
    "reps",
    "param_name",
    "param_value",
    "mean_regret",
    "stderr",
];
pub const TRACE_HEADER: [&str; 3] = ["t", "mean_cum_regret", "stderr"];

/// Seventeen significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| BenchError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> BenchError + '_ {
    move |e| BenchError::io(path, e)
}

pub fn write_summary(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_io(path);
    w.write_record(SUMMARY_HEADER).map_err(&err)?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            r.d.to_string(),
            r.k_arms.to_string(),
            r.horizon.to_string(),
            r.truncation.map(|s| s.to_string()).unwrap_or_default(),
            r.reps.to_string(),
            r.param_name.clone().unwrap_or_default(),
            r.param_value.map(|v| v.to_string()).unwrap_or_default(),
            fmt_f64(r.mean),
            fmt_f64(r.stderr),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub fn write_trace(row: &SweepRow, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_io(path);
    w.write_record(TRACE_HEADER).map_err(&err)?;
    for ((t, m), s) in row.checkpoints.iter().zip(&row.trace_mean).zip(&row.trace_stderr) {
        w.write_record([t.to_string(), fmt_f64(*m), fmt_f64(*s)])
            .map_err(&err)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// `trace_<policy>_<T>.csv`, with `_d<d>_K<K>` when several grid points share a
/// directory and `_<param><value>` for sweep rows.
pub fn trace_file_name(row: &SweepRow, with_grid: bool) -> String {
    let mut s = format!("trace_{}_{}", sanitize(&row.policy), row.horizon);
    if with_grid {
        s.push_str(&format!("_d{}_K{}", row.d, row.k_arms));
    }
    if let (Some(name), Some(value)) = (&row.param_name, row.param_value) {
        s.push_str(&format!("_{}{}", sanitize(name), sanitize(&value.to_string())));
    }
    s.push_str(".csv");
    s
}

/// Writes every trace file; returns their names in row order.
pub fn write_traces(rows: &[SweepRow], dir: &Path, with_grid: bool) -> Result<Vec<String>> {
    let mut seen = BTreeSet::new();
    let mut names = Vec::with_capacity(rows.len());
    for row in rows {
        let name = trace_file_name(row, with_grid);
        if !seen.insert(name.clone()) {
            return Err(BenchError::config(
                "policies",
                format!("policy names collide in trace file name `{name}`"),
            ));
        }
        names.push(name);
    }
    for (row, name) in rows.iter().zip(&names) {
        write_trace(row, &dir.join(name))?;
    }
    Ok(names)
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| BenchError::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

pub fn write_conditions(reports: &[ConditionReport], path: &Path) -> Result<()> {
    write_json(reports, path)
}

pub fn prepare_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(policy: &str) -> SweepRow {
        SweepRow {
            policy: policy.into(),
            d: 4,
            k_arms: 2,
            horizon: 1000,
            truncation: None,
            reps: 2,
            param_name: None,
            param_value: None,
            mean: 1.0 / 3.0,
            stderr: 0.1,
            per_rep: vec![0.3, 0.4],
            checkpoints: vec![1, 1000],
            trace_mean: vec![0.0, 1.0 / 3.0],
            trace_stderr: vec![0.0, 0.1],
        }
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [1.0 / 3.0, 16.1, 1e-300, 123456.78901234568, -0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn trace_names() {
        let mut r = row("Tr-LinUCB");
        assert_eq!(trace_file_name(&r, false), "trace_Tr-LinUCB_1000.csv");
        assert_eq!(trace_file_name(&r, true), "trace_Tr-LinUCB_1000_d4_K2.csv");
        r.param_name = Some("kappa".into());
        r.param_value = Some(1.1);
        assert_eq!(trace_file_name(&r, false), "trace_Tr-LinUCB_1000_kappa1.1.csv");
        assert_eq!(trace_file_name(&row("a b/c"), false), "trace_a_b_c_1000.csv");
    }

    #[test]
    fn colliding_trace_names_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let rows = [row("a b"), row("a_b")];
        assert!(matches!(
            write_traces(&rows, dir.path(), false),
            Err(BenchError::Config(_))
        ));
    }

    #[test]
    fn summary_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("summary.csv");
        let mut r = row("OLS");
        r.truncation = Some(1061);
        write_summary(&[r], &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(
            text,
            "policy,d,K,T,S,reps,param_name,param_value,mean_regret,stderr\n\
             OLS,4,2,1000,1061,2,,,3.3333333333333331e-1,1.0000000000000001e-1\n"
        );
    }
}
