use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::db;
use crate::sim::{LearningCurve, StrategyKind};

pub const CSV_HEADER: &str = "iter,msd_db_dist_async,msd_db_dist_sync,msd_db_cent_async,msd_db_cent_sync";

/// One row per iteration; disabled strategies leave empty fields.
pub fn curves_csv(curves: &BTreeMap<StrategyKind, LearningCurve>) -> String {
    let n = curves.values().map(LearningCurve::n_iters).max().unwrap_or(0);
    let columns: Vec<Option<Vec<f64>>> = StrategyKind::ALL
        .iter()
        .map(|k| curves.get(k).map(LearningCurve::msd_db))
        .collect();
    let mut out = String::with_capacity(64 * (n + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for i in 0..n {
        write!(out, "{}", i + 1).unwrap();
        for col in &columns {
            out.push(',');
            if let Some(v) = col.as_ref().and_then(|c| c.get(i)) {
                write!(out, "{v}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn emit_csv(curves: &BTreeMap<StrategyKind, LearningCurve>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, curves_csv(curves)).map_err(|e| Error::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn emit_report<T: Serialize>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(report)).map_err(|e| Error::io(path, e))
}

/// Raw per-trial tail means, one row per trial.
pub fn tail_means_csv(curves: &BTreeMap<StrategyKind, LearningCurve>, tail_fraction: f64) -> String {
    let mut out = String::from("trial");
    for k in curves.keys() {
        write!(out, ",tail_msd_db_{k}").unwrap();
    }
    out.push('\n');
    let trials = curves.values().map(|c| c.runs().len()).max().unwrap_or(0);
    for t in 0..trials {
        write!(out, "{t}").unwrap();
        for c in curves.values() {
            let run = &c.runs()[t];
            let w = crate::sim::tail_window(run.len(), tail_fraction).max(1);
            let mean = run[run.len() - w..].iter().sum::<f64>() / w as f64;
            write!(out, ",{}", db(mean)).unwrap();
        }
        out.push('\n');
    }
    out
}
