use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column headers of the flat summary, in report order.
pub const SUMMARY_HEADER: [&str; 11] =
    ["Mode", "Precision", "Recall", "F1", "Accuracy", "Threshold", "AUC", "ARI-CC", "ARI-Agg", "P@K", "R@K"];

/// Metrics for one mode, either from a single run or averaged over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub mode: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub threshold: f64,
    pub auc: f64,
    pub ari_cc: f64,
    pub ari_agg: f64,
    pub p_at_k: f64,
    pub r_at_k: f64,
    pub runs_aggregated: usize,
}

impl EvalReport {
    fn values(&self) -> [f64; 10] {
        [
            self.precision,
            self.recall,
            self.f1,
            self.accuracy,
            self.threshold,
            self.auc,
            self.ari_cc,
            self.ari_agg,
            self.p_at_k,
            self.r_at_k,
        ]
    }

    fn from_values(mode: String, v: [f64; 10], runs_aggregated: usize) -> Self {
        Self {
            mode,
            precision: v[0],
            recall: v[1],
            f1: v[2],
            accuracy: v[3],
            threshold: v[4],
            auc: v[5],
            ari_cc: v[6],
            ari_agg: v[7],
            p_at_k: v[8],
            r_at_k: v[9],
            runs_aggregated,
        }
    }

    pub fn summary_row(&self) -> Vec<String> {
        std::iter::once(self.mode.clone()).chain(self.values().iter().map(|v| format!("{v:.4}"))).collect()
    }
}

fn mean_report(mode: String, reports: &[EvalReport]) -> EvalReport {
    let mut acc = [0.0; 10];
    for r in reports {
        for (a, v) in acc.iter_mut().zip(r.values()) {
            *a += v;
        }
    }
    let n = reports.len() as f64;
    EvalReport::from_values(mode, acc.map(|a| a / n), reports.iter().map(|r| r.runs_aggregated).sum())
}

/// Field-wise arithmetic mean of per-run reports for a single mode.
pub fn aggregate_runs(reports: &[EvalReport]) -> Result<EvalReport> {
    let first = reports.first().ok_or_else(|| Error::Aggregation("no runs to aggregate".into()))?;
    if let Some(other) = reports.iter().find(|r| r.mode != first.mode) {
        return Err(Error::Aggregation(format!("cannot aggregate mode `{}` with `{}`", first.mode, other.mode)));
    }
    Ok(mean_report(first.mode.clone(), reports))
}

/// Aggregates reports given as JSON objects; every field is required.
pub fn aggregate_json(values: &[serde_json::Value]) -> Result<EvalReport> {
    let reports = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::from_value::<EvalReport>(v.clone()).map_err(|e| Error::Aggregation(format!("run {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate_runs(&reports)
}

/// Field-wise mean across modes, e.g. within and across into "combined".
pub fn combine_modes(label: &str, reports: &[EvalReport]) -> Result<EvalReport> {
    if reports.is_empty() {
        return Err(Error::Aggregation("no mode reports to combine".into()));
    }
    Ok(mean_report(label.to_string(), reports))
}

pub fn write_summary_csv<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in reports {
        w.write_record(r.summary_row())?;
    }
    w.flush().map_err(|e| Error::io("summary", e))?;
    Ok(())
}
