//! CSV outputs: the per-instance metrics table and the training curve.

use std::io::Write;
use std::path::Path;

use roal_core::metrics::RunMetrics;

use crate::{Error, Result};

/// Rolling means over the logging window, one row per log point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub batch: u64,
    pub loss: f64,
    pub accuracy_pct: f64,
    pub request_pct: f64,
    pub reward: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_default()
}

pub fn write_metrics<W: Write>(metrics: &RunMetrics, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["instance_index", "accuracy_pct", "request_pct", "n_predictions", "n_requests"])?;
    for row in metrics.rows() {
        w.write_record([
            row.instance_index.to_string(),
            fmt_opt(row.accuracy_pct),
            fmt_opt(row.request_pct),
            row.n_predictions.to_string(),
            row.n_requests.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn write_curve<W: Write>(points: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["batch", "loss", "accuracy_pct", "request_pct", "mean_reward"])?;
    for p in points {
        w.write_record([
            p.batch.to_string(),
            format!("{:.6}", p.loss),
            format!("{:.4}", p.accuracy_pct),
            format!("{:.4}", p.request_pct),
            format!("{:.4}", p.reward),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn write_metrics_file(metrics: &RunMetrics, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_metrics(metrics, file)
}

pub fn write_curve_file(points: &[CurvePoint], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_curve(points, file)
}
