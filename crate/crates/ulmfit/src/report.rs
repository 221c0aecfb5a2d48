//! CSV and JSON writers for logs, metrics, curves and ablation tables.
//!
//! Floats are written in Rust's shortest round-trip form so identical runs
//! produce identical bytes. Wall-clock values go to separate timing files,
//! or the `seconds` column of the ablation table, and nowhere else.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use ulmfit_core::corpus::Label;
use ulmfit_core::eval::{ConfusionMatrix, Metrics, MetricsReport, PrCurve};
use ulmfit_core::lm::TrainingLog;

use crate::error::{Error, Result};
use crate::pipeline::AblationTable;

pub const ABLATION_HEADER: [&str; 8] = [
    "fraction",
    "seed",
    "class",
    "precision",
    "recall",
    "f1",
    "accuracy",
    "seconds",
];

fn write_err(e: csv::Error) -> Error {
    Error::Format(format!("csv write failed: {e}"))
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::Format(format!("csv flush failed: {}", e.error())))?;
    Ok(())
}

/// `epoch,train_loss,heldout_perplexity,frozen_groups`
pub fn write_epoch_log<W: Write>(writer: W, log: &TrainingLog) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "train_loss", "heldout_perplexity", "frozen_groups"])
        .map_err(write_err)?;
    for e in &log.epochs {
        let ppl = e
            .heldout_perplexity
            .map(|p| p.to_string())
            .unwrap_or_default();
        w.write_record([
            e.epoch.to_string(),
            e.train_loss.to_string(),
            ppl,
            e.frozen_groups.to_string(),
        ])
        .map_err(write_err)?;
    }
    finish(w)
}

/// `step,group,lr,loss`
pub fn write_step_log<W: Write>(writer: W, log: &TrainingLog) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["step", "group", "lr", "loss"])
        .map_err(write_err)?;
    for s in &log.steps {
        w.write_record([
            s.step.to_string(),
            s.group.to_string(),
            s.lr.to_string(),
            s.loss.to_string(),
        ])
        .map_err(write_err)?;
    }
    finish(w)
}

/// `recall,precision`
pub fn write_pr_curve<W: Write>(writer: W, curve: &PrCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["recall", "precision"]).map_err(write_err)?;
    for (r, p) in &curve.points {
        w.write_record([r.to_string(), p.to_string()])
            .map_err(write_err)?;
    }
    finish(w)
}

/// `class,precision,recall,f1,support,degenerate` plus accuracy and
/// macro-F1 rows.
pub fn write_metrics<W: Write>(writer: W, metrics: &Metrics) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "class",
        "precision",
        "recall",
        "f1",
        "support",
        "degenerate",
    ])
    .map_err(write_err)?;
    for c in &metrics.classes {
        w.write_record([
            c.label.as_str().to_string(),
            c.precision.to_string(),
            c.recall.to_string(),
            c.f1.to_string(),
            c.support.to_string(),
            c.degenerate.to_string(),
        ])
        .map_err(write_err)?;
    }
    finish(w)
}

/// Metrics report without its wall-clock field.
#[derive(Serialize)]
pub struct ReportJson<'a> {
    pub confusion: &'a ConfusionMatrix,
    pub metrics: &'a Metrics,
    pub train_loss: Option<f64>,
    pub test_loss: f64,
    pub average_precision: f64,
}

impl<'a> ReportJson<'a> {
    pub fn new(report: &'a MetricsReport, curve: &PrCurve) -> Self {
        ReportJson {
            confusion: &report.confusion,
            metrics: &report.metrics,
            train_loss: report.train_loss,
            test_loss: report.test_loss,
            average_precision: curve.average_precision,
        }
    }
}

/// One line per class per `(fraction, seed)` row.
pub fn write_ablation<W: Write>(writer: W, table: &AblationTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ABLATION_HEADER).map_err(write_err)?;
    for row in &table.rows {
        for label in Label::ALL {
            let c = row.metrics.class(label);
            w.write_record([
                row.fraction.to_string(),
                row.seed.to_string(),
                label.as_str().to_string(),
                c.precision.to_string(),
                c.recall.to_string(),
                c.f1.to_string(),
                row.metrics.accuracy.to_string(),
                format!("{:.3}", row.seconds),
            ])
            .map_err(write_err)?;
        }
    }
    finish(w)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports are always serializable");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Creates `path` with a writer callback, mapping IO errors to the path.
pub fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_file(path, buf)
}
