//! PCC / r² metrics and figure-data exports.

mod export;

pub use export::{default_trace_indices, export_artifacts, export_sections, ExportOptions, SCATTER_SVG_MAX_POINTS};

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::data::{Section, TraceDataset};
use crate::error::{Error, Result};
use crate::train::{predict_section, Checkpoint};

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "metrics need equal lengths >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Pearson correlation coefficient, clamped to `[-1, 1]` against rounding.
pub fn pcc(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance("pcc"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Coefficient of determination `1 - SS_res / SS_tot` of `pred` against
/// `truth`.
pub fn r2(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(truth, pred)?;
    let m = mean(truth);
    let ss_tot: f64 = truth.iter().map(|t| (t - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ZeroVariance("r2"));
    }
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Training,
    Validation,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Training => "training",
            Split::Validation => "validation",
        }
    }
}

/// Per-trace metrics of one split and their plain means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub split: Split,
    pub trace_indices: Vec<usize>,
    pub pcc: Vec<f64>,
    pub r2: Vec<f64>,
    pub mean_pcc: f64,
    pub mean_r2: f64,
}

impl MetricsReport {
    pub fn compute(truth: &Section, pred: &Section, indices: &[usize], split: Split) -> Result<Self> {
        truth.check_same_extents(pred)?;
        if indices.is_empty() {
            return Err(Error::EmptySplit(split.as_str()));
        }
        let mut p = Vec::with_capacity(indices.len());
        let mut r = Vec::with_capacity(indices.len());
        for &i in indices {
            p.push(pcc(truth.trace(i), pred.trace(i))?);
            r.push(r2(truth.trace(i), pred.trace(i))?);
        }
        Ok(MetricsReport {
            split,
            trace_indices: indices.to_vec(),
            mean_pcc: mean(&p),
            mean_r2: mean(&r),
            pcc: p,
            r2: r,
        })
    }
}

/// Training-split and validation-split (every non-training trace) reports.
pub fn evaluate_sections(
    truth: &Section,
    pred: &Section,
    training: &[usize],
) -> Result<(MetricsReport, MetricsReport)> {
    let in_training = |i: &usize| training.binary_search(i).is_ok();
    let validation: Vec<usize> = (0..truth.n_traces()).filter(|i| !in_training(i)).collect();
    Ok((
        MetricsReport::compute(truth, pred, training, Split::Training)?,
        MetricsReport::compute(truth, pred, &validation, Split::Validation)?,
    ))
}

/// Predicts the dataset's whole section with `checkpoint` and scores it.
pub fn evaluate(dataset: &TraceDataset, checkpoint: &Checkpoint) -> Result<(MetricsReport, MetricsReport)> {
    let pred = predict_section(&dataset.seismic, checkpoint, 1)?;
    evaluate_sections(&dataset.impedance, &pred, dataset.training_indices())
}

/// Two-column summary in the style of a results table, values to two
/// decimals.
pub fn format_table(training: &MetricsReport, validation: &MetricsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| Metric | Training | Validation |");
    let _ = writeln!(s, "|--------|----------|------------|");
    let _ = writeln!(s, "| PCC    | {:>8.2} | {:>10.2} |", training.mean_pcc, validation.mean_pcc);
    let _ = writeln!(s, "| r²     | {:>8.2} | {:>10.2} |", training.mean_r2, validation.mean_r2);
    s
}

/// `metrics.csv`: header `split,trace_index,pcc,r2`, one row per trace.
pub fn metrics_csv(reports: &[&MetricsReport]) -> String {
    let mut s = String::from("split,trace_index,pcc,r2\n");
    for r in reports {
        for ((i, p), q) in r.trace_indices.iter().zip(&r.pcc).zip(&r.r2) {
            let _ = writeln!(s, "{},{i},{p},{q}", r.split.as_str());
        }
    }
    s
}

pub fn write_metrics_csv(path: impl AsRef<Path>, reports: &[&MetricsReport]) -> Result<()> {
    std::fs::write(path, metrics_csv(reports))?;
    Ok(())
}
