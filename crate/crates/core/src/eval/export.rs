//! Figure data: difference section, selected traces and a scatter plot.
//!
//! Files written to the output directory:
//!
//! * `difference.seis`, `difference.csv`: `|pred - true|` as a `SEIS1`
//!   section and as CSV (one row per trace)
//! * `traces_<idx>.csv`: `sample,true_ai,pred_ai` for each selected trace
//! * `scatter.csv`: `true,pred` for every sample of the section
//! * `scatter.svg`: the same pairs as a plot, thinned to at most
//!   [`SCATTER_SVG_MAX_POINTS`] points

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::data::{write_section, write_section_csv, Section, TraceDataset};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::train::{predict_section, Checkpoint};

pub const SCATTER_SVG_MAX_POINTS: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExportOptions {
    /// Trace positions as whole percentages of the section width.
    pub positions_percent: Vec<u32>,
}

impl Default for ExportOptions {
    fn default() -> Self {
        ExportOptions {
            positions_percent: vec![20, 40, 60, 80],
        }
    }
}

/// `floor(n_traces * p / 100)` for each percentage, clamped to the last trace.
pub fn default_trace_indices(n_traces: usize, positions_percent: &[u32]) -> Vec<usize> {
    positions_percent
        .iter()
        .map(|&p| (n_traces * p as usize / 100).min(n_traces - 1))
        .collect()
}

pub fn export_artifacts(
    dataset: &TraceDataset,
    checkpoint: &Checkpoint,
    out_dir: impl AsRef<Path>,
    options: &ExportOptions,
) -> Result<Vec<PathBuf>> {
    let pred = predict_section(&dataset.seismic, checkpoint, 1)?;
    export_sections(&dataset.impedance, &pred, out_dir, options)
}

/// Writes every artifact and returns the paths, in the order listed in the
/// module docs.
pub fn export_sections(
    truth: &Section,
    pred: &Section,
    out_dir: impl AsRef<Path>,
    options: &ExportOptions,
) -> Result<Vec<PathBuf>> {
    truth.check_same_extents(pred)?;
    if options.positions_percent.iter().any(|&p| p > 100) {
        return Err(Error::InvalidArgument("trace positions are percentages in 0..=100".into()));
    }
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let diff: Vec<f64> = truth
        .values()
        .data()
        .iter()
        .zip(pred.values().data())
        .map(|(t, p)| (p - t).abs())
        .collect();
    let diff = Section::new(
        Tensor::new(truth.values().shape(), diff)?,
        truth.trace_spacing_m,
        truth.sample_interval,
    )?;
    let p = dir.join("difference.seis");
    write_section(&p, &diff)?;
    written.push(p);
    let p = dir.join("difference.csv");
    write_section_csv(&p, &diff)?;
    written.push(p);

    for idx in default_trace_indices(truth.n_traces(), &options.positions_percent) {
        let p = dir.join(format!("traces_{idx}.csv"));
        let mut s = String::from("sample,true_ai,pred_ai\n");
        for (k, (t, q)) in truth.trace(idx).iter().zip(pred.trace(idx)).enumerate() {
            let _ = writeln!(s, "{k},{t},{q}");
        }
        fs::write(&p, s)?;
        written.push(p);
    }

    let p = dir.join("scatter.csv");
    let mut w = BufWriter::new(fs::File::create(&p)?);
    w.write_all(b"true,pred\n")?;
    for (t, q) in truth.values().data().iter().zip(pred.values().data()) {
        writeln!(w, "{t},{q}")?;
    }
    w.flush()?;
    written.push(p);

    let p = dir.join("scatter.svg");
    fs::write(&p, scatter_svg(truth.values().data(), pred.values().data()))?;
    written.push(p);
    Ok(written)
}

fn scatter_svg(truth: &[f64], pred: &[f64]) -> String {
    const SIZE: f64 = 480.0;
    const MARGIN: f64 = 50.0;
    let lo = truth.iter().chain(pred).copied().fold(f64::INFINITY, f64::min);
    let hi = truth.iter().chain(pred).copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let sx = |v: f64| MARGIN + (v - lo) / span * SIZE;
    let sy = |v: f64| MARGIN + SIZE - (v - lo) / span * SIZE;
    let total = MARGIN * 2.0 + SIZE;
    let stride = truth.len().div_ceil(SCATTER_SVG_MAX_POINTS).max(1);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0, x1, y1) = (MARGIN, MARGIN + SIZE, MARGIN + SIZE, MARGIN);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="gray" stroke-dasharray="4 4"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">True AI</text>"#,
        MARGIN + SIZE / 2.0,
        total - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="14" transform="rotate(-90 16 {})">Estimated AI</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0
    );
    let _ = writeln!(s, r#"<text x="{x0}" y="{}" font-size="11">{lo:.0}</text>"#, y0 + 16.0);
    let _ = writeln!(s, r#"<text x="{x1}" y="{}" font-size="11" text-anchor="end">{hi:.0}</text>"#, y0 + 16.0);
    let _ = writeln!(s, r#"<g fill="steelblue" fill-opacity="0.4">"#);
    for (t, p) in truth.iter().zip(pred).step_by(stride) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5"/>"#, sx(*t), sy(*p));
    }
    s.push_str("</g>\n</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn default_positions() {
        assert_eq!(default_trace_indices(2721, &[20, 40, 60, 80]), vec![544, 1088, 1632, 2176]);
        assert_eq!(default_trace_indices(10, &[0, 100]), vec![0, 9]);
    }

    #[test]
    fn identical_sections_export_zero_difference() {
        let dir = tempfile::tempdir().unwrap();
        let t = Section::new(Tensor::randn(&[20, 16], &mut Rng::new(1), 5000.0, 300.0).unwrap(), 6.25, 0.002)
            .unwrap()
            .quantized();
        let files = export_sections(&t, &t, dir.path(), &ExportOptions::default()).unwrap();
        assert_eq!(files.len(), 2 + 4 + 2);
        let diff = crate::data::read_section(dir.path().join("difference.seis")).unwrap();
        assert!(diff.values().data().iter().all(|&v| v == 0.0));
        let scatter = fs::read_to_string(dir.path().join("scatter.csv")).unwrap();
        assert_eq!(scatter.lines().count(), 1 + 20 * 16);
        let tr = fs::read_to_string(dir.path().join("traces_4.csv")).unwrap();
        assert_eq!(tr.lines().next(), Some("sample,true_ai,pred_ai"));
        assert_eq!(tr.lines().count(), 1 + 16);
        let svg = fs::read_to_string(dir.path().join("scatter.svg")).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 320);
    }

    #[test]
    fn svg_is_thinned() {
        let n = 3 * SCATTER_SVG_MAX_POINTS + 7;
        let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let svg = scatter_svg(&xs, &xs);
        assert!(svg.matches("<circle").count() <= SCATTER_SVG_MAX_POINTS);
    }
}
