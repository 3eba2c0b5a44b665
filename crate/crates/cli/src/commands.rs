use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tcn_impedance::data::{
    read_section, select_training_traces, write_section, GeneratorConfig, ImpedanceSection, SeismicSection,
    Section, TraceDataset,
};
use tcn_impedance::eval::{evaluate_sections, export_sections, format_table, write_metrics_csv, ExportOptions};
use tcn_impedance::nn::{InitScheme, PaddingMode};
use tcn_impedance::tcn::TcnConfig;
use tcn_impedance::train::{load_checkpoint, predict_section, save_checkpoint, train_with_progress, write_history_csv, Checkpoint, TrainConfig};
use tcn_impedance::verify::gradient_suite;

use crate::settings::{required, resolve, write_manifest, CliError, CliResult};
use crate::{EvaluateFlags, ExportFlags, GenerateFlags, GradcheckFlags, Init, Padding, PredictFlags, TrainFlags};

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateSettings {
    pub out: Option<PathBuf>,
    pub traces: usize,
    pub samples: usize,
    pub min_layers: usize,
    pub max_layers: usize,
    pub ai_lo: f64,
    pub ai_hi: f64,
    pub horizon_relief: f64,
    pub horizon_smoothness: usize,
    pub ricker_freq: f64,
    pub sample_interval: f64,
    pub trace_spacing: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for GenerateSettings {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        GenerateSettings {
            out: None,
            traces: g.n_traces,
            samples: g.n_samples,
            min_layers: g.min_layers,
            max_layers: g.max_layers,
            ai_lo: g.ai_lo,
            ai_hi: g.ai_hi,
            horizon_relief: g.horizon_relief,
            horizon_smoothness: g.horizon_smoothness,
            ricker_freq: g.ricker_freq,
            sample_interval: g.sample_interval,
            trace_spacing: g.trace_spacing_m,
            noise: g.noise_std,
            seed: g.seed,
        }
    }
}

impl GenerateSettings {
    fn generator(&self) -> GeneratorConfig {
        GeneratorConfig {
            n_traces: self.traces,
            n_samples: self.samples,
            min_layers: self.min_layers,
            max_layers: self.max_layers,
            ai_lo: self.ai_lo,
            ai_hi: self.ai_hi,
            horizon_relief: self.horizon_relief,
            horizon_smoothness: self.horizon_smoothness,
            ricker_freq: self.ricker_freq,
            sample_interval: self.sample_interval,
            trace_spacing_m: self.trace_spacing,
            noise_std: self.noise,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub seismic: Option<PathBuf>,
    pub impedance: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub step: usize,
    pub epochs: usize,
    pub lr: f64,
    pub wd: f64,
    pub dropout: f64,
    pub kernel: usize,
    pub blocks: usize,
    pub width: usize,
    pub padding: Padding,
    pub init: Init,
    pub init_std: f64,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        let init_std = match t.model.init {
            InitScheme::Normal { std } => std,
            InitScheme::He => 0.1,
        };
        TrainSettings {
            seismic: None,
            impedance: None,
            out: None,
            step: 150,
            epochs: t.epochs,
            lr: t.lr,
            wd: t.weight_decay,
            dropout: t.model.dropout_p,
            kernel: t.model.kernel,
            blocks: t.model.n_blocks(),
            width: t.model.channels[0],
            padding: Padding::Symmetric,
            init: Init::Normal,
            init_std,
            seed: t.seed,
            log_every: 100,
        }
    }
}

impl TrainSettings {
    pub fn train_config(&self) -> TrainConfig {
        let mut model = TcnConfig::new(self.blocks, self.width, self.kernel, self.dropout);
        model.padding = match self.padding {
            Padding::Symmetric => PaddingMode::Symmetric,
            Padding::Causal => PaddingMode::Causal,
        };
        model.init = match self.init {
            Init::Normal => InitScheme::Normal { std: self.init_std },
            Init::He => InitScheme::He,
        };
        TrainConfig {
            lr: self.lr,
            weight_decay: self.wd,
            epochs: self.epochs,
            seed: self.seed,
            model,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictSettings {
    pub checkpoint: Option<PathBuf>,
    pub seismic: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: usize,
}

impl Default for PredictSettings {
    fn default() -> Self {
        PredictSettings {
            checkpoint: None,
            seismic: None,
            out: None,
            threads: 1,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateSettings {
    pub impedance: Option<PathBuf>,
    pub predicted: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub seismic: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub step: usize,
    pub threads: usize,
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        EvaluateSettings {
            impedance: None,
            predicted: None,
            checkpoint: None,
            seismic: None,
            out: None,
            step: 150,
            threads: 1,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExportSettings {
    pub impedance: Option<PathBuf>,
    pub predicted: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub seismic: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub positions: Vec<u32>,
    pub threads: usize,
}

impl Default for ExportSettings {
    fn default() -> Self {
        ExportSettings {
            impedance: None,
            predicted: None,
            checkpoint: None,
            seismic: None,
            out: None,
            positions: ExportOptions::default().positions_percent,
            threads: 1,
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GradcheckSettings {
    pub out: Option<PathBuf>,
    pub seed: u64,
}

fn read(path: &Path) -> CliResult<Section> {
    read_section(path).map_err(|e| CliError::from(e).context(path.display()))
}

fn read_impedance(path: &Path) -> CliResult<ImpedanceSection> {
    ImpedanceSection::new(read(path)?).map_err(|e| CliError::from(e).context(path.display()))
}

fn read_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    load_checkpoint(path).map_err(|e| CliError::from(e).context(path.display()))
}

fn out_dir(out: &Option<PathBuf>) -> CliResult<&Path> {
    let dir = required(out, "out")?;
    fs::create_dir_all(dir).map_err(|e| CliError::from(e).context(dir.display()))?;
    Ok(dir)
}

/// Both sections must be `traces x samples` alike; the error names both.
fn check_extents(a: (&str, &Path, &Section), b: (&str, &Path, &Section)) -> CliResult<()> {
    let (an, ap, a) = a;
    let (bn, bp, b) = b;
    if a.n_traces() == b.n_traces() && a.n_samples() == b.n_samples() {
        return Ok(());
    }
    Err(CliError::input(format!(
        "extent mismatch: {an} {} is {} traces x {} samples, {bn} {} is {} traces x {} samples",
        ap.display(),
        a.n_traces(),
        a.n_samples(),
        bp.display(),
        b.n_traces(),
        b.n_samples()
    )))
}

pub fn generate(flags: &GenerateFlags) -> CliResult<()> {
    let mut s: GenerateSettings = resolve("generate", flags.config.as_deref(), flags)?;
    if let Some(n) = flags.layers {
        s.min_layers = n;
        s.max_layers = n;
    }
    let dir = out_dir(&s.out)?;
    let cfg = s.generator();
    cfg.validate()?;
    let (ai, seis) = cfg.generate()?;
    let ai_path = dir.join("impedance.seis");
    let seis_path = dir.join("seismic.seis");
    write_section(&ai_path, &ai)?;
    write_section(&seis_path, &seis)?;
    write_manifest(dir, "generate", Some(s.seed), &s, &[], &[("impedance", &ai_path), ("seismic", &seis_path)])?;
    println!(
        "wrote {} and {} ({} traces x {} samples)",
        ai_path.display(),
        seis_path.display(),
        ai.n_traces(),
        ai.n_samples()
    );
    Ok(())
}

pub fn train(flags: &TrainFlags) -> CliResult<()> {
    let s: TrainSettings = resolve("train", flags.config.as_deref(), flags)?;
    let seis_path = required(&s.seismic, "seismic")?;
    let ai_path = required(&s.impedance, "impedance")?;
    let config = s.train_config();
    config.validate()?;
    let seis = read(seis_path)?;
    let ai = read_impedance(ai_path)?;
    check_extents(("seismic", seis_path, &seis), ("impedance", ai_path, &ai))?;
    let dir = out_dir(&s.out)?;
    let dataset = TraceDataset::with_step(SeismicSection::new(seis), ai, s.step)?;
    eprintln!(
        "training on {} of {} traces for {} epochs",
        dataset.training_indices().len(),
        dataset.seismic.n_traces(),
        config.epochs
    );
    let checkpoint = train_with_progress(&dataset, &config, |epoch, loss| {
        if s.log_every > 0 && (epoch + 1) % s.log_every == 0 {
            eprintln!("epoch {:>5} loss {loss:.6e}", epoch + 1);
        }
    })?;
    let ck_path = dir.join("model.ckpt");
    let hist_path = dir.join("history.csv");
    save_checkpoint(&ck_path, &checkpoint)?;
    write_history_csv(&hist_path, &checkpoint.history)?;
    write_manifest(
        dir,
        "train",
        Some(s.seed),
        &s,
        &[("seismic", seis_path), ("impedance", ai_path)],
        &[("checkpoint", &ck_path), ("history", &hist_path)],
    )?;
    println!(
        "final loss {:.6e}; wrote {}",
        checkpoint.history.last().copied().unwrap_or(f64::NAN),
        ck_path.display()
    );
    Ok(())
}

pub fn predict(flags: &PredictFlags) -> CliResult<()> {
    let s: PredictSettings = resolve("predict", flags.config.as_deref(), flags)?;
    let ck_path = required(&s.checkpoint, "checkpoint")?;
    let seis_path = required(&s.seismic, "seismic")?;
    let checkpoint = read_checkpoint(ck_path)?;
    let seis = read(seis_path)?;
    let dir = out_dir(&s.out)?;
    let pred = predict_section(&seis, &checkpoint, s.threads)?;
    let pred_path = dir.join("predicted.seis");
    write_section(&pred_path, &pred)?;
    write_manifest(
        dir,
        "predict",
        None,
        &s,
        &[("checkpoint", ck_path), ("seismic", seis_path)],
        &[("predicted", &pred_path)],
    )?;
    println!("wrote {}", pred_path.display());
    Ok(())
}

/// The predicted section from `--predicted`, or by running the checkpoint
/// on `--seismic`, plus the input files used.
fn predicted_section<'a>(
    predicted: &'a Option<PathBuf>,
    checkpoint: &'a Option<PathBuf>,
    seismic: &'a Option<PathBuf>,
    threads: usize,
) -> CliResult<(Section, Vec<(&'static str, &'a Path)>)> {
    if let Some(p) = predicted.as_deref() {
        return Ok((read(p)?, vec![("predicted", p)]));
    }
    let (Some(ck_path), Some(seis_path)) = (checkpoint.as_deref(), seismic.as_deref()) else {
        return Err(CliError::input("need --predicted, or both --checkpoint and --seismic"));
    };
    let checkpoint = read_checkpoint(ck_path)?;
    let pred = predict_section(&read(seis_path)?, &checkpoint, threads)?;
    Ok((pred, vec![("checkpoint", ck_path), ("seismic", seis_path)]))
}

pub fn evaluate(flags: &EvaluateFlags) -> CliResult<()> {
    let s: EvaluateSettings = resolve("evaluate", flags.config.as_deref(), flags)?;
    let ai_path = required(&s.impedance, "impedance")?;
    let truth = read_impedance(ai_path)?;
    let (pred, mut inputs) = predicted_section(&s.predicted, &s.checkpoint, &s.seismic, s.threads)?;
    check_extents(("impedance", ai_path, &truth), (inputs[0].0, inputs[0].1, &pred))?;
    let training = select_training_traces(truth.n_traces(), s.step)?;
    let (tr, va) = evaluate_sections(&truth, &pred, &training)?;
    let dir = out_dir(&s.out)?;
    let metrics_path = dir.join("metrics.csv");
    write_metrics_csv(&metrics_path, &[&tr, &va])?;
    inputs.insert(0, ("impedance", ai_path));
    write_manifest(dir, "evaluate", None, &s, &inputs, &[("metrics", &metrics_path)])?;
    print!("{}", format_table(&tr, &va));
    Ok(())
}

pub fn export(flags: &ExportFlags) -> CliResult<()> {
    let s: ExportSettings = resolve("export", flags.config.as_deref(), flags)?;
    let ai_path = required(&s.impedance, "impedance")?;
    let truth = read_impedance(ai_path)?;
    let (pred, mut inputs) = predicted_section(&s.predicted, &s.checkpoint, &s.seismic, s.threads)?;
    check_extents(("impedance", ai_path, &truth), (inputs[0].0, inputs[0].1, &pred))?;
    let dir = out_dir(&s.out)?;
    let options = ExportOptions {
        positions_percent: s.positions.clone(),
    };
    let written = export_sections(&truth, &pred, dir, &options)?;
    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let outputs: Vec<(&str, &Path)> = names.iter().map(String::as_str).zip(written.iter().map(PathBuf::as_path)).collect();
    inputs.insert(0, ("impedance", ai_path));
    write_manifest(dir, "export", None, &s, &inputs, &outputs)?;
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn gradcheck(flags: &GradcheckFlags) -> CliResult<()> {
    let s: GradcheckSettings = resolve("gradcheck", flags.config.as_deref(), flags)?;
    let checks = gradient_suite(s.seed)?;
    let mut csv = String::from("check,max_rel_error,tolerance,passed\n");
    println!("{:<40} {:>13} {:>10}", "check", "max rel err", "tolerance");
    for c in &checks {
        let status = if c.passed() { "ok" } else { "FAIL" };
        println!("{:<40} {:>13.3e} {:>10.0e} {status}", c.name, c.max_rel_error, c.tolerance);
        csv.push_str(&format!("{},{},{},{}\n", c.name, c.max_rel_error, c.tolerance, c.passed()));
    }
    if let Some(dir) = s.out.as_deref() {
        fs::create_dir_all(dir)?;
        let path = dir.join("gradcheck.csv");
        fs::write(&path, &csv)?;
        write_manifest(dir, "gradcheck", Some(s.seed), &s, &[], &[("gradcheck", &path)])?;
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        return Err(CliError::numeric(format!("{failed} of {} gradient checks failed", checks.len())));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn train_defaults_match_reference_hyperparameters() {
        let s = TrainSettings::default();
        assert_eq!((s.lr, s.wd, s.epochs, s.dropout, s.kernel, s.blocks), (0.001, 0.0001, 2941, 0.2, 5, 6));
        assert_eq!(s.step, 150);
        assert_eq!(s.train_config(), TrainConfig::default());
    }

    #[test]
    fn generate_defaults_match_generator() {
        assert_eq!(GenerateSettings::default().generator(), GeneratorConfig::default());
    }
}
