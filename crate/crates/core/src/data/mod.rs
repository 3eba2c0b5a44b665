//! Seismic and impedance sections, the synthetic generator that stands in
//! for field data, trace selection and normalization.

mod seis;
mod synth;

pub use seis::{read_section, section_from_bytes, section_to_bytes, write_section, write_section_csv, SEIS_MAGIC};
pub use synth::{
    ai_to_reflectivity, convolve_same, generate_layered_model, ricker_wavelet, synthesize_seismic, GeneratorConfig,
};

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A `[n_traces, n_samples]` grid with its acquisition geometry.
///
/// Geometry is kept in `f32` because that is how `SEIS1` stores it.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    values: Tensor,
    pub trace_spacing_m: f32,
    pub sample_interval: f32,
}

impl Section {
    pub fn new(values: Tensor, trace_spacing_m: f32, sample_interval: f32) -> Result<Self> {
        if values.rank() != 2 {
            return Err(Error::InvalidArgument(format!(
                "section must be [n_traces, n_samples], got {:?}",
                values.shape()
            )));
        }
        Ok(Section {
            values,
            trace_spacing_m,
            sample_interval,
        })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn n_traces(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn n_samples(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn trace(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    /// Trace `i` as a `[1, n_samples]` tensor.
    pub fn trace_tensor(&self, i: usize) -> Tensor {
        self.values.slice_rows(i, i + 1).expect("trace index in range")
    }

    /// Copy with only the given traces, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Section> {
        let rows: Vec<&[f64]> = indices
            .iter()
            .map(|&i| {
                if i < self.n_traces() {
                    Ok(self.trace(i))
                } else {
                    Err(Error::InvalidArgument(format!("trace {i} out of range")))
                }
            })
            .collect::<Result<_>>()?;
        Section::new(Tensor::from_rows(&rows)?, self.trace_spacing_m, self.sample_interval)
    }

    /// Values rounded to `f32`, i.e. exactly what a `SEIS1` file holds.
    pub fn quantized(&self) -> Section {
        let mut s = self.clone();
        s.values.data_mut().iter_mut().for_each(|x| *x = *x as f32 as f64);
        s
    }

    pub fn check_same_extents(&self, other: &Section) -> Result<()> {
        if self.values.shape() == other.values.shape() {
            Ok(())
        } else {
            Err(Error::ExtentMismatch {
                a_traces: self.n_traces(),
                a_samples: self.n_samples(),
                b_traces: other.n_traces(),
                b_samples: other.n_samples(),
            })
        }
    }
}

/// Acoustic impedance section; every value is strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceSection(Section);

/// Post-stack seismic amplitude section.
#[derive(Debug, Clone, PartialEq)]
pub struct SeismicSection(Section);

impl ImpedanceSection {
    pub fn new(section: Section) -> Result<Self> {
        if let Some((index, &value)) = section.values.data().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            return Err(Error::NonPositiveImpedance { index, value });
        }
        Ok(ImpedanceSection(section))
    }

    pub fn into_inner(self) -> Section {
        self.0
    }
}

impl SeismicSection {
    pub fn new(section: Section) -> Self {
        SeismicSection(section)
    }

    pub fn into_inner(self) -> Section {
        self.0
    }
}

impl Deref for ImpedanceSection {
    type Target = Section;
    fn deref(&self) -> &Section {
        &self.0
    }
}

impl Deref for SeismicSection {
    type Target = Section;
    fn deref(&self) -> &Section {
        &self.0
    }
}

/// `0, step, 2 step, ...` below `n_traces`.
pub fn select_training_traces(n_traces: usize, step: usize) -> Result<Vec<usize>> {
    if step < 1 {
        return Err(Error::InvalidArgument("training trace step must be >= 1".into()));
    }
    Ok((0..n_traces).step_by(step).collect())
}

/// Affine standardization `(x - mean) / std`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: f64,
    pub std: f64,
}

impl Normalizer {
    /// Population mean and standard deviation of `values`.
    pub fn fit<'a>(values: impl IntoIterator<Item = &'a [f64]>, what: &'static str) -> Result<Self> {
        let rows: Vec<&[f64]> = values.into_iter().collect();
        let n: usize = rows.iter().map(|r| r.len()).sum();
        if n == 0 {
            return Err(Error::ZeroStd(what));
        }
        let mean = rows.iter().flat_map(|r| r.iter()).sum::<f64>() / n as f64;
        let var = rows.iter().flat_map(|r| r.iter()).map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if !(std > 0.0) {
            return Err(Error::ZeroStd(what));
        }
        Ok(Normalizer { mean, std })
    }

    pub fn normalize(&self, t: &Tensor) -> Tensor {
        let mut out = t.clone();
        out.data_mut().iter_mut().for_each(|x| *x = (*x - self.mean) / self.std);
        out
    }

    pub fn denormalize(&self, t: &Tensor) -> Tensor {
        let mut out = t.clone();
        out.data_mut().iter_mut().for_each(|x| *x = *x * self.std + self.mean);
        out
    }
}

/// Normalization statistics of both sections, fitted on training traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub seismic: Normalizer,
    pub impedance: Normalizer,
}

impl NormStats {
    pub fn fit(seismic: &Section, impedance: &Section, indices: &[usize]) -> Result<Self> {
        Ok(NormStats {
            seismic: Normalizer::fit(indices.iter().map(|&i| seismic.trace(i)), "seismic training traces")?,
            impedance: Normalizer::fit(indices.iter().map(|&i| impedance.trace(i)), "impedance training traces")?,
        })
    }
}

pub fn normalize(section: &Section, stats: &Normalizer) -> Result<Section> {
    Section::new(stats.normalize(section.values()), section.trace_spacing_m, section.sample_interval)
}

pub fn denormalize(section: &Section, stats: &Normalizer) -> Result<Section> {
    Section::new(stats.denormalize(section.values()), section.trace_spacing_m, section.sample_interval)
}

/// Paired sections, the training subset and statistics fitted on it.
#[derive(Debug, Clone)]
pub struct TraceDataset {
    pub seismic: SeismicSection,
    pub impedance: ImpedanceSection,
    training: Vec<usize>,
    stats: NormStats,
}

impl TraceDataset {
    pub fn new(seismic: SeismicSection, impedance: ImpedanceSection, training: Vec<usize>) -> Result<Self> {
        seismic.check_same_extents(&impedance)?;
        if training.is_empty() {
            return Err(Error::EmptySplit("training"));
        }
        if training.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("training indices must be strictly increasing".into()));
        }
        if *training.last().expect("nonempty") >= seismic.n_traces() {
            return Err(Error::InvalidArgument(format!(
                "training index {} beyond {} traces",
                training.last().unwrap(),
                seismic.n_traces()
            )));
        }
        let stats = NormStats::fit(&seismic, &impedance, &training)?;
        Ok(TraceDataset {
            seismic,
            impedance,
            training,
            stats,
        })
    }

    /// Training traces every `step` traces starting at 0.
    pub fn with_step(seismic: SeismicSection, impedance: ImpedanceSection, step: usize) -> Result<Self> {
        let idx = select_training_traces(seismic.n_traces(), step)?;
        Self::new(seismic, impedance, idx)
    }

    pub fn training_indices(&self) -> &[usize] {
        &self.training
    }

    /// Every trace not used for training.
    pub fn validation_indices(&self) -> Vec<usize> {
        let mut train = self.training.iter().peekable();
        (0..self.seismic.n_traces())
            .filter(|i| {
                if train.peek() == Some(&i) {
                    train.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }

    pub fn stats(&self) -> &NormStats {
        &self.stats
    }

    /// Normalized `([1, L] seismic, [1, L] impedance)` pairs of the training
    /// traces, in index order.
    pub fn training_pairs(&self) -> Vec<(Tensor, Tensor)> {
        self.training
            .iter()
            .map(|&i| {
                (
                    self.stats.seismic.normalize(&self.seismic.trace_tensor(i)),
                    self.stats.impedance.normalize(&self.impedance.trace_tensor(i)),
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn section(rows: &[Vec<f64>]) -> Section {
        Section::new(Tensor::from_rows(rows).unwrap(), 6.25, 0.002).unwrap()
    }

    #[test]
    fn training_trace_selection() {
        let idx = select_training_traces(2721, 150).unwrap();
        assert_eq!(idx.len(), 19);
        assert_eq!(idx[0], 0);
        assert_eq!(*idx.last().unwrap(), 2700);
        assert_eq!(select_training_traces(10, 1).unwrap(), (0..10).collect::<Vec<_>>());
        assert_eq!(select_training_traces(100, 30).unwrap(), vec![0, 30, 60, 90]);
        assert!(select_training_traces(10, 0).is_err());
    }

    #[test]
    fn normalize_round_trip_and_moments() {
        let mut rng = Rng::new(3);
        let s = Section::new(Tensor::randn(&[6, 50], &mut rng, 4000.0, 900.0).unwrap(), 1.0, 1.0).unwrap();
        let stats = Normalizer::fit((0..6).map(|i| s.trace(i)), "test").unwrap();
        let n = normalize(&s, &stats).unwrap();
        let back = denormalize(&n, &stats).unwrap();
        for (a, b) in s.values().data().iter().zip(back.values().data()) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
        let mean = n.values().reduce_mean();
        let std = (n.values().sum_squares() / n.values().len() as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 1e-9 && (std - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_section_has_zero_std() {
        let s = section(&[vec![5.0; 8], vec![5.0; 8]]);
        assert!(matches!(
            Normalizer::fit((0..2).map(|i| s.trace(i)), "c"),
            Err(Error::ZeroStd(_))
        ));
    }

    #[test]
    fn impedance_must_be_positive() {
        assert!(ImpedanceSection::new(section(&[vec![1.0, 2.0], vec![3.0, 0.0]])).is_err());
        assert!(ImpedanceSection::new(section(&[vec![1.0, 2.0]])).is_ok());
    }

    #[test]
    fn dataset_splits_and_stats_provenance() {
        let mut rng = Rng::new(9);
        let ai = section(
            &(0..10)
                .map(|i| (0..20).map(|_| rng.uniform(1000.0, 2000.0) + 100.0 * i as f64).collect())
                .collect::<Vec<_>>(),
        );
        let seis = section(&(0..10).map(|_| (0..20).map(|_| rng.gaussian()).collect()).collect::<Vec<_>>());
        let ds = TraceDataset::with_step(SeismicSection::new(seis.clone()), ImpedanceSection::new(ai.clone()).unwrap(), 3)
            .unwrap();
        assert_eq!(ds.training_indices(), &[0, 3, 6, 9]);
        assert_eq!(ds.validation_indices(), vec![1, 2, 4, 5, 7, 8]);
        assert_eq!(*ds.stats(), NormStats::fit(&seis, &ai, &[0, 3, 6, 9]).unwrap());
        let from_validation = NormStats::fit(&seis, &ai, &ds.validation_indices()).unwrap();
        assert_ne!(from_validation, *ds.stats());

        let pairs = ds.training_pairs();
        assert_eq!(pairs.len(), 4);
        let all: Vec<f64> = pairs.iter().flat_map(|(_, y)| y.data().to_vec()).collect();
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        assert!(mean.abs() < 1e-9);
    }

    #[test]
    fn dataset_rejects_bad_inputs() {
        let a = section(&[vec![1.0, 2.0], vec![2.0, 3.0]]);
        let b = section(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]]);
        let err = TraceDataset::new(SeismicSection::new(b), ImpedanceSection::new(a.clone()).unwrap(), vec![0]);
        assert!(matches!(err, Err(Error::ExtentMismatch { .. })));
        let s = SeismicSection::new(section(&[vec![0.0, 1.0], vec![1.0, 0.0]]));
        let i = ImpedanceSection::new(a).unwrap();
        assert!(TraceDataset::new(s.clone(), i.clone(), vec![]).is_err());
        assert!(TraceDataset::new(s.clone(), i.clone(), vec![1, 0]).is_err());
        assert!(TraceDataset::new(s, i, vec![5]).is_err());
    }
}
