//! Synthetic layered earth and convolutional forward modeling.
//!
//! The impedance model is a stack of layers whose values are constant
//! across the section. Layer boundaries (horizons) start at stratified
//! depths and wander laterally along a smoothed Gaussian random walk, so
//! neighbouring traces look alike while distant ones differ in layer
//! thicknesses and may show pinch-outs where horizons cross. At trace `j`,
//! sample `s` belongs to layer `#{horizons k : depth_k(j) <= s}`.
//!
//! Seismic is the reflectivity series convolved with a zero-phase Ricker
//! wavelet plus white Gaussian noise scaled to the clean section's RMS.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ImpedanceSection, SeismicSection, Section};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_traces: usize,
    pub n_samples: usize,
    pub min_layers: usize,
    pub max_layers: usize,
    pub ai_lo: f64,
    pub ai_hi: f64,
    /// Standard deviation, in samples, of each lateral random-walk step of a
    /// horizon.
    pub horizon_relief: f64,
    /// Half-width, in traces, of the moving average applied to the walk.
    pub horizon_smoothness: usize,
    /// Ricker peak frequency in Hz.
    pub ricker_freq: f64,
    /// Seconds per sample.
    pub sample_interval: f64,
    pub trace_spacing_m: f64,
    /// Noise standard deviation relative to the clean signal RMS.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    /// 2721 traces 6.25 m apart (a 17 km line) of 400 samples at 2 ms,
    /// 30 Hz Ricker, 2 % noise.
    fn default() -> Self {
        GeneratorConfig {
            n_traces: 2721,
            n_samples: 400,
            min_layers: 8,
            max_layers: 14,
            ai_lo: 3000.0,
            ai_hi: 12000.0,
            horizon_relief: 0.6,
            horizon_smoothness: 40,
            ricker_freq: 30.0,
            sample_interval: 0.002,
            trace_spacing_m: 17000.0 / 2720.0,
            noise_std: 0.02,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.n_traces == 0 || self.n_samples == 0 {
            return bad("section extents must be >= 1");
        }
        if self.min_layers == 0 || self.min_layers > self.max_layers {
            return bad("need 1 <= min_layers <= max_layers");
        }
        if !(self.ai_lo > 0.0 && self.ai_hi > self.ai_lo) {
            return bad("need 0 < ai_lo < ai_hi");
        }
        if !(self.ricker_freq > 0.0) || !(self.sample_interval > 0.0) {
            return bad("Ricker frequency and sample interval must be > 0");
        }
        if !(self.horizon_relief >= 0.0) || !(self.noise_std >= 0.0) {
            return bad("horizon relief and noise must be >= 0");
        }
        if !self.trace_spacing_m.is_finite() {
            return bad("trace spacing must be finite");
        }
        Ok(())
    }

    /// Impedance and seismic sections from `seed`.
    pub fn generate(&self) -> Result<(ImpedanceSection, SeismicSection)> {
        let mut rng = Rng::new(self.seed);
        let ai = generate_layered_model(self, &mut rng)?;
        let seis = synthesize_seismic(&ai, self.ricker_freq, self.noise_std, &mut rng)?;
        Ok((ai, seis))
    }
}

/// Centered moving average with half-width `h`, truncated at the ends.
fn smooth(xs: &[f64], h: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(xs.len() + 1);
    prefix.push(0.0);
    for x in xs {
        prefix.push(prefix.last().unwrap() + x);
    }
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h + 1).min(xs.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Piecewise-constant impedance section with laterally smooth horizons.
/// Values are rounded to `f32` so the section survives a `SEIS1` round trip.
pub fn generate_layered_model(config: &GeneratorConfig, rng: &mut Rng) -> Result<ImpedanceSection> {
    config.validate()?;
    let (nt, ns) = (config.n_traces, config.n_samples);
    let n_layers = config.min_layers + rng.below(config.max_layers - config.min_layers + 1);
    let values: Vec<f64> = (0..n_layers)
        .map(|_| rng.uniform(config.ai_lo, config.ai_hi) as f32 as f64)
        .map(|v| v.clamp(config.ai_lo, config.ai_hi))
        .collect();

    let spacing = ns as f64 / n_layers as f64;
    let horizons: Vec<Vec<usize>> = (1..n_layers)
        .map(|k| {
            let base = k as f64 * spacing + rng.uniform(-0.3, 0.3) * spacing;
            let mut walk = Vec::with_capacity(nt);
            let mut pos = 0.0;
            for _ in 0..nt {
                walk.push(pos);
                pos += rng.normal(0.0, config.horizon_relief);
            }
            let walk = smooth(&walk, config.horizon_smoothness);
            let mean = walk.iter().sum::<f64>() / nt as f64;
            walk.iter()
                .map(|w| (base + w - mean).round().clamp(1.0, (ns.max(2) - 1) as f64) as usize)
                .collect()
        })
        .collect();

    let mut data = Vec::with_capacity(nt * ns);
    for j in 0..nt {
        let mut depths: Vec<usize> = horizons.iter().map(|h| h[j]).collect();
        depths.sort_unstable();
        let mut layer = 0;
        for s in 0..ns {
            while layer < depths.len() && depths[layer] <= s {
                layer += 1;
            }
            data.push(values[layer]);
        }
    }
    let section = Section::new(
        Tensor::new(&[nt, ns], data)?,
        config.trace_spacing_m as f32,
        config.sample_interval as f32,
    )?;
    ImpedanceSection::new(section)
}

/// Normal-incidence reflection coefficients
/// `r[t] = (ai[t+1] - ai[t]) / (ai[t+1] + ai[t])`, with `r[L-1] = 0`.
pub fn ai_to_reflectivity(ai: &[f64]) -> Result<Vec<f64>> {
    if let Some((index, &value)) = ai.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositiveImpedance { index, value });
    }
    let mut r: Vec<f64> = ai.windows(2).map(|w| (w[1] - w[0]) / (w[1] + w[0])).collect();
    r.push(0.0);
    Ok(r)
}

/// Ricker wavelet `(1 - 2π²f²t²) exp(-π²f²t²)` sampled at `t = k dt` for
/// `|t| <= half_width`; the center sample is `t = 0`.
pub fn ricker_wavelet(freq: f64, dt: f64, half_width: f64) -> Result<Tensor> {
    if !(freq > 0.0 && dt > 0.0 && half_width >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ricker_wavelet(f={freq}, dt={dt}, half_width={half_width})"
        )));
    }
    let n = (half_width / dt).floor() as i64;
    let a = (PI * freq).powi(2);
    let data = (-n..=n)
        .map(|k| {
            let t2 = (k as f64 * dt).powi(2);
            (1.0 - 2.0 * a * t2) * (-a * t2).exp()
        })
        .collect();
    Tensor::new(&[(2 * n + 1) as usize], data)
}

/// Same-length convolution with an odd-length wavelet whose middle sample
/// is time zero: a unit spike at `t0` reproduces the wavelet centered on
/// `t0`.
pub fn convolve_same(signal: &[f64], wavelet: &[f64]) -> Vec<f64> {
    let c = (wavelet.len() / 2) as isize;
    let n = signal.len() as isize;
    let mut out = vec![0.0; signal.len()];
    for (s, &x) in signal.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &w) in wavelet.iter().enumerate() {
            let t = s as isize + j as isize - c;
            if (0..n).contains(&t) {
                out[t as usize] += w * x;
            }
        }
    }
    out
}

/// Forward-models seismic from impedance: reflectivity of each trace
/// convolved with a Ricker wavelet of peak frequency `freq` (support
/// `±1.5 / freq`), plus noise of standard deviation `noise_std` times the RMS
/// of the clean section. Rounded to `f32` like the impedance.
pub fn synthesize_seismic(
    impedance: &ImpedanceSection,
    freq: f64,
    noise_std: f64,
    rng: &mut Rng,
) -> Result<SeismicSection> {
    if !(noise_std >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise std {noise_std}")));
    }
    let dt = impedance.sample_interval as f64;
    let wavelet = ricker_wavelet(freq, dt, 1.5 / freq)?;
    let mut clean = Vec::with_capacity(impedance.values().len());
    for i in 0..impedance.n_traces() {
        let r = ai_to_reflectivity(impedance.trace(i))?;
        clean.extend(convolve_same(&r, wavelet.data()));
    }
    let rms = (clean.iter().map(|x| x * x).sum::<f64>() / clean.len() as f64).sqrt();
    let sigma = noise_std * rms;
    let data: Vec<f64> = clean
        .into_iter()
        .map(|x| if sigma > 0.0 { x + rng.normal(0.0, sigma) } else { x })
        .map(|x| x as f32 as f64)
        .collect();
    let values = Tensor::new(impedance.values().shape(), data)?;
    Ok(SeismicSection::new(Section::new(
        values,
        impedance.trace_spacing_m,
        impedance.sample_interval,
    )?))
}
