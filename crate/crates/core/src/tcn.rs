//! Temporal blocks and the assembled seismic-to-impedance model.
//!
//! A temporal block computes
//!
//! ```text
//! out = relu( drop(relu(conv2(drop(relu(conv1(x)))))) + skip(x) )
//! ```
//!
//! where `skip` is the identity when input and output widths agree and a
//! weight-normalized 1x1 convolution otherwise. Block `i` dilates both of its
//! convolutions by `dilations[i]` (default `2^i`).
//!
//! The model runs the blocks in sequence on a `[1, L]` seismic trace,
//! concatenates the raw trace as an extra channel onto the last block's
//! features and maps the result to one impedance channel with a 1x1
//! weight-normalized convolution (the linear head).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    concat_channels, conv1d_backward, conv1d_forward, dropout, dropout_backward, relu, relu_backward,
    split_channels, ConvGrads, ConvParams, InitScheme, PaddingMode,
};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcnConfig {
    pub kernel: usize,
    pub dropout_p: f64,
    /// Output width of each block.
    pub channels: Vec<usize>,
    /// Dilation of both convolutions in each block.
    pub dilations: Vec<usize>,
    pub padding: PaddingMode,
    #[serde(default)]
    pub init: InitScheme,
}

impl Default for TcnConfig {
    /// Six blocks of width 8, kernel 5, dropout 0.2, dilations 1..32,
    /// symmetric padding, `N(0, 0.1^2)` init.
    fn default() -> Self {
        TcnConfig::new(6, 8, 5, 0.2)
    }
}

impl TcnConfig {
    /// `n_blocks` blocks of equal `width` with dilations `1, 2, 4, ...`.
    pub fn new(n_blocks: usize, width: usize, kernel: usize, dropout_p: f64) -> Self {
        TcnConfig {
            kernel,
            dropout_p,
            channels: vec![width; n_blocks],
            dilations: (0..n_blocks).map(|i| 1usize << i.min(62)).collect(),
            padding: PaddingMode::Symmetric,
            init: InitScheme::default(),
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.channels.is_empty() {
            return bad("at least one temporal block is required".into());
        }
        if self.channels.len() != self.dilations.len() {
            return bad(format!(
                "{} block widths but {} dilations",
                self.channels.len(),
                self.dilations.len()
            ));
        }
        if self.kernel == 0 {
            return bad("kernel size must be >= 1".into());
        }
        if self.channels.iter().chain(&self.dilations).any(|&x| x == 0) {
            return bad("block widths and dilations must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout_p));
        }
        self.init.validate()
    }

    /// `(c_in, c_out)` of every block; the first block reads one channel.
    pub fn block_widths(&self) -> Vec<(usize, usize)> {
        let mut c_in = 1;
        self.channels
            .iter()
            .map(|&c| {
                let w = (c_in, c);
                c_in = c;
                w
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        let conv = |c_in: usize, c_out: usize, k: usize| c_out * c_in * k + 2 * c_out;
        let blocks: usize = self
            .block_widths()
            .into_iter()
            .map(|(i, o)| conv(i, o, self.kernel) + conv(o, o, self.kernel) + if i != o { conv(i, o, 1) } else { 0 })
            .sum();
        blocks + conv(self.channels.last().copied().unwrap_or(0) + 1, 1, 1)
    }

    /// Number of input samples that influence one output sample:
    /// `1 + 2 (K - 1) sum(d_i)`, two convolutions per block.
    pub fn receptive_field(&self) -> usize {
        1 + 2 * (self.kernel - 1) * self.dilations.iter().sum::<usize>()
    }
}

pub fn receptive_field(config: &TcnConfig) -> usize {
    config.receptive_field()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub conv1: ConvParams,
    pub conv2: ConvParams,
    /// 1x1 projection, present iff the block changes width.
    pub skip: Option<ConvParams>,
}

/// The learnable parameters of the whole model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub blocks: Vec<BlockParams>,
    pub head: ConvParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrads {
    pub conv1: ConvGrads,
    pub conv2: ConvGrads,
    pub skip: Option<ConvGrads>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub blocks: Vec<BlockGrads>,
    pub head: ConvGrads,
}

impl BlockParams {
    pub fn init(c_in: usize, c_out: usize, kernel: usize, dilation: usize, rng: &mut Rng) -> Result<Self> {
        Self::init_with(InitScheme::He, c_in, c_out, kernel, dilation, rng)
    }

    pub fn init_with(
        scheme: InitScheme,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        dilation: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let conv1 = ConvParams::init_with(scheme, c_in, c_out, kernel, dilation, rng)?;
        let conv2 = ConvParams::init_with(scheme, c_out, c_out, kernel, dilation, rng)?;
        let skip = if c_in != c_out {
            Some(ConvParams::init_with(scheme, c_in, c_out, 1, 1, rng)?)
        } else {
            None
        };
        Ok(BlockParams { conv1, conv2, skip })
    }

    fn convs(&self) -> impl Iterator<Item = &ConvParams> {
        [&self.conv1, &self.conv2].into_iter().chain(self.skip.as_ref())
    }

    fn convs_mut(&mut self) -> impl Iterator<Item = &mut ConvParams> {
        [&mut self.conv1, &mut self.conv2].into_iter().chain(self.skip.as_mut())
    }
}

impl ModelParams {
    /// Blocks in order (conv1, conv2, optional skip each), then the head;
    /// consumes `rng` in that order.
    pub fn init(config: &TcnConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let blocks = config
            .block_widths()
            .into_iter()
            .zip(&config.dilations)
            .map(|((i, o), &d)| BlockParams::init_with(config.init, i, o, config.kernel, d, rng))
            .collect::<Result<Vec<_>>>()?;
        let last = *config.channels.last().expect("validated");
        let head = ConvParams::init_with(config.init, last + 1, 1, 1, 1, rng)?;
        Ok(ModelParams { blocks, head })
    }

    /// Every convolution in canonical order: per block conv1, conv2, skip;
    /// then the head.
    pub fn convs(&self) -> Vec<&ConvParams> {
        self.blocks
            .iter()
            .flat_map(|b| b.convs())
            .chain(std::iter::once(&self.head))
            .collect()
    }

    pub fn convs_mut(&mut self) -> Vec<&mut ConvParams> {
        let mut out: Vec<&mut ConvParams> = self.blocks.iter_mut().flat_map(|b| b.convs_mut()).collect();
        out.push(&mut self.head);
        out
    }

    /// Parameter tensors in canonical order (`v`, `g`, `bias` per conv).
    pub fn tensors(&self) -> Vec<&Tensor> {
        self.convs().into_iter().flat_map(|c| c.tensors()).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.convs_mut().into_iter().flat_map(|c| c.tensors_mut()).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Checks that the parameter layout is the one `config` describes.
    pub fn check_matches(&self, config: &TcnConfig) -> Result<()> {
        config.validate()?;
        let mismatch = |what: String| Err(Error::InvalidArgument(format!("params do not match config: {what}")));
        if self.blocks.len() != config.n_blocks() {
            return mismatch(format!("{} blocks vs {}", self.blocks.len(), config.n_blocks()));
        }
        for (b, (((i, o), &d), p)) in config
            .block_widths()
            .into_iter()
            .zip(&config.dilations)
            .zip(&self.blocks)
            .enumerate()
        {
            let conv_ok = |c: &ConvParams, ci, co, k, dil| c.c_in() == ci && c.c_out() == co && c.kernel() == k && c.dilation == dil;
            let skip_ok = match &p.skip {
                None => i == o,
                Some(s) => i != o && conv_ok(s, i, o, 1, 1),
            };
            if !(conv_ok(&p.conv1, i, o, config.kernel, d) && conv_ok(&p.conv2, o, o, config.kernel, d) && skip_ok) {
                return mismatch(format!("block {b}"));
            }
        }
        let last = *config.channels.last().expect("validated");
        if self.head.c_in() != last + 1 || self.head.c_out() != 1 || self.head.kernel() != 1 {
            return mismatch("head".into());
        }
        Ok(())
    }

    /// Flattened copy of all parameters in canonical order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    /// Overwrites all parameters from a flat vector in canonical order.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::Shape {
                expected: vec![self.parameter_count()],
                actual: vec![flat.len()],
            });
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }
}

impl ModelGrads {
    pub fn zeros_for(params: &ModelParams) -> Self {
        ModelGrads {
            blocks: params
                .blocks
                .iter()
                .map(|b| BlockGrads {
                    conv1: ConvGrads::zeros_for(&b.conv1),
                    conv2: ConvGrads::zeros_for(&b.conv2),
                    skip: b.skip.as_ref().map(ConvGrads::zeros_for),
                })
                .collect(),
            head: ConvGrads::zeros_for(&params.head),
        }
    }

    /// Gradient tensors in the same order as [`ModelParams::tensors`].
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend(b.conv1.tensors());
            out.extend(b.conv2.tensors());
            if let Some(s) = &b.skip {
                out.extend(s.tensors());
            }
        }
        out.extend(self.head.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.extend(b.conv1.tensors_mut());
            out.extend(b.conv2.tensors_mut());
            if let Some(s) = &mut b.skip {
                out.extend(s.tensors_mut());
            }
        }
        out.extend(self.head.tensors_mut());
        out
    }

    pub fn add_assign(&mut self, other: &ModelGrads) -> Result<()> {
        let theirs = other.tensors();
        let mine = self.tensors_mut();
        if mine.len() != theirs.len() {
            return Err(Error::InvalidArgument("gradient layouts differ".into()));
        }
        for (a, b) in mine.into_iter().zip(theirs) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|t| t.data().iter().copied()).collect()
    }
}

/// Source of dropout masks for a forward pass.
pub enum Dropout<'a> {
    /// Inference: dropout is the identity.
    Off,
    /// Training: draw fresh masks from `rng`.
    Sample { p: f64, rng: &'a mut Rng },
    /// Replay masks recorded by an earlier pass (two per block, in order).
    /// Makes a training-mode forward pass a deterministic function of the
    /// parameters, which is what gradient checking needs.
    Frozen(&'a [Tensor]),
}

pub(crate) struct DropoutCursor<'a> {
    pub(crate) source: Dropout<'a>,
    pub(crate) next: usize,
}

impl DropoutCursor<'_> {
    fn apply(&mut self, x: &Tensor) -> Result<(Tensor, Option<Tensor>)> {
        match &mut self.source {
            Dropout::Off => Ok((x.clone(), None)),
            Dropout::Sample { p, rng } => {
                let (y, m) = dropout(x, *p, rng, true)?;
                Ok((y, Some(m)))
            }
            Dropout::Frozen(masks) => {
                let m = masks
                    .get(self.next)
                    .ok_or_else(|| Error::InvalidArgument(format!("no frozen dropout mask #{}", self.next)))?;
                self.next += 1;
                m.expect_shape(x.shape())?;
                Ok((dropout_backward(m, x)?, Some(m.clone())))
            }
        }
    }
}

/// Intermediate values of one block needed by its backward pass.
#[derive(Debug, Clone)]
pub struct BlockCache {
    input: Tensor,
    pre1: Tensor,
    pub(crate) mask1: Option<Tensor>,
    mid: Tensor,
    pre2: Tensor,
    pub(crate) mask2: Option<Tensor>,
    sum: Tensor,
}

/// Intermediate values of a full forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    blocks: Vec<BlockCache>,
    head_input: Tensor,
}

impl ForwardCache {
    /// Dropout masks used in this pass, two per block in order; empty in
    /// inference mode. Feed to [`Dropout::Frozen`] to replay the pass.
    pub fn masks(&self) -> Vec<Tensor> {
        self.blocks
            .iter()
            .flat_map(|b| [b.mask1.clone(), b.mask2.clone()])
            .flatten()
            .collect()
    }
}

pub(crate) fn block_forward_cached(
    input: &Tensor,
    p: &BlockParams,
    mode: PaddingMode,
    drop: &mut DropoutCursor<'_>,
) -> Result<(Tensor, BlockCache)> {
    let pre1 = conv1d_forward(input, &p.conv1, mode)?;
    let (mid, mask1) = drop.apply(&relu(&pre1))?;
    let pre2 = conv1d_forward(&mid, &p.conv2, mode)?;
    let (main, mask2) = drop.apply(&relu(&pre2))?;
    let sum = match &p.skip {
        Some(s) => main.add(&conv1d_forward(input, s, mode)?)?,
        None => main.add(input)?,
    };
    let out = relu(&sum);
    let cache = BlockCache {
        input: input.clone(),
        pre1,
        mask1,
        mid,
        pre2,
        mask2,
        sum,
    };
    Ok((out, cache))
}

pub(crate) fn block_backward(p: &BlockParams, mode: PaddingMode, cache: &BlockCache, upstream: &Tensor) -> Result<(Tensor, BlockGrads)> {
    let g_sum = relu_backward(&cache.sum, upstream)?;

    let mut g = g_sum.clone();
    if let Some(m) = &cache.mask2 {
        g = dropout_backward(m, &g)?;
    }
    let g = relu_backward(&cache.pre2, &g)?;
    let (mut g, conv2) = conv1d_backward(&cache.mid, &p.conv2, mode, &g)?;
    if let Some(m) = &cache.mask1 {
        g = dropout_backward(m, &g)?;
    }
    let g = relu_backward(&cache.pre1, &g)?;
    let (mut g_input, conv1) = conv1d_backward(&cache.input, &p.conv1, mode, &g)?;

    let skip = match &p.skip {
        Some(s) => {
            let (gx, gs) = conv1d_backward(&cache.input, s, mode, &g_sum)?;
            g_input.add_assign(&gx)?;
            Some(gs)
        }
        None => {
            g_input.add_assign(&g_sum)?;
            None
        }
    };
    Ok((g_input, BlockGrads { conv1, conv2, skip }))
}

/// One temporal block on a `[C_in, L]` input.
pub fn temporal_block_forward(
    input: &Tensor,
    params: &BlockParams,
    config: &TcnConfig,
    rng: &mut Rng,
    training: bool,
) -> Result<Tensor> {
    let source = if training {
        Dropout::Sample {
            p: config.dropout_p,
            rng,
        }
    } else {
        Dropout::Off
    };
    let mut drop = DropoutCursor { source, next: 0 };
    Ok(block_forward_cached(input, params, config.padding, &mut drop)?.0)
}

fn check_trace(x: &Tensor) -> Result<()> {
    if x.rank() != 2 || x.shape()[0] != 1 {
        return Err(Error::Shape {
            expected: vec![1, x.shape().last().copied().unwrap_or(0)],
            actual: x.shape().to_vec(),
        });
    }
    Ok(())
}

/// Forward pass on a `[1, L]` trace, keeping what the backward pass needs.
pub fn forward_cached(
    trace: &Tensor,
    params: &ModelParams,
    config: &TcnConfig,
    dropout: Dropout<'_>,
) -> Result<(Tensor, ForwardCache)> {
    check_trace(trace)?;
    if params.blocks.len() != config.n_blocks() {
        return Err(Error::InvalidArgument(format!(
            "params have {} blocks, config {}",
            params.blocks.len(),
            config.n_blocks()
        )));
    }
    let mut drop = DropoutCursor { source: dropout, next: 0 };
    let mut h = trace.clone();
    let mut caches = Vec::with_capacity(params.blocks.len());
    for b in &params.blocks {
        let (out, c) = block_forward_cached(&h, b, config.padding, &mut drop)?;
        caches.push(c);
        h = out;
    }
    let head_input = concat_channels(&[&h, trace])?;
    let out = conv1d_forward(&head_input, &params.head, config.padding)?;
    Ok((
        out,
        ForwardCache {
            blocks: caches,
            head_input,
        },
    ))
}

/// Gradients of a scalar loss with respect to all parameters and the input
/// trace, given `upstream = dLoss/dOutput`.
pub fn backward(
    params: &ModelParams,
    config: &TcnConfig,
    cache: &ForwardCache,
    upstream: &Tensor,
) -> Result<(ModelGrads, Tensor)> {
    let (g_cat, head) = conv1d_backward(&cache.head_input, &params.head, config.padding, upstream)?;
    let last = cache.head_input.shape()[0] - 1;
    let mut parts = split_channels(&g_cat, &[last, 1])?;
    let g_raw = parts.pop().expect("two parts");
    let mut g = parts.pop().expect("two parts");

    let mut blocks = Vec::with_capacity(params.blocks.len());
    for (p, c) in params.blocks.iter().zip(&cache.blocks).rev() {
        let (gx, bg) = block_backward(p, config.padding, c, &g)?;
        blocks.push(bg);
        g = gx;
    }
    blocks.reverse();
    g.add_assign(&g_raw)?;
    Ok((ModelGrads { blocks, head }, g))
}

/// Seismic trace `[1, L]` to predicted impedance `[1, L]`.
///
/// With `training == false` this is a pure function of its inputs and `rng`
/// is untouched.
pub fn model_forward(
    trace: &Tensor,
    params: &ModelParams,
    config: &TcnConfig,
    rng: &mut Rng,
    training: bool,
) -> Result<Tensor> {
    let dropout = if training {
        Dropout::Sample {
            p: config.dropout_p,
            rng,
        }
    } else {
        Dropout::Off
    };
    Ok(forward_cached(trace, params, config, dropout)?.0)
}

/// Inference-mode forward pass.
pub fn predict_trace(trace: &Tensor, params: &ModelParams, config: &TcnConfig) -> Result<Tensor> {
    Ok(forward_cached(trace, params, config, Dropout::Off)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;

    fn small_config(padding: PaddingMode) -> TcnConfig {
        TcnConfig {
            kernel: 3,
            dropout_p: 0.3,
            channels: vec![3, 3, 2],
            dilations: vec![1, 2, 4],
            padding,
            init: InitScheme::He,
        }
    }

    /// Independent closed-form parameter count for equal-width configs:
    /// block 1 reads 1 channel and needs a 1x1 skip, later blocks do not.
    /// Each conv contributes v, g and bias.
    fn count_equal_width(blocks: usize, w: usize, k: usize) -> usize {
        let first = (w * k + w + w) + (w * w * k + w + w) + (w + w + w);
        let rest = (blocks - 1) * 2 * (w * w * k + 2 * w);
        let head = (w + 1) + 2;
        first + rest + head
    }

    #[test]
    fn default_config_is_reference_setup() {
        let c = TcnConfig::default();
        assert_eq!(c.n_blocks(), 6);
        assert_eq!(c.kernel, 5);
        assert_eq!(c.dropout_p, 0.2);
        assert_eq!(c.dilations, vec![1, 2, 4, 8, 16, 32]);
        assert_eq!(c.channels, vec![8; 6]);
        assert_eq!(c.padding, PaddingMode::Symmetric);
        assert_eq!(c.init, InitScheme::Normal { std: 0.1 });
    }

    #[test]
    fn init_schemes_draw_expected_spread() {
        let sample_std = |p: &ModelParams| {
            let v: Vec<f64> = p.blocks[1..].iter().flat_map(|b| b.conv1.v.data().to_vec()).collect();
            (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
        };
        let mut c = TcnConfig::new(20, 8, 5, 0.2);
        c.dilations = vec![1; 20];
        let p = ModelParams::init(&c, &mut Rng::new(2)).unwrap();
        assert!((sample_std(&p) / 0.1 - 1.0).abs() < 0.05);
        c.init = InitScheme::He;
        let p = ModelParams::init(&c, &mut Rng::new(2)).unwrap();
        let he = (2.0f64 / 40.0).sqrt();
        assert!((sample_std(&p) / he - 1.0).abs() < 0.05);
        c.init = InitScheme::Normal { std: 0.0 };
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = TcnConfig::default();
        c.dilations.pop();
        assert!(c.validate().is_err());
        let mut c = TcnConfig::default();
        c.channels[2] = 0;
        assert!(c.validate().is_err());
        let mut c = TcnConfig::default();
        c.dropout_p = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn parameter_count_matches_independent_count() {
        assert_eq!(count_equal_width(6, 8, 5), 3787);
        let c = TcnConfig::default();
        assert_eq!(c.parameter_count(), 3787);
        let p = ModelParams::init(&c, &mut Rng::new(0)).unwrap();
        assert_eq!(p.parameter_count(), 3787);
        for (b, w, k) in [(1, 1, 1), (3, 4, 2), (4, 16, 3)] {
            let c = TcnConfig::new(b, w, k, 0.0);
            let p = ModelParams::init(&c, &mut Rng::new(1)).unwrap();
            assert_eq!(p.parameter_count(), c.parameter_count());
            if w > 1 {
                assert_eq!(c.parameter_count(), count_equal_width(b, w, k));
            }
        }
    }

    #[test]
    fn init_is_deterministic_and_weight_equals_direction() {
        let c = TcnConfig::default();
        let a = ModelParams::init(&c, &mut Rng::new(5)).unwrap();
        let b = ModelParams::init(&c, &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
        a.check_matches(&c).unwrap();
        for conv in a.convs() {
            let w = conv.effective_weight().unwrap();
            for (x, y) in w.data().iter().zip(conv.v.data()) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn params_config_mismatch_detected() {
        let p = ModelParams::init(&TcnConfig::default(), &mut Rng::new(0)).unwrap();
        assert!(p.check_matches(&TcnConfig::new(6, 4, 5, 0.2)).is_err());
        assert!(p.check_matches(&TcnConfig::new(5, 8, 5, 0.2)).is_err());
        let x = Tensor::zeros(&[1, 10]).unwrap();
        assert!(predict_trace(&x, &p, &TcnConfig::new(5, 8, 5, 0.2)).is_err());
    }

    #[test]
    fn zero_main_path_block_is_relu_of_input() {
        let c = TcnConfig::new(1, 4, 3, 0.0);
        let mut rng = Rng::new(2);
        let mut b = BlockParams::init(4, 4, 3, 1, &mut rng).unwrap();
        for conv in [&mut b.conv1, &mut b.conv2] {
            conv.g = Tensor::zeros(&[4]).unwrap();
        }
        let x = Tensor::randn(&[4, 17], &mut rng, 0.0, 1.0).unwrap();
        let y = temporal_block_forward(&x, &b, &c, &mut rng, false).unwrap();
        assert_eq!(y, relu(&x));
    }

    #[test]
    fn output_length_matches_input() {
        let c = TcnConfig::default();
        let p = ModelParams::init(&c, &mut Rng::new(3)).unwrap();
        let mut rng = Rng::new(4);
        for len in [16, 17, 100, 333, 512] {
            let x = Tensor::randn(&[1, len], &mut rng, 0.0, 1.0).unwrap();
            assert_eq!(model_forward(&x, &p, &c, &mut rng, true).unwrap().shape(), &[1, len]);
            assert_eq!(model_forward(&x, &p, &c, &mut rng, false).unwrap().shape(), &[1, len]);
        }
    }

    #[test]
    fn zero_head_outputs_bias() {
        let c = TcnConfig::default();
        let mut p = ModelParams::init(&c, &mut Rng::new(3)).unwrap();
        p.head.g = Tensor::zeros(&[1]).unwrap();
        p.head.bias = Tensor::new(&[1], vec![1.75]).unwrap();
        let x = Tensor::randn(&[1, 64], &mut Rng::new(1), 0.0, 1.0).unwrap();
        let y = predict_trace(&x, &p, &c).unwrap();
        assert!(y.data().iter().all(|&v| v == 1.75));
    }

    #[test]
    fn inference_is_pure() {
        let c = TcnConfig::default();
        let p = ModelParams::init(&c, &mut Rng::new(3)).unwrap();
        let x = Tensor::randn(&[1, 80], &mut Rng::new(1), 0.0, 1.0).unwrap();
        let mut r1 = Rng::new(10);
        let mut r2 = Rng::new(99);
        let a = model_forward(&x, &p, &c, &mut r1, false).unwrap();
        let b = model_forward(&x, &p, &c, &mut r2, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(r1, Rng::new(10));
    }

    #[test]
    fn frozen_masks_replay_training_pass() {
        let c = small_config(PaddingMode::Symmetric);
        let p = ModelParams::init(&c, &mut Rng::new(3)).unwrap();
        let x = Tensor::randn(&[1, 30], &mut Rng::new(1), 0.0, 1.0).unwrap();
        let mut rng = Rng::new(8);
        let (y, cache) = forward_cached(&x, &p, &c, Dropout::Sample { p: 0.3, rng: &mut rng }).unwrap();
        let masks = cache.masks();
        assert_eq!(masks.len(), 2 * c.n_blocks());
        let (y2, _) = forward_cached(&x, &p, &c, Dropout::Frozen(&masks)).unwrap();
        assert_eq!(y, y2);
    }

    fn projection_loss(y: &Tensor, r: &Tensor) -> f64 {
        y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn block_gradients_match_finite_differences() {
        for padding in [PaddingMode::Symmetric, PaddingMode::Causal] {
            let mut rng = Rng::new(12);
            let mut b = BlockParams::init(2, 3, 3, 2, &mut rng).unwrap();
            b.conv1.bias = Tensor::randn(&[3], &mut rng, 0.0, 0.5).unwrap();
            b.conv2.bias = Tensor::randn(&[3], &mut rng, 0.0, 0.5).unwrap();
            let x = Tensor::randn(&[2, 9], &mut rng, 0.0, 1.0).unwrap();
            let r = Tensor::randn(&[3, 9], &mut rng, 0.0, 1.0).unwrap();

            let mut drop = DropoutCursor {
                source: Dropout::Sample { p: 0.25, rng: &mut rng },
                next: 0,
            };
            let (_, cache) = block_forward_cached(&x, &b, padding, &mut drop).unwrap();
            let masks: Vec<Tensor> = [cache.mask1.clone(), cache.mask2.clone()].into_iter().flatten().collect();
            let (gx, g) = block_backward(&b, padding, &cache, &r).unwrap();

            let eval = |b: &BlockParams, x: &Tensor| {
                let mut d = DropoutCursor {
                    source: Dropout::Frozen(&masks),
                    next: 0,
                };
                projection_loss(&block_forward_cached(x, b, padding, &mut d).unwrap().0, &r)
            };

            let err = grad_check(
                |t| eval(&b, &Tensor::new(&[2, 9], t.to_vec()).unwrap()),
                x.data(),
                gx.data(),
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-5, "input grad {err}");

            let flat_params = |b: &BlockParams| -> Vec<f64> {
                b.convs().flat_map(|c| c.tensors()).flat_map(|t| t.data().to_vec()).collect()
            };
            let analytic: Vec<f64> = [&g.conv1, &g.conv2]
                .into_iter()
                .chain(g.skip.as_ref())
                .flat_map(|c| c.tensors())
                .flat_map(|t| t.data().to_vec())
                .collect();
            let theta = flat_params(&b);
            let err = grad_check(
                |t| {
                    let mut q = b.clone();
                    let mut off = 0;
                    for conv in q.convs_mut() {
                        for ten in conv.tensors_mut() {
                            let n = ten.len();
                            ten.data_mut().copy_from_slice(&t[off..off + n]);
                            off += n;
                        }
                    }
                    eval(&q, &x)
                },
                &theta,
                &analytic,
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-5, "param grad {err} ({padding:?})");
        }
    }

    #[test]
    fn model_gradients_match_finite_differences() {
        for padding in [PaddingMode::Symmetric, PaddingMode::Causal] {
            let c = small_config(padding);
            let mut rng = Rng::new(40);
            let mut p = ModelParams::init(&c, &mut rng).unwrap();
            for conv in p.convs_mut() {
                conv.bias = Tensor::randn(conv.bias.shape(), &mut rng, 0.0, 0.3).unwrap();
            }
            let x = Tensor::randn(&[1, 24], &mut rng, 0.0, 1.0).unwrap();
            let r = Tensor::randn(&[1, 24], &mut rng, 0.0, 1.0).unwrap();
            let (_, cache) = forward_cached(&x, &p, &c, Dropout::Sample { p: 0.3, rng: &mut rng }).unwrap();
            let masks = cache.masks();
            let (g, gx) = backward(&p, &c, &cache, &r).unwrap();

            let theta = p.to_flat();
            let err = grad_check(
                |t| {
                    let mut q = p.clone();
                    q.set_flat(t).unwrap();
                    projection_loss(&forward_cached(&x, &q, &c, Dropout::Frozen(&masks)).unwrap().0, &r)
                },
                &theta,
                &g.to_flat(),
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-4, "model param grad {err} ({padding:?})");

            let err = grad_check(
                |t| {
                    let xi = Tensor::new(&[1, 24], t.to_vec()).unwrap();
                    projection_loss(&forward_cached(&xi, &p, &c, Dropout::Frozen(&masks)).unwrap().0, &r)
                },
                x.data(),
                gx.data(),
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-4, "model input grad {err} ({padding:?})");
        }
    }

    #[test]
    fn receptive_field_formula() {
        assert_eq!(TcnConfig::new(4, 3, 1, 0.0).receptive_field(), 1);
        assert_eq!(TcnConfig::new(1, 3, 2, 0.0).receptive_field(), 3);
        assert_eq!(TcnConfig::default().receptive_field(), 505);
    }
}
