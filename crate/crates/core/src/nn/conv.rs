use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// How the `dilation * (kernel - 1)` zero samples are distributed so that
/// output length equals input length.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaddingMode {
    /// Half before, half after (the extra sample, if any, goes after).
    #[default]
    Symmetric,
    /// Everything before: `output[t]` depends on `input[..=t]` only.
    Causal,
}

impl PaddingMode {
    pub fn left_pad(self, kernel: usize, dilation: usize) -> usize {
        let total = dilation * (kernel - 1);
        match self {
            PaddingMode::Symmetric => total / 2,
            PaddingMode::Causal => total,
        }
    }
}

/// Distribution of the direction `v` at initialization. `g` always starts
/// at `||v[c]||`, so the initial effective weight equals `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum InitScheme {
    /// `v ~ N(0, 2 / (c_in * kernel))`.
    He,
    /// `v ~ N(0, std^2)`.
    Normal { std: f64 },
}

impl Default for InitScheme {
    /// `N(0, 0.1^2)`.
    fn default() -> Self {
        InitScheme::Normal { std: 0.1 }
    }
}

impl InitScheme {
    pub fn std(self, c_in: usize, kernel: usize) -> f64 {
        match self {
            InitScheme::He => (2.0 / (c_in * kernel) as f64).sqrt(),
            InitScheme::Normal { std } => std,
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            InitScheme::Normal { std } if !(std > 0.0 && std.is_finite()) => {
                Err(Error::InvalidArgument(format!("init std {std} must be finite and > 0")))
            }
            _ => Ok(()),
        }
    }
}

/// Weight-normalized 1-D convolution parameters.
///
/// The effective weight of output channel `c` is `g[c] * v[c] / ||v[c]||`,
/// the norm taken over the `[c_in, kernel]` slice of `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub v: Tensor,
    pub g: Tensor,
    pub bias: Tensor,
    pub dilation: usize,
}

/// Gradients with the shapes of [`ConvParams`]' tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub v: Tensor,
    pub g: Tensor,
    pub bias: Tensor,
}

impl ConvParams {
    pub fn new(v: Tensor, g: Tensor, bias: Tensor, dilation: usize) -> Result<Self> {
        if v.rank() != 3 {
            return Err(Error::InvalidArgument(format!(
                "conv direction tensor must be [c_out, c_in, k], got {:?}",
                v.shape()
            )));
        }
        let c_out = v.shape()[0];
        g.expect_shape(&[c_out])?;
        bias.expect_shape(&[c_out])?;
        if dilation == 0 {
            return Err(Error::InvalidArgument("dilation must be >= 1".into()));
        }
        let p = ConvParams { v, g, bias, dilation };
        p.norms()?;
        Ok(p)
    }

    /// He-style init: `v ~ N(0, 2 / (c_in * k))`, `g = ||v[c]||` so the
    /// initial effective weight equals `v`, zero bias.
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
        scheme.validate()?;
        let std = scheme.std(c_in, kernel);
        let v = Tensor::randn(&[c_out, c_in, kernel], rng, 0.0, std)?;
        let norms: Vec<f64> = (0..c_out).map(|c| row_norm(v.row(c))).collect();
        let g = Tensor::new(&[c_out], norms)?;
        let bias = Tensor::zeros(&[c_out])?;
        ConvParams::new(v, g, bias, dilation)
    }

    pub fn c_out(&self) -> usize {
        self.v.shape()[0]
    }

    pub fn c_in(&self) -> usize {
        self.v.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.v.shape()[2]
    }

    pub fn parameter_count(&self) -> usize {
        self.v.len() + self.g.len() + self.bias.len()
    }

    fn norms(&self) -> Result<Vec<f64>> {
        (0..self.c_out())
            .map(|c| {
                let n = row_norm(self.v.row(c));
                if !n.is_finite() {
                    Err(Error::NonFinite("weight-norm direction"))
                } else if n > 0.0 {
                    Ok(n)
                } else {
                    Err(Error::InvalidArgument(format!(
                        "weight-norm direction of output channel {c} has norm {n}"
                    )))
                }
            })
            .collect()
    }

    /// `g[c] * v[c] / ||v[c]||`, shape `[c_out, c_in, k]`.
    pub fn effective_weight(&self) -> Result<Tensor> {
        let norms = self.norms()?;
        let mut w = self.v.clone();
        for (c, &n) in norms.iter().enumerate() {
            // Normalize before scaling: a one-element direction then maps to
            // exactly +-1 and its (identically zero) derivative stays exact.
            let g = self.g.data()[c];
            w.row_mut(c).iter_mut().for_each(|x| *x = g * (*x / n));
        }
        Ok(w)
    }

    pub fn tensors(&self) -> [&Tensor; 3] {
        [&self.v, &self.g, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 3] {
        [&mut self.v, &mut self.g, &mut self.bias]
    }
}

impl ConvGrads {
    pub fn zeros_for(p: &ConvParams) -> Self {
        ConvGrads {
            v: p.v.zeros_like(),
            g: p.g.zeros_like(),
            bias: p.bias.zeros_like(),
        }
    }

    pub fn tensors(&self) -> [&Tensor; 3] {
        [&self.v, &self.g, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 3] {
        [&mut self.v, &mut self.g, &mut self.bias]
    }
}

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Valid output range `[lo, hi)` for tap offset `shift`: the output samples
/// `t` whose input sample `t + shift` lies inside `[0, len)`.
#[inline]
fn tap_range(shift: isize, len: usize) -> (usize, usize) {
    let len = len as isize;
    let lo = (-shift).clamp(0, len);
    let hi = (len - shift).clamp(0, len);
    (lo as usize, hi.max(lo) as usize)
}

fn check_input(input: &Tensor, params: &ConvParams) -> Result<(usize, usize)> {
    if input.rank() != 2 {
        return Err(Error::InvalidArgument(format!(
            "conv input must be [channels, length], got {:?}",
            input.shape()
        )));
    }
    let (c_in, len) = (input.shape()[0], input.shape()[1]);
    if c_in != params.c_in() {
        return Err(Error::Shape {
            expected: vec![params.c_in(), len],
            actual: input.shape().to_vec(),
        });
    }
    Ok((c_in, len))
}

/// Same-length dilated convolution: `[c_in, L] -> [c_out, L]`.
pub fn conv1d_forward(input: &Tensor, params: &ConvParams, mode: PaddingMode) -> Result<Tensor> {
    let (c_in, len) = check_input(input, params)?;
    let (c_out, k) = (params.c_out(), params.kernel());
    let w = params.effective_weight()?;
    let left = mode.left_pad(k, params.dilation) as isize;
    let mut out = Tensor::zeros(&[c_out, len])?;
    let x = input.data();
    let wd = w.data();
    for o in 0..c_out {
        let orow = out.row_mut(o);
        orow.fill(params.bias.data()[o]);
        for i in 0..c_in {
            let xrow = &x[i * len..(i + 1) * len];
            for tap in 0..k {
                let wt = wd[(o * c_in + i) * k + tap];
                let shift = (tap * params.dilation) as isize - left;
                let (lo, hi) = tap_range(shift, len);
                if lo >= hi {
                    continue;
                }
                let src = &xrow[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                for (y, &xv) in orow[lo..hi].iter_mut().zip(src) {
                    *y += wt * xv;
                }
            }
        }
    }
    out.check_finite("conv1d_forward")?;
    Ok(out)
}

/// Gradients of a downstream scalar loss with respect to the convolution
/// input and to `v`, `g` and `bias`.
pub fn conv1d_backward(
    input: &Tensor,
    params: &ConvParams,
    mode: PaddingMode,
    upstream: &Tensor,
) -> Result<(Tensor, ConvGrads)> {
    let (c_in, len) = check_input(input, params)?;
    let (c_out, k) = (params.c_out(), params.kernel());
    upstream.expect_shape(&[c_out, len])?;
    let norms = params.norms()?;
    let w = params.effective_weight()?;
    let left = mode.left_pad(k, params.dilation) as isize;

    let x = input.data();
    let gy = upstream.data();
    let wd = w.data();
    let mut gx = vec![0.0; c_in * len];
    let mut gw = vec![0.0; c_out * c_in * k];
    let mut gb = vec![0.0; c_out];

    for o in 0..c_out {
        let gyrow = &gy[o * len..(o + 1) * len];
        gb[o] = gyrow.iter().sum();
        for i in 0..c_in {
            let xrow = &x[i * len..(i + 1) * len];
            let gxrow = &mut gx[i * len..(i + 1) * len];
            for tap in 0..k {
                let widx = (o * c_in + i) * k + tap;
                let wt = wd[widx];
                let shift = (tap * params.dilation) as isize - left;
                let (lo, hi) = tap_range(shift, len);
                if lo >= hi {
                    continue;
                }
                let (s0, s1) = ((lo as isize + shift) as usize, (hi as isize + shift) as usize);
                let mut acc = 0.0;
                for ((&g, &xv), gxv) in gyrow[lo..hi].iter().zip(&xrow[s0..s1]).zip(&mut gxrow[s0..s1]) {
                    acc += g * xv;
                    *gxv += wt * g;
                }
                gw[widx] = acc;
            }
        }
    }

    // Through w = g v / ||v||:
    //   dL/dg = <dL/dw, v> / ||v||
    //   dL/dv = (g / ||v||) (dL/dw - (dL/dg / ||v||) v)
    let slice = c_in * k;
    let mut gv = vec![0.0; gw.len()];
    let mut gg = vec![0.0; c_out];
    for o in 0..c_out {
        let vrow = params.v.row(o);
        let gwrow = &gw[o * slice..(o + 1) * slice];
        let n = norms[o];
        let dot: f64 = vrow.iter().zip(gwrow).map(|(a, b)| a * b).sum();
        gg[o] = dot / n;
        let scale = params.g.data()[o] / n;
        let proj = gg[o] / n;
        for ((dv, &gwv), &vv) in gv[o * slice..(o + 1) * slice].iter_mut().zip(gwrow).zip(vrow) {
            *dv = scale * (gwv - proj * vv);
        }
    }

    let grads = ConvGrads {
        v: Tensor::new(params.v.shape(), gv)?,
        g: Tensor::new(&[c_out], gg)?,
        bias: Tensor::new(&[c_out], gb)?,
    };
    Ok((Tensor::new(&[c_in, len], gx)?, grads))
}
