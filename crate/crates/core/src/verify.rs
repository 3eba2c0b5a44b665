//! Finite-difference gradient suite over every layer and the assembled model.
//!
//! Each check builds a small random instance, computes the analytic
//! gradient of the scalar probe `sum(r * f(x))` for a fixed random `r`, and
//! compares it with central differences via [`grad_check`]. Dropout runs
//! with frozen masks so the probe is a deterministic function of its input.

use crate::error::Result;
use crate::nn::{
    concat_channels, conv1d_backward, conv1d_forward, dropout, dropout_backward, grad_check, mse_loss, relu, InitScheme,
    relu_backward, split_channels, ConvParams, PaddingMode,
};
use crate::rng::Rng;
use crate::tcn::{backward, block_backward, block_forward_cached, forward_cached, BlockParams, Dropout, DropoutCursor, ModelParams, TcnConfig};
use crate::tensor::Tensor;

/// Tolerance for single layers.
pub const LAYER_TOLERANCE: f64 = 1e-5;
/// Tolerance for the assembled model.
pub const MODEL_TOLERANCE: f64 = 1e-4;
const EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

fn probe(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn randn(shape: &[usize], rng: &mut Rng) -> Tensor {
    Tensor::randn(shape, rng, 0.0, 1.0).expect("nonempty shape")
}

fn check(name: impl Into<String>, tolerance: f64, err: f64) -> GradCheck {
    GradCheck {
        name: name.into(),
        max_rel_error: err,
        tolerance,
    }
}

fn with_random_bias(mut p: ConvParams, rng: &mut Rng) -> ConvParams {
    p.bias = Tensor::randn(p.bias.shape(), rng, 0.0, 0.5).expect("nonempty shape");
    p
}

fn conv_params_flat(p: &ConvParams) -> Vec<f64> {
    p.tensors().iter().flat_map(|t| t.data().to_vec()).collect()
}

fn conv_from_flat(template: &ConvParams, flat: &[f64]) -> ConvParams {
    let mut q = template.clone();
    let mut off = 0;
    for t in q.tensors_mut() {
        let n = t.len();
        t.data_mut().copy_from_slice(&flat[off..off + n]);
        off += n;
    }
    q
}

fn conv_checks(mode: PaddingMode, rng: &mut Rng) -> Result<Vec<GradCheck>> {
    let tag = format!("{mode:?}").to_lowercase();
    let p = with_random_bias(ConvParams::init(2, 3, 3, 2, rng)?, rng);
    let x = randn(&[2, 11], rng);
    let r = randn(&[3, 11], rng);
    let (gx, gp) = conv1d_backward(&x, &p, mode, &r)?;

    let input_err = grad_check(
        |t| probe(&conv1d_forward(&Tensor::new(&[2, 11], t.to_vec()).unwrap(), &p, mode).unwrap(), &r),
        x.data(),
        gx.data(),
        EPS,
    )?;
    let analytic: Vec<f64> = gp.tensors().iter().flat_map(|t| t.data().to_vec()).collect();
    let param_err = grad_check(
        |t| probe(&conv1d_forward(&x, &conv_from_flat(&p, t), mode).unwrap(), &r),
        &conv_params_flat(&p),
        &analytic,
        EPS,
    )?;
    Ok(vec![
        check(format!("conv1d {tag} (input)"), LAYER_TOLERANCE, input_err),
        check(format!("conv1d {tag} (v, g, bias)"), LAYER_TOLERANCE, param_err),
    ])
}

fn relu_check(rng: &mut Rng) -> Result<GradCheck> {
    // Keep inputs away from the kink, where differences are meaningless.
    let x = randn(&[3, 10], rng).map(|v| if v.abs() < 0.05 { v + 0.1 } else { v })?;
    let r = randn(&[3, 10], rng);
    let g = relu_backward(&x, &r)?;
    let err = grad_check(
        |t| probe(&relu(&Tensor::new(&[3, 10], t.to_vec()).unwrap()), &r),
        x.data(),
        g.data(),
        EPS,
    )?;
    Ok(check("relu", LAYER_TOLERANCE, err))
}

fn dropout_check(rng: &mut Rng) -> Result<GradCheck> {
    let x = randn(&[3, 10], rng);
    let r = randn(&[3, 10], rng);
    let (_, mask) = dropout(&x, 0.3, rng, true)?;
    let g = dropout_backward(&mask, &r)?;
    let err = grad_check(
        |t| probe(&dropout_backward(&mask, &Tensor::new(&[3, 10], t.to_vec()).unwrap()).unwrap(), &r),
        x.data(),
        g.data(),
        EPS,
    )?;
    Ok(check("dropout (frozen mask)", LAYER_TOLERANCE, err))
}

fn concat_check(rng: &mut Rng) -> Result<GradCheck> {
    let a = randn(&[3, 8], rng);
    let b = randn(&[1, 8], rng);
    let r = randn(&[4, 8], rng);
    let parts = split_channels(&r, &[3, 1])?;
    let analytic: Vec<f64> = parts.iter().flat_map(|t| t.data().to_vec()).collect();
    let theta: Vec<f64> = a.data().iter().chain(b.data()).copied().collect();
    let err = grad_check(
        |t| {
            let a = Tensor::new(&[3, 8], t[..24].to_vec()).unwrap();
            let b = Tensor::new(&[1, 8], t[24..].to_vec()).unwrap();
            probe(&concat_channels(&[&a, &b]).unwrap(), &r)
        },
        &theta,
        &analytic,
        EPS,
    )?;
    Ok(check("concat", LAYER_TOLERANCE, err))
}

fn head_check(rng: &mut Rng) -> Result<GradCheck> {
    let p = with_random_bias(ConvParams::init(5, 1, 1, 1, rng)?, rng);
    let x = randn(&[5, 12], rng);
    let r = randn(&[1, 12], rng);
    let (_, gp) = conv1d_backward(&x, &p, PaddingMode::Symmetric, &r)?;
    let analytic: Vec<f64> = gp.tensors().iter().flat_map(|t| t.data().to_vec()).collect();
    let err = grad_check(
        |t| probe(&conv1d_forward(&x, &conv_from_flat(&p, t), PaddingMode::Symmetric).unwrap(), &r),
        &conv_params_flat(&p),
        &analytic,
        EPS,
    )?;
    Ok(check("linear head (1x1)", LAYER_TOLERANCE, err))
}

fn mse_check(rng: &mut Rng) -> Result<GradCheck> {
    let pred = randn(&[1, 15], rng);
    let target = randn(&[1, 15], rng);
    let (_, g) = mse_loss(&pred, &target)?;
    let err = grad_check(
        |t| mse_loss(&Tensor::new(&[1, 15], t.to_vec()).unwrap(), &target).unwrap().0,
        pred.data(),
        g.data(),
        EPS,
    )?;
    Ok(check("mse", LAYER_TOLERANCE, err))
}

fn block_check(mode: PaddingMode, rng: &mut Rng) -> Result<GradCheck> {
    let tag = format!("{mode:?}").to_lowercase();
    let mut b = BlockParams::init(2, 3, 3, 2, rng)?;
    b.conv1 = with_random_bias(b.conv1, rng);
    b.conv2 = with_random_bias(b.conv2, rng);
    let x = randn(&[2, 9], rng);
    let r = randn(&[3, 9], rng);
    let mut cursor = DropoutCursor {
        source: Dropout::Sample { p: 0.25, rng },
        next: 0,
    };
    let (_, cache) = block_forward_cached(&x, &b, mode, &mut cursor)?;
    let masks: Vec<Tensor> = [cache.mask1.clone(), cache.mask2.clone()].into_iter().flatten().collect();
    let (gx, g) = block_backward(&b, mode, &cache, &r)?;

    let eval = |b: &BlockParams, x: &Tensor| {
        let mut cursor = DropoutCursor {
            source: Dropout::Frozen(&masks),
            next: 0,
        };
        probe(&block_forward_cached(x, b, mode, &mut cursor).unwrap().0, &r)
    };
    let mut worst = grad_check(
        |t| eval(&b, &Tensor::new(&[2, 9], t.to_vec()).unwrap()),
        x.data(),
        gx.data(),
        EPS,
    )?;
    let theta: Vec<f64> = [&b.conv1, &b.conv2]
        .into_iter()
        .chain(b.skip.as_ref())
        .flat_map(conv_params_flat)
        .collect();
    let analytic: Vec<f64> = [&g.conv1, &g.conv2]
        .into_iter()
        .chain(g.skip.as_ref())
        .flat_map(|c| c.tensors().iter().flat_map(|t| t.data().to_vec()).collect::<Vec<_>>())
        .collect();
    worst = worst.max(grad_check(
        |t| {
            let n1 = b.conv1.parameter_count();
            let n2 = b.conv2.parameter_count();
            let mut q = b.clone();
            q.conv1 = conv_from_flat(&b.conv1, &t[..n1]);
            q.conv2 = conv_from_flat(&b.conv2, &t[n1..n1 + n2]);
            if let Some(s) = &b.skip {
                q.skip = Some(conv_from_flat(s, &t[n1 + n2..]));
            }
            eval(&q, &x)
        },
        &theta,
        &analytic,
        EPS,
    )?);
    Ok(check(format!("temporal block {tag}"), LAYER_TOLERANCE, worst))
}

fn model_check(mode: PaddingMode, rng: &mut Rng) -> Result<GradCheck> {
    let tag = format!("{mode:?}").to_lowercase();
    let config = TcnConfig {
        kernel: 3,
        dropout_p: 0.3,
        channels: vec![3, 3, 2],
        dilations: vec![1, 2, 4],
        padding: mode,
        init: InitScheme::He,
    };
    let mut p = ModelParams::init(&config, rng)?;
    for conv in p.convs_mut() {
        conv.bias = Tensor::randn(conv.bias.shape(), rng, 0.0, 0.3)?;
    }
    let x = randn(&[1, 24], rng);
    let r = randn(&[1, 24], rng);
    let (_, cache) = forward_cached(&x, &p, &config, Dropout::Sample { p: 0.3, rng })?;
    let masks = cache.masks();
    let (g, gx) = backward(&p, &config, &cache, &r)?;

    let params_err = grad_check(
        |t| {
            let mut q = p.clone();
            q.set_flat(t).unwrap();
            probe(&forward_cached(&x, &q, &config, Dropout::Frozen(&masks)).unwrap().0, &r)
        },
        &p.to_flat(),
        &g.to_flat(),
        EPS,
    )?;
    let input_err = grad_check(
        |t| {
            let xi = Tensor::new(&[1, 24], t.to_vec()).unwrap();
            probe(&forward_cached(&xi, &p, &config, Dropout::Frozen(&masks)).unwrap().0, &r)
        },
        x.data(),
        gx.data(),
        EPS,
    )?;
    Ok(check(format!("full model {tag}"), MODEL_TOLERANCE, params_err.max(input_err)))
}

/// Runs every check with inputs drawn from `seed`.
pub fn gradient_suite(seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = Rng::new(seed);
    let mut out = Vec::new();
    for mode in [PaddingMode::Symmetric, PaddingMode::Causal] {
        out.extend(conv_checks(mode, &mut rng)?);
    }
    out.push(relu_check(&mut rng)?);
    out.push(dropout_check(&mut rng)?);
    out.push(concat_check(&mut rng)?);
    out.push(head_check(&mut rng)?);
    out.push(mse_check(&mut rng)?);
    for mode in [PaddingMode::Symmetric, PaddingMode::Causal] {
        out.push(block_check(mode, &mut rng)?);
    }
    for mode in [PaddingMode::Symmetric, PaddingMode::Causal] {
        out.push(model_check(mode, &mut rng)?);
    }
    Ok(out)
}
