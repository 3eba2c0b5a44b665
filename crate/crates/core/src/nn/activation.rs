use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    out.data_mut().iter_mut().for_each(|x| *x = x.max(0.0));
    out
}

/// Passes `upstream` where `input > 0`; the subgradient at exactly 0 is 0.
pub fn relu_backward(input: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    upstream.expect_shape(input.shape())?;
    let mut g = upstream.clone();
    for (gv, &x) in g.data_mut().iter_mut().zip(input.data()) {
        if x <= 0.0 {
            *gv = 0.0;
        }
    }
    Ok(g)
}

/// Inverted dropout. In training mode each element is kept with probability
/// `1 - p` and scaled by `1 / (1 - p)`; the returned mask holds that
/// per-element factor (0 or `1 / (1 - p)`). In inference mode the input is
/// returned unchanged with an all-ones mask and `rng` is not touched.
pub fn dropout(input: &Tensor, p: f64, rng: &mut Rng, training: bool) -> Result<(Tensor, Tensor)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout probability {p} outside [0, 1)")));
    }
    if !training || p == 0.0 {
        return Ok((input.clone(), Tensor::full(input.shape(), 1.0)?));
    }
    let keep = 1.0 / (1.0 - p);
    let mut mask = input.zeros_like();
    for m in mask.data_mut() {
        *m = if rng.next_f64() < p { 0.0 } else { keep };
    }
    let mut out = input.clone();
    for (o, &m) in out.data_mut().iter_mut().zip(mask.data()) {
        *o *= m;
    }
    Ok((out, mask))
}

/// Dropout is linear given its mask, so the backward pass is the same product.
pub fn dropout_backward(mask: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    upstream.expect_shape(mask.shape())?;
    let mut g = upstream.clone();
    for (gv, &m) in g.data_mut().iter_mut().zip(mask.data()) {
        *gv *= m;
    }
    Ok(g)
}

/// Stacks `[C_i, L]` tensors along the channel axis, in order.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
    let len = first.shape().get(1).copied().unwrap_or(0);
    let mut channels = 0;
    let mut data = Vec::new();
    for p in parts {
        if p.rank() != 2 || p.shape()[1] != len {
            return Err(Error::Shape {
                expected: vec![p.shape()[0], len],
                actual: p.shape().to_vec(),
            });
        }
        channels += p.shape()[0];
        data.extend_from_slice(p.data());
    }
    Tensor::new(&[channels, len], data)
}

/// Backward of [`concat_channels`]: splits a `[sum C_i, L]` gradient.
pub fn split_channels(upstream: &Tensor, channels: &[usize]) -> Result<Vec<Tensor>> {
    let total: usize = channels.iter().sum();
    if upstream.rank() != 2 || upstream.shape()[0] != total {
        return Err(Error::Shape {
            expected: vec![total, upstream.shape().last().copied().unwrap_or(0)],
            actual: upstream.shape().to_vec(),
        });
    }
    let mut start = 0;
    channels
        .iter()
        .map(|&c| {
            let t = upstream.slice_rows(start, start + c);
            start += c;
            t
        })
        .collect()
}
