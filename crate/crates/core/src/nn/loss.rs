use crate::error::Result;
use crate::tensor::Tensor;

/// Mean squared error over all elements and its gradient with respect to
/// `pred`, `2 (pred - target) / n`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    target.expect_shape(pred.shape())?;
    let n = pred.len() as f64;
    let mut grad = pred.zeros_like();
    let mut sum = 0.0;
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        sum += d * d;
        *g = 2.0 * d / n;
    }
    Ok((sum / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use crate::rng::Rng;

    #[test]
    fn examples() {
        let t = Tensor::new(&[1, 4], vec![1.0, 2.0, -3.0, 0.5]).unwrap();
        assert_eq!(mse_loss(&t, &t).unwrap().0, 0.0);
        let shifted = t.map(|x| x + 0.5).unwrap();
        assert!((mse_loss(&shifted, &t).unwrap().0 - 0.25).abs() < 1e-15);
        assert!(mse_loss(&t, &Tensor::zeros(&[1, 3]).unwrap()).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::new(31);
        let target = Tensor::randn(&[1, 12], &mut rng, 0.0, 1.0).unwrap();
        let pred = Tensor::randn(&[1, 12], &mut rng, 0.0, 1.0).unwrap();
        let (_, g) = mse_loss(&pred, &target).unwrap();
        let f = |theta: &[f64]| {
            let p = Tensor::new(&[1, 12], theta.to_vec()).unwrap();
            mse_loss(&p, &target).unwrap().0
        };
        let err = grad_check(f, pred.data(), g.data(), 1e-5).unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
