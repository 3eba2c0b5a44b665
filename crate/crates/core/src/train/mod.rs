//! Full-batch training, inference over whole sections and checkpoints.
//!
//! Each epoch runs every training trace forward in training mode, averages
//! the per-trace MSE, back-propagates that mean and takes one Adam step.
//! Dropout masks for epoch `e`, trace ordinal `k` come from a stream keyed by
//! `(seed, e, k)`, and model initialization from a stream keyed by `seed`, so
//! a run is a pure function of the training traces and the config.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Section, TraceDataset};
use crate::error::{Error, Result};
use crate::nn::mse_loss;
use crate::optim::{Adam, AdamConfig};
use crate::rng::Rng;
use crate::tcn::{backward, forward_cached, predict_trace, Dropout, ModelGrads, ModelParams, TcnConfig};
use crate::tensor::Tensor;

const INIT_STREAM: u64 = 0;
const DROPOUT_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub model: TcnConfig,
}

impl Default for TrainConfig {
    /// lr 0.001, weight decay 0.0001, 2941 epochs, default [`TcnConfig`].
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            weight_decay: 1e-4,
            epochs: 2941,
            seed: 0,
            model: TcnConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epochs < 1 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need lr > 0 and weight decay >= 0 (lr {}, wd {})",
                self.lr, self.weight_decay
            )));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig::new(self.lr, self.weight_decay)
    }
}

/// Initial parameters of a run with `config`.
pub fn initial_params(config: &TrainConfig) -> Result<ModelParams> {
    ModelParams::init(&config.model, &mut Rng::keyed(config.seed, &[INIT_STREAM]))
}

/// Mean training loss over `pairs` and the gradient of that mean, with
/// dropout masks drawn for `epoch`.
pub fn epoch_gradient(
    params: &ModelParams,
    config: &TrainConfig,
    pairs: &[(Tensor, Tensor)],
    epoch: usize,
) -> Result<(f64, ModelGrads)> {
    let n = pairs.len() as f64;
    let mut total = ModelGrads::zeros_for(params);
    let mut loss_sum = 0.0;
    for (k, (x, y)) in pairs.iter().enumerate() {
        let diverged = |e: Error| match e {
            Error::NonFinite(_) => Error::Diverged { epoch, trace: k },
            other => other,
        };
        let mut rng = Rng::keyed(config.seed, &[DROPOUT_STREAM, epoch as u64, k as u64]);
        let dropout = Dropout::Sample {
            p: config.model.dropout_p,
            rng: &mut rng,
        };
        let (pred, cache) = forward_cached(x, params, &config.model, dropout).map_err(diverged)?;
        let (loss, grad) = mse_loss(&pred, y)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, trace: k });
        }
        loss_sum += loss;
        let (g, _) = backward(params, &config.model, &cache, &grad.scale(1.0 / n)).map_err(diverged)?;
        total.add_assign(&g)?;
    }
    Ok((loss_sum / n, total))
}

/// Trains on the dataset's training traces; validation traces are never read.
pub fn train(dataset: &TraceDataset, config: &TrainConfig) -> Result<Checkpoint> {
    train_with_progress(dataset, config, |_, _| {})
}

/// [`train`] with a callback receiving `(epoch, mean loss)` after each epoch.
pub fn train_with_progress(
    dataset: &TraceDataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Checkpoint> {
    config.validate()?;
    let pairs = dataset.training_pairs();
    let mut params = initial_params(config)?;
    let mut adam = Adam::new(config.adam(), &params.tensors());
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, grads) = epoch_gradient(&params, config, &pairs, epoch)?;
        adam.step(params.tensors_mut(), grads.tensors())
            .map_err(|_| Error::Diverged { epoch, trace: 0 })?;
        for t in params.tensors() {
            t.check_finite("parameter update")
                .map_err(|_| Error::Diverged { epoch, trace: 0 })?;
        }
        history.push(loss);
        on_epoch(epoch, loss);
    }
    Ok(Checkpoint {
        config: config.model.clone(),
        params,
        stats: *dataset.stats(),
        history,
        seed: config.seed,
    })
}

/// `epoch,loss` CSV with a header row; epochs count from 0.
pub fn history_csv(history: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (e, l) in history.iter().enumerate() {
        s.push_str(&format!("{e},{l}\n"));
    }
    s
}

pub fn write_history_csv(path: impl AsRef<std::path::Path>, history: &[f64]) -> Result<()> {
    std::fs::write(path, history_csv(history))?;
    Ok(())
}

/// Inference on every trace of `seismic`, in impedance units.
///
/// `threads > 1` spreads traces over a thread pool; each trace is computed
/// by the same serial code, so the result does not depend on `threads`.
/// Predictions are not forced positive, hence a plain [`Section`].
pub fn predict_section(seismic: &Section, checkpoint: &Checkpoint, threads: usize) -> Result<Section> {
    checkpoint.params.check_matches(&checkpoint.config)?;
    let stats = &checkpoint.stats;
    let one = |i: usize| -> Result<Vec<f64>> {
        let x = stats.seismic.normalize(&seismic.trace_tensor(i));
        let y = predict_trace(&x, &checkpoint.params, &checkpoint.config)?;
        Ok(stats.impedance.denormalize(&y).into_data())
    };
    let n = seismic.n_traces();
    let rows: Vec<Vec<f64>> = if threads <= 1 {
        (0..n).map(one).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| (0..n).into_par_iter().map(one).collect::<Result<_>>())?
    };
    Section::new(Tensor::from_rows(&rows)?, seismic.trace_spacing_m, seismic.sample_interval)
}
