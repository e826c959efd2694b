//! Teacher-forced mini-batch training with Adam.

use ndarray::{Array2, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{batch_loss_and_gradients, LstmParameters};
use super::vocab::TokenSequence;
use crate::error::{Error, Result};

/// Learning rate used for the published runs.
pub const PAPER_LEARNING_RATE: f64 = 1e-5;
pub const PAPER_HIDDEN_SIZE: usize = 1024;
pub const DESK_HIDDEN_SIZE: usize = 128;

/// Relative improvement an epoch must achieve to reset the plateau counter.
pub const PLATEAU_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub plateau_patience: usize,
    pub rng_seed: u64,
    pub hidden_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: PAPER_LEARNING_RATE,
            batch_size: 64,
            max_epochs: 100,
            plateau_patience: 5,
            rng_seed: 0,
            hidden_size: DESK_HIDDEN_SIZE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be ≥ 1".into()));
        }
        if self.hidden_size == 0 {
            return Err(Error::ZeroHiddenSize);
        }
        Ok(())
    }
}

/// Adam with PyTorch defaults (β₁ = 0.9, β₂ = 0.999, ε = 1e-8, no weight decay).
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: LstmParameters,
    v: LstmParameters,
}

impl Adam {
    pub fn new(params: &LstmParameters, lr: f64) -> Self {
        let zeros = LstmParameters::zeros(params.hidden_size()).expect("hidden ≥ 1");
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update(&mut self, params: &mut LstmParameters, grads: &LstmParameters) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2_sqrt = (1.0 - self.beta2.powi(self.step)).sqrt();
        let step_size = self.lr / bc1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let blocks = params
            .blocks_mut()
            .into_iter()
            .zip(grads.blocks())
            .zip(self.m.blocks_mut())
            .zip(self.v.blocks_mut());
        for (((p, g), m), v) in blocks {
            update_block(p, g, m, v, |p, g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= step_size * *m / (v.sqrt() / bc2_sqrt + eps);
            });
        }
    }
}

fn update_block(
    p: &mut Array2<f64>,
    g: &Array2<f64>,
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    f: impl Fn(&mut f64, f64, &mut f64, &mut f64),
) {
    Zip::from(p)
        .and(g)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| f(p, g, m, v));
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub trained: LstmParameters,
    /// Mean training loss of each completed epoch.
    pub loss_trace: Vec<f64>,
}

pub fn check_dataset(dataset: &[TokenSequence]) -> Result<usize> {
    let first = dataset.first().ok_or(Error::EmptyDataset)?;
    let len = first.len();
    if let Some((index, s)) = dataset.iter().enumerate().find(|(_, s)| s.len() != len) {
        return Err(Error::MixedLengths {
            expected: len,
            found: s.len(),
            index,
        });
    }
    Ok(len)
}

/// Train a copy of `params`; the input parameters are left untouched and serve
/// as the reference snapshot.
pub fn train(
    params: &LstmParameters,
    dataset: &[TokenSequence],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_progress(params, dataset, config, |_, _| {})
}

/// [`train`] with a callback invoked after every epoch with `(epoch, mean loss)`.
pub fn train_with_progress(
    params: &LstmParameters,
    dataset: &[TokenSequence],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome> {
    config.validate()?;
    check_dataset(dataset)?;
    let mut trained = params.clone();
    let mut adam = Adam::new(&trained, config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut loss_trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let seqs: Vec<&TokenSequence> = batch.iter().map(|&i| &dataset[i]).collect();
            let (loss, grads) = batch_loss_and_gradients(&trained, &seqs)?;
            adam.update(&mut trained, &grads);
            total += loss * batch.len() as f64;
        }
        let mean = total / dataset.len() as f64;
        loss_trace.push(mean);
        on_epoch(epoch, mean);
        if mean < best * (1.0 - PLATEAU_TOLERANCE) {
            best = mean;
            stale = 0;
        } else {
            stale += 1;
            if config.plateau_patience > 0 && stale >= config.plateau_patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        trained,
        loss_trace,
    })
}
