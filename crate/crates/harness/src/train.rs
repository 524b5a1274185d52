//! Mini-batch training with early stopping on validation loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use weakchem_core::tensornet::{loss_bce_masked, loss_mse, rmsprop_step, TrainConfig};
use weakchem_core::{Model, Scalar, Tensor};

use crate::error::Result;
use crate::features::{Encoded, Featurizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    BceMasked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best validation loss; stops `patience` epochs after it.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    since: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            since: 0,
        }
    }

    /// Epochs are 1-based.
    pub fn update(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.since = 0;
            return StopDecision::Improved;
        }
        self.since += 1;
        if self.since >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

/// Encoded inputs with per-row targets and presence masks.
pub struct TrainData<'a> {
    pub featurizer: &'a Featurizer,
    pub items: &'a [Encoded],
    pub targets: &'a [Vec<f64>],
    pub masks: &'a [Vec<bool>],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome<S> {
    /// Parameters from the best validation epoch.
    pub model: Model<S>,
    pub history: Vec<EpochLog>,
    pub initial_val_loss: f64,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub epochs_trained: usize,
}

fn batch_targets<S: Scalar>(data: &TrainData, idx: &[usize]) -> Result<(Tensor<S>, Vec<bool>)> {
    let width = data.targets[idx[0]].len();
    let mut t = Vec::with_capacity(idx.len() * width);
    let mut m = Vec::with_capacity(idx.len() * width);
    for &i in idx {
        t.extend(data.targets[i].iter().map(|&v| S::of(v)));
        m.extend_from_slice(&data.masks[i]);
    }
    Ok((Tensor::from_vec(&[idx.len(), width], t)?, m))
}

/// Model outputs for the given rows, unaugmented.
pub fn predict<S: Scalar>(
    model: &Model<S>,
    data: &TrainData,
    idx: &[usize],
    batch_size: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(idx.len());
    for chunk in idx.chunks(batch_size.max(1)) {
        let items: Vec<&Encoded> = chunk.iter().map(|&i| &data.items[i]).collect();
        let x = data.featurizer.batch::<S, ChaCha8Rng>(&items, None)?;
        let y = model.predict(&x)?;
        for r in 0..chunk.len() {
            out.push(y.row(r).iter().map(|v| v.as_f64()).collect());
        }
    }
    Ok(out)
}

/// Mean loss over every present target entry of the given rows.
pub fn evaluate_loss<S: Scalar>(
    model: &Model<S>,
    data: &TrainData,
    idx: &[usize],
    loss: LossKind,
    batch_size: usize,
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in idx.chunks(batch_size.max(1)) {
        let items: Vec<&Encoded> = chunk.iter().map(|&i| &data.items[i]).collect();
        let x = data.featurizer.batch::<S, ChaCha8Rng>(&items, None)?;
        let y = model.predict(&x)?;
        let (t, m) = batch_targets::<S>(data, chunk)?;
        let present = match loss {
            LossKind::Mse => m.len(),
            LossKind::BceMasked => m.iter().filter(|&&b| b).count(),
        };
        if present == 0 {
            continue;
        }
        let value = match loss {
            LossKind::Mse => loss_mse(&y, &t)?.value,
            LossKind::BceMasked => loss_bce_masked(&y, &t, &m)?.value,
        };
        total += value.as_f64() * present as f64;
        count += present;
    }
    Ok(if count == 0 { f64::NAN } else { total / count as f64 })
}

/// Trains `model` on `train` (which may repeat rows) and keeps the
/// parameters of the epoch with the lowest validation loss.
pub fn fit<S: Scalar>(
    mut model: Model<S>,
    data: &TrainData,
    train: &[usize],
    val: &[usize],
    loss: LossKind,
    cfg: &TrainConfig,
    augment: bool,
) -> Result<FitOutcome<S>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let initial_val_loss = evaluate_loss(&model, data, val, loss, cfg.batch_size)?;
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut history = Vec::new();
    let mut order = train.to_vec();
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let items: Vec<&Encoded> = chunk.iter().map(|&i| &data.items[i]).collect();
            let x = if augment {
                data.featurizer.batch::<S, _>(&items, Some(&mut rng))?
            } else {
                data.featurizer.batch::<S, ChaCha8Rng>(&items, None)?
            };
            let (t, m) = batch_targets::<S>(data, chunk)?;
            let trace = model.forward(&x)?;
            let out = match loss {
                LossKind::Mse => loss_mse(trace.output(), &t)?,
                LossKind::BceMasked => {
                    if !m.iter().any(|&b| b) {
                        continue;
                    }
                    loss_bce_masked(trace.output(), &t, &m)?
                }
            };
            let grads = model.backward_trainable(&trace, &out.grad)?;
            rmsprop_step(&mut model, &grads, cfg)?;
            sum += out.value.as_f64();
            batches += 1;
        }
        let val_loss = evaluate_loss(&model, data, val, loss, cfg.batch_size)?;
        history.push(EpochLog {
            epoch,
            train_loss: sum / batches.max(1) as f64,
            val_loss,
        });
        match stopper.update(epoch, val_loss) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    Ok(FitOutcome {
        model: best,
        epochs_trained: history.len(),
        history,
        initial_val_loss,
        best_val_loss: stopper.best,
        best_epoch: stopper.best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_patience_epochs_after_best() {
        let mut es = EarlyStopping::new(3);
        let losses = [1.0, 0.8, 0.9, 0.85, 0.79, 0.7, 0.7, 0.9, 0.75, 0.6];
        let mut stopped_at = None;
        for (i, &l) in losses.iter().enumerate() {
            if es.update(i + 1, l) == StopDecision::Stop {
                stopped_at = Some(i + 1);
                break;
            }
        }
        assert_eq!(es.best_epoch, 6);
        assert_eq!(stopped_at, Some(9));
    }

    #[test]
    fn stagnant_loss() {
        let mut es = EarlyStopping::new(10);
        let mut stop = 0;
        for epoch in 1..=50 {
            let l = if epoch <= 4 { 1.0 / epoch as f64 } else { 0.5 };
            if es.update(epoch, l) == StopDecision::Stop {
                stop = epoch;
                break;
            }
        }
        assert_eq!(es.best_epoch, 4);
        assert_eq!(stop, 14);
    }
}
