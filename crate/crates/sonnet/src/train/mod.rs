//! Training, evaluation, cross-validation, and feature knockouts.
//!
//! [`train_model`] runs mini-batch gradient descent (Adam for the networks,
//! plain SGD for the linear baseline) with early stopping on validation
//! loss and best-epoch weight restore. [`run_loso`] holds out one session
//! per fold and reports the unweighted mean of per-fold metrics — the
//! honest estimate for "how would this do on a diner we have never seen".
//! [`ablation`] removes whole feature groups (pose, gaze/head, speaking,
//! bite history) from the windows so their contribution can be measured.

pub mod ablation;
mod loso;
mod metrics;

pub use ablation::{
    mask_windows, masked_model_spec, run_ablation, write_ablation_csv, AblationRow, FeatureMask,
};
pub use loso::{derive_seed, run_loso, CvReport, FoldResult};
pub use metrics::{Confusion, MetricSummary, DECISION_THRESHOLD};

use crate::features::LabeledWindow;
use crate::model::{assemble_batch, Adam, BiteModel, ModelError, ModelKind, Optimizer, Sgd};
use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training windows")]
    EmptyTrainingSet,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Knobs of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping. Ignored when
    /// there is no validation split.
    pub patience: usize,
    /// Seed for the per-epoch shuffle.
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 128,
            max_epochs: 200,
            patience: 10,
            shuffle_seed: 0,
        }
    }
}

/// One epoch's losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Evaluation-mode cross-entropy on the validation split; NaN-free and
    /// absent when no validation windows were supplied.
    pub val_loss: Option<f64>,
}

/// What a training run did.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// Epoch whose weights the model ended up with (1-based; 0 when never
    /// validated).
    pub best_epoch: usize,
    pub best_val_loss: Option<f64>,
    pub stopped_early: bool,
}

/// Picks the optimizer a model family trains with.
fn optimizer_for(kind: ModelKind, lr: f64) -> Option<Optimizer> {
    match kind {
        ModelKind::TripletSonnet
        | ModelKind::CoupletSonnet
        | ModelKind::TripletTcn
        | ModelKind::CoupletTcn => Some(Optimizer::Adam(Adam::new(lr))),
        ModelKind::Linear => Some(Optimizer::Sgd(Sgd::new(lr))),
        ModelKind::AlwaysFeed => None,
    }
}

/// Evaluation-mode binary cross-entropy of predicted probabilities.
fn probability_loss(scores: &Array1<f64>, targets: &Array1<f64>) -> f64 {
    let n = scores.len().max(1) as f64;
    scores
        .iter()
        .zip(targets.iter())
        .map(|(&p, &y)| {
            let p = p.clamp(1e-12, 1.0 - 1e-12);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / n
}

/// Scores windows in evaluation mode, batching to bound memory.
pub fn score_windows(
    model: &dyn BiteModel,
    windows: &[&LabeledWindow],
) -> Result<(Array1<f64>, Array1<f64>), TrainError> {
    let bite_rows = model.spec().bite_rows;
    let mut scores = Vec::with_capacity(windows.len());
    let mut targets = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(256) {
        let (batch, labels) = assemble_batch(chunk, bite_rows);
        scores.extend(model.predict(&batch)?.into_iter());
        targets.extend(labels.into_iter());
    }
    Ok((Array1::from(scores), Array1::from(targets)))
}

/// Thresholded evaluation over windows.
pub fn evaluate(
    model: &dyn BiteModel,
    windows: &[&LabeledWindow],
) -> Result<Confusion, TrainError> {
    let (scores, targets) = score_windows(model, windows)?;
    Ok(Confusion::from_scores(&scores, &targets))
}

/// Trains `model` in place.
///
/// Every epoch shuffles the training windows (seeded, so runs are exactly
/// repeatable), walks them in `batch_size` chunks, and applies one
/// optimizer step per chunk. With a validation split, training stops once
/// `patience` epochs pass without a new best validation loss, and the
/// best epoch's weights are restored before returning.
pub fn train_model(
    model: &mut dyn BiteModel,
    train: &[&LabeledWindow],
    val: &[&LabeledWindow],
    cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let mut optimizer = optimizer_for(model.spec().kind, cfg.learning_rate);
    let bite_rows = model.spec().bite_rows;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_state: Option<Vec<(String, Vec<f64>)>> = None;
    let mut since_best = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let refs: Vec<&LabeledWindow> = chunk.iter().map(|&i| train[i]).collect();
            let (batch, labels) = assemble_batch(&refs, bite_rows);
            loss_sum += model.train_batch(&batch, &labels)?;
            if let Some(opt) = optimizer.as_mut() {
                opt.step(model);
            }
            batches += 1;
        }
        let train_loss = loss_sum / batches.max(1) as f64;

        let val_loss = if val.is_empty() {
            None
        } else {
            let (scores, targets) = score_windows(model, val)?;
            Some(probability_loss(&scores, &targets))
        };
        history.push(EpochRecord { epoch, train_loss, val_loss });

        if let Some(v) = val_loss {
            if v < best_val {
                best_val = v;
                best_epoch = epoch;
                best_state = Some(model.state());
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    if let Some(state) = best_state {
        model.load_state(&state)?;
    }
    Ok(TrainReport {
        history,
        best_epoch,
        best_val_loss: if best_val.is_finite() { Some(best_val) } else { None },
        stopped_early,
    })
}

/// Splits one session's windows into train/validation: the last fifth (by
/// anchor order) validates, the rest trains. Sessions with fewer than five
/// windows contribute no validation windows.
pub fn session_val_split<'w>(
    windows: &'w [LabeledWindow],
) -> (Vec<&'w LabeledWindow>, Vec<&'w LabeledWindow>) {
    let n_val = windows.len() / 5;
    let cut = windows.len() - n_val;
    let train = windows[..cut].iter().collect();
    let val = windows[cut..].iter().collect();
    (train, val)
}
