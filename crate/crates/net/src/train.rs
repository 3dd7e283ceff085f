//! Mini-batch training with Adam and early stopping on validation loss.

use crate::error::{shape_err, NetError, Result};
use crate::graph::ModelGraph;
use crate::ops;
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::par::Exec;
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Consecutive non-improving epochs tolerated before stopping.
    pub patience: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub restore_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 50,
            batch_size: 32,
            patience: 5,
            learning_rate: 1e-3,
            seed: 42,
            restore_best: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NetError::InvalidConfig(m.to_string()));
        if self.max_epochs == 0 || self.batch_size == 0 || self.patience == 0 {
            return bad("max_epochs, batch_size and patience must be positive");
        }
        if self.patience > self.max_epochs {
            return bad("patience must not exceed max_epochs");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }
}

/// Tracks the best validation loss and how long ago it was seen.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            since_best: 0,
        }
    }

    /// Records one epoch; returns true when it is a strict improvement.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> bool {
        let improved = match self.best {
            None => !val_loss.is_nan(),
            Some((_, b)) => val_loss < b,
        };
        if improved {
            self.best = Some((epoch, val_loss));
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        improved
    }

    pub fn should_stop(&self) -> bool {
        self.since_best >= self.patience
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }
}

/// Epoch driver shared by [`train`] and custom loops: calls `run_epoch` for
/// epochs `1..=max_epochs`, stops once validation loss has not improved for
/// `patience` epochs, and restores the best epoch's parameters when asked.
pub fn fit_with<F>(model: &mut ModelGraph, cfg: &TrainConfig, mut run_epoch: F) -> Result<TrainHistory>
where
    F: FnMut(&mut ModelGraph, usize) -> Result<EpochRecord>,
{
    cfg.validate()?;
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_params = None;
    let mut epochs = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let record = run_epoch(model, epoch)?;
        if stopper.observe(epoch, record.val_loss) && cfg.restore_best {
            best_params = Some(model.params().clone());
        }
        epochs.push(record);
        if stopper.should_stop() {
            break;
        }
    }
    if let Some(p) = best_params {
        *model.params_mut() = p;
    }
    Ok(TrainHistory {
        stopped_epoch: epochs.len(),
        best_epoch: stopper.best_epoch().unwrap_or(1),
        epochs,
    })
}

/// Flat storage of equally shaped samples with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSet {
    sample_shape: [usize; 3],
    inputs: Vec<f64>,
    labels: Vec<usize>,
}

impl TensorSet {
    pub fn new(sample_shape: [usize; 3], inputs: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        let per: usize = sample_shape.iter().product();
        if per == 0 || inputs.len() != per * labels.len() {
            return shape_err(format!(
                "{} values for {} samples of shape {sample_shape:?}",
                inputs.len(),
                labels.len()
            ));
        }
        Ok(Self {
            sample_shape,
            inputs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_shape(&self) -> [usize; 3] {
        self.sample_shape
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let per: usize = self.sample_shape.iter().product();
        &self.inputs[i * per..(i + 1) * per]
    }

    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let [c, h, w] = self.sample_shape;
        let mut data = Vec::with_capacity(indices.len() * c * h * w);
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        let t = Tensor::new(vec![indices.len(), c, h, w], data).expect("consistent batch");
        (t, indices.iter().map(|&i| self.labels[i]).collect())
    }
}

/// First index of the maximum.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

pub fn evaluate(model: &ModelGraph, set: &TensorSet, exec: Exec) -> Result<Evaluation> {
    if set.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let k = model.num_classes();
    let mut loss = 0.0;
    let mut correct = 0usize;
    let all: Vec<usize> = (0..set.len()).collect();
    for chunk in all.chunks(256) {
        let (x, labels) = set.batch(chunk);
        let probs = model.predict(&x, exec)?;
        loss += ops::scce_loss(&probs, &labels)? * chunk.len() as f64;
        correct += probs
            .data()
            .chunks(k)
            .zip(&labels)
            .filter(|(row, &y)| argmax(row) == y)
            .count();
    }
    Ok(Evaluation {
        loss: loss / set.len() as f64,
        accuracy: correct as f64 / set.len() as f64,
    })
}

fn check_set(model: &ModelGraph, set: &TensorSet, name: &str) -> Result<()> {
    if set.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    if set.sample_shape() != model.input_shape() {
        return shape_err(format!(
            "{name} samples are {:?}, model expects {:?}",
            set.sample_shape(),
            model.input_shape()
        ));
    }
    if let Some(&label) = set.labels().iter().find(|&&l| l >= model.num_classes()) {
        return Err(NetError::LabelOutOfRange {
            label,
            classes: model.num_classes(),
        });
    }
    Ok(())
}

/// Trains with the default execution policy.
pub fn train(
    model: ModelGraph,
    train_set: &TensorSet,
    val_set: &TensorSet,
    cfg: &TrainConfig,
) -> Result<(ModelGraph, TrainHistory)> {
    train_with(model, train_set, val_set, cfg, Exec::default())
}

pub fn train_with(
    model: ModelGraph,
    train_set: &TensorSet,
    val_set: &TensorSet,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<(ModelGraph, TrainHistory)> {
    train_observed(model, train_set, val_set, cfg, exec, |_| {})
}

/// [`train_with`] that reports each finished epoch to `on_epoch`.
pub fn train_observed(
    mut model: ModelGraph,
    train_set: &TensorSet,
    val_set: &TensorSet,
    cfg: &TrainConfig,
    exec: Exec,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelGraph, TrainHistory)> {
    check_set(&model, train_set, "training")?;
    check_set(&model, val_set, "validation")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let adam = AdamConfig::with_lr(cfg.learning_rate);
    let mut state = AdamState::new(model.params());
    let history = fit_with(&mut model, cfg, |model, epoch| {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, labels) = train_set.batch(chunk);
            let (loss, grads) = model.batch_gradients(&x, &labels, exec)?;
            adam_step(model.params_mut(), &grads, &mut state, &adam)?;
            total += loss * chunk.len() as f64;
        }
        let eval = evaluate(model, val_set, exec)?;
        let record = EpochRecord {
            epoch,
            train_loss: total / train_set.len() as f64,
            val_loss: eval.loss,
            val_accuracy: eval.accuracy,
        };
        on_epoch(&record);
        Ok(record)
    })?;
    Ok((model, history))
}
