//! Mini-batch training with seeded shuffling, Adam and early stopping on
//! validation loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{NnError, Result};
use crate::exec::Exec;
use crate::loss::LossKind;
use crate::params::{Grads, ModelParams};
use crate::real::Real;

/// Samples per gradient chunk. Batches are split into chunks of this size and
/// the chunk gradients are summed in chunk order, so results do not depend on
/// the number of threads.
pub const CHUNK_SIZE: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub early_stopping_patience: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            max_epochs: 2000,
            early_stopping_patience: 100,
            batch_size: 512,
            dropout_rate: 0.2,
            loss: LossKind::CrossEntropy,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(NnError::Parameter(msg.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if self.max_epochs == 0 || self.early_stopping_patience == 0 || self.batch_size == 0 {
            return bad("epochs, patience and batch size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout rate must lie in [0, 1)");
        }
        Ok(())
    }
}

/// A model the training loop can drive.
pub trait Network<T: Real>: Sync {
    type Sample: Sync;

    fn params(&self) -> &ModelParams<T>;
    fn params_mut(&mut self) -> &mut ModelParams<T>;
    fn loss_kind(&self) -> LossKind;

    /// Training-mode forward and backward pass over `samples`. Returns the sum
    /// of per-sample losses and adds `scale ·` its gradient into `grads`.
    fn train_chunk(
        &self,
        samples: &[&Self::Sample],
        scale: f64,
        grads: &mut Grads<T>,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64>;

    /// Evaluation-mode sum of per-sample losses.
    fn eval_chunk(&self, samples: &[&Self::Sample]) -> Result<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    NoImprovement,
    Stop,
}

/// Patience counter on a strictly decreasing validation loss.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, best_epoch: 0, since_best: 0 }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> Verdict {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.since_best = 0;
            Verdict::Improved
        } else {
            self.since_best += 1;
            if self.since_best >= self.patience {
                Verdict::Stop
            } else {
                Verdict::NoImprovement
            }
        }
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn chunk_seed(seed: u64, epoch: usize, batch: usize, chunk: usize) -> u64 {
    mix(mix(mix(seed ^ 0xD1B5_4A32_D192_ED03) ^ epoch as u64) ^ ((batch as u64) << 20 | chunk as u64))
}

/// Mean evaluation-mode loss over `samples`.
pub fn evaluate_loss<T: Real, N: Network<T>>(
    net: &N,
    samples: &[N::Sample],
    exec: Exec,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(NnError::Parameter("empty evaluation set".into()));
    }
    let refs: Vec<&N::Sample> = samples.iter().collect();
    let chunks: Vec<&[&N::Sample]> = refs.chunks(CHUNK_SIZE).collect();
    let sums = exec.map(&chunks, |_, c| net.eval_chunk(c));
    let mut total = 0.0;
    for s in sums {
        total += s?;
    }
    Ok(total / samples.len() as f64)
}

/// Runs one epoch of mini-batch updates and returns the mean training loss.
fn run_epoch<T: Real, N: Network<T>>(
    net: &mut N,
    train: &[N::Sample],
    order: &[usize],
    cfg: &TrainConfig,
    epoch: usize,
    exec: Exec,
) -> Result<f64> {
    let mut total = 0.0;
    for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
        let samples: Vec<&N::Sample> = batch.iter().map(|&i| &train[i]).collect();
        let scale = 1.0 / samples.len() as f64;
        let chunks: Vec<&[&N::Sample]> = samples.chunks(CHUNK_SIZE).collect();
        let model: &N = net;
        let results = exec.map(&chunks, |ci, chunk| {
            let mut grads = Grads::zeros_like(model.params());
            let mut rng = ChaCha8Rng::seed_from_u64(chunk_seed(cfg.seed, epoch, batch_idx, ci));
            model.train_chunk(chunk, scale, &mut grads, &mut rng).map(|loss| (loss, grads))
        });
        let mut sum: Option<Grads<T>> = None;
        for r in results {
            let (loss, grads) = r?;
            total += loss;
            match sum.as_mut() {
                None => sum = Some(grads),
                Some(acc) => acc.add_assign(&grads),
            }
        }
        let grads = sum.expect("batch is nonempty");
        grads.check_finite()?;
        net.params_mut().adam_step(&grads, cfg.learning_rate)?;
    }
    Ok(total / train.len() as f64)
}

/// Trains `net` and leaves it holding the parameters with the best validation
/// loss.
pub fn train<T: Real, N: Network<T>>(
    net: &mut N,
    train: &[N::Sample],
    val: &[N::Sample],
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<TrainOutcome> {
    train_with_progress(net, train, val, cfg, exec, |_| {})
}

pub fn train_with_progress<T: Real, N: Network<T>>(
    net: &mut N,
    train: &[N::Sample],
    val: &[N::Sample],
    cfg: &TrainConfig,
    exec: Exec,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(NnError::Parameter("training and validation sets must be nonempty".into()));
    }
    if net.loss_kind() != cfg.loss {
        return Err(NnError::Parameter(format!(
            "configured loss {:?} does not match the model's {:?}",
            cfg.loss,
            net.loss_kind()
        )));
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopper = EarlyStopping::new(cfg.early_stopping_patience);
    let mut best = net.params().snapshot();
    let mut history = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let train_loss = run_epoch(net, train, &order, cfg, epoch, exec)?;
        let val_loss = evaluate_loss(net, val, exec)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(NnError::NumericFault { op: "training loss", index: epoch });
        }
        let record = EpochRecord { epoch, train_loss, val_loss };
        on_epoch(&record);
        history.push(record);
        match stopper.observe(epoch, val_loss) {
            Verdict::Improved => best = net.params().snapshot(),
            Verdict::NoImprovement => {}
            Verdict::Stop => {
                stopped_early = true;
                break;
            }
        }
    }
    net.params_mut().restore(best);
    let (best_epoch, best_val_loss) = stopper.best();
    Ok(TrainOutcome { history, best_epoch, best_val_loss, stopped_early })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patience_counts_epochs_since_last_improvement() {
        let mut stop = EarlyStopping::new(100);
        let mut stopped_at = None;
        for epoch in 1..=1000 {
            let loss = if epoch <= 150 { 1.0 / epoch as f64 } else { 1.0 / 150.0 };
            if stop.observe(epoch, loss) == Verdict::Stop {
                stopped_at = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped_at, Some(250));
        assert_eq!(stop.best().0, 150);
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.dropout_rate = 1.0;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig { batch_size: 0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        cfg = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(cfg.validate().is_ok());
    }
}
