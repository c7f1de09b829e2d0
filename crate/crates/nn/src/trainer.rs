//! Storm-level data splits and the mini-batch training loop.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::NnError;
use crate::models::{Architecture, ModelParameters};
use crate::optim::{clip_grad_norm, cosine_lr, AdamW, AdamWConfig};
use crate::tape::Tape;
use crate::tensor::Tensor4;

/// Learning rate for the full-size dataset.
pub const FULL_SCALE_LR: f64 = 1e-6;
/// Learning rate for desk-scale toy datasets.
pub const DESK_SCALE_LR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.8, val: 0.1, test: 0.1 }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<(), NnError> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) || ((parts.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(NnError::Config(format!(
                "split fractions {parts:?} must be non-negative and sum to 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded shuffle followed by contiguous slicing into train, val and test.
pub fn split_dataset<T: Clone>(ids: &[T], seed: u64, fractions: SplitFractions) -> Result<Split<T>, NnError> {
    fractions.validate()?;
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = shuffled.len();
    let n_train = ((n as f64 * fractions.train).round() as usize).min(n);
    let n_val = ((n as f64 * fractions.val).round() as usize).min(n - n_train);
    let test = shuffled.split_off(n_train + n_val);
    let val = shuffled.split_off(n_train);
    Ok(Split { train: shuffled, val, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr_max: f64,
    pub lr_min: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub fractions: SplitFractions,
    /// Basin code for local models; `None` trains on every basin.
    pub basin: Option<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_max: DESK_SCALE_LR,
            lr_min: 0.0,
            weight_decay: 1e-5,
            clip_norm: 1.0,
            epochs: 30,
            batch_size: 8,
            seed: 0,
            fractions: SplitFractions::default(),
            basin: None,
        }
    }
}

impl TrainConfig {
    /// Settings used for the full-size dataset.
    pub fn full_scale() -> Self {
        Self { lr_max: FULL_SCALE_LR, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        self.fractions.validate()?;
        if !(self.lr_max >= 0.0 && self.lr_min >= 0.0 && self.lr_min <= self.lr_max) {
            return Err(NnError::Config(format!(
                "learning rates must satisfy 0 <= lr_min <= lr_max, got {} and {}",
                self.lr_min, self.lr_max
            )));
        }
        if self.batch_size == 0 {
            return Err(NnError::Config("batch size must be positive".into()));
        }
        if !(self.clip_norm > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(NnError::Config("clip norm must be positive and weight decay non-negative".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// One input/target pair, each with batch size one.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub input: &'a Tensor4<f32>,
    pub target: &'a Tensor4<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    /// Optimizer steps completed at the end of the epoch.
    pub step: usize,
    /// Learning rate of the last step in the epoch.
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

pub const HISTORY_CSV_HEADER: &str = "epoch,step,lr,train_loss,val_loss";

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = format!("{HISTORY_CSV_HEADER}\n");
    for r in rows {
        let val = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", r.epoch, r.step, r.lr, r.train_loss, val).expect("write to string");
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss (training loss without a validation set).
    pub best: ModelParameters<f32>,
    pub best_epoch: usize,
    pub last: ModelParameters<f32>,
    pub history: Vec<HistoryRow>,
}

fn batch(samples: &[Sample<'_>], idx: &[usize]) -> Result<(Tensor4<f32>, Tensor4<f32>), NnError> {
    let xs: Vec<&Tensor4<f32>> = idx.iter().map(|&i| samples[i].input).collect();
    let ys: Vec<&Tensor4<f32>> = idx.iter().map(|&i| samples[i].target).collect();
    Ok((Tensor4::stack(&xs)?, Tensor4::stack(&ys)?))
}

/// Pooled mean squared error of `params` over `samples`. Parameters are not modified.
pub fn evaluate_loss(params: &ModelParameters<f32>, samples: &[Sample<'_>], batch_size: usize) -> Result<f64, NnError> {
    if samples.is_empty() {
        return Err(NnError::Config("cannot evaluate on an empty set".into()));
    }
    let idx: Vec<usize> = (0..samples.len()).collect();
    let mut sum = 0.0;
    let mut count = 0usize;
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, y) = batch(samples, chunk)?;
        let pred = params.predict(&x)?;
        if pred.shape() != y.shape() {
            return Err(NnError::Shape(format!("prediction {:?} vs target {:?}", pred.shape(), y.shape())));
        }
        sum += pred
            .data
            .iter()
            .zip(&y.data)
            .map(|(&p, &t)| {
                let d = p as f64 - t as f64;
                d * d
            })
            .sum::<f64>();
        count += y.len();
    }
    Ok(sum / count as f64)
}

/// Trains a freshly initialized model (seeded by `cfg.seed`).
pub fn train(
    cfg: &TrainConfig,
    architecture: Architecture,
    train_set: &[Sample<'_>],
    val_set: &[Sample<'_>],
) -> Result<TrainOutcome, NnError> {
    train_with(cfg, ModelParameters::init(architecture, cfg.seed)?, train_set, val_set, |_| {})
}

/// Training loop starting from `params`, calling `observe` after every epoch.
pub fn train_with(
    cfg: &TrainConfig,
    mut params: ModelParameters<f32>,
    train_set: &[Sample<'_>],
    val_set: &[Sample<'_>],
    mut observe: impl FnMut(&HistoryRow),
) -> Result<TrainOutcome, NnError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(NnError::Config("training split is empty".into()));
    }
    let n = train_set.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let adam = AdamWConfig { weight_decay: cfg.weight_decay, ..AdamWConfig::default() };
    let mut opt = AdamW::new(adam, &params.tensors);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = params.clone();
    let mut best_score = f64::INFINITY;
    let mut best_epoch = 0;
    let mut step = 0;
    let mut lr = cfg.lr_max;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = batch(train_set, chunk)?;
            let mut tape = Tape::new();
            let vars = params.attach(&mut tape);
            let xv = tape.constant(x);
            let yv = tape.constant(y);
            let pred = params.architecture.forward(&mut tape, &vars, xv)?;
            let loss_var = tape.mse(pred, yv)?;
            let loss = tape.value(loss_var).data[0] as f64;
            lr = cosine_lr(step, total_steps, cfg.lr_max, cfg.lr_min);
            if !loss.is_finite() {
                return Err(NnError::NonFinite { epoch, step, lr, loss });
            }
            let mut grads = tape.backward(loss_var)?;
            let mut g: Vec<Tensor4<f32>> = vars
                .iter()
                .zip(&params.tensors)
                .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Tensor4::zeros(p.shape())))
                .collect();
            clip_grad_norm(&mut g, cfg.clip_norm);
            opt.step(&mut params.tensors, &g, lr)?;
            step += 1;
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / n as f64;
        let val_loss = if val_set.is_empty() {
            None
        } else {
            Some(evaluate_loss(&params, val_set, cfg.batch_size)?)
        };
        let row = HistoryRow { epoch, step, lr, train_loss, val_loss };
        observe(&row);
        history.push(row);
        let score = val_loss.unwrap_or(train_loss);
        if score < best_score {
            best_score = score;
            best = params.clone();
            best_epoch = epoch;
        }
    }
    Ok(TrainOutcome { best, best_epoch, last: params, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CnnConfig, UNetConfig};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn toy_samples(count: usize, c: usize, hw: usize) -> Vec<(Tensor4<f32>, Tensor4<f32>)> {
        (0..count)
            .map(|k| {
                let x: Vec<f32> = (0..c * hw * hw).map(|i| ((i * 7 + k * 13) % 11) as f32 / 11.0 - 0.5).collect();
                let y: Vec<f32> = (0..hw * hw).map(|i| ((i + k) % 5) as f32 * 0.1).collect();
                (
                    Tensor4::from_vec([1, c, hw, hw], x).unwrap(),
                    Tensor4::from_vec([1, 1, hw, hw], y).unwrap(),
                )
            })
            .collect()
    }

    fn as_samples(data: &[(Tensor4<f32>, Tensor4<f32>)]) -> Vec<Sample<'_>> {
        data.iter().map(|(x, y)| Sample { input: x, target: y }).collect()
    }

    #[test]
    fn split_of_ten() {
        let ids: Vec<u32> = (0..10).collect();
        let s = split_dataset(&ids, 3, SplitFractions::default()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));
        assert_eq!(s, split_dataset(&ids, 3, SplitFractions::default()).unwrap());
    }

    #[test]
    fn bad_fractions_rejected() {
        let f = SplitFractions { train: 0.8, val: 0.3, test: 0.1 };
        assert!(split_dataset(&[1, 2, 3], 0, f).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 0usize..200, seed in any::<u64>()) {
            let ids: Vec<usize> = (0..n).collect();
            let s = split_dataset(&ids, seed, SplitFractions::default()).unwrap();
            let a: BTreeSet<_> = s.train.iter().collect();
            let b: BTreeSet<_> = s.val.iter().collect();
            let c: BTreeSet<_> = s.test.iter().collect();
            prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
            let all: BTreeSet<_> = a.union(&b).chain(c.iter()).copied().collect();
            prop_assert_eq!(all.len(), n);
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let data = toy_samples(3, 2, 8);
        let samples = as_samples(&data);
        let cfg = TrainConfig { lr_max: 0.0, weight_decay: 0.0, epochs: 3, batch_size: 2, ..TrainConfig::default() };
        let arch = Architecture::Cnn(CnnConfig::new(1, 4, 2, 1));
        let out = train(&cfg, arch, &samples, &[]).unwrap();
        assert_eq!(out.last, ModelParameters::init(arch, cfg.seed).unwrap());
        assert_eq!(out.history.len(), 3);
        assert_eq!(out.history[2].step, 6);
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let data = toy_samples(4, 2, 8);
        let samples = as_samples(&data);
        let cfg = TrainConfig { epochs: 20, batch_size: 2, lr_max: 3e-3, ..TrainConfig::default() };
        let arch = Architecture::Unet(UNetConfig::new(2, 2, 2, 1));
        let a = train(&cfg, arch, &samples[..3], &samples[3..]).unwrap();
        let b = train(&cfg, arch, &samples[..3], &samples[3..]).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.best, b.best);
        assert!(a.history.last().unwrap().train_loss < a.history[0].train_loss);
        let steps: Vec<usize> = a.history.iter().map(|r| r.step).collect();
        assert!(steps.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn evaluation_does_not_mutate() {
        let data = toy_samples(2, 2, 8);
        let samples = as_samples(&data);
        let params = ModelParameters::<f32>::init(Architecture::Cnn(CnnConfig::new(1, 3, 2, 1)), 5).unwrap();
        let before = params.clone();
        evaluate_loss(&params, &samples, 1).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let arch = Architecture::Cnn(CnnConfig::new(0, 1, 2, 1));
        assert!(matches!(train(&TrainConfig::default(), arch, &[], &[]), Err(NnError::Config(_))));
    }

    #[test]
    fn nan_loss_aborts_with_diagnostics() {
        let mut data = toy_samples(2, 2, 8);
        data[0].1.data[0] = f32::NAN;
        let samples = as_samples(&data);
        let cfg = TrainConfig { epochs: 2, batch_size: 2, ..TrainConfig::default() };
        let err = train(&cfg, Architecture::Cnn(CnnConfig::new(1, 2, 2, 1)), &samples, &[]).unwrap_err();
        assert!(matches!(err, NnError::NonFinite { epoch: 1, step: 0, .. }));
    }

    #[test]
    fn history_csv_layout() {
        let rows = vec![
            HistoryRow { epoch: 1, step: 4, lr: 0.001, train_loss: 0.5, val_loss: Some(0.25) },
            HistoryRow { epoch: 2, step: 8, lr: 0.0005, train_loss: 0.4, val_loss: None },
        ];
        assert_eq!(
            history_csv(&rows),
            "epoch,step,lr,train_loss,val_loss\n1,4,0.001,0.5,0.25\n2,8,0.0005,0.4,\n"
        );
    }
}
