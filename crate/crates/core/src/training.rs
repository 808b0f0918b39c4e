//! Softmax loss over the flattened relation tensor, frequency-weighted
//! batch sampling, SGD with momentum on a step-halving schedule, and the
//! epoch loop that ties them together.

use std::collections::BTreeMap;

use log::{debug, warn};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{to_tensor, Dataset, Triplet};
use crate::error::{Result, TcnError};
use crate::model::{cp_default_rank, init_params, Gradients, TcnParams, Variant};
use crate::tensor::Tensor3;
use crate::tucker::{hosvd, Ranks};

/// How the Tucker rank is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RankSpec {
    /// Fixed ranks with random factor initialization.
    Fixed(Ranks),
    /// Ranks and initial factors from HOSVD of the mean training tensor at
    /// this relative error.
    Epsilon(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_halving_period: usize,
    pub momentum: f64,
    pub seed: u64,
    pub variant: Variant,
    pub rank_spec: RankSpec,
    /// CP rank override; defaults to [`cp_default_rank`] of the Tucker ranks.
    pub cp_rank: Option<usize>,
    pub weighted_sampling: bool,
    /// Worker threads for per-sample gradients; `None` uses all cores.
    /// Results do not depend on this value.
    pub threads: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 16,
            lr0: 2e-3,
            lr_halving_period: 10,
            momentum: 0.9,
            seed: 0,
            variant: Variant::TuckerCore,
            rank_spec: RankSpec::Epsilon(0.02),
            cp_rank: None,
            weighted_sampling: true,
            threads: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(TcnError::Config(msg));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.lr_halving_period == 0 {
            return bad("lr_halving_period must be positive".into());
        }
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 must be a nonnegative number, got {}", self.lr0));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if let RankSpec::Epsilon(e) = self.rank_spec {
            if !(e > 0.0 && e < 1.0) {
                return bad(format!("epsilon must lie in (0, 1), got {e}"));
            }
        }
        if self.cp_rank == Some(0) {
            return bad("cp_rank must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }
}

/// Momentum buffers, one per trainable array.
#[derive(Debug, Clone)]
pub struct OptimState {
    pub velocity: Gradients,
    pub step: usize,
}

impl OptimState {
    pub fn new(p: &TcnParams) -> Self {
        Self {
            velocity: Gradients::zeros_like(p),
            step: 0,
        }
    }
}

/// Cross entropy between `target / sum(target)` and `softmax(pred)` over
/// the flattened tensor. Returns the loss and its gradient `q − p` with
/// respect to `pred`.
pub fn softmax_loss(pred: &Tensor3, target: &Tensor3) -> Result<(f64, Tensor3)> {
    if pred.dims() != target.dims() {
        return Err(TcnError::shape(
            "softmax_loss",
            format!("{:?}", target.dims()),
            format!("{:?}", pred.dims()),
        ));
    }
    let mass = target.sum();
    if mass <= 0.0 {
        return Err(TcnError::Degenerate(
            "target has no positive entries".into(),
        ));
    }
    let z = pred.data();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_norm = z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(z.len());
    for (&zi, &ti) in z.iter().zip(target.data()) {
        let log_q = zi - max - log_norm;
        let p = ti / mass;
        if p > 0.0 {
            loss -= p * log_q;
        }
        grad.push(log_q.exp() - p);
    }
    Ok((loss.max(0.0), Tensor3::new(pred.dims(), grad)?))
}

/// Weight `total / count` for each annotated triplet, where counts are the
/// number of images carrying the triplet.
pub fn label_weights(train: &Dataset) -> Result<BTreeMap<Triplet, f64>> {
    if train.is_empty() {
        return Err(TcnError::Config("training set is empty".into()));
    }
    let counts = train.triplet_counts();
    let total: usize = counts.values().sum();
    Ok(counts
        .into_iter()
        .map(|(t, c)| (t, total as f64 / c as f64))
        .collect())
}

/// Per-image sampling weight: the sum of the weights of its distinct labels.
pub fn image_weights(train: &Dataset, weights: &BTreeMap<Triplet, f64>) -> Result<Vec<f64>> {
    train
        .samples
        .iter()
        .map(|s| {
            s.distinct_triplets()
                .into_iter()
                .map(|t| {
                    weights.get(&t).copied().ok_or_else(|| {
                        TcnError::Argument(format!("no label weight for triplet {t}"))
                    })
                })
                .sum()
        })
        .collect()
}

/// Draws `batch_size` indices with replacement, proportional to `weights`.
pub fn sample_batch(rng: &mut ChaCha8Rng, weights: &[f64], batch_size: usize) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(weights).map_err(|e| {
        TcnError::Config(format!("cannot sample from weights: {e}"))
    })?;
    Ok((0..batch_size).map(|_| dist.sample(rng)).collect())
}

/// `lr0 · 0.5^floor(epoch / period)`.
pub fn lr_at(config: &TrainConfig, epoch: usize) -> f64 {
    let halvings = (epoch / config.lr_halving_period) as i32;
    config.lr0 * 0.5f64.powi(halvings)
}

/// `v ← momentum·v + g; θ ← θ − lr·v`, array by array.
pub fn sgd_step(
    params: &mut TcnParams,
    grads: &Gradients,
    state: &mut OptimState,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    let g = grads.arrays();
    let v = state.velocity.arrays_mut();
    let p = params.arrays_mut();
    if g.len() != p.len() || v.len() != p.len() {
        return Err(TcnError::shape("sgd_step", p.len(), g.len()));
    }
    for ((param, vel), grad) in p.into_iter().zip(v).zip(g) {
        if param.len() != grad.len() || vel.len() != grad.len() {
            return Err(TcnError::shape("sgd_step array", param.len(), grad.len()));
        }
        for ((theta, vi), gi) in param.iter_mut().zip(vel.iter_mut()).zip(grad) {
            *vi = momentum * *vi + gi;
            *theta -= lr * *vi;
        }
    }
    state.step += 1;
    Ok(())
}

/// Elementwise mean of the binary relation tensors of all training images.
pub fn mean_tensor(train: &Dataset) -> Result<Tensor3> {
    if train.is_empty() {
        return Err(TcnError::Config("training set is empty".into()));
    }
    let mut acc = Tensor3::zeros(train.tensor_dims());
    for s in &train.samples {
        acc.axpy(1.0, &to_tensor(s, train.n_objects, train.n_predicates)?)?;
    }
    acc.scale(1.0 / train.len() as f64);
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainLog {
    pub ranks: Ranks,
    pub skipped_samples: usize,
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    /// One `epoch=<int> mean_loss=<float> lr=<float>` line per epoch.
    pub fn lines(&self) -> Vec<String> {
        self.epochs
            .iter()
            .map(|r| format!("epoch={} mean_loss={} lr={}", r.epoch, r.mean_loss, r.lr))
            .collect()
    }
}

/// Loss and gradients for one sample.
pub fn sample_gradients(params: &TcnParams, features: &[f64], target: &Tensor3) -> Result<(f64, Gradients)> {
    let logits = params.forward(features)?;
    let (loss, grad_logits) = softmax_loss(&logits, target)?;
    Ok((loss, params.backward(features, &grad_logits)?))
}

/// Initial parameters for `config` on `dataset`, running HOSVD on the mean
/// training tensor when the rank spec asks for it.
pub fn initial_params(dataset: &Dataset, config: &TrainConfig) -> Result<TcnParams> {
    let (n, m, d) = (dataset.n_objects, dataset.n_predicates, dataset.feature_dim);
    let (ranks, decomposition) = match config.rank_spec {
        RankSpec::Fixed(r) => (r, None),
        RankSpec::Epsilon(eps) => {
            let model = hosvd(&mean_tensor(dataset)?, eps)?;
            (model.factors.ranks(), Some(model))
        }
    };
    match config.variant {
        Variant::Cp => {
            let r = config.cp_rank.unwrap_or_else(|| cp_default_rank(ranks));
            init_params(n, m, Ranks(r, r, r), d, Variant::Cp, config.seed, None)
        }
        v => init_params(n, m, ranks, d, v, config.seed, decomposition.as_ref()),
    }
}

/// Trains a model. The result is a deterministic function of
/// `(dataset, config)` and does not depend on the thread count: per-sample
/// gradients are reduced in batch order.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(TcnParams, TrainLog)> {
    config.validate()?;
    let eligible: Vec<usize> = (0..dataset.len())
        .filter(|&i| !dataset.samples[i].triplets.is_empty())
        .collect();
    let skipped = dataset.len() - eligible.len();
    if skipped > 0 {
        warn!("{skipped} training samples have no annotated triplets and are skipped");
    }
    if eligible.is_empty() {
        return Err(TcnError::Config(
            "training set has no sample with an annotated triplet".into(),
        ));
    }

    let mut params = initial_params(dataset, config)?;
    let mut state = OptimState::new(&params);

    let weights: Vec<f64> = if config.weighted_sampling {
        let lw = label_weights(dataset)?;
        let all = image_weights(dataset, &lw)?;
        eligible.iter().map(|&i| all[i]).collect()
    } else {
        vec![1.0; eligible.len()]
    };

    let threads = config
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    // Targets without threads (e.g. wasm32) run the same reduction inline.
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => Some(pool),
        Err(e) => {
            debug!("no worker pool ({e}); computing gradients on the calling thread");
            None
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let steps_per_epoch = eligible.len().div_ceil(config.batch_size);
    let (n, m) = (dataset.n_objects, dataset.n_predicates);
    let mut log = TrainLog {
        ranks: params.ranks,
        skipped_samples: skipped,
        epochs: Vec::with_capacity(config.epochs),
    };

    for epoch in 0..config.epochs {
        let lr = lr_at(config, epoch);
        let mut epoch_loss = 0.0;
        let mut epoch_count = 0usize;
        for _ in 0..steps_per_epoch {
            let batch = sample_batch(&mut rng, &weights, config.batch_size)?;
            let one = |&b: &usize| {
                let sample = &dataset.samples[eligible[b]];
                let target = to_tensor(sample, n, m)?;
                sample_gradients(&params, &sample.features, &target)
            };
            let results: Vec<Result<(f64, Gradients)>> = match &pool {
                Some(pool) => pool.install(|| batch.par_iter().map(one).collect()),
                None => batch.iter().map(one).collect(),
            };
            let mut total = Gradients::zeros_like(&params);
            let scale = 1.0 / batch.len() as f64;
            for r in results {
                let (loss, g) = r?;
                epoch_loss += loss;
                epoch_count += 1;
                total.add_scaled(scale, &g)?;
            }
            sgd_step(&mut params, &total, &mut state, lr, config.momentum)?;
        }
        log.epochs.push(EpochRecord {
            epoch,
            mean_loss: epoch_loss / epoch_count as f64,
            lr,
        });
    }
    Ok((params, log))
}
