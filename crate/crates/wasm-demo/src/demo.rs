//! Platform-independent logic behind the browser demo.

use tcn::data::{synth_generate, to_tensor, Dataset, SynthConfig};
use tcn::eval::{recall_at_k, Averaging};
use tcn::model::TcnParams;
use tcn::training::{mean_tensor, train, RankSpec, TrainConfig};
use tcn::tucker::{compression_ratio, hosvd, reconstruction_error, Ranks};
use tcn::{Result, TcnError};

/// Relative-error targets swept by [`Demo::compression_curve`].
pub const EPSILON_GRID: [f64; 8] = [0.01, 0.02, 0.05, 0.08, 0.1, 0.15, 0.2, 0.3];

/// Values per row of [`Demo::compression_curve`].
pub const CURVE_STRIDE: usize = 6;

pub fn demo_config(seed: u64) -> SynthConfig {
    SynthConfig {
        n_objects: 12,
        n_predicates: 6,
        feature_dim: 16,
        true_ranks: Ranks(3, 3, 2),
        n_train: 240,
        n_test: 40,
        positives: 4,
        noise_rate: 0.05,
        holdout: 2,
        seed,
    }
}

pub struct Demo {
    pub train: Dataset,
    pub test: Dataset,
    pub model: Option<TcnParams>,
    seed: u64,
}

impl Demo {
    pub fn new(seed: u64) -> Result<Self> {
        let (train, test, _) = synth_generate(&demo_config(seed))?;
        Ok(Self {
            train,
            test,
            model: None,
            seed,
        })
    }

    /// HOSVD of the mean training tensor at each [`EPSILON_GRID`] value, as
    /// flat rows `[eps, r1, r2, r3, compression_ratio, error]`.
    pub fn compression_curve(&self) -> Result<Vec<f64>> {
        let t = mean_tensor(&self.train)?;
        let mut out = Vec::with_capacity(EPSILON_GRID.len() * CURVE_STRIDE);
        for eps in EPSILON_GRID {
            let m = hosvd(&t, eps)?;
            let r = m.factors.ranks();
            out.extend([
                eps,
                r.0 as f64,
                r.1 as f64,
                r.2 as f64,
                compression_ratio(t.dims(), r),
                reconstruction_error(&t, &m)?,
            ]);
        }
        Ok(out)
    }

    /// Trains from scratch and returns the mean loss of every epoch.
    pub fn train(&mut self, epochs: usize, lr0: f64, epsilon: f64) -> Result<Vec<f64>> {
        let config = TrainConfig {
            epochs,
            lr0,
            lr_halving_period: (epochs / 4).max(1),
            rank_spec: RankSpec::Epsilon(epsilon),
            seed: self.seed,
            threads: Some(1),
            ..TrainConfig::default()
        };
        let (model, log) = train(&self.train, &config)?;
        self.model = Some(model);
        Ok(log.epochs.iter().map(|e| e.mean_loss).collect())
    }

    fn model(&self) -> Result<&TcnParams> {
        self.model
            .as_ref()
            .ok_or_else(|| TcnError::Argument("train a model first".into()))
    }

    fn test_image(&self, image: usize) -> Result<&tcn::data::Sample> {
        self.test.samples.get(image).ok_or_else(|| {
            TcnError::Argument(format!("image must be below {}", self.test.len()))
        })
    }

    fn check_predicate(&self, predicate: usize) -> Result<()> {
        if predicate >= self.test.n_predicates {
            return Err(TcnError::Argument(format!(
                "predicate must be below {}",
                self.test.n_predicates
            )));
        }
        Ok(())
    }

    /// Row-major subject × object scores of one test image for `predicate`.
    pub fn heatmap(&self, image: usize, predicate: usize) -> Result<Vec<f64>> {
        self.check_predicate(predicate)?;
        let scores = self.model()?.forward(&self.test_image(image)?.features)?;
        let n = self.test.n_objects;
        Ok((0..n * n).map(|c| scores.get(c / n, c % n, predicate)).collect())
    }

    /// Row-major subject × object ground-truth mask, 1 where annotated.
    pub fn truth_mask(&self, image: usize, predicate: usize) -> Result<Vec<u8>> {
        self.check_predicate(predicate)?;
        let t = to_tensor(self.test_image(image)?, self.test.n_objects, self.test.n_predicates)?;
        let n = self.test.n_objects;
        Ok((0..n * n).map(|c| t.get(c / n, c % n, predicate) as u8).collect())
    }

    pub fn test_recall(&self, k: usize) -> Result<f64> {
        Ok(recall_at_k(self.model()?, &self.test.samples, k, Averaging::Macro)?.value)
    }
}
