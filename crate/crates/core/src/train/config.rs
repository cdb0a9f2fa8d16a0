use crate::blocking::{Thresholds, DEFAULT_LOWER_QUANTILE, DEFAULT_UPPER_QUANTILE};
use crate::error::{Error, Result};
use crate::loss::LossParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Plain block gradient steps, users outside `[b, B]` rolled back.
    SarosB,
    /// Momentum-smoothed block gradient steps, every user kept.
    SarosM,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    /// `eta` used as is.
    Constant,
    /// `eta = c / sqrt(N)` with `N` the number of training users.
    COverSqrtN { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSpec {
    Explicit(Thresholds),
    /// Nearest-rank quantiles of the training block-count distribution.
    Quantiles { lower: f64, upper: f64 },
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec::Quantiles {
            lower: DEFAULT_LOWER_QUANTILE,
            upper: DEFAULT_UPPER_QUANTILE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Latent dimension `k`.
    pub dim: usize,
    /// Step size (`eta` for SAROS_b, `alpha` for SAROS_m and BPR).
    pub step_eta: f64,
    pub step_policy: StepPolicy,
    /// Weight of the previous update in the momentum buffer.
    pub momentum_gamma: f64,
    pub reg_lambda: f64,
    pub thresholds: ThresholdSpec,
    pub epochs: usize,
    pub seed: u64,
    /// Number of sampled triplets for BPR; `None` means one per training
    /// block per epoch, i.e. the same number of updates SAROS performs.
    pub bpr_steps: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: Algorithm::SarosB,
            dim: 16,
            step_eta: 0.05,
            step_policy: StepPolicy::Constant,
            momentum_gamma: 0.9,
            reg_lambda: 0.0,
            thresholds: ThresholdSpec::default(),
            epochs: 1,
            seed: 0,
            bpr_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("latent dimension must be at least 1".into()));
        }
        if !(self.step_eta > 0.0 && self.step_eta.is_finite()) {
            return Err(Error::Config("step size must be positive and finite".into()));
        }
        if let StepPolicy::COverSqrtN { c } = self.step_policy {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config("step constant c must be positive and finite".into()));
            }
        }
        if !(0.0..1.0).contains(&self.momentum_gamma) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        LossParams::new(self.reg_lambda).map_err(|_| Error::Config("reg_lambda must be nonnegative".into()))?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if let ThresholdSpec::Quantiles { lower, upper } = self.thresholds {
            if !(0.0 <= lower && lower < upper && upper <= 1.0) {
                return Err(Error::Config("threshold quantiles must satisfy 0 <= lo < hi <= 1".into()));
            }
        }
        Ok(())
    }

    pub fn loss_params(&self) -> LossParams {
        LossParams {
            reg_lambda: self.reg_lambda,
        }
    }

    /// Effective step size for a training set with `n_users` users.
    pub fn effective_step(&self, n_users: usize) -> f64 {
        match self.step_policy {
            StepPolicy::Constant => self.step_eta,
            StepPolicy::COverSqrtN { c } => c / libm::sqrt(n_users.max(1) as f64),
        }
    }
}
