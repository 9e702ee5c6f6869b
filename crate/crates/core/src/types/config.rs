//! Fit configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Prediction task the model is fit for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classification,
    Regression,
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskKind::Classification => write!(f, "classification"),
            TaskKind::Regression => write!(f, "regression"),
        }
    }
}

/// Solver hyperparameters and run controls.
///
/// `lambda` weights the reconstruction loss, `gamma` the coefficient ridge,
/// `mu` the augmented-Lagrangian penalty (held constant across iterations),
/// and `epsilon` the absolute objective-change stopping tolerance. `max_iter`
/// caps the alternating-minimization loop; `outer_max_iter` caps the
/// pseudo-reconstruction outer loop of the incomplete solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig<T: Real> {
    pub lambda: T,
    pub gamma: T,
    pub mu: T,
    pub epsilon: T,
    pub max_iter: usize,
    pub outer_max_iter: usize,
    pub task: TaskKind,
    pub seed: u64,
}

impl<T: Real> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            lambda: T::one(),
            gamma: T::of(0.01),
            mu: T::one(),
            epsilon: T::of(1e-4),
            max_iter: 500,
            outer_max_iter: 20,
            task: TaskKind::Classification,
            seed: 0,
        }
    }
}

impl<T: Real> FitConfig<T> {
    /// Validates positivity/shape constraints on the weights and caps.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > T::zero()) {
            return Err(Error::InvalidConfig("lambda must be > 0".into()));
        }
        if !(self.gamma >= T::zero()) {
            return Err(Error::InvalidConfig("gamma must be >= 0".into()));
        }
        if !(self.mu > T::zero()) {
            return Err(Error::InvalidConfig("mu must be > 0".into()));
        }
        if !(self.epsilon > T::zero()) {
            return Err(Error::InvalidConfig("epsilon must be > 0".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        if self.outer_max_iter < 1 {
            return Err(Error::InvalidConfig("outer_max_iter must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_task(mut self, task: TaskKind) -> Self {
        self.task = task;
        self
    }

    pub fn with_weights(mut self, lambda: T, gamma: T) -> Self {
        self.lambda = lambda;
        self.gamma = gamma;
        self
    }

    /// Stable content hash of the effective configuration, for report records.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canon = format!(
            "lambda={:.16e};gamma={:.16e};mu={:.16e};epsilon={:.16e};max_iter={};outer_max_iter={};task={};seed={}",
            self.lambda.as_f64(),
            self.gamma.as_f64(),
            self.mu.as_f64(),
            self.epsilon.as_f64(),
            self.max_iter,
            self.outer_max_iter,
            self.task,
            self.seed
        );
        let digest = Sha256::digest(canon.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        FitConfig::<f64>::default().validate().unwrap();
    }

    #[test]
    fn nonpositive_weights_are_rejected() {
        let mut cfg = FitConfig::<f64>::default();
        cfg.lambda = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = FitConfig::<f64>::default();
        cfg.gamma = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = FitConfig::<f64>::default();
        cfg.mu = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = FitConfig::<f64>::default();
        cfg.max_iter = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = FitConfig::<f64>::default();
        let mut b = a;
        assert_eq!(a.content_hash(), b.content_hash());
        b.lambda = 2.0;
        assert_ne!(a.content_hash(), b.content_hash());
    }
}
