//! Online calibration tracking: an exponential moving average of squared
//! probe errors, `E ← β·E + (1 − β)·(prediction − reward)²`, starting at 0.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("beta must lie in [0, 1), got {0}")]
    Beta(f64),
    #[error("non-finite calibration input (prediction {prediction}, reward {reward})")]
    NonFinite { prediction: f64, reward: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmaTracker {
    beta: f64,
    value: f64,
    steps: u64,
}

impl EmaTracker {
    pub fn new(beta: f64) -> Result<Self, CalibrationError> {
        if !(0.0..1.0).contains(&beta) {
            return Err(CalibrationError::Beta(beta));
        }
        Ok(Self {
            beta,
            value: 0.0,
            steps: 0,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn current_error(&self) -> f64 {
        self.value
    }

    /// Folds one probe into the average and returns the squared error.
    /// Non-finite inputs leave the tracker untouched.
    pub fn record(&mut self, prediction: f64, reward: f64) -> Result<f64, CalibrationError> {
        if !prediction.is_finite() || !reward.is_finite() {
            return Err(CalibrationError::NonFinite { prediction, reward });
        }
        let err = (prediction - reward).powi(2);
        self.value = self.beta * self.value + (1.0 - self.beta) * err;
        self.steps += 1;
        Ok(err)
    }
}
