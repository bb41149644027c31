//! Pseudo-observation weight schedules.
//!
//! A schedule maps the 0-based round index `t` and the current calibration
//! error `E` to a weight in `[0, base_weight]`. Schedules are pure; the
//! calibration state lives with the caller.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("base_weight must lie in [0, 1), got {0}")]
    BaseWeight(f64),
    #[error("tau must be positive, got {0}")]
    Tau(f64),
    #[error("exponent must be positive, got {0}")]
    Exponent(f64),
    #[error("eta must be non-negative, got {0}")]
    Eta(f64),
}

/// Time-decay factor used alone or inside a hybrid schedule. Every variant
/// equals 1 at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeDecay {
    Inverse { tau: f64 },
    Power { tau: f64, exponent: f64 },
    Exponential { tau: f64 },
}

impl TimeDecay {
    pub fn factor(&self, t: u64) -> f64 {
        let t = t as f64;
        match *self {
            TimeDecay::Inverse { tau } => tau / (t + tau),
            TimeDecay::Power { tau, exponent } => (tau / (t + tau)).powf(exponent),
            TimeDecay::Exponential { tau } => (-t / tau).exp(),
        }
    }

    /// Smallest `t` with `factor(t) < ratio`, for `ratio` in `(0, 1]`.
    fn first_below(&self, ratio: f64) -> u64 {
        let bound = match *self {
            TimeDecay::Inverse { tau } => tau * (1.0 / ratio - 1.0),
            TimeDecay::Power { tau, exponent } => tau * ((1.0 / ratio).powf(1.0 / exponent) - 1.0),
            TimeDecay::Exponential { tau } => tau * (1.0 / ratio).ln(),
        };
        let mut t = if bound < 0.0 { 0 } else { bound.floor() as u64 };
        // Guard the closed form against rounding at the boundary.
        while self.factor(t) >= ratio {
            t += 1;
        }
        while t > 0 && self.factor(t - 1) < ratio {
            t -= 1;
        }
        t
    }

    fn validate(&self) -> Result<(), ScheduleError> {
        let (tau, exponent) = match *self {
            TimeDecay::Inverse { tau } | TimeDecay::Exponential { tau } => (tau, 1.0),
            TimeDecay::Power { tau, exponent } => (tau, exponent),
        };
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(ScheduleError::Tau(tau));
        }
        if !(exponent > 0.0 && exponent.is_finite()) {
            return Err(ScheduleError::Exponent(exponent));
        }
        Ok(())
    }
}

/// Decay schedule family with its parameters. Construction through serde or
/// [`ScheduleSpec::validated`] rejects invalid parameters, so evaluation never
/// fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawSchedule")]
pub enum ScheduleSpec {
    Zero,
    Constant { base_weight: f64 },
    Inverse { base_weight: f64, tau: f64 },
    Power { base_weight: f64, tau: f64, exponent: f64 },
    Exponential { base_weight: f64, tau: f64 },
    CalibrationGated { base_weight: f64, eta: f64 },
    Hybrid { base_weight: f64, eta: f64, time: TimeDecay },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawSchedule {
    Zero,
    Constant { base_weight: f64 },
    Inverse { base_weight: f64, tau: f64 },
    Power { base_weight: f64, tau: f64, exponent: f64 },
    Exponential { base_weight: f64, tau: f64 },
    CalibrationGated { base_weight: f64, eta: f64 },
    Hybrid { base_weight: f64, eta: f64, time: TimeDecay },
}

impl TryFrom<RawSchedule> for ScheduleSpec {
    type Error = ScheduleError;

    fn try_from(raw: RawSchedule) -> Result<Self, Self::Error> {
        let spec = match raw {
            RawSchedule::Zero => ScheduleSpec::Zero,
            RawSchedule::Constant { base_weight } => ScheduleSpec::Constant { base_weight },
            RawSchedule::Inverse { base_weight, tau } => ScheduleSpec::Inverse { base_weight, tau },
            RawSchedule::Power { base_weight, tau, exponent } => ScheduleSpec::Power { base_weight, tau, exponent },
            RawSchedule::Exponential { base_weight, tau } => ScheduleSpec::Exponential { base_weight, tau },
            RawSchedule::CalibrationGated { base_weight, eta } => ScheduleSpec::CalibrationGated { base_weight, eta },
            RawSchedule::Hybrid { base_weight, eta, time } => ScheduleSpec::Hybrid { base_weight, eta, time },
        };
        spec.validated()
    }
}

impl ScheduleSpec {
    pub fn validated(self) -> Result<Self, ScheduleError> {
        let lw = self.base_weight();
        if !(0.0..1.0).contains(&lw) {
            return Err(ScheduleError::BaseWeight(lw));
        }
        if let Some(time) = self.time_decay() {
            time.validate()?;
        }
        if let ScheduleSpec::CalibrationGated { eta, .. } | ScheduleSpec::Hybrid { eta, .. } = self {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(ScheduleError::Eta(eta));
            }
        }
        Ok(self)
    }

    pub fn base_weight(&self) -> f64 {
        match *self {
            ScheduleSpec::Zero => 0.0,
            ScheduleSpec::Constant { base_weight }
            | ScheduleSpec::Inverse { base_weight, .. }
            | ScheduleSpec::Power { base_weight, .. }
            | ScheduleSpec::Exponential { base_weight, .. }
            | ScheduleSpec::CalibrationGated { base_weight, .. }
            | ScheduleSpec::Hybrid { base_weight, .. } => base_weight,
        }
    }

    /// The time factor `g(t)` of time-based and hybrid schedules.
    pub fn time_decay(&self) -> Option<TimeDecay> {
        match *self {
            ScheduleSpec::Inverse { tau, .. } => Some(TimeDecay::Inverse { tau }),
            ScheduleSpec::Power { tau, exponent, .. } => Some(TimeDecay::Power { tau, exponent }),
            ScheduleSpec::Exponential { tau, .. } => Some(TimeDecay::Exponential { tau }),
            ScheduleSpec::Hybrid { time, .. } => Some(time),
            _ => None,
        }
    }

    /// Whether the weight depends on the calibration error.
    pub fn uses_calibration(&self) -> bool {
        matches!(self, ScheduleSpec::CalibrationGated { .. } | ScheduleSpec::Hybrid { .. })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScheduleSpec::Zero)
    }

    /// Weight for 0-based round `t` given calibration error `ema_error`.
    pub fn weight(&self, t: u64, ema_error: f64) -> f64 {
        let e = ema_error.max(0.0);
        match *self {
            ScheduleSpec::Zero => 0.0,
            ScheduleSpec::Constant { base_weight } => base_weight,
            ScheduleSpec::Inverse { base_weight, tau } => base_weight * (tau / (t as f64 + tau)),
            ScheduleSpec::Power { base_weight, tau, exponent } => {
                base_weight * (tau / (t as f64 + tau)).powf(exponent)
            }
            ScheduleSpec::Exponential { base_weight, tau } => base_weight * (-(t as f64) / tau).exp(),
            ScheduleSpec::CalibrationGated { base_weight, eta } => base_weight * (-eta * e).exp(),
            ScheduleSpec::Hybrid { base_weight, eta, time } => base_weight * time.factor(t) * (-eta * e).exp(),
        }
    }

    /// First round from which the weight is guaranteed below `eps`,
    /// irrespective of calibration error. `None` when no such round exists
    /// (constant and purely gated schedules with `base_weight >= eps`).
    pub fn fade_horizon(&self, eps: f64) -> Option<u64> {
        assert!(eps > 0.0, "eps must be positive");
        let lw = self.base_weight();
        if lw < eps {
            return Some(0);
        }
        self.time_decay().map(|g| g.first_below(eps / lw))
    }
}
