//! Synthetic disjoint linear bandit with known parameters.
//!
//! Each round draws one standard-normal feature vector shared by all arms;
//! the expected reward of arm `a` is `xᵀθ*_a` and the realized reward adds
//! Gaussian noise. `θ*_a` carries a zero bias coordinate, so the feature mean
//! of zero gives every arm a zero mean reward.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_arm, EnvError, EnvStep, Environment, RegretKind};
use crate::bandit::ContextVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_arms: usize,
    /// Feature dimension before bias augmentation.
    pub dim: usize,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Seed for the arm parameters. Defaults to the episode seed.
    #[serde(default)]
    pub theta_seed: Option<u64>,
    /// Explicit parameters, one `dim`-vector per arm. Overrides sampling.
    #[serde(default)]
    pub theta_star: Option<Vec<Vec<f64>>>,
    /// Declared reward range for clipping scorer output.
    #[serde(default = "default_range")]
    pub reward_range: (f64, f64),
}

fn default_range() -> (f64, f64) {
    (-10.0, 10.0)
}

impl SyntheticConfig {
    pub fn new(num_arms: usize, dim: usize, noise_sigma: f64) -> Self {
        Self {
            num_arms,
            dim,
            noise_sigma,
            theta_seed: None,
            theta_star: None,
            reward_range: default_range(),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.num_arms < 2 || self.dim == 0 {
            return Err(EnvError::InvalidConfig(format!(
                "synthetic bandit needs K >= 2 and d >= 1, got K={} d={}",
                self.num_arms, self.dim
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(EnvError::InvalidConfig(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if let Some(theta) = &self.theta_star {
            if theta.len() != self.num_arms || theta.iter().any(|t| t.len() != self.dim) {
                return Err(EnvError::InvalidConfig("theta_star must be K vectors of length d".into()));
            }
        }
        if !(self.reward_range.0 < self.reward_range.1) {
            return Err(EnvError::InvalidConfig("reward_range must be increasing".into()));
        }
        Ok(())
    }
}

/// Unit-norm parameter vectors drawn from a seeded isotropic normal.
pub fn sample_theta(num_arms: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(7);
    (0..num_arms)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|e| e * e).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|e| e / norm).collect();
            }
        })
        .collect()
}

pub struct SyntheticEnv {
    config: SyntheticConfig,
    theta: Vec<Vec<f64>>,
    context_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    noise: Normal<f64>,
    pending: Option<Vec<f64>>,
}

impl SyntheticEnv {
    pub fn new(config: SyntheticConfig, seed: u64) -> Result<Self, EnvError> {
        config.validate()?;
        let theta = match &config.theta_star {
            Some(t) => t.clone(),
            None => sample_theta(config.num_arms, config.dim, config.theta_seed.unwrap_or(seed)),
        };
        // Contexts and reward noise use separate streams so that policies run
        // on the same seed see the same contexts whatever they pull.
        let mut context_rng = ChaCha8Rng::seed_from_u64(seed);
        context_rng.set_stream(1);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
        noise_rng.set_stream(2);
        let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| EnvError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            config,
            theta,
            context_rng,
            noise_rng,
            noise,
            pending: None,
        })
    }

    /// True parameters without the bias coordinate.
    pub fn theta_star(&self) -> &[Vec<f64>] {
        &self.theta
    }

    /// True parameters in the augmented space (bias coefficient 0).
    pub fn theta_star_augmented(&self, arm: usize) -> Vec<f64> {
        let mut t = self.theta[arm].clone();
        t.push(0.0);
        t
    }

    pub fn expected_reward(&self, arm: usize, features: &[f64]) -> f64 {
        self.theta[arm].iter().zip(features).map(|(a, b)| a * b).sum()
    }

    /// Draws a feature vector without starting a round; used by harnesses
    /// that bypass the runner.
    pub fn draw_features(&mut self) -> Vec<f64> {
        (0..self.config.dim).map(|_| StandardNormal.sample(&mut self.context_rng)).collect()
    }

    pub fn draw_noise(&mut self) -> f64 {
        if self.config.noise_sigma == 0.0 {
            0.0
        } else {
            self.noise.sample(&mut self.noise_rng)
        }
    }
}

impl Environment for SyntheticEnv {
    fn name(&self) -> &'static str {
        "synthetic"
    }

    fn num_arms(&self) -> usize {
        self.config.num_arms
    }

    fn dim(&self) -> usize {
        self.config.dim + 1
    }

    fn reward_range(&self) -> (f64, f64) {
        self.config.reward_range
    }

    fn regret_kind(&self) -> RegretKind {
        RegretKind::Expected
    }

    fn next_step(&mut self) -> Result<EnvStep, EnvError> {
        let z = self.draw_features();
        let expected: Vec<f64> = (0..self.config.num_arms).map(|a| self.expected_reward(a, &z)).collect();
        let text = format!(
            "features: [{}]",
            z.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", ")
        );
        let x = ContextVector::augmented(z)?;
        let arm_texts = (0..self.config.num_arms).map(|a| format!("arm {a}")).collect();
        let step = EnvStep::new(vec![x; self.config.num_arms], expected.clone(), arm_texts, text);
        self.pending = Some(expected);
        Ok(step)
    }

    fn pull(&mut self, arm: usize) -> Result<f64, EnvError> {
        check_arm(arm, self.config.num_arms)?;
        let expected = self.pending.take().ok_or(EnvError::NoPendingRound)?;
        Ok(expected[arm] + self.draw_noise())
    }
}
