//! Counterfactual reward scorers.
//!
//! A scorer predicts rewards for a set of target arms. The runner asks for a
//! calibration probe on the played arm before the reward is drawn and for
//! counterfactual predictions on the unplayed arms afterwards; joint scorers
//! answer both with a single all-arms request issued before the pull.

pub mod llm;
pub mod prompt;
pub mod replay;

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use llm::{LlmConfig, LlmScorer};
pub use prompt::{render_prompt, PromptStyle};
pub use replay::{PredictionLog, PredictionRecord, PredictionSink, ReplayScorer};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("invalid score request: {0}")]
    InvalidRequest(String),
    #[error("oracle scorer needs the hidden expected rewards")]
    MissingTruth,
    #[error("replay log has no prediction for round {round}, arm {arm}")]
    ReplayMissing { round: u64, arm: usize },
    #[error("replay log {path}:{line}: {message}")]
    ReplayFormat { path: PathBuf, line: usize, message: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("LLM credentials missing: set {0}")]
    MissingCredentials(String),
    #[error("invalid scorer config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    Probe,
    Counterfactual,
    JointAllArms,
}

/// One past round as shown to the scorer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryEntry {
    pub round: u64,
    pub arm: usize,
    pub reward: f64,
    pub context_text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRequest {
    /// 1-based round index.
    pub round: u64,
    pub mode: ScoreMode,
    pub context_text: String,
    pub feature_text: String,
    /// Reading-history titles, most recent last.
    pub user_history: Vec<String>,
    pub arm_descriptions: Vec<String>,
    pub target_arms: Vec<usize>,
    /// The arm played this round, when already chosen.
    pub played_arm: Option<usize>,
    /// Past rounds, most recent first. Never contains the current round.
    pub history: Vec<HistoryEntry>,
    pub reward_range: (f64, f64),
}

impl ScoreRequest {
    pub fn validate(&self) -> Result<(), ScorerError> {
        if self.target_arms.is_empty() {
            return Err(ScorerError::InvalidRequest("no target arms".into()));
        }
        if self.mode == ScoreMode::Probe && self.target_arms.len() != 1 {
            return Err(ScorerError::InvalidRequest(format!(
                "probe targets exactly one arm, got {}",
                self.target_arms.len()
            )));
        }
        if let Some(&bad) = self.target_arms.iter().find(|&&a| a >= self.arm_descriptions.len()) {
            return Err(ScorerError::InvalidRequest(format!("target arm {bad} out of range")));
        }
        if self.history.iter().any(|h| h.round >= self.round) {
            return Err(ScorerError::InvalidRequest(format!(
                "history leaks round {} or later",
                self.round
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmPrediction {
    pub arm: usize,
    pub predicted_reward: f64,
    /// Self-reported confidence; logged, never used for weighting.
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScorePrediction {
    pub predictions: Vec<ArmPrediction>,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub raw_payload: String,
}

impl ScorePrediction {
    pub fn get(&self, arm: usize) -> Option<f64> {
        self.predictions.iter().find(|p| p.arm == arm).map(|p| p.predicted_reward)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreOutcome {
    Ok(ScorePrediction),
    /// The scorer could not answer this round; the runner injects nothing.
    Unavailable { reason: String, tokens_in: u64, tokens_out: u64 },
}

impl ScoreOutcome {
    pub fn tokens(&self) -> (u64, u64) {
        match self {
            ScoreOutcome::Ok(p) => (p.tokens_in, p.tokens_out),
            ScoreOutcome::Unavailable { tokens_in, tokens_out, .. } => (*tokens_in, *tokens_out),
        }
    }
}

pub trait Scorer {
    /// `hidden_truth` carries the per-arm expected rewards for scorers that
    /// simulate an LLM from the ground truth.
    fn score(&mut self, request: &ScoreRequest, hidden_truth: Option<&[f64]>) -> Result<ScoreOutcome, ScorerError>;

    /// Whether one all-arms request per round doubles as the probe.
    fn joint(&self) -> bool {
        false
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score(&mut self, request: &ScoreRequest, hidden_truth: Option<&[f64]>) -> Result<ScoreOutcome, ScorerError> {
        (**self).score(request, hidden_truth)
    }

    fn joint(&self) -> bool {
        (**self).joint()
    }
}

pub fn clip(value: f64, range: (f64, f64)) -> f64 {
    value.clamp(range.0, range.1)
}

/// Additive bias, shared by all arms or given per arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bias {
    Uniform(f64),
    PerArm(Vec<f64>),
}

impl Default for Bias {
    fn default() -> Self {
        Bias::Uniform(0.0)
    }
}

impl Bias {
    pub fn for_arm(&self, arm: usize) -> f64 {
        match self {
            Bias::Uniform(b) => *b,
            Bias::PerArm(v) => v.get(arm).copied().unwrap_or(0.0),
        }
    }
}

/// Predicts `E[r | x, a] + b_a + ε`, `ε ~ N(0, σ²)`.
pub struct OracleScorer {
    bias: Bias,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl OracleScorer {
    pub fn new(bias: Bias, noise_sigma: f64, seed: u64) -> Result<Self, ScorerError> {
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(ScorerError::InvalidConfig(format!("noise_sigma must be >= 0, got {noise_sigma}")));
        }
        let noise = if noise_sigma > 0.0 {
            Some(Normal::new(0.0, noise_sigma).map_err(|e| ScorerError::InvalidConfig(e.to_string()))?)
        } else {
            None
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(3);
        Ok(Self { bias, noise, rng })
    }
}

impl Scorer for OracleScorer {
    fn score(&mut self, request: &ScoreRequest, hidden_truth: Option<&[f64]>) -> Result<ScoreOutcome, ScorerError> {
        request.validate()?;
        let truth = hidden_truth.ok_or(ScorerError::MissingTruth)?;
        let predictions = request
            .target_arms
            .iter()
            .map(|&arm| {
                let mean = *truth.get(arm).ok_or(ScorerError::MissingTruth)?;
                let eps = self.noise.map_or(0.0, |n| n.sample(&mut self.rng));
                Ok(ArmPrediction {
                    arm,
                    predicted_reward: clip(mean + self.bias.for_arm(arm) + eps, request.reward_range),
                    confidence: None,
                })
            })
            .collect::<Result<Vec<_>, ScorerError>>()?;
        Ok(ScoreOutcome::Ok(ScorePrediction {
            predictions,
            ..Default::default()
        }))
    }
}

/// Uniform draws in a fixed band, mimicking low-commitment predictions.
pub struct HedgedScorer {
    lo: f64,
    hi: f64,
    rng: ChaCha8Rng,
}

impl HedgedScorer {
    pub fn new(lo: f64, hi: f64, seed: u64) -> Result<Self, ScorerError> {
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return Err(ScorerError::InvalidConfig(format!("hedged band [{lo}, {hi}] is empty")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(3);
        Ok(Self { lo, hi, rng })
    }
}

impl Scorer for HedgedScorer {
    fn score(&mut self, request: &ScoreRequest, _hidden_truth: Option<&[f64]>) -> Result<ScoreOutcome, ScorerError> {
        request.validate()?;
        let predictions = request
            .target_arms
            .iter()
            .map(|&arm| {
                let v = if self.hi > self.lo {
                    self.rng.random_range(self.lo..=self.hi)
                } else {
                    self.lo
                };
                ArmPrediction {
                    arm,
                    predicted_reward: clip(v, request.reward_range),
                    confidence: None,
                }
            })
            .collect();
        Ok(ScoreOutcome::Ok(ScorePrediction {
            predictions,
            ..Default::default()
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerSpec {
    Oracle {
        #[serde(default)]
        bias: Bias,
        #[serde(default)]
        noise_sigma: f64,
    },
    Hedged {
        lo: f64,
        hi: f64,
    },
    Replay {
        path: PathBuf,
    },
    Llm(LlmConfig),
}

impl ScorerSpec {
    pub fn is_llm(&self) -> bool {
        matches!(self, ScorerSpec::Llm(_))
    }

    /// Builds a scorer for one episode. LLM credentials are read from the
    /// configured environment variable.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Scorer + Send>, ScorerError> {
        Ok(match self {
            ScorerSpec::Oracle { bias, noise_sigma } => Box::new(OracleScorer::new(bias.clone(), *noise_sigma, seed)?),
            ScorerSpec::Hedged { lo, hi } => Box::new(HedgedScorer::new(*lo, *hi, seed)?),
            ScorerSpec::Replay { path } => Box::new(ReplayScorer::load(path)?),
            ScorerSpec::Llm(cfg) => {
                let key = std::env::var(&cfg.api_key_env)
                    .map_err(|_| ScorerError::MissingCredentials(cfg.api_key_env.clone()))?;
                Box::new(LlmScorer::new(cfg.clone(), Some(key))?)
            }
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn request(mode: ScoreMode, targets: Vec<usize>, k: usize) -> ScoreRequest {
        ScoreRequest {
            round: 3,
            mode,
            context_text: "ctx".into(),
            feature_text: String::new(),
            user_history: Vec::new(),
            arm_descriptions: (0..k).map(|a| format!("arm {a}")).collect(),
            target_arms: targets,
            played_arm: None,
            history: Vec::new(),
            reward_range: (0.0, 1.0),
        }
    }

    fn ok(outcome: ScoreOutcome) -> ScorePrediction {
        match outcome {
            ScoreOutcome::Ok(p) => p,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn noiseless_unbiased_oracle_is_identity() {
        let mut s = OracleScorer::new(Bias::Uniform(0.0), 0.0, 1).unwrap();
        let p = ok(s.score(&request(ScoreMode::Probe, vec![1], 2), Some(&[0.1, 0.7])).unwrap());
        assert_eq!(p.get(1), Some(0.7));
        assert_eq!((p.tokens_in, p.tokens_out), (0, 0));
    }

    #[test]
    fn biased_oracle_adds_bias() {
        let mut s = OracleScorer::new(Bias::PerArm(vec![0.0, 0.2]), 0.0, 1).unwrap();
        let p = ok(s.score(&request(ScoreMode::Counterfactual, vec![1], 2), Some(&[0.0, 0.5])).unwrap());
        assert!((p.get(1).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn oracle_output_is_clipped() {
        let mut s = OracleScorer::new(Bias::Uniform(3.0), 2.0, 1).unwrap();
        for _ in 0..50 {
            let p = ok(s.score(&request(ScoreMode::JointAllArms, vec![0, 1, 2], 3), Some(&[0.5, 0.9, 0.0])).unwrap());
            assert!(p.predictions.iter().all(|a| (0.0..=1.0).contains(&a.predicted_reward)));
        }
    }

    #[test]
    fn oracle_requires_truth() {
        let mut s = OracleScorer::new(Bias::default(), 0.0, 1).unwrap();
        assert!(matches!(
            s.score(&request(ScoreMode::Probe, vec![0], 2), None),
            Err(ScorerError::MissingTruth)
        ));
    }

    #[test]
    fn hedged_stays_in_band_and_repeats() {
        let req = request(ScoreMode::JointAllArms, vec![0, 1, 2, 3, 4], 5);
        let mut a = HedgedScorer::new(0.2, 0.5, 9).unwrap();
        let mut b = HedgedScorer::new(0.2, 0.5, 9).unwrap();
        for _ in 0..100 {
            let pa = ok(a.score(&req, None).unwrap());
            let pb = ok(b.score(&req, None).unwrap());
            assert_eq!(pa, pb);
            assert!(pa.predictions.iter().all(|p| (0.2..=0.5).contains(&p.predicted_reward)));
        }
    }

    #[test]
    fn request_validation() {
        assert!(request(ScoreMode::Probe, vec![0, 1], 2).validate().is_err());
        assert!(request(ScoreMode::Probe, vec![], 2).validate().is_err());
        assert!(request(ScoreMode::Counterfactual, vec![5], 2).validate().is_err());
        let mut leaky = request(ScoreMode::Probe, vec![0], 2);
        leaky.history.push(HistoryEntry {
            round: 3,
            arm: 0,
            reward: 1.0,
            context_text: String::new(),
        });
        assert!(leaky.validate().is_err());
    }

    #[test]
    fn spec_json_shapes() {
        let s: ScorerSpec = serde_json::from_str(r#"{"kind":"oracle","bias":0.3}"#).unwrap();
        assert_eq!(s, ScorerSpec::Oracle { bias: Bias::Uniform(0.3), noise_sigma: 0.0 });
        let s: ScorerSpec = serde_json::from_str(r#"{"kind":"oracle","bias":[0.1,0.2],"noise_sigma":0.5}"#).unwrap();
        assert!(matches!(s, ScorerSpec::Oracle { bias: Bias::PerArm(_), .. }));
        let s: ScorerSpec = serde_json::from_str(
            r#"{"kind":"llm","endpoint":"http://localhost:1/v1/chat/completions","model":"m","prompt_style":"mind_click"}"#,
        )
        .unwrap();
        match s {
            ScorerSpec::Llm(cfg) => {
                assert_eq!(cfg.temperature, 0.0);
                assert_eq!(cfg.prompt_style, PromptStyle::MindClick);
            }
            other => panic!("{other:?}"),
        }
    }
}
