//! Episode runner.
//!
//! Per round: observe contexts, select, probe the scorer on the chosen arm,
//! pull and apply the real update, score the unplayed arms, update the
//! calibration error, compute the weight from the updated error, then apply
//! the weighted pseudo-updates. Joint scorers answer the probe and the
//! counterfactuals with one request issued before the pull.

mod output;
pub mod presets;
mod sweep;

use std::collections::VecDeque;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use output::{
    read_rounds_csv, summarize, write_rounds_csv, Checkpoint, RoundRecord, RunSummary, ScorerStatus,
};
pub use sweep::{
    aggregate, report, run_seed, run_sweep, write_summary_csv, Aggregate, CellResult, SweepReport,
};

use crate::bandit::{BanditError, LinUcb, PolicyConfig, SolveMode};
use crate::calibration::{CalibrationError, EmaTracker};
use crate::env::{EnvError, EnvSpec, Environment, RegretKind};
use crate::schedule::ScheduleSpec;
use crate::scorer::prompt::GENERIC_HISTORY_ROUNDS;
use crate::scorer::{
    HistoryEntry, PredictionRecord, PredictionSink, ScoreMode, ScoreOutcome, ScorePrediction, ScoreRequest, Scorer,
    ScorerError, ScorerSpec,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("checkpoint {0} is beyond the logged rounds")]
    MissingCheckpoint(u64),
}

impl RunError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> RunError {
        let path = path.into();
        move |source| RunError::Io { path, source }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySettings {
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub lambda_reg: f64,
    #[serde(default)]
    pub solve_mode: SolveMode,
}

fn one() -> f64 {
    1.0
}

impl Default for PolicySettings {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            lambda_reg: 1.0,
            solve_mode: SolveMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub environment: EnvSpec,
    #[serde(default)]
    pub policy: PolicySettings,
    #[serde(default = "zero_schedule")]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub scorer: Option<ScorerSpec>,
    #[serde(default = "default_beta")]
    pub ema_beta: f64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Episodes run with seeds `seed, seed + 1, ...`.
    #[serde(default = "default_sims")]
    pub n_sims: u64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<u64>,
    /// Regret column used by summaries; defaults to the environment's.
    #[serde(default)]
    pub regret_kind: Option<RegretKind>,
}

fn zero_schedule() -> ScheduleSpec {
    ScheduleSpec::Zero
}

fn default_beta() -> f64 {
    0.95
}

fn default_horizon() -> u64 {
    100
}

fn default_seed() -> u64 {
    42
}

fn default_sims() -> u64 {
    1
}

pub fn default_checkpoints() -> Vec<u64> {
    vec![30, 50, 75, 100]
}

impl RunConfig {
    pub fn new(name: impl Into<String>, environment: EnvSpec) -> Self {
        Self {
            name: name.into(),
            environment,
            policy: PolicySettings::default(),
            schedule: ScheduleSpec::Zero,
            scorer: None,
            ema_beta: default_beta(),
            horizon: default_horizon(),
            seed: default_seed(),
            n_sims: default_sims(),
            checkpoints: default_checkpoints(),
            regret_kind: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(RunError::io(path))?;
        Self::from_json(&text).map_err(|e| match e {
            RunError::Json(j) => RunError::Config(format!("{}: {j}", path.display())),
            other => other,
        })
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_sims).map(|i| self.seed.wrapping_add(i)).collect()
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return bad(format!("name '{}' must be non-empty and use [A-Za-z0-9._-]", self.name));
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.n_sims == 0 {
            return bad("n_sims must be at least 1".into());
        }
        if let Some(&c) = self.checkpoints.iter().find(|&&c| c == 0 || c > self.horizon) {
            return bad(format!("checkpoint {c} outside 1..={}", self.horizon));
        }
        if self.scorer.is_none() && !self.schedule.is_zero() {
            return bad("a nonzero schedule needs a scorer".into());
        }
        self.schedule.validated().map_err(|e| RunError::Config(e.to_string()))?;
        EmaTracker::new(self.ema_beta)?;
        PolicyConfig::new(2, 1, self.policy.alpha, self.policy.lambda_reg)?;
        Ok(())
    }

    pub fn policy_config(&self, num_arms: usize, dim: usize) -> Result<PolicyConfig, RunError> {
        Ok(PolicyConfig::new(num_arms, dim, self.policy.alpha, self.policy.lambda_reg)?
            .with_solve_mode(self.policy.solve_mode))
    }
}

/// Result of one episode, with the final learner state for inspection.
#[derive(Debug, Clone)]
pub struct Episode {
    pub records: Vec<RoundRecord>,
    pub policy: LinUcb,
    pub ema: EmaTracker,
    pub regret_kind: RegretKind,
}

/// Settings consumed by [`run_episode`], separated from dataset and output
/// concerns.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSettings {
    pub policy: PolicySettings,
    pub schedule: ScheduleSpec,
    pub ema_beta: f64,
    pub horizon: u64,
}

impl From<&RunConfig> for EpisodeSettings {
    fn from(c: &RunConfig) -> Self {
        Self {
            policy: c.policy.clone(),
            schedule: c.schedule,
            ema_beta: c.ema_beta,
            horizon: c.horizon,
        }
    }
}

fn format_pseudo(num_arms: usize, played: usize, pred: &ScorePrediction) -> String {
    (0..num_arms)
        .map(|a| {
            if a == played {
                String::new()
            } else {
                pred.get(a).map(|v| v.to_string()).unwrap_or_default()
            }
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn log_call(
    sink: &mut Option<&mut dyn PredictionSink>,
    request: &ScoreRequest,
    outcome: &ScoreOutcome,
) -> Result<(), RunError> {
    if let Some(sink) = sink {
        for rec in PredictionRecord::from_outcome(request, outcome) {
            sink.append(&rec).map_err(RunError::io("prediction log"))?;
        }
    }
    Ok(())
}

pub fn run_episode<E: Environment + ?Sized>(
    settings: &EpisodeSettings,
    env: &mut E,
    mut scorer: Option<&mut dyn Scorer>,
    mut sink: Option<&mut dyn PredictionSink>,
) -> Result<Episode, RunError> {
    let k = env.num_arms();
    let policy_cfg = PolicyConfig::new(k, env.dim(), settings.policy.alpha, settings.policy.lambda_reg)?
        .with_solve_mode(settings.policy.solve_mode);
    let mut policy = LinUcb::new(policy_cfg)?;
    let mut ema = EmaTracker::new(settings.ema_beta)?;
    if scorer.is_none() && !settings.schedule.is_zero() {
        return Err(RunError::Config("a nonzero schedule needs a scorer".into()));
    }
    let range = env.reward_range();
    let mut history: VecDeque<HistoryEntry> = VecDeque::with_capacity(GENERIC_HISTORY_ROUNDS + 1);
    let mut records = Vec::with_capacity(settings.horizon as usize);
    let (mut cum_real, mut cum_exp) = (0.0, 0.0);

    for t in 0..settings.horizon {
        let round = t + 1;
        let step = env.next_step()?;
        let arm = policy.select(&step.contexts)?;
        let others: Vec<usize> = (0..k).filter(|&a| a != arm).collect();
        let request = |mode: ScoreMode, targets: Vec<usize>| ScoreRequest {
            round,
            mode,
            context_text: step.context_text.clone(),
            feature_text: step.feature_text.clone(),
            user_history: step.user_history.clone(),
            arm_descriptions: step.arm_texts.clone(),
            target_arms: targets,
            played_arm: Some(arm),
            history: history.iter().cloned().collect(),
            reward_range: range,
        };

        // Everything the scorer says about this round is fixed before the
        // reward is drawn, except the counterfactual call of split scorers.
        let mut tokens = (0u64, 0u64);
        let mut early: Option<ScoreOutcome> = None;
        if let Some(s) = scorer.as_deref_mut() {
            let req = if s.joint() {
                request(ScoreMode::JointAllArms, (0..k).collect())
            } else {
                request(ScoreMode::Probe, vec![arm])
            };
            let out = s.score(&req, Some(&step.expected_rewards))?;
            log_call(&mut sink, &req, &out)?;
            early = Some(out);
        }

        let reward = env.pull(arm)?;
        policy.update(arm, &step.contexts[arm], reward, 1.0)?;

        let mut status = ScorerStatus::None;
        let mut combined: Option<ScorePrediction> = None;
        if let (Some(s), Some(first)) = (scorer.as_deref_mut(), early) {
            let (ti, to) = first.tokens();
            tokens = (tokens.0 + ti, tokens.1 + to);
            status = ScorerStatus::Unavailable;
            if let ScoreOutcome::Ok(first) = first {
                if s.joint() || others.is_empty() {
                    combined = Some(first);
                } else {
                    let req = request(ScoreMode::Counterfactual, others.clone());
                    let out = s.score(&req, Some(&step.expected_rewards))?;
                    log_call(&mut sink, &req, &out)?;
                    let (ti, to) = out.tokens();
                    tokens = (tokens.0 + ti, tokens.1 + to);
                    if let ScoreOutcome::Ok(cf) = out {
                        let mut merged = first;
                        merged.predictions.extend(cf.predictions);
                        combined = Some(merged);
                    }
                }
            }
        }

        let mut weight = 0.0;
        let mut probe_prediction = None;
        let mut pseudo = String::new();
        if let Some(pred) = combined {
            let probe = pred
                .get(arm)
                .ok_or_else(|| ScorerError::InvalidRequest(format!("round {round}: no probe for arm {arm}")))?;
            if let Some(&missing) = others.iter().find(|&&a| pred.get(a).is_none()) {
                return Err(ScorerError::InvalidRequest(format!("round {round}: no prediction for arm {missing}")).into());
            }
            status = ScorerStatus::Ok;
            probe_prediction = Some(probe);
            pseudo = format_pseudo(k, arm, &pred);
            ema.record(probe, reward)?;
            weight = settings.schedule.weight(t, ema.current_error());
            if weight > 0.0 {
                for &a in &others {
                    let r_hat = pred.get(a).expect("checked above");
                    policy.update(a, &step.contexts[a], r_hat, weight)?;
                }
            }
        }

        let expected_chosen = step.expected_rewards[arm];
        let regret_realized = step.r_star - reward;
        let regret_expected = step.r_star - expected_chosen;
        cum_real += regret_realized;
        cum_exp += regret_expected;
        records.push(RoundRecord {
            t: round,
            chosen_arm: arm,
            realized_reward: reward,
            expected_reward_chosen: expected_chosen,
            r_star: step.r_star,
            regret_realized,
            regret_expected,
            cum_regret_realized: cum_real,
            cum_regret_expected: cum_exp,
            weight,
            ema_error: ema.current_error(),
            probe_prediction,
            pseudo_predictions: pseudo,
            tokens_in: tokens.0,
            tokens_out: tokens.1,
            scorer_status: status,
        });

        history.push_front(HistoryEntry {
            round,
            arm,
            reward,
            context_text: step.context_text.clone(),
        });
        history.truncate(GENERIC_HISTORY_ROUNDS);
    }

    Ok(Episode {
        records,
        policy,
        ema,
        regret_kind: env.regret_kind(),
    })
}

/// Plain disjoint LinUCB with no scorer, schedule or calibration code in
/// the loop. Used as the reference the zero-weight runner must reproduce.
pub fn run_linucb_reference<E: Environment + ?Sized>(
    policy: &PolicySettings,
    env: &mut E,
    horizon: u64,
) -> Result<Vec<RoundRecord>, RunError> {
    let cfg = PolicyConfig::new(env.num_arms(), env.dim(), policy.alpha, policy.lambda_reg)?
        .with_solve_mode(policy.solve_mode);
    let mut learner = LinUcb::new(cfg)?;
    let mut out = Vec::with_capacity(horizon as usize);
    let (mut cr, mut ce) = (0.0, 0.0);
    for t in 1..=horizon {
        let step = env.next_step()?;
        let arm = learner.select(&step.contexts)?;
        let r = env.pull(arm)?;
        learner.update(arm, &step.contexts[arm], r, 1.0)?;
        cr += step.r_star - r;
        ce += step.r_star - step.expected_rewards[arm];
        out.push(RoundRecord {
            t,
            chosen_arm: arm,
            realized_reward: r,
            expected_reward_chosen: step.expected_rewards[arm],
            r_star: step.r_star,
            regret_realized: step.r_star - r,
            regret_expected: step.r_star - step.expected_rewards[arm],
            cum_regret_realized: cr,
            cum_regret_expected: ce,
            weight: 0.0,
            ema_error: 0.0,
            probe_prediction: None,
            pseudo_predictions: String::new(),
            tokens_in: 0,
            tokens_out: 0,
            scorer_status: ScorerStatus::None,
        });
    }
    Ok(out)
}
