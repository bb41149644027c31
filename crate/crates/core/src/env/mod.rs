//! Bandit environments: UCI Mushroom, MIND-style news recommendation and a
//! synthetic linear bandit.
//!
//! Every environment emits bias-augmented per-arm contexts together with the
//! hidden expected rewards used for regret accounting and by oracle scorers.

pub mod hashing;
pub mod mind;
pub mod mushroom;
pub mod synthetic;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::{BanditError, ContextVector};

pub use mind::{MindConfig, MindData, MindEnv};
pub use mushroom::{MushroomConfig, MushroomData, MushroomEnv, MushroomRewards};
pub use synthetic::{SyntheticConfig, SyntheticEnv};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: unknown value '{value}' for attribute {attribute}")]
    UnknownCategory {
        path: PathBuf,
        line: usize,
        attribute: &'static str,
        value: String,
    },
    #[error("{path}: {bad} of {total} lines unparseable (limit 1%)")]
    TooManyBadLines { path: PathBuf, bad: usize, total: usize },
    #[error("no usable rounds: {0}")]
    Empty(String),
    #[error("pull requested with no pending round")]
    NoPendingRound,
    #[error("arm {arm} out of range for {num_arms} arms")]
    ArmOutOfRange { arm: usize, num_arms: usize },
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Context(#[from] BanditError),
}

/// Which regret column summaries read by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretKind {
    Expected,
    Realized,
}

/// One round as seen by the runner.
#[derive(Debug, Clone)]
pub struct EnvStep {
    pub contexts: Vec<ContextVector>,
    /// Hidden from the policy; used for regret and oracle scorers only.
    pub expected_rewards: Vec<f64>,
    pub r_star: f64,
    pub arm_texts: Vec<String>,
    pub context_text: String,
    /// Longer, decoded feature description for context-enriched prompts.
    pub feature_text: String,
    /// Reading-history titles, most recent last. Empty outside MIND.
    pub user_history: Vec<String>,
}

impl EnvStep {
    /// `r_star` is the largest expected reward.
    pub fn new(
        contexts: Vec<ContextVector>,
        expected_rewards: Vec<f64>,
        arm_texts: Vec<String>,
        context_text: String,
    ) -> Self {
        let r_star = expected_rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            contexts,
            expected_rewards,
            r_star,
            arm_texts,
            context_text,
            feature_text: String::new(),
            user_history: Vec::new(),
        }
    }
}

pub trait Environment {
    fn name(&self) -> &'static str;
    fn num_arms(&self) -> usize;
    /// Context dimension after bias augmentation.
    fn dim(&self) -> usize;
    fn reward_range(&self) -> (f64, f64);
    fn regret_kind(&self) -> RegretKind;
    /// Advances to the next round.
    fn next_step(&mut self) -> Result<EnvStep, EnvError>;
    /// Draws the realized reward of `arm` for the pending round. Allowed
    /// once per round.
    fn pull(&mut self, arm: usize) -> Result<f64, EnvError>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn num_arms(&self) -> usize {
        (**self).num_arms()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn reward_range(&self) -> (f64, f64) {
        (**self).reward_range()
    }
    fn regret_kind(&self) -> RegretKind {
        (**self).regret_kind()
    }
    fn next_step(&mut self) -> Result<EnvStep, EnvError> {
        (**self).next_step()
    }
    fn pull(&mut self, arm: usize) -> Result<f64, EnvError> {
        (**self).pull(arm)
    }
}

/// Serialized environment selection as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    Mushroom(MushroomConfig),
    Mind(MindConfig),
    Synthetic(SyntheticConfig),
}

impl EnvSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::Mushroom(_) => "mushroom",
            EnvSpec::Mind(_) => "mind",
            EnvSpec::Synthetic(_) => "synthetic",
        }
    }
}

/// Parsed dataset shared read-only between episodes.
#[derive(Debug, Clone)]
pub enum LoadedData {
    Mushroom(std::sync::Arc<MushroomData>),
    Mind(std::sync::Arc<MindData>),
    Synthetic(SyntheticConfig),
}

impl LoadedData {
    pub fn load(spec: &EnvSpec) -> Result<Self, EnvError> {
        Ok(match spec {
            EnvSpec::Mushroom(c) => LoadedData::Mushroom(std::sync::Arc::new(MushroomData::load(c)?)),
            EnvSpec::Mind(c) => LoadedData::Mind(std::sync::Arc::new(MindData::load(c)?)),
            EnvSpec::Synthetic(c) => {
                c.validate()?;
                LoadedData::Synthetic(c.clone())
            }
        })
    }

    /// Fresh environment instance seeded for one episode.
    pub fn instantiate(&self, seed: u64) -> Result<Box<dyn Environment + Send>, EnvError> {
        Ok(match self {
            LoadedData::Mushroom(d) => Box::new(MushroomEnv::new(d.clone(), seed)),
            LoadedData::Mind(d) => Box::new(MindEnv::new(d.clone(), seed)),
            LoadedData::Synthetic(c) => Box::new(SyntheticEnv::new(c.clone(), seed)?),
        })
    }
}

pub fn check_arm(arm: usize, num_arms: usize) -> Result<(), EnvError> {
    if arm >= num_arms {
        return Err(EnvError::ArmOutOfRange { arm, num_arms });
    }
    Ok(())
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<String, EnvError> {
    std::fs::read_to_string(path).map_err(|source| EnvError::Io {
        path: path.to_path_buf(),
        source,
    })
}
