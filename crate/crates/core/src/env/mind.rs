//! MIND-style news recommendation rounds.
//!
//! Each round samples one impression. The candidate pool is the impression's
//! non-clicked articles plus one clicked article (chosen uniformly when the
//! user clicked several); `K` candidates are drawn uniformly from that pool,
//! so whether the clicked article is among the arms follows the slate's
//! natural odds. Per-arm contexts hash the user's recent history titles
//! together with the candidate's title and abstract.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hashing::{tokenize, FeatureHasher};
use super::{check_arm, read_file, EnvError, EnvStep, Environment, RegretKind};
use crate::bandit::ContextVector;

fn default_arms() -> usize {
    5
}
fn default_hash_dim() -> usize {
    64
}
fn default_history_len() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MindConfig {
    pub behaviors_path: PathBuf,
    pub news_path: PathBuf,
    #[serde(default = "default_arms")]
    pub num_arms: usize,
    #[serde(default = "default_hash_dim")]
    pub hash_dim: usize,
    #[serde(default = "default_history_len")]
    pub history_len: usize,
}

impl MindConfig {
    pub fn new(behaviors_path: impl Into<PathBuf>, news_path: impl Into<PathBuf>) -> Self {
        Self {
            behaviors_path: behaviors_path.into(),
            news_path: news_path.into(),
            num_arms: default_arms(),
            hash_dim: default_hash_dim(),
            history_len: default_history_len(),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.num_arms < 2 {
            return Err(EnvError::InvalidConfig(format!("MIND needs K >= 2, got {}", self.num_arms)));
        }
        if self.hash_dim < 8 {
            return Err(EnvError::InvalidConfig(format!("hash_dim must be >= 8, got {}", self.hash_dim)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct NewsItem {
    category: String,
    subcategory: String,
    title: String,
    abstract_text: String,
}

#[derive(Debug, Clone)]
struct Impression {
    history: Vec<String>,
    clicked: Vec<String>,
    negatives: Vec<String>,
}

/// Load-time bookkeeping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MindStats {
    pub impressions: usize,
    pub skipped_no_candidates: usize,
    pub skipped_small_slate: usize,
    pub bad_behavior_lines: usize,
    pub bad_news_lines: usize,
}

#[derive(Debug)]
pub struct MindData {
    config: MindConfig,
    news: HashMap<String, NewsItem>,
    impressions: Vec<Impression>,
    stats: MindStats,
    hasher: FeatureHasher,
}

impl MindData {
    pub fn load(config: &MindConfig) -> Result<Self, EnvError> {
        let news = read_file(&config.news_path)?;
        let behaviors = read_file(&config.behaviors_path)?;
        Self::parse(config, &news, &behaviors)
    }

    pub fn parse(config: &MindConfig, news_text: &str, behaviors_text: &str) -> Result<Self, EnvError> {
        config.validate()?;
        let mut stats = MindStats::default();

        let mut news = HashMap::new();
        let mut news_lines = 0;
        for line in news_text.lines().filter(|l| !l.trim().is_empty()) {
            news_lines += 1;
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() < 4 || f[0].is_empty() {
                stats.bad_news_lines += 1;
                continue;
            }
            news.insert(
                f[0].to_string(),
                NewsItem {
                    category: f[1].to_string(),
                    subcategory: f[2].to_string(),
                    title: f[3].to_string(),
                    abstract_text: f.get(4).copied().unwrap_or("").to_string(),
                },
            );
        }
        check_bad_lines(&config.news_path, stats.bad_news_lines, news_lines)?;

        let mut impressions = Vec::new();
        let mut behavior_lines = 0;
        for line in behaviors_text.lines().filter(|l| !l.trim().is_empty()) {
            behavior_lines += 1;
            let Some(imp) = parse_behavior(line, config.history_len) else {
                stats.bad_behavior_lines += 1;
                continue;
            };
            let pool = imp.negatives.len() + usize::from(!imp.clicked.is_empty());
            if pool == 0 {
                stats.skipped_no_candidates += 1;
            } else if pool < config.num_arms {
                stats.skipped_small_slate += 1;
            } else {
                impressions.push(imp);
            }
        }
        check_bad_lines(&config.behaviors_path, stats.bad_behavior_lines, behavior_lines)?;
        if impressions.is_empty() {
            return Err(EnvError::Empty(format!(
                "no impression in {} offers {} candidates",
                config.behaviors_path.display(),
                config.num_arms
            )));
        }
        stats.impressions = impressions.len();
        Ok(Self {
            config: config.clone(),
            news,
            impressions,
            stats,
            hasher: FeatureHasher::new(config.hash_dim),
        })
    }

    pub fn stats(&self) -> MindStats {
        self.stats
    }

    pub fn config(&self) -> &MindConfig {
        &self.config
    }

    fn title(&self, id: &str) -> Option<&str> {
        self.news.get(id).map(|n| n.title.as_str())
    }

    fn context(&self, history_tokens: &[String], candidate: &str) -> Result<ContextVector, EnvError> {
        let mut cand_tokens = Vec::new();
        if let Some(item) = self.news.get(candidate) {
            cand_tokens.extend(tokenize(&item.title));
            cand_tokens.extend(tokenize(&item.abstract_text));
        }
        let hashed = self
            .hasher
            .transform(history_tokens.iter().chain(cand_tokens.iter()).map(String::as_str));
        Ok(ContextVector::augmented(hashed)?)
    }
}

fn check_bad_lines(path: &Path, bad: usize, total: usize) -> Result<(), EnvError> {
    // More than 1% unparseable means the file is probably not MIND format.
    if bad * 100 > total {
        return Err(EnvError::TooManyBadLines {
            path: path.to_path_buf(),
            bad,
            total,
        });
    }
    Ok(())
}

fn parse_behavior(line: &str, history_len: usize) -> Option<Impression> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != 5 {
        return None;
    }
    let history: Vec<&str> = f[3].split_whitespace().collect();
    let keep = history.len().saturating_sub(history_len);
    let mut clicked = Vec::new();
    let mut negatives = Vec::new();
    for tok in f[4].split_whitespace() {
        let (id, label) = tok.rsplit_once('-')?;
        match label {
            "1" => clicked.push(id.to_string()),
            "0" => negatives.push(id.to_string()),
            _ => return None,
        }
    }
    Some(Impression {
        history: history[keep..].iter().map(|s| s.to_string()).collect(),
        clicked,
        negatives,
    })
}

pub struct MindEnv {
    data: Arc<MindData>,
    rng: ChaCha8Rng,
    pending: Option<Vec<f64>>,
}

impl MindEnv {
    pub fn new(data: Arc<MindData>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Self { data, rng, pending: None }
    }
}

impl Environment for MindEnv {
    fn name(&self) -> &'static str {
        "mind"
    }

    fn num_arms(&self) -> usize {
        self.data.config.num_arms
    }

    fn dim(&self) -> usize {
        self.data.config.hash_dim + 1
    }

    fn reward_range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn regret_kind(&self) -> RegretKind {
        RegretKind::Realized
    }

    fn next_step(&mut self) -> Result<EnvStep, EnvError> {
        let data = &*self.data;
        let k = data.config.num_arms;
        let imp = &data.impressions[self.rng.random_range(0..data.impressions.len())];

        let mut pool: Vec<&str> = imp.negatives.iter().map(String::as_str).collect();
        let target = if imp.clicked.is_empty() {
            None
        } else {
            let t = imp.clicked[self.rng.random_range(0..imp.clicked.len())].as_str();
            pool.push(t);
            Some(t)
        };
        let chosen: Vec<&str> = sample(&mut self.rng, pool.len(), k).into_iter().map(|i| pool[i]).collect();

        let history_titles: Vec<String> = imp
            .history
            .iter()
            .filter_map(|id| data.title(id).map(str::to_string))
            .collect();
        let history_tokens: Vec<String> = history_titles.iter().flat_map(|t| tokenize(t)).collect();

        let contexts = chosen
            .iter()
            .map(|id| data.context(&history_tokens, id))
            .collect::<Result<Vec<_>, _>>()?;
        let expected: Vec<f64> = chosen.iter().map(|id| f64::from(Some(*id) == target)).collect();
        let arm_texts: Vec<String> = chosen
            .iter()
            .map(|id| data.title(id).unwrap_or(id).to_string())
            .collect();
        let feature_text = chosen
            .iter()
            .enumerate()
            .map(|(a, id)| match data.news.get(*id) {
                Some(n) => format!("arm_{a}: [{}/{}] {}", n.category, n.subcategory, n.abstract_text),
                None => format!("arm_{a}: (no metadata)"),
            })
            .collect::<Vec<_>>()
            .join("\n");
        let context_text = if history_titles.is_empty() {
            "The user has no reading history.".to_string()
        } else {
            format!("The user recently read: {}", history_titles.join(" | "))
        };

        let mut step = EnvStep::new(contexts, expected.clone(), arm_texts, context_text);
        step.feature_text = feature_text;
        step.user_history = history_titles;
        self.pending = Some(expected);
        Ok(step)
    }

    fn pull(&mut self, arm: usize) -> Result<f64, EnvError> {
        check_arm(arm, self.num_arms())?;
        let expected = self.pending.take().ok_or(EnvError::NoPendingRound)?;
        Ok(expected[arm])
    }
}
