use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Episode, RunError};
use crate::env::RegretKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerStatus {
    /// No scorer configured.
    None,
    Ok,
    Unavailable,
}

/// One CSV row. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    pub chosen_arm: usize,
    pub realized_reward: f64,
    pub expected_reward_chosen: f64,
    pub r_star: f64,
    pub regret_realized: f64,
    pub regret_expected: f64,
    pub cum_regret_realized: f64,
    pub cum_regret_expected: f64,
    pub weight: f64,
    pub ema_error: f64,
    pub probe_prediction: Option<f64>,
    /// Per-arm predictions joined by `;`, blank for the played arm.
    pub pseudo_predictions: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub scorer_status: ScorerStatus,
}

impl RoundRecord {
    pub fn cum_regret(&self, kind: RegretKind) -> f64 {
        match kind {
            RegretKind::Expected => self.cum_regret_expected,
            RegretKind::Realized => self.cum_regret_realized,
        }
    }
}

pub fn write_rounds_csv(path: &Path, records: &[RoundRecord]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(RunError::io(path))?;
    Ok(())
}

pub fn read_rounds_csv(path: &Path) -> Result<Vec<RoundRecord>, RunError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<RoundRecord>, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub cum_regret: f64,
    pub cum_regret_realized: f64,
    pub cum_regret_expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub environment: String,
    pub seed: u64,
    pub rounds: u64,
    pub regret_kind: RegretKind,
    pub checkpoints: Vec<Checkpoint>,
    pub final_cum_regret: f64,
    pub total_tokens_in: u64,
    pub total_tokens_out: u64,
    pub mean_weight: f64,
    pub final_ema_error: f64,
    pub scorer_ok_rounds: u64,
    pub scorer_unavailable_rounds: u64,
    /// Per-arm real and pseudo update counts of the final learner.
    pub n_real: Vec<u64>,
    pub n_pseudo: Vec<u64>,
    /// Wall-clock time; kept out of the CSV so that reruns are identical.
    #[serde(default)]
    pub elapsed_ms: Option<u64>,
}

impl RunSummary {
    pub fn checkpoint(&self, t: u64) -> Option<f64> {
        self.checkpoints.iter().find(|c| c.t == t).map(|c| c.cum_regret)
    }
}

/// Summary statistics of a round log. Ledger counts are left empty; see
/// [`Episode::summary`] for the version that fills them in.
pub fn summarize(
    name: &str,
    environment: &str,
    seed: u64,
    records: &[RoundRecord],
    checkpoints: &[u64],
    kind: RegretKind,
) -> Result<RunSummary, RunError> {
    let cps = checkpoints
        .iter()
        .map(|&t| {
            let r = records
                .iter()
                .find(|r| r.t == t)
                .ok_or(RunError::MissingCheckpoint(t))?;
            Ok(Checkpoint {
                t,
                cum_regret: r.cum_regret(kind),
                cum_regret_realized: r.cum_regret_realized,
                cum_regret_expected: r.cum_regret_expected,
            })
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let n = records.len().max(1) as f64;
    Ok(RunSummary {
        name: name.to_string(),
        environment: environment.to_string(),
        seed,
        rounds: records.len() as u64,
        regret_kind: kind,
        checkpoints: cps,
        final_cum_regret: records.last().map_or(0.0, |r| r.cum_regret(kind)),
        total_tokens_in: records.iter().map(|r| r.tokens_in).sum(),
        total_tokens_out: records.iter().map(|r| r.tokens_out).sum(),
        mean_weight: records.iter().map(|r| r.weight).sum::<f64>() / n,
        final_ema_error: records.last().map_or(0.0, |r| r.ema_error),
        scorer_ok_rounds: records.iter().filter(|r| r.scorer_status == ScorerStatus::Ok).count() as u64,
        scorer_unavailable_rounds: records
            .iter()
            .filter(|r| r.scorer_status == ScorerStatus::Unavailable)
            .count() as u64,
        n_real: Vec::new(),
        n_pseudo: Vec::new(),
        elapsed_ms: None,
    })
}

impl Episode {
    pub fn summary(
        &self,
        name: &str,
        environment: &str,
        seed: u64,
        checkpoints: &[u64],
        kind: Option<RegretKind>,
    ) -> Result<RunSummary, RunError> {
        let mut s = summarize(
            name,
            environment,
            seed,
            &self.records,
            checkpoints,
            kind.unwrap_or(self.regret_kind),
        )?;
        s.n_real = self.policy.arms().iter().map(|a| a.n_real()).collect();
        s.n_pseudo = self.policy.arms().iter().map(|a| a.n_pseudo()).collect();
        Ok(s)
    }
}
