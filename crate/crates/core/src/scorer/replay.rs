//! Prediction logs and the scorer that replays them.
//!
//! Each scorer call is logged as one JSON line per target arm. Token counts
//! of a call sit on its first line so that summing over lines gives the call
//! total. A failed call is logged with `ok: false` and no prediction.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ArmPrediction, ScoreMode, ScoreOutcome, ScorePrediction, ScoreRequest, Scorer, ScorerError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub t: u64,
    pub mode: ScoreMode,
    pub arm: usize,
    pub predicted_reward: Option<f64>,
    #[serde(default)]
    pub confidence: Option<f64>,
    #[serde(default)]
    pub tokens_in: u64,
    #[serde(default)]
    pub tokens_out: u64,
    #[serde(default = "yes")]
    pub ok: bool,
}

fn yes() -> bool {
    true
}

impl PredictionRecord {
    /// Flattens one call into log lines, in target order.
    pub fn from_outcome(request: &ScoreRequest, outcome: &ScoreOutcome) -> Vec<PredictionRecord> {
        let (tokens_in, tokens_out) = outcome.tokens();
        request
            .target_arms
            .iter()
            .enumerate()
            .map(|(i, &arm)| {
                let (predicted_reward, confidence, ok) = match outcome {
                    ScoreOutcome::Ok(p) => {
                        let hit = p.predictions.iter().find(|q| q.arm == arm);
                        (hit.map(|q| q.predicted_reward), hit.and_then(|q| q.confidence), true)
                    }
                    ScoreOutcome::Unavailable { .. } => (None, None, false),
                };
                PredictionRecord {
                    t: request.round,
                    mode: request.mode,
                    arm,
                    predicted_reward,
                    confidence,
                    tokens_in: if i == 0 { tokens_in } else { 0 },
                    tokens_out: if i == 0 { tokens_out } else { 0 },
                    ok,
                }
            })
            .collect()
    }
}

pub trait PredictionSink {
    fn append(&mut self, record: &PredictionRecord) -> io::Result<()>;
}

impl PredictionSink for Vec<PredictionRecord> {
    fn append(&mut self, record: &PredictionRecord) -> io::Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

/// JSON-lines writer.
pub struct PredictionLog<W: Write> {
    writer: W,
}

impl PredictionLog<BufWriter<File>> {
    pub fn create(path: &Path) -> io::Result<Self> {
        Ok(Self::new(BufWriter::new(File::create(path)?)))
    }
}

impl<W: Write> PredictionLog<W> {
    pub fn new(writer: W) -> Self {
        Self { writer }
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.writer.flush()
    }

    pub fn into_inner(self) -> W {
        self.writer
    }
}

impl<W: Write> PredictionSink for PredictionLog<W> {
    fn append(&mut self, record: &PredictionRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.writer, record)?;
        self.writer.write_all(b"\n")
    }
}

pub fn read_log(path: &Path) -> Result<Vec<PredictionRecord>, ScorerError> {
    let io_err = |source| ScorerError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(&line).map_err(|e| ScorerError::ReplayFormat {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.ok && rec.predicted_reward.is_none() {
            return Err(ScorerError::ReplayFormat {
                path: path.to_path_buf(),
                line: i + 1,
                message: "ok record without predicted_reward".into(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Answers requests from a prediction log. A request for an entry the log
/// does not contain is a hard error, never a silent fallback.
pub struct ReplayScorer {
    source: PathBuf,
    records: HashMap<(u64, ScoreMode, usize), PredictionRecord>,
    joint: bool,
}

impl ReplayScorer {
    pub fn load(path: &Path) -> Result<Self, ScorerError> {
        let mut s = Self::from_records(read_log(path)?);
        s.source = path.to_path_buf();
        Ok(s)
    }

    pub fn from_records(records: Vec<PredictionRecord>) -> Self {
        let joint = records.iter().any(|r| r.mode == ScoreMode::JointAllArms);
        let records = records.into_iter().map(|r| ((r.t, r.mode, r.arm), r)).collect();
        Self {
            source: PathBuf::new(),
            records,
            joint,
        }
    }

    pub fn source(&self) -> &Path {
        &self.source
    }
}

impl Scorer for ReplayScorer {
    fn score(&mut self, request: &ScoreRequest, _hidden_truth: Option<&[f64]>) -> Result<ScoreOutcome, ScorerError> {
        request.validate()?;
        let mut hits = Vec::with_capacity(request.target_arms.len());
        for &arm in &request.target_arms {
            let rec = self
                .records
                .get(&(request.round, request.mode, arm))
                .ok_or(ScorerError::ReplayMissing { round: request.round, arm })?;
            hits.push(rec);
        }
        let tokens_in = hits.iter().map(|r| r.tokens_in).sum();
        let tokens_out = hits.iter().map(|r| r.tokens_out).sum();
        if hits.iter().any(|r| !r.ok) {
            return Ok(ScoreOutcome::Unavailable {
                reason: "unavailable in replay log".into(),
                tokens_in,
                tokens_out,
            });
        }
        let predictions = hits
            .iter()
            .map(|r| ArmPrediction {
                arm: r.arm,
                predicted_reward: r.predicted_reward.unwrap_or_default(),
                confidence: r.confidence,
            })
            .collect();
        Ok(ScoreOutcome::Ok(ScorePrediction {
            predictions,
            tokens_in,
            tokens_out,
            raw_payload: String::new(),
        }))
    }

    fn joint(&self) -> bool {
        self.joint
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::request;
    use super::*;

    #[test]
    fn round_trip_through_file() {
        let req = request(ScoreMode::JointAllArms, vec![0, 1, 2], 3);
        let outcome = ScoreOutcome::Ok(ScorePrediction {
            predictions: vec![
                ArmPrediction { arm: 0, predicted_reward: 0.1, confidence: Some(0.8) },
                ArmPrediction { arm: 1, predicted_reward: 0.25, confidence: None },
                ArmPrediction { arm: 2, predicted_reward: 0.9, confidence: None },
            ],
            tokens_in: 300,
            tokens_out: 40,
            raw_payload: "{}".into(),
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let mut log = PredictionLog::create(&path).unwrap();
        for r in PredictionRecord::from_outcome(&req, &outcome) {
            log.append(&r).unwrap();
        }
        log.flush().unwrap();

        let mut replay = ReplayScorer::load(&path).unwrap();
        assert!(replay.joint());
        let ScoreOutcome::Ok(p) = replay.score(&req, None).unwrap() else { panic!() };
        assert_eq!(p.get(1), Some(0.25));
        assert_eq!((p.tokens_in, p.tokens_out), (300, 40));
    }

    #[test]
    fn missing_entry_is_an_error() {
        let mut replay = ReplayScorer::from_records(Vec::new());
        assert!(matches!(
            replay.score(&request(ScoreMode::Probe, vec![1], 2), None),
            Err(ScorerError::ReplayMissing { round: 3, arm: 1 })
        ));
    }

    #[test]
    fn logged_failure_replays_as_unavailable() {
        let req = request(ScoreMode::Counterfactual, vec![0, 1], 2);
        let outcome = ScoreOutcome::Unavailable { reason: "timeout".into(), tokens_in: 5, tokens_out: 0 };
        let recs = PredictionRecord::from_outcome(&req, &outcome);
        assert!(recs.iter().all(|r| !r.ok && r.predicted_reward.is_none()));
        let mut replay = ReplayScorer::from_records(recs);
        assert!(!replay.joint());
        assert_eq!(
            replay.score(&req, None).unwrap(),
            ScoreOutcome::Unavailable { reason: "unavailable in replay log".into(), tokens_in: 5, tokens_out: 0 }
        );
    }

    #[test]
    fn ok_defaults_to_true() {
        let rec: PredictionRecord = serde_json::from_str(
            r#"{"t":1,"mode":"probe","arm":0,"predicted_reward":0.5,"confidence":null,"tokens_in":1,"tokens_out":2}"#,
        )
        .unwrap();
        assert!(rec.ok);
    }

    #[test]
    fn malformed_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"t\":1,\"mode\":\"probe\",\"arm\":0,\"predicted_reward\":1}\nnot json\n").unwrap();
        assert!(matches!(read_log(&path), Err(ScorerError::ReplayFormat { line: 2, .. })));
    }
}
