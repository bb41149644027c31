//! Disjoint LinUCB with weighted pseudo-observations from an external reward
//! scorer, time and calibration-gated decay of the pseudo-observation weight,
//! and the experiment runner used to compare configurations.

pub mod bandit;
pub mod calibration;
pub mod env;
pub mod runner;
pub mod schedule;
pub mod scorer;

pub use bandit::{ArmState, BanditError, ContextVector, LinUcb, PolicyConfig, SolveMode};
pub use calibration::{CalibrationError, EmaTracker};
pub use schedule::{ScheduleError, ScheduleSpec, TimeDecay};
pub use scorer::{ScoreMode, ScoreOutcome, ScoreRequest, Scorer, ScorerError, ScorerSpec};
pub use runner::{run_episode, Episode, EpisodeSettings, RoundRecord, RunConfig, RunError, RunSummary};
