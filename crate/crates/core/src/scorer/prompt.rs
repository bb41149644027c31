//! Prompt templates.
//!
//! `generic_counterfactual` asks about the bandit abstraction directly and
//! shows the last five rounds. `mind_click` asks for click probabilities given
//! the last ten titles the user read. `counterfactual_with_context` is the
//! generic template with decoded feature descriptions added to the context
//! and to every history line.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{ScoreMode, ScoreRequest, ScorerError};

pub const GENERIC_HISTORY_ROUNDS: usize = 5;
pub const CLICK_HISTORY_TITLES: usize = 10;

pub const SYSTEM_PROMPT: &str =
    "You are a careful forecaster. Always answer with a single JSON object and nothing else.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    GenericCounterfactual,
    MindClick,
    CounterfactualWithContext,
}

impl PromptStyle {
    /// Styles that answer every arm in one request per round.
    pub fn is_joint(self) -> bool {
        matches!(self, PromptStyle::MindClick)
    }
}

pub fn arm_id(arm: usize) -> String {
    format!("arm_{arm}")
}

fn fmt_num(v: f64) -> String {
    // Integral rewards print without a trailing ".0".
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn answer_format(targets: &[usize], what: &str) -> String {
    let ids: Vec<String> = targets.iter().map(|&a| format!("\"{}\"", arm_id(a))).collect();
    format!(
        "Respond with a JSON object whose keys are {} and whose values are objects \
         {{\"predicted_reward\": <{what}>, \"confidence\": <number in [0, 1]>}}.",
        ids.join(", ")
    )
}

pub fn render_prompt(style: PromptStyle, request: &ScoreRequest) -> Result<String, ScorerError> {
    request.validate()?;
    match (style, request.mode) {
        (PromptStyle::MindClick, ScoreMode::JointAllArms) => Ok(render_click(request)),
        (PromptStyle::MindClick, mode) => Err(ScorerError::InvalidRequest(format!(
            "mind_click renders joint all-arms requests only, got {mode:?}"
        ))),
        (_, ScoreMode::JointAllArms) => Err(ScorerError::InvalidRequest(
            "counterfactual styles render probe or counterfactual requests".into(),
        )),
        (style, _) => Ok(render_generic(request, style == PromptStyle::CounterfactualWithContext)),
    }
}

fn render_generic(req: &ScoreRequest, with_context: bool) -> String {
    let mut out = String::new();
    out.push_str("You are assisting a contextual bandit learner that chooses one arm per round.\n\n");
    let _ = writeln!(out, "Current context:\n{}", req.context_text);
    if with_context && !req.feature_text.is_empty() {
        let _ = writeln!(out, "\nFeature descriptions:\n{}", req.feature_text);
    }
    out.push_str("\nAvailable arms:\n");
    for (a, desc) in req.arm_descriptions.iter().enumerate() {
        let _ = writeln!(out, "- {}: {}", arm_id(a), desc);
    }
    let _ = writeln!(
        out,
        "\nRewards lie in [{}, {}].",
        fmt_num(req.reward_range.0),
        fmt_num(req.reward_range.1)
    );

    let shown = req.history.len().min(GENERIC_HISTORY_ROUNDS);
    if shown == 0 {
        out.push_str("\nNo previous rounds.\n");
    } else {
        let _ = writeln!(out, "\nHistory of the last {shown} rounds (most recent first):");
        for h in &req.history[..shown] {
            let _ = write!(
                out,
                "- round {}: chose {}, observed reward {}",
                h.round,
                arm_id(h.arm),
                fmt_num(h.reward)
            );
            if with_context {
                let _ = write!(out, " (context: {})", h.context_text);
            }
            out.push('\n');
        }
    }

    out.push('\n');
    match req.mode {
        ScoreMode::Probe => {
            let arm = arm_id(req.target_arms[0]);
            let _ = writeln!(
                out,
                "The learner is about to play {arm}; its outcome has not been observed. \
                 Predict the expected reward the learner will receive from {arm}."
            );
        }
        _ => {
            if let Some(p) = req.played_arm {
                let _ = writeln!(out, "This round the learner played {}.", arm_id(p));
            }
            let ids: Vec<String> = req.target_arms.iter().map(|&a| arm_id(a)).collect();
            let _ = writeln!(
                out,
                "Unplayed arms: {}. For each unplayed arm, predict the expected reward the learner \
                 would have received. Return predictions as JSON.",
                ids.join(", ")
            );
        }
    }
    out.push_str(&answer_format(&req.target_arms, "number"));
    out.push('\n');
    out
}

fn render_click(req: &ScoreRequest) -> String {
    let mut out = String::new();
    out.push_str("A user is browsing a news website.\n\n");
    let skip = req.user_history.len().saturating_sub(CLICK_HISTORY_TITLES);
    let titles = &req.user_history[skip..];
    if titles.is_empty() {
        out.push_str("The user has no reading history.\n");
    } else {
        let _ = writeln!(out, "The user's recent reading history (last {} article titles):", titles.len());
        for (i, t) in titles.iter().enumerate() {
            let _ = writeln!(out, "{}. {}", i + 1, t);
        }
    }
    out.push_str("\nCandidate articles:\n");
    for &a in &req.target_arms {
        let _ = writeln!(out, "- {}: {}", arm_id(a), req.arm_descriptions[a]);
    }
    out.push_str(
        "\nFor each candidate article, predict the probability that this user will click on it. \
         Return predictions as JSON with predicted_reward in [0, 1].\n",
    );
    out.push_str(&answer_format(&req.target_arms, "probability in [0, 1]"));
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::super::HistoryEntry;
    use super::*;

    fn generic_request(history_rounds: u64) -> ScoreRequest {
        ScoreRequest {
            round: history_rounds + 1,
            mode: ScoreMode::Counterfactual,
            context_text: "cap-shape=x, odor=f".into(),
            feature_text: "cap-shape=convex, odor=foul".into(),
            user_history: Vec::new(),
            arm_descriptions: vec!["eat".into(), "don't eat".into()],
            target_arms: vec![1],
            played_arm: Some(0),
            history: (1..=history_rounds)
                .rev()
                .map(|r| HistoryEntry {
                    round: r,
                    arm: (r % 2) as usize,
                    reward: if r % 3 == 0 { -35.0 } else { 5.0 },
                    context_text: format!("odor=n #{r}"),
                })
                .collect(),
            reward_range: (-35.0, 5.0),
        }
    }

    fn click_request(titles: usize) -> ScoreRequest {
        ScoreRequest {
            round: 1,
            mode: ScoreMode::JointAllArms,
            context_text: String::new(),
            feature_text: String::new(),
            user_history: (0..titles).map(|i| format!("Title number {i}")).collect(),
            arm_descriptions: (0..5).map(|i| format!("Candidate story {i}")).collect(),
            target_arms: (0..5).collect(),
            played_arm: None,
            history: Vec::new(),
            reward_range: (0.0, 1.0),
        }
    }

    #[test]
    fn deterministic() {
        let req = generic_request(3);
        assert_eq!(
            render_prompt(PromptStyle::GenericCounterfactual, &req).unwrap(),
            render_prompt(PromptStyle::GenericCounterfactual, &req).unwrap()
        );
    }

    #[test]
    fn generic_keeps_last_five_rounds() {
        let p = render_prompt(PromptStyle::GenericCounterfactual, &generic_request(7)).unwrap();
        assert_eq!(p.lines().filter(|l| l.starts_with("- round ")).count(), 5);
        assert!(p.contains("- round 7:"));
        assert!(p.contains("- round 3:"));
        assert!(!p.contains("- round 2:"));
        assert!(p.contains("Return predictions as JSON."));
        assert!(!p.contains("odor=foul"));
    }

    #[test]
    fn context_style_adds_descriptions() {
        let p = render_prompt(PromptStyle::CounterfactualWithContext, &generic_request(2)).unwrap();
        assert!(p.contains("odor=foul"));
        assert!(p.contains("(context: odor=n #2)"));
    }

    #[test]
    fn probe_names_the_played_arm() {
        let mut req = generic_request(1);
        req.mode = ScoreMode::Probe;
        req.target_arms = vec![0];
        req.played_arm = Some(0);
        let p = render_prompt(PromptStyle::GenericCounterfactual, &req).unwrap();
        assert!(p.contains("about to play arm_0"));
        assert!(p.contains("\"arm_0\""));
    }

    #[test]
    fn click_keeps_last_ten_titles() {
        let p = render_prompt(PromptStyle::MindClick, &click_request(12)).unwrap();
        let numbered = p
            .lines()
            .filter(|l| l.split_once(". Title number").is_some())
            .count();
        assert_eq!(numbered, 10);
        assert!(!p.contains("Title number 1\n"));
        assert!(p.contains("Title number 11"));
        assert!(p.contains("this user will click on it"));
        assert_eq!(p.lines().filter(|l| l.starts_with("- arm_")).count(), 5);
    }

    #[test]
    fn style_mode_mismatch() {
        assert!(render_prompt(PromptStyle::MindClick, &generic_request(1)).is_err());
        assert!(render_prompt(PromptStyle::GenericCounterfactual, &click_request(3)).is_err());
    }
}
