//! The five standard configurations compared in the experiments.
//!
//! | name            | prompt style                  | schedule                      |
//! |-----------------|-------------------------------|-------------------------------|
//! | `no_llm`        | none                          | zero                          |
//! | `llm_default`   | `generic_counterfactual`      | constant 0.1                  |
//! | `llm_click`     | `mind_click`                  | constant 0.1                  |
//! | `llm_cal_gated` | `mind_click`                  | calibration-gated 0.3, η = 10 |
//! | `llm_context`   | `counterfactual_with_context` | constant 0.1                  |
//!
//! All use α = 1, λ_reg = 1, β = 0.95, T = 100 and seed 42. The click
//! prompt talks about articles, so [`all_presets`] leaves the two
//! `mind_click` rows out for mushroom.

use super::RunConfig;
use crate::env::EnvSpec;
use crate::schedule::ScheduleSpec;
use crate::scorer::{LlmConfig, PromptStyle, ScorerSpec};

pub const PRESET_NAMES: [&str; 5] = ["no_llm", "llm_default", "llm_click", "llm_cal_gated", "llm_context"];

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";

/// Builds a preset by name. `llm` supplies endpoint, model and transport
/// settings; its prompt style is overridden by the preset.
pub fn preset(name: &str, environment: EnvSpec, llm: &LlmConfig) -> Option<RunConfig> {
    let with = |style: PromptStyle| {
        let mut c = llm.clone();
        c.prompt_style = style;
        Some(ScorerSpec::Llm(c))
    };
    let (scorer, schedule) = match name {
        "no_llm" => (None, ScheduleSpec::Zero),
        "llm_default" => (
            with(PromptStyle::GenericCounterfactual),
            ScheduleSpec::Constant { base_weight: 0.1 },
        ),
        "llm_click" => (with(PromptStyle::MindClick), ScheduleSpec::Constant { base_weight: 0.1 }),
        "llm_cal_gated" => (
            with(PromptStyle::MindClick),
            ScheduleSpec::CalibrationGated { base_weight: 0.3, eta: 10.0 },
        ),
        "llm_context" => (
            with(PromptStyle::CounterfactualWithContext),
            ScheduleSpec::Constant { base_weight: 0.1 },
        ),
        _ => return None,
    };
    let mut cfg = RunConfig::new(name, environment);
    cfg.scorer = scorer;
    cfg.schedule = schedule;
    Some(cfg)
}

pub fn all_presets(environment: &EnvSpec, llm: &LlmConfig) -> Vec<RunConfig> {
    PRESET_NAMES
        .iter()
        .filter_map(|n| preset(n, environment.clone(), llm))
        .filter(|c| !matches!(environment, EnvSpec::Mushroom(_)) || !uses_click_prompt(c))
        .collect()
}

fn uses_click_prompt(cfg: &RunConfig) -> bool {
    matches!(&cfg.scorer, Some(ScorerSpec::Llm(l)) if l.prompt_style == PromptStyle::MindClick)
}

pub fn default_llm() -> LlmConfig {
    LlmConfig::new(DEFAULT_ENDPOINT, DEFAULT_MODEL, PromptStyle::GenericCounterfactual)
}
