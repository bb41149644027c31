//! Chat-completions scorer.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompt::{arm_id, render_prompt, PromptStyle, SYSTEM_PROMPT};
use super::{clip, ArmPrediction, ScoreOutcome, ScorePrediction, ScoreRequest, Scorer, ScorerError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    /// Full URL of an OpenAI-compatible chat completions endpoint.
    pub endpoint: String,
    pub model: String,
    pub prompt_style: PromptStyle,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Extra attempts after a malformed or failed response.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    /// Name of the environment variable holding the bearer token.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
}

fn default_timeout() -> u64 {
    30
}

fn default_retries() -> u32 {
    2
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}

impl LlmConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, prompt_style: PromptStyle) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            prompt_style,
            temperature: 0.0,
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            api_key_env: default_key_env(),
        }
    }
}

pub struct LlmScorer {
    config: LlmConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

enum Attempt {
    Parsed(Vec<ArmPrediction>, String),
    Failed(String),
}

impl LlmScorer {
    pub fn new(config: LlmConfig, api_key: Option<String>) -> Result<Self, ScorerError> {
        if config.endpoint.is_empty() || config.model.is_empty() {
            return Err(ScorerError::InvalidConfig("LLM endpoint and model are required".into()));
        }
        if !(config.temperature >= 0.0 && config.temperature.is_finite()) {
            return Err(ScorerError::InvalidConfig(format!("bad temperature {}", config.temperature)));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, api_key, agent })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": prompt},
            ],
        })
    }

    fn attempt(&self, body: &Value, request: &ScoreRequest, tokens: &mut (u64, u64)) -> Attempt {
        let mut call = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = match call.send_json(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Failed(format!("transport: {e}")),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Failed(format!("reading body: {e}")),
        };
        if !(200..300).contains(&status) {
            return Attempt::Failed(format!("http status {status}"));
        }
        let envelope: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => return Attempt::Failed(format!("response is not JSON: {e}")),
        };
        if let Some(usage) = envelope.get("usage") {
            tokens.0 += usage.get("prompt_tokens").and_then(Value::as_u64).unwrap_or(0);
            tokens.1 += usage.get("completion_tokens").and_then(Value::as_u64).unwrap_or(0);
        }
        let Some(content) = envelope.pointer("/choices/0/message/content").and_then(Value::as_str) else {
            return Attempt::Failed("response has no message content".into());
        };
        match parse_predictions(content, &request.target_arms, request.reward_range) {
            Ok(p) => Attempt::Parsed(p, content.to_string()),
            Err(e) => Attempt::Failed(format!("malformed predictions: {e}")),
        }
    }
}

impl Scorer for LlmScorer {
    fn score(&mut self, request: &ScoreRequest, _hidden_truth: Option<&[f64]>) -> Result<ScoreOutcome, ScorerError> {
        let prompt = render_prompt(self.config.prompt_style, request)?;
        let body = self.request_body(&prompt);
        let mut tokens = (0, 0);
        let mut last = String::new();
        for _ in 0..=self.config.max_retries {
            match self.attempt(&body, request, &mut tokens) {
                Attempt::Parsed(predictions, raw) => {
                    return Ok(ScoreOutcome::Ok(ScorePrediction {
                        predictions,
                        tokens_in: tokens.0,
                        tokens_out: tokens.1,
                        raw_payload: raw,
                    }))
                }
                Attempt::Failed(reason) => last = reason,
            }
        }
        Ok(ScoreOutcome::Unavailable {
            reason: last,
            tokens_in: tokens.0,
            tokens_out: tokens.1,
        })
    }

    fn joint(&self) -> bool {
        self.config.prompt_style.is_joint()
    }
}

/// Extracts per-arm predictions from a model reply. Accepts the object at
/// top level or under `"predictions"`, keys `arm_i` or `i`, and values that
/// are either objects with `predicted_reward` or bare numbers. Code fences
/// around the JSON are tolerated.
pub fn parse_predictions(content: &str, targets: &[usize], range: (f64, f64)) -> Result<Vec<ArmPrediction>, String> {
    let start = content.find('{').ok_or("no JSON object")?;
    let end = content.rfind('}').ok_or("no JSON object")?;
    if end < start {
        return Err("no JSON object".into());
    }
    let value: Value = serde_json::from_str(&content[start..=end]).map_err(|e| e.to_string())?;
    let map = match value.get("predictions") {
        Some(Value::Object(m)) => m,
        _ => value.as_object().ok_or("reply is not an object")?,
    };
    targets
        .iter()
        .map(|&arm| {
            let entry = map
                .get(&arm_id(arm))
                .or_else(|| map.get(&arm.to_string()))
                .ok_or_else(|| format!("missing {}", arm_id(arm)))?;
            let (reward, confidence) = match entry {
                Value::Number(n) => (n.as_f64(), None),
                Value::Object(o) => (
                    o.get("predicted_reward").and_then(Value::as_f64),
                    o.get("confidence").and_then(Value::as_f64),
                ),
                _ => (None, None),
            };
            let reward = reward
                .filter(|r| r.is_finite())
                .ok_or_else(|| format!("no numeric predicted_reward for {}", arm_id(arm)))?;
            Ok(ArmPrediction {
                arm,
                predicted_reward: clip(reward, range),
                confidence: confidence.filter(|c| c.is_finite()).map(|c| c.clamp(0.0, 1.0)),
            })
        })
        .collect()
}
