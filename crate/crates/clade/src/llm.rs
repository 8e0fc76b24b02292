//! Chat-completion backend for heuristic generation.
//!
//! Prompts come from [`build_prompt`]; replies are read with
//! [`extract_heuristic`]. Transport failures, rate limits (HTTP 429), server
//! errors and unusable replies are retried with exponential backoff. The
//! whole call never outlives `timeout_secs * (max_retries + 1)`.

use std::time::{Duration, Instant};

use clade_core::generator::{
    build_prompt, extract_heuristic, ExtractError, GeneratedHeuristic, GenerationContext, GenerationError, Generator,
    Source,
};
use clade_core::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First backoff delay; doubles after every failed attempt.
    pub backoff_secs: f64,
    /// Log request and response bodies at debug level, key redacted.
    pub verbose: bool,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o-mini".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            temperature: 1.0,
            timeout_secs: 60.0,
            max_retries: 3,
            backoff_secs: 1.0,
            verbose: false,
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.timeout_secs > 0.0) || !self.timeout_secs.is_finite() {
            return Err("llm.timeout_secs must be finite and > 0".into());
        }
        if !(self.backoff_secs >= 0.0) {
            return Err("llm.backoff_secs must be >= 0".into());
        }
        Ok(())
    }

    /// Upper bound on the wall time of one `generate` call.
    pub fn call_deadline(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs * f64::from(self.max_retries + 1))
    }
}

pub struct LlmGenerator {
    cfg: LlmConfig,
    key: String,
}

/// Replaces every occurrence of `secret` with `***`.
pub fn redact(text: &str, secret: &str) -> String {
    if secret.is_empty() { text.to_owned() } else { text.replace(secret, "***") }
}

enum Attempt {
    Reply(String),
    Retryable(GenerationError),
}

impl LlmGenerator {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(cfg: LlmConfig) -> Result<Self, GenerationError> {
        let key = std::env::var(&cfg.api_key_env)
            .map_err(|_| GenerationError::Unavailable(format!("environment variable {} is not set", cfg.api_key_env)))?;
        Ok(Self::with_key(cfg, key))
    }

    pub fn with_key(cfg: LlmConfig, key: String) -> Self {
        Self { cfg, key }
    }

    fn request(&self, prompt: &str, timeout: Duration) -> Attempt {
        let body = serde_json::json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": [{ "role": "user", "content": prompt }],
        });
        if self.cfg.verbose {
            log::debug!("POST {} (Authorization: Bearer ***)\n{}", self.cfg.endpoint, redact(&body.to_string(), &self.key));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let response = agent
            .post(&self.cfg.endpoint)
            .header("Authorization", &format!("Bearer {}", self.key))
            .send_json(&body);
        let mut response = match response {
            Ok(r) => r,
            Err(e) => return Attempt::Retryable(GenerationError::Transport(redact(&e.to_string(), &self.key))),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retryable(GenerationError::Transport(redact(&e.to_string(), &self.key))),
        };
        if self.cfg.verbose {
            log::debug!("HTTP {status}\n{}", redact(&text, &self.key));
        }
        match status {
            200..=299 => {}
            429 => return Attempt::Retryable(GenerationError::RateLimited { attempts: 1 }),
            _ => return Attempt::Retryable(GenerationError::Transport(format!("HTTP status {status}"))),
        }
        let content = serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .and_then(|v| v["choices"][0]["message"]["content"].as_str().map(str::to_owned));
        match content {
            Some(c) => Attempt::Reply(c),
            None => Attempt::Retryable(GenerationError::Transport("response has no message content".into())),
        }
    }
}

impl Generator for LlmGenerator {
    fn generate(&mut self, ctx: &GenerationContext, _rng: &mut Rng) -> Result<GeneratedHeuristic, GenerationError> {
        let prompt = build_prompt(ctx);
        let start = Instant::now();
        let deadline = self.cfg.call_deadline();
        let per_call = Duration::from_secs_f64(self.cfg.timeout_secs);
        let mut backoff = Duration::from_secs_f64(self.cfg.backoff_secs);
        let mut last = GenerationError::Unusable { attempts: 0, last: ExtractError::Empty };
        let mut attempts = 0;
        while attempts <= self.cfg.max_retries {
            let remaining = deadline.saturating_sub(start.elapsed());
            if remaining.is_zero() {
                break;
            }
            attempts += 1;
            last = match self.request(&prompt, per_call.min(remaining)) {
                Attempt::Reply(reply) => match extract_heuristic(&reply, ctx.schema()) {
                    Ok((expr, description)) => {
                        return Ok(GeneratedHeuristic { expr, description, source: Source::Llm, raw_reply: Some(reply) })
                    }
                    Err(e) => GenerationError::Unusable { attempts, last: e },
                },
                Attempt::Retryable(GenerationError::RateLimited { .. }) => GenerationError::RateLimited { attempts },
                Attempt::Retryable(e) => e,
            };
            log::warn!("generation attempt {attempts} failed: {last}");
            if attempts <= self.cfg.max_retries {
                std::thread::sleep(backoff.min(deadline.saturating_sub(start.elapsed())));
                backoff *= 2;
            }
        }
        Err(last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn redaction_hides_the_key() {
        assert_eq!(redact("Bearer sk-123 and sk-123", "sk-123"), "Bearer *** and ***");
        assert_eq!(redact("nothing", ""), "nothing");
    }

    #[test]
    fn deadline_scales_with_retries() {
        let cfg = LlmConfig { timeout_secs: 2.0, max_retries: 2, ..LlmConfig::default() };
        assert_eq!(cfg.call_deadline(), Duration::from_secs(6));
    }

    #[test]
    fn missing_key_is_reported() {
        let cfg = LlmConfig { api_key_env: "CLADE_TEST_SURELY_UNSET_KEY".into(), ..LlmConfig::default() };
        assert!(matches!(LlmGenerator::from_env(cfg), Err(GenerationError::Unavailable(_))));
    }
}
