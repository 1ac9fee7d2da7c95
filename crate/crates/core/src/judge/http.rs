//! Blocking HTTP backend speaking a minimal chat-completions contract.
//!
//! The request is `POST {model, temperature, max_tokens, messages:[{role,
//! content}]}` with the credential from `QQEVAL_API_KEY` sent as both a
//! bearer token and an `x-api-key` header, which covers the common vendors
//! without per-vendor configuration. The assistant text is pulled out of the
//! response envelope by trying the widespread shapes in a fixed order.
//!
//! Retries here cover transport only — connection errors, timeouts, and
//! non-success statuses — with a short exponential backoff. What the text
//! *says* is the parser's business, not ours.

use std::time::Duration;

use serde_json::Value;

use crate::judge::{JudgeConfig, JudgeError};
use crate::prompting::JudgePrompt;

/// Environment variable holding the API credential.
pub const API_KEY_VAR: &str = "QQEVAL_API_KEY";

/// Blocking chat-completions client; safe for concurrent use.
#[derive(Debug)]
pub struct HttpJudge {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    temperature: f64,
    max_tokens: u32,
    max_retries: u32,
}

impl HttpJudge {
    pub fn new(cfg: &JudgeConfig) -> Result<Self, JudgeError> {
        let api_key = std::env::var(API_KEY_VAR)
            .ok()
            .filter(|key| !key.is_empty())
            .ok_or(JudgeError::MissingCredential { var: API_KEY_VAR })?;
        let endpoint = cfg
            .endpoint_url
            .clone()
            .ok_or_else(|| {
                JudgeError::Config("endpoint_url is required for the http_llm backend".into())
            })?;

        let mut headers = reqwest::header::HeaderMap::new();
        let mut bearer = reqwest::header::HeaderValue::from_str(&format!("Bearer {api_key}"))
            .map_err(|_| JudgeError::Config("API key contains invalid header bytes".into()))?;
        bearer.set_sensitive(true);
        let mut raw_key = reqwest::header::HeaderValue::from_str(&api_key)
            .map_err(|_| JudgeError::Config("API key contains invalid header bytes".into()))?;
        raw_key.set_sensitive(true);
        headers.insert(reqwest::header::AUTHORIZATION, bearer);
        headers.insert("x-api-key", raw_key);

        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .default_headers(headers)
            .build()
            .map_err(|err| JudgeError::Config(format!("failed to build HTTP client: {err}")))?;

        Ok(HttpJudge {
            client,
            endpoint,
            model: cfg.model_name.clone(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            max_retries: cfg.max_retries,
        })
    }

    /// Send the prompt once per attempt until success or the retry budget is
    /// exhausted (`max_retries + 1` attempts total).
    pub fn score(&self, prompt: &JudgePrompt) -> Result<String, JudgeError> {
        let body = serde_json::json!({
            "model": self.model,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "messages": [
                { "role": "system", "content": prompt.system_text },
                { "role": "user", "content": prompt.user_text },
            ],
        });

        let attempts = self.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                std::thread::sleep(Duration::from_millis(100 << (attempt - 2).min(4)));
            }
            match self.client.post(&self.endpoint).json(&body).send() {
                Ok(response) if response.status().is_success() => {
                    match response.json::<Value>() {
                        Ok(envelope) => match extract_assistant_text(&envelope) {
                            Some(text) => return Ok(text),
                            None => {
                                last_error =
                                    "response envelope has no recognizable assistant text"
                                        .to_owned();
                            }
                        },
                        Err(err) => last_error = format!("response body is not JSON: {err}"),
                    }
                }
                Ok(response) => last_error = format!("HTTP {}", response.status()),
                Err(err) => last_error = err.to_string(),
            }
        }
        Err(JudgeError::Transport {
            attempts,
            message: last_error,
        })
    }
}

/// Pull the assistant's text out of a response envelope, trying the common
/// chat-completions shapes in order:
///
/// 1. `choices[0].message.content` (OpenAI-style)
/// 2. `content[0].text` (Anthropic-style)
/// 3. top-level `completion` or `text` strings
pub fn extract_assistant_text(envelope: &Value) -> Option<String> {
    if let Some(content) = envelope
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
    {
        return Some(content.to_owned());
    }
    if let Some(blocks) = envelope.get("content").and_then(Value::as_array) {
        let text: String = blocks
            .iter()
            .filter_map(|block| block.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join("");
        if !text.is_empty() {
            return Some(text);
        }
    }
    for key in ["completion", "text"] {
        if let Some(text) = envelope.get(key).and_then(Value::as_str) {
            return Some(text.to_owned());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_openai_style_content() {
        let envelope = serde_json::json!({
            "choices": [{ "message": { "role": "assistant", "content": "{\"ok\":1}" } }]
        });
        assert_eq!(extract_assistant_text(&envelope).unwrap(), "{\"ok\":1}");
    }

    #[test]
    fn extracts_anthropic_style_content_blocks() {
        let envelope = serde_json::json!({
            "content": [
                { "type": "text", "text": "part one " },
                { "type": "text", "text": "part two" }
            ]
        });
        assert_eq!(
            extract_assistant_text(&envelope).unwrap(),
            "part one part two"
        );
    }

    #[test]
    fn extracts_bare_completion_and_text_fields() {
        let envelope = serde_json::json!({ "completion": "done" });
        assert_eq!(extract_assistant_text(&envelope).unwrap(), "done");
        let envelope = serde_json::json!({ "text": "done" });
        assert_eq!(extract_assistant_text(&envelope).unwrap(), "done");
    }

    #[test]
    fn unrecognized_envelopes_yield_none() {
        for envelope in [
            serde_json::json!({}),
            serde_json::json!({ "choices": [] }),
            serde_json::json!({ "content": "not an array" }),
            serde_json::json!({ "content": [{ "type": "image" }] }),
        ] {
            assert_eq!(extract_assistant_text(&envelope), None);
        }
    }
}
