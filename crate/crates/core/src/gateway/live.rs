//! OpenAI-compatible HTTP provider (`/chat/completions`, `/embeddings`).

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{CompletionRequest, GatewayConfig, LlmBackend};
use crate::error::{Error, Result};

pub struct LiveProvider {
    agent: ureq::Agent,
    base_url: String,
    api_key: String,
    model_id: String,
    embedding_model_id: String,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

impl LiveProvider {
    pub fn from_config(cfg: &GatewayConfig) -> Result<Self> {
        let api_key = std::env::var(&cfg.api_key_env).map_err(|_| {
            Error::Config(format!(
                "environment variable {} is not set",
                cfg.api_key_env
            ))
        })?;
        Ok(Self::new(cfg, api_key))
    }

    pub fn new(cfg: &GatewayConfig, api_key: String) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        LiveProvider {
            agent,
            base_url: cfg.base_url.trim_end_matches('/').to_string(),
            api_key,
            model_id: cfg.model_id.clone(),
            embedding_model_id: cfg.embedding_model_id.clone(),
        }
    }

    fn post(&self, path: &str, body: serde_json::Value) -> Result<String> {
        let url = format!("{}{path}", self.base_url);
        let mut resp = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| Error::Transport(format!("POST {url}: {e}")))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Transport(format!("reading {url}: {e}")))?;
        match status {
            200..=299 => Ok(text),
            429 | 500..=599 => Err(Error::Transport(format!("POST {url}: HTTP {status}"))),
            _ => Err(Error::Gateway(format!("POST {url}: HTTP {status}: {text}"))),
        }
    }
}

impl LlmBackend for LiveProvider {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String> {
        let body = json!({
            "model": self.model_id,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
        });
        let text = self.post("/chat/completions", body)?;
        let parsed: ChatResponse = serde_json::from_str(&text)
            .map_err(|e| Error::Gateway(format!("malformed chat completion response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| Error::Gateway("chat completion returned no content".into()))
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let body = json!({ "model": self.embedding_model_id, "input": texts });
        let text = self.post("/embeddings", body)?;
        let mut parsed: EmbeddingResponse = serde_json::from_str(&text)
            .map_err(|e| Error::Gateway(format!("malformed embedding response: {e}")))?;
        if parsed.data.len() != texts.len() {
            return Err(Error::Gateway(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        parsed.data.sort_by_key(|d| d.index.unwrap_or(0));
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }

    fn name(&self) -> &str {
        "live"
    }
}
