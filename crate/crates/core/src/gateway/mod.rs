//! Provider-agnostic access to chat completion and text embedding.
//!
//! [`Gateway`] owns one backend and adds what every caller needs: bounded
//! concurrency, retry with exponential backoff for transient failures, an
//! embedding cache keyed by `(embedding_model_id, text)`, unit-normalized
//! vectors, and a request counter.

mod hashed;
mod live;
pub mod parse;
mod scripted;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::Semaphore;

pub use hashed::HashedEmbedder;
pub use live::LiveProvider;
pub use parse::{
    parse_entities, parse_insights, parse_library_ops, parse_relations, parse_verdict,
    EntityResponse, InsightParse, InsightProposal, LibraryOp, Origin, RelationRecord,
};
pub use scripted::{fixture_key, Recorder, ScriptedProvider, COMPLETIONS_FILE, EMBEDDINGS_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Live,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingFallback {
    None,
    Hashed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, failed_attempts: u32) -> Duration {
        let factor = 1u64 << failed_attempts.saturating_sub(1).min(20);
        Duration::from_millis(
            self.initial_backoff_ms
                .saturating_mul(factor)
                .min(self.max_backoff_ms),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub provider: ProviderKind,
    pub model_id: String,
    pub temperature: f64,
    pub max_parallel: usize,
    pub retry: RetryPolicy,
    pub embedding_model_id: String,
    pub base_url: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub fixtures_dir: Option<PathBuf>,
    /// Scripted mode only: what to do for texts with no fixture vector.
    pub embedding_fallback: EmbeddingFallback,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            provider: ProviderKind::Live,
            model_id: "gpt-4o-mini".into(),
            temperature: 0.0,
            max_parallel: 4,
            retry: RetryPolicy::default(),
            embedding_model_id: "all-MiniLM-L6-v2".into(),
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: "HYPERKG_API_KEY".into(),
            timeout_secs: 120,
            fixtures_dir: None,
            embedding_fallback: EmbeddingFallback::None,
        }
    }
}

impl GatewayConfig {
    pub fn scripted() -> Self {
        GatewayConfig {
            provider: ProviderKind::Scripted,
            model_id: "scripted".into(),
            embedding_model_id: "scripted".into(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "gateway.temperature must be non-negative, got {}",
                self.temperature
            )));
        }
        if self.max_parallel == 0 {
            return Err(Error::Config("gateway.max_parallel must be at least 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(Error::Config("gateway.retry.max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub temperature: f64,
    pub sample_index: usize,
}

/// Sampling parameters for one completion call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub temperature: f64,
    pub sample_index: usize,
}

/// A model provider. Implementations return [`Error::Transport`] for
/// failures worth retrying.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String>;
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>>;
    fn name(&self) -> &str;
}

/// Lets a caller keep a handle on a backend the gateway owns, e.g. a
/// [`Recorder`].
impl<B: LlmBackend + ?Sized> LlmBackend for Arc<B> {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String> {
        (**self).complete(req)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        (**self).embed(texts)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

const EMBED_BATCH: usize = 64;

/// Keyed by (embedding model, text).
type EmbeddingCache = HashMap<(String, String), Arc<[f64]>>;

pub struct Gateway {
    config: GatewayConfig,
    backend: Box<dyn LlmBackend>,
    cache: RwLock<EmbeddingCache>,
    limiter: Semaphore,
    requests: AtomicU64,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("backend", &self.backend.name())
            .field("model_id", &self.config.model_id)
            .field("requests", &self.request_count())
            .finish()
    }
}

impl Gateway {
    pub fn from_config(config: &GatewayConfig) -> Result<Self> {
        config.validate()?;
        let backend: Box<dyn LlmBackend> = match config.provider {
            ProviderKind::Live => Box::new(LiveProvider::from_config(config)?),
            ProviderKind::Scripted => {
                let mut provider = match &config.fixtures_dir {
                    Some(dir) => ScriptedProvider::from_dir(dir)?,
                    None => ScriptedProvider::new(),
                };
                if config.embedding_fallback == EmbeddingFallback::Hashed {
                    provider = provider.with_hashed_fallback(HashedEmbedder::default());
                }
                Box::new(provider)
            }
        };
        Ok(Self::assemble(config.clone(), backend))
    }

    pub fn with_backend(config: &GatewayConfig, backend: impl LlmBackend + 'static) -> Result<Self> {
        config.validate()?;
        Ok(Self::assemble(config.clone(), Box::new(backend)))
    }

    fn assemble(config: GatewayConfig, backend: Box<dyn LlmBackend>) -> Self {
        Gateway {
            limiter: Semaphore::new(config.max_parallel),
            config,
            backend,
            cache: RwLock::new(HashMap::new()),
            requests: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn embedding_model_id(&self) -> &str {
        &self.config.embedding_model_id
    }

    /// Total backend calls issued, retries included.
    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn default_sampling(&self, sample_index: usize) -> Sampling {
        Sampling {
            temperature: self.config.temperature,
            sample_index,
        }
    }

    pub fn complete(&self, prompt: &str, sample_index: usize) -> Result<String> {
        self.complete_sampled(prompt, self.default_sampling(sample_index))
    }

    pub fn complete_sampled(&self, prompt: &str, sampling: Sampling) -> Result<String> {
        if prompt.trim().is_empty() {
            return Err(Error::InvalidInput("prompt is empty".into()));
        }
        let req = CompletionRequest {
            prompt,
            temperature: sampling.temperature,
            sample_index: sampling.sample_index,
        };
        self.with_retry("completion", || self.backend.complete(&req))
    }

    /// Complete and parse. A response that fails to parse earns one retry
    /// with [`REPROMPT_NOTE`] appended; returns the value and raw text.
    pub fn complete_parsed<T>(
        &self,
        prompt: &str,
        sampling: Sampling,
        parse: impl Fn(&str) -> Result<T>,
    ) -> Result<(T, String)> {
        let raw = self.complete_sampled(prompt, sampling)?;
        match parse(&raw) {
            Ok(v) => Ok((v, raw)),
            Err(Error::Parse { detail, .. }) => {
                log::warn!("unparseable response ({detail}); reprompting");
                let raw = self.complete_sampled(&reprompt(prompt), sampling)?;
                parse(&raw).map(|v| (v, raw))
            }
            Err(e) => Err(e),
        }
    }

    /// One unit-length vector per input text, all of the same dimension.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        if texts.is_empty() {
            return Err(Error::InvalidInput("nothing to embed".into()));
        }
        if let Some(i) = texts.iter().position(|t| t.is_empty()) {
            return Err(Error::InvalidInput(format!("text #{i} to embed is empty")));
        }
        let model = &self.config.embedding_model_id;
        let mut missing: Vec<String> = {
            let cache = self.cache.read().unwrap_or_else(|e| e.into_inner());
            texts
                .iter()
                .filter(|t| !cache.contains_key(&(model.clone(), (*t).clone())))
                .cloned()
                .collect()
        };
        missing.sort();
        missing.dedup();
        for batch in missing.chunks(EMBED_BATCH) {
            let vectors = self.with_retry("embedding", || self.backend.embed(batch))?;
            if vectors.len() != batch.len() {
                return Err(Error::Gateway(format!(
                    "backend returned {} vectors for {} texts",
                    vectors.len(),
                    batch.len()
                )));
            }
            let mut cache = self.cache.write().unwrap_or_else(|e| e.into_inner());
            for (text, v) in batch.iter().zip(vectors) {
                cache.insert((model.clone(), text.clone()), normalize(v, text)?.into());
            }
        }
        let cache = self.cache.read().unwrap_or_else(|e| e.into_inner());
        let out: Vec<Vec<f64>> = texts
            .iter()
            .map(|t| cache[&(model.clone(), t.clone())].to_vec())
            .collect();
        let dim = out[0].len();
        if out.iter().any(|v| v.len() != dim) {
            return Err(Error::Gateway("embedding dimensions disagree".into()));
        }
        Ok(out)
    }

    pub fn embed_one(&self, text: &str) -> Result<Vec<f64>> {
        Ok(self.embed(&[text.to_string()])?.remove(0))
    }

    fn with_retry<T>(&self, what: &str, call: impl Fn() -> Result<T>) -> Result<T> {
        let policy = &self.config.retry;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = {
                let _permit = self.limiter.acquire();
                self.requests.fetch_add(1, Ordering::Relaxed);
                call()
            };
            match result {
                Err(Error::Transport(msg)) if attempt < policy.max_attempts => {
                    log::warn!("{what} attempt {attempt} failed: {msg}; retrying");
                    std::thread::sleep(policy.backoff(attempt));
                }
                Err(Error::Transport(msg)) => {
                    return Err(Error::Gateway(format!(
                        "{what} failed after {attempt} attempt(s): {msg}"
                    )))
                }
                other => return other,
            }
        }
    }
}

pub const REPROMPT_NOTE: &str =
    "Your previous reply did not follow the required output format. Reply again, following the output format exactly.";

/// The prompt sent after an unparseable reply.
pub fn reprompt(prompt: &str) -> String {
    format!("{prompt}\n\n{REPROMPT_NOTE}")
}

fn normalize(mut v: Vec<f64>, text: &str) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Gateway(format!(
            "embedding for {text:?} has zero or non-finite norm"
        )));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// Cosine similarity; inputs need not be normalized.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU32;

    fn scripted(p: ScriptedProvider) -> Gateway {
        Gateway::with_backend(&GatewayConfig::scripted(), p).unwrap()
    }

    #[test]
    fn scripted_completion_distinct_per_sample() {
        let gw = scripted(
            ScriptedProvider::new()
                .with_completion("p", 0, "resp-A")
                .with_completion("p", 1, "resp-B"),
        );
        assert_eq!(gw.complete("p", 0).unwrap(), "resp-A");
        assert_ne!(gw.complete("p", 0).unwrap(), gw.complete("p", 1).unwrap());
        assert!(matches!(gw.complete("nope", 0), Err(Error::FixtureMiss { .. })));
        assert!(matches!(gw.complete("  ", 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn embeddings_are_unit_and_cached() {
        let gw = scripted(
            ScriptedProvider::new()
                .with_embedding("a", vec![3.0, 0.0, 4.0, 0.0])
                .with_embedding("x", vec![1.0, 0.0, 0.0, 0.0])
                .with_embedding("y", vec![0.0, 1.0, 0.0, 0.0]),
        );
        let first = gw.embed(&["a".into()]).unwrap();
        let before = gw.request_count();
        let second = gw.embed(&["a".into()]).unwrap();
        assert_eq!(first, second);
        assert_eq!(gw.request_count(), before, "second call must hit the cache");
        let norm: f64 = first[0].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        assert!((cosine(&first[0], &first[0]) - 1.0).abs() < 1e-6);
        let v = gw.embed(&["x".into(), "y".into()]).unwrap();
        assert_eq!(cosine(&v[0], &v[1]), 0.0);
    }

    #[test]
    fn embed_preconditions() {
        let gw = scripted(ScriptedProvider::new());
        assert!(matches!(gw.embed(&[]), Err(Error::InvalidInput(_))));
        assert!(matches!(gw.embed(&["".into()]), Err(Error::InvalidInput(_))));
        let gw = scripted(ScriptedProvider::new().with_embedding("z", vec![0.0, 0.0]));
        assert!(matches!(gw.embed(&["z".into()]), Err(Error::Gateway(_))));
    }

    struct Flaky {
        failures_left: AtomicU32,
    }

    impl LlmBackend for Flaky {
        fn complete(&self, _req: &CompletionRequest<'_>) -> Result<String> {
            if self
                .failures_left
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
                .is_ok()
            {
                Err(Error::Transport("503".into()))
            } else {
                Ok("ok".into())
            }
        }
        fn embed(&self, _texts: &[String]) -> Result<Vec<Vec<f64>>> {
            Err(Error::Gateway("no embeddings".into()))
        }
        fn name(&self) -> &str {
            "flaky"
        }
    }

    fn fast_retry(max_attempts: u32) -> GatewayConfig {
        GatewayConfig {
            retry: RetryPolicy {
                max_attempts,
                initial_backoff_ms: 1,
                max_backoff_ms: 2,
            },
            ..GatewayConfig::scripted()
        }
    }

    #[test]
    fn transient_failures_are_retried() {
        let gw = Gateway::with_backend(
            &fast_retry(3),
            Flaky {
                failures_left: AtomicU32::new(2),
            },
        )
        .unwrap();
        assert_eq!(gw.complete("p", 0).unwrap(), "ok");
        assert_eq!(gw.request_count(), 3);
    }

    #[test]
    fn retries_are_bounded() {
        let gw = Gateway::with_backend(
            &fast_retry(2),
            Flaky {
                failures_left: AtomicU32::new(5),
            },
        )
        .unwrap();
        assert!(matches!(gw.complete("p", 0), Err(Error::Gateway(_))));
        assert_eq!(gw.request_count(), 2);
    }

    #[test]
    fn backoff_grows_and_caps() {
        let p = RetryPolicy {
            max_attempts: 5,
            initial_backoff_ms: 100,
            max_backoff_ms: 350,
        };
        assert_eq!(p.backoff(1), Duration::from_millis(100));
        assert_eq!(p.backoff(2), Duration::from_millis(200));
        assert_eq!(p.backoff(3), Duration::from_millis(350));
    }

    #[test]
    fn config_validation() {
        let mut c = GatewayConfig::scripted();
        c.temperature = -0.1;
        assert!(c.validate().is_err());
        c.temperature = 0.8;
        c.max_parallel = 0;
        assert!(c.validate().is_err());
    }
}
