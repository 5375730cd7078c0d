//! Offline provider replaying canned responses.
//!
//! A fixture directory holds `completions.json`, mapping
//! `"<sha256 of prompt, hex>:<sample_index>"` to response text, and
//! `embeddings.json`, mapping input text to a vector. Either file may be
//! absent.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::hashed::HashedEmbedder;
use super::{CompletionRequest, LlmBackend};
use crate::error::{Error, Result};

pub const COMPLETIONS_FILE: &str = "completions.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.json";

pub fn fixture_key(prompt: &str, sample_index: usize) -> String {
    format!("{}:{sample_index}", hex::encode(Sha256::digest(prompt.as_bytes())))
}

#[derive(Debug, Clone, Default)]
pub struct ScriptedProvider {
    completions: BTreeMap<String, String>,
    embeddings: BTreeMap<String, Vec<f64>>,
    fallback: Option<HashedEmbedder>,
}

impl ScriptedProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::Config(format!(
                "fixtures directory {} does not exist",
                dir.display()
            )));
        }
        Ok(ScriptedProvider {
            completions: read_map(&dir.join(COMPLETIONS_FILE))?,
            embeddings: read_map(&dir.join(EMBEDDINGS_FILE))?,
            fallback: None,
        })
    }

    /// Write both fixture files; keys come out sorted.
    pub fn save_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [
            (COMPLETIONS_FILE, serde_json::to_string_pretty(&self.completions)),
            (EMBEDDINGS_FILE, serde_json::to_string_pretty(&self.embeddings)),
        ] {
            let path = dir.join(name);
            let mut text = text.expect("string maps serialize");
            text.push('\n');
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn with_completion(mut self, prompt: &str, sample_index: usize, response: &str) -> Self {
        self.add_completion(prompt, sample_index, response);
        self
    }

    pub fn add_completion(&mut self, prompt: &str, sample_index: usize, response: &str) {
        self.completions
            .insert(fixture_key(prompt, sample_index), response.to_string());
    }

    pub fn with_embedding(mut self, text: &str, vector: Vec<f64>) -> Self {
        self.add_embedding(text, vector);
        self
    }

    pub fn add_embedding(&mut self, text: &str, vector: Vec<f64>) {
        self.embeddings.insert(text.to_string(), vector);
    }

    /// Embed texts without a fixture vector using [`HashedEmbedder`].
    pub fn with_hashed_fallback(mut self, embedder: HashedEmbedder) -> Self {
        self.fallback = Some(embedder);
        self
    }

    pub fn completion_count(&self) -> usize {
        self.completions.len()
    }
}

fn read_map<V: serde::de::DeserializeOwned>(path: &Path) -> Result<BTreeMap<String, V>> {
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string(), &text))
}

impl LlmBackend for ScriptedProvider {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String> {
        let key = fixture_key(req.prompt, req.sample_index);
        self.completions
            .get(&key)
            .cloned()
            .ok_or(Error::FixtureMiss { key })
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        texts
            .iter()
            .map(|t| match (self.embeddings.get(t), &self.fallback) {
                (Some(v), _) => Ok(v.clone()),
                (None, Some(h)) => Ok(h.embed(t)),
                (None, None) => Err(Error::FixtureMiss {
                    key: format!("embedding:{t}"),
                }),
            })
            .collect()
    }

    fn name(&self) -> &str {
        "scripted"
    }
}

/// Wraps a backend and records every response into a [`ScriptedProvider`],
/// for producing fixture directories from a live or rule-based run.
pub struct Recorder<B> {
    inner: B,
    log: Mutex<ScriptedProvider>,
}

impl<B: LlmBackend> Recorder<B> {
    pub fn new(inner: B) -> Self {
        Recorder {
            inner,
            log: Mutex::new(ScriptedProvider::new()),
        }
    }

    pub fn recorded(&self) -> ScriptedProvider {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl<B: LlmBackend> LlmBackend for Recorder<B> {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String> {
        let out = self.inner.complete(req)?;
        self.log
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .add_completion(req.prompt, req.sample_index, &out);
        Ok(out)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let out = self.inner.embed(texts)?;
        let mut log = self.log.lock().unwrap_or_else(|e| e.into_inner());
        for (t, v) in texts.iter().zip(&out) {
            log.add_embedding(t, v.clone());
        }
        Ok(out)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}
