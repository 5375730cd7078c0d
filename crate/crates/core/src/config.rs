//! Run configuration: one TOML or JSON file, every section optional.
//!
//! ```toml
//! [gateway]
//! provider = "scripted"
//! fixtures_dir = "fixtures"
//!
//! [chunk]
//! target_size = 1200
//! overlap = 200
//!
//! [paths]
//! skill_library = "library.json"
//! output_dir = "out"
//! ```
//!
//! Relative paths in the file resolve against the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chunker::ChunkingConfig;
use crate::consolidator::DedupConfig;
use crate::error::{Error, Result};
use crate::evaluator::FactCheckConfig;
use crate::extractor::ExtractionConfig;
use crate::gateway::GatewayConfig;
use crate::prompts::PromptConfig;
use crate::trainer::RolloutConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub skill_library: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub fixtures_dir: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            skill_library: None,
            output_dir: PathBuf::from("out"),
            fixtures_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gateway: GatewayConfig,
    #[serde(rename = "chunk", alias = "chunking")]
    pub chunking: ChunkingConfig,
    pub extraction: ExtractionConfig,
    pub dedup: DedupConfig,
    pub rollout: RolloutConfig,
    pub factcheck: FactCheckConfig,
    pub prompts: PromptConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    /// Parse by extension: `.json` as JSON, anything else as TOML.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg = if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_relative(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.output_dir);
        self.paths.skill_library.as_mut().map(fix);
        self.paths.fixtures_dir.as_mut().map(fix);
        self.gateway.fixtures_dir.as_mut().map(fix);
        self.prompts.dir.as_mut().map(fix);
    }

    pub fn validate(&self) -> Result<()> {
        self.gateway.validate()?;
        self.chunking.validate()?;
        self.extraction.validate()?;
        self.dedup.validate()?;
        self.rollout.validate()?;
        if self.factcheck.top_n == 0 {
            return Err(Error::Config("factcheck.top_n must be at least 1".into()));
        }
        Ok(())
    }

    /// Gateway settings with `paths.fixtures_dir` taking precedence.
    pub fn effective_gateway(&self) -> GatewayConfig {
        let mut g = self.gateway.clone();
        if let Some(dir) = &self.paths.fixtures_dir {
            g.fixtures_dir = Some(dir.clone());
        }
        g
    }

    /// Create the output directory and check it accepts writes.
    pub fn ensure_output_dir(&self) -> Result<&Path> {
        let dir = self.paths.output_dir.as_path();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let probe = dir.join(".hyperkg-write-probe");
        std::fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
        let _ = std::fs::remove_file(&probe);
        Ok(dir)
    }
}
