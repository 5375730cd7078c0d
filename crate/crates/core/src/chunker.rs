//! Overlapping document chunking at natural boundaries.
//!
//! Sizes and offsets count Unicode scalar values (`char`s), not bytes or
//! tokens. A chunk ends right after a boundary marker when some marker ends
//! inside `[target_size - overlap, target_size]` of the chunk start;
//! otherwise it is cut hard at `target_size`. The next chunk starts
//! `overlap` characters before the previous end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkingConfig {
    pub target_size: usize,
    pub overlap: usize,
    /// Tried in order; an earlier marker wins over a nearer later one.
    pub boundary_markers: Vec<String>,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        ChunkingConfig {
            target_size: 1200,
            overlap: 200,
            boundary_markers: vec![
                "\n\n".into(),
                ". ".into(),
                "! ".into(),
                "? ".into(),
            ],
        }
    }
}

impl ChunkingConfig {
    pub fn new(target_size: usize, overlap: usize) -> Self {
        ChunkingConfig {
            target_size,
            overlap,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_size == 0 {
            return Err(Error::Config("chunk.target_size must be positive".into()));
        }
        if self.overlap >= self.target_size {
            return Err(Error::Config(format!(
                "chunk.overlap ({}) must be smaller than chunk.target_size ({})",
                self.overlap, self.target_size
            )));
        }
        if self.boundary_markers.iter().any(String::is_empty) {
            return Err(Error::Config("chunk.boundary_markers contains an empty marker".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub id: String,
    pub text: String,
    /// `[start, end)` in characters of the source document.
    pub span: (usize, usize),
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.span.1 - self.span.0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn chunk_id(index: usize) -> String {
    format!("chunk-{index}")
}

pub fn chunk_document(document: &str, config: &ChunkingConfig) -> Result<Vec<Chunk>> {
    config.validate()?;
    if document.is_empty() {
        return Err(Error::InvalidInput("cannot chunk an empty document".into()));
    }
    let chars: Vec<char> = document.chars().collect();
    let markers: Vec<Vec<char>> = config
        .boundary_markers
        .iter()
        .map(|m| m.chars().collect())
        .collect();
    let len = chars.len();
    let target = config.target_size;

    let mut spans = Vec::new();
    let mut start = 0;
    loop {
        if len - start <= target {
            spans.push((start, len));
            break;
        }
        let lo = start + target - config.overlap;
        let hi = start + target;
        let end = find_boundary(&chars, lo, hi, &markers).unwrap_or(hi);
        spans.push((start, end));
        start = end.saturating_sub(config.overlap).max(start + 1);
    }

    Ok(spans
        .into_iter()
        .enumerate()
        .map(|(i, (s, e))| Chunk {
            id: chunk_id(i),
            text: chars[s..e].iter().collect(),
            span: (s, e),
        })
        .collect())
}

/// Latest position in `[lo, hi]` where a marker ends, by marker priority.
fn find_boundary(chars: &[char], lo: usize, hi: usize, markers: &[Vec<char>]) -> Option<usize> {
    markers.iter().find_map(|marker| {
        (lo.max(marker.len())..=hi)
            .rev()
            .find(|&end| chars[end - marker.len()..end] == marker[..])
    })
}
