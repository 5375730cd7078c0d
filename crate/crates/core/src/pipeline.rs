//! Document to consolidated graph: chunk, extract, deduplicate.

use crate::chunker::ChunkingConfig;
use crate::consolidator::{deduplicate_graph, DedupConfig, DedupOutcome};
use crate::error::Result;
use crate::extractor::{extract_document, ChunkTrace, ExtractionConfig, RawGraph};
use crate::gateway::{Gateway, Sampling};
use crate::model::KnowledgeHypergraph;
use crate::prompts::PromptSet;
use crate::skills::SkillLibrary;

#[derive(Debug, Clone, Copy)]
pub struct Pipeline<'a> {
    pub gateway: &'a Gateway,
    pub prompts: &'a PromptSet,
    pub chunking: &'a ChunkingConfig,
    pub extraction: &'a ExtractionConfig,
    pub dedup: &'a DedupConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub graph: KnowledgeHypergraph,
    pub raw: RawGraph,
    pub dedup: DedupOutcome,
    pub traces: Vec<ChunkTrace>,
    pub skills_used: Vec<String>,
    pub warnings: Vec<String>,
}

impl Pipeline<'_> {
    pub fn run(
        &self,
        source_id: &str,
        document: &str,
        library: &SkillLibrary,
        sampling: Sampling,
    ) -> Result<PipelineRun> {
        let extraction = extract_document(
            source_id,
            document,
            library,
            self.gateway,
            self.prompts,
            self.chunking,
            self.extraction,
            sampling,
        )?;
        let dedup = deduplicate_graph(&extraction.raw, self.gateway, self.prompts, self.dedup)?;
        let mut warnings = extraction.warnings;
        warnings.extend(dedup.warnings.iter().cloned());
        Ok(PipelineRun {
            graph: dedup.graph.clone(),
            raw: extraction.raw,
            dedup,
            traces: extraction.traces,
            skills_used: extraction.skills_used,
            warnings,
        })
    }

    /// Run at the gateway's configured temperature, sample 0.
    pub fn run_default(&self, source_id: &str, document: &str, library: &SkillLibrary) -> Result<PipelineRun> {
        self.run(source_id, document, library, self.gateway.default_sampling(0))
    }
}
