//! Per-chunk entity extraction and tiered hyperedge extraction.
//!
//! Each chunk gets one entity call, then one relation call per tier in
//! configured order. Every relation call sees the Known nodes, the injected
//! skills, and the edges earlier tiers produced for the same chunk.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::chunker::{chunk_document, Chunk, ChunkingConfig};
use crate::error::{Error, Result};
use crate::gateway::{parse_entities, parse_relations, EntityResponse, Gateway, Sampling};
use crate::model::{match_key, Entity, Hyperedge, KnowledgeHypergraph, Tier};
use crate::prompts::{fill, PromptSet};
use crate::skills::{render_skill_block, select_skills, Skill, SkillLibrary};
use crate::util::{parallel_map, truncate_chars};

/// Characters of the first chunk used as the skill retrieval context.
pub const SKILL_CONTEXT_CHARS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub tiers: Vec<Tier>,
    pub skills_enabled: bool,
    pub max_skills_injected: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            tiers: Tier::ALL.to_vec(),
            skills_enabled: true,
            max_skills_injected: 20,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tiers.is_empty() {
            return Err(Error::Config("extraction.tiers must not be empty".into()));
        }
        let unique: BTreeSet<_> = self.tiers.iter().collect();
        if unique.len() != self.tiers.len() {
            return Err(Error::Config("extraction.tiers has duplicates".into()));
        }
        if self.max_skills_injected == 0 {
            return Err(Error::Config("extraction.max_skills_injected must be at least 1".into()));
        }
        Ok(())
    }
}

/// One entity as seen in one chunk, before consolidation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub entity: Entity,
    pub chunk_id: Option<String>,
}

/// Pre-consolidation extraction output. Unlike a [`KnowledgeHypergraph`]
/// it may hold the same entity many times, once per mention.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawGraph {
    pub source_id: String,
    pub mentions: Vec<Mention>,
    pub edges: Vec<Hyperedge>,
}

impl From<&KnowledgeHypergraph> for RawGraph {
    fn from(graph: &KnowledgeHypergraph) -> Self {
        RawGraph {
            source_id: graph.source_id().to_string(),
            mentions: graph
                .entities()
                .map(|e| Mention {
                    entity: e.clone(),
                    chunk_id: None,
                })
                .collect(),
            edges: graph.hyperedges().to_vec(),
        }
    }
}

/// Raw model responses for one chunk, kept for reflection.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkTrace {
    pub chunk_id: String,
    pub tier_responses: Vec<(Tier, String)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TierOutput {
    pub edges: Vec<Hyperedge>,
    pub responses: Vec<(Tier, String)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkExtraction {
    pub mentions: Vec<Mention>,
    pub edges: Vec<Hyperedge>,
    pub trace: ChunkTrace,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentExtraction {
    pub raw: RawGraph,
    pub traces: Vec<ChunkTrace>,
    pub warnings: Vec<String>,
    pub skills_used: Vec<String>,
}

fn in_chunk(chunk: &Chunk, e: Error) -> Error {
    Error::Chunk {
        chunk_id: chunk.id.clone(),
        source: Box::new(e),
    }
}

/// Entities named in `chunk`, first description kept for repeated names.
pub fn extract_entities(
    chunk: &Chunk,
    gateway: &Gateway,
    prompts: &PromptSet,
    sampling: Sampling,
) -> Result<Vec<Mention>> {
    let prompt = fill(&prompts.entity, &[("text", &chunk.text)]);
    let raw = gateway
        .complete_sampled(&prompt, sampling)
        .map_err(|e| in_chunk(chunk, e))?;
    let entities = match parse_entities(&raw).map_err(|e| in_chunk(chunk, e))? {
        EntityResponse::NoContent => return Ok(Vec::new()),
        EntityResponse::Entities(list) => list,
    };
    let mut seen = HashSet::new();
    Ok(entities
        .into_iter()
        .filter(|e| seen.insert(match_key(&e.name)))
        .map(|entity| Mention {
            entity,
            chunk_id: Some(chunk.id.clone()),
        })
        .collect())
}

fn tier_guidance(tier: Tier) -> &'static str {
    match tier {
        Tier::Binary => {
            "Extract binary relations: each relation links exactly two Known nodes. \
             These form the skeleton of the graph."
        }
        Tier::QualifiedBinary => {
            "Extract qualified relations: a core pair of Known nodes plus at least one \
             qualifier (a time, place or condition) that is itself a Known node. \
             Each relation has three or more nodes."
        }
        Tier::Nary => {
            "Extract n-ary relations: one event, process or storyline that binds \
             Known nodes together. List every participant."
        }
    }
}

fn render_previous(edges: &[Hyperedge]) -> String {
    if edges.is_empty() {
        return "(none)".to_string();
    }
    edges
        .iter()
        .map(|e| format!("- {} [{}] ({})", e.relation, e.members.join("; "), e.tier))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Known nodes as a JSON array of names.
fn render_known(names: &[&str]) -> String {
    serde_json::to_string(names).expect("names serialize")
}

/// The relation prompt for one tier pass.
pub fn relation_prompt(
    prompts: &PromptSet,
    chunk_text: &str,
    known: &[&str],
    experiences: &str,
    tier: Tier,
    previous: &[Hyperedge],
) -> String {
    let head = fill(
        &prompts.relation,
        &[
            ("experiences", experiences),
            ("known nodes", &render_known(known)),
            ("text", chunk_text),
        ],
    );
    let pass = fill(
        &prompts.relation_pass,
        &[
            ("tier", tier.label()),
            ("tier guidance", tier_guidance(tier)),
            ("previous relations", &render_previous(previous)),
        ],
    );
    format!("{head}{pass}")
}

#[allow(clippy::too_many_arguments)]
pub fn extract_hyperedges_tiered(
    chunk: &Chunk,
    known_entities: &[Entity],
    skills: &[Skill],
    gateway: &Gateway,
    prompts: &PromptSet,
    config: &ExtractionConfig,
    sampling: Sampling,
) -> Result<TierOutput> {
    if known_entities.is_empty() {
        return Err(Error::InvalidInput("tiered extraction needs known entities".into()));
    }
    let mut by_key: BTreeMap<String, &str> = BTreeMap::new();
    let mut known: Vec<&str> = Vec::new();
    for e in known_entities {
        if by_key.insert(match_key(&e.name), e.name.as_str()).is_none() {
            known.push(&e.name);
        }
    }
    let experiences = if config.skills_enabled {
        render_skill_block(skills)
    } else {
        render_skill_block(&[])
    };
    let mut out = TierOutput::default();
    let mut failed = 0;
    for &tier in &config.tiers {
        let prompt = relation_prompt(prompts, &chunk.text, &known, &experiences, tier, &out.edges);
        let raw = gateway
            .complete_sampled(&prompt, sampling)
            .map_err(|e| in_chunk(chunk, e))?;
        out.responses.push((tier, raw.clone()));
        let records = match parse_relations(&raw) {
            Ok(r) => r,
            Err(e) => {
                failed += 1;
                out.warnings.push(format!("{} {tier} pass: {e}", chunk.id));
                continue;
            }
        };
        for rec in records {
            let mut members: Vec<String> = Vec::new();
            for node in &rec.nodes {
                match by_key.get(&match_key(node)) {
                    Some(name) if !members.iter().any(|m| m == name) => members.push(name.to_string()),
                    Some(_) => {}
                    None => out.warnings.push(format!(
                        "{} {tier} pass: {node:?} is not a known node, dropped from {:?}",
                        chunk.id, rec.description
                    )),
                }
            }
            if members.len() < 2 {
                out.warnings.push(format!(
                    "{} {tier} pass: relation {:?} has fewer than two known members, dropped",
                    chunk.id, rec.description
                ));
                continue;
            }
            let edge = Hyperedge::new(&rec.description, &members, tier.fit(members.len()))
                .with_provenance(&chunk.id);
            if !out.edges.iter().any(|e| e.same_fact(&edge)) {
                out.edges.push(edge);
            }
        }
    }
    if failed == config.tiers.len() {
        return Err(in_chunk(
            chunk,
            Error::Extraction(format!("every tier pass failed: {}", out.warnings.join("; "))),
        ));
    }
    Ok(out)
}

pub fn extract_chunk(
    chunk: &Chunk,
    skills: &[Skill],
    gateway: &Gateway,
    prompts: &PromptSet,
    config: &ExtractionConfig,
    sampling: Sampling,
) -> Result<ChunkExtraction> {
    let mentions = extract_entities(chunk, gateway, prompts, sampling)?;
    let mut trace = ChunkTrace {
        chunk_id: chunk.id.clone(),
        tier_responses: Vec::new(),
    };
    if mentions.is_empty() {
        return Ok(ChunkExtraction {
            mentions,
            edges: Vec::new(),
            trace,
            warnings: Vec::new(),
        });
    }
    let known: Vec<Entity> = mentions.iter().map(|m| m.entity.clone()).collect();
    let tiers = extract_hyperedges_tiered(chunk, &known, skills, gateway, prompts, config, sampling)?;
    trace.tier_responses = tiers.responses;
    Ok(ChunkExtraction {
        mentions,
        edges: tiers.edges,
        trace,
        warnings: tiers.warnings,
    })
}

/// Skills injected for a document, chosen against its first chunk.
pub fn skills_for(
    chunks: &[Chunk],
    library: &SkillLibrary,
    gateway: &Gateway,
    config: &ExtractionConfig,
) -> Result<(Vec<Skill>, Option<String>)> {
    if !config.skills_enabled || library.is_empty() || chunks.is_empty() {
        return Ok((Vec::new(), None));
    }
    let context = truncate_chars(&chunks[0].text, SKILL_CONTEXT_CHARS);
    let sel = select_skills(library, context, config.max_skills_injected, gateway)?;
    Ok((sel.skills, sel.warning))
}

/// Extract a raw graph from a whole document. Chunks run concurrently; the
/// run fails only when every chunk fails.
#[allow(clippy::too_many_arguments)]
pub fn extract_document(
    source_id: &str,
    document: &str,
    library: &SkillLibrary,
    gateway: &Gateway,
    prompts: &PromptSet,
    chunking: &ChunkingConfig,
    config: &ExtractionConfig,
    sampling: Sampling,
) -> Result<DocumentExtraction> {
    config.validate()?;
    let chunks = chunk_document(document, chunking)?;
    let (skills, skill_warning) = skills_for(&chunks, library, gateway, config)?;
    let results = parallel_map(&chunks, gateway.config().max_parallel, |_, chunk| {
        extract_chunk(chunk, &skills, gateway, prompts, config, sampling)
    });
    let mut doc = DocumentExtraction {
        raw: RawGraph {
            source_id: source_id.to_string(),
            ..Default::default()
        },
        traces: Vec::new(),
        warnings: skill_warning.into_iter().collect(),
        skills_used: skills.iter().map(|s| s.id.clone()).collect(),
    };
    let mut first_error = None;
    let mut ok = 0;
    for r in results {
        match r {
            Ok(c) => {
                ok += 1;
                doc.raw.mentions.extend(c.mentions);
                doc.raw.edges.extend(c.edges);
                doc.traces.push(c.trace);
                doc.warnings.extend(c.warnings);
            }
            Err(e) => {
                doc.warnings.push(format!("chunk failed: {e}"));
                first_error.get_or_insert(e);
            }
        }
    }
    if ok == 0 {
        return Err(first_error.expect("at least one chunk"));
    }
    for w in &doc.warnings {
        log::warn!("{source_id}: {w}");
    }
    Ok(doc)
}
