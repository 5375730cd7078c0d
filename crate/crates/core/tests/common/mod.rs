//! Shared test support: fixture paths and the rule-based responder the
//! golden fixtures were recorded from.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use hyperkg_core::config::RunConfig;
use hyperkg_core::gateway::{CompletionRequest, HashedEmbedder, LlmBackend};
use hyperkg_core::{Error, Result};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    fixtures().join("golden")
}

pub const GOLDEN_GRAPH: &str = "expected_graph.json";
pub const GOLDEN_FACTS: &str = "facts.txt";

pub fn golden_config() -> RunConfig {
    RunConfig::load(golden_dir().join("run.toml")).expect("golden config loads")
}

pub fn golden_document() -> String {
    std::fs::read_to_string(golden_dir().join("document.txt")).unwrap()
}

const CHUNK0_ENTITIES: &str = r#"{"nodes":[
{"name":"Nolan Bushnell","type":"person","description":"Co-founder of Atari"},
{"name":"Ted Dabney","type":"person","description":"Co-founder of Atari"},
{"name":"Atari","type":"organization","description":"Video game company founded in 1972"},
{"name":"Sunnyvale","type":"location","description":"City in California where Atari was founded"},
{"name":"Allan Alcorn","type":"person","description":"First engineer hired by Atari"},
{"name":"Pong","type":"game","description":"Arcade table tennis game"},
{"name":"November 1972","type":"date","description":"Release date of Pong"}]}"#;

const CHUNK1_ENTITIES: &str = r#"{"nodes":[
{"name":"Allan Alcorn","type":"person","description":"Engineer who built Pong"},
{"name":"Pong","type":"game","description":"Arcade game released by Atari"},
{"name":"Atari","type":"organization","description":"Company sold to Warner Communications in 1976"},
{"name":"November 1972","type":"date","description":"Release date of Pong"},
{"name":"Nolan Bushnell","type":"person","description":"Founder who sold Atari"},
{"name":"Warner Communications","type":"organization","description":"Media company that bought Atari"},
{"name":"Atari 2600","type":"product","description":"Home video game console launched in 1977"}]}"#;

fn relations(chunk: usize, tier: &str) -> &'static str {
    match (chunk, tier) {
        (0, "binary") => r#"{"relations":[
{"description":"founded","nodes":["Nolan Bushnell","Atari"],"type":"binary"},
{"description":"hired as first engineer","nodes":["Atari","Allan Alcorn"],"type":"binary"},
{"description":"built","nodes":["Allan Alcorn","Pong"],"type":"binary"}]}"#,
        (0, "qualified_binary") => r#"Here are the relations.
```json
{"relations":[
{"description":"founded in 1972 in Sunnyvale","nodes":["Nolan Bushnell","Atari","Sunnyvale"],"type":"qualified_binary"},
{"description":"released in November 1972","nodes":["Atari","Pong","November 1972"],"type":"qualified_binary"}]}
```"#,
        (0, "nary") => r#"{"relations":[
{"description":"co-founded the company in Sunnyvale, California","nodes":["Nolan Bushnell","Ted Dabney","Atari","Sunnyvale","California"],"type":"nary"}]}"#,
        (1, "binary") => r#"{"relations":[
{"description":"built","nodes":["Allan Alcorn","Pong"],"type":"binary"},
{"description":"sold the company to","nodes":["Nolan Bushnell","Warner Communications"],"type":"binary"},
{"description":"launched","nodes":["Warner Communications","Atari 2600"],"type":"binary"}]}"#,
        (1, "qualified_binary") => r#"{"relations":[
{"description":"released in November 1972","nodes":["Atari","Pong","November 1972"],"type":"qualified_binary"},
{"description":"ran on as a home version","nodes":["Pong","Atari 2600"],"type":"qualified_binary"}]}"#,
        (1, "nary") => r#"{"relations":[
{"description":"sold Atari to Warner Communications for 28 million dollars in 1976","nodes":["Nolan Bushnell","Atari","Warner Communications"],"type":"nary"}]}"#,
        _ => r#"{"relations":[]}"#,
    }
}

/// Answers the golden document's prompts by rule; embeds with the hashed
/// embedder.
#[derive(Debug, Default)]
pub struct Responder {
    embedder: HashedEmbedder,
}

impl LlmBackend for Responder {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String> {
        let p = req.prompt;
        if p.starts_with("You check whether a statement") {
            return Ok("1".into());
        }
        let chunk = if p.contains("Warner Communications for 28") {
            1
        } else if p.contains("Nolan Bushnell and Ted Dabney founded") {
            0
        } else {
            return Err(Error::InvalidInput("responder: unrecognised prompt".into()));
        };
        if p.starts_with("You are a named entity recognition") {
            return Ok(if chunk == 0 { CHUNK0_ENTITIES } else { CHUNK1_ENTITIES }.into());
        }
        for tier in ["binary", "qualified_binary", "nary"] {
            if p.contains(&format!("Current pass: {tier}\n")) {
                return Ok(relations(chunk, tier).into());
            }
        }
        Err(Error::InvalidInput("responder: unrecognised prompt".into()))
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.embedder.embed(t)).collect())
    }

    fn name(&self) -> &str {
        "responder"
    }
}

pub const LEARN_DOCUMENT: &str = "Ada Lovelace wrote notes on the Analytical Engine in 1843. \
Charles Babbage designed the Analytical Engine, and Lovelace corresponded with Babbage for years.";

pub const CONTROLLER_OPS: &str = r#"[
{"operation":"ADD","trigger":"A dated authorship cue such as 'wrote ... in <year>'","action":"Bind author, work subject and year into one qualified edge"},
{"operation":"ADD","trigger":"Two people linked by sustained correspondence","action":"Emit one binary edge between the correspondents"}]"#;

/// Gold edges: retrieved by every rollout, by rollouts 0 and 1 only, and
/// by none.
pub fn learn_gold() -> hyperkg_core::KnowledgeHypergraph {
    use hyperkg_core::{Entity, GraphBuilder, Hyperedge, Tier};
    let mut b = GraphBuilder::new("learn");
    for n in ["Ada Lovelace", "Analytical Engine", "Charles Babbage", "1843"] {
        b.entity(Entity::new(n, "", ""));
    }
    b.edge(Hyperedge::new("designed", &["Charles Babbage", "Analytical Engine"], Tier::Binary));
    b.edge(Hyperedge::new(
        "wrote notes on",
        &["Ada Lovelace", "Analytical Engine", "1843"],
        Tier::QualifiedBinary,
    ));
    b.edge(Hyperedge::new("corresponded with", &["Ada Lovelace", "Charles Babbage"], Tier::Binary));
    b.build()
}

/// Answers the learning scenario. Rollout `k` finds the qualified edge only
/// when `k < unstable_hits`.
#[derive(Debug)]
pub struct LearnResponder {
    pub unstable_hits: usize,
    pub path_inductions: AtomicUsize,
    pub hindsight_reflections: AtomicUsize,
    pub controller_calls: AtomicUsize,
    embedder: HashedEmbedder,
}

impl LearnResponder {
    pub fn new(unstable_hits: usize) -> Self {
        LearnResponder {
            unstable_hits,
            path_inductions: AtomicUsize::new(0),
            hindsight_reflections: AtomicUsize::new(0),
            controller_calls: AtomicUsize::new(0),
            embedder: HashedEmbedder::default(),
        }
    }
}

fn insight(trigger: &str) -> String {
    format!("<Insight>\nSKILL: RELATION DISCOVERY\nTRIGGER: {trigger}\nACTION: bind every participant the cue names into one edge\n</Insight>")
}

impl LlmBackend for LearnResponder {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String> {
        let p = req.prompt;
        if p.contains("analyze ONE successful extraction case") {
            self.path_inductions.fetch_add(1, Ordering::SeqCst);
            return Ok(insight("a dated authorship sentence"));
        }
        if p.contains("analyze ONE hard case") {
            self.hindsight_reflections.fetch_add(1, Ordering::SeqCst);
            return Ok(insight("a sentence about sustained correspondence"));
        }
        if p.contains("update an experience pool") {
            self.controller_calls.fetch_add(1, Ordering::SeqCst);
            return Ok(CONTROLLER_OPS.into());
        }
        if p.starts_with("You are a named entity recognition") {
            return Ok(r#"{"nodes":[
{"name":"Ada Lovelace","type":"person","description":"Writer of notes on the engine"},
{"name":"Analytical Engine","type":"machine","description":"Mechanical computer design"},
{"name":"Charles Babbage","type":"person","description":"Designer of the engine"},
{"name":"1843","type":"date","description":"Year of the notes"}]}"#
                .into());
        }
        if p.contains("Current pass: binary\n") {
            return Ok(r#"{"relations":[{"description":"designed","nodes":["Charles Babbage","Analytical Engine"],"type":"binary"}]}"#.into());
        }
        if p.contains("Current pass: qualified_binary\n") && req.sample_index < self.unstable_hits {
            return Ok(r#"{"relations":[{"description":"wrote notes on","nodes":["Ada Lovelace","Analytical Engine","1843"],"type":"qualified_binary"}]}"#.into());
        }
        if p.contains("Current pass: ") {
            return Ok(r#"{"relations":[]}"#.into());
        }
        Err(Error::InvalidInput("learn responder: unrecognised prompt".into()))
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.embedder.embed(t)).collect())
    }

    fn name(&self) -> &str {
        "learn-responder"
    }
}
