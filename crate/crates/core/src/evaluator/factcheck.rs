//! Fact verification over retrieved subgraphs, and evidence retrieval.
//!
//! One hop goes from an entity to its incident hyperedges and on to their
//! members, so `hops = 2` reaches entities sharing an edge with a neighbour.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{cosine, parse_verdict, Gateway};
use crate::model::KnowledgeHypergraph;
use crate::prompts::{fill, PromptSet};
use crate::util::parallel_map;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactCheckConfig {
    pub top_n: usize,
    pub hops: usize,
}

impl Default for FactCheckConfig {
    fn default() -> Self {
        FactCheckConfig { top_n: 5, hops: 2 }
    }
}

/// A subgraph: reached entity names (sorted) and indices of the graph's
/// hyperedges whose members were all reached.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub entities: Vec<String>,
    pub edges: Vec<usize>,
}

pub fn expand_incidence<S: AsRef<str>>(graph: &KnowledgeHypergraph, seeds: &[S], hops: usize) -> Evidence {
    let mut reached: BTreeSet<&str> = seeds
        .iter()
        .filter_map(|s| graph.entity(s.as_ref()).map(|e| e.name.as_str()))
        .collect();
    let mut frontier: Vec<&str> = reached.iter().copied().collect();
    for _ in 0..hops {
        let mut next = Vec::new();
        for name in frontier {
            for i in graph.incident_edges(name) {
                for m in &graph.hyperedges()[i].members {
                    if reached.insert(m.as_str()) {
                        next.push(m.as_str());
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    let edges = graph
        .hyperedges()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.members.iter().all(|m| reached.contains(m.as_str())))
        .map(|(i, _)| i)
        .collect();
    Evidence {
        entities: reached.into_iter().map(String::from).collect(),
        edges,
    }
}

/// Plain-text rendering of a subgraph for the judge prompt.
pub fn render_evidence(graph: &KnowledgeHypergraph, evidence: &Evidence) -> String {
    let mut out = String::from("Entities:\n");
    for name in &evidence.entities {
        if let Some(e) = graph.entity(name) {
            out.push_str(&format!("- {} ({}): {}\n", e.name, e.entity_type, e.description));
        }
    }
    out.push_str("Relations:\n");
    if evidence.edges.is_empty() {
        out.push_str("(none)\n");
    }
    for &i in &evidence.edges {
        let e = &graph.hyperedges()[i];
        out.push_str(&format!("- {} [{}]\n", e.relation, e.members.join("; ")));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactVerdict {
    pub fact: String,
    pub supported: bool,
    /// Top-ranked entities the expansion started from.
    pub seeds: Vec<String>,
    pub evidence: Evidence,
}

fn rank_entities(
    query: &str,
    graph: &KnowledgeHypergraph,
    gateway: &Gateway,
) -> Result<Vec<(String, f64)>> {
    let entities: Vec<_> = graph.entities().collect();
    let mut texts: Vec<String> = entities.iter().map(|e| e.embedding_text()).collect();
    texts.push(query.to_string());
    let vectors = gateway.embed(&texts)?;
    let (q, ev) = vectors.split_last().expect("query vector present");
    let mut ranked: Vec<(String, f64)> = entities
        .iter()
        .zip(ev)
        .map(|(e, v)| (e.name.clone(), cosine(v, q)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Judge whether `fact` is supported by the subgraph around its closest
/// entities.
pub fn verify_fact(
    fact: &str,
    graph: &KnowledgeHypergraph,
    gateway: &Gateway,
    prompts: &PromptSet,
    config: &FactCheckConfig,
) -> Result<FactVerdict> {
    let fact = fact.trim();
    if fact.is_empty() {
        return Err(Error::InvalidInput("fact is empty".into()));
    }
    if graph.entity_count() == 0 {
        return Err(Error::InvalidInput("cannot verify facts against an empty graph".into()));
    }
    let ranked = rank_entities(fact, graph, gateway)
        .map_err(|e| Error::Verification(format!("ranking entities for {fact:?}: {e}")))?;
    let seeds: Vec<String> = ranked.into_iter().take(config.top_n).map(|(n, _)| n).collect();
    let evidence = expand_incidence(graph, &seeds, config.hops);
    let prompt = fill(
        &prompts.judge,
        &[("context", &render_evidence(graph, &evidence)), ("fact", fact)],
    );
    let (supported, _) = gateway
        .complete_parsed(&prompt, gateway.default_sampling(0), parse_verdict)
        .map_err(|e| match e {
            Error::Parse { detail, .. } => {
                Error::Verification(format!("judge verdict for {fact:?}: {detail}"))
            }
            other => other,
        })?;
    Ok(FactVerdict {
        fact: fact.to_string(),
        supported,
        seeds,
        evidence,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactCheckReport {
    pub verdicts: Vec<FactVerdict>,
    pub supported: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Verify every fact, concurrently up to the gateway's parallelism.
pub fn verify_facts<S: AsRef<str> + Sync>(
    facts: &[S],
    graph: &KnowledgeHypergraph,
    gateway: &Gateway,
    prompts: &PromptSet,
    config: &FactCheckConfig,
) -> Result<FactCheckReport> {
    if facts.is_empty() {
        return Err(Error::InvalidInput("no facts to verify".into()));
    }
    let verdicts = parallel_map(facts, gateway.config().max_parallel, |_, f| {
        verify_fact(f.as_ref(), graph, gateway, prompts, config)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let supported = verdicts.iter().filter(|v| v.supported).count();
    Ok(FactCheckReport {
        total: verdicts.len(),
        accuracy: supported as f64 / verdicts.len() as f64,
        supported,
        verdicts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEntity {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEdge {
    pub index: usize,
    pub relation: String,
    pub members: Vec<String>,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBundle {
    pub entities: Vec<ScoredEntity>,
    pub edges: Vec<ScoredEdge>,
}

/// Top-`k` entities and top-`k` hyperedges for `query`, with the entities
/// expanded one hop and the members of retrieved edges added. Each item
/// appears once, scored by its own similarity to the query.
pub fn retrieve_evidence(
    query: &str,
    graph: &KnowledgeHypergraph,
    gateway: &Gateway,
    k: usize,
) -> Result<EvidenceBundle> {
    if k == 0 {
        return Err(Error::InvalidInput("retrieval needs k >= 1".into()));
    }
    if graph.entity_count() == 0 {
        return Ok(EvidenceBundle::default());
    }
    let entities: Vec<_> = graph.entities().collect();
    let edges = graph.hyperedges();
    let mut texts: Vec<String> = entities.iter().map(|e| e.embedding_text()).collect();
    texts.extend(edges.iter().map(|e| e.matching_text()));
    texts.push(query.to_string());
    let vectors = gateway
        .embed(&texts)
        .map_err(|e| Error::Retrieval(format!("{query:?}: {e}")))?;
    let (q, rest) = vectors.split_last().expect("query vector present");
    let (ev, xv) = rest.split_at(entities.len());
    let entity_score: BTreeMap<&str, f64> = entities
        .iter()
        .zip(ev)
        .map(|(e, v)| (e.name.as_str(), cosine(v, q)))
        .collect();
    let edge_score: Vec<f64> = xv.iter().map(|v| cosine(v, q)).collect();

    let by_score = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    let mut top_entities: Vec<(f64, usize)> = entities
        .iter()
        .enumerate()
        .map(|(i, e)| (entity_score[e.name.as_str()], i))
        .collect();
    top_entities.sort_by(by_score);
    let mut top_edges: Vec<(f64, usize)> = edge_score.iter().copied().zip(0..).collect();
    top_edges.sort_by(by_score);

    let mut names: BTreeSet<&str> = BTreeSet::new();
    let mut edge_ids: BTreeSet<usize> = BTreeSet::new();
    for &(_, i) in top_entities.iter().take(k) {
        let name = entities[i].name.as_str();
        names.insert(name);
        for j in graph.incident_edges(name) {
            edge_ids.insert(j);
        }
    }
    edge_ids.extend(top_edges.iter().take(k).map(|&(_, j)| j));
    for &j in &edge_ids {
        names.extend(edges[j].members.iter().map(String::as_str));
    }

    let mut bundle = EvidenceBundle {
        entities: names
            .into_iter()
            .map(|n| ScoredEntity {
                name: n.to_string(),
                score: entity_score[n],
            })
            .collect(),
        edges: edge_ids
            .into_iter()
            .map(|j| ScoredEdge {
                index: j,
                relation: edges[j].relation.clone(),
                members: edges[j].members.clone(),
                score: edge_score[j],
            })
            .collect(),
    };
    bundle
        .entities
        .sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.name.cmp(&b.name)));
    bundle
        .edges
        .sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{GatewayConfig, ScriptedProvider};
    use crate::model::{Entity, GraphBuilder, Hyperedge, Tier};

    fn chain(n: usize) -> KnowledgeHypergraph {
        let mut b = GraphBuilder::new("chain");
        for i in 0..n {
            b.entity(Entity::new(&format!("n{i}"), "node", &format!("node {i}")));
        }
        for i in 0..n - 1 {
            b.edge(Hyperedge::new(
                &format!("link {i}"),
                &[format!("n{i}"), format!("n{}", i + 1)],
                Tier::Binary,
            ));
        }
        b.build()
    }

    #[test]
    fn two_hops_along_a_chain() {
        let g = chain(5);
        let ev = expand_incidence(&g, &["n0"], 2);
        assert_eq!(ev.entities, vec!["n0", "n1", "n2"]);
        assert_eq!(ev.edges.len(), 2);
        let mid = expand_incidence(&g, &["n2"], 1);
        assert_eq!(mid.entities, vec!["n1", "n2", "n3"]);
    }

    #[test]
    fn isolated_entity_has_no_neighbours() {
        let mut b = chain(3).to_builder();
        b.entity(Entity::new("lonely", "node", "alone"));
        let g = b.build();
        let ev = expand_incidence(&g, &["lonely"], 2);
        assert_eq!(ev.entities, vec!["lonely"]);
        assert!(ev.edges.is_empty());
    }

    fn gateway_for(g: &KnowledgeHypergraph, query: &str, hot: &str) -> ScriptedProvider {
        let mut p = ScriptedProvider::new().with_embedding(query, vec![1.0, 0.0, 0.0]);
        for (i, e) in g.entities().enumerate() {
            let v = if e.name == hot {
                vec![1.0, 0.0, 0.0]
            } else {
                vec![0.0, 1.0, i as f64 * 0.01]
            };
            p.add_embedding(&e.embedding_text(), v);
        }
        for e in g.hyperedges() {
            p.add_embedding(&e.matching_text(), vec![0.0, 0.0, 1.0]);
        }
        p
    }

    #[test]
    fn verdict_is_parsed_from_judge() {
        let g = chain(5);
        let fact = "n0 links to n1";
        let prompts = PromptSet::default();
        let cfg = FactCheckConfig { top_n: 1, hops: 2 };
        let seeds = vec!["n0".to_string()];
        let ev = expand_incidence(&g, &seeds, 2);
        let prompt = fill(
            &prompts.judge,
            &[("context", &render_evidence(&g, &ev)), ("fact", fact)],
        );
        let p = gateway_for(&g, fact, "n0").with_completion(&prompt, 0, "1");
        let gw = Gateway::with_backend(&GatewayConfig::scripted(), p).unwrap();
        let v = verify_fact(fact, &g, &gw, &prompts, &cfg).unwrap();
        assert!(v.supported);
        assert_eq!(v.seeds, seeds);
        assert_eq!(v.evidence, ev);
    }

    #[test]
    fn unreadable_verdict_is_an_error_after_reprompt() {
        let g = chain(3);
        let fact = "f";
        let prompts = PromptSet::default();
        let cfg = FactCheckConfig { top_n: 1, hops: 2 };
        let ev = expand_incidence(&g, &["n0"], 2);
        let prompt = fill(
            &prompts.judge,
            &[("context", &render_evidence(&g, &ev)), ("fact", fact)],
        );
        let p = gateway_for(&g, fact, "n0")
            .with_completion(&prompt, 0, "maybe")
            .with_completion(&crate::gateway::reprompt(&prompt), 0, "perhaps");
        let gw = Gateway::with_backend(&GatewayConfig::scripted(), p).unwrap();
        assert!(matches!(
            verify_fact(fact, &g, &gw, &prompts, &cfg),
            Err(Error::Verification(_))
        ));
    }

    #[test]
    fn retrieval_includes_members_of_top_edge() {
        let g = chain(4);
        let query = "q";
        let top_edge = g.hyperedges()[1].clone();
        let mut p = ScriptedProvider::new().with_embedding(query, vec![1.0, 0.0]);
        for e in g.entities() {
            p.add_embedding(&e.embedding_text(), vec![0.0, 1.0]);
        }
        for e in g.hyperedges() {
            let v = if *e == top_edge { vec![1.0, 0.0] } else { vec![0.1, 1.0] };
            p.add_embedding(&e.matching_text(), v);
        }
        let gw = Gateway::with_backend(&GatewayConfig::scripted(), p).unwrap();
        let b = retrieve_evidence(query, &g, &gw, 1).unwrap();
        assert_eq!(b.edges[0].relation, top_edge.relation);
        let names: BTreeSet<_> = b.entities.iter().map(|e| e.name.as_str()).collect();
        for m in &top_edge.members {
            assert!(names.contains(m.as_str()));
        }
    }

    #[test]
    fn retrieval_saturates_and_handles_empty() {
        let g = chain(3);
        let gw = Gateway::with_backend(
            &GatewayConfig::scripted(),
            ScriptedProvider::new().with_hashed_fallback(Default::default()),
        )
        .unwrap();
        let b = retrieve_evidence("anything", &g, &gw, 50).unwrap();
        assert_eq!(b.entities.len(), 3);
        assert_eq!(b.edges.len(), 2);
        let empty = KnowledgeHypergraph::empty("e");
        assert_eq!(retrieve_evidence("q", &empty, &gw, 3).unwrap(), EvidenceBundle::default());
    }
}
