//! Global deduplication of a raw graph: entity mentions are clustered and
//! collapsed, edge members rewritten to canonical names, and edges over the
//! same member set with similar relation text merged.
//!
//! Fused descriptions change the text that gets embedded, which can create
//! new links. Passes therefore repeat until the graph stops changing, which
//! makes [`deduplicate_graph`] idempotent.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::RawGraph;
use crate::gateway::{cosine, Gateway};
use crate::model::{match_key, validate_hypergraph, Entity, GraphBuilder, Hyperedge, KnowledgeHypergraph};
use crate::prompts::{fill, PromptSet};
use crate::util::{fuse_unique, split_sentences};

const MAX_PASSES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    ConcatUnique,
    LlmSummarize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DedupConfig {
    pub entity_sim_threshold: f64,
    pub edge_sim_threshold: f64,
    pub fusion_mode: FusionMode,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            entity_sim_threshold: 0.90,
            edge_sim_threshold: 0.85,
            fusion_mode: FusionMode::ConcatUnique,
        }
    }
}

impl DedupConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("entity_sim_threshold", self.entity_sim_threshold),
            ("edge_sim_threshold", self.edge_sim_threshold),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("dedup.{name} must lie in (0, 1], got {t}")));
            }
        }
        Ok(())
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so the result is order-independent
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }

    /// Groups of indices, each ascending, ordered by their first element.
    fn groups(mut self) -> Vec<Vec<usize>> {
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..self.0.len() {
            let r = self.find(i);
            by_root.entry(r).or_default().push(i);
        }
        let mut groups: Vec<Vec<usize>> = by_root.into_values().collect();
        groups.sort_by_key(|g| g[0]);
        groups
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    /// Mention indices per cluster, ascending within and across clusters.
    pub clusters: Vec<Vec<usize>>,
    pub warnings: Vec<String>,
}

/// Single-link clustering of mentions: same case-folded name, or cosine of
/// `"name: description"` embeddings at or above the threshold.
pub fn cluster_entities(mentions: &[Entity], gateway: &Gateway, config: &DedupConfig) -> Result<Clustering> {
    if mentions.is_empty() {
        return Err(Error::InvalidInput("no mentions to cluster".into()));
    }
    let mut uf = UnionFind::new(mentions.len());
    let mut first_by_key: HashMap<String, usize> = HashMap::new();
    for (i, m) in mentions.iter().enumerate() {
        let first = *first_by_key.entry(match_key(&m.name)).or_insert(i);
        uf.union(first, i);
    }
    let mut warnings = Vec::new();
    if first_by_key.len() > 1 {
        let texts: Vec<String> = mentions.iter().map(Entity::embedding_text).collect();
        match gateway.embed(&texts) {
            Ok(vectors) => {
                for i in 0..mentions.len() {
                    for j in i + 1..mentions.len() {
                        if cosine(&vectors[i], &vectors[j]) >= config.entity_sim_threshold {
                            uf.union(i, j);
                        }
                    }
                }
            }
            Err(e) => {
                let w = format!("entity embedding failed, clustering by exact name only: {e}");
                log::warn!("{w}");
                warnings.push(w);
            }
        }
    }
    Ok(Clustering {
        clusters: uf.groups(),
        warnings,
    })
}

/// Most frequent surface form, then the longest, then the
/// lexicographically smallest.
pub fn elect_canonical<'a>(names: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for n in names {
        *freq.entry(n).or_default() += 1;
    }
    freq.into_iter()
        .max_by(|(a, fa), (b, fb)| {
            fa.cmp(fb)
                .then(a.chars().count().cmp(&b.chars().count()))
                .then(b.cmp(a))
        })
        .map(|(n, _)| n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedupOutcome {
    pub graph: KnowledgeHypergraph,
    /// For each raw edge, the index of the output edge it became, or
    /// `None` if it was dropped for having fewer than two members left.
    pub edge_map: Vec<Option<usize>>,
    /// Raw mention name to canonical entity name.
    pub entity_map: BTreeMap<String, String>,
    pub warnings: Vec<String>,
    /// Raw edge indices dropped because members merged into one entity.
    pub collapsed: Vec<usize>,
}

struct Fuser<'a> {
    gateway: &'a Gateway,
    prompts: &'a PromptSet,
    mode: FusionMode,
}

impl Fuser<'_> {
    fn fuse(&self, kind: &str, texts: &[&str], warnings: &mut Vec<String>) -> String {
        let concat = fuse_unique(texts);
        let distinct: BTreeSet<&str> = texts.iter().copied().filter(|t| !t.trim().is_empty()).collect();
        if self.mode == FusionMode::ConcatUnique || distinct.len() <= 1 {
            return concat;
        }
        let listing: String = texts
            .iter()
            .filter(|t| !t.trim().is_empty())
            .map(|t| format!("- {t}\n"))
            .collect();
        let prompt = fill(&self.prompts.fuse, &[("kind", kind), ("descriptions", &listing)]);
        match self.gateway.complete(&prompt, 0) {
            Ok(text) if !text.trim().is_empty() => text.trim().to_string(),
            Ok(_) | Err(_) => {
                warnings.push(format!("summarizing {kind} failed, concatenating instead"));
                concat
            }
        }
    }
}

struct Pass {
    graph: KnowledgeHypergraph,
    edge_map: Vec<Option<usize>>,
    entity_map: BTreeMap<String, String>,
    warnings: Vec<String>,
}

/// Max cosine over sentence pairs; fused relation texts then stay as
/// close to each source phrasing as the source was.
fn relation_similarity(a: &[usize], b: &[usize], vectors: &[Vec<f64>]) -> f64 {
    a.iter()
        .flat_map(|&i| b.iter().map(move |&j| cosine(&vectors[i], &vectors[j])))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn run_pass(raw: &RawGraph, gateway: &Gateway, config: &DedupConfig, fuser: &Fuser<'_>) -> Result<Pass> {
    let mut warnings = Vec::new();
    let mut builder = GraphBuilder::new(&raw.source_id);
    let mut entity_map = BTreeMap::new();

    let mentions: Vec<Entity> = raw.mentions.iter().map(|m| m.entity.clone()).collect();
    let clusters = if mentions.is_empty() {
        Vec::new()
    } else {
        let c = cluster_entities(&mentions, gateway, config)?;
        warnings.extend(c.warnings);
        c.clusters
    };
    for cluster in &clusters {
        let members: Vec<&Entity> = cluster.iter().map(|&i| &mentions[i]).collect();
        let name = elect_canonical(members.iter().map(|e| e.name.as_str()))
            .expect("clusters are non-empty")
            .to_string();
        let mut aliases: BTreeSet<String> = BTreeSet::new();
        for e in &members {
            aliases.insert(e.name.clone());
            aliases.extend(e.aliases.iter().cloned());
            entity_map.insert(e.name.clone(), name.clone());
        }
        aliases.remove(&name);
        let mut type_freq: Vec<(&str, usize)> = Vec::new();
        for e in members.iter().filter(|e| !e.entity_type.is_empty()) {
            match type_freq.iter_mut().find(|(t, _)| *t == e.entity_type) {
                Some((_, n)) => *n += 1,
                None => type_freq.push((&e.entity_type, 1)),
            }
        }
        // first seen wins ties
        let entity_type = type_freq
            .iter()
            .fold(None::<(&str, usize)>, |best, &(t, n)| match best {
                Some((_, bn)) if bn >= n => best,
                _ => Some((t, n)),
            })
            .map_or("", |(t, _)| t);
        let descriptions: Vec<&str> = members.iter().map(|e| e.description.as_str()).collect();
        let description = fuser.fuse(&format!("entity {name:?}"), &descriptions, &mut warnings);
        builder.entity(Entity {
            name,
            entity_type: entity_type.to_string(),
            description,
            aliases: aliases.into_iter().collect(),
        });
    }

    // rewrite members; edges left with <2 members are dropped
    let mut rewritten: Vec<Option<Hyperedge>> = Vec::with_capacity(raw.edges.len());
    for (i, e) in raw.edges.iter().enumerate() {
        let mut members: Vec<String> = Vec::new();
        for m in &e.members {
            match entity_map.get(m) {
                Some(c) if !members.contains(c) => members.push(c.clone()),
                Some(_) => {}
                None => warnings.push(format!("edge #{i} names unknown entity {m:?}; member dropped")),
            }
        }
        if members.len() < 2 {
            warnings.push(format!(
                "edge #{i} {:?} collapsed to fewer than two members and was dropped",
                e.relation
            ));
            rewritten.push(None);
            continue;
        }
        rewritten.push(Some(Hyperedge {
            relation: e.relation.trim().to_string(),
            tier: e.tier.fit(members.len()),
            members,
            provenance: e.provenance.clone(),
        }));
    }

    // group by canonical member set
    let mut groups: BTreeMap<BTreeSet<String>, Vec<usize>> = BTreeMap::new();
    for (i, e) in rewritten.iter().enumerate() {
        if let Some(e) = e {
            groups.entry(e.members.iter().cloned().collect()).or_default().push(i);
        }
    }
    let needs_embedding: Vec<&Vec<usize>> = groups.values().filter(|g| g.len() > 1).collect();
    let mut sentences: Vec<String> = Vec::new();
    let mut sentence_ids: HashMap<usize, Vec<usize>> = HashMap::new();
    for g in &needs_embedding {
        for &i in g.iter() {
            let rel = &rewritten[i].as_ref().expect("grouped edges exist").relation;
            let mut ids = Vec::new();
            for s in split_sentences(rel) {
                ids.push(sentences.len());
                sentences.push(s);
            }
            sentence_ids.insert(i, ids);
        }
    }
    let vectors = if sentences.is_empty() {
        None
    } else {
        match gateway.embed(&sentences) {
            Ok(v) => Some(v),
            Err(e) => {
                let w = format!("relation embedding failed, merging exact duplicates only: {e}");
                log::warn!("{w}");
                warnings.push(w);
                None
            }
        }
    };

    let mut merged_groups: Vec<Vec<usize>> = Vec::new();
    for idx in groups.values() {
        let mut uf = UnionFind::new(idx.len());
        for a in 0..idx.len() {
            for b in a + 1..idx.len() {
                let (ea, eb) = (
                    rewritten[idx[a]].as_ref().expect("present"),
                    rewritten[idx[b]].as_ref().expect("present"),
                );
                let linked = ea.relation == eb.relation
                    || vectors.as_ref().is_some_and(|v| {
                        let (sa, sb) = (&sentence_ids[&idx[a]], &sentence_ids[&idx[b]]);
                        !sa.is_empty()
                            && !sb.is_empty()
                            && relation_similarity(sa, sb, v) >= config.edge_sim_threshold
                    });
                if linked {
                    uf.union(a, b);
                }
            }
        }
        for g in uf.groups() {
            merged_groups.push(g.into_iter().map(|k| idx[k]).collect());
        }
    }

    let mut group_of_raw: Vec<Option<usize>> = vec![None; raw.edges.len()];
    let mut out_edges: Vec<Hyperedge> = Vec::new();
    for (gi, g) in merged_groups.iter().enumerate() {
        let edges: Vec<&Hyperedge> = g.iter().map(|&i| rewritten[i].as_ref().expect("present")).collect();
        let relations: Vec<&str> = edges.iter().map(|e| e.relation.as_str()).collect();
        let relation = fuser.fuse("relation", &relations, &mut warnings);
        let first = edges[0];
        let tier = edges.iter().map(|e| e.tier).max().expect("non-empty group");
        let provenance = edges.iter().flat_map(|e| e.provenance.iter().cloned()).collect();
        out_edges.push(Hyperedge {
            relation,
            members: first.members.clone(),
            tier,
            provenance,
        });
        for &i in g {
            group_of_raw[i] = Some(gi);
        }
    }
    // distinct groups over one member set never fuse to the same text, since
    // identical sentences would have linked them
    let mut position: Vec<usize> = Vec::with_capacity(out_edges.len());
    for e in &out_edges {
        builder.edge(e.clone());
    }
    let graph = builder.build();
    for e in &out_edges {
        let at = graph
            .hyperedges()
            .iter()
            .position(|o| o.same_fact(e))
            .expect("inserted edge present");
        position.push(at);
    }
    let edge_map = group_of_raw.iter().map(|g| g.map(|gi| position[gi])).collect();
    Ok(Pass {
        graph,
        edge_map,
        entity_map,
        warnings,
    })
}

/// Collapse mention clusters and merge equivalent edges, repeating until
/// the graph is stable.
pub fn deduplicate_graph(
    raw: &RawGraph,
    gateway: &Gateway,
    prompts: &PromptSet,
    config: &DedupConfig,
) -> Result<DedupOutcome> {
    config.validate()?;
    let fuser = Fuser {
        gateway,
        prompts,
        mode: config.fusion_mode,
    };
    let first = run_pass(raw, gateway, config, &fuser)?;
    let collapsed: Vec<usize> = first
        .edge_map
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_none())
        .map(|(i, _)| i)
        .collect();
    let mut outcome = DedupOutcome {
        graph: first.graph,
        edge_map: first.edge_map,
        entity_map: first.entity_map,
        warnings: first.warnings,
        collapsed,
    };
    let mut converged = false;
    for _ in 1..MAX_PASSES {
        let next = run_pass(&RawGraph::from(&outcome.graph), gateway, config, &fuser)?;
        if next.graph == outcome.graph {
            converged = true;
            break;
        }
        // consolidated graphs have one mention per entity and no edge
        // loses members, so every map entry composes
        for m in outcome.edge_map.iter_mut() {
            *m = m.and_then(|i| next.edge_map[i]);
        }
        for target in outcome.entity_map.values_mut() {
            if let Some(t) = next.entity_map.get(target) {
                *target = t.clone();
            }
        }
        outcome.warnings.extend(next.warnings);
        outcome.graph = next.graph;
    }
    if !converged {
        outcome
            .warnings
            .push(format!("deduplication did not settle within {MAX_PASSES} passes"));
    }
    let violations = validate_hypergraph(&outcome.graph);
    if !violations.is_empty() {
        return Err(Error::Validation(violations.iter().map(ToString::to_string).collect()));
    }
    Ok(outcome)
}
