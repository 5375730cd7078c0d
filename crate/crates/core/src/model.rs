//! Knowledge hypergraph data model.
//!
//! A graph is a set of named entities plus a list of hyperedges, each edge
//! tying a relation description to two or more member entities. Entity
//! identity is the canonical name: trimmed, inner whitespace collapsed to a
//! single space, case preserved.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trim and collapse internal whitespace. Case is preserved.
pub fn canonical_name(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Case-folded canonical form, used wherever two surface forms should be
/// treated as the same mention ("Pong" and "pong").
pub fn match_key(raw: &str) -> String {
    canonical_name(raw).to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Binary,
    QualifiedBinary,
    Nary,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Binary, Tier::QualifiedBinary, Tier::Nary];

    pub fn label(self) -> &'static str {
        match self {
            Tier::Binary => "binary",
            Tier::QualifiedBinary => "qualified_binary",
            Tier::Nary => "nary",
        }
    }

    pub fn from_label(label: &str) -> Option<Tier> {
        match label.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "binary" => Some(Tier::Binary),
            "qualified_binary" | "qualified" => Some(Tier::QualifiedBinary),
            "nary" | "n_ary" => Some(Tier::Nary),
            _ => None,
        }
    }

    /// Whether an edge with `n` distinct members may carry this tier.
    pub fn admits(self, n: usize) -> bool {
        match self {
            Tier::Binary => n == 2,
            Tier::QualifiedBinary => n >= 3,
            Tier::Nary => n >= 2,
        }
    }

    /// `self` if it admits `n` members, else binary for pairs and n-ary
    /// for anything larger.
    pub fn fit(self, n: usize) -> Tier {
        if self.admits(n) {
            self
        } else if n == 2 {
            Tier::Binary
        } else {
            Tier::Nary
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub name: String,
    #[serde(rename = "type")]
    pub entity_type: String,
    pub description: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

impl Entity {
    pub fn new(name: &str, entity_type: &str, description: &str) -> Self {
        Entity {
            name: canonical_name(name),
            entity_type: entity_type.trim().to_string(),
            description: description.trim().to_string(),
            aliases: Vec::new(),
        }
    }

    /// Text used to embed this entity for similarity ranking.
    pub fn embedding_text(&self) -> String {
        format!("{}: {}", self.name, self.description)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperedge {
    pub relation: String,
    pub members: Vec<String>,
    pub tier: Tier,
    #[serde(default)]
    pub provenance: BTreeSet<String>,
}

impl Hyperedge {
    pub fn new<S: AsRef<str>>(relation: &str, members: &[S], tier: Tier) -> Self {
        Hyperedge {
            relation: relation.trim().to_string(),
            members: members.iter().map(|m| canonical_name(m.as_ref())).collect(),
            tier,
            provenance: BTreeSet::new(),
        }
    }

    pub fn with_provenance(mut self, chunk_id: &str) -> Self {
        self.provenance.insert(chunk_id.to_string());
        self
    }

    pub fn member_set(&self) -> BTreeSet<&str> {
        self.members.iter().map(String::as_str).collect()
    }

    /// Same relation text and same member set, ignoring member order.
    pub fn same_fact(&self, other: &Hyperedge) -> bool {
        self.relation == other.relation && self.member_set() == other.member_set()
    }

    /// Text used for semantic matching: relation plus sorted participants.
    pub fn matching_text(&self) -> String {
        let mut members: Vec<&str> = self.members.iter().map(String::as_str).collect();
        members.sort_unstable();
        format!("{}; participants: {}", self.relation, members.join(", "))
    }

    fn sort_key(&self) -> (&str, &[String]) {
        (&self.relation, &self.members)
    }
}

/// An immutable knowledge hypergraph. Build one with [`GraphBuilder`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KnowledgeHypergraph {
    source_id: String,
    entities: BTreeMap<String, Entity>,
    hyperedges: Vec<Hyperedge>,
}

impl KnowledgeHypergraph {
    pub fn empty(source_id: &str) -> Self {
        GraphBuilder::new(source_id).build()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn entities(&self) -> impl ExactSizeIterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entity(&self, name: &str) -> Option<&Entity> {
        self.entities.get(name)
    }

    pub fn entity_names(&self) -> impl Iterator<Item = &str> {
        self.entities.keys().map(String::as_str)
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn hyperedges(&self) -> &[Hyperedge] {
        &self.hyperedges
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.hyperedges.is_empty()
    }

    /// Indices of edges that contain `name` as a member.
    pub fn incident_edges(&self, name: &str) -> Vec<usize> {
        self.hyperedges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.members.iter().any(|m| m == name))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_builder(&self) -> GraphBuilder {
        GraphBuilder {
            graph: self.clone(),
        }
    }
}

/// Single-writer construction of a [`KnowledgeHypergraph`].
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    graph: KnowledgeHypergraph,
}

impl GraphBuilder {
    pub fn new(source_id: &str) -> Self {
        GraphBuilder {
            graph: KnowledgeHypergraph {
                source_id: source_id.to_string(),
                ..Default::default()
            },
        }
    }

    /// Insert or replace an entity under its canonical name.
    pub fn entity(&mut self, mut entity: Entity) -> &mut Self {
        entity.name = canonical_name(&entity.name);
        entity.aliases.sort();
        self.graph.entities.insert(entity.name.clone(), entity);
        self
    }

    /// Insert an edge. An edge with the same relation text and member set
    /// as one already present is ignored. Returns whether it was added.
    pub fn edge(&mut self, edge: Hyperedge) -> bool {
        if self.graph.hyperedges.iter().any(|e| e.same_fact(&edge)) {
            return false;
        }
        self.graph.hyperedges.push(edge);
        true
    }

    pub fn edge_count(&self) -> usize {
        self.graph.hyperedges.len()
    }

    /// Finish without validating. Edges are put into canonical order.
    pub fn build(mut self) -> KnowledgeHypergraph {
        self.graph
            .hyperedges
            .sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        self.graph
    }

    pub fn build_validated(self) -> Result<KnowledgeHypergraph> {
        let graph = self.build();
        let violations = validate_hypergraph(&graph);
        if violations.is_empty() {
            Ok(graph)
        } else {
            Err(Error::Validation(
                violations.iter().map(ToString::to_string).collect(),
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyEntityName { key: String },
    NonCanonicalName { name: String },
    KeyMismatch { key: String, name: String },
    AliasIsName { entity: String },
    DuplicateAlias { entity: String, alias: String },
    EmptyRelation { edge: usize },
    TooFewMembers { edge: usize, relation: String, distinct: usize },
    DuplicateMember { edge: usize, member: String },
    TierCardinality { edge: usize, tier: Tier, members: usize },
    DanglingMember { edge: usize, relation: String, member: String },
    DuplicateEdge { edge: usize, first: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyEntityName { key } => write!(f, "entity {key:?} has an empty name"),
            Violation::NonCanonicalName { name } => {
                write!(f, "entity name {name:?} is not in canonical form")
            }
            Violation::KeyMismatch { key, name } => {
                write!(f, "entity stored under {key:?} is named {name:?}")
            }
            Violation::AliasIsName { entity } => {
                write!(f, "entity {entity:?} lists its own name as an alias")
            }
            Violation::DuplicateAlias { entity, alias } => {
                write!(f, "entity {entity:?} repeats alias {alias:?}")
            }
            Violation::EmptyRelation { edge } => write!(f, "edge #{edge} has an empty relation"),
            Violation::TooFewMembers {
                edge,
                relation,
                distinct,
            } => write!(
                f,
                "edge #{edge} ({relation:?}) has {distinct} distinct member(s); |V_e| >= 2 required"
            ),
            Violation::DuplicateMember { edge, member } => {
                write!(f, "edge #{edge} lists member {member:?} more than once")
            }
            Violation::TierCardinality {
                edge,
                tier,
                members,
            } => write!(f, "edge #{edge} has tier {tier} but {members} members"),
            Violation::DanglingMember {
                edge,
                relation,
                member,
            } => write!(
                f,
                "edge #{edge} ({relation:?}) references unknown entity {member:?}"
            ),
            Violation::DuplicateEdge { edge, first } => {
                write!(f, "edge #{edge} duplicates edge #{first}")
            }
        }
    }
}

/// Check every structural invariant. An empty result means the graph is valid.
pub fn validate_hypergraph(graph: &KnowledgeHypergraph) -> Vec<Violation> {
    let mut out = Vec::new();

    for (key, entity) in &graph.entities {
        if entity.name.trim().is_empty() {
            out.push(Violation::EmptyEntityName { key: key.clone() });
            continue;
        }
        if canonical_name(&entity.name) != entity.name {
            out.push(Violation::NonCanonicalName {
                name: entity.name.clone(),
            });
        }
        if *key != entity.name {
            out.push(Violation::KeyMismatch {
                key: key.clone(),
                name: entity.name.clone(),
            });
        }
        let mut seen = HashSet::new();
        for alias in &entity.aliases {
            if *alias == entity.name {
                out.push(Violation::AliasIsName {
                    entity: entity.name.clone(),
                });
            }
            if !seen.insert(alias.as_str()) {
                out.push(Violation::DuplicateAlias {
                    entity: entity.name.clone(),
                    alias: alias.clone(),
                });
            }
        }
    }

    for (i, edge) in graph.hyperedges.iter().enumerate() {
        if edge.relation.trim().is_empty() {
            out.push(Violation::EmptyRelation { edge: i });
        }
        let mut seen = HashSet::new();
        for m in &edge.members {
            if !seen.insert(m.as_str()) {
                out.push(Violation::DuplicateMember {
                    edge: i,
                    member: m.clone(),
                });
            }
        }
        if seen.len() < 2 {
            out.push(Violation::TooFewMembers {
                edge: i,
                relation: edge.relation.clone(),
                distinct: seen.len(),
            });
        } else if !edge.tier.admits(seen.len()) {
            out.push(Violation::TierCardinality {
                edge: i,
                tier: edge.tier,
                members: seen.len(),
            });
        }
        for m in &edge.members {
            if !graph.entities.contains_key(m) {
                out.push(Violation::DanglingMember {
                    edge: i,
                    relation: edge.relation.clone(),
                    member: m.clone(),
                });
            }
        }
        if let Some(first) = graph.hyperedges[..i].iter().position(|e| e.same_fact(edge)) {
            out.push(Violation::DuplicateEdge { edge: i, first });
        }
    }
    out
}

// On-disk layout. Field order here fixes the serialized key order.
#[derive(Serialize, Deserialize)]
struct GraphFile {
    source_id: String,
    entities: Vec<Entity>,
    hyperedges: Vec<Hyperedge>,
}

/// Serialize to the canonical byte-deterministic JSON form.
pub fn to_json(graph: &KnowledgeHypergraph) -> String {
    let mut entities: Vec<Entity> = graph.entities.values().cloned().collect();
    for e in &mut entities {
        e.aliases.sort();
    }
    let mut hyperedges = graph.hyperedges.clone();
    hyperedges.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let file = GraphFile {
        source_id: graph.source_id.clone(),
        entities,
        hyperedges,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("graph serialization is infallible");
    s.push('\n');
    s
}

/// Parse canonical JSON and validate the result.
pub fn from_json(text: &str) -> Result<KnowledgeHypergraph> {
    let file: GraphFile = serde_json::from_str(text)
        .map_err(|e| Error::parse("hypergraph JSON", e.to_string(), text))?;
    let mut builder = GraphBuilder::new(&file.source_id);
    let mut duplicates = Vec::new();
    for mut entity in file.entities {
        entity.aliases.sort();
        // keep the stored name untouched so validation can flag it
        if let Some(prev) = builder.graph.entities.insert(entity.name.clone(), entity) {
            duplicates.push(format!("entity {:?} appears more than once", prev.name));
        }
    }
    builder.graph.hyperedges = file.hyperedges;
    let graph = builder.build();
    let mut violations: Vec<String> = validate_hypergraph(&graph)
        .iter()
        .map(ToString::to_string)
        .collect();
    violations.extend(duplicates);
    if violations.is_empty() {
        Ok(graph)
    } else {
        Err(Error::Validation(violations))
    }
}

pub fn read_graph(mut reader: impl Read) -> Result<KnowledgeHypergraph> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::io("<reader>", e))?;
    from_json(&text)
}

pub fn write_graph(graph: &KnowledgeHypergraph, mut writer: impl Write) -> Result<()> {
    let violations = validate_hypergraph(graph);
    if !violations.is_empty() {
        return Err(Error::Validation(
            violations.iter().map(ToString::to_string).collect(),
        ));
    }
    writer
        .write_all(to_json(graph).as_bytes())
        .map_err(|e| Error::io("<writer>", e))
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<KnowledgeHypergraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text).map_err(|e| match e {
        Error::Parse { detail, raw, .. } => Error::Parse {
            context: path.display().to_string(),
            detail,
            raw,
        },
        other => other,
    })
}

pub fn save_graph(graph: &KnowledgeHypergraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_graph(graph, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ent(name: &str) -> Entity {
        Entity::new(name, "thing", &format!("{name} desc"))
    }

    fn small_graph() -> KnowledgeHypergraph {
        let mut b = GraphBuilder::new("doc-1");
        b.entity(ent("Spacewar!"))
            .entity(ent("1962"))
            .entity(ent("Massachusetts Institute of Technology"));
        b.edge(
            Hyperedge::new(
                "developed in 1962 at MIT",
                &["Spacewar!", "1962", "Massachusetts Institute of Technology"],
                Tier::QualifiedBinary,
            )
            .with_provenance("chunk-0"),
        );
        b.edge(
            Hyperedge::new(
                "was developed at",
                &["Spacewar!", "Massachusetts Institute of Technology"],
                Tier::Binary,
            )
            .with_provenance("chunk-0")
            .with_provenance("chunk-1"),
        );
        b.build()
    }

    #[test]
    fn empty_graph_is_valid() {
        assert!(validate_hypergraph(&KnowledgeHypergraph::empty("x")).is_empty());
    }

    #[test]
    fn single_member_edge_is_flagged() {
        let mut b = GraphBuilder::new("d");
        b.entity(ent("A"));
        b.edge(Hyperedge::new("alone", &["A"], Tier::Nary));
        let v = validate_hypergraph(&b.build());
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].to_string().contains("|V_e| >= 2"));
    }

    #[test]
    fn dangling_member_is_flagged() {
        let mut b = GraphBuilder::new("d");
        b.entity(ent("A")).entity(ent("B"));
        b.edge(Hyperedge::new("r", &["A", "X"], Tier::Binary));
        let g = b.build();
        let v = validate_hypergraph(&g);
        // independent scan: members not among entity keys
        let names: HashSet<&str> = g.entity_names().collect();
        let dangling: Vec<&String> = g.hyperedges()[0]
            .members
            .iter()
            .filter(|m| !names.contains(m.as_str()))
            .collect();
        assert_eq!(dangling, vec!["X"]);
        assert_eq!(
            v,
            vec![Violation::DanglingMember {
                edge: 0,
                relation: "r".into(),
                member: "X".into()
            }]
        );
    }

    #[test]
    fn tier_fit() {
        assert_eq!(Tier::Binary.fit(3), Tier::Nary);
        assert_eq!(Tier::QualifiedBinary.fit(2), Tier::Binary);
        assert_eq!(Tier::Nary.fit(2), Tier::Nary);
    }

    #[test]
    fn tier_cardinality_rules() {
        assert!(Tier::Binary.admits(2) && !Tier::Binary.admits(3));
        assert!(!Tier::QualifiedBinary.admits(2) && Tier::QualifiedBinary.admits(3));
        assert!(Tier::Nary.admits(2) && Tier::Nary.admits(6));
        let mut b = GraphBuilder::new("d");
        b.entity(ent("A")).entity(ent("B")).entity(ent("C"));
        b.edge(Hyperedge::new("r", &["A", "B", "C"], Tier::Binary));
        let v = validate_hypergraph(&b.build());
        assert!(matches!(v[..], [Violation::TierCardinality { .. }]));
    }

    #[test]
    fn alias_rules() {
        let mut e = ent("MIT");
        e.aliases = vec!["MIT".into(), "mit".into(), "mit".into()];
        let mut b = GraphBuilder::new("d");
        b.entity(e);
        assert_eq!(validate_hypergraph(&b.build()).len(), 2);
    }

    #[test]
    fn duplicate_edge_insert_is_noop() {
        let mut b = GraphBuilder::new("d");
        b.entity(ent("A")).entity(ent("B"));
        assert!(b.edge(Hyperedge::new("r", &["A", "B"], Tier::Binary)));
        assert!(!b.edge(Hyperedge::new("r", &["B", "A"], Tier::Binary)));
        assert_eq!(b.edge_count(), 1);
        assert!(b.edge(Hyperedge::new("r2", &["B", "A"], Tier::Binary)));
    }

    #[test]
    fn canonical_names() {
        assert_eq!(canonical_name("  Red   Dead\tRedemption "), "Red Dead Redemption");
        assert_eq!(match_key(" Pong "), match_key("pong"));
    }

    #[test]
    fn save_load_round_trip() {
        let g = small_graph();
        let text = to_json(&g);
        let back = from_json(&text).unwrap();
        assert_eq!(g, back);
        assert_eq!(to_json(&back), text);
    }

    #[test]
    fn serialization_key_order_is_fixed() {
        let text = to_json(&small_graph());
        let s = text.find("\"source_id\"").unwrap();
        let e = text.find("\"entities\"").unwrap();
        let h = text.find("\"hyperedges\"").unwrap();
        assert!(s < e && e < h);
        let r = text.find("\"relation\"").unwrap();
        let m = text.find("\"members\"").unwrap();
        let t = text.find("\"tier\"").unwrap();
        let p = text.find("\"provenance\"").unwrap();
        assert!(r < m && m < t && t < p);
    }

    #[test]
    fn missing_entities_key_is_parse_error() {
        let err = from_json(r#"{"source_id":"d","hyperedges":[]}"#).unwrap_err();
        match err {
            Error::Parse { detail, .. } => assert!(detail.contains("entities"), "{detail}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_graph_on_load_lists_violations() {
        let text = r#"{"source_id":"d","entities":[{"name":"A","type":"t","description":"","aliases":[]}],
            "hyperedges":[{"relation":"r","members":["A","Z"],"tier":"binary","provenance":[]}]}"#;
        match from_json(text).unwrap_err() {
            Error::Validation(v) => assert!(v[0].contains("\"Z\"")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn save_rejects_invalid_graph() {
        let mut b = GraphBuilder::new("d");
        b.entity(ent("A"));
        b.edge(Hyperedge::new("r", &["A", "B"], Tier::Binary));
        assert!(matches!(
            write_graph(&b.build(), Vec::new()),
            Err(Error::Validation(_))
        ));
    }
}
