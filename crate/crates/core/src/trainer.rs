//! Skill acquisition from rollouts.
//!
//! A document is extracted K times at non-zero temperature. Each gold edge
//! is counted as retrieved in a candidate when the optimal matching assigns
//! it a similarity at or above the training threshold. Edges retrieved in
//! every candidate are stable and ignored; edges retrieved in some are
//! unstable and reflected on using a successful candidate; edges never
//! retrieved are missed and reflected on with the gold edge as hindsight.
//! The resulting insights go to the library controller.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{match_relations, MatchResult};
use crate::extractor::ChunkTrace;
use crate::gateway::{parse_insights, parse_library_ops, Gateway, InsightProposal, LibraryOp, Origin, Sampling};
use crate::model::{load_graph, Hyperedge, KnowledgeHypergraph};
use crate::pipeline::Pipeline;
use crate::prompts::{fill, PromptSet};
use crate::skills::{render_pool, SkillLibrary};
use crate::util::parallel_map;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutConfig {
    pub k_samples: usize,
    pub temperature: f64,
    pub train_match_threshold: f64,
    /// Apply controller output after each document rather than once at the
    /// end of the round.
    pub update_between_documents: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            k_samples: 4,
            temperature: 0.8,
            train_match_threshold: 0.70,
            update_between_documents: true,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_samples < 2 {
            return Err(Error::Config(format!(
                "rollout.k_samples must be at least 2, got {}",
                self.k_samples
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "rollout.temperature must be positive, got {}",
                self.temperature
            )));
        }
        let t = self.train_match_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Config(format!(
                "rollout.train_match_threshold must lie in (0, 1], got {t}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutSet {
    pub document_id: String,
    pub candidates: Vec<KnowledgeHypergraph>,
    /// Raw tier responses per candidate.
    pub traces: Vec<Vec<ChunkTrace>>,
}

/// Run the full pipeline K times, sample indices `0..K`, at the rollout
/// temperature. A failed sample is retried once.
pub fn sample_rollouts(
    document_id: &str,
    document: &str,
    library: &SkillLibrary,
    pipeline: &Pipeline<'_>,
    config: &RolloutConfig,
) -> Result<RolloutSet> {
    config.validate()?;
    let indices: Vec<usize> = (0..config.k_samples).collect();
    let runs = parallel_map(&indices, pipeline.gateway.config().max_parallel, |_, &k| {
        let sampling = Sampling {
            temperature: config.temperature,
            sample_index: k,
        };
        pipeline
            .run(document_id, document, library, sampling)
            .or_else(|e| {
                log::warn!("{document_id}: rollout {k} failed ({e}); retrying once");
                pipeline.run(document_id, document, library, sampling)
            })
            .map_err(|e| Error::Rollout {
                index: k,
                source: Box::new(e),
            })
    });
    let mut set = RolloutSet {
        document_id: document_id.to_string(),
        candidates: Vec::with_capacity(config.k_samples),
        traces: Vec::with_capacity(config.k_samples),
    };
    for run in runs {
        let run = run?;
        set.candidates.push(run.graph);
        set.traces.push(run.traces);
    }
    Ok(set)
}

/// A candidate edge that retrieved a gold edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub candidate: usize,
    /// Index into that candidate's hyperedges.
    pub pred: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StabilityPartition {
    pub k: usize,
    /// Gold edge index to the number of candidates that retrieved it.
    pub counts: BTreeMap<usize, usize>,
    pub stable: BTreeSet<usize>,
    pub unstable: BTreeSet<usize>,
    pub missed: BTreeSet<usize>,
    pub witnesses: BTreeMap<usize, Vec<Witness>>,
}

/// Partition gold edges given one matching per candidate (pred × gold).
pub fn partition_from_matches(n_gold: usize, matches: &[MatchResult], threshold: f64) -> StabilityPartition {
    let k = matches.len();
    let mut p = StabilityPartition {
        k,
        counts: (0..n_gold).map(|g| (g, 0)).collect(),
        ..Default::default()
    };
    for (c, m) in matches.iter().enumerate() {
        for a in m.assignment.iter().filter(|a| a.similarity >= threshold) {
            *p.counts.get_mut(&a.gold).expect("gold index in range") += 1;
            p.witnesses.entry(a.gold).or_default().push(Witness {
                candidate: c,
                pred: a.pred,
                similarity: a.similarity,
            });
        }
    }
    for (&g, &n) in &p.counts {
        if n == k {
            p.stable.insert(g);
        } else if n == 0 {
            p.missed.insert(g);
        } else {
            p.unstable.insert(g);
        }
    }
    p
}

pub fn partition_by_stability(
    rollouts: &RolloutSet,
    gold: &KnowledgeHypergraph,
    gateway: &Gateway,
    config: &RolloutConfig,
) -> Result<StabilityPartition> {
    if gold.hyperedges().is_empty() {
        return Err(Error::InvalidInput("gold graph has no hyperedges".into()));
    }
    let matches = rollouts
        .candidates
        .iter()
        .map(|c| match_relations(c.hyperedges(), gold.hyperedges(), gateway))
        .collect::<Result<Vec<_>>>()?;
    Ok(partition_from_matches(
        gold.hyperedges().len(),
        &matches,
        config.train_match_threshold,
    ))
}

fn render_nodes(edge: &Hyperedge) -> String {
    serde_json::to_string(&edge.members).expect("names serialize")
}

fn render_edge(edge: &Hyperedge) -> String {
    serde_json::json!({
        "description": edge.relation,
        "nodes": edge.members,
        "type": edge.tier.label(),
    })
    .to_string()
}

/// Raw tier responses of the chunks the edge came from.
fn reasoning_for(edge: &Hyperedge, traces: &[ChunkTrace]) -> String {
    let parts: Vec<String> = traces
        .iter()
        .filter(|t| edge.provenance.contains(&t.chunk_id))
        .flat_map(|t| {
            t.tier_responses
                .iter()
                .map(move |(tier, raw)| format!("[{} {} pass]\n{}", t.chunk_id, tier, raw.trim()))
        })
        .collect();
    if parts.is_empty() {
        "(no reasoning captured)".to_string()
    } else {
        parts.join("\n\n")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reflection {
    pub proposal: InsightProposal,
    pub warnings: Vec<String>,
}

fn finish_reflection(
    raw_result: Result<(crate::gateway::InsightParse, String)>,
    gold_edge: &Hyperedge,
    gold_index: usize,
) -> Result<Reflection> {
    let (parsed, _) = raw_result.map_err(|e| match e {
        Error::Parse { detail, .. } => {
            Error::Reflection(format!("gold edge #{gold_index}: {detail}"))
        }
        other => other,
    })?;
    let mut warnings = parsed.warnings;
    let mut proposals = parsed.proposals.into_iter();
    let mut proposal = proposals.next().expect("parse_insights yields at least one");
    if proposals.next().is_some() {
        warnings.push(format!(
            "gold edge #{gold_index}: several insight blocks returned, the first is kept"
        ));
    }
    proposal.source_relation = Some(gold_index);
    let text = format!("{} {}", proposal.trigger, proposal.action).to_lowercase();
    for name in &gold_edge.members {
        if text.contains(&name.to_lowercase()) {
            warnings.push(format!(
                "gold edge #{gold_index}: insight mentions entity name {name:?}"
            ));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Reflection { proposal, warnings })
}

/// Distill a skill from a candidate that retrieved an unstable gold edge.
/// The witness with the highest similarity is used.
pub fn induce_from_unstable(
    gold_edge: &Hyperedge,
    gold_index: usize,
    witnesses: &[Witness],
    rollouts: &RolloutSet,
    document: &str,
    gateway: &Gateway,
    prompts: &PromptSet,
) -> Result<Reflection> {
    let best = witnesses
        .iter()
        .max_by(|a, b| {
            a.similarity
                .total_cmp(&b.similarity)
                .then(b.candidate.cmp(&a.candidate))
        })
        .ok_or_else(|| Error::InvalidInput(format!("gold edge #{gold_index} has no witness")))?;
    let predicted = rollouts
        .candidates
        .get(best.candidate)
        .and_then(|c| c.hyperedges().get(best.pred))
        .ok_or_else(|| Error::InvalidInput(format!("witness for gold edge #{gold_index} is out of range")))?;
    let prompt = fill(
        &prompts.reflect_unstable,
        &[
            ("text", document),
            ("nodes", &render_nodes(gold_edge)),
            ("type", gold_edge.tier.label()),
            ("description", &gold_edge.relation),
            ("success reasoning", &reasoning_for(predicted, &rollouts.traces[best.candidate])),
            ("success edge", &render_edge(predicted)),
        ],
    );
    let result = gateway.complete_parsed(&prompt, gateway.default_sampling(0), |raw| {
        parse_insights(raw, Origin::Unstable)
    });
    finish_reflection(result, gold_edge, gold_index)
}

/// Distill a skill for a gold edge no candidate retrieved, from the text
/// and the gold edge alone.
pub fn hindsight_from_missed(
    gold_edge: &Hyperedge,
    gold_index: usize,
    document: &str,
    gateway: &Gateway,
    prompts: &PromptSet,
) -> Result<Reflection> {
    let prompt = fill(
        &prompts.reflect_missed,
        &[
            ("text", document),
            ("nodes", &render_nodes(gold_edge)),
            ("type", gold_edge.tier.label()),
            ("description", &gold_edge.relation),
        ],
    );
    let result = gateway.complete_parsed(&prompt, gateway.default_sampling(0), |raw| {
        parse_insights(raw, Origin::Missed)
    });
    finish_reflection(result, gold_edge, gold_index)
}

/// The controller prompt for a batch of proposals against `library`.
pub fn controller_prompt(prompts: &PromptSet, library: &SkillLibrary, proposals: &[InsightProposal]) -> String {
    let new: Vec<String> = proposals.iter().map(InsightProposal::render).collect();
    fill(
        &prompts.skill_update,
        &[
            ("existing experiences", &render_pool(library)),
            ("new experiences", &new.join("\n\n")),
        ],
    )
}

#[derive(Debug, Clone)]
pub struct TrainingDoc {
    pub id: String,
    pub text: String,
    pub gold: KnowledgeHypergraph,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub document_path: PathBuf,
    pub gold_graph_path: PathBuf,
}

/// Read a manifest; relative paths resolve against its directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<TrainingDoc>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries: Vec<ManifestEntry> = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string(), &text))?;
    if entries.is_empty() {
        return Err(Error::InvalidInput(format!("{} lists no documents", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new(""));
    entries
        .into_iter()
        .map(|e| {
            let doc_path = base.join(&e.document_path);
            let text = std::fs::read_to_string(&doc_path).map_err(|err| Error::io(&doc_path, err))?;
            Ok(TrainingDoc {
                id: e
                    .document_path
                    .file_stem()
                    .map_or_else(|| doc_path.display().to_string(), |s| s.to_string_lossy().into_owned()),
                text,
                gold: load_graph(base.join(&e.gold_graph_path))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DocRoundReport {
    pub document: String,
    pub gold_edges: usize,
    pub stable: usize,
    pub unstable: usize,
    pub missed: usize,
    pub counts: BTreeMap<usize, usize>,
    pub path_inductions: usize,
    pub hindsight_reflections: usize,
    pub proposals: Vec<InsightProposal>,
    pub ops: Vec<LibraryOp>,
    pub ops_applied: bool,
    /// ADD and MERGE operations applied.
    pub proposals_accepted: usize,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: u32,
    pub k_samples: usize,
    pub temperature: f64,
    pub train_match_threshold: f64,
    pub library_size_before: usize,
    pub library_size_after: usize,
    pub documents: Vec<DocRoundReport>,
}

impl RoundReport {
    pub fn path_inductions(&self) -> usize {
        self.documents.iter().map(|d| d.path_inductions).sum()
    }

    pub fn hindsight_reflections(&self) -> usize {
        self.documents.iter().map(|d| d.hindsight_reflections).sum()
    }
}

struct DocOutcome {
    report: DocRoundReport,
    ops: Vec<LibraryOp>,
}

fn process_document(
    doc: &TrainingDoc,
    library: &SkillLibrary,
    pipeline: &Pipeline<'_>,
    config: &RolloutConfig,
) -> Result<DocOutcome> {
    let gateway = pipeline.gateway;
    let rollouts = sample_rollouts(&doc.id, &doc.text, library, pipeline, config)?;
    let partition = partition_by_stability(&rollouts, &doc.gold, gateway, config)?;
    let mut report = DocRoundReport {
        document: doc.id.clone(),
        gold_edges: doc.gold.hyperedges().len(),
        stable: partition.stable.len(),
        unstable: partition.unstable.len(),
        missed: partition.missed.len(),
        counts: partition.counts.clone(),
        path_inductions: partition.unstable.len(),
        hindsight_reflections: partition.missed.len(),
        ..Default::default()
    };

    // stable edges carry no signal and are skipped
    let targets: Vec<usize> = partition.unstable.union(&partition.missed).copied().collect();
    let reflections = parallel_map(&targets, gateway.config().max_parallel, |_, &g| {
        let edge = &doc.gold.hyperedges()[g];
        if partition.unstable.contains(&g) {
            induce_from_unstable(
                edge,
                g,
                &partition.witnesses[&g],
                &rollouts,
                &doc.text,
                gateway,
                pipeline.prompts,
            )
        } else {
            hindsight_from_missed(edge, g, &doc.text, gateway, pipeline.prompts)
        }
    });
    for (r, g) in reflections.into_iter().zip(&targets) {
        match r {
            Ok(r) => {
                report.warnings.extend(r.warnings);
                report.proposals.push(r.proposal);
            }
            Err(e @ Error::Reflection(_)) => {
                log::warn!("{}: {e}; gold edge #{g} skipped", doc.id);
                report.warnings.push(e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    if report.proposals.is_empty() {
        return Ok(DocOutcome {
            report,
            ops: Vec::new(),
        });
    }
    let prompt = controller_prompt(pipeline.prompts, library, &report.proposals);
    let (ops, _) = gateway.complete_parsed(&prompt, gateway.default_sampling(0), parse_library_ops)?;
    report.ops = ops.clone();
    Ok(DocOutcome { report, ops })
}

fn accepted(ops: &[LibraryOp]) -> usize {
    ops.iter()
        .filter(|o| matches!(o, LibraryOp::Add { .. } | LibraryOp::Merge { .. }))
        .count()
}

/// One learning round over `docs`. Documents are processed in order; a
/// failing document is reported and skipped, and the round fails only if
/// every document fails.
pub fn run_learning_round(
    docs: &[TrainingDoc],
    library: &SkillLibrary,
    pipeline: &Pipeline<'_>,
    config: &RolloutConfig,
) -> Result<(SkillLibrary, RoundReport)> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::InvalidInput("no training documents".into()));
    }
    let mut lib = library.clone();
    let mut report = RoundReport {
        round: library.round() + 1,
        k_samples: config.k_samples,
        temperature: config.temperature,
        train_match_threshold: config.train_match_threshold,
        library_size_before: library.len(),
        library_size_after: 0,
        documents: Vec::with_capacity(docs.len()),
    };
    let mut deferred: Vec<(usize, Vec<LibraryOp>)> = Vec::new();
    let mut first_error = None;
    for doc in docs {
        let snapshot = if config.update_between_documents { &lib } else { library };
        match process_document(doc, snapshot, pipeline, config) {
            Ok(outcome) => {
                let mut r = outcome.report;
                if config.update_between_documents {
                    apply_reported(&mut lib, &outcome.ops, &mut r);
                } else {
                    deferred.push((report.documents.len(), outcome.ops));
                }
                report.documents.push(r);
            }
            Err(e) => {
                log::error!("{}: {e}", doc.id);
                report.documents.push(DocRoundReport {
                    document: doc.id.clone(),
                    error: Some(e.to_string()),
                    ..Default::default()
                });
                first_error.get_or_insert(e);
            }
        }
    }
    if report.documents.iter().all(|d| d.error.is_some()) {
        return Err(first_error.expect("every document failed"));
    }
    for (i, ops) in deferred {
        apply_reported(&mut lib, &ops, &mut report.documents[i]);
    }
    lib.bump_round();
    report.library_size_after = lib.len();
    Ok((lib, report))
}

fn apply_reported(lib: &mut SkillLibrary, ops: &[LibraryOp], report: &mut DocRoundReport) {
    if ops.is_empty() {
        return;
    }
    match lib.apply_in_place(ops) {
        Ok(()) => {
            report.ops_applied = true;
            report.proposals_accepted = accepted(ops);
        }
        Err(e) => {
            log::warn!("{}: controller operations rejected: {e}", report.document);
            report.warnings.push(format!("controller operations rejected: {e}"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{match_by_similarity, Assigned};
    use crate::gateway::{GatewayConfig, ScriptedProvider};
    use crate::model::Tier;

    fn m(pairs: &[(usize, usize, f64)]) -> MatchResult {
        MatchResult {
            assignment: pairs
                .iter()
                .map(|&(pred, gold, similarity)| Assigned { pred, gold, similarity })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn counts_4_2_0_partition() {
        let matches = vec![
            m(&[(0, 0, 0.9), (1, 1, 0.8)]),
            m(&[(0, 0, 0.9), (1, 1, 0.75)]),
            m(&[(0, 0, 0.95), (1, 1, 0.5)]),
            m(&[(0, 0, 0.71), (1, 2, 0.2)]),
        ];
        let p = partition_from_matches(3, &matches, 0.70);
        assert_eq!(p.counts, BTreeMap::from([(0, 4), (1, 2), (2, 0)]));
        assert_eq!(p.stable, BTreeSet::from([0]));
        assert_eq!(p.unstable, BTreeSet::from([1]));
        assert_eq!(p.missed, BTreeSet::from([2]));
        assert_eq!(p.witnesses[&1].len(), 2);
        assert!(!p.witnesses.contains_key(&2));
    }

    #[test]
    fn identical_candidates_have_no_unstable_edges() {
        let one = match_by_similarity(&[vec![0.9, 0.1], vec![0.2, 0.3]]).unwrap();
        let p = partition_from_matches(2, &vec![one; 3], 0.7);
        assert!(p.unstable.is_empty());
        assert_eq!(p.stable.len() + p.missed.len(), 2);
    }

    #[test]
    fn rollout_config_rules() {
        let mut c = RolloutConfig::default();
        c.validate().unwrap();
        c.k_samples = 1;
        assert!(c.validate().is_err());
        c.k_samples = 2;
        c.temperature = 0.0;
        assert!(c.validate().is_err());
    }

    fn gold_edge() -> Hyperedge {
        Hyperedge::new("ran on", &["Pong", "Atari 2600"], Tier::Binary)
    }

    fn insight(words: usize) -> String {
        let action = vec!["bind"; words.saturating_sub(3)].join(" ");
        format!("<Insight>\nSKILL: RELATION DISCOVERY\nTRIGGER: platform frame\nACTION: {action}\n</Insight>")
    }

    fn missed_prompt(doc: &str) -> String {
        let e = gold_edge();
        fill(
            &PromptSet::default().reflect_missed,
            &[
                ("text", doc),
                ("nodes", &render_nodes(&e)),
                ("type", "binary"),
                ("description", "ran on"),
            ],
        )
    }

    #[test]
    fn hindsight_happy_path_and_budget() {
        let doc = "Pong ran on the Atari 2600.";
        let prompts = PromptSet::default();
        let p = ScriptedProvider::new().with_completion(&missed_prompt(doc), 0, &insight(20));
        let gw = Gateway::with_backend(&GatewayConfig::scripted(), p).unwrap();
        let r = hindsight_from_missed(&gold_edge(), 2, doc, &gw, &prompts).unwrap();
        assert_eq!(r.proposal.origin, Origin::Missed);
        assert_eq!(r.proposal.source_relation, Some(2));

        let prompt = missed_prompt(doc);
        let p = ScriptedProvider::new()
            .with_completion(&prompt, 0, &insight(40))
            .with_completion(&crate::gateway::reprompt(&prompt), 0, &insight(40));
        let gw = Gateway::with_backend(&GatewayConfig::scripted(), p).unwrap();
        assert!(matches!(
            hindsight_from_missed(&gold_edge(), 2, doc, &gw, &prompts),
            Err(Error::Reflection(_))
        ));
    }

    #[test]
    fn entity_names_are_linted_not_rejected() {
        let doc = "Pong ran on the Atari 2600.";
        let resp = "<Insight>\nSKILL: RELATION DISCOVERY\nTRIGGER: Pong on a console\nACTION: bind game and platform\n</Insight>";
        let p = ScriptedProvider::new().with_completion(&missed_prompt(doc), 0, resp);
        let gw = Gateway::with_backend(&GatewayConfig::scripted(), p).unwrap();
        let r = hindsight_from_missed(&gold_edge(), 0, doc, &gw, &PromptSet::default()).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("Pong")));
    }

    #[test]
    fn unstable_prompt_uses_witness_edge_and_trace() {
        let doc = "Pong ran on the Atari 2600.";
        let predicted = Hyperedge::new("runs on", &["Pong", "Atari 2600"], Tier::Binary).with_provenance("chunk-0");
        let mut b = crate::model::GraphBuilder::new("d");
        b.entity(crate::model::Entity::new("Pong", "", ""));
        b.entity(crate::model::Entity::new("Atari 2600", "", ""));
        b.edge(predicted.clone());
        let rollouts = RolloutSet {
            document_id: "d".into(),
            candidates: vec![KnowledgeHypergraph::empty("d"), b.build()],
            traces: vec![
                Vec::new(),
                vec![ChunkTrace {
                    chunk_id: "chunk-0".into(),
                    tier_responses: vec![(Tier::Binary, "RAW".into())],
                }],
            ],
        };
        let prompts = PromptSet::default();
        let e = gold_edge();
        let prompt = fill(
            &prompts.reflect_unstable,
            &[
                ("text", doc),
                ("nodes", &render_nodes(&e)),
                ("type", "binary"),
                ("description", "ran on"),
                ("success reasoning", "[chunk-0 binary pass]\nRAW"),
                ("success edge", &render_edge(&predicted)),
            ],
        );
        let two = format!("{}\n{}", insight(10), insight(12));
        let gw = Gateway::with_backend(
            &GatewayConfig::scripted(),
            ScriptedProvider::new().with_completion(&prompt, 0, &two),
        )
        .unwrap();
        let w = [Witness {
            candidate: 1,
            pred: 0,
            similarity: 0.8,
        }];
        let r = induce_from_unstable(&e, 1, &w, &rollouts, doc, &gw, &prompts).unwrap();
        assert_eq!(r.proposal.origin, Origin::Unstable);
        assert!(r.warnings.iter().any(|w| w.contains("first is kept")));
    }

    #[test]
    fn manifest_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "text").unwrap();
        let mut b = crate::model::GraphBuilder::new("a");
        b.entity(crate::model::Entity::new("X", "", ""));
        b.entity(crate::model::Entity::new("Y", "", ""));
        b.edge(Hyperedge::new("r", &["X", "Y"], Tier::Binary));
        crate::model::save_graph(&b.build(), dir.path().join("a.json")).unwrap();
        std::fs::write(
            dir.path().join("m.json"),
            r#"[{"document_path":"a.txt","gold_graph_path":"a.json"}]"#,
        )
        .unwrap();
        let docs = load_manifest(dir.path().join("m.json")).unwrap();
        assert_eq!(docs[0].id, "a");
        assert_eq!(docs[0].gold.hyperedges().len(), 1);
    }
}
