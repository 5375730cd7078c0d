//! Scoring extracted graphs against gold: optimal one-to-one matching of
//! hyperedges, thresholded P/R/F1, fact verification and evidence retrieval.

mod factcheck;
mod hungarian;
mod metrics;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{cosine, Gateway};
use crate::model::{Hyperedge, KnowledgeHypergraph};

pub use factcheck::{
    expand_incidence, render_evidence, retrieve_evidence, verify_fact, verify_facts, Evidence,
    EvidenceBundle, FactCheckConfig, FactCheckReport, FactVerdict, ScoredEdge, ScoredEntity,
};
pub use hungarian::max_weight_matching;
pub use metrics::{
    aggregate_corpus, build_pr_curve, f1, pr_curve_csv, score_prf, true_positives, CorpusScore,
    DocCounts, PrPoint, Prf, ScoredMatch,
};

/// Text embedded for each hyperedge when matching.
pub const MATCH_TEXT_FORMAT: &str = "<relation>; participants: <members, sorted, comma-separated>";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assigned {
    pub pred: usize,
    pub gold: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub assignment: Vec<Assigned>,
    pub unmatched_pred: BTreeSet<usize>,
    pub unmatched_gold: BTreeSet<usize>,
}

impl MatchResult {
    pub fn total_similarity(&self) -> f64 {
        self.assignment.iter().map(|a| a.similarity).sum()
    }

    /// Similarity assigned to gold edge `gold`, if it was matched.
    pub fn gold_similarity(&self, gold: usize) -> Option<f64> {
        self.assignment
            .iter()
            .find(|a| a.gold == gold)
            .map(|a| a.similarity)
    }
}

/// Optimal matching over a `pred × gold` similarity matrix.
pub fn match_by_similarity(sim: &[Vec<f64>]) -> Result<MatchResult> {
    let n_gold = sim.first().map_or(0, Vec::len);
    if sim.iter().any(|row| row.len() != n_gold) {
        return Err(Error::Matching("similarity matrix is ragged".into()));
    }
    if sim.iter().flatten().any(|s| !s.is_finite()) {
        return Err(Error::Matching("similarity matrix has non-finite entries".into()));
    }
    let pairs = max_weight_matching(sim);
    let assignment: Vec<Assigned> = pairs
        .iter()
        .map(|&(p, g)| Assigned {
            pred: p,
            gold: g,
            similarity: sim[p][g],
        })
        .collect();
    let used_pred: BTreeSet<usize> = pairs.iter().map(|p| p.0).collect();
    let used_gold: BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
    Ok(MatchResult {
        assignment,
        unmatched_pred: (0..sim.len()).filter(|i| !used_pred.contains(i)).collect(),
        unmatched_gold: (0..n_gold).filter(|j| !used_gold.contains(j)).collect(),
    })
}

/// Cosine similarities between the match texts of `pred` and `gold`.
pub fn similarity_matrix(
    pred: &[Hyperedge],
    gold: &[Hyperedge],
    gateway: &Gateway,
) -> Result<Vec<Vec<f64>>> {
    if pred.is_empty() || gold.is_empty() {
        return Ok(vec![Vec::new(); pred.len()]);
    }
    let texts: Vec<String> = pred.iter().chain(gold).map(Hyperedge::matching_text).collect();
    let vectors = gateway
        .embed(&texts)
        .map_err(|e| Error::Matching(format!("embedding hyperedges: {e}")))?;
    let (p, g) = vectors.split_at(pred.len());
    Ok(p.iter()
        .map(|pv| g.iter().map(|gv| cosine(pv, gv)).collect())
        .collect())
}

pub fn match_relations(pred: &[Hyperedge], gold: &[Hyperedge], gateway: &Gateway) -> Result<MatchResult> {
    if pred.is_empty() || gold.is_empty() {
        return Ok(MatchResult {
            assignment: Vec::new(),
            unmatched_pred: (0..pred.len()).collect(),
            unmatched_gold: (0..gold.len()).collect(),
        });
    }
    match_by_similarity(&similarity_matrix(pred, gold, gateway)?)
}

pub fn evaluate_graphs(
    pred: &KnowledgeHypergraph,
    gold: &KnowledgeHypergraph,
    gateway: &Gateway,
) -> Result<ScoredMatch> {
    Ok(ScoredMatch {
        matching: match_relations(pred.hyperedges(), gold.hyperedges(), gateway)?,
        n_pred: pred.hyperedges().len(),
        n_gold: gold.hyperedges().len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocReport {
    pub document: String,
    pub n_pred: usize,
    pub n_gold: usize,
    pub total_similarity: f64,
    pub points: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScore {
    pub threshold: f64,
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_avg: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub embedding_model_id: String,
    pub match_text: String,
    pub thresholds: Vec<f64>,
    pub documents: Vec<DocReport>,
    pub corpus: Vec<ThresholdScore>,
}

impl EvalReport {
    /// Micro-pooled PR points, for the CSV.
    pub fn pr_curve(&self) -> Vec<PrPoint> {
        self.corpus
            .iter()
            .map(|c| PrPoint {
                threshold: c.threshold,
                precision: c.micro.precision,
                recall: c.micro.recall,
                f1: c.micro.f1,
            })
            .collect()
    }
}

pub fn build_report(
    docs: &[(String, ScoredMatch)],
    thresholds: &[f64],
    embedding_model_id: &str,
) -> Result<EvalReport> {
    if docs.is_empty() {
        return Err(Error::InvalidInput("no documents to evaluate".into()));
    }
    let documents = docs
        .iter()
        .map(|(name, d)| {
            Ok(DocReport {
                document: name.clone(),
                n_pred: d.n_pred,
                n_gold: d.n_gold,
                total_similarity: d.matching.total_similarity(),
                points: build_pr_curve(std::slice::from_ref(d), thresholds)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scored: Vec<ScoredMatch> = docs.iter().map(|(_, d)| d.clone()).collect();
    build_pr_curve(&scored, thresholds)?;
    let corpus = thresholds
        .iter()
        .map(|&t| {
            let counts: Vec<DocCounts> = scored.iter().map(|d| d.counts(t)).collect();
            let c = aggregate_corpus(&counts)?;
            Ok(ThresholdScore {
                threshold: t,
                micro: c.micro,
                macro_avg: c.macro_avg,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        embedding_model_id: embedding_model_id.to_string(),
        match_text: MATCH_TEXT_FORMAT.to_string(),
        thresholds: thresholds.to_vec(),
        documents,
        corpus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{GatewayConfig, ScriptedProvider};
    use crate::model::Tier;

    #[test]
    fn empty_pred_leaves_gold_unmatched() {
        let gold: Vec<Hyperedge> = (0..3)
            .map(|i| Hyperedge::new(&format!("r{i}"), &["a", "b"], Tier::Binary))
            .collect();
        let gw = Gateway::with_backend(&GatewayConfig::scripted(), ScriptedProvider::new()).unwrap();
        let m = match_relations(&[], &gold, &gw).unwrap();
        assert!(m.assignment.is_empty());
        assert_eq!(m.unmatched_gold, BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn two_by_two_fixture() {
        let m = match_by_similarity(&[vec![0.9, 0.2], vec![0.3, 0.8]]).unwrap();
        let pairs: Vec<_> = m.assignment.iter().map(|a| (a.pred, a.gold)).collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
        assert!((m.total_similarity() - 1.7).abs() < 1e-12);
        assert_eq!(m.gold_similarity(1), Some(0.8));
    }

    #[test]
    fn bad_matrices_are_rejected() {
        assert!(match_by_similarity(&[vec![0.1, 0.2], vec![0.3]]).is_err());
        assert!(match_by_similarity(&[vec![f64::NAN]]).is_err());
    }

    #[test]
    fn matching_uses_member_aware_text() {
        let e = Hyperedge::new("released", &["pong", "atari"], Tier::Binary);
        let gw = Gateway::with_backend(
            &GatewayConfig::scripted(),
            ScriptedProvider::new().with_embedding(&e.matching_text(), vec![1.0, 0.0]),
        )
        .unwrap();
        let m = match_relations(std::slice::from_ref(&e), std::slice::from_ref(&e), &gw).unwrap();
        assert!((m.assignment[0].similarity - 1.0).abs() < 1e-9);

        let empty = Gateway::with_backend(&GatewayConfig::scripted(), ScriptedProvider::new()).unwrap();
        assert!(matches!(
            match_relations(std::slice::from_ref(&e), std::slice::from_ref(&e), &empty),
            Err(Error::Matching(_))
        ));
    }

    #[test]
    fn report_records_model_and_thresholds() {
        let doc = ScoredMatch {
            matching: match_by_similarity(&[vec![0.72]]).unwrap(),
            n_pred: 1,
            n_gold: 2,
        };
        let r = build_report(&[("d".into(), doc)], &[0.65, 0.70, 0.75], "m").unwrap();
        assert_eq!(r.embedding_model_id, "m");
        assert_eq!(r.corpus.len(), 3);
        let recalls: Vec<f64> = r.pr_curve().iter().map(|p| p.recall).collect();
        assert_eq!(recalls, vec![0.5, 0.5, 0.0]);
    }
}
