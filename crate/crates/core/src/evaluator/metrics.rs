//! Precision, recall and F1 over thresholded matchings.

use serde::{Deserialize, Serialize};

use super::MatchResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

impl Prf {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }

    pub fn from_counts(tp: usize, n_pred: usize, n_gold: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Self::from_pr(ratio(tp, n_pred), ratio(tp, n_gold))
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "threshold must lie in (0, 1], got {threshold}"
        )))
    }
}

/// Assigned pairs whose similarity reaches `threshold`.
pub fn true_positives(matching: &MatchResult, threshold: f64) -> usize {
    matching
        .assignment
        .iter()
        .filter(|a| a.similarity >= threshold)
        .count()
}

pub fn score_prf(matching: &MatchResult, threshold: f64, n_pred: usize, n_gold: usize) -> Result<Prf> {
    check_threshold(threshold)?;
    Ok(Prf::from_counts(
        true_positives(matching, threshold),
        n_pred,
        n_gold,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocCounts {
    pub tp: usize,
    pub n_pred: usize,
    pub n_gold: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusScore {
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_avg: Prf,
}

/// Micro pools counts before dividing; macro averages per-document scores.
pub fn aggregate_corpus(per_doc: &[DocCounts]) -> Result<CorpusScore> {
    if per_doc.is_empty() {
        return Err(Error::InvalidInput("no documents to aggregate".into()));
    }
    let (tp, n_pred, n_gold) = per_doc.iter().fold((0, 0, 0), |acc, d| {
        (acc.0 + d.tp, acc.1 + d.n_pred, acc.2 + d.n_gold)
    });
    let n = per_doc.len() as f64;
    let docs: Vec<Prf> = per_doc
        .iter()
        .map(|d| Prf::from_counts(d.tp, d.n_pred, d.n_gold))
        .collect();
    Ok(CorpusScore {
        micro: Prf::from_counts(tp, n_pred, n_gold),
        macro_avg: Prf {
            precision: docs.iter().map(|p| p.precision).sum::<f64>() / n,
            recall: docs.iter().map(|p| p.recall).sum::<f64>() / n,
            f1: docs.iter().map(|p| p.f1).sum::<f64>() / n,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// One matching with the sizes of the sets it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredMatch {
    pub matching: MatchResult,
    pub n_pred: usize,
    pub n_gold: usize,
}

impl ScoredMatch {
    pub fn counts(&self, threshold: f64) -> DocCounts {
        DocCounts {
            tp: true_positives(&self.matching, threshold),
            n_pred: self.n_pred,
            n_gold: self.n_gold,
        }
    }
}

/// Micro-pooled PR points, one per threshold.
pub fn build_pr_curve(docs: &[ScoredMatch], thresholds: &[f64]) -> Result<Vec<PrPoint>> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("thresholds must be sorted ascending".into()));
    }
    thresholds
        .iter()
        .map(|&t| {
            check_threshold(t)?;
            let (tp, n_pred, n_gold) = docs.iter().map(|d| d.counts(t)).fold((0, 0, 0), |a, c| {
                (a.0 + c.tp, a.1 + c.n_pred, a.2 + c.n_gold)
            });
            let prf = Prf::from_counts(tp, n_pred, n_gold);
            Ok(PrPoint {
                threshold: t,
                precision: prf.precision,
                recall: prf.recall,
                f1: prf.f1,
            })
        })
        .collect()
}

pub fn pr_curve_csv(points: &[PrPoint]) -> String {
    let mut out = String::from("threshold,precision,recall,f1\n");
    for p in points {
        out.push_str(&format!(
            "{:.4},{:.6},{:.6},{:.6}\n",
            p.threshold, p.precision, p.recall, p.f1
        ));
    }
    out
}
