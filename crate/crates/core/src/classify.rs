//! Decision rules over prototypes and labeled galleries.
//!
//! - `softmax`: temperature-scaled softmax over query/prototype cosines.
//! - `npc`: nearest prototype by distance.
//! - `knn`: majority vote among the `k` nearest gallery records.
//!
//! Every rule is deterministic, ties included: prototype ties go to the
//! lowest class id; k-NN neighbor ties go to the smaller sourceId and vote
//! ties to the smaller summed distance, then the lowest class id.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    check_dims, cosine_slices, dot, norm, squared_distance, EmbeddingVector, ZERO_NORM,
};
use crate::prototypes::PrototypeBank;
use crate::store::EmbeddingSet;

pub const DEFAULT_TAU: f64 = 0.01;
pub const DEFAULT_K: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    #[default]
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ClassifierConfig {
    pub tau: f64,
    pub metric: Metric,
    pub k: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            metric: Metric::Euclidean,
            k: DEFAULT_K,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Rule {
    #[serde(alias = "softmax")]
    SoftmaxProto,
    Npc,
    Knn,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::SoftmaxProto => "softmaxProto",
            Rule::Npc => "npc",
            Rule::Knn => "knn",
        })
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" | "softmaxProto" => Ok(Rule::SoftmaxProto),
            "npc" => Ok(Rule::Npc),
            "knn" => Ok(Rule::Knn),
            _ => Err(Error::InvalidArgument(format!("unknown rule {s:?}"))),
        }
    }
}

/// `scores` has one entry per class: probabilities for `softmaxProto`,
/// negated distances (or cosines) for `npc`, vote counts for `knn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Prediction {
    pub class_id: u32,
    pub scores: Vec<f64>,
    pub rule: Rule,
}

/// One line of a predictions JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PredictionRecord {
    pub source_id: String,
    pub predicted_class_id: u32,
    pub true_class_id: u32,
    pub rule: Rule,
    pub scores: Vec<f64>,
}

fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax of `sims / tau` (max subtracted first).
pub fn softmax_scores(sims: &[f64], tau: f64) -> Vec<f64> {
    let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = sims.iter().map(|&s| ((s - max) / tau).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn check_query(query: &[f32], dim: usize) -> Result<()> {
    check_dims(dim, query.len())
}

pub fn classify_softmax(
    query: &EmbeddingVector,
    bank: &PrototypeBank,
    tau: f64,
) -> Result<Prediction> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tau must be positive, got {tau}"
        )));
    }
    softmax_slice(query.as_slice(), bank, tau)
}

fn softmax_slice(query: &[f32], bank: &PrototypeBank, tau: f64) -> Result<Prediction> {
    check_query(query, bank.dim())?;
    let sims = bank
        .prototypes()
        .iter()
        .map(|p| cosine_slices(query, p.vector.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    let scores = softmax_scores(&sims, tau);
    Ok(Prediction {
        class_id: argmax_lowest(&sims) as u32,
        scores,
        rule: Rule::SoftmaxProto,
    })
}

fn distance(metric: Metric, a: &[f32], b: &[f32]) -> Result<f64> {
    match metric {
        Metric::Euclidean => Ok(squared_distance(a, b).sqrt()),
        Metric::Cosine => cosine_slices(a, b).map(|c| 1.0 - c),
    }
}

pub fn classify_npc(query: &EmbeddingVector, bank: &PrototypeBank) -> Result<Prediction> {
    npc_slice(query.as_slice(), bank, Metric::Euclidean)
}

pub fn classify_npc_with(
    query: &EmbeddingVector,
    bank: &PrototypeBank,
    metric: Metric,
) -> Result<Prediction> {
    npc_slice(query.as_slice(), bank, metric)
}

fn npc_slice(query: &[f32], bank: &PrototypeBank, metric: Metric) -> Result<Prediction> {
    check_query(query, bank.dim())?;
    let scores = bank
        .prototypes()
        .iter()
        .map(|p| distance(metric, query, p.vector.as_slice()).map(|d| -d))
        .collect::<Result<Vec<_>>>()?;
    Ok(Prediction {
        class_id: argmax_lowest(&scores) as u32,
        scores,
        rule: Rule::Npc,
    })
}

/// Gallery laid out contiguously for repeated neighbor queries.
pub struct KnnGallery<'a> {
    dim: usize,
    data: Vec<f32>,
    class_ids: Vec<u32>,
    source_ids: Vec<&'a str>,
    num_classes: usize,
}

impl<'a> KnnGallery<'a> {
    pub fn new(set: &'a EmbeddingSet) -> Self {
        let mut data = Vec::with_capacity(set.len() * set.dim());
        for r in set.records() {
            data.extend_from_slice(r.vector.as_slice());
        }
        Self {
            dim: set.dim(),
            data,
            class_ids: set.records().iter().map(|r| r.class_id).collect(),
            source_ids: set.records().iter().map(|r| r.source_id.as_str()).collect(),
            num_classes: set.catalog().len(),
        }
    }

    pub fn len(&self) -> usize {
        self.class_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_ids.is_empty()
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn classify(&self, query: &[f32], k: usize, metric: Metric) -> Result<Prediction> {
        let neighbors = self.neighbors(query, k, metric)?;
        Ok(self.vote(&neighbors))
    }

    /// The `k` nearest records as `(distance, record index)`, nearest first.
    pub fn neighbors(&self, query: &[f32], k: usize, metric: Metric) -> Result<Vec<(f64, usize)>> {
        check_query(query, self.dim)?;
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if k > self.len() {
            return Err(Error::KTooLarge {
                k,
                gallery: self.len(),
            });
        }
        let mut cand: Vec<(f64, usize)> = match metric {
            Metric::Euclidean => (0..self.len())
                .map(|i| (squared_distance(query, self.row(i)).sqrt(), i))
                .collect(),
            Metric::Cosine => {
                let qn = norm(query);
                if qn < ZERO_NORM {
                    return Err(Error::ZeroVector);
                }
                (0..self.len())
                    .map(|i| {
                        let row = self.row(i);
                        let rn = norm(row);
                        if rn < ZERO_NORM {
                            return Err(Error::ZeroVector);
                        }
                        Ok((1.0 - (dot(query, row) / (qn * rn)).clamp(-1.0, 1.0), i))
                    })
                    .collect::<Result<_>>()?
            }
        };
        let order = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            a.0.total_cmp(&b.0)
                .then_with(|| self.source_ids[a.1].cmp(self.source_ids[b.1]))
                .then(a.1.cmp(&b.1))
        };
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, order);
            cand.truncate(k);
        }
        cand.sort_unstable_by(order);
        Ok(cand)
    }

    /// Majority vote over a nearest-first neighbor list.
    pub fn vote(&self, neighbors: &[(f64, usize)]) -> Prediction {
        let mut votes = vec![0usize; self.num_classes];
        let mut summed = vec![0.0f64; self.num_classes];
        for &(d, i) in neighbors {
            let c = self.class_ids[i] as usize;
            votes[c] += 1;
            summed[c] += d;
        }
        let mut best = 0;
        for c in 1..self.num_classes {
            let better = votes[c] > votes[best]
                || (votes[c] == votes[best] && votes[c] > 0 && summed[c] < summed[best]);
            if better {
                best = c;
            }
        }
        Prediction {
            class_id: best as u32,
            scores: votes.into_iter().map(|v| v as f64).collect(),
            rule: Rule::Knn,
        }
    }
}

pub fn classify_knn(
    query: &EmbeddingVector,
    gallery: &EmbeddingSet,
    k: usize,
) -> Result<Prediction> {
    KnnGallery::new(gallery).classify(query.as_slice(), k, Metric::Euclidean)
}

/// What a batch is classified against.
#[derive(Clone, Copy)]
pub enum Reference<'a> {
    Bank(&'a PrototypeBank),
    Gallery(&'a EmbeddingSet),
}

/// Applies `rule` to every query; output order follows input order. The
/// first failing query (by index) is reported.
pub fn classify_batch(
    queries: &EmbeddingSet,
    rule: Rule,
    config: &ClassifierConfig,
    reference: Reference<'_>,
) -> Result<Vec<Prediction>> {
    config.validate()?;
    let results: Vec<Result<Prediction>> = match (rule, reference) {
        (Rule::SoftmaxProto, Reference::Bank(bank)) => queries
            .records()
            .par_iter()
            .map(|r| softmax_slice(r.vector.as_slice(), bank, config.tau))
            .collect(),
        (Rule::Npc, Reference::Bank(bank)) => queries
            .records()
            .par_iter()
            .map(|r| npc_slice(r.vector.as_slice(), bank, config.metric))
            .collect(),
        (Rule::Knn, Reference::Gallery(gallery)) => {
            let g = KnnGallery::new(gallery);
            queries
                .records()
                .par_iter()
                .map(|r| g.classify(r.vector.as_slice(), config.k, config.metric))
                .collect()
        }
        (rule, _) => {
            let want = if rule == Rule::Knn {
                "a gallery"
            } else {
                "a prototype bank"
            };
            return Err(Error::InvalidArgument(format!("rule {rule} needs {want}")));
        }
    };
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::BatchItem {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn prediction_records(
    queries: &EmbeddingSet,
    predictions: &[Prediction],
) -> Vec<PredictionRecord> {
    queries
        .records()
        .iter()
        .zip(predictions)
        .map(|(q, p)| PredictionRecord {
            source_id: q.source_id.clone(),
            predicted_class_id: p.class_id,
            true_class_id: q.class_id,
            rule: p.rule,
            scores: p.scores.clone(),
        })
        .collect()
}
