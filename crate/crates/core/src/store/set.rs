use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::catalog::ClassCatalog;
use crate::error::{Error, Result};
use crate::linalg::{check_dims, l2_normalize, EmbeddingVector};
use crate::rng::{sample_indices, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Test,
    Other,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::Test => "test",
            SplitTag::Other => "other",
        })
    }
}

impl FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "test" => Ok(SplitTag::Test),
            "other" => Ok(SplitTag::Other),
            _ => Err(Error::InvalidArgument(format!("unknown split tag {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbedding {
    pub vector: EmbeddingVector,
    pub class_id: u32,
    pub source_id: String,
}

impl LabeledEmbedding {
    pub fn new(vector: EmbeddingVector, class_id: u32, source_id: impl Into<String>) -> Self {
        Self {
            vector,
            class_id,
            source_id: source_id.into(),
        }
    }
}

/// Descriptive metadata carried alongside the vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SetMeta {
    pub split: SplitTag,
    pub cleaned: bool,
    pub encoder: String,
    /// Manifest fields this crate does not interpret (producer warnings,
    /// checkpoint ids, prototype provenance). Preserved on round trip.
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Default for SetMeta {
    fn default() -> Self {
        Self {
            split: SplitTag::Other,
            cleaned: false,
            encoder: String::new(),
            extra: BTreeMap::new(),
        }
    }
}

impl SetMeta {
    pub fn new(split: SplitTag, encoder: impl Into<String>) -> Self {
        Self {
            split,
            encoder: encoder.into(),
            ..Self::default()
        }
    }
}

/// A non-empty labeled collection of equal-dimension embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    records: Vec<LabeledEmbedding>,
    catalog: ClassCatalog,
    pub meta: SetMeta,
}

/// A class that had fewer records than requested when sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ShortClass {
    pub class_id: u32,
    pub requested: usize,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    pub set: EmbeddingSet,
    pub short_classes: Vec<ShortClass>,
}

impl EmbeddingSet {
    pub fn new(
        records: Vec<LabeledEmbedding>,
        catalog: ClassCatalog,
        meta: SetMeta,
    ) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyInput)?;
        let dim = first.vector.dim();
        for r in &records {
            check_dims(dim, r.vector.dim())?;
            catalog.check(r.class_id)?;
        }
        Ok(Self {
            dim,
            records,
            catalog,
            meta,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[LabeledEmbedding] {
        &self.records
    }

    pub fn catalog(&self) -> &ClassCatalog {
        &self.catalog
    }

    pub fn into_records(self) -> Vec<LabeledEmbedding> {
        self.records
    }

    pub fn vectors(&self) -> impl Iterator<Item = &EmbeddingVector> {
        self.records.iter().map(|r| &r.vector)
    }

    pub fn class_ids(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.class_id).collect()
    }

    /// Record indices grouped by class id; classes without records get an
    /// empty list.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.catalog.len()];
        for (i, r) in self.records.iter().enumerate() {
            by_class[r.class_id as usize].push(i);
        }
        by_class
    }

    /// Same set with a new record list (and therefore possibly a new dim).
    pub fn with_records(&self, records: Vec<LabeledEmbedding>) -> Result<Self> {
        Self::new(records, self.catalog.clone(), self.meta.clone())
    }

    /// L2-normalizes every record; fails on the first zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let records = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let v = l2_normalize(&r.vector).map_err(|e| Error::BatchItem {
                    index: i,
                    source: Box::new(e),
                })?;
                Ok(LabeledEmbedding::new(v, r.class_id, r.source_id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_records(records)
    }

    /// Records whose class is in `class_ids`, in original order. The catalog
    /// is kept whole so class ids stay meaningful.
    pub fn subset_by_class(&self, class_ids: &[u32]) -> Result<Self> {
        let mut keep = vec![false; self.catalog.len()];
        for &c in class_ids {
            self.catalog.check(c)?;
            keep[c as usize] = true;
        }
        let records: Vec<_> = self
            .records
            .iter()
            .filter(|r| keep[r.class_id as usize])
            .cloned()
            .collect();
        self.with_records(records)
    }

    /// Draws `min(n, available)` records per class without replacement.
    ///
    /// Each class's records are first ordered by sourceId (then by vector
    /// bits), so the draw does not depend on file order. Class `c` uses the
    /// stream `SplitMix64::for_stream(seed, c)`. The result lists records by
    /// class id, then in that canonical order.
    pub fn sample_per_class(&self, n: usize, seed: u64) -> Result<Sampled> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "sample size must be at least 1".into(),
            ));
        }
        let mut records = Vec::new();
        let mut short_classes = Vec::new();
        for (class_id, mut members) in self.indices_by_class().into_iter().enumerate() {
            let class_id = class_id as u32;
            if members.len() < n {
                short_classes.push(ShortClass {
                    class_id,
                    requested: n,
                    available: members.len(),
                });
            }
            if members.is_empty() {
                continue;
            }
            members.sort_by(|&a, &b| canonical_order(&self.records[a], &self.records[b]));
            let mut rng = SplitMix64::for_stream(seed, u64::from(class_id));
            let mut picked = sample_indices(members.len(), n, &mut rng);
            picked.sort_unstable();
            records.extend(picked.into_iter().map(|i| self.records[members[i]].clone()));
        }
        Ok(Sampled {
            set: self.with_records(records)?,
            short_classes,
        })
    }
}

pub(crate) fn canonical_order(a: &LabeledEmbedding, b: &LabeledEmbedding) -> Ordering {
    a.source_id.cmp(&b.source_id).then_with(|| {
        let bits = |r: &LabeledEmbedding| {
            r.vector
                .as_slice()
                .iter()
                .map(|x| x.to_bits())
                .collect::<Vec<_>>()
        };
        bits(a).cmp(&bits(b))
    })
}
