//! Class prototypes from prompt-template, caption and visual embeddings.
//!
//! All three builders share one averaging routine: per class, sum the member
//! embeddings in a canonical (sourceId) order, divide by the count, and
//! L2-normalize the mean.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mean_from_sum, normalize_slice, sum_slices, EmbeddingVector};
use crate::store::{
    canonical_order, ClassCatalog, EmbeddingSet, LabeledEmbedding, SetMeta, SplitTag,
};

pub const PLACEHOLDER: &str = "[c]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PromptTemplate(String);

impl PromptTemplate {
    pub fn new(pattern: impl Into<String>) -> Result<Self> {
        let pattern = pattern.into();
        if pattern.matches(PLACEHOLDER).count() != 1 {
            return Err(Error::BadTemplate { pattern });
        }
        Ok(Self(pattern))
    }

    pub fn pattern(&self) -> &str {
        &self.0
    }

    pub fn fill(&self, class_name: &str) -> String {
        self.0.replacen(PLACEHOLDER, class_name, 1)
    }
}

impl TryFrom<String> for PromptTemplate {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Self::new(s)
    }
}

impl From<PromptTemplate> for String {
    fn from(t: PromptTemplate) -> Self {
        t.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BankName {
    Baseline,
    Multiple,
    Selected,
    Custom,
}

impl fmt::Display for BankName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BankName::Baseline => "baseline",
            BankName::Multiple => "multiple",
            BankName::Selected => "selected",
            BankName::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBank")]
pub struct TemplateBank {
    name: BankName,
    templates: Vec<PromptTemplate>,
}

#[derive(Deserialize)]
struct RawBank {
    name: BankName,
    templates: Vec<PromptTemplate>,
}

impl TryFrom<RawBank> for TemplateBank {
    type Error = Error;

    fn try_from(raw: RawBank) -> Result<Self> {
        TemplateBank::new(raw.name, raw.templates)
    }
}

const BASELINE_JSON: &str = include_str!("../templates/baseline.json");
const MULTIPLE_JSON: &str = include_str!("../templates/multiple.json");
const SELECTED_JSON: &str = include_str!("../templates/selected.json");

/// Number of templates in the `multiple` bank.
pub const MULTIPLE_BANK_SIZE: usize = 44;

impl TemplateBank {
    pub fn new(name: BankName, templates: Vec<PromptTemplate>) -> Result<Self> {
        let need = match name {
            BankName::Baseline => Some(1),
            BankName::Multiple => Some(MULTIPLE_BANK_SIZE),
            _ => None,
        };
        if templates.is_empty() || need.is_some_and(|n| n != templates.len()) {
            return Err(Error::InvalidArgument(format!(
                "{name} bank cannot hold {} templates",
                templates.len()
            )));
        }
        Ok(Self { name, templates })
    }

    pub fn builtin(name: BankName) -> Result<Self> {
        let json = match name {
            BankName::Baseline => BASELINE_JSON,
            BankName::Multiple => MULTIPLE_JSON,
            BankName::Selected => SELECTED_JSON,
            BankName::Custom => {
                return Err(Error::InvalidArgument(
                    "custom banks are loaded from a file".into(),
                ))
            }
        };
        Ok(serde_json::from_str(json).expect("builtin bank is valid"))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("template bank: {e}")))
    }

    /// A builtin bank name or a path to a bank JSON file.
    pub fn resolve(spec: &str) -> Result<Self> {
        match spec {
            "baseline" => Self::builtin(BankName::Baseline),
            "multiple" => Self::builtin(BankName::Multiple),
            "selected" => Self::builtin(BankName::Selected),
            path => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: Path::new(path).to_owned(),
                    source: e,
                })?;
                Self::from_json(&text)
            }
        }
    }

    pub fn name(&self) -> BankName {
        self.name
    }

    pub fn templates(&self) -> &[PromptTemplate] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

/// One prompt list per class, in catalog order; each list follows bank order.
pub fn expand_templates(bank: &TemplateBank, catalog: &ClassCatalog) -> Vec<Vec<String>> {
    catalog
        .iter()
        .map(|(_, name)| bank.templates().iter().map(|t| t.fill(name)).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PrototypeSource {
    TextTemplate,
    Caption,
    VisualMean,
}

impl fmt::Display for PrototypeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrototypeSource::TextTemplate => "textTemplate",
            PrototypeSource::Caption => "caption",
            PrototypeSource::VisualMean => "visualMean",
        })
    }
}

impl FromStr for PrototypeSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "textTemplate" => Ok(Self::TextTemplate),
            "caption" => Ok(Self::Caption),
            "visualMean" => Ok(Self::VisualMean),
            _ => Err(Error::InvalidArgument(format!(
                "unknown prototype source {s:?}"
            ))),
        }
    }
}

/// Which caption split a caption prototype was averaged over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptionSplit {
    Train,
    Test,
    All,
}

impl fmt::Display for CaptionSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaptionSplit::Train => "train",
            CaptionSplit::Test => "test",
            CaptionSplit::All => "all",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub class_id: u32,
    pub vector: EmbeddingVector,
    pub source: PrototypeSource,
    pub support_count: usize,
}

/// Exactly one unit-norm prototype per catalog class.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank {
    catalog: ClassCatalog,
    prototypes: Vec<Prototype>,
    dim: usize,
    source: PrototypeSource,
    source_split: Option<CaptionSplit>,
}

impl PrototypeBank {
    /// `vectors[i]` is the prototype for class `i`; vectors are normalized here.
    pub fn from_vectors(
        catalog: ClassCatalog,
        vectors: Vec<EmbeddingVector>,
        source: PrototypeSource,
        support_counts: Vec<usize>,
    ) -> Result<Self> {
        if vectors.len() != catalog.len() || support_counts.len() != catalog.len() {
            return Err(Error::Catalog(format!(
                "{} prototypes for {} classes",
                vectors.len(),
                catalog.len()
            )));
        }
        let dim = vectors[0].dim();
        let prototypes = vectors
            .into_iter()
            .zip(support_counts)
            .enumerate()
            .map(|(i, (v, n))| {
                crate::linalg::check_dims(dim, v.dim())?;
                Ok(Prototype {
                    class_id: i as u32,
                    vector: EmbeddingVector::new(normalize_slice(v.as_slice())?)?,
                    source,
                    support_count: n.max(1),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            catalog,
            prototypes,
            dim,
            source,
            source_split: None,
        })
    }

    pub fn catalog(&self) -> &ClassCatalog {
        &self.catalog
    }

    pub fn prototypes(&self) -> &[Prototype] {
        &self.prototypes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn source(&self) -> PrototypeSource {
        self.source
    }

    pub fn source_split(&self) -> Option<CaptionSplit> {
        self.source_split
    }

    /// As an EMB1-ready set: one record per class, `role = "prototypes"`.
    pub fn to_embedding_set(&self) -> EmbeddingSet {
        let records = self
            .prototypes
            .iter()
            .map(|p| {
                let name = self.catalog.name(p.class_id).expect("class in catalog");
                LabeledEmbedding::new(p.vector.clone(), p.class_id, format!("prototype:{name}"))
            })
            .collect();
        let mut meta = SetMeta::new(SplitTag::Other, String::new());
        meta.extra.insert("role".into(), "prototypes".into());
        meta.extra
            .insert("source".into(), self.source.to_string().into());
        meta.extra.insert(
            "supportCounts".into(),
            self.prototypes
                .iter()
                .map(|p| p.support_count)
                .collect::<Vec<_>>()
                .into(),
        );
        if let Some(s) = self.source_split {
            meta.extra
                .insert("sourceSplit".into(), s.to_string().into());
        }
        EmbeddingSet::new(records, self.catalog.clone(), meta).expect("bank is non-empty")
    }

    pub fn from_embedding_set(set: &EmbeddingSet) -> Result<Self> {
        let extra = &set.meta.extra;
        if extra.get("role").and_then(|v| v.as_str()) != Some("prototypes") {
            return Err(Error::InvalidArgument("set is not a prototype bank".into()));
        }
        let source: PrototypeSource = extra
            .get("source")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::InvalidArgument("prototype bank has no source".into()))?
            .parse()?;
        let counts: Vec<usize> = extra
            .get("supportCounts")
            .and_then(|v| serde_json::from_value(v.clone()).ok())
            .unwrap_or_else(|| vec![1; set.len()]);
        let mut by_class: Vec<Option<(EmbeddingVector, usize)>> = vec![None; set.catalog().len()];
        for (r, n) in set.records().iter().zip(counts) {
            by_class[r.class_id as usize] = Some((r.vector.clone(), n));
        }
        let mut vectors = Vec::new();
        let mut support = Vec::new();
        for (i, slot) in by_class.into_iter().enumerate() {
            let (v, n) = slot.ok_or_else(|| missing(set.catalog(), i as u32))?;
            vectors.push(v);
            support.push(n);
        }
        let prototypes = vectors
            .into_iter()
            .zip(support)
            .enumerate()
            .map(|(i, (vector, support_count))| {
                if (vector.norm() - 1.0).abs() > 1e-5 {
                    return Err(Error::InvalidArgument(format!(
                        "prototype {i} is not unit norm"
                    )));
                }
                Ok(Prototype {
                    class_id: i as u32,
                    vector,
                    source,
                    support_count,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut bank = Self {
            catalog: set.catalog().clone(),
            prototypes,
            dim: set.dim(),
            source,
            source_split: None,
        };
        bank.source_split = match extra.get("sourceSplit").and_then(|v| v.as_str()) {
            Some("train") => Some(CaptionSplit::Train),
            Some("test") => Some(CaptionSplit::Test),
            Some("all") => Some(CaptionSplit::All),
            _ => None,
        };
        Ok(bank)
    }
}

fn missing(catalog: &ClassCatalog, class_id: u32) -> Error {
    Error::MissingClass {
        class_id,
        name: catalog.name(class_id).unwrap_or("?").to_owned(),
    }
}

/// The shared averaging path: normalized per-class means.
fn average_by_class<'a>(
    catalog: &ClassCatalog,
    records: impl IntoIterator<Item = &'a LabeledEmbedding>,
    source: PrototypeSource,
) -> Result<PrototypeBank> {
    let mut groups: Vec<Vec<&LabeledEmbedding>> = vec![Vec::new(); catalog.len()];
    for r in records {
        catalog.check(r.class_id)?;
        groups[r.class_id as usize].push(r);
    }
    let mut prototypes = Vec::with_capacity(catalog.len());
    let mut dim = None;
    for (class_id, mut members) in groups.into_iter().enumerate() {
        let class_id = class_id as u32;
        if members.is_empty() {
            return Err(missing(catalog, class_id));
        }
        members.sort_by(|a, b| canonical_order(a, b));
        let (sum, count) = sum_slices(members.iter().map(|r| r.vector.as_slice()))?;
        if let Some(d) = dim {
            crate::linalg::check_dims(d, sum.len())?;
        }
        dim = Some(sum.len());
        let mean = mean_from_sum(&sum, count);
        prototypes.push(Prototype {
            class_id,
            vector: EmbeddingVector::new(normalize_slice(&mean)?)?,
            source,
            support_count: count,
        });
    }
    Ok(PrototypeBank {
        catalog: catalog.clone(),
        prototypes,
        dim: dim.expect("catalog is non-empty"),
        source,
        source_split: None,
    })
}

/// Prompt-ensemble prototypes: one normalized mean per class over all of
/// that class's prompt embeddings.
pub fn build_text_prototypes(text_embeddings: &EmbeddingSet) -> Result<PrototypeBank> {
    average_by_class(
        text_embeddings.catalog(),
        text_embeddings.records(),
        PrototypeSource::TextTemplate,
    )
}

/// Caption-descriptor prototypes averaged over the caption sets whose split
/// matches `split` (`All` takes the union of every set given).
pub fn build_caption_prototypes(
    caption_sets: &[&EmbeddingSet],
    split: CaptionSplit,
) -> Result<PrototypeBank> {
    let chosen: Vec<&EmbeddingSet> = caption_sets
        .iter()
        .copied()
        .filter(|s| match split {
            CaptionSplit::Train => s.meta.split == SplitTag::Train,
            CaptionSplit::Test => s.meta.split == SplitTag::Test,
            CaptionSplit::All => true,
        })
        .collect();
    let first = chosen
        .first()
        .ok_or_else(|| Error::InvalidArgument(format!("no caption embeddings tagged {split}")))?;
    for s in &chosen[1..] {
        if s.catalog() != first.catalog() {
            return Err(Error::CatalogMismatch(
                "caption sets disagree on classes".into(),
            ));
        }
    }
    let mut bank = average_by_class(
        first.catalog(),
        chosen.iter().flat_map(|s| s.records()),
        PrototypeSource::Caption,
    )?;
    bank.source_split = Some(split);
    Ok(bank)
}

/// Visual prototypes: per-class mean of gallery embeddings, optionally over a
/// seeded subsample of `per_class` records.
pub fn build_visual_prototypes(
    gallery: &EmbeddingSet,
    per_class: Option<usize>,
    seed: u64,
) -> Result<PrototypeBank> {
    match per_class {
        None => average_by_class(
            gallery.catalog(),
            gallery.records(),
            PrototypeSource::VisualMean,
        ),
        Some(n) => {
            let sampled = gallery.sample_per_class(n, seed)?;
            average_by_class(
                gallery.catalog(),
                sampled.set.records(),
                PrototypeSource::VisualMean,
            )
        }
    }
}
