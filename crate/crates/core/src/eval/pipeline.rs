use serde::{Deserialize, Serialize};

use crate::classify::{classify_batch, ClassifierConfig, Prediction, Reference, Rule};
use crate::error::{Error, Result};
use crate::linalg::normalize_slice;
use crate::pca::{fit_rows, PcaModel};
use crate::prototypes::{build_visual_prototypes, PrototypeBank};
use crate::store::{EmbeddingSet, LabeledEmbedding};
use crate::EmbeddingVector;

/// Everything needed to fit on a gallery and classify queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PipelineConfig {
    pub rule: Rule,
    pub classifier: ClassifierConfig,
    /// Per-class sample size for visual prototypes; `None` uses every record.
    pub proto_samples: Option<usize>,
    pub seed: u64,
    pub pca_dim: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rule: Rule::Npc,
            classifier: ClassifierConfig::default(),
            proto_samples: None,
            seed: 0,
            pca_dim: None,
        }
    }
}

impl PipelineConfig {
    pub fn label(&self) -> String {
        let mut s = match self.rule {
            Rule::Npc => "npc".to_owned(),
            Rule::SoftmaxProto => format!("softmax tau={}", self.classifier.tau),
            Rule::Knn => format!("knn k={}", self.classifier.k),
        };
        if let Some(n) = self.proto_samples.filter(|_| self.rule != Rule::Knn) {
            s.push_str(&format!(" samples={n}"));
        }
        if let Some(d) = self.pca_dim {
            s.push_str(&format!(" pca={d}"));
        }
        s
    }
}

/// Projects every record onto the model's principal subspace (relative to
/// the origin) and renormalizes. At full rank this is a pure rotation, so
/// cosines and distances are unchanged.
pub fn pca_reduce(model: &PcaModel, set: &EmbeddingSet) -> Result<EmbeddingSet> {
    let records = set
        .records()
        .iter()
        .map(|r| {
            let projected = model.transform_uncentered(&r.vector)?;
            let v = EmbeddingVector::new(normalize_slice(projected.as_slice())?)?;
            Ok(LabeledEmbedding::new(v, r.class_id, r.source_id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    set.with_records(records)
}

pub fn fit_pca(set: &EmbeddingSet, dim: usize) -> Result<PcaModel> {
    let rows: Vec<&[f32]> = set.records().iter().map(|r| r.vector.as_slice()).collect();
    fit_rows(&rows, dim)
}

enum Fitted {
    Bank(PrototypeBank),
    Gallery(EmbeddingSet),
}

/// A pipeline fitted on one gallery. Only the gallery is ever read while
/// fitting; queries are touched in [`predict`](Self::predict) alone.
pub struct FittedPipeline {
    config: PipelineConfig,
    pca: Option<PcaModel>,
    fitted: Fitted,
}

impl FittedPipeline {
    pub fn fit(gallery: &EmbeddingSet, config: &PipelineConfig) -> Result<Self> {
        config.classifier.validate()?;
        let (pca, gallery) = match config.pca_dim {
            Some(d) => {
                let model = fit_pca(gallery, d)?;
                let reduced = pca_reduce(&model, gallery)?;
                (Some(model), reduced)
            }
            None => (None, gallery.clone()),
        };
        let fitted = match config.rule {
            Rule::Knn => {
                if config.classifier.k > gallery.len() {
                    return Err(Error::KTooLarge {
                        k: config.classifier.k,
                        gallery: gallery.len(),
                    });
                }
                Fitted::Gallery(gallery)
            }
            Rule::Npc | Rule::SoftmaxProto => Fitted::Bank(build_visual_prototypes(
                &gallery,
                config.proto_samples,
                config.seed,
            )?),
        };
        Ok(Self {
            config: config.clone(),
            pca,
            fitted,
        })
    }

    pub fn pca(&self) -> Option<&PcaModel> {
        self.pca.as_ref()
    }

    pub fn prototypes(&self) -> Option<&PrototypeBank> {
        match &self.fitted {
            Fitted::Bank(b) => Some(b),
            Fitted::Gallery(_) => None,
        }
    }

    pub fn predict(&self, queries: &EmbeddingSet) -> Result<Vec<Prediction>> {
        let reduced;
        let queries = match &self.pca {
            Some(m) => {
                reduced = pca_reduce(m, queries)?;
                &reduced
            }
            None => queries,
        };
        let reference = match &self.fitted {
            Fitted::Bank(b) => Reference::Bank(b),
            Fitted::Gallery(g) => Reference::Gallery(g),
        };
        classify_batch(
            queries,
            self.config.rule,
            &self.config.classifier,
            reference,
        )
    }
}
