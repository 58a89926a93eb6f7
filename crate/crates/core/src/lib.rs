//! Zero- and few-shot classification over precomputed embeddings.
//!
//! Text prompts, captions and gallery images are embedded elsewhere and
//! arrive as EMB1 files ([`store`]). From those, [`prototypes`] builds one
//! vector per class, [`classify`] applies softmax-over-prototypes, nearest
//! prototype or k-NN rules, and [`eval`] runs the two-direction
//! cross-validation protocol and its parameter sweeps.

pub mod classify;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod pca;
pub mod prototypes;
pub mod rng;
pub mod store;

pub use classify::{
    classify_batch, classify_knn, classify_npc, classify_softmax, ClassifierConfig, Metric,
    Prediction, PredictionRecord, Reference, Rule,
};
pub use error::{Error, FormatErrorKind, Result};
pub use linalg::{
    cosine_sim, euclidean_dist, fuse_concat, l2_normalize, mean_vector, EmbeddingVector,
};
pub use pca::{pca_fit, PcaModel};
pub use prototypes::{
    build_caption_prototypes, build_text_prototypes, build_visual_prototypes, expand_templates,
    BankName, CaptionSplit, PromptTemplate, Prototype, PrototypeBank, PrototypeSource,
    TemplateBank,
};
pub use store::{
    load_set, read_set, write_set, ClassCatalog, EmbeddingSet, LabeledEmbedding, SetMeta, SplitTag,
};
