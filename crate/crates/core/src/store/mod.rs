//! On-disk embedding sets, class catalogs and caption files.

mod captions;
mod catalog;
mod emb1;
mod set;

pub use captions::{read_captions, write_captions, CaptionEntry, CaptionHeader, CaptionSet};
pub use catalog::{ClassCatalog, ClassEntry};
pub use emb1::{
    encode_manifest, encode_payload, load_set, manifest_of, manifest_path, read_set, write_set,
    Manifest, HEADER_LEN, MAGIC, VERSION,
};
pub use set::{EmbeddingSet, LabeledEmbedding, Sampled, SetMeta, ShortClass, SplitTag};

pub(crate) use emb1::write_atomic;
pub(crate) use set::canonical_order;
