//! Caption files: JSON Lines, one `{sourceId, classId, caption}` object per
//! line. An optional first line `{"header": {...}}` carries the split tag and
//! any producer parameters (decoding settings and the like).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::catalog::ClassCatalog;
use super::emb1::write_atomic;
use super::set::SplitTag;
use crate::error::{Error, FormatErrorKind, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaptionEntry {
    pub source_id: String,
    pub class_id: u32,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaptionHeader {
    pub split_tag: SplitTag,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionSet {
    pub split: SplitTag,
    pub entries: Vec<CaptionEntry>,
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Deserialize)]
struct HeaderLine {
    header: CaptionHeader,
}

impl CaptionSet {
    pub fn new(split: SplitTag, entries: Vec<CaptionEntry>) -> Result<Self> {
        if let Some(e) = entries.iter().find(|e| e.caption.trim().is_empty()) {
            return Err(Error::InvalidArgument(format!(
                "empty caption for {}",
                e.source_id
            )));
        }
        Ok(Self {
            split,
            entries,
            extra: BTreeMap::new(),
        })
    }

    pub fn check_catalog(&self, catalog: &ClassCatalog) -> Result<()> {
        for e in &self.entries {
            if !catalog.contains(e.class_id) {
                return Err(Error::Catalog(format!(
                    "caption {} has class id {}, catalog has {}",
                    e.source_id,
                    e.class_id,
                    catalog.len()
                )));
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = serde_json::json!({
            "header": CaptionHeader { split_tag: self.split, extra: self.extra.clone() }
        });
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        for e in &self.entries {
            serde_json::to_writer(&mut out, e).expect("entry serializes");
            out.push(b'\n');
        }
        out
    }
}

pub fn write_captions(set: &CaptionSet, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &set.encode())
}

pub fn read_captions(path: impl AsRef<Path>) -> Result<CaptionSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut split = SplitTag::Other;
    let mut extra = BTreeMap::new();
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Ok(h) = serde_json::from_str::<HeaderLine>(line) {
                split = h.header.split_tag;
                extra = h.header.extra;
                continue;
            }
        }
        let entry: CaptionEntry = serde_json::from_str(line).map_err(|e| {
            Error::format(
                FormatErrorKind::BadManifest,
                path,
                format!("line {}: {e}", i + 1),
            )
        })?;
        if entry.caption.trim().is_empty() {
            return Err(Error::format(
                FormatErrorKind::BadManifest,
                path,
                format!("line {}: empty caption", i + 1),
            ));
        }
        entries.push(entry);
    }
    Ok(CaptionSet {
        split,
        entries,
        extra,
    })
}
