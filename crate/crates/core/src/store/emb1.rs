//! EMB1 payload plus JSON manifest.
//!
//! Payload layout, little-endian:
//!
//! | offset | size      | field                              |
//! |--------|-----------|------------------------------------|
//! | 0      | 4         | magic, the ASCII bytes `EMB1`      |
//! | 4      | 4         | u32 version (= 1)                  |
//! | 8      | 4         | u32 dim                            |
//! | 12     | 8         | u64 record count                   |
//! | 20     | 4 + 4·dim | per row: u32 class id, f32 × dim   |
//!
//! Strings live in `<file>.manifest.json`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::catalog::{ClassCatalog, ClassEntry};
use super::set::{EmbeddingSet, LabeledEmbedding, SetMeta, SplitTag};
use crate::error::{Error, FormatErrorKind, Result};
use crate::linalg::EmbeddingVector;

pub const MAGIC: [u8; 4] = *b"EMB1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub version: u32,
    pub dim: usize,
    pub count: usize,
    pub split_tag: SplitTag,
    pub cleaned_flag: bool,
    pub encoder_tag: String,
    pub classes: Vec<ClassEntry>,
    pub source_ids: Vec<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn encode_payload(set: &EmbeddingSet) -> Vec<u8> {
    let dim = set.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + set.len() * (4 + 4 * dim));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for r in set.records() {
        out.extend_from_slice(&r.class_id.to_le_bytes());
        for x in r.vector.as_slice() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn manifest_of(set: &EmbeddingSet) -> Manifest {
    Manifest {
        version: VERSION,
        dim: set.dim(),
        count: set.len(),
        split_tag: set.meta.split,
        cleaned_flag: set.meta.cleaned,
        encoder_tag: set.meta.encoder.clone(),
        classes: set.catalog().entries(),
        source_ids: set.records().iter().map(|r| r.source_id.clone()).collect(),
        extra: set.meta.extra.clone(),
    }
}

pub fn encode_manifest(set: &EmbeddingSet) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&manifest_of(set)).expect("manifest serializes");
    out.push(b'\n');
    out
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| Error::io(path, e))
}

pub fn write_set(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, &encode_payload(set))?;
    write_atomic(&manifest_path(path), &encode_manifest(set))
}

/// Reads a set and L2-normalizes every record, the form every classifier
/// and evaluation expects. Zero vectors are rejected here.
pub fn load_set(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    read_set(path)?.normalized()
}

/// Reads a set exactly as stored, without normalizing.
pub fn read_set(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let payload = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mpath = manifest_path(path);
    let manifest_bytes = fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_slice(&manifest_bytes)
        .map_err(|e| Error::format(FormatErrorKind::BadManifest, &mpath, e.to_string()))?;
    decode(path, &payload, manifest)
}

struct Header {
    dim: usize,
    count: usize,
}

fn decode_header(path: &Path, bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::format(
            FormatErrorKind::BadMagic,
            path,
            format!("expected magic {:?}", std::str::from_utf8(&MAGIC).unwrap()),
        ));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            FormatErrorKind::Truncated,
            path,
            format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len()),
        ));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::format(
            FormatErrorKind::BadVersion,
            path,
            format!("unsupported version {version}"),
        ));
    }
    let dim = u32_at(8) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if dim == 0 {
        return Err(Error::format(
            FormatErrorKind::DimMismatch,
            path,
            "dim is 0",
        ));
    }
    let count = usize::try_from(count)
        .map_err(|_| Error::format(FormatErrorKind::Truncated, path, "record count overflows"))?;
    Ok(Header { dim, count })
}

fn decode(path: &Path, bytes: &[u8], manifest: Manifest) -> Result<EmbeddingSet> {
    let header = decode_header(path, bytes)?;
    let row_len = 4 + 4 * header.dim;
    let expected = header
        .count
        .checked_mul(row_len)
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::format(FormatErrorKind::Truncated, path, "record count overflows"))?;
    if bytes.len() < expected {
        let rows = (bytes.len() - HEADER_LEN) / row_len;
        return Err(Error::format(
            FormatErrorKind::Truncated,
            path,
            format!(
                "header declares {} records, file holds {rows}",
                header.count
            ),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(
            FormatErrorKind::TrailingData,
            path,
            format!("{} bytes after the last record", bytes.len() - expected),
        ));
    }
    if manifest.version != VERSION {
        return Err(Error::format(
            FormatErrorKind::BadVersion,
            path,
            format!("manifest version {}", manifest.version),
        ));
    }
    if manifest.dim != header.dim {
        return Err(Error::format(
            FormatErrorKind::DimMismatch,
            path,
            format!(
                "manifest dim {} vs payload dim {}",
                manifest.dim, header.dim
            ),
        ));
    }
    if manifest.count != header.count || manifest.source_ids.len() != header.count {
        return Err(Error::format(
            FormatErrorKind::BadManifest,
            path,
            format!(
                "manifest count {} / {} sourceIds vs payload count {}",
                manifest.count,
                manifest.source_ids.len(),
                header.count
            ),
        ));
    }
    if header.count == 0 {
        return Err(Error::EmptyInput);
    }
    let catalog = ClassCatalog::from_entries(&manifest.classes)?;

    let mut records = Vec::with_capacity(header.count);
    for (row, (chunk, source_id)) in bytes[HEADER_LEN..]
        .chunks_exact(row_len)
        .zip(manifest.source_ids)
        .enumerate()
    {
        let class_id = u32::from_le_bytes(chunk[..4].try_into().unwrap());
        if !catalog.contains(class_id) {
            return Err(Error::Catalog(format!(
                "{}: row {row} has class id {class_id}, catalog has {}",
                path.display(),
                catalog.len()
            )));
        }
        let values: Vec<f32> = chunk[4..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let vector = EmbeddingVector::new(values).map_err(|_| {
            Error::format(
                FormatErrorKind::NonFinite,
                path,
                format!("row {row} ({source_id}) holds a non-finite value"),
            )
        })?;
        records.push(LabeledEmbedding::new(vector, class_id, source_id));
    }

    let meta = SetMeta {
        split: manifest.split_tag,
        cleaned: manifest.cleaned_flag,
        encoder: manifest.encoder_tag,
        extra: manifest.extra,
    };
    EmbeddingSet::new(records, catalog, meta)
}
