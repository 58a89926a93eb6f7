use std::fs;
use std::path::Path;

use proptest::prelude::*;
use protoclass::store::{encode_manifest, encode_payload, manifest_path, HEADER_LEN};
use protoclass::{
    read_set, write_set, ClassCatalog, EmbeddingSet, EmbeddingVector, Error, FormatErrorKind,
    LabeledEmbedding, SetMeta, SplitTag,
};

fn finite_f32() -> impl Strategy<Value = f32> {
    any::<u32>()
        .prop_map(f32::from_bits)
        .prop_filter("finite", |x| x.is_finite())
}

fn arb_set() -> impl Strategy<Value = EmbeddingSet> {
    (1usize..9, 1usize..6, 1usize..20).prop_flat_map(|(dim, classes, n)| {
        let row = (
            prop::collection::vec(finite_f32(), dim),
            0..classes as u32,
            "[a-z0-9/_.-]{1,12}",
        );
        (
            prop::collection::vec(row, n),
            prop::sample::select(vec![SplitTag::Train, SplitTag::Test, SplitTag::Other]),
            any::<bool>(),
            "[a-zA-Z0-9 -]{0,10}",
            Just(classes),
        )
            .prop_map(|(rows, split, cleaned, encoder, classes)| {
                let records = rows
                    .into_iter()
                    .map(|(v, c, id)| {
                        LabeledEmbedding::new(EmbeddingVector::new(v).unwrap(), c, id)
                    })
                    .collect();
                let catalog =
                    ClassCatalog::new((0..classes).map(|c| format!("class {c}"))).unwrap();
                let mut meta = SetMeta::new(split, encoder);
                meta.cleaned = cleaned;
                EmbeddingSet::new(records, catalog, meta).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn write_then_read_is_bit_exact(set in arb_set()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.emb");
        write_set(&set, &path).unwrap();
        let back = read_set(&path).unwrap();
        for (a, b) in set.records().iter().zip(back.records()) {
            let bits = |r: &LabeledEmbedding| r.vector.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(a), bits(b));
        }
        prop_assert_eq!(&back, &set);
        prop_assert_eq!(fs::read(&path).unwrap(), encode_payload(&set));
    }
}

fn fixture() -> EmbeddingSet {
    let cat = ClassCatalog::new(["cup", "mug"]).unwrap();
    let recs = (0..3)
        .map(|i| {
            let v = EmbeddingVector::new(vec![i as f32, 1.0, -0.5]).unwrap();
            LabeledEmbedding::new(v, (i % 2) as u32, format!("img/{i}"))
        })
        .collect();
    EmbeddingSet::new(recs, cat, SetMeta::new(SplitTag::Train, "enc")).unwrap()
}

fn write_raw(dir: &Path, payload: &[u8], manifest: &[u8]) -> std::path::PathBuf {
    let path = dir.join("x.emb");
    fs::write(&path, payload).unwrap();
    fs::write(manifest_path(&path), manifest).unwrap();
    path
}

fn kind_of(dir: &Path, payload: &[u8], manifest: &[u8]) -> Option<FormatErrorKind> {
    read_set(write_raw(dir, payload, manifest))
        .unwrap_err()
        .format_kind()
}

#[test]
fn every_format_error_fires() {
    let dir = tempfile::tempdir().unwrap();
    let set = fixture();
    let payload = encode_payload(&set);
    let manifest = encode_manifest(&set);
    let d = dir.path();

    let mut p = payload.clone();
    p[0] = b'X';
    assert_eq!(kind_of(d, &p, &manifest), Some(FormatErrorKind::BadMagic));
    assert_eq!(
        kind_of(d, b"EM", &manifest),
        Some(FormatErrorKind::BadMagic)
    );

    let mut p = payload.clone();
    p[4..8].copy_from_slice(&2u32.to_le_bytes());
    assert_eq!(kind_of(d, &p, &manifest), Some(FormatErrorKind::BadVersion));

    assert_eq!(
        kind_of(d, &payload[..HEADER_LEN - 1], &manifest),
        Some(FormatErrorKind::Truncated)
    );
    assert_eq!(
        kind_of(d, &payload[..payload.len() - 1], &manifest),
        Some(FormatErrorKind::Truncated)
    );

    let mut p = payload.clone();
    p.extend_from_slice(&[0, 0]);
    assert_eq!(
        kind_of(d, &p, &manifest),
        Some(FormatErrorKind::TrailingData)
    );

    let text = String::from_utf8(manifest.clone()).unwrap();
    let bad_dim = text.replacen("\"dim\": 3", "\"dim\": 4", 1);
    assert_eq!(
        kind_of(d, &payload, bad_dim.as_bytes()),
        Some(FormatErrorKind::DimMismatch)
    );
    let mut p = payload.clone();
    p[8..12].copy_from_slice(&0u32.to_le_bytes());
    assert_eq!(
        kind_of(d, &p, &manifest),
        Some(FormatErrorKind::DimMismatch)
    );

    let mut p = payload.clone();
    let at = HEADER_LEN + 4;
    p[at..at + 4].copy_from_slice(&f32::NAN.to_le_bytes());
    assert_eq!(kind_of(d, &p, &manifest), Some(FormatErrorKind::NonFinite));

    assert_eq!(
        kind_of(d, &payload, b"{not json"),
        Some(FormatErrorKind::BadManifest)
    );
    let bad_count = text.replacen("\"count\": 3", "\"count\": 2", 1);
    assert_eq!(
        kind_of(d, &payload, bad_count.as_bytes()),
        Some(FormatErrorKind::BadManifest)
    );

    let mut p = payload.clone();
    p[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&7u32.to_le_bytes());
    assert!(matches!(
        read_set(write_raw(d, &p, &manifest)),
        Err(Error::Catalog(_))
    ));
}

#[test]
fn missing_manifest_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lonely.emb");
    fs::write(&path, encode_payload(&fixture())).unwrap();
    assert!(matches!(read_set(&path), Err(Error::Io { .. })));
}

#[test]
fn truncation_message_names_counts() {
    let dir = tempfile::tempdir().unwrap();
    let payload = encode_payload(&fixture());
    let row = 4 + 4 * 3;
    let err = read_set(write_raw(
        dir.path(),
        &payload[..payload.len() - row],
        &encode_manifest(&fixture()),
    ))
    .unwrap_err()
    .to_string();
    assert!(err.contains("declares 3 records, file holds 2"), "{err}");
}

#[test]
fn overwrite_leaves_no_temp_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.emb");
    write_set(&fixture(), &path).unwrap();
    write_set(&fixture(), &path).unwrap();
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["s.emb", "s.emb.manifest.json"]);
}
