use std::collections::HashMap;

use rayon::prelude::*;

use super::pipeline::{FittedPipeline, PipelineConfig};
use super::report::{mean_and_spread, Column, EvalDirection, EvalReport, ReportRow};
use super::top1_accuracy;
use crate::classify::{
    classify_batch, ClassifierConfig, KnnGallery, Metric, Prediction, Reference, Rule,
};
use crate::error::{Error, Result};
use crate::linalg::fuse_slices;
use crate::prototypes::{build_visual_prototypes, PrototypeBank};
use crate::store::{EmbeddingSet, LabeledEmbedding};
use crate::EmbeddingVector;

pub const DEFAULT_KS: [usize; 5] = [1, 3, 5, 7, 11];
pub const DEFAULT_SAMPLE_SIZES: [usize; 5] = [50, 25, 20, 15, 10];

fn check_pair(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<()> {
    if a.catalog() != b.catalog() {
        return Err(Error::CatalogMismatch(format!(
            "{} vs {} classes (or different names)",
            a.catalog().len(),
            b.catalog().len()
        )));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

fn roles<'a>(
    dir: EvalDirection,
    train: &'a EmbeddingSet,
    test: &'a EmbeddingSet,
) -> (&'a EmbeddingSet, &'a EmbeddingSet) {
    match dir {
        EvalDirection::TrainToTest => (train, test),
        EvalDirection::TestToTrain => (test, train),
    }
}

fn accuracy_of(predictions: &[Prediction], queries: &EmbeddingSet) -> Result<f64> {
    let predicted: Vec<u32> = predictions.iter().map(|p| p.class_id).collect();
    top1_accuracy(&predicted, &queries.class_ids())
}

fn run_pipeline(
    gallery: &EmbeddingSet,
    queries: &EmbeddingSet,
    config: &PipelineConfig,
) -> Result<f64> {
    let fitted = FittedPipeline::fit(gallery, config)?;
    accuracy_of(&fitted.predict(queries)?, queries)
}

fn row_from(config: &str, dir: EvalDirection, n: usize, result: Result<f64>) -> ReportRow {
    match result {
        Ok(acc) => ReportRow::ok(config, Column::Direction(dir), acc, n),
        Err(e) => ReportRow::failed(config, Column::Direction(dir), e.to_string()),
    }
}

/// Fits on one split and classifies the other, in both directions. Every
/// fitted artifact sees the gallery split only.
/// Nearest-first `(distance, record index)` pairs for one query.
type Neighbors = Vec<(f64, usize)>;

pub fn crossval_2fold(
    train: &EmbeddingSet,
    test: &EmbeddingSet,
    config: &PipelineConfig,
) -> Result<EvalReport> {
    check_pair(train, test)?;
    let label = config.label();
    let rows = EvalDirection::BOTH
        .par_iter()
        .map(|&dir| {
            let (gallery, queries) = roles(dir, train, test);
            let acc = run_pipeline(gallery, queries, config)?;
            Ok(ReportRow::ok(
                &label,
                Column::Direction(dir),
                acc,
                queries.len(),
            ))
        })
        .collect::<Vec<Result<ReportRow>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::new(
        format!("2-fold cross-validation ({label})"),
        rows,
    ))
}

/// A `means` row (nearest visual prototype) followed by one k-NN row per
/// `k`, each in both directions. A `k` larger than the gallery yields a
/// failed row rather than an error.
pub fn sweep_k(train: &EmbeddingSet, test: &EmbeddingSet, ks: &[usize]) -> Result<EvalReport> {
    check_pair(train, test)?;
    if ks.contains(&0) {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let per_dir: Vec<Vec<ReportRow>> = EvalDirection::BOTH
        .par_iter()
        .map(|&dir| {
            let (gallery, queries) = roles(dir, train, test);
            let mut rows = Vec::with_capacity(ks.len() + 1);
            let npc = PipelineConfig::default();
            rows.push(row_from(
                "means",
                dir,
                queries.len(),
                run_pipeline(gallery, queries, &npc),
            ));

            let index = KnnGallery::new(gallery);
            let kmax = ks.iter().copied().filter(|&k| k <= index.len()).max();
            let neighbor_lists = kmax.map(|kmax| -> Result<Vec<Neighbors>> {
                queries
                    .records()
                    .par_iter()
                    .map(|q| index.neighbors(q.vector.as_slice(), kmax, Metric::Euclidean))
                    .collect()
            });
            for &k in ks {
                let label = format!("k={k}");
                let result = match &neighbor_lists {
                    _ if k > index.len() => Err(Error::KTooLarge {
                        k,
                        gallery: index.len(),
                    }),
                    Some(Ok(lists)) => {
                        let preds: Vec<Prediction> =
                            lists.iter().map(|l| index.vote(&l[..k])).collect();
                        accuracy_of(&preds, queries)
                    }
                    Some(Err(e)) => Err(Error::InvalidArgument(e.to_string())),
                    None => unreachable!("k <= gallery implies kmax exists"),
                };
                rows.push(row_from(&label, dir, queries.len(), result));
            }
            rows
        })
        .collect();
    Ok(EvalReport::new(
        "Visual embeddings: prototypes and k-NN",
        interleave(per_dir),
    ))
}

/// Config-major row order: each config's directions sit together.
fn interleave(per_dir: Vec<Vec<ReportRow>>) -> Vec<ReportRow> {
    let n = per_dir.first().map_or(0, Vec::len);
    (0..n)
        .flat_map(|i| per_dir.iter().map(move |rows| rows[i].clone()))
        .collect()
}

/// Nearest-prototype accuracy with prototypes averaged over `size` seeded
/// samples per class. Each row is the mean over `seeds`, with the spread
/// across seeds attached.
pub fn sweep_prototype_samples(
    train: &EmbeddingSet,
    test: &EmbeddingSet,
    sizes: &[usize],
    seeds: &[u64],
) -> Result<EvalReport> {
    check_pair(train, test)?;
    if seeds.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one seed is required".into(),
        ));
    }
    let cells: Vec<(usize, EvalDirection)> = sizes
        .iter()
        .flat_map(|&s| EvalDirection::BOTH.map(|d| (s, d)))
        .collect();
    let config = ClassifierConfig::default();
    let rows = cells
        .par_iter()
        .map(|&(size, dir)| {
            let (gallery, queries) = roles(dir, train, test);
            let label = format!("n={size}");
            let accs: Result<Vec<f64>> = seeds
                .iter()
                .map(|&seed| {
                    let bank = build_visual_prototypes(gallery, Some(size), seed)?;
                    let preds =
                        classify_batch(queries, Rule::Npc, &config, Reference::Bank(&bank))?;
                    accuracy_of(&preds, queries)
                })
                .collect();
            match accs {
                Ok(accs) => {
                    let (mean, spread) = mean_and_spread(&accs);
                    let mut row = ReportRow::ok(label, Column::Direction(dir), mean, queries.len());
                    row.seed_spread = Some(spread);
                    row.seeds = Some(accs.len());
                    row
                }
                Err(e) => ReportRow::failed(label, Column::Direction(dir), e.to_string()),
            }
        })
        .collect();
    Ok(EvalReport::new("Visual prototypes by sample size", rows))
}

/// Joins two encoders' embeddings of the same items by sourceId and fuses
/// each pair (block-normalized concatenation). Output follows `a`'s order.
pub fn fuse_sets(a: &EmbeddingSet, b: &EmbeddingSet) -> Result<EmbeddingSet> {
    if a.catalog() != b.catalog() {
        return Err(Error::CatalogMismatch(
            "fused encoders disagree on classes".into(),
        ));
    }
    let mut by_source: HashMap<&str, &LabeledEmbedding> = HashMap::with_capacity(b.len());
    for r in b.records() {
        if by_source.insert(r.source_id.as_str(), r).is_some() {
            return Err(Error::JoinMismatch(format!(
                "duplicate sourceId {:?} in {}",
                r.source_id,
                label_of(b, "B")
            )));
        }
    }
    let mut missing = Vec::new();
    let mut records = Vec::with_capacity(a.len());
    for r in a.records() {
        match by_source.remove(r.source_id.as_str()) {
            Some(other) if other.class_id != r.class_id => {
                return Err(Error::JoinMismatch(format!(
                    "sourceId {:?} has class {} in one encoder and {} in the other",
                    r.source_id, r.class_id, other.class_id
                )))
            }
            Some(other) => {
                let v = fuse_slices(r.vector.as_slice(), other.vector.as_slice())?;
                records.push(LabeledEmbedding::new(
                    EmbeddingVector::new(v)?,
                    r.class_id,
                    r.source_id.clone(),
                ));
            }
            None => missing.push(r.source_id.clone()),
        }
    }
    let mut extra: Vec<String> = by_source.into_keys().map(str::to_owned).collect();
    extra.sort();
    if !missing.is_empty() || !extra.is_empty() {
        let show = |v: &[String]| v.iter().take(5).cloned().collect::<Vec<_>>().join(", ");
        return Err(Error::JoinMismatch(format!(
            "{} sourceIds only in {} [{}], {} only in {} [{}]",
            missing.len(),
            label_of(a, "A"),
            show(&missing),
            extra.len(),
            label_of(b, "B"),
            show(&extra)
        )));
    }
    let mut fused = a.with_records(records)?;
    fused.meta.encoder = format!("{} + {}", label_of(a, "A"), label_of(b, "B"));
    Ok(fused)
}

fn label_of<'a>(set: &'a EmbeddingSet, fallback: &'a str) -> &'a str {
    if set.meta.encoder.is_empty() {
        fallback
    } else {
        &set.meta.encoder
    }
}

/// Single encoders, their fusion, and the fusion reduced by PCA (fit on the
/// fused gallery), all with nearest visual prototypes. `None` in `pca_dims`
/// is the unreduced fusion.
pub fn sweep_fusion(
    train_a: &EmbeddingSet,
    train_b: &EmbeddingSet,
    test_a: &EmbeddingSet,
    test_b: &EmbeddingSet,
    pca_dims: &[Option<usize>],
) -> Result<EvalReport> {
    check_pair(train_a, test_a)?;
    check_pair(train_b, test_b)?;
    let fused_train = fuse_sets(train_a, train_b)?;
    let fused_test = fuse_sets(test_a, test_b)?;

    let mut name_a = label_of(train_a, "A").to_owned();
    let mut name_b = label_of(train_b, "B").to_owned();
    if name_a == name_b {
        name_a.push_str(" (A)");
        name_b.push_str(" (B)");
    }
    let fused_name = format!("{name_a} + {name_b}");

    let npc = PipelineConfig::default();
    let mut configs: Vec<(String, &EmbeddingSet, &EmbeddingSet, PipelineConfig)> = vec![
        (name_a, train_a, test_a, npc.clone()),
        (name_b, train_b, test_b, npc.clone()),
    ];
    for &dim in pca_dims {
        let label = match dim {
            None => fused_name.clone(),
            Some(d) => format!("{fused_name} + PCA({d})"),
        };
        let cfg = PipelineConfig {
            pca_dim: dim,
            ..npc.clone()
        };
        configs.push((label, &fused_train, &fused_test, cfg));
    }

    let cells: Vec<(usize, EvalDirection)> = (0..configs.len())
        .flat_map(|i| EvalDirection::BOTH.map(|d| (i, d)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(i, dir)| {
            let (label, train, test, cfg) = &configs[i];
            let (gallery, queries) = roles(dir, train, test);
            row_from(
                label,
                dir,
                queries.len(),
                run_pipeline(gallery, queries, cfg),
            )
        })
        .collect();
    Ok(EvalReport::new("Visual embeddings and fusion", rows))
}

/// Gallery-free evaluation of text (prompt or caption) prototypes with the
/// softmax rule. Columns are query subsets: `Test`, `Train`, `All Data`.
pub fn eval_text_banks(
    banks: &[(String, &PrototypeBank)],
    train_queries: &EmbeddingSet,
    test_queries: &EmbeddingSet,
    tau: f64,
) -> Result<EvalReport> {
    check_pair(train_queries, test_queries)?;
    for (label, bank) in banks {
        if bank.catalog() != train_queries.catalog() {
            return Err(Error::CatalogMismatch(format!(
                "bank {label} has a different catalog"
            )));
        }
    }
    let mut all = test_queries.records().to_vec();
    all.extend_from_slice(train_queries.records());
    let all = test_queries.with_records(all)?;
    let subsets: [(&str, &EmbeddingSet); 3] = [
        ("Test", test_queries),
        ("Train", train_queries),
        ("All Data", &all),
    ];

    let config = ClassifierConfig {
        tau,
        ..ClassifierConfig::default()
    };
    let cells: Vec<(usize, usize)> = (0..banks.len())
        .flat_map(|b| (0..3).map(move |s| (b, s)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(b, s)| {
            let (label, bank) = &banks[b];
            let (name, queries) = subsets[s];
            let column = Column::Subset(name.to_owned());
            let result =
                classify_batch(queries, Rule::SoftmaxProto, &config, Reference::Bank(bank))
                    .and_then(|p| accuracy_of(&p, queries));
            match result {
                Ok(acc) => ReportRow::ok(label, column, acc, queries.len()),
                Err(e) => ReportRow::failed(label, column, e.to_string()),
            }
        })
        .collect();
    Ok(EvalReport::new(
        "Zero-shot classification with text prototypes",
        rows,
    ))
}
