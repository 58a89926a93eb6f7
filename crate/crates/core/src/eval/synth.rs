//! Seeded clustered embeddings for oracle and trend tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::normalize_slice;
use crate::rng::SplitMix64;
use crate::store::{ClassCatalog, EmbeddingSet, LabeledEmbedding, SetMeta, SplitTag};
use crate::EmbeddingVector;

/// Upper bound on the cosine between any two class centers.
pub const MAX_CENTER_COSINE: f64 = 0.8;
pub const MAX_CENTER_REJECTIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    /// Per-coordinate standard deviation of the Gaussian noise.
    pub sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Synthetic(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.dim < 2 {
            return Err(Error::Synthetic(format!(
                "need at least 2 dims, got {}",
                self.dim
            )));
        }
        if self.per_class < 1 {
            return Err(Error::Synthetic("need at least 1 record per class".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Synthetic(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

fn unit_gaussian(rng: &mut SplitMix64, dim: usize) -> Option<Vec<f64>> {
    let v: Vec<f64> = (0..dim).map(|_| rng.gaussian()).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 1e-12).then(|| v.into_iter().map(|x| x / n).collect())
}

/// Class centers: unit Gaussian directions, rejected while any pairwise
/// cosine exceeds [`MAX_CENTER_COSINE`].
pub fn sample_centers(classes: usize, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = SplitMix64::for_stream(seed, 0);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(classes);
    let mut rejections = 0;
    while centers.len() < classes {
        let accepted = unit_gaussian(&mut rng, dim).filter(|c| {
            centers
                .iter()
                .all(|o| o.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() <= MAX_CENTER_COSINE)
        });
        match accepted {
            Some(c) => centers.push(c),
            None => {
                rejections += 1;
                if rejections >= MAX_CENTER_REJECTIONS {
                    return Err(Error::CenterSamplingFailed(rejections));
                }
            }
        }
    }
    Ok(centers)
}

fn members(
    spec: &SyntheticSpec,
    centers: &[Vec<f64>],
    catalog: &ClassCatalog,
    split: SplitTag,
    stream: u64,
) -> Result<EmbeddingSet> {
    let mut rng = SplitMix64::for_stream(spec.seed, stream);
    let mut records = Vec::with_capacity(spec.classes * spec.per_class);
    for (c, center) in centers.iter().enumerate() {
        for i in 0..spec.per_class {
            let noisy: Vec<f32> = if spec.sigma == 0.0 {
                center.iter().map(|&x| x as f32).collect()
            } else {
                center
                    .iter()
                    .map(|&x| (x + spec.sigma * rng.gaussian()) as f32)
                    .collect()
            };
            let v = EmbeddingVector::new(normalize_slice(&noisy)?)?;
            records.push(LabeledEmbedding::new(
                v,
                c as u32,
                format!("{split}/{c:03}/{i:05}"),
            ));
        }
    }
    let mut meta = SetMeta::new(split, "synthetic");
    meta.extra.insert(
        "synthetic".into(),
        serde_json::to_value(spec).expect("spec serializes"),
    );
    EmbeddingSet::new(records, catalog.clone(), meta)
}

/// `(train, test)`: `per_class` members per class in each split, every member
/// its class center plus per-coordinate Gaussian noise, renormalized.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(EmbeddingSet, EmbeddingSet)> {
    spec.validate()?;
    let centers = sample_centers(spec.classes, spec.dim, spec.seed)?;
    let names: Vec<String> = (0..spec.classes).map(|c| format!("class-{c:03}")).collect();
    let catalog = ClassCatalog::new(names)?;
    let train = members(spec, &centers, &catalog, SplitTag::Train, 1)?;
    let test = members(spec, &centers, &catalog, SplitTag::Test, 2)?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(sigma: f64, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            classes: 5,
            dim: 8,
            per_class: 4,
            sigma,
            seed,
        }
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(
            generate_synthetic(&spec(0.1, 3)).unwrap(),
            generate_synthetic(&spec(0.1, 3)).unwrap()
        );
        assert_ne!(
            generate_synthetic(&spec(0.1, 3)).unwrap().0,
            generate_synthetic(&spec(0.1, 4)).unwrap().0
        );
    }

    #[test]
    fn zero_sigma_collapses_to_centers() {
        let (train, test) = generate_synthetic(&spec(0.0, 1)).unwrap();
        for members in train.indices_by_class() {
            let first = &train.records()[members[0]].vector;
            assert!(members.iter().all(|&i| &train.records()[i].vector == first));
        }
        assert_eq!(train.records()[0].vector, test.records()[0].vector);
    }

    #[test]
    fn centers_respect_cosine_bound() {
        let c = sample_centers(28, 16, 9).unwrap();
        for i in 0..c.len() {
            for j in 0..i {
                let cos: f64 = c[i].iter().zip(&c[j]).map(|(a, b)| a * b).sum();
                assert!(cos <= MAX_CENTER_COSINE);
            }
        }
    }

    #[test]
    fn impossible_centers_fail() {
        // 2 dims cannot host 40 directions with pairwise cosine <= 0.8
        assert!(matches!(
            sample_centers(40, 2, 0),
            Err(Error::CenterSamplingFailed(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(generate_synthetic(&SyntheticSpec {
            classes: 1,
            ..spec(0.1, 0)
        })
        .is_err());
        assert!(generate_synthetic(&SyntheticSpec {
            dim: 1,
            ..spec(0.1, 0)
        })
        .is_err());
        assert!(generate_synthetic(&SyntheticSpec {
            per_class: 0,
            ..spec(0.1, 0)
        })
        .is_err());
        assert!(generate_synthetic(&spec(-1.0, 0)).is_err());
    }

    #[test]
    fn members_are_unit_and_tagged() {
        let (train, test) = generate_synthetic(&spec(0.3, 2)).unwrap();
        assert_eq!(train.len(), 20);
        assert_eq!(train.meta.split, SplitTag::Train);
        assert_eq!(test.meta.split, SplitTag::Test);
        for v in train.vectors() {
            assert!((v.norm() - 1.0).abs() < 1e-6);
        }
    }
}
