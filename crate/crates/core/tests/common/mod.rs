//! Brute-force reference implementations and random fixtures shared by the
//! integration tests. Nothing here calls into the library's algorithms.
#![allow(dead_code, clippy::needless_range_loop)]

use std::cmp::Ordering;

use protoclass::rng::SplitMix64;
use protoclass::{ClassCatalog, EmbeddingSet, EmbeddingVector, LabeledEmbedding, SetMeta};

pub fn uniform(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

pub fn int_in(rng: &mut SplitMix64, lo: usize, hi_inclusive: usize) -> usize {
    lo + rng.below(hi_inclusive - lo + 1)
}

/// Random vector; with `coarse` the coordinates come from {-1, 0, 1} so that
/// exact distance ties are common.
pub fn random_vec(rng: &mut SplitMix64, dim: usize, coarse: bool) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim)
            .map(|_| {
                if coarse {
                    rng.below(3) as f32 - 1.0
                } else {
                    rng.gaussian() as f32
                }
            })
            .collect();
        if v.iter().any(|&x| x != 0.0) {
            return v;
        }
    }
}

pub fn unit(v: &[f32]) -> Vec<f32> {
    let n = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    v.iter().map(|&x| (x as f64 / n) as f32).collect()
}

pub fn catalog(classes: usize) -> ClassCatalog {
    ClassCatalog::new((0..classes).map(|c| format!("c{c}"))).unwrap()
}

/// `n` labeled records with shuffled sourceIds, so file order and sourceId
/// order disagree.
pub fn random_set(
    rng: &mut SplitMix64,
    n: usize,
    dim: usize,
    classes: usize,
    coarse: bool,
) -> EmbeddingSet {
    let mut ids: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        ids.swap(i, rng.below(i + 1));
    }
    let records = (0..n)
        .map(|i| {
            let v = EmbeddingVector::new(random_vec(rng, dim, coarse)).unwrap();
            LabeledEmbedding::new(v, rng.below(classes) as u32, format!("item-{:05}", ids[i]))
        })
        .collect();
    EmbeddingSet::new(records, catalog(classes), SetMeta::default()).unwrap()
}

pub fn euclid(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Sorts every gallery distance, keeps the first `k` (ties by sourceId, then
/// position) and takes the majority class; vote ties go to the smaller summed
/// distance, then the lower class id.
pub fn knn_oracle(gallery: &EmbeddingSet, query: &[f32], k: usize) -> u32 {
    let recs = gallery.records();
    let mut all: Vec<(f64, &str, usize)> = recs
        .iter()
        .enumerate()
        .map(|(i, r)| (euclid(query, r.vector.as_slice()), r.source_id.as_str(), i))
        .collect();
    all.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then_with(|| a.1.cmp(b.1))
            .then(a.2.cmp(&b.2))
    });
    let classes = gallery.catalog().len();
    let mut tally = vec![(0usize, 0.0f64); classes];
    for &(d, _, i) in &all[..k] {
        let t = &mut tally[recs[i].class_id as usize];
        t.0 += 1;
        t.1 += d;
    }
    let best = (0..classes)
        .filter(|&c| tally[c].0 > 0)
        .min_by(|&a, &b| {
            tally[b]
                .0
                .cmp(&tally[a].0)
                .then(tally[a].1.partial_cmp(&tally[b].1).unwrap())
                .then(a.cmp(&b))
        })
        .unwrap();
    best as u32
}

/// Sample covariance (divisor n - 1) of the rows.
pub fn covariance(rows: &[Vec<f32>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            mean[j] += r[j] as f64;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (r[i] as f64 - mean[i]) * (r[j] as f64 - mean[j]);
            }
        }
    }
    for row in &mut cov {
        for x in row.iter_mut() {
            *x /= (n - 1) as f64;
        }
    }
    cov
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues in descending order with matching unit eigenvectors.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    let scale: f64 = a
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap_or(Ordering::Equal));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|r| v[r][i]).collect())
        .collect();
    (values, vectors)
}

/// Standalone SplitMix64 and partial Fisher-Yates, written from the
/// reference description rather than shared with the library.
pub struct RefMix(u64);

impl RefMix {
    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut m = RefMix(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        RefMix(m.next())
    }

    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: usize) -> usize {
        let u = (self.next() >> 11) as f64 / 9_007_199_254_740_992.0;
        ((u * n as f64).floor() as usize).min(n - 1)
    }
}

/// Expected `sample_per_class` output as `(class_id, source_id)` pairs.
pub fn sample_oracle(set: &EmbeddingSet, n: usize, seed: u64) -> Vec<(u32, String)> {
    let mut out = Vec::new();
    for c in 0..set.catalog().len() as u32 {
        let mut members: Vec<&LabeledEmbedding> =
            set.records().iter().filter(|r| r.class_id == c).collect();
        members.sort_by(|a, b| {
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
        });
        let mut slots: Vec<usize> = (0..members.len()).collect();
        let mut rng = RefMix::stream(seed, u64::from(c));
        let take = n.min(members.len());
        for i in 0..take {
            let j = i + rng.below(members.len() - i);
            slots.swap(i, j);
        }
        let mut chosen = slots[..take].to_vec();
        chosen.sort();
        out.extend(
            chosen
                .into_iter()
                .map(|i| (c, members[i].source_id.clone())),
        );
    }
    out
}
