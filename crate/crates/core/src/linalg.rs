//! Vector kernels shared by every classifier and builder.
//!
//! Storage is `f32`; every reduction (dot products, norms, sums) accumulates
//! in `f64` and rounds once on the way out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this are treated as a degenerate (zero) embedding.
pub const ZERO_NORM: f64 = 1e-12;

/// A fixed-dimension, finite embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(values))
    }

    /// Builds from `f64` values, rounding each to `f32`.
    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| x as f32).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl TryFrom<Vec<f32>> for EmbeddingVector {
    type Error = Error;

    fn try_from(values: Vec<f32>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f32> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

impl AsRef<[f32]> for EmbeddingVector {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimMismatch { expected, got });
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    lanes(a, b, |x, y| x * y)
}

#[inline]
pub(crate) fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    lanes(a, b, |x, y| (x - y) * (x - y))
}

/// Sums `f` over paired elements in four interleaved f64 accumulators. The
/// summation order depends only on the length, so results are reproducible.
#[inline(always)]
fn lanes(a: &[f32], b: &[f32], f: impl Fn(f64, f64) -> f64) -> f64 {
    let n = a.len().min(b.len());
    let (ha, ta) = a[..n].split_at(n - n % 4);
    let (hb, tb) = b[..n].split_at(n - n % 4);
    let mut acc = [0.0f64; 4];
    for (ca, cb) in ha.chunks_exact(4).zip(hb.chunks_exact(4)) {
        for l in 0..4 {
            acc[l] += f(f64::from(ca[l]), f64::from(cb[l]));
        }
    }
    let mut tail = 0.0;
    for (&x, &y) in ta.iter().zip(tb) {
        tail += f(f64::from(x), f64::from(y));
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn normalize_slice(v: &[f32]) -> Result<Vec<f32>> {
    let n = norm(v);
    if n < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|&x| (f64::from(x) / n) as f32).collect())
}

pub fn l2_normalize(v: &EmbeddingVector) -> Result<EmbeddingVector> {
    normalize_slice(&v.0).map(EmbeddingVector)
}

pub fn cosine_sim(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    cosine_slices(&a.0, &b.0)
}

pub(crate) fn cosine_slices(a: &[f32], b: &[f32]) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na < ZERO_NORM || nb < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn euclidean_dist(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok(squared_distance(&a.0, &b.0).sqrt())
}

/// Component-wise arithmetic mean.
pub fn mean_vector<'a, I>(vs: I) -> Result<EmbeddingVector>
where
    I: IntoIterator<Item = &'a EmbeddingVector>,
{
    let (sum, count) = sum_slices(vs.into_iter().map(|v| v.as_slice()))?;
    Ok(EmbeddingVector(mean_from_sum(&sum, count)))
}

/// Sums a non-empty run of equal-length slices in `f64`.
pub(crate) fn sum_slices<'a, I>(vs: I) -> Result<(Vec<f64>, usize)>
where
    I: IntoIterator<Item = &'a [f32]>,
{
    let mut iter = vs.into_iter();
    let first = iter.next().ok_or(Error::EmptyInput)?;
    let mut sum: Vec<f64> = first.iter().map(|&x| f64::from(x)).collect();
    let mut count = 1usize;
    for v in iter {
        check_dims(sum.len(), v.len())?;
        for (s, &x) in sum.iter_mut().zip(v) {
            *s += f64::from(x);
        }
        count += 1;
    }
    Ok((sum, count))
}

pub(crate) fn mean_from_sum(sum: &[f64], count: usize) -> Vec<f32> {
    let n = count as f64;
    sum.iter().map(|&s| (s / n) as f32).collect()
}

/// Late fusion: normalize each block, concatenate `a` then `b`, renormalize.
///
/// The output cosine between two fused vectors is the average of the two
/// per-block cosines.
pub fn fuse_concat(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<EmbeddingVector> {
    fuse_slices(&a.0, &b.0).map(EmbeddingVector)
}

pub(crate) fn fuse_slices(a: &[f32], b: &[f32]) -> Result<Vec<f32>> {
    let (na, nb) = (norm(a), norm(b));
    if na < ZERO_NORM || nb < ZERO_NORM {
        return Err(Error::ZeroVector);
    }
    // Two unit blocks concatenated have norm sqrt(2).
    let sa = std::f64::consts::SQRT_2 * na;
    let sb = std::f64::consts::SQRT_2 * nb;
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend(a.iter().map(|&x| (f64::from(x) / sa) as f32));
    out.extend(b.iter().map(|&x| (f64::from(x) / sb) as f32));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(v: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(
            EmbeddingVector::new(vec![1.0, f32::NAN]),
            Err(Error::NonFinite(1))
        ));
        assert!(matches!(
            EmbeddingVector::new(vec![f32::INFINITY]),
            Err(Error::NonFinite(0))
        ));
        assert!(matches!(
            EmbeddingVector::new(vec![]),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn normalize_examples() {
        let n = l2_normalize(&ev(&[3.0, 4.0])).unwrap();
        assert!((n.as_slice()[0] - 0.6).abs() < 1e-7);
        assert!((n.as_slice()[1] - 0.8).abs() < 1e-7);
        assert_eq!(
            l2_normalize(&ev(&[1.0, 0.0, 0.0])).unwrap(),
            ev(&[1.0, 0.0, 0.0])
        );
        assert!(matches!(
            l2_normalize(&ev(&[0.0, 0.0])),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_sim(&ev(&[1.0, 0.0]), &ev(&[1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(cosine_sim(&ev(&[1.0, 0.0]), &ev(&[0.0, 1.0])).unwrap(), 0.0);
        // 4 / (sqrt(5) * sqrt(5)) = 0.8
        let c = cosine_sim(&ev(&[1.0, 2.0]), &ev(&[2.0, 1.0])).unwrap();
        assert!((c - 0.8).abs() < 1e-12);
        assert!(matches!(
            cosine_sim(&ev(&[1.0, 0.0]), &ev(&[1.0, 0.0, 0.0])),
            Err(Error::DimMismatch {
                expected: 2,
                got: 3
            })
        ));
        assert!(matches!(
            cosine_sim(&ev(&[0.0, 0.0]), &ev(&[1.0, 0.0])),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(
            euclidean_dist(&ev(&[0.0, 0.0]), &ev(&[3.0, 4.0])).unwrap(),
            5.0
        );
        assert_eq!(
            euclidean_dist(&ev(&[1.0, 1.0]), &ev(&[1.0, 1.0])).unwrap(),
            0.0
        );
        assert_eq!(
            euclidean_dist(&ev(&[1.0, 2.0, 3.0]), &ev(&[4.0, 6.0, 3.0])).unwrap(),
            5.0
        );
        assert!(euclidean_dist(&ev(&[1.0]), &ev(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn mean_examples() {
        let m = mean_vector(&[ev(&[0.0, 0.0]), ev(&[2.0, 0.0])]).unwrap();
        assert_eq!(m, ev(&[1.0, 0.0]));
        assert_eq!(mean_vector(&[ev(&[5.0, 5.0])]).unwrap(), ev(&[5.0, 5.0]));
        let vs = [
            ev(&[1.0, 0.0]),
            ev(&[0.0, 1.0]),
            ev(&[1.0, 1.0]),
            ev(&[0.0, 0.0]),
        ];
        assert_eq!(mean_vector(&vs).unwrap(), ev(&[0.5, 0.5]));
        assert!(matches!(mean_vector(&[]), Err(Error::EmptyInput)));
        assert!(matches!(
            mean_vector(&[ev(&[1.0]), ev(&[1.0, 2.0])]),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn fuse_examples() {
        let f = fuse_concat(&ev(&[1.0, 0.0]), &ev(&[0.0, 2.0])).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let want = [h, 0.0, 0.0, h];
        for (x, w) in f.as_slice().iter().zip(want) {
            assert!((f64::from(*x) - w).abs() < 1e-4);
        }
        // [3,4]/5/sqrt2, [5,0]/5/sqrt2
        let f = fuse_concat(&ev(&[3.0, 4.0]), &ev(&[5.0, 0.0])).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let want = [0.6 * s, 0.8 * s, s, 0.0];
        for (x, w) in f.as_slice().iter().zip(want) {
            assert!((f64::from(*x) - w).abs() < 1e-4);
        }
        assert_eq!(f.dim(), 4);
        assert!(matches!(
            fuse_concat(&ev(&[0.0, 0.0]), &ev(&[1.0])),
            Err(Error::ZeroVector)
        ));
    }

    fn nonzero_vec(dim: usize) -> impl Strategy<Value = Vec<f32>> {
        prop::collection::vec(-10.0f32..10.0, dim).prop_filter("nonzero", |v| norm(v) > 1e-3)
    }

    proptest! {
        #[test]
        fn unit_distance_matches_cosine(a in nonzero_vec(16), b in nonzero_vec(16)) {
            let a = l2_normalize(&ev(&a)).unwrap();
            let b = l2_normalize(&ev(&b)).unwrap();
            let d = euclidean_dist(&a, &b).unwrap();
            let c = cosine_sim(&a, &b).unwrap();
            prop_assert!((d * d - (2.0 - 2.0 * c)).abs() < 1e-6);
        }

        #[test]
        fn cosine_scale_invariant(a in nonzero_vec(8), b in nonzero_vec(8), s in 0.01f32..100.0, t in 0.01f32..100.0) {
            let c0 = cosine_sim(&ev(&a), &ev(&b)).unwrap();
            let sa: Vec<f32> = a.iter().map(|x| x * s).collect();
            let tb: Vec<f32> = b.iter().map(|x| x * t).collect();
            let c1 = cosine_sim(&ev(&sa), &ev(&tb)).unwrap();
            prop_assert!((c0 - c1).abs() < 1e-5);
            prop_assert_eq!(c0, cosine_sim(&ev(&b), &ev(&a)).unwrap());
        }

        #[test]
        fn euclidean_triangle(a in nonzero_vec(6), b in nonzero_vec(6), c in nonzero_vec(6)) {
            let (a, b, c) = (ev(&a), ev(&b), ev(&c));
            let ab = euclidean_dist(&a, &b).unwrap();
            let bc = euclidean_dist(&b, &c).unwrap();
            let ac = euclidean_dist(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert_eq!(ab, euclidean_dist(&b, &a).unwrap());
        }

        #[test]
        fn fused_cosine_is_block_average(
            a1 in nonzero_vec(5), a2 in nonzero_vec(5),
            b1 in nonzero_vec(7), b2 in nonzero_vec(7),
        ) {
            let f1 = fuse_concat(&ev(&a1), &ev(&b1)).unwrap();
            let f2 = fuse_concat(&ev(&a2), &ev(&b2)).unwrap();
            let lhs = cosine_sim(&f1, &f2).unwrap();
            let rhs = (cosine_sim(&ev(&a1), &ev(&a2)).unwrap()
                + cosine_sim(&ev(&b1), &ev(&b2)).unwrap()) / 2.0;
            prop_assert!((lhs - rhs).abs() < 1e-6);
            prop_assert!((f1.norm() - 1.0).abs() < 1e-6);
        }

        #[test]
        fn normalize_is_unit(a in nonzero_vec(32)) {
            let n = l2_normalize(&ev(&a)).unwrap();
            prop_assert!((n.norm() - 1.0).abs() < 1e-6);
        }
    }
}
