//! Two-dimensional PCA projection of an embedding set, for plotting.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pca::PcaModel;
use crate::store::{write_atomic, EmbeddingSet};

use super::pipeline::fit_pca;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoint {
    pub source_id: String,
    pub class_id: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub model: PcaModel,
    pub points: Vec<ProjectedPoint>,
    /// `(class_id, x, y)` for every class with at least one record.
    pub centroids: Vec<(u32, f64, f64)>,
}

/// Sourceid written on centroid rows of the CSV.
pub const CENTROID_SOURCE_ID: &str = "centroid";

pub fn project_2d(set: &EmbeddingSet) -> Result<Projection> {
    if set.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "projection needs at least 2 records, got {}",
            set.len()
        )));
    }
    let model = fit_pca(set, 2.min(set.dim()))?;
    let points: Vec<ProjectedPoint> = set
        .records()
        .iter()
        .map(|r| {
            let p = model.transform_f64(r.vector.as_slice());
            ProjectedPoint {
                source_id: r.source_id.clone(),
                class_id: r.class_id,
                x: p[0],
                y: p.get(1).copied().unwrap_or(0.0),
            }
        })
        .collect();
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); set.catalog().len()];
    for p in &points {
        let s = &mut sums[p.class_id as usize];
        s.0 += p.x;
        s.1 += p.y;
        s.2 += 1;
    }
    let centroids = sums
        .into_iter()
        .enumerate()
        .filter(|(_, s)| s.2 > 0)
        .map(|(c, (x, y, n))| (c as u32, x / n as f64, y / n as f64))
        .collect();
    Ok(Projection {
        model,
        points,
        centroids,
    })
}

impl Projection {
    /// CSV with header `sourceId,classId,x,y`; centroid rows follow the
    /// points and carry the sourceId `centroid`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(["sourceId", "classId", "x", "y"])
            .map_err(csv_err)?;
        for p in &self.points {
            w.write_record([
                p.source_id.clone(),
                p.class_id.to_string(),
                p.x.to_string(),
                p.y.to_string(),
            ])
            .map_err(csv_err)?;
        }
        for &(c, x, y) in &self.centroids {
            w.write_record([
                CENTROID_SOURCE_ID.to_owned(),
                c.to_string(),
                x.to_string(),
                y.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let mut out = w
            .into_inner()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        out.flush().ok();
        Ok(out)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_csv()?)
    }
}
