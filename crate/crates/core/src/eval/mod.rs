//! Accuracy, two-direction cross-validation and parameter sweeps.

mod pipeline;
mod project;
mod report;
mod sweeps;
mod synth;

pub use pipeline::{fit_pca, pca_reduce, FittedPipeline, PipelineConfig};
pub use project::{project_2d, ProjectedPoint, Projection, CENTROID_SOURCE_ID};
pub use report::{
    mean_and_spread, Aggregate, Column, EvalDirection, EvalReport, ReportRow, RowStatus,
};
pub use sweeps::{
    crossval_2fold, eval_text_banks, fuse_sets, sweep_fusion, sweep_k, sweep_prototype_samples,
    DEFAULT_KS, DEFAULT_SAMPLE_SIZES,
};
pub use synth::{generate_synthetic, sample_centers, SyntheticSpec, MAX_CENTER_COSINE};

use crate::error::{Error, Result};

/// Percentage of positions where `predicted` equals `truth`.
pub fn top1_accuracy(predicted: &[u32], truth: &[u32]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput);
    }
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(100.0 * correct as f64 / predicted.len() as f64)
}
