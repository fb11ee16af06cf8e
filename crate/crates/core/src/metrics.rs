//! Localization quality.

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};
use crate::sync::landmark::{landmark_align_with, AlignOptions, ScaleMode};

fn centroid(points: &[Point2<f64>]) -> Vector2<f64> {
    points.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords) / points.len() as f64
}

/// `‖P_c - P̂_c‖_F / ‖P_c‖_F`, each set centered on its own mean.
///
/// Translation-invariant but not scale- or rotation-invariant.
pub fn localization_error(truth: &[Point2<f64>], estimate: &[Point2<f64>]) -> Result<f64> {
    if truth.len() != estimate.len() || truth.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "estimate",
            reason: format!(
                "need two equal sets of at least 2 points, got {} and {}",
                truth.len(),
                estimate.len()
            ),
        });
    }
    let ct = centroid(truth);
    let ce = centroid(estimate);
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, q) in truth.iter().zip(estimate) {
        let pc = p.coords - ct;
        num += (pc - (q.coords - ce)).norm_squared();
        den += pc.norm_squared();
    }
    if den <= 0.0 {
        return Err(Error::UndefinedMetric);
    }
    Ok((num / den).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcrustesFit {
    pub aligned: Vec<Point2<f64>>,
    /// Post-alignment root-mean-square distance, meters.
    pub rms: f64,
    /// The estimate was degenerate and only translated.
    pub translation_only: bool,
}

/// Best rigid motion (reflection allowed) of `estimate` onto `truth`.
pub fn procrustes_align(truth: &[Point2<f64>], estimate: &[Point2<f64>]) -> Result<ProcrustesFit> {
    if truth.len() != estimate.len() || truth.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "estimate",
            reason: format!(
                "need two equal sets of at least 2 points, got {} and {}",
                truth.len(),
                estimate.len()
            ),
        });
    }
    let opts = AlignOptions {
        scale: ScaleMode::Unit,
        allow_reflection: true,
    };
    let (aligned, translation_only) = match landmark_align_with(estimate, truth, opts) {
        Ok(al) => (estimate.iter().map(|p| al.apply(p)).collect::<Vec<_>>(), false),
        Err(Error::DegenerateConfiguration) => {
            let shift = centroid(truth) - centroid(estimate);
            (estimate.iter().map(|p| p + shift).collect(), true)
        }
        Err(e) => return Err(e),
    };
    let ss: f64 = aligned.iter().zip(truth).map(|(a, t)| (a - t).norm_squared()).sum();
    Ok(ProcrustesFit {
        rms: (ss / truth.len() as f64).sqrt(),
        aligned,
        translation_only,
    })
}
