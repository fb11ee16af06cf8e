//! Global alignment of embedded patches: reflections, then rotations, then
//! translations.

pub mod landmark;
pub mod reflection;
pub mod rotation;
pub mod translation;

use std::collections::BTreeMap;

use nalgebra::Point2;

use crate::error::Result;
use crate::model::DistanceMeasurements;
use crate::patches::{Patch, PatchGraph, PatchSet};
use crate::NodeId;

pub use landmark::{landmark_align, landmark_align_with, AlignOptions, LandmarkAlignment, ScaleMode};
pub use reflection::{
    build_reflection_matrix, mirror_patch, pearson_correlation, signed_offset_profile, solve_reflection_sync,
    ReflectionSolution, ReflectionSystem, SharedNodeProfile,
};
pub use rotation::{build_rotation_matrix, rotate_patch, solve_rotation_sync, RotationSolution, RotationSystem};
pub use translation::{
    build_translation_system, solve_translation, TranslationRow, TranslationSolution, TranslationSystem,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncOptions {
    pub pearson_threshold: f64,
    pub eig_tol: f64,
    pub eig_max_iter: usize,
}

impl Default for SyncOptions {
    fn default() -> Self {
        Self {
            pearson_threshold: -0.5,
            eig_tol: 1e-12,
            eig_max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncResult {
    pub reflection: ReflectionSystem,
    pub signs: ReflectionSolution,
    pub rotation: RotationSystem,
    pub phases: RotationSolution,
    /// Patches in the common frame (mirrored and rotated).
    pub aligned: PatchSet,
    /// Patches that entered the translation solve: the largest rotation component.
    pub used_patches: Vec<usize>,
    pub translation: TranslationSolution,
}

impl SyncResult {
    pub fn coords(&self) -> &BTreeMap<NodeId, Point2<f64>> {
        &self.translation.coords
    }
}

/// Runs the three synchronization stages on patches that carry local coordinates.
///
/// Only the largest connected component of the rotation graph (lowest patch id
/// on ties) enters the translation solve, since separate components carry
/// unrelated gauges. Nodes covered only by other components are absent from
/// the result.
pub fn synchronize(
    patches: &PatchSet,
    graph: &PatchGraph,
    measurements: &DistanceMeasurements,
    opts: SyncOptions,
) -> Result<SyncResult> {
    let reflection = build_reflection_matrix(patches, graph, opts.pearson_threshold);
    let signs = solve_reflection_sync(&reflection, opts.eig_tol, opts.eig_max_iter);
    let mut aligned = patches.clone();
    for (p, &s) in aligned.patches.iter_mut().zip(&signs.signs) {
        if s < 0 {
            mirror_patch(p);
        }
    }

    let rotation = build_rotation_matrix(&aligned, graph);
    let phases = solve_rotation_sync(&rotation, opts.eig_tol, opts.eig_max_iter);
    for (p, &theta) in aligned.patches.iter_mut().zip(&phases.phases) {
        rotate_patch(p, theta);
    }

    let used_patches = phases
        .components
        .iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
        .cloned()
        .unwrap_or_default();
    let used: Vec<&Patch> = used_patches.iter().map(|&p| &aligned.patches[p]).collect();
    let translation = solve_translation(&used, measurements)?;
    Ok(SyncResult {
        reflection,
        signs,
        rotation,
        phases,
        aligned,
        used_patches,
        translation,
    })
}
