//! Full graph realization: patches, synchronization, gateway anchoring and a
//! final fusion over every measured distance.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Point2, Vector2};

use crate::anchored::{
    build_chi_problem, fuse_anchored, run_sdp, well_localized_subset, FusionOptions, FusionResult, SdpOptions,
    SdpSolution,
};
use crate::error::{Error, Result};
use crate::localize_patch::{embed_patch, PatchDiagnostics, PatchEmbedOptions};
use crate::model::{DistanceMeasurements, Network};
use crate::patches::{extract_patches, patch_alignment_graph};
use crate::rigidity::is_generically_globally_rigid;
use crate::sync::{landmark_align_with, synchronize, AlignOptions, LandmarkAlignment, ScaleMode, SyncOptions};
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizeOptions {
    /// Patches must share more than this many nodes to be aligned.
    pub min_overlap: usize,
    pub embed: PatchEmbedOptions,
    pub sync: SyncOptions,
    pub sdp: SdpOptions,
    pub fusion: FusionOptions,
    /// Gateway signs; `None` means all cooperative (+1).
    pub sigma: Option<Vec<f64>>,
    /// A patch joins synchronization only if `sqrt(stress / Σd²)` over its
    /// measured pairs is at most this plus the noise factor.
    pub patch_residual_limit: f64,
    /// Reject patches whose measured graph is not generically globally
    /// rigid; their embedding may be a fold-over that still fits every
    /// measurement.
    pub require_global_rigidity: bool,
}

impl Default for LocalizeOptions {
    fn default() -> Self {
        Self {
            min_overlap: 2,
            embed: PatchEmbedOptions::default(),
            sync: SyncOptions::default(),
            sdp: SdpOptions {
                max_sweeps: 500,
                ..SdpOptions::default()
            },
            fusion: FusionOptions::default(),
            sigma: None,
            patch_residual_limit: 1e-3,
            require_global_rigidity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    /// Estimated end-node positions. With gateways these are in the gateway
    /// frame; without, they are defined up to a rigid motion.
    pub coords: Vec<Point2<f64>>,
    /// End-nodes placed by patch synchronization.
    pub sync_covered: Vec<NodeId>,
    pub sdp: Option<SdpSolution>,
    /// End-nodes with `ω < ϱ`.
    pub well_localized: Vec<usize>,
    /// Anchors of patches that could not be embedded or were rejected.
    pub skipped_patches: Vec<NodeId>,
    pub patch_diagnostics: Vec<PatchDiagnostics>,
    pub fusion_stress: Vec<f64>,
}

/// Localizes every end-node of `network` from `measurements`.
pub fn localize(
    network: &Network,
    measurements: &DistanceMeasurements,
    opts: &LocalizeOptions,
) -> Result<Localization> {
    let l = network.num_end_nodes();
    let s = network.num_gateways();

    let end_edges = measurements.values.keys().copied().filter(|&(a, b)| a < l && b < l);
    let mut patches = extract_patches(l, end_edges);
    let mut skipped = Vec::new();
    let mut diagnostics = Vec::new();
    for patch in &mut patches.patches {
        match embed_patch(patch, measurements, opts.embed) {
            Ok((matrix, emb)) => {
                diagnostics.push(PatchDiagnostics::new(patch.anchor, &matrix, &emb));
                let scale: f64 = (0..matrix.size())
                    .flat_map(|i| (i + 1..matrix.size()).map(move |j| (i, j)))
                    .filter(|&(i, j)| matrix.is_measured(i, j))
                    .map(|(i, j)| matrix.entries[(i, j)].powi(2))
                    .sum();
                let residual = if scale > 0.0 { (emb.stress / scale).sqrt() } else { 0.0 };
                let rigid = !opts.require_global_rigidity || {
                    let n = matrix.size();
                    let edges: Vec<(usize, usize)> = (0..n)
                        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                        .filter(|&(i, j)| matrix.is_measured(i, j))
                        .collect();
                    is_generically_globally_rigid(n, &edges, patch.anchor as u64)
                };
                if rigid && residual <= opts.patch_residual_limit + measurements.noise_factor {
                    patch.local_coords = Some(emb.coords);
                } else {
                    skipped.push(patch.anchor);
                }
            }
            Err(Error::Incompletable { anchor, .. }) => skipped.push(anchor),
            Err(e) => return Err(e),
        }
    }
    let graph = patch_alignment_graph(&patches, opts.min_overlap);
    let synced = synchronize(&patches, &graph, measurements, opts.sync)?;
    let sync_coords = synced.coords().clone();
    let sync_covered: Vec<NodeId> = sync_coords.keys().copied().collect();

    let sdp = if s > 0 {
        match build_chi_problem(network, measurements) {
            Ok(problem) => Some((run_sdp(&problem, opts.sdp)?, problem.tolerance)),
            Err(Error::Unanchorable) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let well_localized = sdp
        .as_ref()
        .map(|(sol, rho)| well_localized_subset(&sol.omega, *rho))
        .unwrap_or_default();

    let sigma = opts.sigma.clone().unwrap_or_else(|| vec![1.0; s]);
    let align = AlignOptions {
        scale: ScaleMode::Unit,
        allow_reflection: true,
    };
    let mut frames = gateway_frames(&sync_coords, &network.gateways, measurements, l);
    if let Some((sol, _)) = &sdp {
        let frame = frame_nodes(&sync_covered, &well_localized, &sol.omega);
        let from: Vec<Point2<f64>> = frame.iter().map(|n| sync_coords[n]).collect();
        let to: Vec<Point2<f64>> = frame.iter().map(|&n| sol.coords[n]).collect();
        match landmark_align_with(&from, &to, align) {
            Ok(al) => frames.push(al),
            Err(Error::DegenerateConfiguration) => {}
            Err(e) => return Err(e),
        }
    }
    let fallback = sdp.as_ref().map(|(sol, _)| sol.coords.clone());
    let mut candidates = Vec::new();
    if s == 0 {
        let coords = (0..l).map(|n| sync_coords.get(&n).copied()).collect();
        candidates.push(fill_unplaced(coords, measurements));
    }
    for al in &frames {
        let mut coords: Vec<Option<Point2<f64>>> = (0..l).map(|n| sync_coords.get(&n).map(|p| al.apply(p))).collect();
        if let Some(sdp_coords) = &fallback {
            for (c, p) in coords.iter_mut().zip(sdp_coords) {
                c.get_or_insert(*p);
            }
        }
        candidates.push(fill_unplaced(coords, measurements));
    }
    if let Some(sdp_coords) = fallback {
        candidates.push(sdp_coords);
    }
    if candidates.is_empty() {
        let coords = (0..l).map(|n| sync_coords.get(&n).copied()).collect();
        candidates.push(fill_unplaced(coords, measurements));
    }

    // Fuse from every candidate start and keep the lowest final stress,
    // preferring earlier candidates on ties.
    let mut fused: Option<FusionResult> = None;
    for start in &candidates {
        let f = fuse_anchored(start, &network.gateways, &sigma, measurements, opts.fusion)?;
        log::debug!("candidate stress {:e} -> {:e}", f.stress_trace[0], final_stress(&f));
        let better = match &fused {
            None => true,
            Some(best) => final_stress(&f) < final_stress(best),
        };
        if better {
            fused = Some(f);
        }
    }
    let fused = fused.expect("at least one candidate start");
    Ok(Localization {
        coords: fused.coords,
        sync_covered,
        sdp: sdp.map(|(sol, _)| sol),
        well_localized,
        skipped_patches: skipped,
        patch_diagnostics: diagnostics,
        fusion_stress: fused.stress_trace,
    })
}

fn final_stress(f: &FusionResult) -> f64 {
    f.stress_trace.last().copied().unwrap_or(f64::INFINITY)
}

/// Rigid motions taking the synchronized frame to the gateway frame.
///
/// Each gateway with at least three measured, synchronized neighbours is
/// multilaterated in the synchronized frame by linear least squares. Three or
/// more located gateways give one alignment; exactly two leave the mirror
/// undetermined and give both.
fn gateway_frames(
    sync_coords: &BTreeMap<NodeId, Point2<f64>>,
    gateways: &[Point2<f64>],
    measurements: &DistanceMeasurements,
    l: usize,
) -> Vec<LandmarkAlignment> {
    let mut located = Vec::new();
    let mut known = Vec::new();
    for (g, &truth) in gateways.iter().enumerate() {
        let obs: Vec<(Point2<f64>, f64)> = sync_coords
            .iter()
            .filter_map(|(&n, &p)| measurements.get(n, l + g).map(|d| (p, d)))
            .collect();
        if let Some(p) = multilaterate(&obs) {
            located.push(p);
            known.push(truth);
        }
    }
    let mut frames = Vec::new();
    if located.len() >= 3 {
        let opts = AlignOptions {
            scale: ScaleMode::Unit,
            allow_reflection: true,
        };
        frames.extend(landmark_align_with(&located, &known, opts));
    } else if located.len() == 2 {
        for allow_reflection in [false, true] {
            let mirrored: Vec<Point2<f64>> = located.iter().map(|p| Point2::new(-p.x, p.y)).collect();
            let from = if allow_reflection { &mirrored } else { &located };
            let opts = AlignOptions {
                scale: ScaleMode::Unit,
                allow_reflection: false,
            };
            if let Ok(mut al) = landmark_align_with(from, &known, opts) {
                if allow_reflection {
                    // Fold the mirror x -> -x into the alignment.
                    al.reflected = true;
                    al.angle += std::f64::consts::PI;
                }
                frames.push(al);
            }
        }
    }
    frames
}

/// Least-squares point from distances to known points; `None` when fewer
/// than three points or they are collinear.
fn multilaterate(obs: &[(Point2<f64>, f64)]) -> Option<Point2<f64>> {
    if obs.len() < 3 {
        return None;
    }
    let m = obs.len() as f64;
    let mean_p = obs.iter().fold(Vector2::zeros(), |a, (p, _)| a + p.coords) / m;
    let mean_q = obs.iter().map(|(p, d)| p.coords.norm_squared() - d * d).sum::<f64>() / m;
    // 2 (p_i - p̄)ᵀ x = (|p_i|² - d_i²) - mean.
    let mut ata = nalgebra::Matrix2::zeros();
    let mut atb = Vector2::zeros();
    for (p, d) in obs {
        let a = 2.0 * (p.coords - mean_p);
        let b = p.coords.norm_squared() - d * d - mean_q;
        ata += a * a.transpose();
        atb += a * b;
    }
    let scale = ata.trace();
    if !(scale > 0.0) || ata.determinant().abs() <= 1e-12 * scale * scale {
        return None;
    }
    ata.try_inverse().map(|inv| Point2::from(inv * atb))
}

/// Synchronized nodes used to place the synchronized frame onto the gateway
/// frame: the well-localized ones, or the three lowest-ω ones when fewer
/// than three are well localized.
fn frame_nodes(covered: &[NodeId], well: &[usize], omega: &[f64]) -> Vec<NodeId> {
    let well: BTreeSet<usize> = well.iter().copied().collect();
    let chosen: Vec<NodeId> = covered.iter().copied().filter(|n| well.contains(n)).collect();
    if chosen.len() >= 3 {
        return chosen;
    }
    let mut ranked = covered.to_vec();
    ranked.sort_by(|&a, &b| omega[a].total_cmp(&omega[b]).then(a.cmp(&b)));
    ranked.truncate(3);
    ranked
}

/// Places remaining nodes at the mean of their placed measured neighbours,
/// repeating until nothing changes; leftovers go to the overall centroid.
fn fill_unplaced(mut coords: Vec<Option<Point2<f64>>>, measurements: &DistanceMeasurements) -> Vec<Point2<f64>> {
    let l = coords.len();
    loop {
        let mut changed = false;
        for n in 0..l {
            if coords[n].is_some() {
                continue;
            }
            let mut sum = Vector2::zeros();
            let mut count = 0usize;
            for m in 0..l {
                if let (Some(p), true) = (coords[m], measurements.contains(n, m)) {
                    sum += p.coords;
                    count += 1;
                }
            }
            if count > 0 {
                coords[n] = Some(Point2::from(sum / count as f64));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let placed: Vec<Vector2<f64>> = coords.iter().flatten().map(|p| p.coords).collect();
    let centre = if placed.is_empty() {
        Vector2::zeros()
    } else {
        placed.iter().sum::<Vector2<f64>>() / placed.len() as f64
    };
    coords.into_iter().map(|c| c.unwrap_or(Point2::from(centre))).collect()
}
