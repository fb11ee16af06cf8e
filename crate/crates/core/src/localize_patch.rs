//! Local embedding of a single patch: distance completion, classical MDS and
//! stress majorization.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, Point2, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::components;
use crate::model::DistanceMeasurements;
use crate::patches::Patch;
use crate::NodeId;

/// Intra-patch distances in member order, with measured entries flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDistanceMatrix {
    pub members: Vec<NodeId>,
    pub entries: DMatrix<f64>,
    measured: Vec<bool>,
    /// `(lower, upper)` bounds behind each estimated entry, keyed by local `(i, j)`, `i < j`.
    pub bounds: BTreeMap<(usize, usize), (f64, f64)>,
}

impl PatchDistanceMatrix {
    /// Wraps a fully measured matrix.
    pub fn from_measured(members: Vec<NodeId>, entries: DMatrix<f64>) -> Self {
        let n = members.len();
        assert_eq!(entries.nrows(), n);
        let mut measured = vec![true; n * n];
        for i in 0..n {
            measured[i * n + i] = false;
        }
        Self {
            members,
            entries,
            measured,
            bounds: BTreeMap::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_measured(&self, i: usize, j: usize) -> bool {
        self.measured[i * self.size() + j]
    }

    pub fn all_measured(&self) -> bool {
        let n = self.size();
        (0..n).all(|i| (0..n).all(|j| i == j || self.is_measured(i, j)))
    }

    fn measured_pairs(&self) -> Vec<(usize, usize, f64)> {
        let n = self.size();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.is_measured(i, j) {
                    out.push((i, j, self.entries[(i, j)]));
                }
            }
        }
        out
    }
}

/// Fills unmeasured member pairs with the midpoint of the common-neighbour
/// bounds `max |d_ik - d_kj|` and `min (d_ik + d_kj)`.
///
/// Pairs without a measured common neighbour are filled in later passes from
/// entries estimated earlier, so any connected patch completes.
pub fn complete_distances(patch: &Patch, measurements: &DistanceMeasurements) -> Result<PatchDistanceMatrix> {
    let members = patch.members.clone();
    let n = members.len();
    let mut entries = DMatrix::zeros(n, n);
    let mut measured = vec![false; n * n];
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if let Some(d) = measurements.get(members[i], members[j]) {
                entries[(i, j)] = d;
                entries[(j, i)] = d;
                measured[i * n + j] = true;
                measured[j * n + i] = true;
                edges.push((i, j));
            }
        }
    }
    let comps = components(n, edges);
    if comps.len() > 1 {
        return Err(Error::Incompletable {
            anchor: patch.anchor,
            components: comps
                .into_iter()
                .map(|c| c.into_iter().map(|i| members[i]).collect())
                .collect(),
        });
    }

    let mut known = measured.clone();
    let mut bounds = BTreeMap::new();
    loop {
        let mut fills = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if known[i * n + j] {
                    continue;
                }
                let mut lower = f64::NEG_INFINITY;
                let mut upper = f64::INFINITY;
                for k in 0..n {
                    if known[i * n + k] && known[k * n + j] {
                        let (a, b) = (entries[(i, k)], entries[(k, j)]);
                        upper = upper.min(a + b);
                        lower = lower.max((a - b).abs());
                    }
                }
                if upper.is_finite() {
                    fills.push((i, j, lower, upper));
                }
            }
        }
        if fills.is_empty() {
            break;
        }
        for (i, j, lower, upper) in fills {
            let d = 0.5 * (lower + upper);
            entries[(i, j)] = d;
            entries[(j, i)] = d;
            known[i * n + j] = true;
            known[j * n + i] = true;
            bounds.insert((i, j), (lower, upper));
        }
    }
    Ok(PatchDistanceMatrix {
        members,
        entries,
        measured,
        bounds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalEmbedding {
    pub coords: Vec<Point2<f64>>,
    /// Retained eigenvalues, largest first, after clamping.
    pub eigvals: [f64; 2],
    /// Full double-centred spectrum, descending.
    pub spectrum: Vec<f64>,
    pub negative_eigs: usize,
    pub negative_mass: f64,
    /// Sum of squared residuals over measured pairs.
    pub stress: f64,
    pub stress_trace: Vec<f64>,
    /// Set when the input matrix was identically zero.
    pub degenerate: bool,
}

/// Stress over the measured pairs of `matrix`.
pub fn stress(coords: &[Point2<f64>], matrix: &PatchDistanceMatrix) -> f64 {
    matrix
        .measured_pairs()
        .iter()
        .map(|&(i, j, d)| ((coords[i] - coords[j]).norm() - d).powi(2))
        .sum()
}

/// Classical MDS on the completed matrix: `B = -1/2 J L J`, top two eigenpairs.
pub fn classical_mds(matrix: &PatchDistanceMatrix) -> LocalEmbedding {
    let n = matrix.size();
    if n == 0 {
        return LocalEmbedding {
            coords: vec![],
            eigvals: [0.0; 2],
            spectrum: vec![],
            negative_eigs: 0,
            negative_mass: 0.0,
            stress: 0.0,
            stress_trace: vec![0.0],
            degenerate: true,
        };
    }
    let sq = matrix.entries.map(|d| d * d);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));

    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let spectrum: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let scale = spectrum.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let negatives: Vec<f64> = spectrum
        .iter()
        .copied()
        .filter(|&v| v < -1e-12 * scale.max(1e-300))
        .collect();

    let mut eigvals = [0.0; 2];
    let mut coords = vec![Point2::origin(); n];
    for (slot, &k) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[k].max(0.0);
        eigvals[slot] = lambda;
        let root = lambda.sqrt();
        for (i, c) in coords.iter_mut().enumerate() {
            c[slot] = eig.eigenvectors[(i, k)] * root;
        }
    }
    let s = stress(&coords, matrix);
    LocalEmbedding {
        coords,
        eigvals,
        spectrum,
        negative_eigs: negatives.len(),
        negative_mass: negatives.iter().map(|v| v.abs()).sum(),
        stress: s,
        stress_trace: vec![s],
        degenerate: scale == 0.0,
    }
}

#[inline]
fn inv(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        1.0 / x
    }
}

/// Gauss-Seidel majorization sweeps over `pairs` until the relative stress
/// improvement falls below `tol`. Returns the coordinates and the stress trace.
fn majorize(
    start: &[Point2<f64>],
    pairs: &[(usize, usize, f64)],
    max_iters: usize,
    tol: f64,
) -> (Vec<Point2<f64>>, Vec<f64>) {
    let n = start.len();
    let mut neighbours: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j, d) in pairs {
        neighbours[i].push((j, d));
        neighbours[j].push((i, d));
    }
    let pair_stress =
        |c: &[Point2<f64>]| -> f64 { pairs.iter().map(|&(i, j, d)| ((c[i] - c[j]).norm() - d).powi(2)).sum() };
    let mut coords = start.to_vec();
    let mut current = pair_stress(&coords);
    let mut trace = vec![current];
    for _ in 0..max_iters {
        if current == 0.0 {
            break;
        }
        let mut next = coords.clone();
        for i in 0..n {
            let nb = &neighbours[i];
            if nb.is_empty() {
                continue;
            }
            let pi = next[i];
            let mut acc = nalgebra::Vector2::zeros();
            for &(j, d) in nb {
                let diff = pi - next[j];
                acc += next[j].coords + diff * (d * inv(diff.norm()));
            }
            next[i] = Point2::from(acc / nb.len() as f64);
        }
        let s = pair_stress(&next);
        if s > current {
            break;
        }
        let improvement = current - s;
        coords = next;
        current = s;
        trace.push(s);
        if improvement <= tol * trace[trace.len() - 2] {
            break;
        }
    }
    (coords, trace)
}

/// Stress majorization over the measured pairs.
///
/// Each sweep visits nodes in order and moves node `i` to
/// `(1/deg_i) * sum_j [p_j + d_ij (p_i - p_j) inv(|p_i - p_j|)]`, the exact
/// minimiser of the node's majorizing function, so stress cannot increase.
/// A sweep that raises stress through rounding is discarded and the loop ends.
/// Stops once the relative improvement falls below `tol`.
pub fn refine_majorization(
    embedding: &LocalEmbedding,
    matrix: &PatchDistanceMatrix,
    max_iters: usize,
    tol: f64,
) -> LocalEmbedding {
    assert_eq!(
        embedding.coords.len(),
        matrix.size(),
        "embedding and matrix sizes differ"
    );
    let (coords, trace) = majorize(&embedding.coords, &matrix.measured_pairs(), max_iters, tol);
    LocalEmbedding {
        coords,
        stress: *trace.last().expect("trace starts non-empty"),
        stress_trace: trace,
        ..embedding.clone()
    }
}

/// Majorization against every completed entry, measured or estimated.
///
/// Used between MDS and [`refine_majorization`]: the estimated entries keep
/// the layout from folding while it is still far from the measured geometry.
pub fn warm_start(embedding: &LocalEmbedding, matrix: &PatchDistanceMatrix, iters: usize) -> LocalEmbedding {
    let n = matrix.size();
    let mut all = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            all.push((i, j, matrix.entries[(i, j)]));
        }
    }
    let (coords, _) = majorize(&embedding.coords, &all, iters, 0.0);
    LocalEmbedding {
        stress: stress(&coords, matrix),
        stress_trace: Vec::new(),
        coords,
        ..embedding.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchEmbedOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Sweeps of [`warm_start`] before refinement; 0 disables it.
    pub warm_start_iters: usize,
}

impl Default for PatchEmbedOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-10,
            warm_start_iters: 100,
        }
    }
}

/// Completion, MDS, warm start and majorization in sequence.
pub fn embed_patch(
    patch: &Patch,
    measurements: &DistanceMeasurements,
    opts: PatchEmbedOptions,
) -> Result<(PatchDistanceMatrix, LocalEmbedding)> {
    let matrix = complete_distances(patch, measurements)?;
    let mut initial = classical_mds(&matrix);
    if opts.warm_start_iters > 0 {
        initial = warm_start(&initial, &matrix, opts.warm_start_iters);
    }
    let refined = refine_majorization(&initial, &matrix, opts.max_iters, opts.tol);
    Ok((matrix, refined))
}

/// One JSON line per patch: eigenvalue spectrum and stress trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatchDiagnostics {
    pub anchor: NodeId,
    pub members: usize,
    pub estimated_entries: usize,
    pub spectrum: Vec<f64>,
    pub negative_eigs: usize,
    pub negative_mass: f64,
    pub stress_trace: Vec<f64>,
}

impl PatchDiagnostics {
    pub fn new(anchor: NodeId, matrix: &PatchDistanceMatrix, emb: &LocalEmbedding) -> Self {
        Self {
            anchor,
            members: matrix.size(),
            estimated_entries: matrix.bounds.len(),
            spectrum: emb.spectrum.clone(),
            negative_eigs: emb.negative_eigs,
            negative_mass: emb.negative_mass,
            stress_trace: emb.stress_trace.clone(),
        }
    }
}

pub fn write_patch_diagnostics<W: Write>(mut out: W, diags: &[PatchDiagnostics]) -> Result<()> {
    for d in diags {
        serde_json::to_writer(&mut out, d)?;
        writeln!(out)?;
    }
    Ok(())
}
