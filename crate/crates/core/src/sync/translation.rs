//! Least-squares recovery of global positions from oriented patches.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Point2, Vector2};

use crate::error::{Error, Result};
use crate::graph::components;
use crate::model::DistanceMeasurements;
use crate::patches::Patch;
use crate::NodeId;

/// One aggregated equation `count * (x_a - x_j) = γ`, summed over every patch
/// that contains the measured edge `(a, j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationRow {
    pub a: usize,
    pub j: usize,
    pub count: usize,
    pub gamma: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationSystem {
    /// Node id of each unknown, ascending.
    pub nodes: Vec<NodeId>,
    /// Rows reference positions in `nodes`.
    pub rows: Vec<TranslationRow>,
    /// Number of per-patch equations before aggregation.
    pub raw_rows: usize,
}

impl TranslationSystem {
    /// Dense coefficient matrix τ (one `+count` and one `-count` per row).
    pub fn tau(&self) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(self.rows.len(), self.nodes.len());
        for (r, row) in self.rows.iter().enumerate() {
            t[(r, row.a)] = row.count as f64;
            t[(r, row.j)] = -(row.count as f64);
        }
        t
    }

    pub fn gamma_x(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.gamma.x))
    }

    pub fn gamma_y(&self) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.gamma.y))
    }
}

/// Collects `x_a - x_j = p_a^(b) - p_j^(b)` for every measured edge inside
/// every patch `b`. Patches must already share one orientation.
pub fn build_translation_system(patches: &[&Patch], measurements: &DistanceMeasurements) -> TranslationSystem {
    let mut acc: BTreeMap<(NodeId, NodeId), (usize, Vector2<f64>)> = BTreeMap::new();
    let mut raw_rows = 0;
    for patch in patches {
        let Some(coords) = patch.local_coords.as_ref() else {
            continue;
        };
        let m = &patch.members;
        for x in 0..m.len() {
            for y in x + 1..m.len() {
                if measurements.contains(m[x], m[y]) {
                    let e = acc.entry((m[x], m[y])).or_insert((0, Vector2::zeros()));
                    e.0 += 1;
                    e.1 += coords[x] - coords[y];
                    raw_rows += 1;
                }
            }
        }
    }
    let mut nodes: Vec<NodeId> = acc.keys().flat_map(|&(a, j)| [a, j]).collect();
    for p in patches {
        if p.members.len() == 1 && p.local_coords.is_some() {
            nodes.push(p.members[0]);
        }
    }
    nodes.sort_unstable();
    nodes.dedup();
    let col: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(c, &n)| (n, c)).collect();
    let rows = acc
        .into_iter()
        .map(|((a, j), (count, gamma))| TranslationRow {
            a: col[&a],
            j: col[&j],
            count,
            gamma,
        })
        .collect();
    TranslationSystem { nodes, rows, raw_rows }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationSolution {
    pub system: TranslationSystem,
    /// Least-squares positions with zero mean.
    pub coords: BTreeMap<NodeId, Point2<f64>>,
}

/// Solves `τx = γˣ` and `τy = γʸ` in least squares with the mean fixed at zero.
///
/// The normal matrix `τᵀτ` is a weighted Laplacian whose only null direction,
/// for a connected system, is the all-ones vector; adding a multiple of `11ᵀ`
/// makes it positive definite without moving the zero-mean solution.
pub fn solve_translation(patches: &[&Patch], measurements: &DistanceMeasurements) -> Result<TranslationSolution> {
    let system = build_translation_system(patches, measurements);
    let n = system.nodes.len();
    if n == 0 {
        return Ok(TranslationSolution {
            system,
            coords: BTreeMap::new(),
        });
    }
    let comps = components(n, system.rows.iter().map(|r| (r.a, r.j)));
    if comps.len() > 1 {
        return Err(Error::Underdetermined {
            components: comps
                .into_iter()
                .map(|c| c.into_iter().map(|k| system.nodes[k]).collect())
                .collect(),
        });
    }
    let mut normal = DMatrix::zeros(n, n);
    let mut rhs_x = DVector::zeros(n);
    let mut rhs_y = DVector::zeros(n);
    for row in &system.rows {
        let c = row.count as f64;
        let w = c * c;
        normal[(row.a, row.a)] += w;
        normal[(row.j, row.j)] += w;
        normal[(row.a, row.j)] -= w;
        normal[(row.j, row.a)] -= w;
        rhs_x[row.a] += c * row.gamma.x;
        rhs_x[row.j] -= c * row.gamma.x;
        rhs_y[row.a] += c * row.gamma.y;
        rhs_y[row.j] -= c * row.gamma.y;
    }
    let shift = (0..n).map(|i| normal[(i, i)]).sum::<f64>() / n as f64;
    let shift = if shift > 0.0 { shift / n as f64 } else { 1.0 };
    normal.add_scalar_mut(shift);
    let chol = normal.cholesky().ok_or(Error::Underdetermined {
        components: vec![system.nodes.clone()],
    })?;
    let x = chol.solve(&rhs_x);
    let y = chol.solve(&rhs_y);
    let coords = system
        .nodes
        .iter()
        .enumerate()
        .map(|(k, &id)| (id, Point2::new(x[k], y[k])))
        .collect();
    Ok(TranslationSolution { system, coords })
}
