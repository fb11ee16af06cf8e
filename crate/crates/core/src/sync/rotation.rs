//! Relative rotations between patches and their phase synchronization.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::{Complex, DMatrix, Point2};

use crate::eigen::top_eigenvector;
use crate::error::Result;
use crate::graph::components;
use crate::patches::{Patch, PatchGraph, PatchSet};

use super::landmark::{landmark_align_with, AlignOptions, ScaleMode};

/// Hermitian matrix of relative rotations, `r_aj = e^{iθ_aj}` with
/// `frame_j ≈ e^{iθ_aj} frame_a` on the shared nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationSystem {
    pub num_patches: usize,
    /// `r_aj` for ordered pairs `a < j`; the lower triangle is the conjugate.
    pub r: BTreeMap<(usize, usize), Complex<f64>>,
}

impl RotationSystem {
    pub fn get(&self, a: usize, j: usize) -> Complex<f64> {
        if a < j {
            self.r.get(&(a, j)).copied().unwrap_or_default()
        } else {
            self.r.get(&(j, a)).map(|z| z.conj()).unwrap_or_default()
        }
    }

    pub fn matrix(&self) -> DMatrix<Complex<f64>> {
        let mut m = DMatrix::from_element(self.num_patches, self.num_patches, Complex::new(0.0, 0.0));
        for (&(a, j), &z) in &self.r {
            m[(a, j)] = z;
            m[(j, a)] = z.conj();
        }
        m
    }

    /// Writes `a,j,re,im,theta` rows.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "a,j,re,im,theta")?;
        for (&(a, j), z) in &self.r {
            writeln!(out, "{a},{j},{},{},{}", z.re, z.im, z.arg())?;
        }
        Ok(())
    }
}

fn shared_coords(shared: &[usize], p: &Patch) -> Option<Vec<Point2<f64>>> {
    shared.iter().map(|&n| p.local(n)).collect()
}

/// Unit-scale landmark alignment on the shared nodes of every patch-graph pair.
/// Degenerate pairs get no entry.
pub fn build_rotation_matrix(patches: &PatchSet, graph: &PatchGraph) -> RotationSystem {
    let opts = AlignOptions {
        scale: ScaleMode::Unit,
        allow_reflection: false,
    };
    let mut r = BTreeMap::new();
    for (&(a, j), shared) in &graph.adjacency {
        let (Some(xa), Some(xj)) = (
            shared_coords(shared, &patches.patches[a]),
            shared_coords(shared, &patches.patches[j]),
        ) else {
            continue;
        };
        if let Ok(al) = landmark_align_with(&xa, &xj, opts) {
            r.insert((a, j), Complex::from_polar(1.0, al.angle));
        }
    }
    RotationSystem {
        num_patches: graph.num_patches,
        r,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationSolution {
    /// `θ̂_a` in `[0, 2π)`: patch `a` is brought into the common frame by
    /// multiplying its local coordinates by `e^{iθ̂_a}`. The lowest patch of
    /// each component has phase 0.
    pub phases: Vec<f64>,
    pub components: Vec<Vec<usize>>,
    /// Patches whose eigenvector entry vanished and took a neighbour's phase.
    pub zero_entries: Vec<usize>,
    pub dense_fallback: bool,
}

/// Phases of the top eigenvector of `Δ⁻¹R`, solved per connected component.
pub fn solve_rotation_sync(system: &RotationSystem, tol: f64, max_iter: usize) -> RotationSolution {
    let n = system.num_patches;
    let comps = components(n, system.r.keys().copied());
    let mut unit = vec![Complex::new(1.0, 0.0); n];
    let mut zero_entries = Vec::new();
    let mut dense_fallback = false;
    let mut degree = vec![0usize; n];
    for &(a, j) in system.r.keys() {
        degree[a] += 1;
        degree[j] += 1;
    }
    for comp in &comps {
        if comp.len() == 1 {
            continue;
        }
        let index: BTreeMap<usize, usize> = comp.iter().enumerate().map(|(k, &p)| (p, k)).collect();
        let mut sub = DMatrix::from_element(comp.len(), comp.len(), Complex::new(0.0, 0.0));
        let mut deg = vec![0.0; comp.len()];
        for (&(a, j), &z) in &system.r {
            if let (Some(&x), Some(&y)) = (index.get(&a), index.get(&j)) {
                sub[(x, y)] = z;
                sub[(y, x)] = z.conj();
                deg[x] += 1.0;
                deg[y] += 1.0;
            }
        }
        let top = top_eigenvector(&sub, &deg, tol, max_iter);
        dense_fallback |= top.dense_fallback;
        let v = &top.vector;
        let peak = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let mut resolved = vec![true; comp.len()];
        for k in 0..comp.len() {
            if v[k].norm() <= 1e-12 * peak {
                resolved[k] = false;
                zero_entries.push(comp[k]);
            } else {
                unit[comp[k]] = v[k] / v[k].norm();
            }
        }
        // g_a = r_aj g_j from the best-connected resolved neighbour.
        for k in 0..comp.len() {
            if resolved[k] {
                continue;
            }
            let a = comp[k];
            let best = comp
                .iter()
                .enumerate()
                .filter(|&(m, &j)| resolved[m] && system.get(a, j).norm() > 0.0)
                .max_by(|x, y| degree[*x.1].cmp(&degree[*y.1]).then(y.1.cmp(x.1)));
            unit[a] = match best {
                Some((_, &j)) => system.get(a, j) * unit[j],
                None => Complex::new(1.0, 0.0),
            };
        }
        let gauge = unit[comp[0]].conj();
        for &p in comp {
            unit[p] *= gauge;
        }
    }
    zero_entries.sort_unstable();
    let phases = unit.iter().map(|z| z.arg().rem_euclid(TAU)).collect();
    RotationSolution {
        phases,
        components: comps,
        zero_entries,
        dense_fallback,
    }
}

/// Rotates a patch's local coordinates by `theta`.
pub fn rotate_patch(patch: &mut Patch, theta: f64) {
    let (s, c) = theta.sin_cos();
    if let Some(coords) = patch.local_coords.as_mut() {
        for p in coords.iter_mut() {
            *p = Point2::new(c * p.x - s * p.y, s * p.x + c * p.y);
        }
    }
}
