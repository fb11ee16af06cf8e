//! Relative reflections between overlapping patches and their Z2 synchronization.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, Point2, Vector2};

use crate::eigen::top_eigenvector;
use crate::error::{Error, Result};
use crate::graph::components;
use crate::patches::{Patch, PatchGraph, PatchSet};
use crate::NodeId;

/// Paired per-node values seen from two patch frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedNodeProfile {
    pub distances_a: Vec<f64>,
    pub distances_j: Vec<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64], mu: f64) -> f64 {
    (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

impl SharedNodeProfile {
    pub fn len(&self) -> usize {
        self.distances_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances_a.is_empty()
    }

    pub fn means(&self) -> (f64, f64) {
        (mean(&self.distances_a), mean(&self.distances_j))
    }

    /// Sample standard deviations (divisor `n - 1`).
    pub fn std_devs(&self) -> (f64, f64) {
        let (ma, mj) = self.means();
        (sample_std(&self.distances_a, ma), sample_std(&self.distances_j, mj))
    }
}

/// Sample Pearson coefficient of the two lists.
pub fn pearson_correlation(profile: &SharedNodeProfile) -> Result<f64> {
    let n = profile.len();
    assert_eq!(n, profile.distances_j.len(), "profile lists must have equal length");
    if n < 2 {
        return Err(Error::UndefinedCorrelation);
    }
    let (ma, mj) = profile.means();
    let (sa, sj) = profile.std_devs();
    let scale_a = profile.distances_a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale_j = profile.distances_j.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if sa <= 1e-12 * scale_a || sj <= 1e-12 * scale_j || sa == 0.0 || sj == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    let cov: f64 = profile
        .distances_a
        .iter()
        .zip(&profile.distances_j)
        .map(|(a, j)| (a - ma) * (j - mj))
        .sum();
    Ok((cov / ((n - 1) as f64 * sa * sj)).clamp(-1.0, 1.0))
}

fn cross(u: Vector2<f64>, v: Vector2<f64>) -> f64 {
    u.x * v.y - u.y * v.x
}

/// Signed offsets of the shared nodes from a reference line, measured in both
/// patch frames.
///
/// The line runs from the centroid of the shared nodes to the shared node
/// farthest from it in frame `a`. Offsets are invariant under rotation and
/// translation and change sign under reflection, so a mirrored pair correlates
/// near -1 and a consistent pair near +1.
pub fn signed_offset_profile(shared: &[NodeId], a: &Patch, j: &Patch) -> Option<SharedNodeProfile> {
    let xa: Vec<Point2<f64>> = shared.iter().map(|&n| a.local(n)).collect::<Option<_>>()?;
    let xj: Vec<Point2<f64>> = shared.iter().map(|&n| j.local(n)).collect::<Option<_>>()?;
    let m = shared.len() as f64;
    let ca = xa.iter().fold(Vector2::zeros(), |s, p| s + p.coords) / m;
    let cj = xj.iter().fold(Vector2::zeros(), |s, p| s + p.coords) / m;
    let far = (0..xa.len()).max_by(|&p, &q| {
        (xa[p].coords - ca)
            .norm_squared()
            .total_cmp(&(xa[q].coords - ca).norm_squared())
            .then(q.cmp(&p))
    })?;
    let da = xa[far].coords - ca;
    let dj = xj[far].coords - cj;
    let (na, nj) = (da.norm(), dj.norm());
    if na == 0.0 || nj == 0.0 {
        return None;
    }
    Some(SharedNodeProfile {
        distances_a: xa.iter().map(|p| cross(da, p.coords - ca) / na).collect(),
        distances_j: xj.iter().map(|p| cross(dj, p.coords - cj) / nj).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSystem {
    pub num_patches: usize,
    /// Nonzero entries `z_aj` keyed by ordered pair.
    pub z: BTreeMap<(usize, usize), i8>,
    /// Correlation behind every alignable pair.
    pub correlation: BTreeMap<(usize, usize), f64>,
}

impl ReflectionSystem {
    pub fn get(&self, a: usize, j: usize) -> i8 {
        let key = if a < j { (a, j) } else { (j, a) };
        self.z.get(&key).copied().unwrap_or(0)
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.num_patches];
        for &(a, j) in self.z.keys() {
            deg[a] += 1.0;
            deg[j] += 1.0;
        }
        deg
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.num_patches, self.num_patches);
        for (&(a, j), &v) in &self.z {
            m[(a, j)] = v as f64;
            m[(j, a)] = v as f64;
        }
        m
    }

    /// Writes `a,j,z,r` rows.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "a,j,z,r")?;
        for (&(a, j), &z) in &self.z {
            writeln!(out, "{a},{j},{z},{}", self.correlation[&(a, j)])?;
        }
        Ok(())
    }
}

/// `z_aj = -1` when the offset correlation falls below `threshold`, `+1`
/// otherwise; pairs outside the patch graph or with an undefined correlation
/// get no entry.
pub fn build_reflection_matrix(patches: &PatchSet, graph: &PatchGraph, threshold: f64) -> ReflectionSystem {
    let mut z = BTreeMap::new();
    let mut correlation = BTreeMap::new();
    for (&(a, j), shared) in &graph.adjacency {
        let Some(profile) = signed_offset_profile(shared, &patches.patches[a], &patches.patches[j]) else {
            continue;
        };
        let Ok(r) = pearson_correlation(&profile) else {
            continue;
        };
        z.insert((a, j), if r < threshold { -1 } else { 1 });
        correlation.insert((a, j), r);
    }
    ReflectionSystem {
        num_patches: graph.num_patches,
        z,
        correlation,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSolution {
    /// `+1` keeps a patch, `-1` mirrors it. The lowest patch of each component is `+1`.
    pub signs: Vec<i8>,
    pub components: Vec<Vec<usize>>,
    /// Patches whose eigenvector entry vanished and defaulted to `+1`.
    pub zero_entries: Vec<usize>,
    pub dense_fallback: bool,
}

/// Signs of the top eigenvector of `Δ⁻¹Z`, solved per connected component.
pub fn solve_reflection_sync(system: &ReflectionSystem, tol: f64, max_iter: usize) -> ReflectionSolution {
    let n = system.num_patches;
    let comps = components(n, system.z.keys().copied());
    let mut signs = vec![1i8; n];
    let mut zero_entries = Vec::new();
    let mut dense_fallback = false;
    for comp in &comps {
        if comp.len() == 1 {
            continue;
        }
        let index: BTreeMap<usize, usize> = comp.iter().enumerate().map(|(k, &p)| (p, k)).collect();
        let mut sub = DMatrix::zeros(comp.len(), comp.len());
        let mut deg = vec![0.0; comp.len()];
        for (&(a, j), &v) in &system.z {
            if let (Some(&x), Some(&y)) = (index.get(&a), index.get(&j)) {
                sub[(x, y)] = v as f64;
                sub[(y, x)] = v as f64;
                deg[x] += 1.0;
                deg[y] += 1.0;
            }
        }
        let top = top_eigenvector(&sub, &deg, tol, max_iter);
        dense_fallback |= top.dense_fallback;
        let v = &top.vector;
        let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let raw: Vec<i8> = v
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                if x.abs() <= 1e-12 * peak {
                    zero_entries.push(comp[k]);
                    1
                } else if x > 0.0 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        let gauge = raw[0];
        for (k, &p) in comp.iter().enumerate() {
            signs[p] = raw[k] * gauge;
        }
    }
    zero_entries.sort_unstable();
    ReflectionSolution {
        signs,
        components: comps,
        zero_entries,
        dense_fallback,
    }
}

/// Negates the local x-coordinates of a patch.
pub fn mirror_patch(patch: &mut Patch) {
    if let Some(coords) = patch.local_coords.as_mut() {
        for p in coords.iter_mut() {
            p.x = -p.x;
        }
    }
}
