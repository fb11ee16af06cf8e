//! End-node localization against fixed gateways: a PSD feasibility problem over
//! the block matrix χ = [[I₂, X], [Xᵀ, Y]], followed by a regularized
//! least-squares fusion of all measured distances.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Point2, Vector2};

use crate::error::{Error, Result};
use crate::model::{DistanceMeasurements, Network};
use crate::NodeId;

/// Squared-distance interval on one measured pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceConstraint {
    /// End-node index in `0..l`.
    pub i: usize,
    pub partner: Partner,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partner {
    EndNode(usize),
    /// Gateway index in `0..s`.
    Gateway(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchoredProblem {
    pub gateways: Vec<Point2<f64>>,
    pub num_end_nodes: usize,
    pub constraints: Vec<DistanceConstraint>,
    /// ϱ: end-nodes with ω below this are well localized.
    pub tolerance: f64,
}

impl AnchoredProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                reason: format!("must be positive, got {}", self.tolerance),
            });
        }
        for c in &self.constraints {
            let ok = c.i < self.num_end_nodes
                && match c.partner {
                    Partner::EndNode(j) => j < self.num_end_nodes && j != c.i,
                    Partner::Gateway(g) => g < self.gateways.len(),
                }
                && c.lo >= 0.0
                && c.lo <= c.hi
                && c.hi.is_finite();
            if !ok {
                return Err(Error::InvalidParameter {
                    name: "constraints",
                    reason: format!("malformed constraint {c:?}"),
                });
            }
        }
        if !self
            .constraints
            .iter()
            .any(|c| matches!(c.partner, Partner::Gateway(_)))
        {
            return Err(Error::Unanchorable);
        }
        Ok(())
    }

    /// Dimension of χ.
    pub fn chi_size(&self) -> usize {
        2 + self.num_end_nodes
    }
}

/// One constraint per measured end-end or end-gateway pair. With noise factor
/// η the equality becomes the interval `[d(1-η), d(1+η)]²`.
pub fn build_chi_problem(network: &Network, measurements: &DistanceMeasurements) -> Result<AnchoredProblem> {
    if network.num_gateways() == 0 {
        return Err(Error::Unanchorable);
    }
    let l = network.num_end_nodes();
    let eta = measurements.noise_factor;
    let mut constraints = Vec::new();
    for (&(a, b), &d) in &measurements.values {
        if a >= l {
            continue;
        }
        let partner = if b < l {
            Partner::EndNode(b)
        } else {
            Partner::Gateway(b - l)
        };
        let lo = (d * (1.0 - eta)).max(0.0);
        let hi = d * (1.0 + eta);
        constraints.push(DistanceConstraint {
            i: a,
            partner,
            lo: lo * lo,
            hi: hi * hi,
        });
    }
    let problem = AnchoredProblem {
        gateways: network.gateways.clone(),
        num_end_nodes: l,
        constraints,
        tolerance: 1e-5,
    };
    problem.validate()?;
    Ok(problem)
}

/// χ in normalized units: positions are `(p - center) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiMatrix {
    pub matrix: DMatrix<f64>,
    pub center: Vector2<f64>,
    pub scale: f64,
}

impl ChiMatrix {
    pub fn num_end_nodes(&self) -> usize {
        self.matrix.nrows() - 2
    }

    /// Column `i` of X, normalized.
    pub fn x(&self, i: usize) -> Vector2<f64> {
        Vector2::new(self.matrix[(0, 2 + i)], self.matrix[(1, 2 + i)])
    }

    pub fn y(&self, i: usize, j: usize) -> f64 {
        self.matrix[(2 + i, 2 + j)]
    }

    /// End-node position in meters.
    pub fn position(&self, i: usize) -> Point2<f64> {
        Point2::from(self.center + self.x(i) * self.scale)
    }

    /// `ω_i = Y_ii - ‖x_i‖²`, normalized units.
    pub fn omega(&self) -> Vec<f64> {
        (0..self.num_end_nodes())
            .map(|i| self.y(i, i) - self.x(i).norm_squared())
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// A constraint as the sparse symmetric matrix A with `⟨A, χ⟩ ∈ [lo, hi]`.
#[derive(Debug, Clone, Copy)]
enum Slab {
    /// `χ_ii + χ_jj - 2χ_ij` (χ indices).
    Pair { i: usize, j: usize, lo: f64, hi: f64 },
    /// `χ_ii - 2 aᵀ χ[0..2, i]`, bounds already shifted by `‖a‖²`.
    Anchor {
        i: usize,
        a: Vector2<f64>,
        norm2: f64,
        lo: f64,
        hi: f64,
    },
}

impl Slab {
    fn value(&self, chi: &DMatrix<f64>) -> f64 {
        match *self {
            Slab::Pair { i, j, .. } => chi[(i, i)] + chi[(j, j)] - 2.0 * chi[(i, j)],
            Slab::Anchor { i, a, .. } => chi[(i, i)] - 2.0 * (a.x * chi[(0, i)] + a.y * chi[(1, i)]),
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            Slab::Pair { lo, hi, .. } | Slab::Anchor { lo, hi, .. } => (lo, hi),
        }
    }

    fn norm2(&self) -> f64 {
        match *self {
            Slab::Pair { .. } => 4.0,
            Slab::Anchor { norm2, .. } => norm2,
        }
    }

    /// `χ += t A`.
    fn add(&self, chi: &mut DMatrix<f64>, t: f64) {
        match *self {
            Slab::Pair { i, j, .. } => {
                chi[(i, i)] += t;
                chi[(j, j)] += t;
                chi[(i, j)] -= t;
                chi[(j, i)] -= t;
            }
            Slab::Anchor { i, a, .. } => {
                chi[(i, i)] += t;
                for k in 0..2 {
                    chi[(k, i)] -= t * a[k];
                    chi[(i, k)] -= t * a[k];
                }
            }
        }
    }

    fn violation(&self, chi: &DMatrix<f64>) -> f64 {
        let v = self.value(chi);
        let (lo, hi) = self.bounds();
        (lo - v).max(v - hi).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub max_sweeps: usize,
    /// Largest tolerated constraint violation, normalized units.
    pub tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 5000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub chi: ChiMatrix,
    pub coords: Vec<Point2<f64>>,
    pub omega: Vec<f64>,
    /// Frobenius distance from each PSD iterate to the constraint set.
    pub gap_trace: Vec<f64>,
    /// Worst constraint violation of the returned χ, normalized units.
    pub violation: f64,
    pub sweeps: usize,
    pub converged: bool,
}

fn normalization(problem: &AnchoredProblem) -> (Vector2<f64>, f64) {
    let s = problem.gateways.len() as f64;
    let center = problem.gateways.iter().fold(Vector2::zeros(), |acc, g| acc + g.coords) / s;
    let mean_d = problem.constraints.iter().map(|c| c.hi.sqrt()).sum::<f64>() / problem.constraints.len().max(1) as f64;
    let scale = if mean_d > 0.0 { mean_d } else { 1.0 };
    (center, scale)
}

fn slabs(problem: &AnchoredProblem, center: Vector2<f64>, scale: f64) -> Vec<Slab> {
    let s2 = scale * scale;
    problem
        .constraints
        .iter()
        .map(|c| match c.partner {
            Partner::EndNode(j) => Slab::Pair {
                i: 2 + c.i,
                j: 2 + j,
                lo: c.lo / s2,
                hi: c.hi / s2,
            },
            Partner::Gateway(g) => {
                let a = (problem.gateways[g].coords - center) / scale;
                let shift = a.norm_squared();
                Slab::Anchor {
                    i: 2 + c.i,
                    a,
                    norm2: 1.0 + 2.0 * shift,
                    lo: c.lo / s2 - shift,
                    hi: c.hi / s2 - shift,
                }
            }
        })
        .collect()
}

fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    // Restore exact symmetry lost to rounding.
    for i in 0..out.nrows() {
        for j in i + 1..out.ncols() {
            let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    out
}

/// Projection onto the constraint set `{χ : ⟨A_k, χ⟩ ∈ [lo_k, hi_k]}`.
enum ConstraintProjector {
    /// All constraints are equalities: exact projection onto the affine set
    /// through the Cholesky factor of the Gram matrix `G_kj = ⟨A_k, A_j⟩`.
    Affine {
        gram: nalgebra::Cholesky<f64, nalgebra::Dyn>,
        target: DVector<f64>,
    },
    /// Some intervals are open: Dykstra passes over the individual slabs.
    Slabs { passes: usize },
}

/// `⟨A_a, A_b⟩` for two sparse constraint matrices, computed densely on the
/// few entries they touch.
fn slab_inner(a: &Slab, b: &Slab, scratch: &mut DMatrix<f64>) -> f64 {
    b.add(scratch, 1.0);
    let v = a.value(scratch);
    b.add(scratch, -1.0);
    v
}

impl ConstraintProjector {
    fn new(slabs: &[Slab], n: usize) -> Self {
        if slabs.iter().any(|s| s.bounds().0 != s.bounds().1) {
            return ConstraintProjector::Slabs { passes: 10 };
        }
        let m = slabs.len();
        // Constraints interact only through shared χ entries, i.e. shared end-nodes.
        let mut by_node: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, s) in slabs.iter().enumerate() {
            match *s {
                Slab::Pair { i, j, .. } => {
                    by_node.entry(i).or_default().push(k);
                    by_node.entry(j).or_default().push(k);
                }
                Slab::Anchor { i, .. } => by_node.entry(i).or_default().push(k),
            }
        }
        let mut gram = DMatrix::zeros(m, m);
        let mut scratch = DMatrix::zeros(n, n);
        for list in by_node.values() {
            for &a in list {
                for &b in list {
                    if gram[(a, b)] == 0.0 {
                        gram[(a, b)] = slab_inner(&slabs[a], &slabs[b], &mut scratch);
                    }
                }
            }
        }
        // A tiny ridge keeps redundant constraints (more than three gateways
        // on one node) factorizable.
        let ridge = 1e-12 * (0..m).map(|k| gram[(k, k)]).fold(0.0, f64::max);
        for k in 0..m {
            gram[(k, k)] += ridge;
        }
        let target = DVector::from_iterator(m, slabs.iter().map(|s| s.bounds().0));
        match gram.cholesky() {
            Some(gram) => ConstraintProjector::Affine { gram, target },
            None => ConstraintProjector::Slabs { passes: 10 },
        }
    }

    fn project(&self, slabs: &[Slab], chi: &mut DMatrix<f64>) {
        match self {
            ConstraintProjector::Affine { gram, target } => {
                let r = DVector::from_iterator(slabs.len(), slabs.iter().map(|s| s.value(chi))) - target;
                let lambda = gram.solve(&r);
                for (s, &t) in slabs.iter().zip(lambda.iter()) {
                    s.add(chi, -t);
                }
            }
            ConstraintProjector::Slabs { passes } => {
                let mut inc = vec![0.0; slabs.len()];
                for _ in 0..*passes {
                    let mut moved = 0.0f64;
                    for (slab, inc) in slabs.iter().zip(inc.iter_mut()) {
                        slab.add(chi, *inc);
                        let v = slab.value(chi);
                        let (lo, hi) = slab.bounds();
                        let t = (v - v.clamp(lo, hi)) / slab.norm2();
                        slab.add(chi, -t);
                        moved = moved.max((t - *inc).abs());
                        *inc = t;
                    }
                    if moved == 0.0 {
                        break;
                    }
                }
            }
        }
        // The identity block is a separate affine set orthogonal to every
        // constraint, so setting it directly is its exact projection.
        chi[(0, 0)] = 1.0;
        chi[(1, 1)] = 1.0;
        chi[(0, 1)] = 0.0;
        chi[(1, 0)] = 0.0;
    }
}

/// Alternating projections between the constraint set and the PSD cone.
///
/// With equality constraints the constraint projection is exact, so the
/// Frobenius gap between the PSD iterate and its projection back onto the
/// constraints cannot increase. With intervals each constraint projection is
/// itself a run of Dykstra passes over the slabs. Always returns the last PSD
/// iterate; `converged` records whether every constraint holds within
/// `opts.tol`.
pub fn run_sdp(problem: &AnchoredProblem, opts: SdpOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let n = problem.chi_size();
    let l = problem.num_end_nodes;
    let (center, scale) = normalization(problem);
    let slabs = slabs(problem, center, scale);
    let projector = ConstraintProjector::new(&slabs, n);

    let mut chi = DMatrix::zeros(n, n);
    chi[(0, 0)] = 1.0;
    chi[(1, 1)] = 1.0;
    projector.project(&slabs, &mut chi);
    let mut gaps = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    let mut psd = chi.clone();

    while sweeps < opts.max_sweeps {
        sweeps += 1;
        psd = project_psd(&chi);
        let violation = max_violation(&slabs, &psd);
        chi = psd.clone();
        projector.project(&slabs, &mut chi);
        gaps.push((&chi - &psd).norm());
        if violation <= opts.tol {
            converged = true;
            break;
        }
    }
    log::debug!("sdp: {sweeps} sweeps, gap {:.3e}", gaps.last().copied().unwrap_or(0.0));

    let chi = ChiMatrix {
        matrix: psd,
        center,
        scale,
    };
    let coords = (0..l).map(|i| chi.position(i)).collect();
    let omega = chi.omega();
    let violation = max_violation(&slabs, &chi.matrix);
    Ok(SdpSolution {
        chi,
        coords,
        omega,
        gap_trace: gaps,
        violation,
        sweeps,
        converged,
    })
}

fn max_violation(slabs: &[Slab], chi: &DMatrix<f64>) -> f64 {
    let block = (chi[(0, 0)] - 1.0)
        .abs()
        .max((chi[(1, 1)] - 1.0).abs())
        .max(chi[(0, 1)].abs());
    slabs.iter().fold(block, |m, s| m.max(s.violation(chi)))
}

/// As [`run_sdp`], but non-convergence is an error.
pub fn solve_sdp_feasibility(problem: &AnchoredProblem, opts: SdpOptions) -> Result<SdpSolution> {
    let sol = run_sdp(problem, opts)?;
    if !sol.converged {
        return Err(Error::SdpNotConverged {
            sweeps: sol.sweeps,
            residual: sol.violation,
        });
    }
    Ok(sol)
}

/// Indices with `ω_i < ϱ`.
pub fn well_localized_subset(omega: &[f64], rho: f64) -> Vec<usize> {
    omega
        .iter()
        .enumerate()
        .filter(|&(_, &w)| w < rho)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StitchProblem {
    /// `D_L̃`, c×c.
    pub d_l: DMatrix<f64>,
    /// `L̃`, c×c.
    pub l_tilde: DMatrix<f64>,
    /// `S̃`, c×k.
    pub s_tilde: DMatrix<f64>,
    /// Gateway signs, length k; +1 cooperative, -1 competitive.
    pub sigma: DVector<f64>,
    pub mu: f64,
}

impl StitchProblem {
    pub fn validate(&self) -> Result<()> {
        let c = self.d_l.nrows();
        let shapes_ok = self.d_l.ncols() == c
            && self.l_tilde.shape() == (c, c)
            && self.s_tilde.nrows() == c
            && self.s_tilde.ncols() == self.sigma.len();
        if !shapes_ok {
            return Err(Error::InvalidParameter {
                name: "stitch",
                reason: "block dimensions disagree".into(),
            });
        }
        if !(self.mu >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: format!("must be non-negative, got {}", self.mu),
            });
        }
        Ok(())
    }
}

/// `(D_L̃ - L̃ + μI)⁻¹ S̃σ`.
pub fn stitch_global(problem: &StitchProblem) -> Result<DVector<f64>> {
    problem.validate()?;
    let c = problem.d_l.nrows();
    let system = &problem.d_l - &problem.l_tilde + DMatrix::identity(c, c) * problem.mu;
    let rhs = &problem.s_tilde * &problem.sigma;
    Ok(checked_inverse(system)? * rhs)
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn checked_inverse(system: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let norm = one_norm(&system);
    let Some(inv) = system.try_inverse() else {
        return Err(Error::SingularStitch {
            condition: f64::INFINITY,
        });
    };
    let condition = norm * one_norm(&inv);
    if !condition.is_finite() || condition > 1e12 {
        return Err(Error::SingularStitch { condition });
    }
    Ok(inv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionOptions {
    /// Proximal weight μ on the previous iterate.
    pub mu: f64,
    pub max_iters: usize,
    /// Stop once the relative stress decrease falls below this.
    pub tol: f64,
}

impl Default for FusionOptions {
    fn default() -> Self {
        Self {
            mu: 1e-3,
            max_iters: 2000,
            tol: 1e-15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionResult {
    pub coords: Vec<Point2<f64>>,
    pub stress_trace: Vec<f64>,
}

/// Raw stress over every measured pair that involves an end-node, with
/// gateways at their known positions.
pub fn anchored_stress(coords: &[Point2<f64>], gateways: &[Point2<f64>], measurements: &DistanceMeasurements) -> f64 {
    let l = coords.len();
    let at = |k: NodeId| if k < l { coords[k] } else { gateways[k - l] };
    measurements
        .values
        .iter()
        .filter(|(&(a, _), _)| a < l)
        .map(|(&(a, b), &d)| ((at(a) - at(b)).norm() - d).powi(2))
        .sum()
}

/// Majorization of the anchored stress with a proximal term. Each step solves
/// the [`stitch_global`] system `(D_L̃ - L̃ + μI) x = S̃σ` per coordinate, where
/// `D_L̃ - L̃` is the measured-graph Laplacian plus the gateway degrees and the
/// right-hand side collects one column per gateway (σ) and one for the
/// end-node terms. The matrix does not change between steps, so it is
/// inverted once.
pub fn fuse_anchored(
    initial: &[Point2<f64>],
    gateways: &[Point2<f64>],
    sigma: &[f64],
    measurements: &DistanceMeasurements,
    opts: FusionOptions,
) -> Result<FusionResult> {
    let l = initial.len();
    let k = gateways.len();
    if sigma.len() != k {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("expected {k} gateway signs, got {}", sigma.len()),
        });
    }
    let mut d_l = DMatrix::zeros(l, l);
    let mut l_tilde = DMatrix::zeros(l, l);
    let mut end_edges = Vec::new();
    let mut anchor_edges: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (&(a, b), &d) in &measurements.values {
        if a >= l {
            continue;
        }
        if b < l {
            d_l[(a, a)] += 1.0;
            d_l[(b, b)] += 1.0;
            l_tilde[(a, b)] += 1.0;
            l_tilde[(b, a)] += 1.0;
            end_edges.push((a, b, d));
        } else {
            d_l[(a, a)] += 1.0;
            anchor_edges.entry(b - l).or_default().push((a, d));
        }
    }
    let inverse = checked_inverse(&d_l - &l_tilde + DMatrix::identity(l, l) * opts.mu)?;
    let mut sigma_full = DVector::from_element(k + 1, 1.0);
    for (g, &s) in sigma.iter().enumerate() {
        sigma_full[g] = s;
    }

    let mut x = initial.to_vec();
    let mut trace = vec![anchored_stress(&x, gateways, measurements)];
    for _ in 0..opts.max_iters {
        let mut next = [DVector::zeros(l), DVector::zeros(l)];
        for (dim, out) in next.iter_mut().enumerate() {
            let mut s_tilde = DMatrix::zeros(l, k + 1);
            for (&g, edges) in &anchor_edges {
                let a = gateways[g];
                for &(i, d) in edges {
                    let diff = x[i] - a;
                    let r = diff.norm();
                    let dir = if r > 0.0 { diff[dim] / r } else { 0.0 };
                    s_tilde[(i, g)] += a[dim] + d * dir;
                }
            }
            for &(i, j, d) in &end_edges {
                let diff = x[i] - x[j];
                let r = diff.norm();
                if r > 0.0 {
                    let t = d * diff[dim] / r;
                    s_tilde[(i, k)] += t;
                    s_tilde[(j, k)] -= t;
                }
            }
            for i in 0..l {
                s_tilde[(i, k)] += opts.mu * x[i][dim];
            }
            *out = &inverse * (s_tilde * &sigma_full);
        }
        x = (0..l).map(|i| Point2::new(next[0][i], next[1][i])).collect();
        let s = anchored_stress(&x, gateways, measurements);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(s);
        if prev - s <= opts.tol * prev.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(FusionResult {
        coords: x,
        stress_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ordered;

    fn exact_problem(gateways: &[Point2<f64>], nodes: &[Point2<f64>], pairs: &[(usize, usize)]) -> AnchoredProblem {
        let l = nodes.len();
        let at = |k: usize| if k < l { nodes[k] } else { gateways[k - l] };
        let network = Network::from_coords(nodes.to_vec(), gateways.to_vec(), f64::INFINITY, f64::INFINITY);
        let values = pairs
            .iter()
            .map(|&(a, b)| (ordered(a, b), (at(a) - at(b)).norm()))
            .collect();
        build_chi_problem(
            &network,
            &DistanceMeasurements {
                values,
                noise_factor: 0.0,
            },
        )
        .unwrap()
    }

    fn trilaterate(g: &[Point2<f64>], d: &[f64]) -> Point2<f64> {
        // Subtracting the first circle equation from the others leaves a 2x2 linear system.
        let row = |k: usize| {
            (
                2.0 * (g[k].x - g[0].x),
                2.0 * (g[k].y - g[0].y),
                d[0] * d[0] - d[k] * d[k] + g[k].coords.norm_squared() - g[0].coords.norm_squared(),
            )
        };
        let (a, b, e) = row(1);
        let (c, dd, f) = row(2);
        let det = a * dd - b * c;
        Point2::new((e * dd - b * f) / det, (a * f - e * c) / det)
    }

    #[test]
    fn chi_layout_for_two_gateways_three_nodes() {
        let g = [Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)];
        let n = [Point2::new(1.0, 1.0), Point2::new(4.0, 2.0), Point2::new(7.0, 5.0)];
        let p = exact_problem(&g, &n, &[(0, 3), (1, 4), (0, 1), (1, 2)]);
        assert_eq!(p.chi_size(), 5);
        let sol = run_sdp(
            &p,
            SdpOptions {
                max_sweeps: 1,
                tol: 0.0,
            },
        )
        .unwrap();
        assert_eq!(sol.chi.matrix.shape(), (5, 5));
    }

    #[test]
    fn constraint_count_matches_fixture() {
        let spec = crate::model::NetworkSpec {
            num_end_nodes: 15,
            num_gateways: 3,
            region: crate::model::Region::square(1000.0),
            comm_range: crate::model::CommRange::Fixed(400.0),
            gateway_range: Some(500.0),
            seed: 4,
        };
        let net = crate::model::generate_network(&spec).unwrap();
        let meas = crate::model::perturb_distances(&net, 0.0, 1).unwrap();
        let p = build_chi_problem(&net, &meas).unwrap();
        let expected = net.edges.keys().filter(|&&(a, _)| a < 15).count();
        assert_eq!(p.constraints.len(), expected);
    }

    #[test]
    fn gateway_only_measurements_are_unanchorable() {
        let g = [Point2::new(0.0, 0.0)];
        let n = [Point2::new(1.0, 1.0), Point2::new(4.0, 2.0)];
        let network = Network::from_coords(n.to_vec(), g.to_vec(), f64::INFINITY, f64::INFINITY);
        let mut values = BTreeMap::new();
        values.insert((0, 1), 3.0);
        let err = build_chi_problem(
            &network,
            &DistanceMeasurements {
                values,
                noise_factor: 0.0,
            },
        )
        .unwrap_err();
        assert_eq!(err, Error::Unanchorable);
    }

    #[test]
    fn three_gateways_match_trilateration() {
        let g = [
            Point2::new(0.0, 0.0),
            Point2::new(900.0, 100.0),
            Point2::new(300.0, 800.0),
        ];
        let truth = Point2::new(410.0, 260.0);
        let p = exact_problem(&g, &[truth], &[(0, 1), (0, 2), (0, 3)]);
        let sol = solve_sdp_feasibility(&p, SdpOptions::default()).unwrap();
        let d: Vec<f64> = g.iter().map(|q| (q - truth).norm()).collect();
        let oracle = trilaterate(&g, &d);
        assert!(
            (sol.coords[0] - oracle).norm() < 1e-4,
            "{:?} vs {oracle:?}",
            sol.coords[0]
        );
        assert!(sol.omega[0] < 1e-5);
    }

    #[test]
    fn zero_distance_pins_to_gateway() {
        let g = [Point2::new(0.0, 0.0), Point2::new(50.0, 0.0), Point2::new(0.0, 50.0)];
        let p = exact_problem(&g, &[g[1]], &[(0, 1), (0, 2), (0, 3)]);
        // Position error tracks the residual times the problem scale, so the
        // metre-level bar needs a tighter residual than the default.
        let opts = SdpOptions {
            tol: 1e-12,
            ..SdpOptions::default()
        };
        let sol = solve_sdp_feasibility(&p, opts).unwrap();
        assert!((sol.coords[0] - g[1]).norm() < 1e-6);
    }

    #[test]
    fn uniquely_localizable_fixture_is_well_localized() {
        let g = [
            Point2::new(0.0, 0.0),
            Point2::new(1000.0, 0.0),
            Point2::new(500.0, 900.0),
        ];
        let n = [
            Point2::new(200.0, 150.0),
            Point2::new(640.0, 300.0),
            Point2::new(480.0, 610.0),
            Point2::new(820.0, 90.0),
        ];
        let mut pairs = Vec::new();
        for i in 0..4 {
            for k in 4..7 {
                pairs.push((i, k));
            }
        }
        pairs.extend([(0, 1), (1, 2), (2, 3)]);
        let p = exact_problem(&g, &n, &pairs);
        let sol = solve_sdp_feasibility(&p, SdpOptions::default()).unwrap();
        assert!(sol.omega.iter().all(|&w| w < 1e-5), "{:?}", sol.omega);
        assert_eq!(well_localized_subset(&sol.omega, p.tolerance), vec![0, 1, 2, 3]);
        for (e, t) in sol.coords.iter().zip(&n) {
            assert!((e - t).norm() < 1e-2);
        }
        assert!(sol.chi.min_eigenvalue() >= -1e-8);
    }

    #[test]
    fn non_convergence_reports_residual() {
        // Triangle inequality violated: no feasible χ exists.
        let g = [Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)];
        let network = Network::from_coords(vec![Point2::new(5.0, 0.0)], g.to_vec(), f64::INFINITY, f64::INFINITY);
        let mut values = BTreeMap::new();
        values.insert((0, 1), 1.0);
        values.insert((0, 2), 1.0);
        let p = build_chi_problem(
            &network,
            &DistanceMeasurements {
                values,
                noise_factor: 0.0,
            },
        )
        .unwrap();
        match solve_sdp_feasibility(
            &p,
            SdpOptions {
                max_sweeps: 50,
                tol: 1e-6,
            },
        ) {
            Err(Error::SdpNotConverged { sweeps, residual }) => {
                assert_eq!(sweeps, 50);
                assert!(residual > 1e-6);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn projection_gap_never_grows_without_noise() {
        for seed in 0..5 {
            let spec = crate::model::NetworkSpec {
                num_end_nodes: 12,
                num_gateways: 3,
                region: crate::model::Region::square(1000.0),
                comm_range: crate::model::CommRange::Fixed(450.0),
                gateway_range: None,
                seed,
            };
            let net = crate::model::generate_network(&spec).unwrap();
            let meas = crate::model::perturb_distances(&net, 0.0, seed).unwrap();
            let Ok(p) = build_chi_problem(&net, &meas) else {
                continue;
            };
            let sol = run_sdp(
                &p,
                SdpOptions {
                    max_sweeps: 200,
                    tol: 0.0,
                },
            )
            .unwrap();
            for w in sol.gap_trace.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12, "seed {seed}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn well_localized_filter() {
        assert_eq!(well_localized_subset(&[0.0], 1e-5), vec![0]);
        assert!(well_localized_subset(&[1.0], 1e-5).is_empty());
        let omega = [3e-6, 2e-5, 0.0, 1e-5, 9.99e-6];
        let oracle: Vec<usize> = (0..omega.len()).filter(|&i| omega[i] < 1e-5).collect();
        assert_eq!(well_localized_subset(&omega, 1e-5), oracle);
    }

    #[test]
    fn stitch_diagonal_fixture() {
        let p = StitchProblem {
            d_l: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0])),
            l_tilde: DMatrix::zeros(2, 2),
            s_tilde: DMatrix::from_column_slice(2, 1, &[2.0, 8.0]),
            sigma: DVector::from_element(1, 1.0),
            mu: 1.0,
        };
        let x = stitch_global(&p).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stitch_zero_rhs_and_regularization_limit() {
        let d_l = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0]);
        let l_tilde = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        let mut p = StitchProblem {
            d_l,
            l_tilde,
            s_tilde: DMatrix::zeros(3, 2),
            sigma: DVector::from_vec(vec![1.0, -1.0]),
            mu: 0.5,
        };
        assert_eq!(stitch_global(&p).unwrap(), DVector::zeros(3));
        p.s_tilde = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.0]);
        let mut last = f64::INFINITY;
        for mu in [1.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1e6] {
            p.mu = mu;
            let n = stitch_global(&p).unwrap().norm();
            assert!(n < last);
            last = n;
        }
        assert!(last < 1e-5);
    }

    #[test]
    fn singular_stitch_is_reported() {
        // Laplacian of a path with μ = 0 has the all-ones null vector.
        let p = StitchProblem {
            d_l: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0])),
            l_tilde: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            s_tilde: DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
            sigma: DVector::from_element(1, 1.0),
            mu: 0.0,
        };
        assert!(matches!(stitch_global(&p), Err(Error::SingularStitch { .. })));
    }

    #[test]
    fn fusion_recovers_exact_positions() {
        let g = [
            Point2::new(0.0, 0.0),
            Point2::new(1000.0, 0.0),
            Point2::new(400.0, 900.0),
        ];
        let n = [
            Point2::new(200.0, 150.0),
            Point2::new(640.0, 300.0),
            Point2::new(480.0, 610.0),
            Point2::new(820.0, 90.0),
        ];
        let l = n.len();
        let at = |k: usize| if k < l { n[k] } else { g[k - l] };
        let mut values = BTreeMap::new();
        for a in 0..l {
            for b in a + 1..l + 3 {
                if (a + b) % 3 != 0 || b >= l {
                    values.insert((a, b), (at(a) - at(b)).norm());
                }
            }
        }
        let meas = DistanceMeasurements {
            values,
            noise_factor: 0.0,
        };
        let start: Vec<Point2<f64>> = n.iter().map(|p| p + Vector2::new(15.0, -10.0)).collect();
        let res = fuse_anchored(&start, &g, &[1.0; 3], &meas, FusionOptions::default()).unwrap();
        for (e, t) in res.coords.iter().zip(&n) {
            assert!((e - t).norm() < 1e-6, "{e:?} vs {t:?}");
        }
        for w in res.stress_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-18);
        }
    }
}
