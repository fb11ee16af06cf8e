//! Randomized generic rigidity tests for planar distance graphs.
//!
//! Both tests evaluate the graph at a random configuration, which is generic
//! with probability one, so the answers depend on the edge set alone.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RANK_TOL: f64 = 1e-9;

fn random_config(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
}

/// Rigidity matrix: one row per edge, `p_i - p_j` in the columns of `i`.
fn rigidity_matrix(config: &[[f64; 2]], edges: &[(usize, usize)]) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(edges.len(), 2 * config.len());
    for (row, &(i, j)) in edges.iter().enumerate() {
        for k in 0..2 {
            let d = config[i][k] - config[j][k];
            r[(row, 2 * i + k)] = d;
            r[(row, 2 * j + k)] = -d;
        }
    }
    r
}

fn rank_of_symmetric(m: DMatrix<f64>) -> usize {
    let eig = m.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    eig.eigenvalues
        .iter()
        .filter(|v| v.abs() > RANK_TOL * top.max(1.0))
        .count()
}

/// Infinitesimal rigidity: the rigidity matrix has rank `2n - 3`.
pub fn is_generically_rigid(n: usize, edges: &[(usize, usize)], seed: u64) -> bool {
    if n <= 1 {
        return true;
    }
    let r = rigidity_matrix(&random_config(n, seed), edges);
    rank_of_symmetric(r.transpose() * &r) == 2 * n - 3
}

/// Generic global rigidity through a random equilibrium stress: the graph is
/// globally rigid in the plane exactly when it is rigid and the stress matrix
/// of a generic stress has rank `n - 3`.
pub fn is_generically_globally_rigid(n: usize, edges: &[(usize, usize)], seed: u64) -> bool {
    if n <= 3 {
        // Complete graphs on at most three vertices are the only rigid ones.
        return edges.len() >= n * n.saturating_sub(1) / 2;
    }
    let config = random_config(n, seed);
    let r = rigidity_matrix(&config, edges);
    let gram = r.transpose() * &r;
    if rank_of_symmetric(gram.clone()) != 2 * n - 3 {
        return false;
    }
    // Project a random edge weighting onto the left null space of R.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let z = DVector::from_fn(edges.len(), |_, _| rng.random::<f64>() - 0.5);
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let rtz = r.transpose() * &z;
    let mut coef = DVector::zeros(2 * n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() > RANK_TOL * top.max(1.0) {
            let v = eig.eigenvectors.column(k);
            coef += v * (v.dot(&rtz) / lambda);
        }
    }
    let w = z - &r * coef;
    let mut omega = DMatrix::zeros(n, n);
    for (&(i, j), &wij) in edges.iter().zip(w.iter()) {
        omega[(i, j)] -= wij;
        omega[(j, i)] -= wij;
        omega[(i, i)] += wij;
        omega[(j, j)] += wij;
    }
    rank_of_symmetric(omega) == n - 3
}
