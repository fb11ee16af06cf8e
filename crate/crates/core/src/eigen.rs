//! Top eigenvector of degree-normalized Hermitian matrices by power iteration.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};

#[derive(Debug, Clone, PartialEq)]
pub struct TopEigenvector<T: nalgebra::Scalar> {
    /// Eigenvector of `Δ^{-1} A`, i.e. `Δ^{-1/2} u` for the top `u` of the symmetric form.
    pub vector: DVector<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when power iteration stalled and a dense eigensolve was used instead.
    pub dense_fallback: bool,
}

/// Top eigenvector of `Δ^{-1} A` for Hermitian `A` and `Δ = diag(degrees)`.
///
/// Iterates on `(S + I) / 2` with `S = Δ^{-1/2} A Δ^{-1/2}`. The spectrum of `S`
/// lies in `[-1, 1]` when `|a_ij| <= 1`, so the shift keeps the wanted
/// eigenvalue dominant even for bipartite patch graphs. Zero-degree rows map
/// to zero entries.
pub fn top_eigenvector<T>(a: &DMatrix<T>, degrees: &[f64], tol: f64, max_iter: usize) -> TopEigenvector<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(degrees.len(), n);
    let isqrt: Vec<f64> = degrees
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let s = DMatrix::from_fn(n, n, |i, j| a[(i, j)].scale(isqrt[i] * isqrt[j]));

    let mut u = DVector::from_fn(n, |i, _| {
        T::from_real(degrees[i].max(0.0).sqrt() * (1.0 + 0.25 * ((i + 1) as f64).sin()))
    });
    let start_norm = u.norm();
    if start_norm == 0.0 {
        return TopEigenvector {
            vector: DVector::from_element(n, T::zero()),
            iterations: 0,
            converged: true,
            dense_fallback: false,
        };
    }
    u.unscale_mut(start_norm);

    let half = T::from_real(0.5);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut next = (&s * &u + &u) * half;
        let norm = next.norm();
        if norm == 0.0 {
            break;
        }
        next.unscale_mut(norm);
        let change = (&next - &u).norm();
        u = next;
        if change < tol {
            converged = true;
            break;
        }
    }

    let mut dense_fallback = false;
    if !converged {
        let eig = SymmetricEigen::new(s);
        let top = (0..n)
            .max_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]))
            .unwrap_or(0);
        u = eig.eigenvectors.column(top).into_owned();
        dense_fallback = true;
    }

    let vector = DVector::from_fn(n, |i, _| u[i].scale(isqrt[i]));
    TopEigenvector {
        vector,
        iterations,
        converged,
        dense_fallback,
    }
}
