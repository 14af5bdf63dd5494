//! Metric projection onto the set of valid density operators.
//!
//! The Hilbert-Schmidt-nearest density to a square matrix is found by taking
//! the Hermitian part, diagonalizing it, projecting the eigenvalue vector
//! onto the probability simplex, and reassembling in the same eigenbasis.
//! Because the density set is closed and convex, the projection is
//! non-expansive: it can only shrink the distance to any valid state.

use crate::linalg::{cr, eig_hermitian, hermitize, CMatrix, LinalgError};
use crate::model::DensityOperator;
use nalgebra::DVector;

/// Outcome of [`project_to_density`].
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    /// The nearest valid density operator.
    pub density: DensityOperator,
    /// Hilbert-Schmidt distance from the input to `density`.
    pub distance: f64,
}

/// Euclidean projection of a real vector onto the probability simplex
/// `{λ : λ ≥ 0, Σλ = 1}` by the sorted-threshold rule.
pub fn simplex_project(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut threshold = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
        }
    }
    v.iter().map(|&x| f64::max(x - threshold, 0.0)).collect()
}

/// Hilbert-Schmidt-nearest density operator to a square matrix.
///
/// Non-Hermitian inputs factor through the Hermitian part first, since
/// `(m + m†)/2` is the nearest Hermitian matrix to `m`; among Hermitian
/// inputs the result is the exact metric projection onto the density set.
pub fn project_to_density(m: &CMatrix) -> Result<ProjectionResult, LinalgError> {
    let h = hermitize(m)?;
    let eig = eig_hermitian(&h)?;
    let mut lambda = simplex_project(&eig.eigenvalues);
    // The clamp already enforces λ ≥ 0; renormalize away the last ulps so the
    // trace is exactly one.
    let total: f64 = lambda.iter().sum();
    if total > 0.0 {
        for l in &mut lambda {
            *l /= total;
        }
    }
    let diag = CMatrix::from_diagonal(&DVector::from_iterator(
        lambda.len(),
        lambda.iter().map(|&l| cr(l)),
    ));
    let projected = &eig.eigenvectors * diag * eig.eigenvectors.adjoint();
    let distance = (m - &projected).norm();
    let density = DensityOperator::new(projected).expect("projection output is a valid density");
    Ok(ProjectionResult { density, distance })
}
