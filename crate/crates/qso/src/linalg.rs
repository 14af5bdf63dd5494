//! Dense complex-matrix kernel: the algebraic primitives everything else
//! consumes.
//!
//! Matrices are [`nalgebra`] dynamic matrices over `Complex<f64>`.
//! Vectorization is **column-stacking**, so `vec(X ρ Y) = (Yᵀ ⊗ X) vec(ρ)`
//! and the Hilbert-Schmidt norm of a matrix equals the Euclidean norm of its
//! vectorization.

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

/// Complex scalar used throughout.
pub type C64 = Complex<f64>;
/// Dense complex matrix (dynamic size).
pub type CMatrix = DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = DVector<C64>;

/// Relative singular-value threshold used by [`numerical_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Relative Hermiticity tolerance: `‖m − m†‖ ≤ HERM_TOL · max(1, ‖m‖)`.
pub const HERM_TOL: f64 = 1e-10;
/// Absolute positive-definiteness floor for [`logm_posdef`].
pub const PD_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },
    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("matrix is not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("vector of length {len} does not unstack into a {dim}x{dim} matrix")]
    BadVectorLength { len: usize, dim: usize },
    #[error("eigenvalue iteration failed to converge")]
    EigenFailure,
    #[error("linear solve failed inside the matrix exponential")]
    ExpmSolve,
}

pub(crate) fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub(crate) fn cr(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

fn check_square(m: &CMatrix) -> Result<usize, LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn check_same_shape(a: &CMatrix, b: &CMatrix) -> Result<(), LinalgError> {
    if a.shape() != b.shape() {
        return Err(LinalgError::DimensionMismatch {
            left_rows: a.nrows(),
            left_cols: a.ncols(),
            right_rows: b.nrows(),
            right_cols: b.ncols(),
        });
    }
    Ok(())
}

/// True when every entry is finite (no NaN or infinity in either component).
pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Hermitian part `(m + m†)/2` of a square matrix.
pub fn hermitize(m: &CMatrix) -> Result<CMatrix, LinalgError> {
    check_square(m)?;
    Ok((m + m.adjoint()).scale(0.5))
}

/// Hermiticity defect `‖m − m†‖` relative to `max(1, ‖m‖)`; infinite for
/// rectangular input.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    (m - m.adjoint()).norm() / f64::max(1.0, m.norm())
}

/// Commutator `ab − ba`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, LinalgError> {
    check_square(a)?;
    check_square(b)?;
    check_same_shape(a, b)?;
    Ok(a * b - b * a)
}

/// Kronecker product.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
///
/// The stacking order makes `vectorize` an isometry between matrices under
/// the Hilbert-Schmidt inner product and vectors under the Euclidean one.
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`] for a `d×d` target.
pub fn unvectorize(v: &CVector, d: usize) -> Result<CMatrix, LinalgError> {
    if v.len() != d * d {
        return Err(LinalgError::BadVectorLength { len: v.len(), dim: d });
    }
    Ok(CMatrix::from_column_slice(d, d, v.as_slice()))
}

/// Hilbert-Schmidt (Frobenius) inner product `tr(a† b)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Result<C64, LinalgError> {
    check_same_shape(a, b)?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// Hilbert-Schmidt norm `sqrt(tr(m† m))`.
pub fn hs_norm(m: &CMatrix) -> f64 {
    m.norm()
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are real and sorted non-increasing; `eigenvectors` holds the
/// matching orthonormal eigenvectors as columns, so
/// `eigenvectors · diag(eigenvalues) · eigenvectors†` reconstructs the input.
#[derive(Debug, Clone)]
pub struct HermitianEigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEigenSystem {
    /// `Q · diag(λ) · Q†`.
    pub fn reconstruct(&self) -> CMatrix {
        let lam = CMatrix::from_diagonal(&DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&x| cr(x)),
        ));
        &self.eigenvectors * lam * self.eigenvectors.adjoint()
    }

    /// Applies `f` to each eigenvalue and reassembles `Q · diag(f(λ)) · Q†`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let lam = CMatrix::from_diagonal(&DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&x| f(x)),
        ));
        &self.eigenvectors * lam * self.eigenvectors.adjoint()
    }
}

/// Hermitian eigendecomposition with a Hermiticity check on entry.
pub fn eig_hermitian(m: &CMatrix) -> Result<HermitianEigenSystem, LinalgError> {
    check_square(m)?;
    let defect = hermiticity_defect(m);
    if defect > HERM_TOL {
        return Err(LinalgError::NotHermitian { defect });
    }
    // Work on the Hermitian part so roundoff asymmetry cannot leak through.
    let h = hermitize(m)?;
    let eig = nalgebra::SymmetricEigen::try_new(h, f64::EPSILON, 10_000)
        .ok_or(LinalgError::EigenFailure)?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let cols: Vec<CVector> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    Ok(HermitianEigenSystem {
        eigenvalues,
        eigenvectors: CMatrix::from_columns(&cols),
    })
}

/// Eigenvalues of a general complex square matrix, via complex Schur
/// decomposition.
pub fn eig_general(m: &CMatrix) -> Result<Vec<C64>, LinalgError> {
    let (values, _) = schur_form(m)?;
    Ok(values)
}

/// Schur triangularization: eigenvalues plus the unitary `Q` and triangular
/// `T` with `m = Q T Q†`.
fn schur_form(m: &CMatrix) -> Result<(Vec<C64>, (CMatrix, CMatrix)), LinalgError> {
    let n = check_square(m)?;
    if n == 0 {
        return Ok((vec![], (CMatrix::zeros(0, 0), CMatrix::zeros(0, 0))));
    }
    let schur =
        nalgebra::Schur::try_new(m.clone(), 1e-14, 100_000).ok_or(LinalgError::EigenFailure)?;
    let (q, t) = schur.unpack();
    let values = (0..n).map(|i| t[(i, i)]).collect();
    Ok((values, (q, t)))
}

/// Eigenvalues and an eigenvector matrix `V` (columns) of a general complex
/// matrix, so `m V = V diag(λ)` for diagonalizable `m`.
///
/// Eigenvectors come from back-substitution on the Schur form; for defective
/// or near-defective matrices the returned `V` is ill-conditioned, which
/// callers detect through its condition number.
pub fn eig_general_vectors(m: &CMatrix) -> Result<(Vec<C64>, CMatrix), LinalgError> {
    let (values, (q, t)) = schur_form(m)?;
    let n = values.len();
    let scale = f64::max(1.0, t.norm());
    let floor = f64::EPSILON * scale;
    let mut y = CMatrix::zeros(n, n);
    for i in 0..n {
        let lam = t[(i, i)];
        y[(i, i)] = cr(1.0);
        for k in (0..i).rev() {
            let mut rhs = c(0.0, 0.0);
            for j in (k + 1)..=i {
                rhs -= t[(k, j)] * y[(j, i)];
            }
            let mut den = t[(k, k)] - lam;
            if den.norm() < floor {
                // Repeated diagonal entry: nudge the pivot like LAPACK's
                // triangular eigenvector solvers do.
                den = cr(floor);
            }
            y[(k, i)] = rhs / den;
        }
        let nrm = y.column(i).norm();
        for k in 0..=i {
            y[(k, i)] /= cr(nrm);
        }
    }
    Ok((values, &q * y))
}

/// Matrix exponential by Padé-13 scaling and squaring.
pub fn expm(m: &CMatrix) -> Result<CMatrix, LinalgError> {
    let n = check_square(m)?;
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    // One-norm controls the scaling power.
    let one_norm = (0..n)
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0f64, f64::max);
    const THETA13: f64 = 5.371920351148152;
    let s = if one_norm > THETA13 {
        (one_norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let a = m.scale(0.5f64.powi(s as i32));

    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let id = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u_inner = &a6 * (a6.scale(B[13]) + a4.scale(B[11]) + a2.scale(B[9]))
        + a6.scale(B[7])
        + a4.scale(B[5])
        + a2.scale(B[3])
        + id.scale(B[1]);
    let u = &a * u_inner;
    let v = &a6 * (a6.scale(B[12]) + a4.scale(B[10]) + a2.scale(B[8]))
        + a6.scale(B[6])
        + a4.scale(B[4])
        + a2.scale(B[2])
        + id.scale(B[0]);
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut r = lhs.lu().solve(&rhs).ok_or(LinalgError::ExpmSolve)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Principal logarithm of a Hermitian positive-definite matrix,
/// `Q · ln(Λ) · Q†`.
pub fn logm_posdef(m: &CMatrix) -> Result<CMatrix, LinalgError> {
    let eig = eig_hermitian(m)?;
    let min_eig = eig.eigenvalues.last().copied().unwrap_or(0.0);
    if min_eig <= PD_TOL {
        return Err(LinalgError::NotPositiveDefinite { min_eig });
    }
    Ok(eig.map_eigenvalues(|x| cr(x.ln())))
}

/// Singular values, sorted non-increasing.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let svd = nalgebra::SVD::new(m.clone(), false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Count of singular values above `rel_tol · σ_max`.
pub fn numerical_rank_with(m: &CMatrix, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let max = sv.first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

/// [`numerical_rank_with`] at the default threshold [`DEFAULT_RANK_TOL`].
pub fn numerical_rank(m: &CMatrix) -> usize {
    numerical_rank_with(m, DEFAULT_RANK_TOL)
}

/// 2-norm condition number `σ_max/σ_min` (infinite for singular input).
pub fn condition_number(m: &CMatrix) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) if min > 0.0 => max / min,
        _ => f64::INFINITY,
    }
}
