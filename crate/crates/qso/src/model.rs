//! Closed quantum systems, their vectorized linear form, and exact unitary
//! propagation.

use crate::linalg::{
    self, c, commutator, cr, eig_hermitian, hermiticity_defect, kron, unvectorize, vectorize,
    CMatrix, LinalgError, HERM_TOL,
};
use nalgebra::DVector;
use thiserror::Error;

/// Trace tolerance for density validation.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalue floor for density validation (PSD up to roundoff).
pub const PSD_TOL: f64 = -1e-10;
/// Largest imaginary residue tolerated on a measurement output.
pub const OUTPUT_IMAG_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what} is not Hermitian (defect {defect:.3e})")]
    NotHermitian { what: &'static str, defect: f64 },
    #[error("density trace is {trace}, expected 1")]
    TraceNotOne { trace: f64 },
    #[error("density has negative eigenvalue {min_eig:.3e}")]
    NotPositiveSemidefinite { min_eig: f64 },
    #[error("matrix entries must be finite")]
    NonFiniteEntries,
    #[error("a system needs at least one observable")]
    NoObservables,
    #[error("observable {index} is {rows}x{cols}, expected {dim}x{dim}")]
    ObservableShape {
        index: usize,
        rows: usize,
        cols: usize,
        dim: usize,
    },
    #[error("dimension mismatch: system is {expected}-dimensional, state is {got}-dimensional")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("output has non-negligible imaginary part {imag:.3e}")]
    NonRealOutput { imag: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A valid quantum state: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace, and positive semidefiniteness
    /// (each up to tolerance) before accepting the matrix.
    pub fn new(matrix: CMatrix) -> Result<Self, ModelError> {
        if !linalg::all_finite(&matrix) {
            return Err(ModelError::NonFiniteEntries);
        }
        let defect = hermiticity_defect(&matrix);
        if defect > HERM_TOL {
            return Err(ModelError::NotHermitian {
                what: "density",
                defect,
            });
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(ModelError::TraceNotOne { trace: trace.re });
        }
        let eig = eig_hermitian(&matrix)?;
        let min_eig = eig.eigenvalues.last().copied().unwrap_or(0.0);
        if min_eig < PSD_TOL {
            return Err(ModelError::NotPositiveSemidefinite { min_eig });
        }
        Ok(Self { matrix })
    }

    /// Density with the given diagonal (a classical probability vector).
    pub fn from_diagonal(probs: &[f64]) -> Result<Self, ModelError> {
        let m = CMatrix::from_diagonal(&DVector::from_iterator(
            probs.len(),
            probs.iter().map(|&p| cr(p)),
        ));
        Self::new(m)
    }

    /// Pure state `|k⟩⟨k|` in dimension `d`.
    pub fn pure(k: usize, d: usize) -> Self {
        assert!(k < d, "basis index {k} out of range for dimension {d}");
        let mut m = CMatrix::zeros(d, d);
        m[(k, k)] = cr(1.0);
        Self { matrix: m }
    }

    /// The maximally mixed state `I/d`.
    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: CMatrix::identity(d, d).scale(1.0 / d as f64),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigenvalues sorted non-increasing.
    pub fn spectrum(&self) -> Vec<f64> {
        eig_hermitian(&self.matrix)
            .expect("a density operator is Hermitian")
            .eigenvalues
    }
}

/// The sixteen-entries-at-most Pauli basis for `d = 2`:
/// `σ0 = I, σ1 = X, σ2 = Y, σ3 = Z`.
pub fn pauli(k: usize) -> CMatrix {
    match k {
        0 => CMatrix::identity(2, 2),
        1 => CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]),
        2 => CMatrix::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)]),
        3 => CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)]),
        _ => panic!("Pauli index {k} out of range"),
    }
}

/// Rank-one projector `|k⟩⟨k|` as a plain matrix.
pub fn projector(k: usize, d: usize) -> CMatrix {
    DensityOperator::pure(k, d).matrix().clone()
}

/// A closed system: Hamiltonian plus the observables whose expected values
/// are measured.
#[derive(Debug, Clone)]
pub struct QuantumSystem {
    hamiltonian: CMatrix,
    observables: Vec<CMatrix>,
}

impl QuantumSystem {
    pub fn new(hamiltonian: CMatrix, observables: Vec<CMatrix>) -> Result<Self, ModelError> {
        if !linalg::all_finite(&hamiltonian) || !observables.iter().all(linalg::all_finite) {
            return Err(ModelError::NonFiniteEntries);
        }
        let defect = hermiticity_defect(&hamiltonian);
        if hamiltonian.nrows() != hamiltonian.ncols() || defect > HERM_TOL {
            return Err(ModelError::NotHermitian {
                what: "Hamiltonian",
                defect,
            });
        }
        if observables.is_empty() {
            return Err(ModelError::NoObservables);
        }
        let d = hamiltonian.nrows();
        for (index, m) in observables.iter().enumerate() {
            if m.shape() != (d, d) {
                return Err(ModelError::ObservableShape {
                    index,
                    rows: m.nrows(),
                    cols: m.ncols(),
                    dim: d,
                });
            }
            let defect = hermiticity_defect(m);
            if defect > HERM_TOL {
                return Err(ModelError::NotHermitian {
                    what: "observable",
                    defect,
                });
            }
        }
        Ok(Self {
            hamiltonian,
            observables,
        })
    }

    /// Two-level system from Pauli coefficients:
    /// `H = c0 σ0 + c1 σ1 + c2 σ2 + c3 σ3`.
    pub fn from_pauli(coeffs: [f64; 4], observables: Vec<CMatrix>) -> Result<Self, ModelError> {
        let h = coeffs
            .iter()
            .enumerate()
            .map(|(k, &ck)| pauli(k).scale(ck))
            .fold(CMatrix::zeros(2, 2), |acc, term| acc + term);
        Self::new(h, observables)
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn observables(&self) -> &[CMatrix] {
        &self.observables
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn num_observables(&self) -> usize {
        self.observables.len()
    }
}

/// The vectorized linear form `ẋ = Ax`, `y = Cx` of a closed system.
#[derive(Debug, Clone)]
pub struct VectorizedSystem {
    pub a: CMatrix,
    pub c: CMatrix,
    pub dim: usize,
    pub num_meas: usize,
}

/// Builds `A = −i(I ⊗ H − Hᵀ ⊗ I)` and the output matrix whose k-th row is
/// `vec(M_k)†`, under the column-stacking convention, so that
/// `unvec(A vec(ρ)) = −i[H, ρ]`.
pub fn build_vectorized(sys: &QuantumSystem) -> VectorizedSystem {
    let d = sys.dim();
    let id = CMatrix::identity(d, d);
    let a = (kron(&id, sys.hamiltonian()) - kron(&sys.hamiltonian().transpose(), &id))
        .map(|z| z * c(0.0, -1.0));
    let mut cmat = CMatrix::zeros(sys.num_observables(), d * d);
    for (k, m) in sys.observables().iter().enumerate() {
        cmat.set_row(k, &vectorize(m).adjoint());
    }
    VectorizedSystem {
        a,
        c: cmat,
        dim: d,
        num_meas: sys.num_observables(),
    }
}

/// Measurement statistics `y_k = tr(M_k ρ)`.
///
/// The traces of Hermitian observables against a density are real; any
/// imaginary residue beyond tolerance signals invalid inputs and is an error.
pub fn output(sys: &QuantumSystem, rho: &DensityOperator) -> Result<DVector<f64>, ModelError> {
    if sys.dim() != rho.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: sys.dim(),
            got: rho.dim(),
        });
    }
    output_raw(sys, rho.matrix())
}

/// [`output`] on a raw matrix already known to be a valid state, skipping
/// density validation (hot path of the simulator).
pub(crate) fn output_raw(sys: &QuantumSystem, rho: &CMatrix) -> Result<DVector<f64>, ModelError> {
    let mut y = DVector::zeros(sys.num_observables());
    for (k, m) in sys.observables().iter().enumerate() {
        let val = (m * rho).trace();
        if val.im.abs() > OUTPUT_IMAG_TOL {
            return Err(ModelError::NonRealOutput { imag: val.im });
        }
        y[k] = val.re;
    }
    Ok(y)
}

/// The unitary `U(t) = e^{−iHt}`, computed from the Hamiltonian's
/// eigendecomposition.
pub fn evolution_operator(hamiltonian: &CMatrix, t: f64) -> Result<CMatrix, ModelError> {
    let eig = eig_hermitian(hamiltonian)?;
    Ok(eig.map_eigenvalues(|w| (c(0.0, -1.0) * cr(w * t)).exp()))
}

/// Exact propagation `ρ(t) = U(t) ρ(0) U(t)†` of the closed dynamics.
///
/// Unitary conjugation preserves the spectrum, hence trace, positivity, and
/// entropy.
pub fn exact_propagate(
    sys: &QuantumSystem,
    rho0: &DensityOperator,
    t: f64,
) -> Result<DensityOperator, ModelError> {
    if sys.dim() != rho0.dim() {
        return Err(ModelError::DimensionMismatch {
            expected: sys.dim(),
            got: rho0.dim(),
        });
    }
    let u = evolution_operator(sys.hamiltonian(), t)?;
    DensityOperator::new(&u * rho0.matrix() * u.adjoint())
}

/// `unvec(A vec(ρ))` — used to cross-check the vectorization against the
/// commutator form of the dynamics.
pub fn apply_generator(vs: &VectorizedSystem, rho: &CMatrix) -> Result<CMatrix, ModelError> {
    let v = &vs.a * vectorize(rho);
    Ok(unvectorize(&v, vs.dim)?)
}

/// Right-hand side `−i[H, ρ]` evaluated directly.
pub fn liouville_rhs(sys: &QuantumSystem, rho: &CMatrix) -> Result<CMatrix, ModelError> {
    Ok(commutator(sys.hamiltonian(), rho)?.map(|z| z * c(0.0, -1.0)))
}

/// The two-level example system with `H = (3/2)σ0 + σ1 + (1/2)σ3` and
/// projector observables.
pub fn two_dim_example() -> QuantumSystem {
    QuantumSystem::from_pauli([1.5, 1.0, 0.0, 0.5], vec![projector(0, 2), projector(1, 2)])
        .expect("example system is valid")
}

/// The laser-driven atom: `H = [[E0, ω], [ω̄, E1]]` with `E0 = −0.5`,
/// `E1 = 0.5`, `ω = 3`, measured through both basis projectors.
pub fn laser_atom_example() -> QuantumSystem {
    let h = CMatrix::from_row_slice(2, 2, &[cr(-0.5), cr(3.0), cr(3.0), cr(0.5)]);
    QuantumSystem::new(h, vec![projector(0, 2), projector(1, 2)])
        .expect("example system is valid")
}
