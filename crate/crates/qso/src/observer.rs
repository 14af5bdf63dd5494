//! Observability analysis, gain design, and the observer vector field.
//!
//! For the vectorized system `ẋ = Ax`, `y = Cx`, a Luenberger observer
//! `x̂̇ = Ax̂ + K(y − Cx̂)` has error dynamics `ė = (A − KC)e`. A stable gain
//! makes the error decay like `M e^{−σt}` where `σ` is the spectral abscissa
//! of `A − KC` negated and `M` accounts for the non-normal transient.

use crate::linalg::{
    self, condition_number, cr, eig_general_vectors, expm, numerical_rank, CMatrix, CVector,
    LinalgError, C64,
};
use crate::model::VectorizedSystem;
use nalgebra::DVector;
use thiserror::Error;

/// Eigenvalues with real part above this are treated as unstable, so a
/// marginally stable spectrum does not pass as a design.
pub const STABILITY_MARGIN: f64 = 1e-9;
/// Eigenvector condition number beyond which the modal amplitude constant is
/// distrusted and a trajectory-based bound is used instead.
pub const NEAR_DEFECTIVE_KAPPA: f64 = 1e8;

#[derive(Debug, Error)]
pub enum ObserverError {
    #[error("design is unstable: slowest eigenvalue has Re = {max_re:.6}")]
    UnstableDesign { max_re: f64, spectrum: Vec<C64> },
    #[error("gain has shape {got_rows}x{got_cols}, expected {rows}x{cols}")]
    GainShape {
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("state vector has length {got}, expected {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("output vector has length {got}, expected {expected}")]
    OutputLength { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Result of the rank test on the stacked observability matrix.
#[derive(Debug, Clone)]
pub struct ObservabilityReport {
    /// `[C; CA; …; CA^{d²−1}]`.
    pub obsv_matrix: CMatrix,
    pub rank: usize,
    /// True iff the rank equals `d²`.
    pub observable: bool,
    /// Necessary condition: at least `d` measured statistics.
    pub min_measurements_ok: bool,
}

/// Builds the observability matrix and tests its rank.
pub fn observability(vs: &VectorizedSystem) -> ObservabilityReport {
    let d2 = vs.dim * vs.dim;
    let m = vs.num_meas;
    let mut obsv = CMatrix::zeros(m * d2, d2);
    let mut block = vs.c.clone();
    obsv.view_mut((0, 0), (m, d2)).copy_from(&block);
    for k in 1..d2 {
        block = &block * &vs.a;
        obsv.view_mut((k * m, 0), (m, d2)).copy_from(&block);
    }
    let rank = numerical_rank(&obsv);
    ObservabilityReport {
        obsv_matrix: obsv,
        rank,
        observable: rank == d2,
        min_measurements_ok: m >= vs.dim,
    }
}

/// A stable observer gain together with the spectral data of its error
/// dynamics.
#[derive(Debug, Clone)]
pub struct ObserverDesign {
    /// The gain `K`.
    pub gain: CMatrix,
    /// `A − KC`.
    pub error_matrix: CMatrix,
    /// Eigenvalues of `A − KC`.
    pub error_spectrum: Vec<C64>,
    /// Decay rate: negated spectral abscissa, guaranteed `> 0`.
    pub sigma: f64,
    /// Transient amplitude for unit initial error: the 2-norm condition
    /// number `κ(V)` of the eigenvector matrix, so that
    /// `‖e(t)‖ ≤ amplitude_m · ‖e(0)‖ · e^{−σt}` when `A − KC` is
    /// diagonalizable.
    pub amplitude_m: f64,
}

/// Observer design with the plain adjoint gain `K = C†`.
pub fn default_gain(vs: &VectorizedSystem) -> Result<ObserverDesign, ObserverError> {
    with_gain(vs, vs.c.adjoint())
}

/// Observer design with a caller-supplied gain; fails unless every eigenvalue
/// of `A − KC` has real part at most `−STABILITY_MARGIN`.
pub fn with_gain(vs: &VectorizedSystem, gain: CMatrix) -> Result<ObserverDesign, ObserverError> {
    let d2 = vs.dim * vs.dim;
    if gain.shape() != (d2, vs.num_meas) {
        return Err(ObserverError::GainShape {
            rows: d2,
            cols: vs.num_meas,
            got_rows: gain.nrows(),
            got_cols: gain.ncols(),
        });
    }
    let error_matrix = &vs.a - &gain * &vs.c;
    let (error_spectrum, eigenvectors) = eig_general_vectors(&error_matrix)?;
    let max_re = error_spectrum
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_re > -STABILITY_MARGIN {
        return Err(ObserverError::UnstableDesign {
            max_re,
            spectrum: error_spectrum,
        });
    }
    let amplitude_m = condition_number(&eigenvectors);
    Ok(ObserverDesign {
        gain,
        error_matrix,
        error_spectrum,
        sigma: -max_re,
        amplitude_m,
    })
}

/// Amplitude constant for the error bound, plus a flag set when the
/// eigenvector matrix was too ill-conditioned to trust the modal value.
#[derive(Debug, Clone, Copy)]
pub struct AmplitudeBound {
    /// `M` such that `‖e(t)‖ ≤ M e^{−σt}`.
    pub m: f64,
    /// True when `κ(V) > NEAR_DEFECTIVE_KAPPA` and the bound came from
    /// sampling the propagator instead of the modal formula.
    pub near_defective: bool,
}

/// The constant `M = κ(V)·‖e(0)‖` bounding `‖e(t)‖ e^{σt}`.
///
/// For near-defective error dynamics the modal formula is replaced by a
/// sampled supremum of `‖expm((A−KC)t)‖₂ e^{σt}`, padded by 1%.
pub fn amplitude_bound(design: &ObserverDesign, e0_norm: f64) -> AmplitudeBound {
    assert!(e0_norm >= 0.0, "initial error norm must be nonnegative");
    if design.amplitude_m <= NEAR_DEFECTIVE_KAPPA {
        return AmplitudeBound {
            m: design.amplitude_m * e0_norm,
            near_defective: false,
        };
    }
    let sup = sampled_transient_sup(&design.error_matrix, design.sigma);
    AmplitudeBound {
        m: sup * 1.01 * e0_norm,
        near_defective: true,
    }
}

/// Supremum of `‖expm(Mt)‖₂ e^{σt}` sampled over doubling horizons until the
/// running maximum plateaus.
///
/// Worked on the shifted matrix `M + σI`, whose propagator stays bounded, so
/// large horizons do not overflow the `e^{σt}` factor.
fn sampled_transient_sup(error_matrix: &CMatrix, sigma: f64) -> f64 {
    let n = error_matrix.nrows();
    let shifted = error_matrix + CMatrix::identity(n, n).scale(sigma);
    let steps = 256;
    let mut horizon = 50.0 / sigma;
    let mut sup: f64 = 1.0;
    for _ in 0..24 {
        let dt = horizon / steps as f64;
        let step = expm(&shifted.scale(dt)).expect("propagator of a stable matrix");
        let mut p = CMatrix::identity(n, n);
        let mut round_max: f64 = 0.0;
        for _ in 1..=steps {
            p = &p * &step;
            let opnorm = linalg::singular_values(&p).first().copied().unwrap_or(0.0);
            round_max = round_max.max(opnorm);
        }
        if round_max <= sup * (1.0 + 1e-9) {
            break;
        }
        sup = sup.max(round_max);
        horizon *= 2.0;
    }
    sup
}

/// Observer vector field `A x̂ + K (y − C x̂)`.
pub fn observer_rhs(
    vs: &VectorizedSystem,
    design: &ObserverDesign,
    x_hat: &CVector,
    y: &DVector<f64>,
) -> Result<CVector, ObserverError> {
    let d2 = vs.dim * vs.dim;
    if design.gain.shape() != (d2, vs.num_meas) {
        return Err(ObserverError::GainShape {
            rows: d2,
            cols: vs.num_meas,
            got_rows: design.gain.nrows(),
            got_cols: design.gain.ncols(),
        });
    }
    if x_hat.len() != d2 {
        return Err(ObserverError::StateLength {
            expected: d2,
            got: x_hat.len(),
        });
    }
    if y.len() != vs.num_meas {
        return Err(ObserverError::OutputLength {
            expected: vs.num_meas,
            got: y.len(),
        });
    }
    let y_hat = &vs.c * x_hat;
    let innovation = CVector::from_iterator(y.len(), y.iter().zip(y_hat.iter()).map(|(&yi, yh)| cr(yi) - yh));
    Ok(&vs.a * x_hat + &design.gain * innovation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, vectorize};
    use crate::model::{
        build_vectorized, laser_atom_example, projector, two_dim_example, QuantumSystem,
    };
    use crate::test_support;
    use rand::Rng;

    fn two_dim_vs() -> VectorizedSystem {
        build_vectorized(&two_dim_example())
    }

    /// Greedy multiset match: every expected eigenvalue has a distinct close
    /// partner (robust against ordering of conjugate pairs).
    fn assert_spectrum_close(expected: &[C64], got: &[C64], tol: f64) {
        assert_eq!(expected.len(), got.len());
        let mut remaining: Vec<C64> = got.to_vec();
        for e in expected {
            let (idx, dist) = remaining
                .iter()
                .enumerate()
                .map(|(i, g)| (i, (e - g).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty remainder");
            assert!(dist < tol, "no partner for {e} within {tol} (closest {dist:e})");
            remaining.swap_remove(idx);
        }
    }

    #[test]
    fn two_dim_system_is_observable() {
        let report = observability(&two_dim_vs());
        assert_eq!(report.rank, 4);
        assert!(report.observable);
        assert!(report.min_measurements_ok);
    }

    #[test]
    fn laser_atom_is_observable() {
        let report = observability(&build_vectorized(&laser_atom_example()));
        assert_eq!(report.rank, 4);
        assert!(report.observable);
    }

    #[test]
    fn single_observable_is_not_observable() {
        let sys = QuantumSystem::from_pauli([1.5, 1.0, 0.0, 0.5], vec![projector(0, 2)]).unwrap();
        let report = observability(&build_vectorized(&sys));
        assert!(!report.observable);
        assert!(!report.min_measurements_ok);
    }

    #[test]
    fn default_gain_matches_published_spectrum() {
        let design = default_gain(&two_dim_vs()).unwrap();
        let expected = [
            c(-1.0, 0.0),
            c(-0.3966, -2.1630),
            c(-0.3966, 2.1630),
            c(-0.2068, 0.0),
        ];
        assert_spectrum_close(&expected, &design.error_spectrum, 1e-3);
        assert!((design.sigma - 0.2068).abs() < 1e-3);
    }

    #[test]
    fn zero_output_matrix_cannot_be_stabilized() {
        let mut vs = two_dim_vs();
        vs.c = CMatrix::zeros(2, 16 / 4);
        let result = default_gain(&vs);
        assert!(matches!(result, Err(ObserverError::UnstableDesign { .. })));
    }

    #[test]
    fn laser_atom_default_gain_is_stable() {
        let design = default_gain(&build_vectorized(&laser_atom_example())).unwrap();
        assert!(design.sigma > 0.0);
        assert!(design
            .error_spectrum
            .iter()
            .all(|z| z.re <= -STABILITY_MARGIN));
    }

    #[test]
    fn with_gain_special_cases() {
        let vs = two_dim_vs();
        let adjoint = with_gain(&vs, vs.c.adjoint()).unwrap();
        let default = default_gain(&vs).unwrap();
        assert_spectrum_close(&adjoint.error_spectrum, &default.error_spectrum, 1e-12);

        let doubled = with_gain(&vs, vs.c.adjoint().scale(2.0)).unwrap();
        assert!(doubled.error_spectrum.iter().all(|z| z.re < 0.0));

        assert!(matches!(
            with_gain(&vs, CMatrix::zeros(4, 2)),
            Err(ObserverError::UnstableDesign { .. })
        ));
        assert!(matches!(
            with_gain(&vs, CMatrix::zeros(3, 2)),
            Err(ObserverError::GainShape { .. })
        ));
    }

    #[test]
    fn amplitude_bound_examples() {
        // a normal error matrix has κ = 1
        let mut vs = two_dim_vs();
        vs.a = CMatrix::zeros(4, 4);
        vs.c = CMatrix::identity(4, 4);
        vs.num_meas = 4;
        let design = default_gain(&vs).unwrap(); // error matrix = −I
        assert!((design.amplitude_m - 1.0).abs() < 1e-10);
        let b = amplitude_bound(&design, 1.0);
        assert!((b.m - 1.0).abs() < 1e-10);
        assert!(!b.near_defective);
        assert_eq!(amplitude_bound(&design, 0.0).m, 0.0);
    }

    #[test]
    fn amplitude_bound_dominates_propagated_error() {
        // error oracle: ‖expm((A−KC)t) e0‖ ≤ M e^{−σt} at sampled times,
        // on the built-in designs and on random stable ones
        let mut rng = test_support::rng(31);
        let mut designs: Vec<ObserverDesign> = [two_dim_example(), laser_atom_example()]
            .iter()
            .map(|sys| default_gain(&build_vectorized(sys)).unwrap())
            .collect();
        while designs.len() < 10 {
            let h = test_support::random_hermitian(&mut rng, 2);
            let m1 = test_support::random_hermitian(&mut rng, 2);
            let m2 = test_support::random_hermitian(&mut rng, 2);
            let sys = QuantumSystem::new(h, vec![m1, m2]).unwrap();
            if let Ok(design) = default_gain(&build_vectorized(&sys)) {
                designs.push(design);
            }
        }
        for design in &designs {
            let n = design.error_matrix.nrows();
            for _ in 0..5 {
                let e0 = CVector::from_fn(n, |_, _| {
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                let bound = amplitude_bound(design, e0.norm()).m;
                for k in 0..100 {
                    let t = 0.25 * k as f64;
                    let prop = expm(&design.error_matrix.scale(t)).unwrap();
                    let err = (prop * &e0).norm();
                    assert!(
                        err <= bound * (-design.sigma * t).exp() + 1e-9,
                        "t={t}: {err} > bound"
                    );
                }
            }
        }
    }

    #[test]
    fn near_defective_fallback_still_bounds() {
        // Jordan-like block: eigenvector matrix nearly singular.
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[c(-1.0, 0.0), c(1e5, 0.0), c(0.0, 0.0), c(-1.0 - 1e-5, 0.0)],
        );
        let (spectrum, v) = eig_general_vectors(&m).unwrap();
        let sigma = -spectrum.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        assert!(condition_number(&v) > NEAR_DEFECTIVE_KAPPA);
        let design = ObserverDesign {
            gain: CMatrix::zeros(2, 2),
            error_matrix: m.clone(),
            error_spectrum: spectrum,
            sigma,
            amplitude_m: condition_number(&v),
        };
        let bound = amplitude_bound(&design, 1.0);
        assert!(bound.near_defective);
        // the sampled bound must dominate the transient, including far past
        // the initial horizon (analytically the peak is near t = 1/gap)
        for &t in &[0.1, 1.0, 10.0, 100.0, 1e4, 1e5, 1e6] {
            let shifted = &m + CMatrix::identity(2, 2).scale(sigma);
            let opnorm = linalg::singular_values(&expm(&shifted.scale(t)).unwrap())[0];
            assert!(
                opnorm <= bound.m * (1.0 + 1e-6),
                "t={t}: {opnorm:e} > {:e}",
                bound.m
            );
        }
    }

    #[test]
    fn observer_rhs_examples() {
        let sys = two_dim_example();
        let vs = build_vectorized(&sys);
        let design = default_gain(&vs).unwrap();

        // estimate equals truth: innovation vanishes
        let rho = crate::model::DensityOperator::from_diagonal(&[0.25, 0.75]).unwrap();
        let x = vectorize(rho.matrix());
        let y = crate::model::output(&sys, &rho).unwrap();
        let rhs = observer_rhs(&vs, &design, &x, &y).unwrap();
        assert!((&rhs - &vs.a * &x).norm() < 1e-14);

        // zero gain: pure model propagation
        let zero_gain = ObserverDesign {
            gain: CMatrix::zeros(4, 2),
            ..design.clone()
        };
        let x_hat = vectorize(crate::model::DensityOperator::pure(1, 2).matrix());
        let rhs = observer_rhs(&vs, &zero_gain, &x_hat, &y).unwrap();
        assert!((&rhs - &vs.a * &x_hat).norm() < 1e-14);

        // hand-evaluated innovation: x̂ = vec(diag(0,1)), y from diag(0.25,0.75)
        let rhs = observer_rhs(&vs, &design, &x_hat, &y).unwrap();
        let expected = CVector::from_vec(vec![
            c(0.25, 0.0),
            c(0.0, 1.0),
            c(0.0, -1.0),
            c(-0.25, 0.0),
        ]);
        assert!((rhs - expected).norm() < 1e-14);

        let bad_y = DVector::from_vec(vec![0.25]);
        assert!(matches!(
            observer_rhs(&vs, &design, &x_hat, &bad_y),
            Err(ObserverError::OutputLength { .. })
        ));
    }

    #[test]
    fn observable_systems_have_enough_measurements() {
        // random systems: whenever the rank test passes, m ≥ d
        let mut rng = test_support::rng(33);
        for _ in 0..100 {
            let d = rng.gen_range(2..=4);
            let m = rng.gen_range(1..=d * d);
            let h = test_support::random_hermitian(&mut rng, d);
            let obs: Vec<CMatrix> = (0..m)
                .map(|_| test_support::random_hermitian(&mut rng, d))
                .collect();
            let sys = QuantumSystem::new(h, obs).unwrap();
            let report = observability(&build_vectorized(&sys));
            if report.observable {
                assert!(report.min_measurements_ok, "observable with m={m} < d={d}");
            }
        }
    }
}
