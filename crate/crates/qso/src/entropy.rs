//! Shannon, von Neumann, and relative entropy, plus the exponential
//! envelopes that certify entropy convergence of an observer estimate.
//!
//! All entropies are in nats. The convention `0 ln 0 = 0` applies
//! throughout, and eigenvalues within roundoff of zero are clamped before
//! taking logarithms.

use crate::linalg::{eig_hermitian, hs_norm, logm_posdef, LinalgError};
use crate::model::DensityOperator;
use thiserror::Error;

/// Entries this far below zero (or sums this far from one) disqualify a
/// probability vector.
pub const PROB_TOL: f64 = 1e-10;
/// Eigenvalues at or below this are treated as exact zeros (kernel) both for
/// the `0 ln 0` convention and for the kernel-containment test.
pub const KER_TOL: f64 = 1e-12;
/// Finite relative entropies this far below zero are clamped to zero.
pub const REL_ENTROPY_CLAMP: f64 = -1e-10;
/// Positive-definiteness floor on `ρ(0)` for the relative-entropy envelope.
pub const PD_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EntropyError {
    #[error("probability vector has negative entry {value:.3e}")]
    NegativeEntry { value: f64 },
    #[error("probability vector sums to {sum}, expected 1")]
    SumNotOne { sum: f64 },
    #[error("densities have different dimensions {left} and {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("eps = {eps} is outside (0, 1/e]")]
    EpsOutOfRange { eps: f64 },
    #[error("envelope parameters must be positive (m = {m}, sigma = {sigma})")]
    NonPositiveEnvelope { m: f64, sigma: f64 },
    #[error("envelope needs dimension at least 2, got {dim}")]
    DimensionTooSmall { dim: usize },
    #[error("initial state is not positive definite (min eigenvalue {min_eig:.3e})")]
    SingularInitialState { min_eig: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Shannon entropy `−Σ pᵢ ln pᵢ` of a probability vector, in nats.
pub fn shannon(p: &[f64]) -> Result<f64, EntropyError> {
    let mut sum = 0.0;
    for &x in p {
        if x < -PROB_TOL {
            return Err(EntropyError::NegativeEntry { value: x });
        }
        sum += x;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(EntropyError::SumNotOne { sum });
    }
    Ok(p.iter()
        .map(|&x| {
            let x = x.clamp(0.0, 1.0);
            if x <= KER_TOL {
                0.0
            } else {
                -x * x.ln()
            }
        })
        .sum())
}

/// Von Neumann entropy `−tr(ρ ln ρ)`: the Shannon entropy of the spectrum.
pub fn vn_entropy(rho: &DensityOperator) -> f64 {
    let mut spectrum = rho.spectrum();
    for x in &mut spectrum {
        *x = x.clamp(0.0, 1.0);
    }
    let total: f64 = spectrum.iter().sum();
    if total > 0.0 {
        for x in &mut spectrum {
            *x /= total;
        }
    }
    shannon(&spectrum).expect("clamped, renormalized spectrum is a probability vector")
}

/// Relative entropy value: finite nonnegative, or infinite when the
/// reference state's kernel is not contained in the argument's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelativeEntropy {
    Finite(f64),
    Infinite,
}

impl RelativeEntropy {
    pub fn is_infinite(&self) -> bool {
        matches!(self, RelativeEntropy::Infinite)
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            RelativeEntropy::Finite(v) => Some(*v),
            RelativeEntropy::Infinite => None,
        }
    }

    /// Finite value, or `f64::INFINITY`.
    pub fn as_f64(&self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }
}

/// Relative entropy `S(ρ‖σ) = tr(ρ ln ρ − ρ ln σ)`.
///
/// If `σ` has an eigenvector `v` in its kernel with `⟨v|ρ|v⟩` above
/// tolerance, the relative entropy is infinite; otherwise it is computed on
/// the support of `σ` and clamped to zero from tiny negative roundoff.
pub fn relative_entropy(
    rho: &DensityOperator,
    sigma: &DensityOperator,
) -> Result<RelativeEntropy, EntropyError> {
    if rho.dim() != sigma.dim() {
        return Err(EntropyError::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        });
    }
    let sig = eig_hermitian(sigma.matrix())?;
    let mut cross = 0.0;
    for (j, &s) in sig.eigenvalues.iter().enumerate() {
        let v = sig.eigenvectors.column(j);
        let overlap = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
        if s <= KER_TOL {
            if overlap > KER_TOL {
                return Ok(RelativeEntropy::Infinite);
            }
        } else {
            cross += overlap * s.ln();
        }
    }
    let neg_entropy: f64 = rho
        .spectrum()
        .iter()
        .map(|&r| {
            let r = r.clamp(0.0, 1.0);
            if r <= KER_TOL {
                0.0
            } else {
                r * r.ln()
            }
        })
        .sum();
    let value = neg_entropy - cross;
    if value < 0.0 && value > REL_ENTROPY_CLAMP {
        return Ok(RelativeEntropy::Finite(0.0));
    }
    Ok(RelativeEntropy::Finite(value))
}

/// Entropy continuity bound `ε ln d − ε ln ε` (Fannes), valid for states at
/// distance `ε ≤ 1/e`.
pub fn fannes_bound(eps: f64, d: usize) -> Result<f64, EntropyError> {
    if eps <= 0.0 || eps > 1.0 / std::f64::consts::E {
        return Err(EntropyError::EpsOutOfRange { eps });
    }
    Ok(eps * (d as f64).ln() - eps * eps.ln())
}

/// The fraction `1 − 1/e` governing the rate loss when a `t e^{−εt}` term is
/// replaced by a pure exponential.
pub const DECAY_FRACTION: f64 = 1.0 - 1.0 / std::f64::consts::E;

/// Both sides of the bound `t e^{−εt} ≤ (1/ε) e^{−aεt}` with
/// `a = 1 − 1/e`; equality holds at `t = 1/(ε(1−a)) = e/ε`.
pub fn texp_bound(t: f64, eps: f64) -> (f64, f64) {
    assert!(eps > 0.0, "eps must be positive");
    assert!(t >= 0.0, "t must be nonnegative");
    let lhs = t * (-eps * t).exp();
    let rhs = (1.0 / eps) * (-DECAY_FRACTION * eps * t).exp();
    (lhs, rhs)
}

/// Exponential envelope constants for entropy convergence of an observer
/// whose error obeys `‖ρ̂̂(t) − ρ(t)‖ ≤ M e^{−σt}`.
///
/// Past the onset time `t_start` (where `M e^{−σt}` drops below `1/e`):
///
/// * `|S(ρ̂̂) − S(ρ)| ≤ M ln(d) e^{−σt} − M ln(M) e^{−σt} + M e^{−aσt}`
///   (the bound reported by [`Self::entropy_bound_at`]), which in turn is at
///   most the single-term form `K e^{−aσt}` with
///   `K = M ln d − M ln M + M`;
/// * with `d_const = ‖ln ρ(0)‖` available (full-rank initial state), the
///   relative entropy obeys the same bound plus `D·M e^{−σt}`.
#[derive(Debug, Clone)]
pub struct ConvergenceEnvelope {
    /// Transient amplitude `M` of the error bound.
    pub amplitude_m: f64,
    /// Decay rate `σ` of the error bound.
    pub sigma: f64,
    /// Hilbert-space dimension `d`.
    pub dim: usize,
    /// Rate fraction `a = 1 − 1/e`.
    pub a: f64,
    /// Single-term amplitude `K = M ln d − M ln M + M`.
    pub k_const: f64,
    /// Onset time `T = −(1/σ) ln(1/(eM))`; negative when `M < 1/e`.
    pub t_start: f64,
    /// `D = ‖ln ρ(0)‖`, present only when the initial state is full-rank.
    pub d_const: Option<f64>,
}

impl ConvergenceEnvelope {
    /// True when the envelope bounds are in force at time `t`.
    pub fn applicable(&self, t: f64) -> bool {
        t >= self.t_start
    }

    /// Single-term envelope `K e^{−aσt}`.
    pub fn envelope_at(&self, t: f64) -> f64 {
        self.k_const * (-self.a * self.sigma * t).exp()
    }

    /// Three-term bound on `|S(ρ̂̂) − S(ρ)|`, valid for `t ≥ t_start`.
    pub fn entropy_bound_at(&self, t: f64) -> f64 {
        let m = self.amplitude_m;
        if m == 0.0 {
            return 0.0;
        }
        let slow = (-self.sigma * t).exp();
        let fast = (-self.a * self.sigma * t).exp();
        m * (self.dim as f64).ln() * slow - m * m.ln() * slow + m * fast
    }

    /// Bound on the relative entropy `S(ρ̂̂‖ρ)`: the entropy bound plus
    /// `D·M e^{−σt}`. `None` when `d_const` is unavailable.
    pub fn relative_bound_at(&self, t: f64) -> Option<f64> {
        let d = self.d_const?;
        Some(self.entropy_bound_at(t) + d * self.amplitude_m * (-self.sigma * t).exp())
    }

    /// Whether the compact single-term form dominates the three-term bound
    /// at `t`. It always does when `M ≤ d` (the combined slow coefficient
    /// `M ln d − M ln M` is then nonnegative); for larger transients the
    /// three-term bound is the one to trust.
    pub fn single_term_valid_at(&self, t: f64) -> bool {
        self.entropy_bound_at(t) <= self.envelope_at(t) * (1.0 + 1e-12)
    }

    /// Error-norm envelope `M e^{−σt}`.
    pub fn error_bound_at(&self, t: f64) -> f64 {
        self.amplitude_m * (-self.sigma * t).exp()
    }

    /// Degenerate envelope for an estimate that starts exactly on the true
    /// state (`M = 0`): every bound is identically zero and applies from the
    /// start.
    pub(crate) fn zero(sigma: f64, dim: usize) -> Self {
        Self {
            amplitude_m: 0.0,
            sigma,
            dim,
            a: DECAY_FRACTION,
            k_const: 0.0,
            t_start: f64::NEG_INFINITY,
            d_const: None,
        }
    }
}

/// Envelope for `|S(ρ̂̂) − S(ρ)|` from the error-bound constants `M`, `σ` and
/// the dimension.
pub fn entropy_envelope(m: f64, sigma: f64, d: usize) -> Result<ConvergenceEnvelope, EntropyError> {
    if m <= 0.0 || sigma <= 0.0 {
        return Err(EntropyError::NonPositiveEnvelope { m, sigma });
    }
    if d < 2 {
        return Err(EntropyError::DimensionTooSmall { dim: d });
    }
    let k_const = (d as f64).ln() * m - m * m.ln() + m;
    let t_start = -(1.0 / sigma) * (1.0 / (std::f64::consts::E * m)).ln();
    Ok(ConvergenceEnvelope {
        amplitude_m: m,
        sigma,
        dim: d,
        a: DECAY_FRACTION,
        k_const,
        t_start,
        d_const: None,
    })
}

/// Envelope for the relative entropy `S(ρ̂̂‖ρ)`: the entropy envelope
/// augmented with `D = ‖ln ρ(0)‖`, which requires a positive-definite
/// initial state.
pub fn relative_entropy_envelope(
    m: f64,
    sigma: f64,
    d: usize,
    rho0: &DensityOperator,
) -> Result<ConvergenceEnvelope, EntropyError> {
    let min_eig = rho0.spectrum().last().copied().unwrap_or(0.0);
    if min_eig <= PD_TOL {
        return Err(EntropyError::SingularInitialState { min_eig });
    }
    let mut envelope = entropy_envelope(m, sigma, d)?;
    envelope.d_const = Some(hs_norm(&logm_posdef(rho0.matrix())?));
    Ok(envelope)
}
