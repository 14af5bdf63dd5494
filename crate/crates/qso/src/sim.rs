//! Fixed-step co-simulation of the true dynamics and the observer, with
//! entropies and envelope values recorded along the trajectory.
//!
//! The truth is propagated exactly through the unitary flow by default, so
//! any envelope violation can only come from the observer path; a classical
//! RK4 integrator is available for both sides as well.

use crate::entropy::{
    entropy_envelope, relative_entropy, relative_entropy_envelope, vn_entropy,
    ConvergenceEnvelope, EntropyError,
};
use crate::linalg::{unvectorize, vectorize, CVector, LinalgError};
use crate::model::{
    build_vectorized, evolution_operator, output_raw, DensityOperator, ModelError, QuantumSystem,
};
use crate::observer::{amplitude_bound, observer_rhs, ObserverDesign, ObserverError};
use crate::project::project_to_density;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {reason}")]
    InvalidConfig { reason: String },
    #[error("state blew up (non-finite values) at t = {t}")]
    BlowUp { t: f64 },
    #[error("system dimension {sys} does not match state dimension {state}")]
    DimensionMismatch { sys: usize, state: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Observer(#[from] ObserverError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Fixed-step integration settings.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub t_final: f64,
    pub dt: f64,
    /// Record every this-many steps (the initial and final points are always
    /// recorded).
    pub record_every: usize,
    /// Propagate the true state through the exact unitary flow instead of
    /// integrating it numerically.
    pub use_exact_truth: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            t_final: 60.0,
            dt: 1e-3,
            record_every: 10,
            use_exact_truth: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt <= self.t_final) {
            return Err(SimError::InvalidConfig {
                reason: format!("need 0 < dt <= t_final, got dt={}, t_final={}", self.dt, self.t_final),
            });
        }
        if self.record_every == 0 {
            return Err(SimError::InvalidConfig {
                reason: "record_every must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// One classical fourth-order Runge-Kutta step for `ẋ = f(t, x)`.
pub fn rk4_step<F>(f: F, t: f64, x: &CVector, dt: f64) -> Result<CVector, SimError>
where
    F: Fn(f64, &CVector) -> CVector,
{
    assert!(dt > 0.0, "dt must be positive");
    let k1 = f(t, x);
    let k2 = f(t + dt / 2.0, &(x + k1.scale(dt / 2.0)));
    let k3 = f(t + dt / 2.0, &(x + k2.scale(dt / 2.0)));
    let k4 = f(t + dt, &(x + k3.scale(dt)));
    let next = x + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0);
    if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SimError::BlowUp { t: t + dt });
    }
    Ok(next)
}

/// Time-indexed record of a co-simulation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `‖ρ̂̂(t) − ρ(t)‖` (projected estimate vs truth).
    pub err_norm: Vec<f64>,
    /// `S(ρ(t))` — constant along unitary evolution.
    pub s_true: Vec<f64>,
    /// `S(ρ̂̂(t))`.
    pub s_hat: Vec<f64>,
    /// `S(ρ̂̂(t) ‖ ρ(t))`, `f64::INFINITY` when divergent.
    pub s_rel: Vec<f64>,
    /// Error envelope `M e^{−σt}`.
    pub env_err: Vec<f64>,
    /// Entropy-difference envelope (three-term bound).
    pub env_entropy: Vec<f64>,
    /// Relative-entropy envelope; `None` when the initial state is singular.
    pub env_rel: Option<Vec<f64>>,
    /// The envelope constants behind the recorded bounds.
    pub envelope: ConvergenceEnvelope,
    /// Set when the amplitude constant came from the sampled fallback for
    /// near-defective error dynamics.
    pub amplitude_near_defective: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Whether the envelopes are in force at record index `i`.
    pub fn applicable(&self, i: usize) -> bool {
        self.envelope.applicable(self.times[i])
    }
}

/// Runs the coupled truth/observer simulation.
///
/// At each record point the raw estimate is projected onto the density set,
/// entropies and the error norm are computed, and the envelopes are
/// evaluated from the design's decay rate and the initial error amplitude.
pub fn run(
    sys: &QuantumSystem,
    design: &ObserverDesign,
    rho0: &DensityOperator,
    rho_hat0: &DensityOperator,
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    if sys.dim() != rho0.dim() {
        return Err(SimError::DimensionMismatch {
            sys: sys.dim(),
            state: rho0.dim(),
        });
    }
    if sys.dim() != rho_hat0.dim() {
        return Err(SimError::DimensionMismatch {
            sys: sys.dim(),
            state: rho_hat0.dim(),
        });
    }
    let d = sys.dim();
    let vs = build_vectorized(sys);
    if design.gain.shape() != (d * d, vs.num_meas) {
        return Err(ObserverError::GainShape {
            rows: d * d,
            cols: vs.num_meas,
            got_rows: design.gain.nrows(),
            got_cols: design.gain.ncols(),
        }
        .into());
    }

    let e0_norm = (rho_hat0.matrix() - rho0.matrix()).norm();
    let amplitude = amplitude_bound(design, e0_norm);
    let envelope = if amplitude.m > 0.0 {
        match relative_entropy_envelope(amplitude.m, design.sigma, d, rho0) {
            Ok(env) => env,
            Err(EntropyError::SingularInitialState { .. }) => {
                entropy_envelope(amplitude.m, design.sigma, d)?
            }
            Err(other) => return Err(other.into()),
        }
    } else {
        ConvergenceEnvelope::zero(design.sigma, d)
    };

    let steps = (cfg.t_final / cfg.dt).round() as usize;
    let steps = steps.max(1);
    let u_half = evolution_operator(sys.hamiltonian(), cfg.dt / 2.0)?;

    let mut rho_t = rho0.matrix().clone();
    let mut x_hat = vectorize(rho_hat0.matrix());

    let mut traj = Trajectory {
        times: Vec::new(),
        err_norm: Vec::new(),
        s_true: Vec::new(),
        s_hat: Vec::new(),
        s_rel: Vec::new(),
        env_err: Vec::new(),
        env_entropy: Vec::new(),
        env_rel: envelope.d_const.map(|_| Vec::new()),
        envelope: envelope.clone(),
        amplitude_near_defective: amplitude.near_defective,
    };

    let record =
        |t: f64, rho_t: &crate::linalg::CMatrix, x_hat: &CVector, traj: &mut Trajectory| -> Result<(), SimError> {
            let truth = DensityOperator::new(rho_t.clone())?;
            let estimate = project_to_density(&unvectorize(x_hat, d)?)?.density;
            traj.times.push(t);
            traj.err_norm.push((estimate.matrix() - truth.matrix()).norm());
            traj.s_true.push(vn_entropy(&truth));
            traj.s_hat.push(vn_entropy(&estimate));
            traj.s_rel
                .push(relative_entropy(&estimate, &truth)?.as_f64());
            traj.env_err.push(envelope.error_bound_at(t));
            traj.env_entropy.push(envelope.entropy_bound_at(t));
            if let Some(env_rel) = traj.env_rel.as_mut() {
                env_rel.push(
                    envelope
                        .relative_bound_at(t)
                        .expect("d_const present when env_rel is recorded"),
                );
            }
            Ok(())
        };

    record(0.0, &rho_t, &x_hat, &mut traj)?;

    for i in 0..steps {
        let t = i as f64 * cfg.dt;
        // Truth at the RK4 substages; exact by default so discretization
        // error lives only on the observer path.
        let (r_mid, r_next) = if cfg.use_exact_truth {
            let mid = &u_half * &rho_t * u_half.adjoint();
            let next = &u_half * &mid * u_half.adjoint();
            (mid, next)
        } else {
            let x = vectorize(&rho_t);
            let fx = |_t: f64, x: &CVector| &vs.a * x;
            let half = rk4_step(fx, t, &x, cfg.dt / 2.0)?;
            let full = rk4_step(fx, t + cfg.dt / 2.0, &half, cfg.dt / 2.0)?;
            (unvectorize(&half, d)?, unvectorize(&full, d)?)
        };
        let y0 = output_raw(sys, &rho_t)?;
        let y_mid = output_raw(sys, &r_mid)?;
        let y_next = output_raw(sys, &r_next)?;

        let f = |tau: f64, x: &CVector| {
            // The integrator only evaluates at t, t + dt/2, and t + dt.
            let y = if tau < t + 0.25 * cfg.dt {
                &y0
            } else if tau < t + 0.75 * cfg.dt {
                &y_mid
            } else {
                &y_next
            };
            observer_rhs(&vs, design, x, y).expect("shapes fixed for the whole run")
        };
        x_hat = rk4_step(f, t, &x_hat, cfg.dt)?;
        rho_t = r_next;

        let step_index = i + 1;
        if step_index % cfg.record_every == 0 || step_index == steps {
            record(step_index as f64 * cfg.dt, &rho_t, &x_hat, &mut traj)?;
        }
    }
    Ok(traj)
}

/// Which bound a trajectory point violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    Entropy,
    RelativeEntropy,
}

/// First envelope violation found, if any.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeViolation {
    pub index: usize,
    pub time: f64,
    pub kind: EnvelopeKind,
    pub value: f64,
    pub bound: f64,
}

/// Outcome of [`check_envelopes`].
#[derive(Debug, Clone)]
pub struct EnvelopeReport {
    pub pass: bool,
    pub first_violation: Option<EnvelopeViolation>,
    /// Number of record points inside the envelopes' validity region.
    pub checked: usize,
}

/// Absolute floating-point slack in [`check_envelopes`]; keeps the
/// degenerate zero-envelope case (estimate started exactly on the truth)
/// from tripping on integrator roundoff.
pub const ENVELOPE_CHECK_SLACK: f64 = 1e-12;

/// Asserts the recorded entropy gap and relative entropy against their
/// envelopes at every applicable time; infinite relative entropies are
/// outside the finite bound's scope and are skipped.
pub fn check_envelopes(traj: &Trajectory) -> EnvelopeReport {
    let mut checked = 0;
    for i in 0..traj.len() {
        if !traj.applicable(i) {
            continue;
        }
        checked += 1;
        let gap = (traj.s_hat[i] - traj.s_true[i]).abs();
        if gap > traj.env_entropy[i] + ENVELOPE_CHECK_SLACK {
            return EnvelopeReport {
                pass: false,
                first_violation: Some(EnvelopeViolation {
                    index: i,
                    time: traj.times[i],
                    kind: EnvelopeKind::Entropy,
                    value: gap,
                    bound: traj.env_entropy[i],
                }),
                checked,
            };
        }
        if let Some(env_rel) = &traj.env_rel {
            let s_rel = traj.s_rel[i];
            if s_rel.is_finite() && s_rel > env_rel[i] + ENVELOPE_CHECK_SLACK {
                return EnvelopeReport {
                    pass: false,
                    first_violation: Some(EnvelopeViolation {
                        index: i,
                        time: traj.times[i],
                        kind: EnvelopeKind::RelativeEntropy,
                        value: s_rel,
                        bound: env_rel[i],
                    }),
                    checked,
                };
            }
        }
    }
    EnvelopeReport {
        pass: true,
        first_violation: None,
        checked,
    }
}
