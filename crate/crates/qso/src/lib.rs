//! Estimation of quantum states from measurement statistics.
//!
//! A closed quantum system evolves by the Liouville-von Neumann equation
//! `ρ̇ = −i[H, ρ]`. Column-stacking the density operator turns that equation
//! into an ordinary linear system `ẋ = Ax`, `y = Cx`, where `y` collects the
//! expected values of a set of observables. When the pair `(A, C)` is
//! observable, a Luenberger observer driven by the measurement record
//! reconstructs the state with exponentially decaying error, and a metric
//! projection onto the set of valid density operators turns the raw linear
//! estimate into a physical state without increasing the error.
//!
//! On top of the observer, this crate computes von Neumann and relative
//! entropies of the estimate and certifies their convergence against explicit
//! exponential envelopes built from the observer's decay rate and transient
//! amplitude.
//!
//! Modules:
//!
//! * [`linalg`] — dense complex-matrix kernel (eigendecompositions, matrix
//!   exponential/logarithm, Kronecker products, vectorization, rank).
//! * [`model`] — density operators, quantum systems, their vectorized `(A, C)`
//!   form, and an exact unitary propagation oracle.
//! * [`observer`] — observability analysis, gain design, error-dynamics
//!   spectra, and the observer vector field.
//! * [`project`] — metric projection onto the density set via eigenvalue
//!   simplex projection.
//! * [`entropy`] — Shannon/von Neumann/relative entropy and the convergence
//!   envelopes.
//! * [`sim`] — fixed-step co-simulation of system and observer with recorded
//!   entropies and envelopes.
//! * [`cli`] — declarative experiment configs, built-in examples, CSV
//!   emission, and self-check suites.

pub mod cli;
pub mod entropy;
pub mod linalg;
pub mod model;
pub mod observer;
pub mod project;
pub mod sim;

pub use entropy::{
    entropy_envelope, fannes_bound, relative_entropy, relative_entropy_envelope, shannon,
    texp_bound, vn_entropy, ConvergenceEnvelope, RelativeEntropy,
};
pub use linalg::{CMatrix, CVector, C64};
pub use model::{build_vectorized, exact_propagate, output, DensityOperator, QuantumSystem, VectorizedSystem};
pub use observer::{
    amplitude_bound, default_gain, observability, observer_rhs, with_gain, ObservabilityReport,
    ObserverDesign,
};
pub use project::{project_to_density, simplex_project, ProjectionResult};
pub use sim::{check_envelopes, run, SimConfig, Trajectory};

// The guide's code samples double as doctests so they cannot drift from the
// library; `cfg(doctest)` keeps these stubs out of the rendered API docs.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub struct Intro;
    #[doc = include_str!("../../../book/src/states-and-dynamics.md")]
    pub struct StatesAndDynamics;
    #[doc = include_str!("../../../book/src/vectorization.md")]
    pub struct Vectorization;
    #[doc = include_str!("../../../book/src/observers.md")]
    pub struct Observers;
    #[doc = include_str!("../../../book/src/projection.md")]
    pub struct Projection;
    #[doc = include_str!("../../../book/src/entropy.md")]
    pub struct Entropy;
    #[doc = include_str!("../../../book/src/envelopes.md")]
    pub struct Envelopes;
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub struct Simulation;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct CliReference;
    #[doc = include_str!("../../../README.md")]
    pub struct Readme;
}
