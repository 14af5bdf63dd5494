//! Seeded self-check suites behind `qso verify`.
//!
//! Each suite re-derives a property of the library from scratch (fuzzed
//! inequalities, independent oracles) and reports pass/fail; the whole
//! report is deterministic for a fixed seed.

use crate::entropy::{fannes_bound, texp_bound, vn_entropy};
use crate::linalg::{c, cr, hermitize, hs_norm, unvectorize, vectorize, CMatrix};
use crate::model::{
    build_vectorized, exact_propagate, DensityOperator, QuantumSystem,
};
use crate::observer::observability;
use crate::project::project_to_density;
use crate::sim::rk4_step;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;

/// Seed used when neither `--seed` nor `QSO_SEED` is given.
pub const DEFAULT_SEED: u64 = 0;

/// One suite's outcome.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Outcome of all verification suites.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.suites.iter().all(|s| s.pass)
    }

    pub fn failures(&self) -> usize {
        self.suites.iter().filter(|s| !s.pass).count()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verification (seed {})", self.seed)?;
        for s in &self.suites {
            writeln!(
                f,
                "  [{}] {} - {}",
                if s.pass { "pass" } else { "FAIL" },
                s.name,
                s.detail
            )?;
        }
        write!(
            f,
            "result: {}",
            if self.pass() { "all suites pass" } else { "FAILURES present" }
        )
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_complex(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
    hermitize(&random_complex(rng, d)).expect("square by construction")
}

fn random_density(rng: &mut ChaCha8Rng, d: usize) -> DensityOperator {
    let g = random_complex(rng, d);
    let p = &g * g.adjoint();
    DensityOperator::new(p.map(|z| z / p.trace())).expect("normalized Gram matrix")
}

/// Runs every suite with RNG streams split off the given seed.
pub fn cmd_verify(seed: u64) -> VerifyReport {
    let suites = vec![
        fannes_suite(seed),
        texp_suite(seed),
        projection_suite(seed, |m| {
            Ok(project_to_density(m)?.density.matrix().clone())
        }),
        isometry_suite(seed),
        min_measurements_suite(seed),
        integrator_suite(),
    ];
    VerifyReport { seed, suites }
}

/// Entropy continuity: random close density pairs against the Fannes bound.
fn fannes_suite(seed: u64) -> SuiteResult {
    let mut rng = rng_for(seed, 1);
    let inv_e = 1.0 / std::f64::consts::E;
    let mut checked = 0usize;
    for d in [2usize, 3, 4] {
        for _ in 0..2000 {
            let rho = random_density(&mut rng, d);
            let other = random_density(&mut rng, d);
            let dist = (other.matrix() - rho.matrix()).norm();
            let target = rng.gen_range(0.0..inv_e);
            let alpha = if dist > 0.0 { f64::min(1.0, target / dist) } else { 0.0 };
            let sigma = DensityOperator::new(
                rho.matrix().map(|z| z * cr(1.0 - alpha))
                    + other.matrix().map(|z| z * cr(alpha)),
            )
            .expect("blend of densities");
            let eps = (sigma.matrix() - rho.matrix()).norm();
            if eps <= 0.0 || eps > inv_e {
                continue;
            }
            checked += 1;
            let gap = (vn_entropy(&rho) - vn_entropy(&sigma)).abs();
            let bound = fannes_bound(eps, d).expect("eps in range");
            if gap > bound + 1e-12 {
                return SuiteResult {
                    name: "fannes",
                    pass: false,
                    detail: format!("violation at d={d}: |dS|={gap:.6e} > bound={bound:.6e}"),
                };
            }
        }
    }
    SuiteResult {
        name: "fannes",
        pass: true,
        detail: format!("{checked} close pairs within the continuity bound"),
    }
}

/// `t e^{-eps t} <= (1/eps) e^{-a eps t}` fuzz plus the tightness point.
fn texp_suite(seed: u64) -> SuiteResult {
    let mut rng = rng_for(seed, 2);
    for _ in 0..10_000 {
        let t = rng.gen_range(0.0..100.0);
        let eps = rng.gen_range(1e-3..10.0);
        let (lhs, rhs) = texp_bound(t, eps);
        if lhs > rhs * (1.0 + 1e-12) {
            return SuiteResult {
                name: "texp-bound",
                pass: false,
                detail: format!("violated at t={t}, eps={eps}: {lhs} > {rhs}"),
            };
        }
        let t_star = std::f64::consts::E / eps;
        let (l, r) = texp_bound(t_star, eps);
        if (l - r).abs() > 1e-12 * r {
            return SuiteResult {
                name: "texp-bound",
                pass: false,
                detail: format!("tightness broken at eps={eps}: |{l} - {r}|"),
            };
        }
    }
    SuiteResult {
        name: "texp-bound",
        pass: true,
        detail: "10000 samples bounded, equality at t = e/eps".into(),
    }
}

/// Projection properties, parametric in the projector so a deliberately
/// broken implementation is caught (see tests).
fn projection_suite(
    seed: u64,
    project: impl Fn(&CMatrix) -> Result<CMatrix, crate::linalg::LinalgError>,
) -> SuiteResult {
    let mut rng = rng_for(seed, 3);
    for i in 0..1000 {
        let d = rng.gen_range(2..=4);
        let m = random_hermitian(&mut rng, d).scale(1.5);
        let p = match project(&m) {
            Ok(p) => p,
            Err(e) => {
                return SuiteResult {
                    name: "projection",
                    pass: false,
                    detail: format!("projection failed: {e}"),
                }
            }
        };
        // membership
        if DensityOperator::new(p.clone()).is_err() {
            return SuiteResult {
                name: "projection",
                pass: false,
                detail: format!("case {i}: output is not a valid density"),
            };
        }
        // idempotence
        let pp = project(&p).expect("projection of a density");
        if (&pp - &p).norm() > 1e-12 {
            return SuiteResult {
                name: "projection",
                pass: false,
                detail: format!("case {i}: not idempotent"),
            };
        }
        // non-expansiveness toward a random density
        let rho = random_density(&mut rng, d);
        let after = (&p - rho.matrix()).norm();
        let before = (&m - rho.matrix()).norm();
        if after > before + 1e-12 {
            return SuiteResult {
                name: "projection",
                pass: false,
                detail: format!("case {i}: expanded {before:.6e} -> {after:.6e}"),
            };
        }
    }
    SuiteResult {
        name: "projection",
        pass: true,
        detail: "1000 cases: membership, idempotence, non-expansiveness".into(),
    }
}

/// `vec`/`unvec` round trip and the Hilbert-Schmidt isometry.
fn isometry_suite(seed: u64) -> SuiteResult {
    let mut rng = rng_for(seed, 4);
    for _ in 0..1000 {
        let d = rng.gen_range(1..=5);
        let m = random_complex(&mut rng, d);
        let v = vectorize(&m);
        let back = unvectorize(&v, d).expect("matching length");
        if (back - &m).norm() != 0.0 {
            return SuiteResult {
                name: "isometry",
                pass: false,
                detail: "round trip is not exact".into(),
            };
        }
        if (v.norm() - hs_norm(&m)).abs() > 1e-12 {
            return SuiteResult {
                name: "isometry",
                pass: false,
                detail: "norms differ beyond 1e-12".into(),
            };
        }
    }
    SuiteResult {
        name: "isometry",
        pass: true,
        detail: "1000 matrices: exact round trip, norms match".into(),
    }
}

/// Observable random systems always expose at least `d` statistics.
fn min_measurements_suite(seed: u64) -> SuiteResult {
    let mut rng = rng_for(seed, 5);
    let mut observable_count = 0usize;
    for _ in 0..500 {
        let d = rng.gen_range(2..=4);
        let m = rng.gen_range(1..=d * d);
        let h = random_hermitian(&mut rng, d);
        let obs: Vec<CMatrix> = (0..m).map(|_| random_hermitian(&mut rng, d)).collect();
        let sys = QuantumSystem::new(h, obs).expect("random Hermitian system");
        let report = observability(&build_vectorized(&sys));
        if report.observable {
            observable_count += 1;
            if m < d {
                return SuiteResult {
                    name: "min-measurements",
                    pass: false,
                    detail: format!("observable system with m={m} < d={d}"),
                };
            }
        }
    }
    SuiteResult {
        name: "min-measurements",
        pass: true,
        detail: format!("500 systems, {observable_count} observable, all with m >= d"),
    }
}

/// RK4 on the vectorized flow against exact unitary propagation at t = 10.
fn integrator_suite() -> SuiteResult {
    for (name, sys) in [
        ("two-dim", crate::model::two_dim_example()),
        ("laser-atom", crate::model::laser_atom_example()),
    ] {
        let vs = build_vectorized(&sys);
        let rho0 = DensityOperator::from_diagonal(&[0.25, 0.75]).expect("valid diagonal");
        let dt = 1e-3;
        let steps = 10_000;
        let mut x = vectorize(rho0.matrix());
        for i in 0..steps {
            x = match rk4_step(|_, x| &vs.a * x, i as f64 * dt, &x, dt) {
                Ok(x) => x,
                Err(e) => {
                    return SuiteResult {
                        name: "integrator",
                        pass: false,
                        detail: format!("{name}: {e}"),
                    }
                }
            };
        }
        let exact = exact_propagate(&sys, &rho0, 10.0).expect("unitary propagation");
        let err = (unvectorize(&x, 2).expect("length 4") - exact.matrix()).norm();
        if err >= 1e-8 {
            return SuiteResult {
                name: "integrator",
                pass: false,
                detail: format!("{name}: RK4 vs exact error {err:.3e} at t=10"),
            };
        }
    }
    SuiteResult {
        name: "integrator",
        pass: true,
        detail: "both built-ins within 1e-8 of the unitary flow at t=10".into(),
    }
}
