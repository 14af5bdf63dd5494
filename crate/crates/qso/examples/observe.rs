//! Minimal end-to-end pipeline: feasibility check, observer design,
//! co-simulation, and entropy readout.
//!
//! Run with `cargo run --example observe`.

use qso::model::two_dim_example;
use qso::{
    build_vectorized, check_envelopes, default_gain, observability, run, DensityOperator,
    SimConfig,
};

fn main() {
    let sys = two_dim_example();
    let vs = build_vectorized(&sys);

    let report = observability(&vs);
    println!(
        "observability: rank {} of {} -> {}",
        report.rank,
        vs.dim * vs.dim,
        if report.observable { "ok" } else { "infeasible" }
    );
    if !report.observable {
        return;
    }

    let design = default_gain(&vs).expect("adjoint gain stabilizes this system");
    println!("decay rate sigma = {:.4}", design.sigma);

    let rho0 = DensityOperator::from_diagonal(&[0.25, 0.75]).unwrap();
    let rho_hat0 = DensityOperator::from_diagonal(&[0.0, 1.0]).unwrap();
    let cfg = SimConfig {
        t_final: 30.0,
        ..SimConfig::default()
    };
    let traj = run(&sys, &design, &rho0, &rho_hat0, &cfg).unwrap();

    let last = traj.len() - 1;
    println!("t = {:>5.1}: error {:.3e}", traj.times[0], traj.err_norm[0]);
    println!("t = {:>5.1}: error {:.3e}", traj.times[last], traj.err_norm[last]);
    println!(
        "entropy: true {:.6}, estimate {:.6}, relative entropy {:.3e}",
        traj.s_true[last], traj.s_hat[last], traj.s_rel[last]
    );
    let envelopes = check_envelopes(&traj);
    println!(
        "envelope check: {} ({} applicable points)",
        if envelopes.pass { "pass" } else { "FAIL" },
        envelopes.checked
    );
}
