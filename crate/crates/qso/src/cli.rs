//! Batch front end: declarative experiment configs, built-in examples,
//! trajectory CSV emission, and self-check suites.
//!
//! Experiments are JSON files (complex entries as `[re, im]` pairs, bare
//! numbers for reals); `two-dim` and `laser-atom` are built in and need no
//! file. See the guide for the full schema.

use crate::entropy::EntropyError;
use crate::linalg::{c, CMatrix, C64};
use crate::model::{projector, DensityOperator, ModelError, QuantumSystem};
use crate::observer::{default_gain, observability, with_gain, ObserverDesign, ObserverError};
use crate::sim::{check_envelopes, run, SimConfig, SimError, Trajectory};
use serde::Deserialize;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

mod verify;

pub use verify::{cmd_verify, SuiteResult, VerifyReport, DEFAULT_SEED};

/// Exit codes of the command-line interface.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NOT_OBSERVABLE: i32 = 3;
    pub const UNSTABLE: i32 = 4;
    pub const VERIFY: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("system is not observable: rank {rank} < {needed} (m = {num_meas}, d = {dim})")]
    NotObservable {
        rank: usize,
        needed: usize,
        num_meas: usize,
        dim: usize,
    },
    #[error("unstable observer design: {0}")]
    Unstable(ObserverError),
    #[error("verification failed: {failures} suite(s) red")]
    VerificationFailed { failures: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("simulation error: {0}")]
    Sim(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit_code::CONFIG,
            CliError::NotObservable { .. } => exit_code::NOT_OBSERVABLE,
            CliError::Unstable(_) => exit_code::UNSTABLE,
            CliError::VerificationFailed { .. } => exit_code::VERIFY,
            CliError::Io(_) | CliError::Sim(_) => 1,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e.to_string())
    }
}

impl From<EntropyError> for CliError {
    fn from(e: EntropyError) -> Self {
        CliError::Sim(e.to_string())
    }
}

/// A complex entry: either a bare real or an `[re, im]` pair.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum ComplexEntry {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexEntry {
    fn to_c64(self) -> C64 {
        match self {
            ComplexEntry::Real(re) => c(re, 0.0),
            ComplexEntry::Pair([re, im]) => c(re, im),
        }
    }
}

/// Matrix literal: rows of complex entries.
pub type MatrixSpec = Vec<Vec<ComplexEntry>>;

fn matrix_from_spec(spec: &MatrixSpec, what: &str) -> Result<CMatrix, CliError> {
    let rows = spec.len();
    if rows == 0 {
        return Err(CliError::Config(format!("{what}: empty matrix")));
    }
    let cols = spec[0].len();
    if spec.iter().any(|row| row.len() != cols) {
        return Err(CliError::Config(format!("{what}: ragged rows")));
    }
    let entries: Vec<C64> = spec
        .iter()
        .flat_map(|row| row.iter().map(|e| e.to_c64()))
        .collect();
    if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(CliError::Config(format!("{what}: non-finite entry")));
    }
    Ok(CMatrix::from_row_slice(rows, cols, &entries))
}

/// Hamiltonian: an explicit matrix or Pauli coefficients `(c0, c1, c2, c3)`
/// for a two-level system.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum HamiltonianSpec {
    Pauli { pauli: [f64; 4] },
    Matrix { matrix: MatrixSpec },
}

/// Observable: an explicit matrix or a named basis projector `|k⟩⟨k|`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Projector { projector: usize },
    Matrix { matrix: MatrixSpec },
}

/// Gain: the string `"ct"` for `K = C†`, or an explicit `d²×m` matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Named(String),
    Matrix { matrix: MatrixSpec },
}

impl Default for GainSpec {
    fn default() -> Self {
        GainSpec::Named("ct".into())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub hamiltonian: HamiltonianSpec,
    pub observables: Vec<ObservableSpec>,
}

/// A declarative experiment: system, gain, initial states, integration
/// settings, output path.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Display name; defaults to the file stem or built-in name.
    #[serde(default)]
    pub name: Option<String>,
    pub system: SystemSpec,
    #[serde(default)]
    pub gain: GainSpec,
    pub rho0: MatrixSpec,
    pub rho_hat0: MatrixSpec,
    #[serde(default = "defaults::t_final")]
    pub t_final: f64,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    #[serde(default = "defaults::record_every")]
    pub record_every: usize,
    #[serde(default = "defaults::use_exact_truth")]
    pub use_exact_truth: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

mod defaults {
    pub fn t_final() -> f64 {
        super::SimConfig::default().t_final
    }
    pub fn dt() -> f64 {
        super::SimConfig::default().dt
    }
    pub fn record_every() -> usize {
        super::SimConfig::default().record_every
    }
    pub fn use_exact_truth() -> bool {
        super::SimConfig::default().use_exact_truth
    }
}

/// Parses a config file; JSON errors carry line and column.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if config.name.is_none() {
        config.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned());
    }
    Ok(config)
}

fn diag_spec(entries: &[f64]) -> MatrixSpec {
    let d = entries.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| ComplexEntry::Real(if i == j { entries[i] } else { 0.0 }))
                .collect()
        })
        .collect()
}

/// Built-in experiments runnable without a config file: `two-dim` and
/// `laser-atom`.
pub fn builtin(name: &str) -> Option<ExperimentConfig> {
    let system = match name {
        "two-dim" => SystemSpec {
            hamiltonian: HamiltonianSpec::Pauli {
                pauli: [1.5, 1.0, 0.0, 0.5],
            },
            observables: vec![
                ObservableSpec::Projector { projector: 0 },
                ObservableSpec::Projector { projector: 1 },
            ],
        },
        "laser-atom" => SystemSpec {
            hamiltonian: HamiltonianSpec::Matrix {
                matrix: vec![
                    vec![ComplexEntry::Real(-0.5), ComplexEntry::Real(3.0)],
                    vec![ComplexEntry::Real(3.0), ComplexEntry::Real(0.5)],
                ],
            },
            observables: vec![
                ObservableSpec::Projector { projector: 0 },
                ObservableSpec::Projector { projector: 1 },
            ],
        },
        _ => return None,
    };
    Some(ExperimentConfig {
        name: Some(name.into()),
        system,
        gain: GainSpec::default(),
        rho0: diag_spec(&[0.25, 0.75]),
        rho_hat0: diag_spec(&[0.0, 1.0]),
        t_final: defaults::t_final(),
        dt: defaults::dt(),
        record_every: defaults::record_every(),
        use_exact_truth: defaults::use_exact_truth(),
        out: None,
    })
}

/// Loads `target` as a built-in name first, then as a config file path.
pub fn resolve_target(target: &str) -> Result<ExperimentConfig, CliError> {
    if let Some(config) = builtin(target) {
        return Ok(config);
    }
    load_config(Path::new(target))
}

/// A config elaborated into validated domain objects.
#[derive(Debug)]
pub struct ResolvedExperiment {
    pub name: String,
    pub system: QuantumSystem,
    pub gain: GainSpec,
    pub rho0: DensityOperator,
    pub rho_hat0: DensityOperator,
    pub sim: SimConfig,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn resolve(&self) -> Result<ResolvedExperiment, CliError> {
        let hamiltonian = match &self.system.hamiltonian {
            HamiltonianSpec::Pauli { pauli } => {
                let obs = observables_from_spec(&self.system.observables, 2)?;
                let system = QuantumSystem::from_pauli(*pauli, obs)?;
                return self.finish(system);
            }
            HamiltonianSpec::Matrix { matrix } => matrix_from_spec(matrix, "hamiltonian")?,
        };
        let d = hamiltonian.nrows();
        let obs = observables_from_spec(&self.system.observables, d)?;
        let system = QuantumSystem::new(hamiltonian, obs)?;
        self.finish(system)
    }

    fn finish(&self, system: QuantumSystem) -> Result<ResolvedExperiment, CliError> {
        let rho0 = DensityOperator::new(matrix_from_spec(&self.rho0, "rho0")?)
            .map_err(|e| CliError::Config(format!("rho0: {e}")))?;
        let rho_hat0 = DensityOperator::new(matrix_from_spec(&self.rho_hat0, "rho_hat0")?)
            .map_err(|e| CliError::Config(format!("rho_hat0: {e}")))?;
        if rho0.dim() != system.dim() || rho_hat0.dim() != system.dim() {
            return Err(CliError::Config(format!(
                "initial states must be {0}x{0} to match the system",
                system.dim()
            )));
        }
        let sim = SimConfig {
            t_final: self.t_final,
            dt: self.dt,
            record_every: self.record_every,
            use_exact_truth: self.use_exact_truth,
        };
        sim.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(ResolvedExperiment {
            name: self.name.clone().unwrap_or_else(|| "experiment".into()),
            system,
            gain: self.gain.clone(),
            rho0,
            rho_hat0,
            sim,
            out: self.out.clone(),
        })
    }
}

fn observables_from_spec(specs: &[ObservableSpec], d: usize) -> Result<Vec<CMatrix>, CliError> {
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| match spec {
            ObservableSpec::Projector { projector } => {
                if *projector >= d {
                    Err(CliError::Config(format!(
                        "observable {i}: projector index {projector} out of range for d = {d}"
                    )))
                } else {
                    Ok(projector_matrix(*projector, d))
                }
            }
            ObservableSpec::Matrix { matrix } => matrix_from_spec(matrix, "observable"),
        })
        .collect()
}

fn projector_matrix(k: usize, d: usize) -> CMatrix {
    projector(k, d)
}

fn design_for(resolved: &ResolvedExperiment) -> Result<ObserverDesign, CliError> {
    let vs = crate::model::build_vectorized(&resolved.system);
    let result = match &resolved.gain {
        GainSpec::Named(name) if name == "ct" => default_gain(&vs),
        GainSpec::Named(other) => {
            return Err(CliError::Config(format!(
                "unknown gain \"{other}\" (expected \"ct\" or an explicit matrix)"
            )))
        }
        GainSpec::Matrix { matrix } => {
            let k = matrix_from_spec(matrix, "gain")?;
            with_gain(&vs, k)
        }
    };
    result.map_err(|e| match e {
        ObserverError::UnstableDesign { .. } => CliError::Unstable(e),
        other => CliError::Config(other.to_string()),
    })
}

/// Feasibility report: dimensions, observability, and error-dynamics
/// spectrum of an experiment.
#[derive(Debug)]
pub struct AnalyzeReport {
    pub name: String,
    pub dim: usize,
    pub num_meas: usize,
    pub rank: usize,
    pub observable: bool,
    pub min_measurements_ok: bool,
    /// Design outcome: spectrum, decay rate, amplitude; or the offending
    /// spectrum when unstable.
    pub design: Result<(Vec<C64>, f64, f64), Vec<C64>>,
}

impl fmt::Display for AnalyzeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "experiment: {}", self.name)?;
        writeln!(f, "d = {}, m = {} observables", self.dim, self.num_meas)?;
        writeln!(
            f,
            "rank O(A, C) = {} of {} -> {}",
            self.rank,
            self.dim * self.dim,
            if self.observable {
                "observable"
            } else {
                "NOT observable"
            }
        )?;
        if !self.min_measurements_ok {
            writeln!(
                f,
                "measurement count check: m = {} < d = {} (at least d statistics are required)",
                self.num_meas, self.dim
            )?;
        } else {
            writeln!(f, "measurement count check: m >= d holds")?;
        }
        match &self.design {
            Ok((spectrum, sigma, amplitude)) => {
                writeln!(f, "error-dynamics spectrum:")?;
                for z in spectrum {
                    writeln!(f, "  {:.6} {:+.6}i", z.re, z.im)?;
                }
                writeln!(f, "decay rate sigma = {sigma:.6}")?;
                writeln!(f, "amplitude (unit initial error) M = {amplitude:.6}")
            }
            Err(spectrum) => {
                writeln!(f, "UNSTABLE design; error-dynamics spectrum:")?;
                for z in spectrum {
                    writeln!(f, "  {:.6} {:+.6}i", z.re, z.im)?;
                }
                Ok(())
            }
        }
    }
}

/// Feasibility analysis: observability rank test plus error-dynamics
/// spectrum for the configured gain.
pub fn cmd_analyze(config: &ExperimentConfig) -> Result<AnalyzeReport, CliError> {
    let resolved = config.resolve()?;
    let vs = crate::model::build_vectorized(&resolved.system);
    let report = observability(&vs);
    let design = match design_for(&resolved) {
        Ok(design) => Ok((design.error_spectrum.clone(), design.sigma, design.amplitude_m)),
        Err(CliError::Unstable(ObserverError::UnstableDesign { spectrum, .. })) => Err(spectrum),
        Err(other) => return Err(other),
    };
    Ok(AnalyzeReport {
        name: resolved.name,
        dim: vs.dim,
        num_meas: vs.num_meas,
        rank: report.rank,
        observable: report.observable,
        min_measurements_ok: report.min_measurements_ok,
        design,
    })
}

/// Simulation summary printed after the CSV is written.
#[derive(Debug)]
pub struct SimSummary {
    pub name: String,
    pub out: PathBuf,
    pub records: usize,
    pub final_err: f64,
    pub final_entropy_gap: f64,
    pub final_s_rel: f64,
    pub envelope_pass: bool,
    pub envelope_detail: String,
    pub rel_envelope_available: bool,
    pub amplitude_near_defective: bool,
}

impl fmt::Display for SimSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "experiment: {}", self.name)?;
        writeln!(f, "wrote {} records to {}", self.records, self.out.display())?;
        writeln!(f, "final ||rho_hat - rho|| = {:.3e}", self.final_err)?;
        writeln!(f, "final |S(rho_hat) - S(rho)| = {:.3e}", self.final_entropy_gap)?;
        if self.final_s_rel.is_finite() {
            writeln!(f, "final S(rho_hat || rho) = {:.3e}", self.final_s_rel)?;
        } else {
            writeln!(f, "final S(rho_hat || rho) = inf")?;
        }
        if !self.rel_envelope_available {
            writeln!(
                f,
                "warning: rho0 is singular; relative-entropy envelope unavailable (column is `na`)"
            )?;
        }
        if self.amplitude_near_defective {
            writeln!(
                f,
                "warning: error dynamics are near-defective; amplitude bound taken from a sampled supremum"
            )?;
        }
        writeln!(
            f,
            "envelope check: {} ({})",
            if self.envelope_pass { "pass" } else { "FAIL" },
            self.envelope_detail
        )
    }
}

/// Overrides for `simulate` command-line flags.
#[derive(Debug, Default, Clone)]
pub struct SimulateOverrides {
    pub out: Option<PathBuf>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
}

/// Runs the experiment, writes the trajectory CSV, and summarizes.
pub fn cmd_simulate(
    config: &ExperimentConfig,
    overrides: &SimulateOverrides,
) -> Result<(SimSummary, Trajectory), CliError> {
    let resolved = config.resolve()?;
    let vs = crate::model::build_vectorized(&resolved.system);
    let report = observability(&vs);
    if !report.observable {
        return Err(CliError::NotObservable {
            rank: report.rank,
            needed: vs.dim * vs.dim,
            num_meas: vs.num_meas,
            dim: vs.dim,
        });
    }
    let design = design_for(&resolved)?;
    let mut sim = resolved.sim;
    if let Some(dt) = overrides.dt {
        sim.dt = dt;
    }
    if let Some(t_final) = overrides.t_final {
        sim.t_final = t_final;
    }
    sim.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let traj = run(&resolved.system, &design, &resolved.rho0, &resolved.rho_hat0, &sim)?;

    let out = overrides
        .out
        .clone()
        .or(resolved.out.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", resolved.name)));
    let file = std::fs::File::create(&out)?;
    let mut writer = std::io::BufWriter::new(file);
    write_csv(&traj, &mut writer)?;
    writer.flush()?;

    let envelope_report = check_envelopes(&traj);
    let last = traj.len() - 1;
    let summary = SimSummary {
        name: resolved.name,
        out,
        records: traj.len(),
        final_err: traj.err_norm[last],
        final_entropy_gap: (traj.s_hat[last] - traj.s_true[last]).abs(),
        final_s_rel: traj.s_rel[last],
        envelope_pass: envelope_report.pass,
        envelope_detail: match envelope_report.first_violation {
            None => format!("{} applicable records checked", envelope_report.checked),
            Some(v) => format!(
                "first violation at t = {} ({:?}: {:.3e} > {:.3e})",
                v.time, v.kind, v.value, v.bound
            ),
        },
        rel_envelope_available: traj.env_rel.is_some(),
        amplitude_near_defective: traj.amplitude_near_defective,
    };
    Ok((summary, traj))
}

/// Writes the trajectory in the fixed CSV schema:
/// `t,err_norm,s_true,s_hat,s_rel,env_err,env_entropy,env_rel,envelopes_applicable`.
///
/// Infinite relative entropies are the literal token `inf`; when the
/// relative-entropy envelope is unavailable its column holds `na`;
/// `envelopes_applicable` is `1` from the envelope onset time on.
pub fn write_csv<W: Write>(traj: &Trajectory, w: &mut W) -> std::io::Result<()> {
    writeln!(
        w,
        "t,err_norm,s_true,s_hat,s_rel,env_err,env_entropy,env_rel,envelopes_applicable"
    )?;
    for i in 0..traj.len() {
        let s_rel = if traj.s_rel[i].is_finite() {
            format!("{}", traj.s_rel[i])
        } else {
            "inf".to_string()
        };
        let env_rel = match &traj.env_rel {
            Some(col) => format!("{}", col[i]),
            None => "na".to_string(),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            traj.times[i],
            traj.err_norm[i],
            traj.s_true[i],
            traj.s_hat[i],
            s_rel,
            traj.env_err[i],
            traj.env_entropy[i],
            env_rel,
            if traj.applicable(i) { 1 } else { 0 },
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::ConvergenceEnvelope;
    use crate::model::{laser_atom_example, two_dim_example};

    #[test]
    fn builtins_resolve() {
        for name in ["two-dim", "laser-atom"] {
            let config = builtin(name).unwrap();
            let resolved = config.resolve().unwrap();
            assert_eq!(resolved.system.dim(), 2);
            assert_eq!(resolved.system.num_observables(), 2);
        }
        assert!(builtin("unknown").is_none());
    }

    #[test]
    fn builtin_systems_match_handwritten() {
        let two = builtin("two-dim").unwrap().resolve().unwrap();
        assert_eq!(two.system.hamiltonian(), two_dim_example().hamiltonian());
        let laser = builtin("laser-atom").unwrap().resolve().unwrap();
        assert_eq!(
            laser.system.hamiltonian(),
            laser_atom_example().hamiltonian()
        );
    }

    #[test]
    fn analyze_two_dim() {
        let report = cmd_analyze(&builtin("two-dim").unwrap()).unwrap();
        assert_eq!(report.rank, 4);
        assert!(report.observable);
        let (spectrum, sigma, _) = report.design.as_ref().unwrap();
        assert_eq!(spectrum.len(), 4);
        assert!((sigma - 0.2068).abs() < 1e-3);
        let text = report.to_string();
        assert!(text.contains("observable"));
        assert!(text.contains("sigma"));
    }

    #[test]
    fn analyze_flags_insufficient_measurements() {
        let mut config = builtin("two-dim").unwrap();
        config.system.observables.truncate(1);
        let report = cmd_analyze(&config).unwrap();
        assert!(!report.observable);
        assert!(!report.min_measurements_ok);
        assert!(report.to_string().contains("NOT observable"));
    }

    #[test]
    fn simulate_rejects_unobservable_config() {
        let mut config = builtin("two-dim").unwrap();
        config.system.observables.truncate(1);
        let err = cmd_simulate(&config, &SimulateOverrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), exit_code::NOT_OBSERVABLE);
    }

    #[test]
    fn analyze_surfaces_unstable_design_in_report() {
        let mut config = builtin("two-dim").unwrap();
        config.gain = GainSpec::Matrix {
            matrix: vec![vec![ComplexEntry::Real(0.0); 2]; 4],
        };
        let report = cmd_analyze(&config).unwrap();
        assert!(report.design.is_err());
        let text = report.to_string();
        assert!(text.contains("UNSTABLE"), "{text}");
    }

    #[test]
    fn simulate_rejects_unstable_gain() {
        let mut config = builtin("two-dim").unwrap();
        config.gain = GainSpec::Matrix {
            matrix: vec![vec![ComplexEntry::Real(0.0); 2]; 4],
        };
        let err = cmd_simulate(&config, &SimulateOverrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), exit_code::UNSTABLE);
    }

    #[test]
    fn rectangular_matrices_are_config_errors_not_panics() {
        let mut config = builtin("two-dim").unwrap();
        config.rho0 = vec![
            vec![ComplexEntry::Real(0.25), ComplexEntry::Real(0.0), ComplexEntry::Real(0.0)],
            vec![ComplexEntry::Real(0.0), ComplexEntry::Real(0.75), ComplexEntry::Real(0.0)],
        ];
        let err = config.resolve().unwrap_err();
        assert_eq!(err.exit_code(), exit_code::CONFIG);

        let mut config = builtin("laser-atom").unwrap();
        config.system.hamiltonian = HamiltonianSpec::Matrix {
            matrix: vec![
                vec![ComplexEntry::Real(1.0), ComplexEntry::Real(0.0)],
                vec![ComplexEntry::Real(0.0), ComplexEntry::Real(1.0)],
                vec![ComplexEntry::Real(0.0), ComplexEntry::Real(0.0)],
            ],
        };
        let err = config.resolve().unwrap_err();
        assert_eq!(err.exit_code(), exit_code::CONFIG);
    }

    #[test]
    fn config_errors_have_exit_code_2() {
        let mut config = builtin("two-dim").unwrap();
        config.rho0 = vec![vec![ComplexEntry::Real(0.5)]; 1];
        let err = config.resolve().unwrap_err();
        assert_eq!(err.exit_code(), exit_code::CONFIG);

        let mut config = builtin("two-dim").unwrap();
        config.gain = GainSpec::Named("kalman".into());
        let err = cmd_analyze(&config).unwrap_err();
        assert_eq!(err.exit_code(), exit_code::CONFIG);
    }

    #[test]
    fn csv_schema_is_exact() {
        let envelope = ConvergenceEnvelope {
            amplitude_m: 1.0,
            sigma: 1.0,
            dim: 2,
            a: crate::entropy::DECAY_FRACTION,
            k_const: 1.0,
            t_start: 0.5,
            d_const: None,
        };
        let traj = Trajectory {
            times: vec![0.0, 1.0],
            err_norm: vec![0.5, 0.25],
            s_true: vec![0.5623, 0.5623],
            s_hat: vec![0.0, 0.5],
            s_rel: vec![f64::INFINITY, 0.125],
            env_err: vec![1.0, 0.3678794411714423],
            env_entropy: vec![2.0, 1.0],
            env_rel: None,
            envelope,
            amplitude_near_defective: false,
        };
        let mut buf = Vec::new();
        write_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,err_norm,s_true,s_hat,s_rel,env_err,env_entropy,env_rel,envelopes_applicable"
        );
        assert_eq!(lines.next().unwrap(), "0,0.5,0.5623,0,inf,1,2,na,0");
        assert_eq!(
            lines.next().unwrap(),
            "1,0.25,0.5623,0.5,0.125,0.3678794411714423,1,na,1"
        );
        assert!(text.ends_with('\n'));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn json_errors_carry_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.json");
        std::fs::write(&path, "{\n  \"system\": [\n}").unwrap();
        let err = load_config(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "missing position info: {msg}");
        assert_eq!(err.exit_code(), exit_code::CONFIG);
    }

    #[test]
    fn json_roundtrip_of_builtin_shape() {
        let text = r#"{
            "name": "custom",
            "system": {
                "hamiltonian": {"pauli": [1.5, 1.0, 0.0, 0.5]},
                "observables": [{"projector": 0}, {"projector": 1}]
            },
            "gain": "ct",
            "rho0": [[0.25, 0], [0, 0.75]],
            "rho_hat0": [[0, 0], [0, 1]],
            "t_final": 5.0,
            "dt": 0.001
        }"#;
        let config: ExperimentConfig = serde_json::from_str(text).unwrap();
        let resolved = config.resolve().unwrap();
        assert_eq!(resolved.sim.t_final, 5.0);
        assert_eq!(resolved.name, "custom");

        let complex_text = r#"{
            "system": {
                "hamiltonian": {"matrix": [[-0.5, [0, 3]], [[0, -3], 0.5]]},
                "observables": [{"projector": 0}, {"projector": 1}]
            },
            "rho0": [[0.25, 0], [0, 0.75]],
            "rho_hat0": [[0, 0], [0, 1]]
        }"#;
        let config: ExperimentConfig = serde_json::from_str(complex_text).unwrap();
        assert!(config.resolve().is_ok());
    }

    #[test]
    fn simulate_builtin_short_run() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("short.csv");
        let overrides = SimulateOverrides {
            out: Some(out.clone()),
            dt: None,
            t_final: Some(2.0),
        };
        let (summary, traj) = cmd_simulate(&builtin("two-dim").unwrap(), &overrides).unwrap();
        assert!(summary.envelope_pass);
        assert_eq!(summary.records, traj.len());
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().count(), traj.len() + 1);
        // every row keeps entropies within [0, ln d] and errors nonnegative
        for line in text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 9);
            let err: f64 = cols[1].parse().unwrap();
            let s_true: f64 = cols[2].parse().unwrap();
            let s_hat: f64 = cols[3].parse().unwrap();
            assert!(err >= 0.0);
            for s in [s_true, s_hat] {
                assert!((-1e-9..=2f64.ln() + 1e-9).contains(&s));
            }
        }
    }

    #[test]
    fn simulate_zero_initial_error_keeps_error_columns_at_zero() {
        let mut config = builtin("two-dim").unwrap();
        config.rho_hat0 = config.rho0.clone();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("zero.csv");
        let overrides = SimulateOverrides {
            out: Some(out.clone()),
            dt: None,
            t_final: Some(2.0),
        };
        let (summary, traj) = cmd_simulate(&config, &overrides).unwrap();
        assert!(summary.final_err < 1e-9);
        assert!(summary.final_entropy_gap < 1e-9);
        assert!(summary.envelope_pass);
        for i in 0..traj.len() {
            assert!(traj.err_norm[i] < 1e-9);
        }
    }

    #[test]
    fn dt_override_changes_step_count() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("coarse.csv");
        let overrides = SimulateOverrides {
            out: Some(out.clone()),
            dt: Some(0.01),
            t_final: Some(1.0),
        };
        let (summary, _) = cmd_simulate(&builtin("two-dim").unwrap(), &overrides).unwrap();
        // 100 steps recorded every 10, plus t = 0
        assert_eq!(summary.records, 11);
    }

    #[test]
    fn simulate_with_singular_rho0_marks_env_rel_na() {
        let mut config = builtin("laser-atom").unwrap();
        config.rho0 = diag_spec(&[1.0, 0.0]);
        config.rho_hat0 = diag_spec(&[0.25, 0.75]);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("singular.csv");
        let overrides = SimulateOverrides {
            out: Some(out.clone()),
            dt: None,
            t_final: Some(1.0),
        };
        let (summary, _) = cmd_simulate(&config, &overrides).unwrap();
        assert!(!summary.rel_envelope_available);
        let text = std::fs::read_to_string(&out).unwrap();
        let first_row = text.lines().nth(1).unwrap();
        let cols: Vec<&str> = first_row.split(',').collect();
        // truth is rank-deficient for all time: S(rho_hat || rho) diverges
        assert_eq!(cols[4], "inf");
        assert_eq!(cols[7], "na");
        for line in text.lines().skip(1) {
            assert_eq!(line.split(',').nth(7).unwrap(), "na");
        }
    }

    #[test]
    fn laser_atom_simulation_summary() {
        let dir = tempfile::tempdir().unwrap();
        let overrides = SimulateOverrides {
            out: Some(dir.path().join("laser.csv")),
            ..Default::default()
        };
        let (summary, traj) = cmd_simulate(&builtin("laser-atom").unwrap(), &overrides).unwrap();
        // converges at its modest rate and satisfies the envelopes throughout
        assert!(summary.envelope_pass);
        assert!(summary.final_err < 2e-2);
        assert!(traj.err_norm[0] > 10.0 * summary.final_err);
    }
}
