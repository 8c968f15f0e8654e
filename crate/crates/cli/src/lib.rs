//! Experiment dispatch and output writing for the `nested-ki` binary.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use nested_ki::experiments::{self, SweepResult};
use nested_ki::Error;
use serde_json::{json, Value};

use config::{ConfigError, Experiment, RunConfigFile};

/// Process exit status for each failure class.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or invalid configuration: exit 1.
    Config(String),
    /// Numerical failure during a run: exit 2.
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalFailure(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

/// A finished run: the main table plus any extra plot-ready files.
pub struct RunOutput {
    pub result: SweepResult,
    pub extra_files: Vec<(String, String)>,
}

/// Runs the configured experiment.
pub fn execute(cfg: &RunConfigFile) -> Result<RunOutput, Failure> {
    let spec = cfg.run_spec()?;
    let s = &cfg.sweep;
    let mut extra_files = Vec::new();
    let result = match cfg.experiment {
        Experiment::PurityDecay => experiments::purity_decay(&spec, &cfg.gammas())?,
        Experiment::GammaSweep => experiments::gamma_sweep(&spec, cfg.t_fix(), &cfg.gammas())?,
        Experiment::NuScaling => experiments::nu_scaling(
            &spec,
            cfg.require(&s.nus, "nus")?,
            s.gamma_prime.unwrap_or(cfg.parameters.gamma),
            s.topology_seed.unwrap_or(0),
        )?,
        Experiment::TopologySweep => experiments::topology_gamma_sweep(
            &spec,
            *cfg.require(&s.nu, "nu")?,
            cfg.require(&s.topology_seeds, "topology_seeds")?,
            &cfg.gammas(),
            cfg.t_fix(),
        )?,
        Experiment::LambdaSweep => {
            experiments::lambda_sweep(&spec, cfg.require(&s.lambdas, "lambdas")?, &cfg.gammas(), cfg.t_fix(), s.fit_range)?
                .result
        }
        Experiment::ConcurrenceDecay => experiments::concurrence_decay(&spec, &cfg.gammas())?.result,
        Experiment::CpTrajectory => {
            let out = experiments::cp_trajectory(&spec, &cfg.gammas(), s.curve_samples.unwrap_or(201))?;
            extra_files.push(("reference.csv".to_string(), out.reference_csv()));
            out.result
        }
        Experiment::FarCouplingControl => {
            experiments::far_coupling_control(&spec, s.epsilon_factor.unwrap_or(0.01), s.far_qubit)?.result
        }
        Experiment::EnvSizeSweep => {
            experiments::env_size_sweep(&spec, cfg.require(&s.sizes, "sizes")?, cfg.t_fix(), &cfg.gammas())?
        }
    };
    result.check_bounds()?;
    Ok(RunOutput { result, extra_files })
}

/// Sidecar document: result metadata plus the effective run configuration
/// and the overrides that produced it.
pub fn sidecar(cfg: &RunConfigFile, overrides: &[String], out: &RunOutput) -> Value {
    let mut meta = out.result.metadata_json();
    meta["run_config"] = json!(cfg);
    meta["overrides"] = json!(overrides);
    meta["generator"] = json!(concat!("nested-ki ", env!("CARGO_PKG_VERSION")));
    meta
}

/// Writes `<dir>/<experiment>.csv`, `<dir>/<experiment>.meta.json` and any
/// extra files as `<dir>/<experiment>.<suffix>`. Returns the written paths.
pub fn write_outputs(dir: &Path, cfg: &RunConfigFile, overrides: &[String], out: &RunOutput) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let stem = cfg.experiment.name();
    let mut written = Vec::new();
    let mut write = |name: String, body: &str| -> std::io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    write(format!("{stem}.csv"), &out.result.to_csv())?;
    let meta = serde_json::to_string_pretty(&sidecar(cfg, overrides, out)).expect("metadata serializes");
    write(format!("{stem}.meta.json"), &meta)?;
    for (suffix, body) in &out.extra_files {
        write(format!("{stem}.{suffix}"), body)?;
    }
    Ok(written)
}

/// Lines printed by `list-presets`.
pub fn preset_listing() -> Vec<String> {
    nested_ki::model::preset_catalog()
        .into_iter()
        .map(|(name, figure, description)| format!("{name} ({figure}): {description}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(experiment: &str, sweep: &str, layout: &str, topology: &str) -> RunConfigFile {
        let text = format!(
            r#"{{"schema_version": 1, "experiment": "{experiment}", "layout": {layout},
                "topology": {topology}, "parameters": {{"J": 1.0, "lambda": 0.05, "gamma": 0.3}},
                "run": {{"t_max": 10, "record_every": 5, "n_realizations": 2}}, "sweep": {sweep}}}"#
        );
        config::load(&text, &[]).unwrap()
    }

    const SMALL: &str = r#"{"n_c": 1, "n_e": 2, "n_ep": 3}"#;
    const PAIR: &str = r#"{"n_c": 2, "n_e": 2, "n_ep": 3}"#;
    const BASE: &str = r#"{"preset": "baseline-chain"}"#;

    #[test]
    fn every_experiment_dispatches() {
        let cases = [
            ("purity-decay", "{}", SMALL, BASE),
            ("gamma-sweep", r#"{"gammas": [0.1, 0.2]}"#, SMALL, BASE),
            ("nu-scaling", r#"{"nus": [1, 2]}"#, SMALL, BASE),
            ("topology-sweep", r#"{"nu": 2, "topology_seeds": [1, 2], "gammas": [0.3]}"#, SMALL, BASE),
            ("lambda-sweep", r#"{"lambdas": [0.01, 0.02, 0.04]}"#, SMALL, BASE),
            ("concurrence-decay", "{}", PAIR, r#"{"preset": "spectator"}"#),
            ("cp-trajectory", r#"{"curve_samples": 5}"#, PAIR, r#"{"preset": "spectator"}"#),
            ("far-coupling-control", "{}", SMALL, BASE),
            ("env-size-sweep", r#"{"sizes": [[1, 1], [2, 2]]}"#, SMALL, BASE),
        ];
        for (name, sweep, layout, topology) in cases {
            let c = cfg(name, sweep, layout, topology);
            let out = execute(&c).unwrap_or_else(|e| panic!("{name}: {}", e.message()));
            assert!(!out.result.rows.is_empty(), "{name}");
            assert_eq!(out.result.metadata.experiment, name);
        }
    }

    #[test]
    fn missing_sweep_key_is_config_error() {
        let c = cfg("nu-scaling", "{}", SMALL, BASE);
        let e = execute(&c).err().unwrap();
        assert_eq!(e.exit_code(), 1);
        assert!(e.message().contains("sweep.nus"));
    }

    #[test]
    fn numerical_failures_exit_two() {
        let f: Failure = Error::NumericalFailure("x".into()).into();
        assert_eq!(f.exit_code(), 2);
        let f: Failure = Error::TooLarge { n: 40, limit: 24 }.into();
        assert_eq!(f.exit_code(), 1);
    }

    #[test]
    fn listing_names_figures() {
        let l = preset_listing();
        assert!(l.iter().any(|s| s.starts_with("baseline-chain (Fig. 2)")));
        assert!(l.iter().any(|s| s.starts_with("spectator (Fig. 10)")));
    }
}
