//! Run-configuration files and `key=value` overrides.

use std::fmt;
use std::path::PathBuf;

use nested_ki::experiments::{CentralInit, RunSpec};
use nested_ki::model::{build_preset, Fields, ModelConfig, QubitLayout, TopologyPreset};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const RUN_CONFIG_SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "NESTED_KI_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    PurityDecay,
    GammaSweep,
    NuScaling,
    TopologySweep,
    LambdaSweep,
    ConcurrenceDecay,
    CpTrajectory,
    FarCouplingControl,
    EnvSizeSweep,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::PurityDecay,
        Experiment::GammaSweep,
        Experiment::NuScaling,
        Experiment::TopologySweep,
        Experiment::LambdaSweep,
        Experiment::ConcurrenceDecay,
        Experiment::CpTrajectory,
        Experiment::FarCouplingControl,
        Experiment::EnvSizeSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::PurityDecay => "purity-decay",
            Experiment::GammaSweep => "gamma-sweep",
            Experiment::NuScaling => "nu-scaling",
            Experiment::TopologySweep => "topology-sweep",
            Experiment::LambdaSweep => "lambda-sweep",
            Experiment::ConcurrenceDecay => "concurrence-decay",
            Experiment::CpTrajectory => "cp-trajectory",
            Experiment::FarCouplingControl => "far-coupling-control",
            Experiment::EnvSizeSweep => "env-size-sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(rename = "J")]
    pub j: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// Dephasing central qubit and (1, 0, 1) environments when absent.
    #[serde(default = "Fields::dephasing")]
    pub fields: Fields,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_max: u64,
    /// Explicit record times; exclusive with `record_every`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_times: Option<Vec<u64>>,
    /// Record every this many kicks from 0 through `t_max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<u64>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    /// Chosen from the number of central qubits when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub central_init: Option<CentralInit>,
}

fn default_realizations() -> usize {
    10
}

/// Grids and protocol-specific inputs. Each experiment reads the keys it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_fix: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nus: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_prime: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology_seeds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub far_qubit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub layout: QubitLayout,
    pub topology: TopologyPreset,
    pub parameters: Parameters,
    pub run: RunSection,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Failure to read, override or validate a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<nested_ki::Error> for ConfigError {
    fn from(e: nested_ki::Error) -> Self {
        ConfigError(e.to_string())
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Parses a configuration document, applying overrides first. A metadata
/// sidecar is accepted too: its embedded `run_config` is used.
pub fn load(text: &str, overrides: &[String]) -> Result<RunConfigFile, ConfigError> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid JSON: {e}")))?;
    if let Some(embedded) = doc.get("run_config") {
        doc = embedded.clone();
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: RunConfigFile = serde_json::from_value(doc).map_err(|e| ConfigError(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn leaf_paths(v: &Value, prefix: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
    match v {
        Value::Object(map) if !map.is_empty() => {
            for (k, child) in map {
                prefix.push(k.clone());
                leaf_paths(child, prefix, out);
                prefix.pop();
            }
        }
        _ => out.push(prefix.clone()),
    }
}

/// Applies `path=value`. `path` is dotted (`run.n_realizations`) or a bare
/// key naming exactly one leaf (`gamma`). `value` is parsed as JSON, falling
/// back to a string.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let Some((key, raw)) = spec.split_once('=') else {
        return err(format!("override {spec:?} is not of the form key=value"));
    };
    let key = key.trim();
    if key.is_empty() {
        return err(format!("override {spec:?} has an empty key"));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let path: Vec<String> = if key.contains('.') {
        key.split('.').map(str::to_string).collect()
    } else {
        let mut leaves = Vec::new();
        leaf_paths(doc, &mut Vec::new(), &mut leaves);
        let matches: Vec<Vec<String>> = leaves.into_iter().filter(|p| p.last().map(String::as_str) == Some(key)).collect();
        match matches.len() {
            1 => matches.into_iter().next().unwrap(),
            0 => return err(format!("override key {key:?} matches no setting; use a dotted path")),
            _ => {
                let names: Vec<String> = matches.iter().map(|p| p.join(".")).collect();
                return err(format!("override key {key:?} is ambiguous: {}", names.join(", ")));
            }
        }
    };
    let mut node = doc;
    for (i, seg) in path.iter().enumerate() {
        let Value::Object(map) = node else {
            return err(format!("override path {key:?}: {} is not an object", path[..i].join(".")));
        };
        if i + 1 == path.len() {
            map.insert(seg.clone(), value);
            return Ok(());
        }
        node = map.entry(seg.clone()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

impl RunConfigFile {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != RUN_CONFIG_SCHEMA_VERSION {
            return err(format!(
                "schema_version {} is not supported (expected {RUN_CONFIG_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        QubitLayout::new(self.layout.n_c, self.layout.n_e, self.layout.n_ep)?;
        if self.run.record_times.is_some() && self.run.record_every.is_some() {
            return err("run.record_times and run.record_every are mutually exclusive");
        }
        if self.run.record_every == Some(0) {
            return err("run.record_every must be positive");
        }
        self.model()?;
        self.run_spec()?.validate()?;
        Ok(())
    }

    pub fn model(&self) -> Result<ModelConfig, ConfigError> {
        let p = &self.parameters;
        Ok(build_preset(self.topology, self.layout, p.j, p.lambda, p.gamma, p.fields)?)
    }

    pub fn run_spec(&self) -> Result<RunSpec, ConfigError> {
        let r = &self.run;
        let mut spec = RunSpec::new(self.model()?, r.t_max, r.record_every.unwrap_or(r.t_max.max(1)))
            .with_seed(r.base_seed)
            .with_realizations(r.n_realizations);
        if let Some(times) = &r.record_times {
            spec.record_times = times.clone();
        }
        if let Some(init) = r.central_init {
            spec.central_init = init;
        }
        Ok(spec)
    }

    /// The sweep γ grid, or the scalar γ alone.
    pub fn gammas(&self) -> Vec<f64> {
        self.sweep.gammas.clone().unwrap_or_else(|| vec![self.parameters.gamma])
    }

    pub fn t_fix(&self) -> u64 {
        self.sweep.t_fix.unwrap_or(self.run.t_max)
    }

    pub fn require<'a, T>(&self, value: &'a Option<T>, key: &str) -> Result<&'a T, ConfigError> {
        value
            .as_ref()
            .ok_or_else(|| ConfigError(format!("experiment {} needs sweep.{key}", self.experiment.name())))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = r#"{
        "schema_version": 1,
        "experiment": "purity-decay",
        "layout": {"n_c": 1, "n_e": 3, "n_ep": 4},
        "topology": {"preset": "baseline-chain"},
        "parameters": {"J": 1.0, "lambda": 0.01, "gamma": 0.3},
        "run": {"t_max": 20, "record_every": 10, "n_realizations": 2},
        "sweep": {"gammas": [0.05, 0.5]}
    }"#;

    #[test]
    fn parses_and_builds_spec() {
        let cfg = load(FIG2, &[]).unwrap();
        let spec = cfg.run_spec().unwrap();
        assert_eq!(spec.record_times, vec![0, 10, 20]);
        assert_eq!(spec.n_realizations, 2);
        assert_eq!(spec.central_init, CentralInit::SigmaXPlus);
        assert_eq!(cfg.gammas(), vec![0.05, 0.5]);
        assert_eq!(cfg.parameters.fields, Fields::dephasing());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = FIG2.replace("\"sweep\"", "\"swep\"");
        assert!(load(&text, &[]).unwrap_err().0.contains("unknown field"));
        let text = FIG2.replace("\"gamma\": 0.3", "\"gamma\": 0.3, \"beta\": 1");
        assert!(load(&text, &[]).is_err());
    }

    #[test]
    fn unknown_preset_rejected() {
        let text = FIG2.replace("baseline-chain", "ring");
        assert!(load(&text, &[]).is_err());
    }

    #[test]
    fn memory_limit() {
        let text = FIG2.replace("\"n_ep\": 4", "\"n_ep\": 36");
        assert!(load(&text, &[]).unwrap_err().0.contains("memory limit"));
    }

    #[test]
    fn bare_and_dotted_overrides() {
        let cfg = load(FIG2, &["gamma=0.5".into(), "run.n_realizations=3".into(), "sweep.t_fix=20".into()]).unwrap();
        assert_eq!(cfg.parameters.gamma, 0.5);
        assert_eq!(cfg.run.n_realizations, 3);
        assert_eq!(cfg.t_fix(), 20);
        assert_eq!(cfg.sweep.gammas, Some(vec![0.05, 0.5]));
    }

    #[test]
    fn override_errors() {
        assert!(load(FIG2, &["nonsense=1".into()]).unwrap_err().0.contains("matches no setting"));
        assert!(load(FIG2, &["gamma".into()]).is_err());
        let text = FIG2.replace("\"sweep\": {\"gammas\": [0.05, 0.5]}", "\"sweep\": {\"gammas\": [0.05], \"t_fix\": 20}");
        let mut doc: Value = serde_json::from_str(&text).unwrap();
        doc["run"]["t_fix"] = Value::from(3);
        let e = apply_override(&mut doc, "t_fix=5").unwrap_err();
        assert!(e.0.contains("ambiguous"), "{e}");
    }

    #[test]
    fn override_can_set_array() {
        let cfg = load(FIG2, &["gammas=[0.1,0.2,0.3]".into()]).unwrap();
        assert_eq!(cfg.gammas(), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn record_options_exclusive() {
        let text = FIG2.replace("\"record_every\": 10", "\"record_every\": 10, \"record_times\": [0, 20]");
        assert!(load(&text, &[]).is_err());
    }

    #[test]
    fn sidecar_embedding_accepted() {
        let cfg = load(FIG2, &[]).unwrap();
        let sidecar = serde_json::json!({"run_config": cfg, "other": 1});
        assert_eq!(load(&sidecar.to_string(), &[]).unwrap(), cfg);
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = load(FIG2, &[]).unwrap();
        let again = load(&serde_json::to_string(&cfg).unwrap(), &[]).unwrap();
        assert_eq!(cfg, again);
    }
}
