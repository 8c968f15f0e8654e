//! Decoherence protocols: purity decay, coupling sweeps, connection-count
//! scaling, concurrence decay and concurrence–purity trajectories.
//!
//! Realization `r` of every protocol draws its environment states from the
//! stream `(base_seed, r)`: the near environment first, then the far one. The
//! stream does not depend on the parameter point, so all points of a sweep
//! see the same environment samples.

use std::fmt::Write as _;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::engine::{self, haar_random_state, product_state, CompiledModel, StateVector};
use crate::error::{Error, Result};
use crate::measures::{self, CPPoint, DensityMatrix, UnitalRegion};
use crate::model::{self, build_preset, ModelConfig, QubitLayout, TopologyPreset};
use crate::rng;

pub const RESULT_SCHEMA_VERSION: u32 = 1;

/// Sudden death is declared at the first recorded time with mean concurrence
/// below this.
pub const SUDDEN_DEATH_THRESHOLD: f64 = 1e-12;

/// Tolerance in concurrence for the unital-region membership check.
pub const UNITAL_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CentralInit {
    /// (|0⟩ + |1⟩)/√2 on a single central qubit.
    SigmaXPlus,
    /// (|00⟩ + |11⟩)/√2 on two central qubits.
    BellPhiPlus,
}

impl CentralInit {
    pub fn for_qubits(n_c: usize) -> Self {
        if n_c == 2 {
            CentralInit::BellPhiPlus
        } else {
            CentralInit::SigmaXPlus
        }
    }

    fn n_qubits(self) -> usize {
        match self {
            CentralInit::SigmaXPlus => 1,
            CentralInit::BellPhiPlus => 2,
        }
    }

    fn state(self) -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = match self {
            CentralInit::SigmaXPlus => vec![h, h],
            CentralInit::BellPhiPlus => vec![h, 0.0, 0.0, h],
        };
        StateVector::from_amplitudes(amps.into_iter().map(|a| num_complex::Complex64::new(a, 0.0)).collect())
            .expect("power of two")
    }
}

/// One experiment run: model, time grid, seeds and realization count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub config: ModelConfig,
    pub t_max: u64,
    pub record_times: Vec<u64>,
    pub base_seed: u64,
    pub n_realizations: usize,
    pub central_init: CentralInit,
}

impl RunSpec {
    /// Records `0..=t_max` every `stride` kicks, 10 realizations, seed 0.
    pub fn new(config: ModelConfig, t_max: u64, stride: u64) -> Self {
        let stride = stride.max(1);
        let mut record_times: Vec<u64> = (0..=t_max).step_by(stride as usize).collect();
        if record_times.last() != Some(&t_max) {
            record_times.push(t_max);
        }
        let central_init = CentralInit::for_qubits(config.layout.n_c);
        RunSpec { config, t_max, record_times, base_seed: 0, n_realizations: 10, central_init }
    }

    pub fn with_seed(mut self, base_seed: u64) -> Self {
        self.base_seed = base_seed;
        self
    }

    pub fn with_realizations(mut self, n: usize) -> Self {
        self.n_realizations = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(Error::InvalidRun("n_realizations must be at least 1".into()));
        }
        if self.record_times.is_empty() {
            return Err(Error::InvalidRun("record_times is empty".into()));
        }
        if let Some(t) = self.record_times.iter().find(|&&t| t > self.t_max) {
            return Err(Error::InvalidRun(format!("record time {t} exceeds t_max {}", self.t_max)));
        }
        if self.central_init.n_qubits() != self.config.layout.n_c {
            return Err(Error::InvalidRun(format!(
                "central_init {:?} needs {} central qubits, layout has {}",
                self.central_init,
                self.central_init.n_qubits(),
                self.config.layout.n_c
            )));
        }
        let v = model::validate_signed(&self.config);
        if !v.is_empty() {
            return Err(Error::InvalidConfig(v));
        }
        Ok(())
    }

    fn times(&self) -> Vec<u64> {
        let mut t = self.record_times.clone();
        t.sort_unstable();
        t.dedup();
        t
    }

    fn require_time(&self, t_fix: u64) -> Result<()> {
        if self.record_times.contains(&t_fix) {
            Ok(())
        } else {
            Err(Error::InvalidRun(format!("t_fix = {t_fix} is not one of record_times")))
        }
    }

    /// Seed of the stream used by realization `r`.
    pub fn realization_seed(&self, r: usize) -> u64 {
        rng::stream_seed(self.base_seed, &[r as u64])
    }
}

/// Reduced central states of one trajectory at each of `times` (sorted).
pub fn trajectory(
    model: &CompiledModel,
    layout: &QubitLayout,
    init: CentralInit,
    times: &[u64],
    seed: u64,
) -> Result<Vec<DensityMatrix>> {
    let mut rng = rng::seeded(seed);
    let near = haar_random_state(layout.n_e, &mut rng);
    let mut parts = vec![init.state(), near];
    if model.n_qubits() > layout.n_c + layout.n_e {
        parts.push(haar_random_state(layout.n_ep, &mut rng));
    }
    let mut psi = product_state(&parts);
    if psi.n_qubits() != model.n_qubits() {
        return Err(Error::DimensionMismatch { expected: model.n_qubits(), got: psi.n_qubits() });
    }
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0;
    for &target in times {
        engine::evolve(&mut psi, model, target - t)?;
        t = target;
        out.push(measures::reduced_density(&psi, layout.n_c)?);
    }
    Ok(out)
}

/// The model of `config` with the far environment removed. Fails when the
/// far environment is coupled to the rest.
pub fn without_far(config: &ModelConfig) -> Result<CompiledModel> {
    let coupled = (config.gamma != 0.0 && !config.eep_links.is_empty())
        || config.cep_links.iter().any(|w| w.strength != 0.0);
    if coupled {
        return Err(Error::InvalidRun("far environment is coupled (gamma or cep_links nonzero)".into()));
    }
    engine::compile_signed(config)?.truncated(config.layout.n_c + config.layout.n_e)
}

/// A row of a sweep table. `realization` is `None` on mean rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub params: Vec<f64>,
    pub t: u64,
    pub realization: Option<usize>,
    pub n_realizations: usize,
    pub seed: u64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub schema_version: u32,
    pub experiment: String,
    pub config: ModelConfig,
    pub config_hash: String,
    pub base_seed: u64,
    pub n_realizations: usize,
    pub realization_seeds: Vec<u64>,
    pub t_max: u64,
    pub record_times: Vec<u64>,
    pub central_init: CentralInit,
    pub wall_clock_seconds: f64,
    pub extra: Map<String, Value>,
}

/// Table of observables over parameter points, times and realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param_names: Vec<String>,
    pub value_names: Vec<String>,
    pub rows: Vec<Row>,
    pub metadata: Metadata,
}

/// Observable-column formatting: 17 significant digits.
fn fmt_value(x: f64) -> String {
    format!("{x:.16e}")
}

impl SweepResult {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.value_names.iter().position(|n| n == name)
    }

    pub fn mean_rows(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| r.realization.is_none())
    }

    /// Mean `(t, value)` series of one parameter point.
    pub fn series(&self, params: &[f64], name: &str) -> Vec<(u64, f64)> {
        let Some(c) = self.column(name) else { return Vec::new() };
        self.mean_rows().filter(|r| r.params == params).map(|r| (r.t, r.values[c])).collect()
    }

    pub fn mean_value(&self, params: &[f64], t: u64, name: &str) -> Option<f64> {
        self.series(params, name).into_iter().find(|(tt, _)| *tt == t).map(|(_, v)| v)
    }

    /// Per-realization values of one column at `(params, t)`.
    pub fn realization_values(&self, params: &[f64], t: u64, name: &str) -> Vec<f64> {
        let Some(c) = self.column(name) else { return Vec::new() };
        self.rows
            .iter()
            .filter(|r| r.realization.is_some() && r.params == params && r.t == t)
            .map(|r| r.values[c])
            .collect()
    }

    /// Distinct parameter points in row order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for r in &self.rows {
            if out.last() != Some(&r.params) && !out.contains(&r.params) {
                out.push(r.params.clone());
            }
        }
        out
    }

    /// CSV with a header row. Parameters use the shortest round-trip
    /// representation, observables 17 significant digits; mean rows carry
    /// `mean` in the realization column.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self
            .param_names
            .iter()
            .map(String::as_str)
            .chain(["t", "realization", "n_realizations", "seed"])
            .chain(self.value_names.iter().map(String::as_str))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for r in &self.rows {
            let mut fields: Vec<String> = r.params.iter().map(|p| format!("{p}")).collect();
            fields.push(r.t.to_string());
            fields.push(r.realization.map_or_else(|| "mean".to_string(), |i| i.to_string()));
            fields.push(r.n_realizations.to_string());
            fields.push(r.seed.to_string());
            fields.extend(r.values.iter().map(|&v| fmt_value(v)));
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    pub fn metadata_json(&self) -> Value {
        let mut v = serde_json::to_value(&self.metadata).expect("metadata serializes");
        v["csv_sha256"] = json!(sha256_hex(self.to_csv().as_bytes()));
        v["param_names"] = json!(self.param_names);
        v["value_names"] = json!(self.value_names);
        v
    }

    /// Checks every row against the purity and concurrence bounds.
    pub fn check_bounds(&self) -> Result<()> {
        let dim = (1usize << self.metadata.config.layout.n_c) as f64;
        let tol = 1e-10;
        let pc = self.column("purity");
        let cc = self.column("concurrence");
        for r in &self.rows {
            if let Some(c) = pc {
                let p = r.values[c];
                if !(p >= 1.0 / dim - tol && p <= 1.0 + tol) {
                    return Err(Error::NumericalFailure(format!("purity {p} out of bounds at t = {}", r.t)));
                }
            }
            if let Some(c) = cc {
                let x = r.values[c];
                if !(-tol..=1.0 + tol).contains(&x) {
                    return Err(Error::NumericalFailure(format!("concurrence {x} out of bounds at t = {}", r.t)));
                }
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn config_hash(config: &ModelConfig) -> String {
    sha256_hex(serde_json::to_string(config).expect("config serializes").as_bytes())
}

/// One parameter point of a sweep.
struct Point {
    params: Vec<f64>,
    config: ModelConfig,
}

impl Point {
    fn new(params: Vec<f64>, config: ModelConfig) -> Self {
        Point { params, config }
    }
}

fn value_names(n_c: usize) -> Vec<String> {
    let mut v = vec!["purity".to_string()];
    if n_c == 2 {
        v.push("concurrence".to_string());
    }
    v
}

fn observe(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let mut v = vec![measures::purity(rho)];
    if rho.dim() == 4 {
        v.push(measures::concurrence(rho)?);
    }
    Ok(v)
}

#[cfg(feature = "parallel")]
fn map_jobs<T: Send, F: Fn(usize) -> Result<T> + Sync + Send>(n: usize, f: F) -> Result<Vec<T>> {
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_jobs<T, F: Fn(usize) -> Result<T>>(n: usize, f: F) -> Result<Vec<T>> {
    (0..n).map(f).collect()
}

/// `std::time::Instant` panics on wasm32-unknown-unknown; there the wall
/// clock reads 0.
struct Stopwatch(#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
        0.0
    }
}

/// Runs every realization of every point and assembles the table. Rows are
/// ordered by point, then realization (mean rows last), then time.
fn run_points(
    spec: &RunSpec,
    experiment: &str,
    param_names: &[&str],
    points: Vec<Point>,
    times: &[u64],
) -> Result<SweepResult> {
    spec.validate()?;
    let started = Stopwatch::start();
    let models: Vec<CompiledModel> = points.iter().map(|p| engine::compile_signed(&p.config)).collect::<Result<_>>()?;
    let n_r = spec.n_realizations;
    let seeds: Vec<u64> = (0..n_r).map(|r| spec.realization_seed(r)).collect();
    let init = spec.central_init;

    let observed: Vec<Vec<Vec<f64>>> = map_jobs(points.len() * n_r, |job| {
        let (pi, r) = (job / n_r, job % n_r);
        let rhos = trajectory(&models[pi], &points[pi].config.layout, init, times, seeds[r])?;
        rhos.iter().map(observe).collect()
    })?;

    let n_c = spec.config.layout.n_c;
    let names = value_names(n_c);
    let mut rows = Vec::new();
    for (pi, point) in points.iter().enumerate() {
        let per_r = &observed[pi * n_r..(pi + 1) * n_r];
        for (r, series) in per_r.iter().enumerate() {
            for (ti, &t) in times.iter().enumerate() {
                rows.push(Row {
                    params: point.params.clone(),
                    t,
                    realization: Some(r),
                    n_realizations: 1,
                    seed: seeds[r],
                    values: series[ti].clone(),
                });
            }
        }
        for (ti, &t) in times.iter().enumerate() {
            let mut mean = vec![0.0; names.len()];
            for series in per_r {
                mean.iter_mut().zip(&series[ti]).for_each(|(m, v)| *m += v);
            }
            mean.iter_mut().for_each(|m| *m /= n_r as f64);
            rows.push(Row { params: point.params.clone(), t, realization: None, n_realizations: n_r, seed: spec.base_seed, values: mean });
        }
    }

    let metadata = Metadata {
        schema_version: RESULT_SCHEMA_VERSION,
        experiment: experiment.to_string(),
        config: spec.config.clone(),
        config_hash: config_hash(&spec.config),
        base_seed: spec.base_seed,
        n_realizations: n_r,
        realization_seeds: seeds,
        t_max: spec.t_max,
        record_times: times.to_vec(),
        central_init: init,
        wall_clock_seconds: started.seconds(),
        extra: Map::new(),
    };
    Ok(SweepResult {
        param_names: param_names.iter().map(|s| s.to_string()).collect(),
        value_names: names,
        rows,
        metadata,
    })
}

fn with_gamma(config: &ModelConfig, gamma: f64) -> ModelConfig {
    ModelConfig { gamma, ..config.clone() }
}

/// Purity (and concurrence for two central qubits) over time, one series per γ.
pub fn purity_decay(spec: &RunSpec, gammas: &[f64]) -> Result<SweepResult> {
    let points = gammas.iter().map(|&g| Point::new(vec![g], with_gamma(&spec.config, g))).collect();
    run_points(spec, "purity-decay", &["gamma"], points, &spec.times())
}

/// Purity at `t_fix` over a γ grid; negative γ is accepted.
pub fn gamma_sweep(spec: &RunSpec, t_fix: u64, gamma_grid: &[f64]) -> Result<SweepResult> {
    spec.require_time(t_fix)?;
    let points = gamma_grid.iter().map(|&g| Point::new(vec![g], with_gamma(&spec.config, g))).collect();
    run_points(spec, "gamma-sweep", &["gamma"], points, &[t_fix])
}

/// Purity over time for `nu` near/far links, each with strength `gamma_prime`.
///
/// The link set for each ν always contains the baseline near/far link plus
/// `nu - 1` others drawn from `topology_seed`, so `nu = 1` is the baseline
/// chain.
pub fn nu_scaling(spec: &RunSpec, nus: &[usize], gamma_prime: f64, topology_seed: u64) -> Result<SweepResult> {
    let layout = spec.config.layout;
    let mut links_meta = Map::new();
    let mut points = Vec::new();
    for &nu in nus {
        let eep_links = model::anchored_interlinks(&layout, nu, topology_seed)?;
        links_meta.insert(nu.to_string(), json!(eep_links));
        let config = ModelConfig { eep_links, gamma: gamma_prime, ..spec.config.clone() };
        points.push(Point::new(vec![nu as f64, gamma_prime], config));
    }
    let mut result = run_points(spec, "nu-scaling", &["nu", "gamma_prime"], points, &spec.times())?;
    result.metadata.extra.insert("topology_seed".into(), json!(topology_seed));
    result.metadata.extra.insert("eep_links".into(), Value::Object(links_meta));
    Ok(result)
}

/// Purity at `t_fix` versus γ for several random topologies with `nu`
/// near/far links each.
pub fn topology_gamma_sweep(
    spec: &RunSpec,
    nu: usize,
    topology_seeds: &[u64],
    gamma_grid: &[f64],
    t_fix: u64,
) -> Result<SweepResult> {
    spec.require_time(t_fix)?;
    let layout = spec.config.layout;
    let mut links_meta = Map::new();
    let mut points = Vec::new();
    for &seed in topology_seeds {
        let eep_links = model::random_interlinks(&layout, nu, seed)?;
        links_meta.insert(seed.to_string(), json!(eep_links));
        for &g in gamma_grid {
            let config = ModelConfig { eep_links: eep_links.clone(), gamma: g, ..spec.config.clone() };
            points.push(Point::new(vec![seed as f64, g], config));
        }
    }
    let mut result = run_points(spec, "topology-sweep", &["topology_seed", "gamma"], points, &[t_fix])?;
    result.metadata.extra.insert("nu".into(), json!(nu));
    result.metadata.extra.insert("eep_links".into(), Value::Object(links_meta));
    Ok(result)
}

/// Least-squares line through `(ln λ, ln(1 − P))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub gamma: f64,
    pub slope: f64,
    pub intercept: f64,
    pub n_points: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len();
    if n < 3 || ys.len() != n {
        return Err(Error::DegenerateFit { points: n.min(ys.len()) });
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit { points: n });
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Debug, Clone)]
pub struct LambdaSweep {
    pub result: SweepResult,
    pub fits: Vec<PowerLawFit>,
}

/// `1 − P` at `t_fix` over a (λ, γ) grid, with a power-law fit of `1 − P`
/// against λ per γ over `fit_range` (inclusive; all λ when `None`).
pub fn lambda_sweep(
    spec: &RunSpec,
    lambdas: &[f64],
    gammas: &[f64],
    t_fix: u64,
    fit_range: Option<(f64, f64)>,
) -> Result<LambdaSweep> {
    spec.require_time(t_fix)?;
    if let Some(l) = lambdas.iter().find(|&&l| l.is_nan() || l <= 0.0) {
        return Err(Error::InvalidRun(format!("lambdas must be positive, got {l}")));
    }
    let mut points = Vec::new();
    for &g in gammas {
        for &l in lambdas {
            points.push(Point::new(vec![l, g], ModelConfig { lambda: l, gamma: g, ..spec.config.clone() }));
        }
    }
    let mut result = run_points(spec, "lambda-sweep", &["lambda", "gamma"], points, &[t_fix])?;
    let pc = result.column("purity").expect("purity column");
    for row in &mut result.rows {
        let p = row.values[pc];
        row.values.push(1.0 - p);
    }
    result.value_names.push("one_minus_purity".into());

    let (lo, hi) = fit_range.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let mut fits = Vec::new();
    for &g in gammas {
        let (xs, ys): (Vec<f64>, Vec<f64>) = lambdas
            .iter()
            .filter(|&&l| l >= lo && l <= hi)
            .filter_map(|&l| {
                let d = result.mean_value(&[l, g], t_fix, "one_minus_purity")?;
                (d > 0.0).then(|| (l.ln(), d.ln()))
            })
            .unzip();
        let (slope, intercept) = fit_line(&xs, &ys)?;
        fits.push(PowerLawFit { gamma: g, slope, intercept, n_points: xs.len() });
    }
    result.metadata.extra.insert("fits".into(), json!(fits));
    result.metadata.extra.insert("fit_range".into(), json!(fit_range));
    Ok(LambdaSweep { result, fits })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuddenDeath {
    pub gamma: f64,
    /// First recorded time with mean concurrence below
    /// [`SUDDEN_DEATH_THRESHOLD`]; the true time lies between the previous
    /// record time and this one.
    pub time: Option<u64>,
}

impl SuddenDeath {
    /// Sudden-death times of the mean concurrence series of each γ.
    pub fn detect(result: &SweepResult, gammas: &[f64]) -> Vec<SuddenDeath> {
        gammas
            .iter()
            .map(|&g| SuddenDeath {
                gamma: g,
                time: result
                    .series(&[g], "concurrence")
                    .into_iter()
                    .find(|(_, c)| *c < SUDDEN_DEATH_THRESHOLD)
                    .map(|(t, _)| t),
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ConcurrenceDecay {
    pub result: SweepResult,
    pub sudden_death: Vec<SuddenDeath>,
}

/// Concurrence and purity of a two-qubit central system over time, per γ.
pub fn concurrence_decay(spec: &RunSpec, gammas: &[f64]) -> Result<ConcurrenceDecay> {
    if spec.config.layout.n_c != 2 || spec.central_init != CentralInit::BellPhiPlus {
        return Err(Error::InvalidRun("concurrence decay needs two central qubits starting in a Bell state".into()));
    }
    let points = gammas.iter().map(|&g| Point::new(vec![g], with_gamma(&spec.config, g))).collect();
    let mut result = run_points(spec, "concurrence-decay", &["gamma"], points, &spec.times())?;
    let sudden_death = SuddenDeath::detect(&result, gammas);
    result.metadata.extra.insert("sudden_death".into(), json!(sudden_death));
    Ok(ConcurrenceDecay { result, sudden_death })
}

#[derive(Debug, Clone)]
pub struct CpTrajectory {
    pub result: SweepResult,
    pub werner: Vec<CPPoint>,
    pub dephasing: Vec<CPPoint>,
    /// Fraction of per-realization (P, C) points inside the unital region
    /// within [`UNITAL_TOLERANCE`].
    pub inside_fraction: f64,
}

impl CpTrajectory {
    /// Per-realization points of one γ.
    pub fn points(&self, gamma: f64) -> Vec<CPPoint> {
        let (pc, cc) = (self.result.column("purity").unwrap(), self.result.column("concurrence").unwrap());
        self.result
            .rows
            .iter()
            .filter(|r| r.realization.is_some() && r.params == [gamma])
            .map(|r| CPPoint { purity: r.values[pc], concurrence: r.values[cc], time: r.t })
            .collect()
    }

    /// Reference curves as CSV (`curve,purity,concurrence`).
    pub fn reference_csv(&self) -> String {
        let mut out = String::from("curve,purity,concurrence\n");
        for (name, curve) in [("werner", &self.werner), ("dephasing", &self.dephasing)] {
            for p in curve.iter() {
                let _ = writeln!(out, "{name},{},{}", fmt_value(p.purity), fmt_value(p.concurrence));
            }
        }
        out
    }
}

/// (P, C) trajectories of a two-qubit central system, with the Werner and
/// dephasing reference curves sampled at `curve_samples` points each.
pub fn cp_trajectory(spec: &RunSpec, gammas: &[f64], curve_samples: usize) -> Result<CpTrajectory> {
    let decay = concurrence_decay(spec, gammas)?;
    let mut result = decay.result;
    result.metadata.experiment = "cp-trajectory".into();
    let werner = measures::werner_curve(curve_samples)?;
    let dephasing = measures::dephasing_curve(curve_samples)?;
    let region = UnitalRegion::new(&werner, &dephasing);
    let (pc, cc) = (result.column("purity").unwrap(), result.column("concurrence").unwrap());
    let pts: Vec<CPPoint> = result
        .rows
        .iter()
        .filter(|r| r.realization.is_some())
        .map(|r| CPPoint { purity: r.values[pc], concurrence: r.values[cc], time: r.t })
        .collect();
    let inside = pts.iter().filter(|p| region.contains(p, UNITAL_TOLERANCE)).count();
    let inside_fraction = inside as f64 / pts.len().max(1) as f64;
    result.metadata.extra.insert("inside_unital_fraction".into(), json!(inside_fraction));
    result.metadata.extra.insert("unital_tolerance".into(), json!(UNITAL_TOLERANCE));
    Ok(CpTrajectory { result, werner, dephasing, inside_fraction })
}

#[derive(Debug, Clone)]
pub struct FarCouplingControl {
    /// Rows for `epsilon_factor = 0` (no direct link) and the requested factor.
    pub result: SweepResult,
    pub max_abs_diff: f64,
}

/// Purity decay with and without a direct central/far link of strength
/// `epsilon_factor · λ` on the same seed path.
pub fn far_coupling_control(spec: &RunSpec, epsilon_factor: f64, far_qubit: Option<usize>) -> Result<FarCouplingControl> {
    let base = spec.config.clone();
    let coupled = base.clone().with_far_coupling(epsilon_factor * base.lambda, far_qubit);
    let points = vec![Point::new(vec![0.0], base), Point::new(vec![epsilon_factor], coupled)];
    let mut result = run_points(spec, "far-coupling-control", &["epsilon_factor"], points, &spec.times())?;
    let a = result.series(&[0.0], "purity");
    let b = result.series(&[epsilon_factor], "purity");
    let max_abs_diff = if epsilon_factor == 0.0 {
        0.0
    } else {
        a.iter().zip(&b).map(|((_, x), (_, y))| (x - y).abs()).fold(0.0, f64::max)
    };
    result.metadata.extra.insert("max_abs_diff".into(), json!(max_abs_diff));
    Ok(FarCouplingControl { result, max_abs_diff })
}

/// Purity at `t_fix` versus γ for several `(n_e, n_ep)` environment sizes,
/// each on the baseline chain (spectator for two central qubits).
pub fn env_size_sweep(spec: &RunSpec, sizes: &[(usize, usize)], t_fix: u64, gamma_grid: &[f64]) -> Result<SweepResult> {
    spec.require_time(t_fix)?;
    let n_c = spec.config.layout.n_c;
    let preset = if n_c == 2 { TopologyPreset::Spectator } else { TopologyPreset::BaselineChain };
    let c = &spec.config;
    let mut points = Vec::new();
    for &(n_e, n_ep) in sizes {
        let n = n_c + n_e + n_ep;
        if n > model::MAX_QUBITS {
            return Err(Error::TooLarge { n, limit: model::MAX_QUBITS });
        }
        let layout = QubitLayout::new(n_c, n_e, n_ep)?;
        for &g in gamma_grid {
            let config = build_preset(preset, layout, c.j, c.lambda, g, c.fields)?;
            points.push(Point::new(vec![n_e as f64, n_ep as f64, g], config));
        }
    }
    run_points(spec, "env-size-sweep", &["n_e", "n_ep", "gamma"], points, &[t_fix])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Fields;

    fn desk(lambda: f64, gamma: f64) -> ModelConfig {
        let layout = QubitLayout::new(1, 3, 4).unwrap();
        build_preset(TopologyPreset::BaselineChain, layout, 1.0, lambda, gamma, Fields::dephasing()).unwrap()
    }

    fn spec(config: ModelConfig, t_max: u64, stride: u64, r: usize) -> RunSpec {
        RunSpec::new(config, t_max, stride).with_seed(42).with_realizations(r)
    }

    #[test]
    fn run_spec_validation() {
        let mut s = spec(desk(0.01, 0.5), 10, 5, 2);
        assert!(s.validate().is_ok());
        s.n_realizations = 0;
        assert!(s.validate().is_err());
        let mut s = spec(desk(0.01, 0.5), 10, 5, 2);
        s.record_times.push(11);
        assert!(s.validate().is_err());
        let mut s = spec(desk(0.01, 0.5), 10, 5, 2);
        s.central_init = CentralInit::BellPhiPlus;
        assert!(s.validate().is_err());
    }

    #[test]
    fn zero_lambda_keeps_purity_one() {
        let r = purity_decay(&spec(desk(0.0, 0.3), 50, 10, 2), &[0.0, 0.3, 1.0]).unwrap();
        for row in &r.rows {
            assert!((row.values[0] - 1.0).abs() < 1e-12, "{row:?}");
        }
    }

    #[test]
    fn single_realization_mean_equals_trajectory() {
        let s = spec(desk(0.05, 0.4), 20, 5, 1);
        let r = purity_decay(&s, &[0.4]).unwrap();
        let model = engine::compile(&s.config).unwrap();
        let rhos = trajectory(&model, &s.config.layout, s.central_init, &s.times(), s.realization_seed(0)).unwrap();
        let direct: Vec<f64> = rhos.iter().map(measures::purity).collect();
        let mean: Vec<f64> = r.series(&[0.4], "purity").into_iter().map(|(_, p)| p).collect();
        assert_eq!(direct, mean);
    }

    #[test]
    fn gamma_zero_matches_far_free_reference() {
        let s = spec(desk(0.05, 0.0), 30, 10, 3);
        let full = engine::compile(&s.config).unwrap();
        let reduced = without_far(&s.config).unwrap();
        for r in 0..3 {
            let a = trajectory(&full, &s.config.layout, s.central_init, &s.times(), s.realization_seed(r)).unwrap();
            let b = trajectory(&reduced, &s.config.layout, s.central_init, &s.times(), s.realization_seed(r)).unwrap();
            for (x, y) in a.iter().zip(&b) {
                let d = x.entries().iter().zip(y.entries()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
                assert!(d < 1e-12, "realization {r}: {d}");
            }
        }
        assert!(without_far(&desk(0.05, 0.2)).is_err());
    }

    #[test]
    fn periodicity_in_gamma() {
        let g = 0.37;
        let r = gamma_sweep(&spec(desk(0.05, g), 60, 60, 2), 60, &[g, g + std::f64::consts::PI]).unwrap();
        let a = r.mean_value(&[g], 60, "purity").unwrap();
        let b = r.mean_value(&[g + std::f64::consts::PI], 60, "purity").unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn gamma_sweep_agrees_with_purity_decay_bitwise() {
        let s = spec(desk(0.05, 0.3), 40, 20, 2);
        let decay = purity_decay(&s, &[0.3, 0.7]).unwrap();
        let sweep = gamma_sweep(&s, 40, &[0.7, 0.3]).unwrap();
        for g in [0.3, 0.7] {
            assert_eq!(
                decay.mean_value(&[g], 40, "purity").unwrap().to_bits(),
                sweep.mean_value(&[g], 40, "purity").unwrap().to_bits()
            );
        }
    }

    #[test]
    fn gamma_sweep_needs_recorded_time() {
        assert!(gamma_sweep(&spec(desk(0.05, 0.3), 40, 20, 1), 30, &[0.3]).is_err());
    }

    #[test]
    fn nu_one_is_the_baseline_chain() {
        let s = spec(desk(0.05, 0.4), 30, 10, 2);
        let base = purity_decay(&s, &[0.4]).unwrap();
        let nu = nu_scaling(&s, &[1, 3], 0.4, 9).unwrap();
        assert_eq!(base.series(&[0.4], "purity"), nu.series(&[1.0, 0.4], "purity"));
        assert!(nu_scaling(&s, &[13], 0.4, 9).is_err());
    }

    #[test]
    fn lambda_sweep_reports_fit() {
        let s = spec(desk(0.01, 0.5), 40, 40, 2);
        let out = lambda_sweep(&s, &[0.002, 0.004, 0.008], &[0.5], 40, None).unwrap();
        assert_eq!(out.fits.len(), 1);
        assert!(out.fits[0].slope > 1.5 && out.fits[0].slope < 2.5, "{:?}", out.fits);
        assert!(matches!(
            lambda_sweep(&s, &[0.002, 0.004], &[0.5], 40, None),
            Err(Error::DegenerateFit { points: 2 })
        ));
        assert!(lambda_sweep(&s, &[0.0, 0.1, 0.2], &[0.5], 40, None).is_err());
    }

    #[test]
    fn fit_line_recovers_slope() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let (s, i) = fit_line(&xs, &ys).unwrap();
        assert!((s - 2.0).abs() < 1e-14 && (i + 1.0).abs() < 1e-14);
    }

    #[test]
    fn concurrence_decay_starts_at_bell() {
        let layout = QubitLayout::new(2, 3, 3).unwrap();
        let mut fields = Fields::dephasing();
        fields.central = model::KickField::tilted(1.0);
        let config = build_preset(TopologyPreset::Spectator, layout, 1.0, 0.05, 0.5, fields).unwrap();
        let out = concurrence_decay(&spec(config, 20, 10, 2), &[0.5]).unwrap();
        assert!((out.result.mean_value(&[0.5], 0, "purity").unwrap() - 1.0).abs() < 1e-12);
        assert!((out.result.mean_value(&[0.5], 0, "concurrence").unwrap() - 1.0).abs() < 1e-10);
        out.result.check_bounds().unwrap();
        assert!(concurrence_decay(&spec(desk(0.01, 0.5), 10, 10, 1), &[0.5]).is_err());
    }

    #[test]
    fn far_coupling_zero_epsilon_is_bitwise_identical() {
        let s = spec(desk(0.05, 0.4), 30, 10, 2);
        let out = far_coupling_control(&s, 0.0, None).unwrap();
        let a = out.result.series(&[0.0], "purity");
        let rows_b: Vec<&Row> = out.result.rows.iter().skip(a.len() * 3).collect();
        assert_eq!(out.max_abs_diff, 0.0);
        for (x, y) in out.result.rows.iter().zip(rows_b) {
            assert_eq!(x.values[0].to_bits(), y.values[0].to_bits());
        }
    }

    #[test]
    fn env_size_sweep_small_sizes() {
        let s = spec(desk(0.05, 0.4), 20, 20, 2);
        let out = env_size_sweep(&s, &[(1, 1), (2, 3)], 20, &[0.1, 0.4]).unwrap();
        assert_eq!(out.points().len(), 4);
        out.check_bounds().unwrap();
        assert!(matches!(env_size_sweep(&s, &[(20, 10)], 20, &[0.1]), Err(Error::TooLarge { .. })));
        let again = env_size_sweep(&s, &[(1, 1), (2, 3)], 20, &[0.1, 0.4]).unwrap();
        assert_eq!(out.to_csv(), again.to_csv());
    }

    #[test]
    fn csv_layout() {
        let out = purity_decay(&spec(desk(0.05, 0.4), 10, 10, 2), &[0.4]).unwrap();
        let csv = out.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "gamma,t,realization,n_realizations,seed,purity");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "0.4");
        assert_eq!(first[1], "0");
        assert!(first[5].starts_with("1.0000000000000") && first[5].ends_with("e0") && first[5].len() == 20, "{}", first[5]);
        assert!(csv.lines().any(|l| l.split(',').nth(2) == Some("mean")));
        let meta = out.metadata_json();
        assert_eq!(meta["csv_sha256"].as_str().unwrap().len(), 64);
        assert_eq!(meta["schema_version"], 1);
    }
}
