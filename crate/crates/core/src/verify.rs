//! Self-checks: oracle comparisons, exact invariants and the qualitative
//! trend runs at full scale.
//!
//! Each [`Criterion`] is independent and reports observed against expected
//! values. The quick subset runs in seconds; the full set includes full-scale
//! runs and takes about ten minutes.

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::Rng;

use crate::engine::{self, haar_random_state, product_state, StateVector, StepOrder};
use crate::error::{Error, Result};
use crate::experiments::{self, CpTrajectory, RunSpec};
use crate::measures::{self, DensityMatrix};
use crate::model::{
    build_preset, random_interlinks, Fields, KickField, Link, ModelConfig, QubitLayout, TopologyPreset,
    MODEL_SCHEMA_VERSION,
};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

/// Test hooks that deliberately break the engine.
#[derive(Debug, Clone, Copy, Default)]
pub struct Hooks {
    pub step_order: StepOrder,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub observed: String,
    pub expected: String,
    pub seconds: f64,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2}. {}: observed {}; expected {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.observed,
            self.expected,
            self.seconds
        )
    }
}

type Check = fn(&Hooks) -> Result<(bool, String, String)>;

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub quick: bool,
    check: Check,
}

impl Criterion {
    pub fn run(&self, hooks: &Hooks) -> Outcome {
        let start = Instant::now();
        let (passed, observed, expected) = match (self.check)(hooks) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}"), "no error".into()),
        };
        Outcome { id: self.id, name: self.name, passed, observed, expected, seconds: start.elapsed().as_secs_f64() }
    }
}

pub fn criteria() -> &'static [Criterion] {
    const LIST: &[Criterion] = &[
        Criterion { id: 1, name: "oracle equivalence", quick: true, check: oracle_equivalence },
        Criterion { id: 2, name: "unitarity", quick: false, check: unitarity },
        Criterion { id: 3, name: "purity rises with gamma", quick: false, check: gamma_trend },
        Criterion { id: 4, name: "periodicity in gamma", quick: true, check: periodicity },
        Criterion { id: 5, name: "dephasing conservation", quick: true, check: dephasing_conservation },
        Criterion { id: 6, name: "far-environment decoupling", quick: true, check: decoupling },
        Criterion { id: 7, name: "lambda squared law", quick: false, check: lambda_law },
        Criterion { id: 8, name: "gamma-prime collapse", quick: false, check: nu_collapse },
        Criterion { id: 9, name: "entanglement sudden death", quick: false, check: sudden_death },
        Criterion { id: 10, name: "unital region", quick: false, check: unital_region },
        Criterion { id: 11, name: "measure examples", quick: true, check: measure_examples },
        Criterion { id: 12, name: "far-coupling control", quick: false, check: far_control },
        Criterion { id: 13, name: "determinism", quick: true, check: determinism },
    ];
    LIST
}

pub fn run(level: Level, hooks: &Hooks) -> Vec<Outcome> {
    criteria().iter().filter(|c| level == Level::Full || c.quick).map(|c| c.run(hooks)).collect()
}

const FULL: (usize, usize) = (6, 10);
const DESK: (usize, usize) = (4, 6);
const LAMBDA: f64 = 0.01;

fn baseline(n_e: usize, n_ep: usize, lambda: f64, gamma: f64) -> Result<ModelConfig> {
    let layout = QubitLayout::new(1, n_e, n_ep)?;
    build_preset(TopologyPreset::BaselineChain, layout, 1.0, lambda, gamma, Fields::dephasing())
}

fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn sym(x: f64, rng: &mut impl Rng) -> f64 {
    rng.random_range(-x..x)
}

/// Random 8-qubit model: chains plus random extra intra links, random
/// central/near and near/far links, random signed strengths and fields.
pub fn random_config(seed: u64) -> Result<ModelConfig> {
    let mut rng = rng::stream(seed, &[0x6f72]);
    let layout = QubitLayout::new(1, 3, 4)?;
    let mut intra = Vec::new();
    for range in [layout.near(), layout.far()] {
        for j in range.clone() {
            for k in j + 1..range.end {
                if k == j + 1 || rng.random_bool(0.3) {
                    intra.push(Link(j, k));
                }
            }
        }
    }
    let ce_links: Vec<Link> = layout.near().filter(|_| rng.random_bool(0.5)).map(|q| Link(0, q)).collect();
    let ce_links = if ce_links.is_empty() { vec![Link(0, 1)] } else { ce_links };
    let nu = rng.random_range(1..=4);
    let eep_links = random_interlinks(&layout, nu, rng.random())?;
    let mut field = || KickField::new(sym(1.5, &mut rng), sym(1.5, &mut rng), sym(1.5, &mut rng));
    let fields = Fields { central: field(), near: field(), far: field() };
    Ok(ModelConfig {
        schema_version: MODEL_SCHEMA_VERSION,
        layout,
        intra_links: intra,
        ce_links,
        eep_links,
        cep_links: Vec::new(),
        j: sym(1.5, &mut rng),
        lambda: sym(1.5, &mut rng),
        gamma: sym(1.5, &mut rng),
        fields,
    })
}

fn oracle_equivalence(hooks: &Hooks) -> Result<(bool, String, String)> {
    let mut worst = 0.0f64;
    for c in 0..5 {
        let config = random_config(c)?;
        let model = engine::compile_signed(&config)?;
        let u = engine::dense_floquet_matrix(&model)?;
        let mut fast = haar_random_state(8, &mut rng::stream(c, &[0x7073]));
        let mut dense = nalgebra::DVector::from_column_slice(fast.amplitudes());
        for _ in 0..50 {
            engine::floquet_step_ordered(&mut fast, &model, hooks.step_order)?;
            dense = &u * dense;
        }
        worst = worst.max(max_abs_diff(fast.amplitudes(), dense.as_slice()));
    }
    Ok((worst <= 1e-11, format!("max amplitude error {worst:.3e}"), "<= 1e-11".into()))
}

fn unitarity(_: &Hooks) -> Result<(bool, String, String)> {
    let config = baseline(FULL.0, FULL.1, LAMBDA, 0.5)?;
    let model = engine::compile(&config)?;
    let mut rng = rng::stream(1, &[0]);
    let plus = StateVector::from_amplitudes(vec![C64::new(0.5f64.sqrt(), 0.0); 2])?;
    let mut psi = product_state(&[plus, haar_random_state(FULL.0, &mut rng), haar_random_state(FULL.1, &mut rng)]);
    let mut worst = 0.0f64;
    for _ in 0..40 {
        engine::evolve(&mut psi, &model, 100)?;
        worst = worst.max((psi.norm() - 1.0).abs());
    }
    Ok((worst <= 1e-9, format!("max |norm - 1| over 4000 steps {worst:.3e}"), "<= 1e-9".into()))
}

const TREND_GAMMAS: [f64; 4] = [0.05, 0.1, 0.3, 0.6];

fn purity_at_1000(sizes: (usize, usize), realizations: usize) -> Result<Vec<f64>> {
    let spec = RunSpec::new(baseline(sizes.0, sizes.1, LAMBDA, 0.0)?, 1000, 1000).with_realizations(realizations);
    let out = experiments::gamma_sweep(&spec, 1000, &TREND_GAMMAS)?;
    Ok(TREND_GAMMAS.iter().map(|&g| out.mean_value(&[g], 1000, "purity").unwrap()).collect())
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn gamma_trend(_: &Hooks) -> Result<(bool, String, String)> {
    let full = purity_at_1000(FULL, 10)?;
    // The weakest couplings sit near the finite-size floor at desk scale;
    // more realizations resolve their ordering.
    let desk = purity_at_1000(DESK, 40)?;
    let rise = full[3] - full[0];
    let passed = strictly_increasing(&full) && rise >= 0.05 && strictly_increasing(&desk);
    Ok((
        passed,
        format!("P(t=1000) at gamma {TREND_GAMMAS:?}: (1,6,10) {full:.4?}, rise {rise:.4}; (1,4,6) {desk:.4?}"),
        "strictly increasing in both layouts, rise >= 0.05".into(),
    ))
}

fn periodicity(_: &Hooks) -> Result<(bool, String, String)> {
    let g = 0.3;
    let spec = RunSpec::new(baseline(FULL.0, FULL.1, LAMBDA, g)?, 100, 10).with_realizations(1);
    let out = experiments::purity_decay(&spec, &[g, g + PI])?;
    let a = out.series(&[g], "purity");
    let b = out.series(&[g + PI], "purity");
    let d = a.iter().zip(&b).map(|((_, x), (_, y))| (x - y).abs()).fold(0.0, f64::max);
    Ok((d <= 1e-10, format!("max purity difference {d:.3e}"), "<= 1e-10".into()))
}

fn dephasing_conservation(_: &Hooks) -> Result<(bool, String, String)> {
    let config = baseline(FULL.0, FULL.1, LAMBDA, 0.3)?;
    let model = engine::compile(&config)?;
    let mut rng = rng::stream(5, &[0]);
    let (s, c) = 0.3f64.sin_cos();
    let central = StateVector::from_amplitudes(vec![C64::new(c, 0.0), C64::from_polar(s, 0.2)])?;
    let mut psi = product_state(&[central, haar_random_state(FULL.0, &mut rng), haar_random_state(FULL.1, &mut rng)]);
    let z0 = measures::sigma_z_expectation(&measures::reduced_density(&psi, 1)?)?;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        engine::evolve(&mut psi, &model, 10)?;
        let z = measures::sigma_z_expectation(&measures::reduced_density(&psi, 1)?)?;
        worst = worst.max((z - z0).abs());
    }
    Ok((worst <= 1e-10, format!("<sigma_z> = {z0:.6}, max drift over 1000 steps {worst:.3e}"), "<= 1e-10".into()))
}

fn decoupling(_: &Hooks) -> Result<(bool, String, String)> {
    let spec = RunSpec::new(baseline(FULL.0, FULL.1, LAMBDA, 0.0)?, 200, 20).with_realizations(2);
    let full = engine::compile(&spec.config)?;
    let reduced = experiments::without_far(&spec.config)?;
    let mut worst = 0.0f64;
    for r in 0..spec.n_realizations {
        let seed = spec.realization_seed(r);
        let a = experiments::trajectory(&full, &spec.config.layout, spec.central_init, &spec.record_times, seed)?;
        let b = experiments::trajectory(&reduced, &spec.config.layout, spec.central_init, &spec.record_times, seed)?;
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max(max_abs_diff(x.entries(), y.entries()));
        }
    }
    Ok((worst <= 1e-12, format!("max |rho_c - rho_c(no far)| {worst:.3e}"), "<= 1e-12".into()))
}

fn lambda_law(_: &Hooks) -> Result<(bool, String, String)> {
    let spec = RunSpec::new(baseline(FULL.0, FULL.1, LAMBDA, 0.5)?, 200, 200).with_realizations(10);
    let out = experiments::lambda_sweep(&spec, &[0.002, 0.005, 0.01, 0.02], &[0.5], 200, None)?;
    let slope = out.fits[0].slope;
    Ok(((1.7..=2.3).contains(&slope), format!("slope {slope:.4}"), "in [1.7, 2.3]".into()))
}

/// Per-link near/far coupling for the connection-count comparison, inside
/// the purity plateau.
pub const NU_GAMMA_PRIME: f64 = FRAC_PI_4;
pub const NU_TOPOLOGY_SEED: u64 = 7;

fn nu_collapse(_: &Hooks) -> Result<(bool, String, String)> {
    let spec = RunSpec::new(baseline(FULL.0, FULL.1, LAMBDA, NU_GAMMA_PRIME)?, 1000, 1000).with_realizations(10);
    let out = experiments::nu_scaling(&spec, &[1, 2, 4], NU_GAMMA_PRIME, NU_TOPOLOGY_SEED)?;
    let p: Vec<f64> = [1.0, 2.0, 4.0].iter().map(|&nu| out.mean_value(&[nu, NU_GAMMA_PRIME], 1000, "purity").unwrap()).collect();
    let spread = p.iter().cloned().fold(f64::MIN, f64::max) - p.iter().cloned().fold(f64::MAX, f64::min);
    Ok((
        spread <= 0.05,
        format!("P(t=1000) for nu 1, 2, 4: {p:.4?}, spread {spread:.4}"),
        "spread <= 0.05".into(),
    ))
}

pub const SPECTATOR_GAMMAS: [f64; 2] = [0.05, 0.5];
pub const SPECTATOR_REALIZATIONS: usize = 4;

/// Spectator Bell run with the tilted central field, shared by the sudden
/// death and unital-region checks.
fn spectator_run() -> std::result::Result<&'static CpTrajectory, String> {
    static RUN: OnceLock<std::result::Result<CpTrajectory, String>> = OnceLock::new();
    RUN.get_or_init(|| {
        let layout = QubitLayout::new(2, FULL.0, FULL.1).map_err(|e| e.to_string())?;
        let fields = Fields { central: KickField::tilted(1.0), ..Fields::dephasing() };
        let config = build_preset(TopologyPreset::Spectator, layout, 1.0, LAMBDA, 0.0, fields).map_err(|e| e.to_string())?;
        let spec = RunSpec::new(config, 4000, 10).with_realizations(SPECTATOR_REALIZATIONS);
        experiments::cp_trajectory(&spec, &SPECTATOR_GAMMAS, 401).map_err(|e| e.to_string())
    })
    .as_ref()
    .map_err(Clone::clone)
}

fn sudden_death(_: &Hooks) -> Result<(bool, String, String)> {
    let run = spectator_run().map_err(Error::InvalidRun)?;
    let decay = experiments::SuddenDeath::detect(&run.result, &SPECTATOR_GAMMAS);
    let times: Vec<Option<u64>> = decay.iter().map(|d| d.time).collect();
    let passed = match (times[0], times[1]) {
        (Some(a), Some(b)) => b > a,
        _ => false,
    };
    Ok((
        passed,
        format!("sudden-death time at gamma {SPECTATOR_GAMMAS:?}: {times:?}"),
        "both finite within t <= 4000, later for gamma = 0.5".into(),
    ))
}

fn unital_region(_: &Hooks) -> Result<(bool, String, String)> {
    let run = spectator_run().map_err(Error::InvalidRun)?;
    let f = run.inside_fraction;
    Ok((f >= 0.99, format!("inside fraction {f:.4}"), ">= 0.99".into()))
}

fn measure_examples(_: &Hooks) -> Result<(bool, String, String)> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut failures = Vec::new();
    let mut total = 0;
    let mut check = |name: &str, got: f64, want: f64, tol: f64| {
        total += 1;
        if (got - want).abs() > tol {
            failures.push(format!("{name}: {got} vs {want}"));
        }
    };
    let plus = DensityMatrix::pure(&[C64::new(h, 0.0), C64::new(h, 0.0)])?;
    check("purity |+>", measures::purity(&plus), 1.0, 1e-12);
    let bell = StateVector::from_amplitudes(vec![C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0)])?;
    check("purity of Bell marginal", measures::purity(&measures::reduced_density(&bell, 1)?), 0.5, 1e-12);
    let mixed = DensityMatrix::maximally_mixed(4)?;
    check("purity 1/4", measures::purity(&mixed), 0.25, 1e-12);
    check("concurrence 1/4", measures::concurrence(&mixed)?, 0.0, 1e-12);
    check("concurrence Bell", measures::concurrence(&measures::bell_phi_plus())?, 1.0, 1e-10);
    check("concurrence |00>", measures::concurrence(&DensityMatrix::pure(StateVector::basis(2, 0).amplitudes())?)?, 0.0, 1e-12);
    check("Werner p=0.8 C", measures::concurrence(&measures::werner_state(0.8))?, 0.7, 1e-10);
    check("Werner p=1/3 C", measures::concurrence(&measures::werner_state(1.0 / 3.0))?, 0.0, 1e-10);
    check("Werner p=1/3 P", measures::purity(&measures::werner_state(1.0 / 3.0)), 1.0 / 3.0, 1e-12);
    check("dephased 0.5 C", measures::concurrence(&measures::dephased_bell(0.5))?, 0.5, 1e-10);
    check("dephased 0.5 P", measures::purity(&measures::dephased_bell(0.5)), 0.625, 1e-12);
    check("dephased 0 C", measures::concurrence(&measures::dephased_bell(0.0))?, 0.0, 1e-12);
    check("dephased 0 P", measures::purity(&measures::dephased_bell(0.0)), 0.5, 1e-12);
    let w = measures::werner_curve(2)?;
    check("Werner curve p=0 P", w[0].purity, 0.25, 1e-12);
    check("Werner curve p=1 C", w[1].concurrence, 1.0, 1e-10);
    Ok((
        failures.is_empty(),
        if failures.is_empty() { format!("{total} examples match") } else { failures.join("; ") },
        "every example within its tolerance".into(),
    ))
}

fn far_control(_: &Hooks) -> Result<(bool, String, String)> {
    let mut worst = 0.0f64;
    for g in [0.05, 0.6] {
        let spec = RunSpec::new(baseline(FULL.0, FULL.1, LAMBDA, g)?, 1000, 50).with_realizations(5);
        worst = worst.max(experiments::far_coupling_control(&spec, 0.01, None)?.max_abs_diff);
    }
    Ok((worst <= 0.01, format!("max purity change for t <= 1000 {worst:.3e}"), "<= 0.01".into()))
}

fn small_sweep_csv() -> Result<String> {
    let config = baseline(DESK.0, DESK.1, 0.05, 0.3)?;
    let spec = RunSpec::new(config, 60, 20).with_seed(11).with_realizations(3);
    Ok(experiments::purity_decay(&spec, &[0.1, 0.3])?.to_csv())
}

fn determinism(_: &Hooks) -> Result<(bool, String, String)> {
    let reference = small_sweep_csv()?;
    #[allow(unused_mut)]
    let mut runs = vec![("repeat".to_string(), small_sweep_csv()?)];
    #[cfg(feature = "parallel")]
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidRun(e.to_string()))?;
        runs.push((format!("{threads} threads"), pool.install(small_sweep_csv)?));
    }
    let differing: Vec<&str> = runs.iter().filter(|(_, csv)| *csv != reference).map(|(n, _)| n.as_str()).collect();
    Ok((
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} runs byte-identical", runs.len() + 1)
        } else {
            format!("differs: {}", differing.join(", "))
        },
        "byte-identical CSV".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_configs_are_valid_and_distinct() {
        let a = random_config(0).unwrap();
        let b = random_config(1).unwrap();
        assert!(crate::model::validate_signed(&a).is_empty());
        assert_ne!(a, b);
        assert_eq!(a, random_config(0).unwrap());
    }

    #[test]
    fn flipped_gate_order_fails_oracle() {
        let hooks = Hooks { step_order: StepOrder::KickThenIsing };
        let (passed, observed, _) = oracle_equivalence(&hooks).unwrap();
        assert!(!passed, "{observed}");
    }

    #[test]
    fn criteria_ids_are_sequential() {
        let ids: Vec<u8> = criteria().iter().map(|c| c.id).collect();
        assert_eq!(ids, (1..=13).collect::<Vec<u8>>());
    }
}
