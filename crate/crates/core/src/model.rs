//! Qubit layout, coupling topology and model parameters.
//!
//! Qubit `j` is bit `j` of a basis-state index; bit value 0 is the σz = +1
//! eigenstate. Central qubits occupy the lowest indices, the near environment
//! follows and the far environment takes the highest indices:
//!
//! ```text
//! 0 .. n_c | n_c .. n_c+n_e | n_c+n_e .. n
//! central  | near           | far
//! ```

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Largest total qubit count accepted. A state vector plus the fused phase
/// table take `32 · 2^n` bytes (512 MiB at 24 qubits).
pub const MAX_QUBITS: usize = 24;

/// Version tag written into serialized configurations.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subsystem {
    Central,
    Near,
    Far,
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subsystem::Central => "central",
            Subsystem::Near => "near",
            Subsystem::Far => "far",
        })
    }
}

/// Partition of the qubits into central system, near and far environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitLayout {
    pub n_c: usize,
    pub n_e: usize,
    pub n_ep: usize,
}

impl QubitLayout {
    pub fn new(n_c: usize, n_e: usize, n_ep: usize) -> Result<Self> {
        let layout = QubitLayout { n_c, n_e, n_ep };
        match layout.violations().into_iter().next() {
            None => Ok(layout),
            Some(v) => Err(Error::InvalidLayout {
                field: v.field_static(),
                reason: v.rule,
            }),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_c + self.n_e + self.n_ep
    }

    pub fn central(&self) -> Range<usize> {
        0..self.n_c
    }

    pub fn near(&self) -> Range<usize> {
        self.n_c..self.n_c + self.n_e
    }

    pub fn far(&self) -> Range<usize> {
        self.n_c + self.n_e..self.n_qubits()
    }

    pub fn range(&self, s: Subsystem) -> Range<usize> {
        match s {
            Subsystem::Central => self.central(),
            Subsystem::Near => self.near(),
            Subsystem::Far => self.far(),
        }
    }

    pub fn subsystem_of(&self, q: usize) -> Option<Subsystem> {
        [Subsystem::Central, Subsystem::Near, Subsystem::Far]
            .into_iter()
            .find(|&s| self.range(s).contains(&q))
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(1..=2).contains(&self.n_c) {
            out.push(Violation::new("layout.n_c", format!("must be 1 or 2, got {}", self.n_c)));
        }
        if self.n_e < 1 {
            out.push(Violation::new("layout.n_e", "must be at least 1"));
        }
        if self.n_ep < 1 {
            out.push(Violation::new("layout.n_ep", "must be at least 1"));
        }
        let n = self.n_c.saturating_add(self.n_e).saturating_add(self.n_ep);
        if n > MAX_QUBITS {
            out.push(Violation::new(
                "layout",
                format!("{n} qubits exceeds the memory limit of {MAX_QUBITS} qubits"),
            ));
        }
        out
    }
}

/// Kick field vector b = (bx, by, bz). The zero vector is no kick.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KickField {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl KickField {
    pub const ZERO: KickField = KickField { bx: 0.0, by: 0.0, bz: 0.0 };

    pub const fn new(bx: f64, by: f64, bz: f64) -> Self {
        KickField { bx, by, bz }
    }

    /// b = (1, 0, 1): the field at π/4 to the Ising axis used for chaotic
    /// environments.
    pub const fn chaotic() -> Self {
        KickField::new(1.0, 0.0, 1.0)
    }

    /// Field of magnitude `beta` along (1, 0, 1)/√2.
    pub fn tilted(beta: f64) -> Self {
        let c = beta * std::f64::consts::FRAC_1_SQRT_2;
        KickField::new(c, 0.0, c)
    }

    pub fn magnitude(&self) -> f64 {
        (self.bx * self.bx + self.by * self.by + self.bz * self.bz).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.bx == 0.0 && self.by == 0.0 && self.bz == 0.0
    }
}

/// Kick field per subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fields {
    pub central: KickField,
    pub near: KickField,
    pub far: KickField,
}

impl Fields {
    /// Dephasing central qubit, chaotic environments.
    pub fn dephasing() -> Self {
        Fields { central: KickField::ZERO, near: KickField::chaotic(), far: KickField::chaotic() }
    }

    pub fn get(&self, s: Subsystem) -> KickField {
        match s {
            Subsystem::Central => self.central,
            Subsystem::Near => self.near,
            Subsystem::Far => self.far,
        }
    }
}

/// Unweighted link between qubits `j` and `k`, serialized as `[j, k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link(pub usize, pub usize);

impl Link {
    fn key(&self) -> (usize, usize) {
        (self.0.min(self.1), self.0.max(self.1))
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

/// Link carrying its own coupling strength (direct central/far couplings).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedLink {
    pub j: usize,
    pub k: usize,
    pub strength: f64,
}

/// A rule broken by a configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation { field: field.into(), rule: rule.into() }
    }

    fn field_static(&self) -> &'static str {
        match self.field.as_str() {
            "layout.n_c" => "n_c",
            "layout.n_e" => "n_e",
            "layout.n_ep" => "n_ep",
            _ => "layout",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Full coupling specification of a tripartite kicked Ising model.
///
/// Intra-subsystem links carry `J`, central/near links carry `lambda`,
/// near/far links carry `gamma`; `cep_links` carry their own strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub schema_version: u32,
    pub layout: QubitLayout,
    pub intra_links: Vec<Link>,
    pub ce_links: Vec<Link>,
    pub eep_links: Vec<Link>,
    #[serde(default)]
    pub cep_links: Vec<WeightedLink>,
    #[serde(rename = "J")]
    pub j: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub fields: Fields,
}

impl ModelConfig {
    pub fn n_qubits(&self) -> usize {
        self.layout.n_qubits()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Adds a direct central/far coupling of `strength` between central
    /// qubit 0 and `far_qubit` (the last far qubit when `None`).
    pub fn with_far_coupling(mut self, strength: f64, far_qubit: Option<usize>) -> Self {
        let k = far_qubit.unwrap_or(self.layout.n_qubits() - 1);
        self.cep_links.push(WeightedLink { j: 0, k, strength });
        self
    }
}

/// Strict validation: every invariant including non-negative couplings.
pub fn validate(config: &ModelConfig) -> Vec<Violation> {
    let mut v = validate_signed(config);
    for (name, value) in [("lambda", config.lambda), ("gamma", config.gamma)] {
        if value < 0.0 {
            v.push(Violation::new(name, format!("must be non-negative, got {value}")));
        }
    }
    v
}

/// Validation that accepts negative `lambda`/`gamma`, for sign-symmetry studies.
pub fn validate_signed(config: &ModelConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    if config.schema_version != MODEL_SCHEMA_VERSION {
        out.push(Violation::new(
            "schema_version",
            format!("unsupported version {} (expected {MODEL_SCHEMA_VERSION})", config.schema_version),
        ));
    }
    let layout = config.layout;
    let layout_violations = layout.violations();
    let layout_ok = layout_violations.is_empty();
    out.extend(layout_violations);

    for (name, value) in [("J", config.j), ("lambda", config.lambda), ("gamma", config.gamma)] {
        if !value.is_finite() {
            out.push(Violation::new(name, "must be finite"));
        }
    }
    for s in [Subsystem::Central, Subsystem::Near, Subsystem::Far] {
        let b = config.fields.get(s);
        if ![b.bx, b.by, b.bz].iter().all(|x| x.is_finite()) {
            out.push(Violation::new(format!("fields.{s}"), "components must be finite"));
        }
    }
    if !layout_ok {
        return out;
    }

    let sub = |q: usize| layout.subsystem_of(q);
    check_links(&mut out, "intra_links", config.intra_links.iter().copied(), |l| {
        sub(l.0).is_some() && sub(l.0) == sub(l.1)
    });
    check_links(&mut out, "ce_links", config.ce_links.iter().copied(), |l| {
        sub(l.0) == Some(Subsystem::Central) && sub(l.1) == Some(Subsystem::Near)
    });
    check_links(&mut out, "eep_links", config.eep_links.iter().copied(), |l| {
        sub(l.0) == Some(Subsystem::Near) && sub(l.1) == Some(Subsystem::Far)
    });
    check_links(&mut out, "cep_links", config.cep_links.iter().map(|w| Link(w.j, w.k)), |l| {
        sub(l.0) == Some(Subsystem::Central) && sub(l.1) == Some(Subsystem::Far)
    });
    for w in &config.cep_links {
        if !w.strength.is_finite() {
            out.push(Violation::new("cep_links", format!("strength of ({}, {}) must be finite", w.j, w.k)));
        }
    }
    out
}

fn check_links(
    out: &mut Vec<Violation>,
    field: &str,
    links: impl Iterator<Item = Link>,
    endpoints_ok: impl Fn(&Link) -> bool,
) {
    let mut seen = HashSet::new();
    for l in links {
        if l.0 == l.1 {
            out.push(Violation::new(field, format!("self-link {l}")));
            continue;
        }
        if !endpoints_ok(&l) {
            out.push(Violation::new(field, format!("endpoint outside subsystem in {l}")));
            continue;
        }
        if !seen.insert(l.key()) {
            out.push(Violation::new(field, format!("duplicate link {l}")));
        }
    }
}

/// Named coupling topologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologyPreset {
    /// Open chain inside each environment, one central/near link at the
    /// first near qubit and one near/far link from the last near qubit to
    /// the first far qubit.
    BaselineChain,
    /// Baseline chain with extra intra-environment links; `id` in 1..=5.
    IntraVariant { id: u8 },
    /// Baseline chains with `nu` random near/far links. With two central
    /// qubits only qubit 0 is coupled.
    RandomInterlinks { nu: usize, seed: u64 },
    /// Two non-interacting central qubits; qubit 0 is coupled as in the
    /// baseline chain, qubit 1 is a spectator.
    Spectator,
}

/// Number of intra-environment variants.
pub const INTRA_VARIANTS: u8 = 5;

impl TopologyPreset {
    pub fn name(&self) -> &'static str {
        match self {
            TopologyPreset::BaselineChain => "baseline-chain",
            TopologyPreset::IntraVariant { .. } => "intra-variant",
            TopologyPreset::RandomInterlinks { .. } => "random-interlinks",
            TopologyPreset::Spectator => "spectator",
        }
    }
}

/// One line per preset: name, the figure it reproduces and a description.
pub fn preset_catalog() -> Vec<(&'static str, &'static str, &'static str)> {
    vec![
        (
            "baseline-chain",
            "Fig. 2",
            "open chains in both environments joined by a single central/near and a single near/far link",
        ),
        (
            "intra-variant",
            "Fig. 3",
            "baseline chain plus extra intra-environment links; id 1..5 (near ring, far ring, both rings, near next-nearest, both rings + next-nearest)",
        ),
        (
            "random-interlinks",
            "Figs. 4-6, 11, 12",
            "baseline chains with nu near/far links drawn uniformly without replacement from a seed",
        ),
        (
            "spectator",
            "Fig. 10",
            "two non-interacting central qubits, only qubit 0 coupled to the near environment",
        ),
    ]
}

fn chain(range: Range<usize>) -> impl Iterator<Item = Link> {
    let end = range.end;
    range.filter(move |&q| q + 1 < end).map(|q| Link(q, q + 1))
}

fn baseline_intra(layout: &QubitLayout) -> Vec<Link> {
    chain(layout.near()).chain(chain(layout.far())).collect()
}

fn baseline_ce(layout: &QubitLayout) -> Link {
    Link(0, layout.near().start)
}

fn baseline_eep(layout: &QubitLayout) -> Link {
    Link(layout.near().end - 1, layout.far().start)
}

fn ring_closure(range: Range<usize>) -> Option<Link> {
    (range.len() >= 3).then(|| Link(range.start, range.end - 1))
}

fn next_nearest(range: Range<usize>) -> impl Iterator<Item = Link> {
    let end = range.end;
    range.filter(move |&q| q + 2 < end).map(|q| Link(q, q + 2))
}

/// Intra-environment link lists of the five variants. Links that would
/// duplicate chain links on short environments are dropped.
fn intra_variant(layout: &QubitLayout, id: u8) -> Result<Vec<Link>> {
    let mut links = baseline_intra(layout);
    let (near, far) = (layout.near(), layout.far());
    let extra: Vec<Link> = match id {
        1 => ring_closure(near).into_iter().collect(),
        2 => ring_closure(far).into_iter().collect(),
        3 => ring_closure(near).into_iter().chain(ring_closure(far)).collect(),
        4 => next_nearest(near).collect(),
        5 => ring_closure(near.clone())
            .into_iter()
            .chain(ring_closure(far.clone()))
            .chain(next_nearest(near))
            .chain(next_nearest(far))
            .collect(),
        _ => {
            return Err(Error::InvalidLayout {
                field: "preset.id",
                reason: format!("intra variant id must be 1..={INTRA_VARIANTS}, got {id}"),
            })
        }
    };
    let mut seen: HashSet<_> = links.iter().map(Link::key).collect();
    links.extend(extra.into_iter().filter(|l| seen.insert(l.key())));
    Ok(links)
}

/// Draws `nu` distinct near/far pairs uniformly without replacement.
/// The result is sorted and depends only on `(layout, nu, seed)`.
pub fn random_interlinks(layout: &QubitLayout, nu: usize, seed: u64) -> Result<Vec<Link>> {
    random_pairs(layout, nu, seed, &[])
}

/// Like [`random_interlinks`], but the returned set always contains the
/// baseline near/far link and `nu - 1` random others, so `nu = 1` is the
/// baseline chain.
pub fn anchored_interlinks(layout: &QubitLayout, nu: usize, seed: u64) -> Result<Vec<Link>> {
    if nu == 0 {
        return Err(Error::InvalidRun("nu must be at least 1".into()));
    }
    let anchor = baseline_eep(layout);
    let mut links = random_pairs(layout, nu - 1, seed, &[anchor])?;
    links.push(anchor);
    links.sort();
    Ok(links)
}

fn random_pairs(layout: &QubitLayout, nu: usize, seed: u64, exclude: &[Link]) -> Result<Vec<Link>> {
    let pool: Vec<Link> = layout
        .near()
        .flat_map(|j| layout.far().map(move |k| Link(j, k)))
        .filter(|l| !exclude.contains(l))
        .collect();
    if nu > pool.len() {
        return Err(Error::TooManyLinks { requested: nu + exclude.len(), available: pool.len() + exclude.len() });
    }
    let mut rng = rng::stream(seed, &[0x746f_706f]);
    let mut picked: Vec<Link> =
        rand::seq::index::sample(&mut rng, pool.len(), nu).into_iter().map(|i| pool[i]).collect();
    picked.sort();
    Ok(picked)
}

/// Builds and validates the configuration of a preset.
pub fn build_preset(
    preset: TopologyPreset,
    layout: QubitLayout,
    j: f64,
    lambda: f64,
    gamma: f64,
    fields: Fields,
) -> Result<ModelConfig> {
    QubitLayout::new(layout.n_c, layout.n_e, layout.n_ep)?;
    let want_nc: &[usize] = match preset {
        TopologyPreset::BaselineChain | TopologyPreset::IntraVariant { .. } => &[1],
        TopologyPreset::RandomInterlinks { .. } => &[1, 2],
        TopologyPreset::Spectator => &[2],
    };
    if !want_nc.contains(&layout.n_c) {
        return Err(Error::InvalidLayout {
            field: "n_c",
            reason: format!("preset {} needs n_c in {:?}, got {}", preset.name(), want_nc, layout.n_c),
        });
    }

    let intra_links = match preset {
        TopologyPreset::IntraVariant { id } => intra_variant(&layout, id)?,
        _ => baseline_intra(&layout),
    };
    let eep_links = match preset {
        TopologyPreset::RandomInterlinks { nu, seed } => {
            if nu == 0 {
                return Err(Error::InvalidRun("nu must be at least 1".into()));
            }
            random_interlinks(&layout, nu, seed)?
        }
        _ => vec![baseline_eep(&layout)],
    };
    let config = ModelConfig {
        schema_version: MODEL_SCHEMA_VERSION,
        layout,
        intra_links,
        ce_links: vec![baseline_ce(&layout)],
        eep_links,
        cep_links: Vec::new(),
        j,
        lambda,
        gamma,
        fields,
    };
    let violations = validate_signed(&config);
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(Error::InvalidConfig(violations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_layout() -> QubitLayout {
        QubitLayout::new(1, 6, 10).unwrap()
    }

    fn baseline() -> ModelConfig {
        build_preset(TopologyPreset::BaselineChain, full_layout(), 1.0, 0.01, 0.5, Fields::dephasing()).unwrap()
    }

    fn count_in(config: &ModelConfig, s: Subsystem) -> usize {
        let r = config.layout.range(s);
        config.intra_links.iter().filter(|l| r.contains(&l.0)).count()
    }

    #[test]
    fn baseline_full_layout_counts() {
        let c = baseline();
        assert_eq!(count_in(&c, Subsystem::Near), 5);
        assert_eq!(count_in(&c, Subsystem::Far), 9);
        assert_eq!(c.ce_links, vec![Link(0, 1)]);
        assert_eq!(c.eep_links, vec![Link(6, 7)]);
        assert!(validate(&c).is_empty());
    }

    #[test]
    fn baseline_minimal_layout() {
        let layout = QubitLayout::new(1, 1, 1).unwrap();
        let c = build_preset(TopologyPreset::BaselineChain, layout, 1.0, 0.01, 0.5, Fields::dephasing()).unwrap();
        assert!(c.intra_links.is_empty());
        assert_eq!(c.ce_links.len(), 1);
        assert_eq!(c.eep_links.len(), 1);
    }

    #[test]
    fn spectator_couples_only_qubit_zero() {
        let layout = QubitLayout::new(2, 6, 10).unwrap();
        let c = build_preset(TopologyPreset::Spectator, layout, 1.0, 0.01, 0.5, Fields::dephasing()).unwrap();
        assert!(c.ce_links.iter().all(|l| l.0 == 0));
        let touches_one = c
            .intra_links
            .iter()
            .chain(&c.ce_links)
            .chain(&c.eep_links)
            .any(|l| l.0 == 1 || l.1 == 1);
        assert!(!touches_one);
        assert!(validate(&c).is_empty());
    }

    #[test]
    fn preset_layout_mismatch_is_reported() {
        let two = QubitLayout::new(2, 6, 10).unwrap();
        let err = build_preset(TopologyPreset::BaselineChain, two, 1.0, 0.01, 0.5, Fields::dephasing()).unwrap_err();
        assert!(matches!(err, Error::InvalidLayout { field: "n_c", .. }), "{err}");
        let one = full_layout();
        let err = build_preset(TopologyPreset::Spectator, one, 1.0, 0.01, 0.5, Fields::dephasing()).unwrap_err();
        assert!(matches!(err, Error::InvalidLayout { field: "n_c", .. }), "{err}");
    }

    #[test]
    fn layout_limits() {
        assert!(QubitLayout::new(3, 1, 1).is_err());
        assert!(QubitLayout::new(1, 0, 1).is_err());
        assert!(QubitLayout::new(1, 1, 0).is_err());
        let err = QubitLayout::new(1, 20, 19).unwrap_err();
        assert!(err.to_string().contains("memory limit"), "{err}");
        assert!(QubitLayout::new(2, 11, 11).is_ok());
    }

    #[test]
    fn intra_variants_are_valid_and_distinct() {
        let mut seen = Vec::new();
        for id in 1..=INTRA_VARIANTS {
            let c = build_preset(TopologyPreset::IntraVariant { id }, full_layout(), 1.0, 0.01, 0.5, Fields::dephasing())
                .unwrap();
            assert!(validate(&c).is_empty(), "variant {id}");
            assert!(c.intra_links.len() > 14, "variant {id} adds links");
            assert!(!seen.contains(&c.intra_links));
            seen.push(c.intra_links);
        }
        assert!(build_preset(TopologyPreset::IntraVariant { id: 6 }, full_layout(), 1.0, 0.0, 0.0, Fields::default())
            .is_err());
    }

    #[test]
    fn random_interlinks_exhaustive() {
        let all = random_interlinks(&full_layout(), 60, 11).unwrap();
        assert_eq!(all.len(), 60);
        let set: HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), 60);
    }

    #[test]
    fn random_interlinks_deterministic() {
        let a = random_interlinks(&full_layout(), 6, 7).unwrap();
        let b = random_interlinks(&full_layout(), 6, 7).unwrap();
        assert_eq!(a, b);
        let c = random_interlinks(&full_layout(), 6, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_interlinks_sixteen_distinct() {
        let l = random_interlinks(&full_layout(), 16, 3).unwrap();
        assert_eq!(l.len(), 16);
        assert_eq!(l.iter().collect::<HashSet<_>>().len(), 16);
        let layout = full_layout();
        assert!(l.iter().all(|x| layout.near().contains(&x.0) && layout.far().contains(&x.1)));
    }

    #[test]
    fn random_interlinks_too_many() {
        let err = random_interlinks(&full_layout(), 61, 0).unwrap_err();
        assert!(matches!(err, Error::TooManyLinks { requested: 61, available: 60 }));
    }

    #[test]
    fn anchored_interlinks_contain_baseline() {
        let layout = full_layout();
        assert_eq!(anchored_interlinks(&layout, 1, 5).unwrap(), vec![Link(6, 7)]);
        let four = anchored_interlinks(&layout, 4, 5).unwrap();
        assert_eq!(four.len(), 4);
        assert!(four.contains(&Link(6, 7)));
        assert_eq!(anchored_interlinks(&layout, 60, 5).unwrap().len(), 60);
        assert!(anchored_interlinks(&layout, 61, 5).is_err());
    }

    #[test]
    fn validate_reports_duplicate_eep_link() {
        let mut c = baseline();
        c.eep_links.push(Link(6, 7));
        let v = validate(&c);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].field, "eep_links");
        assert!(v[0].rule.contains("duplicate") && v[0].rule.contains("(6, 7)"));
    }

    #[test]
    fn validate_reports_endpoint_outside_subsystem() {
        let mut c = baseline();
        c.ce_links.push(Link(0, 12));
        let v = validate(&c);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].rule.contains("endpoint outside subsystem"));
    }

    #[test]
    fn validate_sign_rules() {
        let mut c = baseline();
        c.gamma = -0.3;
        assert_eq!(validate(&c).len(), 1);
        assert!(validate_signed(&c).is_empty());
        c.intra_links.push(Link(3, 3));
        assert!(validate_signed(&c)[0].rule.contains("self-link"));
    }

    #[test]
    fn json_round_trip() {
        let c = baseline().with_far_coupling(1e-4, None);
        let back = ModelConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
        assert_eq!(back.cep_links[0].k, 16);
        let v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["J"], 1.0);
        assert_eq!(v["eep_links"][0], serde_json::json!([6, 7]));
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let mut v: serde_json::Value = serde_json::from_str(&baseline().to_json()).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(ModelConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn kick_field_helpers() {
        assert!(KickField::ZERO.is_zero());
        assert!((KickField::chaotic().magnitude() - 2f64.sqrt()).abs() < 1e-15);
        assert!((KickField::tilted(0.7).magnitude() - 0.7).abs() < 1e-15);
    }
}
