//! State-vector evolution under the kicked Ising Floquet map.
//!
//! One period applies every ZZ phase and then every single-qubit kick. All ZZ
//! terms are diagonal, so they are fused into a per-index phase table that is
//! built once per model and applied in a single multiply. Kicks on the low
//! qubits are applied inside the same cache-sized block as the phase multiply;
//! kicks on high qubits get one strided pass each.
//!
//! Writes are always to disjoint index pairs and each amplitude is computed
//! by the same arithmetic regardless of how the array is partitioned, so
//! results are bitwise independent of the thread count.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{self, ModelConfig, Subsystem, MAX_QUBITS};

/// 2×2 complex matrix, row major.
pub type Gate2 = [[C64; 2]; 2];

pub const IDENTITY: Gate2 = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];

/// Largest register the dense oracle will build.
pub const DENSE_MAX_QUBITS: usize = 10;

/// log2 of the block processed in one cache-resident sweep.
const BLOCK_BITS: usize = 12;
#[cfg(feature = "parallel")]
const PAR_MIN_LEN: usize = 1 << 14;

/// Pure state of `n` qubits: `2^n` amplitudes, qubit `j` is bit `j` of the index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// |0…0⟩.
    pub fn zero(n: usize) -> Self {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[index] = C64::new(1.0, 0.0);
        StateVector { n, amps }
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::DimensionMismatch { expected: len.next_power_of_two(), got: len });
        }
        Ok(StateVector { n: len.trailing_zeros() as usize, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let inv = 1.0 / self.norm();
        self.amps.iter_mut().for_each(|a| *a *= inv);
    }

    /// Little-endian dump: for each amplitude in index order, the real then
    /// the imaginary part as IEEE-754 f64.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 * self.amps.len());
        for a in &self.amps {
            out.extend_from_slice(&a.re.to_le_bytes());
            out.extend_from_slice(&a.im.to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self> {
        if !bytes.len().is_multiple_of(16) {
            return Err(Error::DimensionMismatch { expected: bytes.len() / 16 * 16, got: bytes.len() });
        }
        let f = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
        let amps = bytes.chunks_exact(16).map(|c| C64::new(f(&c[..8]), f(&c[8..]))).collect();
        Self::from_amplitudes(amps)
    }
}

/// Ising term `exp(-i·strength·σz_j σz_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZzGate {
    pub j: usize,
    pub k: usize,
    pub strength: f64,
}

/// Gate-level form of a model, ready for evolution.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    n: usize,
    zz_gates: Vec<ZzGate>,
    kick_gates: Vec<Gate2>,
    phases: Vec<C64>,
}

impl CompiledModel {
    /// Builds a model from explicit gates. ZZ gates are applied in ascending
    /// `(min, max)` qubit order; `kick_gates[q]` acts on qubit `q`.
    pub fn from_gates(n: usize, mut zz_gates: Vec<ZzGate>, kick_gates: Vec<Gate2>) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::TooLarge { n, limit: MAX_QUBITS });
        }
        if kick_gates.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: kick_gates.len() });
        }
        for g in &mut zz_gates {
            check_pair(n, g.j, g.k)?;
            if g.j > g.k {
                std::mem::swap(&mut g.j, &mut g.k);
            }
        }
        zz_gates.sort_by_key(|g| (g.j, g.k));
        for g in &kick_gates {
            check_unitary(g)?;
        }
        let phases = phase_table(n, &zz_gates);
        Ok(CompiledModel { n, zz_gates, kick_gates, phases })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn zz_gates(&self) -> &[ZzGate] {
        &self.zz_gates
    }

    pub fn kick_gates(&self) -> &[Gate2] {
        &self.kick_gates
    }

    /// Keeps the first `n` qubits and drops every gate touching the rest.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let zz = self.zz_gates.iter().copied().filter(|g| g.k < n).collect();
        Self::from_gates(n, zz, self.kick_gates[..n.min(self.n)].to_vec())
    }
}

/// `exp(-i b·σ) = cos|b|·1 − i·sin|b|·(b̂·σ)`.
pub fn kick_matrix(b: model::KickField) -> Gate2 {
    let m = b.magnitude();
    if m == 0.0 {
        return IDENTITY;
    }
    let (nx, ny, nz) = (b.bx / m, b.by / m, b.bz / m);
    let (s, c) = m.sin_cos();
    let mi = C64::new(0.0, -s);
    [
        [C64::new(c, 0.0) + mi * nz, mi * C64::new(nx, -ny)],
        [mi * C64::new(nx, ny), C64::new(c, 0.0) - mi * nz],
    ]
}

/// Compiles a strictly valid configuration.
pub fn compile(config: &ModelConfig) -> Result<CompiledModel> {
    let v = model::validate(config);
    if !v.is_empty() {
        return Err(Error::InvalidConfig(v));
    }
    compile_resolved(config)
}

/// Compiles a configuration that may carry negative `lambda`/`gamma`.
pub fn compile_signed(config: &ModelConfig) -> Result<CompiledModel> {
    let v = model::validate_signed(config);
    if !v.is_empty() {
        return Err(Error::InvalidConfig(v));
    }
    compile_resolved(config)
}

fn compile_resolved(config: &ModelConfig) -> Result<CompiledModel> {
    let layout = config.layout;
    let resolved = |links: &[model::Link], strength: f64| {
        links.iter().map(move |l| ZzGate { j: l.0, k: l.1, strength }).collect::<Vec<_>>()
    };
    let mut zz = resolved(&config.intra_links, config.j);
    zz.extend(resolved(&config.ce_links, config.lambda));
    zz.extend(resolved(&config.eep_links, config.gamma));
    zz.extend(config.cep_links.iter().map(|w| ZzGate { j: w.j, k: w.k, strength: w.strength }));
    let kicks = (0..layout.n_qubits())
        .map(|q| {
            let s = layout.subsystem_of(q).unwrap_or(Subsystem::Far);
            kick_matrix(config.fields.get(s))
        })
        .collect();
    CompiledModel::from_gates(layout.n_qubits(), zz, kicks)
}

fn check_pair(n: usize, j: usize, k: usize) -> Result<()> {
    for q in [j, k] {
        if q >= n {
            return Err(Error::IndexOutOfRange { index: q, n });
        }
    }
    if j == k {
        return Err(Error::SameQubit(j));
    }
    Ok(())
}

fn unitarity_deviation(g: &Gate2) -> f64 {
    let mut dev: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let dot = g[0][r].conj() * g[0][c] + g[1][r].conj() * g[1][c];
            let want = if r == c { 1.0 } else { 0.0 };
            dev = dev.max((dot - want).norm());
        }
    }
    dev
}

fn check_unitary(g: &Gate2) -> Result<()> {
    let deviation = unitarity_deviation(g);
    if deviation > 1e-12 || deviation.is_nan() {
        return Err(Error::NonUnitaryGate { deviation });
    }
    Ok(())
}

fn phase_table(n: usize, gates: &[ZzGate]) -> Vec<C64> {
    let angle = |x: usize| -> C64 {
        let theta: f64 = gates
            .iter()
            .map(|g| {
                let anti = ((x >> g.j) ^ (x >> g.k)) & 1;
                if anti == 0 {
                    g.strength
                } else {
                    -g.strength
                }
            })
            .sum();
        let (s, c) = theta.sin_cos();
        C64::new(c, -s)
    };
    let len = 1usize << n;
    #[cfg(feature = "parallel")]
    if len >= PAR_MIN_LEN {
        return (0..len).into_par_iter().map(angle).collect();
    }
    (0..len).map(angle).collect()
}

fn check_state(state: &StateVector, q: usize) -> Result<()> {
    if q >= state.n {
        return Err(Error::IndexOutOfRange { index: q, n: state.n });
    }
    Ok(())
}

/// Multiplies each amplitude by `exp(-i·strength·s_j·s_k)`, `s = ±1` for bit 0/1.
pub fn apply_zz_phase(state: &mut StateVector, j: usize, k: usize, strength: f64) -> Result<()> {
    check_pair(state.n, j, k)?;
    let (s, c) = strength.sin_cos();
    let same = C64::new(c, -s);
    let anti = C64::new(c, s);
    for (x, a) in state.amps.iter_mut().enumerate() {
        *a *= if ((x >> j) ^ (x >> k)) & 1 == 0 { same } else { anti };
    }
    Ok(())
}

/// Applies a single-qubit unitary to qubit `j`.
pub fn apply_kick(state: &mut StateVector, j: usize, gate: &Gate2) -> Result<()> {
    check_state(state, j)?;
    check_unitary(gate)?;
    kick_pass(&mut state.amps, j, gate);
    Ok(())
}

#[inline(always)]
fn rotate_pair(lo: &mut C64, hi: &mut C64, g: &Gate2) {
    let (a, b) = (*lo, *hi);
    *lo = g[0][0] * a + g[0][1] * b;
    *hi = g[1][0] * a + g[1][1] * b;
}

#[inline(always)]
fn rotate_halves(lo: &mut [C64], hi: &mut [C64], g: &Gate2) {
    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
        rotate_pair(a, b, g);
    }
}

/// Applies `g` to qubit `j` of every index inside `block` (block length is a
/// multiple of `2^(j+1)`).
#[inline(always)]
fn kick_block(block: &mut [C64], j: usize, g: &Gate2) {
    let h = 1usize << j;
    for chunk in block.chunks_exact_mut(2 * h) {
        let (lo, hi) = chunk.split_at_mut(h);
        rotate_halves(lo, hi, g);
    }
}

#[inline(always)]
fn fused_block(block: &mut [C64], phases: &[C64], kicks: &[(usize, Gate2)]) {
    for (a, p) in block.iter_mut().zip(phases) {
        *a *= *p;
    }
    for (j, g) in kicks {
        kick_block(block, *j, g);
    }
}

/// Instruction set the block kernels run with, picked once at runtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Isa {
    Generic,
    #[cfg(target_arch = "x86_64")]
    Avx2Fma,
}

fn isa() -> Isa {
    #[cfg(target_arch = "x86_64")]
    {
        static ISA: std::sync::OnceLock<Isa> = std::sync::OnceLock::new();
        *ISA.get_or_init(|| {
            if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
                Isa::Avx2Fma
            } else {
                Isa::Generic
            }
        })
    }
    #[cfg(not(target_arch = "x86_64"))]
    Isa::Generic
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    use super::*;

    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn kick_block(block: &mut [C64], j: usize, g: &Gate2) {
        super::kick_block(block, j, g)
    }

    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn rotate_halves(lo: &mut [C64], hi: &mut [C64], g: &Gate2) {
        super::rotate_halves(lo, hi, g)
    }

    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn fused_block(block: &mut [C64], phases: &[C64], kicks: &[(usize, Gate2)]) {
        super::fused_block(block, phases, kicks)
    }
}

fn dispatch_kick_block(isa: Isa, block: &mut [C64], j: usize, g: &Gate2) {
    match isa {
        Isa::Generic => kick_block(block, j, g),
        // SAFETY: Avx2Fma is only selected after runtime feature detection.
        #[cfg(target_arch = "x86_64")]
        Isa::Avx2Fma => unsafe { avx2::kick_block(block, j, g) },
    }
}

fn dispatch_rotate_halves(isa: Isa, lo: &mut [C64], hi: &mut [C64], g: &Gate2) {
    match isa {
        Isa::Generic => rotate_halves(lo, hi, g),
        // SAFETY: as above.
        #[cfg(target_arch = "x86_64")]
        Isa::Avx2Fma => unsafe { avx2::rotate_halves(lo, hi, g) },
    }
}

fn dispatch_fused_block(isa: Isa, block: &mut [C64], phases: &[C64], kicks: &[(usize, Gate2)]) {
    match isa {
        Isa::Generic => fused_block(block, phases, kicks),
        // SAFETY: as above.
        #[cfg(target_arch = "x86_64")]
        Isa::Avx2Fma => unsafe { avx2::fused_block(block, phases, kicks) },
    }
}

fn kick_pass(amps: &mut [C64], j: usize, g: &Gate2) {
    let isa = isa();
    let h = 1usize << j;
    #[cfg(feature = "parallel")]
    if amps.len() >= PAR_MIN_LEN {
        if h >= PAR_MIN_LEN / 4 {
            for chunk in amps.chunks_exact_mut(2 * h) {
                let (lo, hi) = chunk.split_at_mut(h);
                lo.par_chunks_mut(1 << BLOCK_BITS)
                    .zip(hi.par_chunks_mut(1 << BLOCK_BITS))
                    .for_each(|(l, r)| dispatch_rotate_halves(isa, l, r, g));
            }
        } else {
            let per = (1usize << BLOCK_BITS).max(2 * h);
            amps.par_chunks_mut(per).for_each(|b| dispatch_kick_block(isa, b, j, g));
        }
        return;
    }
    if h >= 1 << BLOCK_BITS {
        for chunk in amps.chunks_exact_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            dispatch_rotate_halves(isa, lo, hi, g);
        }
    } else {
        dispatch_kick_block(isa, amps, j, g);
    }
}

fn is_identity(g: &Gate2) -> bool {
    *g == IDENTITY
}

/// Order of the two half-steps inside one period.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepOrder {
    #[default]
    IsingThenKick,
    /// Deliberately wrong order, used to check that the oracle comparison
    /// detects a broken engine.
    KickThenIsing,
}

/// One Floquet period: all ZZ phases, then all kicks.
pub fn floquet_step(state: &mut StateVector, model: &CompiledModel) -> Result<()> {
    floquet_step_ordered(state, model, StepOrder::IsingThenKick)
}

#[doc(hidden)]
pub fn floquet_step_ordered(state: &mut StateVector, model: &CompiledModel, order: StepOrder) -> Result<()> {
    if state.n != model.n {
        return Err(Error::DimensionMismatch { expected: model.n, got: state.n });
    }
    match order {
        StepOrder::IsingThenKick => fused_step(&mut state.amps, model),
        StepOrder::KickThenIsing => {
            for (j, g) in model.kick_gates.iter().enumerate() {
                kick_pass(&mut state.amps, j, g);
            }
            state.amps.iter_mut().zip(&model.phases).for_each(|(a, p)| *a *= *p);
        }
    }
    Ok(())
}

fn fused_step(amps: &mut [C64], model: &CompiledModel) {
    let block_bits = BLOCK_BITS.min(model.n);
    let block = 1usize << block_bits;
    let low: Vec<(usize, Gate2)> = model.kick_gates[..block_bits]
        .iter()
        .enumerate()
        .filter(|(_, g)| !is_identity(g))
        .map(|(j, g)| (j, *g))
        .collect();

    let isa = isa();
    #[cfg(feature = "parallel")]
    if amps.len() >= PAR_MIN_LEN {
        amps.par_chunks_mut(block)
            .zip(model.phases.par_chunks(block))
            .for_each(|(b, p)| dispatch_fused_block(isa, b, p, &low));
    } else {
        amps.chunks_mut(block).zip(model.phases.chunks(block)).for_each(|(b, p)| dispatch_fused_block(isa, b, p, &low));
    }
    #[cfg(not(feature = "parallel"))]
    amps.chunks_mut(block).zip(model.phases.chunks(block)).for_each(|(b, p)| dispatch_fused_block(isa, b, p, &low));

    for (j, g) in model.kick_gates.iter().enumerate().skip(block_bits) {
        if !is_identity(g) {
            kick_pass(amps, j, g);
        }
    }
}

/// Applies `steps` Floquet periods.
pub fn evolve(state: &mut StateVector, model: &CompiledModel, steps: u64) -> Result<()> {
    for _ in 0..steps {
        floquet_step(state, model)?;
    }
    Ok(())
}

fn embed(n: usize, ops: &[(usize, DMatrix<C64>)]) -> DMatrix<C64> {
    let id = DMatrix::<C64>::identity(2, 2);
    let mut full = DMatrix::<C64>::identity(1, 1);
    for q in (0..n).rev() {
        let op = ops.iter().find(|(j, _)| *j == q).map(|(_, m)| m).unwrap_or(&id);
        full = full.kronecker(op);
    }
    full
}

fn gate_dm(g: &Gate2) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |r, c| g[r][c])
}

/// Explicit `2^n × 2^n` Floquet matrix built from Kronecker-embedded gates,
/// in the same order as [`floquet_step`]. Verification only.
pub fn dense_floquet_matrix(model: &CompiledModel) -> Result<DMatrix<C64>> {
    let n = model.n;
    if n > DENSE_MAX_QUBITS {
        return Err(Error::TooLarge { n, limit: DENSE_MAX_QUBITS });
    }
    let dim = 1usize << n;
    let z = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)]);
    let mut ising = DMatrix::<C64>::identity(dim, dim);
    for g in &model.zz_gates {
        let zz = embed(n, &[(g.j, z.clone()), (g.k, z.clone())]);
        let (s, c) = g.strength.sin_cos();
        let term = DMatrix::<C64>::identity(dim, dim) * C64::new(c, 0.0) - zz * C64::new(0.0, s);
        ising = term * ising;
    }
    let kicks: Vec<(usize, DMatrix<C64>)> = model.kick_gates.iter().enumerate().map(|(q, g)| (q, gate_dm(g))).collect();
    let kick = embed(n, &kicks);
    Ok(kick * ising)
}

/// Haar-random pure state: i.i.d. standard complex Gaussian amplitudes,
/// normalized.
pub fn haar_random_state<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> StateVector {
    let amps = (0..1usize << n_qubits)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im)
        })
        .collect();
    let mut s = StateVector { n: n_qubits, amps };
    s.normalize();
    s
}

/// Tensor product; the first part occupies the lowest qubit indices.
pub fn product_state(parts: &[StateVector]) -> StateVector {
    let mut acc = StateVector { n: 0, amps: vec![C64::new(1.0, 0.0)] };
    for p in parts {
        let mut amps = Vec::with_capacity(acc.amps.len() * p.amps.len());
        for hi in &p.amps {
            amps.extend(acc.amps.iter().map(|lo| lo * hi));
        }
        acc = StateVector { n: acc.n + p.n, amps };
    }
    acc
}
