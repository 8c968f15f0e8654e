//! Reduced states, purity, concurrence and the concurrence–purity reference
//! curves.

use nalgebra::{Matrix4, Schur};
use num_complex::Complex64 as C64;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::StateVector;
use crate::error::{Error, Result};

/// Eigenvalues of ρρ̃ with magnitude below this are roundoff and are set to
/// zero before the square root.
const EIGEN_ZERO: f64 = 1e-13;
/// Largest negative eigenvalue accepted (and clamped) before failing.
const EIGEN_NEGATIVE_FAIL: f64 = -1e-6;
/// Largest imaginary part accepted on an eigenvalue of ρρ̃.
const EIGEN_IMAG_FAIL: f64 = 1e-8;

/// Density matrix of one or two qubits, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl DensityMatrix {
    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim != 2 && dim != 4 {
            return Err(Error::WrongDimension { expected: 4, got: dim });
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: entries.len() });
        }
        Ok(DensityMatrix { dim, entries })
    }

    /// |ψ⟩⟨ψ| for a one- or two-qubit state vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let d = psi.len();
        let entries = (0..d * d).map(|i| psi[i / d] * psi[i % d].conj()).collect();
        Self::from_entries(d, entries)
    }

    /// 𝟙/dim.
    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        let v = 1.0 / dim as f64;
        Self::from_entries(dim, (0..dim * dim).map(|i| if i % (dim + 1) == 0 { C64::new(v, 0.0) } else { C64::new(0.0, 0.0) }).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.entries[r * self.dim + c]
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `self·a + other·(1 − a)`.
    pub fn mix(&self, other: &DensityMatrix, a: f64) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::WrongDimension { expected: self.dim, got: other.dim });
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(x, y)| x * a + y * (1.0 - a)).collect();
        Self::from_entries(self.dim, entries)
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim;
        (0..d * d).map(|i| (self.get(i / d, i % d) - self.get(i % d, i / d).conj()).norm()).fold(0.0, f64::max)
    }

    fn to_matrix4(&self) -> Result<Matrix4<C64>> {
        if self.dim != 4 {
            return Err(Error::WrongDimension { expected: 4, got: self.dim });
        }
        Ok(Matrix4::from_row_slice(&self.entries))
    }
}

/// Point of the concurrence–purity plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CPPoint {
    pub purity: f64,
    pub concurrence: f64,
    pub time: u64,
}

const TRACE_CHUNK: usize = 1 << 12;

/// Traces out every qubit above the lowest `n_central`.
///
/// `ρ[a, b] = Σ_E ψ[a + d·E]·conj(ψ[b + d·E])` with `d = 2^n_central`. Partial
/// sums are formed over fixed chunks and added in index order, so the result
/// does not depend on the thread count.
pub fn reduced_density(state: &StateVector, n_central: usize) -> Result<DensityMatrix> {
    if !(1..=2).contains(&n_central) || n_central > state.n_qubits() {
        return Err(Error::DimensionMismatch { expected: state.n_qubits().min(2), got: n_central });
    }
    let d = 1usize << n_central;
    let accumulate = |chunk: &[C64]| -> Vec<C64> {
        let mut acc = vec![C64::new(0.0, 0.0); d * d];
        for env in chunk.chunks_exact(d) {
            for a in 0..d {
                for b in 0..d {
                    acc[a * d + b] += env[a] * env[b].conj();
                }
            }
        }
        acc
    };
    let amps = state.amplitudes();
    #[cfg(feature = "parallel")]
    let partials: Vec<Vec<C64>> = amps.par_chunks(TRACE_CHUNK).map(accumulate).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<Vec<C64>> = amps.chunks(TRACE_CHUNK).map(accumulate).collect();

    let mut entries = vec![C64::new(0.0, 0.0); d * d];
    for p in partials {
        entries.iter_mut().zip(p).for_each(|(e, x)| *e += x);
    }
    DensityMatrix::from_entries(d, entries)
}

/// tr ρ² = Σ |ρ_ij|².
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.entries.iter().map(|x| x.norm_sqr()).sum()
}

/// ⟨σz⟩ = ρ₀₀ − ρ₁₁ of a single qubit.
pub fn sigma_z_expectation(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim != 2 {
        return Err(Error::WrongDimension { expected: 2, got: rho.dim });
    }
    Ok((rho.get(0, 0) - rho.get(1, 1)).re)
}

/// ρ̃ = (σy⊗σy) ρ* (σy⊗σy) in the computational basis.
pub fn spin_flip(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let m = rho.to_matrix4()?;
    // σy⊗σy maps |b⟩ to sign(b)·|3 − b⟩ with sign −1 for |00⟩, |11⟩.
    let sign = |b: usize| if b == 0 || b == 3 { -1.0 } else { 1.0 };
    let entries = (0..16)
        .map(|i| {
            let (r, c) = (i / 4, i % 4);
            m[(3 - r, 3 - c)].conj() * (sign(3 - r) * sign(3 - c))
        })
        .collect();
    DensityMatrix::from_entries(4, entries)
}

/// Wootters concurrence `max{0, λ̃₁ − λ̃₂ − λ̃₃ − λ̃₄}`, where λ̃ are the
/// descending square roots of the eigenvalues of ρρ̃.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    let m = rho.to_matrix4()?;
    let flipped = spin_flip(rho)?.to_matrix4()?;
    let product = m * flipped;
    let eig = Schur::try_new(product, 1e-15, 10_000)
        .and_then(|s| s.eigenvalues())
        .ok_or_else(|| Error::NumericalFailure("eigensolver did not converge on ρρ̃".into()))?;

    let mut roots = [0.0f64; 4];
    for (r, mu) in roots.iter_mut().zip(eig.iter()) {
        if mu.im.abs() > EIGEN_IMAG_FAIL {
            return Err(Error::NumericalFailure(format!("eigenvalue {mu} of ρρ̃ has a large imaginary part")));
        }
        if mu.re < EIGEN_NEGATIVE_FAIL {
            return Err(Error::NumericalFailure(format!("eigenvalue {mu} of ρρ̃ is negative")));
        }
        *r = if mu.re.abs() <= EIGEN_ZERO { 0.0 } else { mu.re.max(0.0).sqrt() };
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    Ok((roots[0] - roots[1] - roots[2] - roots[3]).max(0.0))
}

/// (|00⟩ + |11⟩)/√2.
pub fn bell_phi_plus() -> DensityMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    DensityMatrix::pure(&[C64::new(h, 0.0), z, z, C64::new(h, 0.0)]).expect("4 amplitudes")
}

/// p·|Φ+⟩⟨Φ+| + (1 − p)·𝟙/4.
pub fn werner_state(p: f64) -> DensityMatrix {
    bell_phi_plus().mix(&DensityMatrix::maximally_mixed(4).unwrap(), p).unwrap()
}

/// |Φ+⟩⟨Φ+| with the |00⟩⟨11| coherences scaled by `kappa`.
pub fn dephased_bell(kappa: f64) -> DensityMatrix {
    let mut e = bell_phi_plus().entries;
    e[3] *= kappa;
    e[12] *= kappa;
    DensityMatrix { dim: 4, entries: e }
}

fn sample_curve(n_samples: usize, state: impl Fn(f64) -> DensityMatrix) -> Result<Vec<CPPoint>> {
    if n_samples < 2 {
        return Err(Error::InvalidRun(format!("curves need at least 2 samples, got {n_samples}")));
    }
    (0..n_samples)
        .map(|i| {
            let rho = state(i as f64 / (n_samples - 1) as f64);
            Ok(CPPoint { purity: purity(&rho), concurrence: concurrence(&rho)?, time: 0 })
        })
        .collect()
}

/// Werner family sampled uniformly in `p ∈ [0, 1]`.
pub fn werner_curve(n_samples: usize) -> Result<Vec<CPPoint>> {
    sample_curve(n_samples, werner_state)
}

/// Phase-damped Bell state sampled uniformly in `κ ∈ [0, 1]`.
pub fn dephasing_curve(n_samples: usize) -> Result<Vec<CPPoint>> {
    sample_curve(n_samples, dephased_bell)
}

/// Region of the C–P plane between the dephasing curve (below) and the
/// Werner curve (above). Below the purity range of the dephasing curve the
/// lower bound is C = 0.
#[derive(Debug, Clone)]
pub struct UnitalRegion {
    upper: Vec<(f64, f64)>,
    lower: Vec<(f64, f64)>,
}

fn sorted_pairs(points: &[CPPoint]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = points.iter().map(|p| (p.purity, p.concurrence)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

fn interpolate(curve: &[(f64, f64)], p: f64) -> Option<f64> {
    let first = curve.first()?;
    let last = curve.last()?;
    if p < first.0 || p > last.0 {
        return None;
    }
    let i = curve.partition_point(|q| q.0 < p);
    if i == 0 {
        return Some(first.1);
    }
    let (a, b) = (curve[i - 1], curve[i]);
    if b.0 == a.0 {
        return Some(a.1.max(b.1));
    }
    Some(a.1 + (b.1 - a.1) * (p - a.0) / (b.0 - a.0))
}

impl UnitalRegion {
    pub fn new(werner: &[CPPoint], dephasing: &[CPPoint]) -> Self {
        UnitalRegion { upper: sorted_pairs(werner), lower: sorted_pairs(dephasing) }
    }

    pub fn with_samples(n_samples: usize) -> Result<Self> {
        Ok(Self::new(&werner_curve(n_samples)?, &dephasing_curve(n_samples)?))
    }

    /// Werner concurrence at purity `p`, if `p` lies in the curve's range.
    pub fn upper_at(&self, p: f64) -> Option<f64> {
        interpolate(&self.upper, p)
    }

    pub fn lower_at(&self, p: f64) -> f64 {
        match self.lower.first() {
            Some(first) if p >= first.0 => interpolate(&self.lower, p).unwrap_or(1.0),
            _ => 0.0,
        }
    }

    /// Whether `point` lies between the curves within `tol` in concurrence.
    pub fn contains(&self, point: &CPPoint, tol: f64) -> bool {
        let p = point.purity.clamp(self.upper[0].0, 1.0);
        let Some(upper) = self.upper_at(p) else { return false };
        point.concurrence <= upper + tol && point.concurrence >= self.lower_at(p) - tol
    }
}
