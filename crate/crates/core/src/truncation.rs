//! Truncation of a dense unit vector into a mixture of sparse unit vectors,
//! the ℓ₂ bound that follows from the mixture's trace distance, and the
//! state preparation of the mixture's amplitude sum.
//!
//! Members have pairwise disjoint supports. Every candidate splits the
//! magnitude-sorted support into a core of the `c` largest entries and up to
//! `G` contiguous tail groups, each member keeping the `m` largest entries of
//! its block with `c, m ≤ s`. The candidate with the smallest measured trace
//! distance wins. Because every candidate valid for `s` stays valid for
//! `s + 1`, the measured distance is non-increasing in `s`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::block_encoding::{be_lcu, BlockEncoding};
use crate::error::{Error, Result};
use crate::linalg::{complete_unitary, trace_norm_hermitian, CMatrix, CVector, C64};
use crate::resources;

/// Default number of tail groups.
pub const DEFAULT_TAIL_GROUPS: usize = 8;

/// Tolerance on the unit norm of the input vector.
pub const UNIT_TOL: f64 = 1e-10;

/// One sparse member of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMember {
    pub probability: f64,
    pub vector: CVector,
    /// Sorted indices of the nonzero entries.
    pub support: Vec<usize>,
}

/// Mixture `Σ_j p_j w_j w_j†` of `s`-sparse unit vectors approximating `v v†`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEnsemble {
    pub members: Vec<EnsembleMember>,
    pub sparsity: usize,
    /// `‖v v† − Σ_j p_j w_j w_j†‖_tr`.
    pub measured_trace_dist: f64,
    pub source_dim: usize,
}

impl SparseEnsemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `Σ_j p_j w_j w_j†`.
    pub fn average(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.source_dim, self.source_dim);
        for m in &self.members {
            out = &out + &m.vector.projector().scale_real(m.probability);
        }
        out
    }

    /// Trace distance to `v v†` computed from dense matrices.
    pub fn dense_trace_dist(&self, v: &CVector) -> f64 {
        trace_norm_hermitian(&(&v.projector() - &self.average()))
    }

    /// `Σ_j √p_j`.
    pub fn root_weight_sum(&self) -> f64 {
        self.members.iter().map(|m| m.probability.sqrt()).sum()
    }

    /// Checks the ensemble invariants against the source vector.
    pub fn validate(&self, v: &CVector) -> Result<()> {
        let total: f64 = self.members.iter().map(|m| m.probability).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::WeightsNotNormalized { sum: total });
        }
        for m in &self.members {
            let norm = m.vector.norm();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::NotUnit { norm });
            }
            if m.support.len() > self.sparsity || m.vector.support(0.0).iter().any(|i| !m.support.contains(i)) {
                return Err(Error::SparsityOutOfRange { s: m.support.len(), dim: self.source_dim });
            }
        }
        let dense = self.dense_trace_dist(v);
        if (dense - self.measured_trace_dist).abs() > 1e-10 {
            return Err(Error::InvalidConfig(format!(
                "recorded trace distance {} differs from recomputed {dense}",
                self.measured_trace_dist
            )));
        }
        Ok(())
    }
}

/// Truncates `v` into `s`-sparse members with the default group count.
pub fn randomized_truncate(v: &CVector, s: usize) -> Result<SparseEnsemble> {
    randomized_truncate_with_groups(v, s, DEFAULT_TAIL_GROUPS)
}

/// Truncates `v` into at most `groups + 1` members of sparsity at most `s`.
pub fn randomized_truncate_with_groups(v: &CVector, s: usize, groups: usize) -> Result<SparseEnsemble> {
    let d = v.len();
    let norm = v.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnit { norm });
    }
    if s == 0 || s > d {
        return Err(Error::SparsityOutOfRange { s, dim: d });
    }
    if groups == 0 {
        return Err(Error::InvalidConfig("tail group count must be positive".into()));
    }
    let mut order = v.support(0.0);
    if order.len() <= s {
        let member = EnsembleMember { probability: 1.0, vector: v.clone(), support: order };
        return Ok(SparseEnsemble { members: vec![member], sparsity: s, measured_trace_dist: 0.0, source_dim: d });
    }
    order.sort_by(|&a, &b| v.0[b].norm().total_cmp(&v.0[a].norm()).then(a.cmp(&b)));
    let weights: Vec<f64> = order.iter().map(|&i| v.0[i].norm_sqr()).collect();

    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    for core in 0..=s.min(order.len() - 1) {
        let tail = order.len() - core;
        for g in 1..=groups.min(tail) {
            for keep in 1..=s {
                let blocks = candidate_blocks(core, tail, g, keep);
                let eps = reduced_trace_dist(&blocks, &weights);
                if best.as_ref().is_none_or(|(b, _)| eps < *b) {
                    best = Some((eps, blocks));
                }
            }
        }
    }
    let (measured_trace_dist, blocks) = best.expect("at least one candidate");
    let kept: f64 = blocks.iter().flatten().map(|&k| weights[k]).sum();
    let members = blocks
        .iter()
        .map(|block| {
            let mass: f64 = block.iter().map(|&k| weights[k]).sum();
            let mut support: Vec<usize> = block.iter().map(|&k| order[k]).collect();
            support.sort_unstable();
            let mut vector = CVector::zeros(d);
            for &i in &support {
                vector.0[i] = v.0[i] / mass.sqrt();
            }
            EnsembleMember { probability: mass / kept, vector, support }
        })
        .collect();
    Ok(SparseEnsemble { members, sparsity: s, measured_trace_dist, source_dim: d })
}

/// Positions (into the sorted order) kept by each member of one candidate.
fn candidate_blocks(core: usize, tail: usize, groups: usize, keep: usize) -> Vec<Vec<usize>> {
    let mut blocks = Vec::with_capacity(groups + 1);
    if core > 0 {
        blocks.push((0..core).collect());
    }
    let (base, extra) = (tail / groups, tail % groups);
    let mut start = core;
    for j in 0..groups {
        let size = base + usize::from(j < extra);
        blocks.push((start..start + size.min(keep)).collect());
        start += size;
    }
    blocks
}

/// Trace distance of a disjoint-support candidate in the orthonormal basis
/// of the blocks and the dropped remainder, where `v v†` is `a aᵀ` with
/// `a_j = √m_j` and the mixture is `diag(m_j / K)`.
fn reduced_trace_dist(blocks: &[Vec<usize>], weights: &[f64]) -> f64 {
    let masses: Vec<f64> = blocks.iter().map(|b| b.iter().map(|&k| weights[k]).sum()).collect();
    let kept: f64 = masses.iter().sum();
    let dropped = (1.0 - kept).max(0.0);
    let mut amps: Vec<f64> = masses.iter().map(|m| m.sqrt()).collect();
    amps.push(dropped.sqrt());
    let n = amps.len();
    let diff = DMatrix::from_fn(n, n, |i, j| {
        let mix = if i == j && i < masses.len() { masses[i] / kept } else { 0.0 };
        amps[i] * amps[j] - mix
    });
    SymmetricEigen::new(diff).eigenvalues.iter().map(|x| x.abs()).sum()
}

/// Both sides of `‖v − Σ_j √p_j w_j‖₂ ≤ √ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `w_j` times the phase that makes `⟨w_j|v⟩` real and nonnegative.
fn phase_aligned(w: &CVector, v: &CVector) -> CVector {
    let overlap = w.inner(v);
    if overlap.norm() > 0.0 {
        w.scale(overlap / overlap.norm())
    } else {
        w.clone()
    }
}

/// `Σ_j √p_j w_j` with phase-aligned members.
pub fn amplitude_sum(v: &CVector, e: &SparseEnsemble) -> CVector {
    e.members.iter().fold(CVector::zeros(v.len()), |acc, m| {
        acc.add(&phase_aligned(&m.vector, v).scale(C64::new(m.probability.sqrt(), 0.0)))
    })
}

/// Evaluates the ℓ₂ bound implied by the ensemble's trace distance.
pub fn check_amplitude_bound(v: &CVector, e: &SparseEnsemble) -> AmplitudeBoundCheck {
    let lhs = v.sub(&amplitude_sum(v, e)).norm();
    let rhs = e.measured_trace_dist.sqrt();
    AmplitudeBoundCheck { lhs, rhs, holds: lhs <= rhs + 1e-9 }
}

/// Intermediate sums of the magnitude argument behind the ℓ₂ bound, with
/// `a_i = Σ_j √p_j |w_ji|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnitudeChain {
    /// `Σ_i | |v_i|² − a_i² |`.
    pub squared_gap: f64,
    /// `Σ_i | |v_i|² − a_i |`.
    pub mixed_gap: f64,
    pub eps: f64,
}

impl MagnitudeChain {
    pub fn first_step_holds(&self) -> bool {
        self.squared_gap <= self.mixed_gap + 1e-12
    }

    pub fn second_step_holds(&self) -> bool {
        self.mixed_gap <= self.eps + 1e-12
    }
}

pub fn magnitude_chain(v: &CVector, e: &SparseEnsemble) -> MagnitudeChain {
    let mut squared_gap = 0.0;
    let mut mixed_gap = 0.0;
    for (i, vi) in v.0.iter().enumerate() {
        let a: f64 = e.members.iter().map(|m| m.probability.sqrt() * m.vector.0[i].norm()).sum();
        squared_gap += (vi.norm_sqr() - a * a).abs();
        mixed_gap += (vi.norm_sqr() - a).abs();
    }
    MagnitudeChain { squared_gap, mixed_gap, eps: e.measured_trace_dist }
}

/// Prepared state of an ensemble together with its post-selection statistics.
#[derive(Debug, Clone)]
pub struct EnsemblePreparation {
    pub encoding: BlockEncoding,
    /// Normalized post-selected state `∝ Σ_j √p_j w_j`.
    pub state: CVector,
    /// Probability of the all-zero select outcome, read from the emulated amplitudes.
    pub success_prob: f64,
}

impl EnsemblePreparation {
    /// `(Σ_j √p_j)^{-2}`.
    pub fn formula_success_prob(e: &SparseEnsemble) -> f64 {
        e.root_weight_sum().powi(-2)
    }
}

/// Combines one state-preparation unitary per member by an LCU with
/// weights `√p_j / Σ√p_j` and reads the post-selected state from the
/// first column of the encoded block.
pub fn ensemble_prepare(e: &SparseEnsemble) -> Result<EnsemblePreparation> {
    let total = e.root_weight_sum();
    let parts = e
        .members
        .iter()
        .map(|m| {
            let u = complete_unitary(&m.vector)?;
            Ok(BlockEncoding::from_unitary(u, "stateprep")?
                .with_cost(resources::state_prep_cost(m.support.len(), e.source_dim)))
        })
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = e.members.iter().map(|m| m.probability.sqrt() / total).collect();
    let encoding = be_lcu(&parts, &weights)?;
    let amplitudes = encoding.block().column(0);
    let success_prob = amplitudes.norm().powi(2);
    let state = amplitudes.normalized();
    Ok(EnsemblePreparation { encoding, state, success_prob })
}
