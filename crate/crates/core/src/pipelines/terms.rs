//! Per-term encodings of `H_i / γ_i`: exact projector sums, Monte-Carlo
//! averages and purifications.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::node::{self, Backend, Node};
use super::{MCSampleRecord, TermReport};
use crate::error::{Error, Result};
use crate::hamiltonian::TensorTerm;
use crate::linalg::{
    complete_unitary, kron_all, next_pow2, op_norm, sparsity, trace_norm_hermitian, CMatrix, CVector, C64,
};
use crate::resources::{self, Cost};
use crate::truncation::{randomized_truncate_with_groups, SparseEnsemble};

/// Entries below this modulus do not count towards a state's support.
const SUPPORT_TOL: f64 = 1e-12;

/// Sub-operator of a term restricted to `slots`.
#[derive(Debug, Clone)]
pub(crate) struct TermView<'a> {
    pub term: &'a TensorTerm,
    pub slots: Vec<usize>,
}

/// One eigentuple `(k_1, …)` over the view's slots with `Π λ ≠ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigentuple {
    pub indices: Vec<usize>,
    pub value: f64,
}

impl TermView<'_> {
    pub fn d(&self) -> usize {
        self.term.d()
    }

    pub fn system_dim(&self) -> usize {
        self.d().pow(self.slots.len() as u32)
    }

    /// `Π_j Σ_k |λ_jk|` over the view's slots.
    pub fn gamma(&self) -> f64 {
        self.slots.iter().map(|&j| self.term.spectral[j].abs_sum()).product()
    }

    /// Dense `⊗_{j ∈ slots} F_j`.
    pub fn assemble(&self) -> CMatrix {
        kron_all(self.slots.iter().map(|&j| &self.term.factors[j]))
    }

    /// Nonzero eigentuples in lexicographic order.
    pub fn eigentuples(&self) -> Vec<Eigentuple> {
        let choices: Vec<Vec<usize>> = self.slots.iter().map(|&j| self.term.spectral[j].nonzero()).collect();
        if choices.iter().any(Vec::is_empty) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut cursor = vec![0usize; choices.len()];
        loop {
            let indices: Vec<usize> = cursor.iter().zip(&choices).map(|(&c, opts)| opts[c]).collect();
            let value = self.slots.iter().zip(&indices).map(|(&j, &k)| self.term.spectral[j].eigenvalues[k]).product();
            out.push(Eigentuple { indices, value });
            let mut pos = choices.len();
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                cursor[pos] += 1;
                if cursor[pos] < choices[pos].len() {
                    break;
                }
                cursor[pos] = 0;
            }
        }
    }

    fn eigenvector(&self, slot_pos: usize, k: usize) -> CVector {
        self.term.spectral[self.slots[slot_pos]].eigenvector(k)
    }

    /// `⊗_j |u_{j k_j}⟩`.
    fn product_state(&self, tuple: &Eigentuple) -> CVector {
        tuple
            .indices
            .iter()
            .enumerate()
            .fold(CVector(vec![C64::new(1.0, 0.0)]), |acc, (pos, &k)| acc.kron(&self.eigenvector(pos, k)))
    }

    /// Preparation cost of `⊗_j |u_{j k_j}⟩`, one sparse preparation per slot.
    fn product_state_cost(&self, tuple: &Eigentuple) -> Cost {
        let parts: Vec<Cost> = tuple
            .indices
            .iter()
            .enumerate()
            .map(|(pos, &k)| resources::state_prep_cost(self.eigenvector(pos, k).support(SUPPORT_TOL).len(), self.d()))
            .collect();
        resources::product_cost(&parts)
    }

    /// Signed projector encoding `± |ψ⟩⟨ψ|` of one eigentuple.
    fn projector(&self, backend: Backend, tuple: &Eigentuple) -> Result<Node> {
        let prep = || {
            let unitaries: Vec<CMatrix> = tuple
                .indices
                .iter()
                .enumerate()
                .map(|(pos, &k)| complete_unitary(&self.eigenvector(pos, k)))
                .collect::<Result<_>>()?;
            Ok(kron_all(&unitaries))
        };
        let node = node::density(backend, prep, 1, self.system_dim(), self.product_state_cost(tuple))?;
        Ok(if tuple.value < 0.0 { node::negate(node) } else { node })
    }

    fn target(&self) -> CMatrix {
        self.assemble().scale_real(1.0 / self.gamma())
    }
}

fn normalized(weights: Vec<f64>) -> Vec<f64> {
    let sum: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / sum).collect()
}

fn empty_report(view: &TermView<'_>, term: usize, tuples: usize) -> TermReport {
    TermReport {
        term,
        slots: view.slots.clone(),
        gamma: view.gamma(),
        tuples,
        swaps: 0,
        cost: Cost::default(),
        declared_err: 0.0,
        mc_error: None,
        mc_entry_variance: None,
        mc_sparsity_bound: None,
        factor_trace_dists: Vec::new(),
        trace_defect: None,
    }
}

fn nonzero_tuples(view: &TermView<'_>, term: usize) -> Result<Vec<Eigentuple>> {
    let tuples = view.eigentuples();
    if tuples.is_empty() {
        return Err(Error::InvalidConfig(format!("term {term} is zero")));
    }
    Ok(tuples)
}

/// Exact `H_S / γ_S` as an LCU of signed projectors with weights `|Πλ| / γ_S`.
pub(crate) fn exact_term(backend: Backend, view: &TermView<'_>, term: usize) -> Result<(Node, TermReport)> {
    let tuples = nonzero_tuples(view, term)?;
    let gamma = view.gamma();
    let nodes = tuples.iter().map(|t| view.projector(backend, t)).collect::<Result<Vec<_>>>()?;
    let weights = normalized(tuples.iter().map(|t| t.value.abs() / gamma).collect());
    let node = node::lcu(nodes, &weights)?;
    Ok((node, empty_report(view, term, tuples.len())))
}

/// Draws `n` eigentuple indices with probability `|Πλ| / γ_S`.
pub(crate) fn sample_tuples(tuples: &[Eigentuple], n: usize, seed: u64, stream: u64) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(tuples.iter().map(|t| t.value.abs()))
        .map_err(|e| Error::InvalidConfig(format!("sampling distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

/// Dense `(1/N) Σ_j ± |ψ_j⟩⟨ψ_j|` for sampled tuple indices, with multiplicities.
fn sample_average(view: &TermView<'_>, tuples: &[Eigentuple], counts: &BTreeMap<usize, usize>, n: usize) -> CMatrix {
    let dim = view.system_dim();
    let mut avg = CMatrix::zeros(dim, dim);
    for (&idx, &count) in counts {
        let sign = tuples[idx].value.signum();
        avg = &avg + &view.product_state(&tuples[idx]).projector().scale_real(sign * count as f64 / n as f64);
    }
    avg
}

/// Operator-norm error of an `n`-sample average against `H_S / γ_S`.
pub fn monte_carlo_error(term: &TensorTerm, slots: &[usize], n: usize, seed: u64) -> Result<f64> {
    let view = TermView { term, slots: slots.to_vec() };
    let tuples = nonzero_tuples(&view, 0)?;
    let mut counts = BTreeMap::new();
    for idx in sample_tuples(&tuples, n, seed, 0)? {
        *counts.entry(idx).or_insert(0usize) += 1;
    }
    Ok(op_norm(&(&sample_average(&view, &tuples, &counts, n) - &view.target())))
}

/// Monte-Carlo average of `N` signed projectors.
///
/// Repeated tuples are merged into one LCU branch with weight `count / N`.
/// The ledger still charges `N` branches. The declared error is the
/// empirical operator-norm error, plus `2ε` when an error `ε` is injected.
pub(crate) fn sampled_term(
    backend: Backend,
    view: &TermView<'_>,
    term: usize,
    n: usize,
    seed: u64,
    injected_err: Option<f64>,
    records: &mut Vec<MCSampleRecord>,
) -> Result<(Node, TermReport)> {
    let tuples = nonzero_tuples(view, term)?;
    let gamma = view.gamma();
    let draws = sample_tuples(&tuples, n, seed, term as u64)?;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for (j, &idx) in draws.iter().enumerate() {
        *counts.entry(idx).or_insert(0) += 1;
        let t = &tuples[idx];
        records.push(MCSampleRecord {
            term,
            eigentuple: t.indices.clone(),
            sign: if t.value < 0.0 { -1 } else { 1 },
            probability: t.value.abs() / gamma,
            sample_index: j,
        });
    }
    let branch_costs: Vec<Cost> = draws
        .iter()
        .map(|&idx| view.projector(Backend::Ledger, &tuples[idx]).map(|n| n.cost()))
        .collect::<Result<_>>()?;
    let cost = resources::lcu_cost(&branch_costs, next_pow2(n));
    let nodes = counts.keys().map(|&idx| view.projector(backend, &tuples[idx])).collect::<Result<Vec<_>>>()?;
    let weights = normalized(counts.values().map(|&c| c as f64 / n as f64).collect());
    let mut node = node::lcu(nodes, &weights)?.with_cost(cost);
    let mut report = empty_report(view, term, tuples.len());

    if backend == Backend::Dense {
        let target = view.target();
        let avg = sample_average(view, &tuples, &counts, n);
        let mc_error = op_norm(&(&avg - &target));
        report.mc_error = Some(mc_error);
        report.mc_entry_variance = Some(entry_variance(view, &tuples, &counts, &avg, n));
        let spars: usize = counts
            .iter()
            .map(|(&idx, &c)| c * sparsity(&view.product_state(&tuples[idx]).projector(), SUPPORT_TOL))
            .sum();
        report.mc_sparsity_bound = Some(spars + sparsity(&target, SUPPORT_TOL));
        node = node.with_err(mc_error);
    }
    if let Some(eps) = injected_err {
        node = perturb(node, eps, seed)?;
    }
    Ok((node, report))
}

/// Largest per-entry sample variance of `± |ψ_j⟩⟨ψ_j|`.
fn entry_variance(
    view: &TermView<'_>,
    tuples: &[Eigentuple],
    counts: &BTreeMap<usize, usize>,
    mean: &CMatrix,
    n: usize,
) -> f64 {
    let dim = view.system_dim();
    let mut var = vec![0.0; dim * dim];
    for (&idx, &count) in counts {
        let p = view.product_state(&tuples[idx]).projector().scale_real(tuples[idx].value.signum());
        for (v, (x, mu)) in var.iter_mut().zip(p.as_slice().iter().zip(mean.as_slice())) {
            *v += count as f64 * (x - mu).norm_sqr();
        }
    }
    var.into_iter().fold(0.0, f64::max) / n as f64
}

/// Replaces the block `A` by `(A + εE)/(1 + ε)` for a fixed Hermitian `E`
/// with `‖E‖ = 1`, adding `2ε` to the declared error.
fn perturb(node: Node, eps: f64, seed: u64) -> Result<Node> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!("injected error must be nonnegative, got {eps}")));
    }
    let err = node.err() + 2.0 * eps;
    Ok(match node {
        Node::Dense(u) => {
            let n = u.system_dim();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let raw = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let herm = raw.hermitian_part();
            let e = herm.scale_real(1.0 / op_norm(&herm));
            let block = (&u.block() + &e.scale_real(eps)).scale_real(1.0 / (1.0 + eps));
            let mut out = crate::block_encoding::dilate(&block, 1.0)?;
            out.cost = u.cost;
            out.err = err;
            Node::Dense(out)
        }
        Node::Ledger { cost, .. } => Node::Ledger { cost, err },
    })
}

/// Purification of `H_S / γ_S` for a nonnegative term, optionally with
/// every eigenvector replaced by a sparse ensemble.
///
/// The traced register enumerates `(tuple, member indices)` pairs, so its
/// dimension is `Σ_tuples Π_j L_{j k_j}`.
pub(crate) fn purified_term(
    backend: Backend,
    view: &TermView<'_>,
    term: usize,
    sparsity_s: Option<usize>,
    groups: usize,
) -> Result<(Node, TermReport)> {
    let tuples = nonzero_tuples(view, term)?;
    if let Some(t) = tuples.iter().find(|t| t.value < 0.0) {
        return Err(Error::NegativeEigenvalueProduct { term, value: t.value });
    }
    let gamma = view.gamma();
    let d = view.d();
    let n = view.system_dim();

    // Ensembles per (slot position, eigen index).
    let mut ensembles: BTreeMap<(usize, usize), SparseEnsemble> = BTreeMap::new();
    for t in &tuples {
        for (pos, &k) in t.indices.iter().enumerate() {
            if let std::collections::btree_map::Entry::Vacant(slot) = ensembles.entry((pos, k)) {
                let u = view.eigenvector(pos, k);
                let e = match sparsity_s {
                    Some(s) => randomized_truncate_with_groups(&u, s, groups)?,
                    None => randomized_truncate_with_groups(&u, d, groups)?,
                };
                slot.insert(e);
            }
        }
    }

    let mut blocks: Vec<CVector> = Vec::new();
    let mut err = 0.0;
    for t in &tuples {
        let weight = t.value / gamma;
        err += weight
            * t.indices.iter().enumerate().map(|(pos, &k)| ensembles[&(pos, k)].measured_trace_dist).sum::<f64>();
        let members: Vec<&SparseEnsemble> =
            t.indices.iter().enumerate().map(|(pos, &k)| &ensembles[&(pos, k)]).collect();
        let mut cursor = vec![0usize; members.len()];
        loop {
            let amp = weight.sqrt()
                * cursor.iter().zip(&members).map(|(&l, e)| e.members[l].probability.sqrt()).product::<f64>();
            let state = cursor
                .iter()
                .zip(&members)
                .fold(CVector(vec![C64::new(amp, 0.0)]), |acc, (&l, e)| acc.kron(&e.members[l].vector));
            blocks.push(state);
            let mut pos = members.len();
            let done = loop {
                if pos == 0 {
                    break true;
                }
                pos -= 1;
                cursor[pos] += 1;
                if cursor[pos] < members[pos].len() {
                    break false;
                }
                cursor[pos] = 0;
            };
            if done {
                break;
            }
        }
    }
    let traced = blocks.len();
    let phi = CVector(blocks.into_iter().flat_map(|b| b.0).collect());
    let support = phi.0.iter().filter(|x| x.norm() > SUPPORT_TOL).count();
    let prep_cost = resources::state_prep_cost(support, traced * n);
    let phi_unit = phi.normalized();
    let node = node::density(backend, || complete_unitary(&phi_unit), traced, n, prep_cost)?.with_err(err);

    let mut report = empty_report(view, term, tuples.len());
    report.factor_trace_dists = (0..view.slots.len())
        .map(|pos| {
            ensembles.iter().filter(|((p, _), _)| *p == pos).map(|(_, e)| e.measured_trace_dist).fold(0.0, f64::max)
        })
        .collect();
    if let Node::Dense(u) = &node {
        report.trace_defect = Some(trace_norm_hermitian(&(&u.block().hermitian_part() - &view.target())));
    }
    Ok((node, report))
}
