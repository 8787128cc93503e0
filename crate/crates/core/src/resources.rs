//! Symbolic circuit costs and the per-run resource ledger.
//!
//! Every block-encoding carries a [`Cost`]. The combinators compose costs
//! through the functions in this module, and the ledger backend of the
//! pipelines calls the same functions without building any matrices, so the
//! two backends report identical counters.

use std::collections::BTreeMap;
use std::fmt;

use crate::linalg::ceil_log2;

/// Counters attached to one block-encoding circuit.
///
/// Query and gate counters are totals for the whole circuit.
/// `amplification_rounds` and `poly_degree` are the parameters of the
/// outermost amplification and polynomial stages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cost {
    pub prep_queries: u64,
    pub be_queries: u64,
    pub swap_ops: u64,
    pub lcu_terms: u64,
    pub two_qubit_gates: u64,
    pub amplification_rounds: u64,
    pub poly_degree: u64,
    pub ancilla_qubits: u64,
    pub stateprep_ancillas: u64,
}

impl Cost {
    /// Cost of running the circuit `k` times in sequence.
    pub fn repeated(self, k: u64) -> Cost {
        Cost {
            prep_queries: self.prep_queries * k,
            be_queries: self.be_queries * k,
            swap_ops: self.swap_ops * k,
            lcu_terms: self.lcu_terms * k,
            two_qubit_gates: self.two_qubit_gates * k,
            ..self
        }
    }

    /// Two circuits acting on disjoint ancilla registers.
    pub fn combined(self, other: Cost) -> Cost {
        Cost {
            prep_queries: self.prep_queries + other.prep_queries,
            be_queries: self.be_queries + other.be_queries,
            swap_ops: self.swap_ops + other.swap_ops,
            lcu_terms: self.lcu_terms + other.lcu_terms,
            two_qubit_gates: self.two_qubit_gates + other.two_qubit_gates,
            amplification_rounds: self.amplification_rounds.max(other.amplification_rounds),
            poly_degree: self.poly_degree.max(other.poly_degree),
            ancilla_qubits: self.ancilla_qubits + other.ancilla_qubits,
            stateprep_ancillas: self.stateprep_ancillas.max(other.stateprep_ancillas),
        }
    }

    pub fn get(&self, counter: Counter) -> u64 {
        match counter {
            Counter::PrepUnitaryQueries => self.prep_queries,
            Counter::BeQueries => self.be_queries,
            Counter::SwapOps => self.swap_ops,
            Counter::LcuTerms => self.lcu_terms,
            Counter::AmplificationRounds => self.amplification_rounds,
            Counter::PolyDegree => self.poly_degree,
            Counter::TwoQubitGates => self.two_qubit_gates,
            Counter::AncillaQubits => self.ancilla_qubits,
            Counter::StateprepAncillas => self.stateprep_ancillas,
        }
    }
}

/// Preparation of an `s`-sparse state on `dim` amplitudes, charged once.
pub fn state_prep_cost(support: usize, dim: usize) -> Cost {
    let s = support.max(1);
    let log_n = u64::from(ceil_log2(dim).max(1));
    Cost {
        two_qubit_gates: s as u64 * log_n,
        stateprep_ancillas: s as u64 * u64::from(ceil_log2(s).max(1)) * log_n,
        ..Cost::default()
    }
}

/// Density-operator encoding from a purification: one use each of the
/// preparation unitary and its inverse, plus a register swap.
pub fn density_cost(prep: Cost, system_dim: usize, traced_dim: usize) -> Cost {
    let log_sys = u64::from(ceil_log2(system_dim));
    Cost {
        prep_queries: 2,
        two_qubit_gates: 2 * prep.two_qubit_gates + 3 * log_sys,
        ancilla_qubits: u64::from(ceil_log2(traced_dim)) + log_sys,
        stateprep_ancillas: prep.stateprep_ancillas,
        ..Cost::default()
    }
}

/// Product or tensor product of encodings.
pub fn product_cost(parts: &[Cost]) -> Cost {
    parts.iter().copied().fold(Cost::default(), Cost::combined)
}

/// Linear combination of `parts` through a select register of `select_dim` states.
pub fn lcu_cost(parts: &[Cost], select_dim: usize) -> Cost {
    let log_s = u64::from(ceil_log2(select_dim));
    let sum = parts.iter().fold(Cost::default(), |acc, c| Cost { ancilla_qubits: 0, ..acc.combined(*c) });
    let max_anc = parts.iter().map(|c| c.ancilla_qubits).max().unwrap_or(0);
    Cost {
        lcu_terms: sum.lcu_terms + parts.len() as u64,
        two_qubit_gates: sum.two_qubit_gates + 2 * (select_dim as u64).saturating_sub(1) + parts.len() as u64 * log_s,
        ancilla_qubits: max_anc + log_s,
        ..sum
    }
}

/// Amplification with `rounds` alternating uses of the input and its inverse.
pub fn amplify_cost(inner: Cost, rounds: u64) -> Cost {
    let rep = inner.repeated(rounds);
    Cost {
        be_queries: rep.be_queries + rounds,
        two_qubit_gates: rep.two_qubit_gates + 2 * rounds * (inner.ancilla_qubits + 1),
        amplification_rounds: rounds,
        ancilla_qubits: inner.ancilla_qubits + 1,
        ..rep
    }
}

/// Polynomial transform of degree `degree`: `degree` uses of the input and
/// its inverse plus one controlled use, and one extra LCU that recombines
/// the real and imaginary parts.
pub fn poly_cost(inner: Cost, degree: u64) -> Cost {
    let uses = degree + 1;
    let rep = inner.repeated(uses);
    Cost {
        be_queries: rep.be_queries + uses,
        lcu_terms: rep.lcu_terms + 2,
        two_qubit_gates: rep.two_qubit_gates + (inner.ancilla_qubits + 1) * degree,
        poly_degree: degree,
        ancilla_qubits: inner.ancilla_qubits + 2,
        ..rep
    }
}

/// Conjugation by `swaps` slot transpositions of `d`-dimensional factors.
pub fn swap_cost(inner: Cost, swaps: u64, d: usize) -> Cost {
    Cost {
        swap_ops: inner.swap_ops + swaps,
        two_qubit_gates: inner.two_qubit_gates + 2 * swaps * 3 * u64::from(ceil_log2(d)),
        ..inner
    }
}

/// Scalar encoding of a classically integrated coefficient, charged as
/// `degree` queries to the single-qubit time encoding.
pub fn scalar_coefficient_cost(degree: u64) -> Cost {
    Cost { be_queries: degree, ancilla_qubits: 1, two_qubit_gates: degree, ..Cost::default() }
}

/// Ledger keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Counter {
    PrepUnitaryQueries,
    BeQueries,
    SwapOps,
    LcuTerms,
    AmplificationRounds,
    PolyDegree,
    TwoQubitGates,
    AncillaQubits,
    StateprepAncillas,
}

impl Counter {
    pub const ALL: [Counter; 9] = [
        Counter::PrepUnitaryQueries,
        Counter::BeQueries,
        Counter::SwapOps,
        Counter::LcuTerms,
        Counter::AmplificationRounds,
        Counter::PolyDegree,
        Counter::TwoQubitGates,
        Counter::AncillaQubits,
        Counter::StateprepAncillas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Counter::PrepUnitaryQueries => "prep_unitary_queries",
            Counter::BeQueries => "be_queries",
            Counter::SwapOps => "swap_ops",
            Counter::LcuTerms => "lcu_terms",
            Counter::AmplificationRounds => "amplification_rounds",
            Counter::PolyDegree => "poly_degree",
            Counter::TwoQubitGates => "two_qubit_gates",
            Counter::AncillaQubits => "ancilla_qubits",
            Counter::StateprepAncillas => "stateprep_ancillas",
        }
    }

    pub fn from_name(name: &str) -> Option<Counter> {
        Counter::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Counter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Cumulative cost after one pipeline stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: String,
    pub cost: Cost,
}

/// Resource counters of one pipeline run with a per-stage breakdown.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResourceLedger {
    stages: Vec<StageRecord>,
    /// Per-term swap counts, indexed by term.
    pub term_swaps: Vec<u64>,
    /// Free-form annotations such as time-encoding wall-time notes.
    pub metadata: BTreeMap<String, String>,
}

impl ResourceLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records the cost of the circuit built so far.
    pub fn record(&mut self, stage: impl Into<String>, cost: Cost) {
        self.stages.push(StageRecord { stage: stage.into(), cost });
    }

    pub fn stages(&self) -> &[StageRecord] {
        &self.stages
    }

    /// Cost of the final stage.
    pub fn total(&self) -> Cost {
        self.stages.last().map(|s| s.cost).unwrap_or_default()
    }

    pub fn get(&self, counter: Counter) -> u64 {
        self.total().get(counter)
    }

    /// All counters of the final stage, in a fixed order.
    pub fn counters(&self) -> Vec<(Counter, u64)> {
        let total = self.total();
        Counter::ALL.iter().map(|&c| (c, total.get(c))).collect()
    }

    /// True if no counter decreases from one stage to the next.
    pub fn is_monotone(&self) -> bool {
        self.stages.windows(2).all(|w| Counter::ALL.iter().all(|&c| w[0].cost.get(c) <= w[1].cost.get(c)))
    }

    /// Same counters and stages, ignoring metadata.
    pub fn same_counts(&self, other: &ResourceLedger) -> bool {
        self.stages == other.stages && self.term_swaps == other.term_swaps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Cost {
        Cost { prep_queries: 2, two_qubit_gates: 5, ancilla_qubits: 3, ..Cost::default() }
    }

    #[test]
    fn product_sums_counters_and_ancillas() {
        let c = product_cost(&[unit(), unit()]);
        assert_eq!(c.prep_queries, 4);
        assert_eq!(c.ancilla_qubits, 6);
    }

    #[test]
    fn lcu_adds_select_register() {
        let c = lcu_cost(&[unit(), unit(), unit()], 4);
        assert_eq!(c.prep_queries, 6);
        assert_eq!(c.lcu_terms, 3);
        assert_eq!(c.ancilla_qubits, 3 + 2);
    }

    #[test]
    fn amplification_and_poly_repeat_the_input() {
        let a = amplify_cost(unit(), 10);
        assert_eq!(a.prep_queries, 20);
        assert_eq!(a.be_queries, 10);
        assert_eq!(a.amplification_rounds, 10);
        let p = poly_cost(a, 4);
        assert_eq!(p.prep_queries, 100);
        assert_eq!(p.be_queries, 5 * 10 + 5);
        assert_eq!(p.amplification_rounds, 10);
        assert_eq!(p.poly_degree, 4);
        assert_eq!(p.ancilla_qubits, 3 + 1 + 2);
    }

    #[test]
    fn counter_names_round_trip() {
        for c in Counter::ALL {
            assert_eq!(Counter::from_name(c.name()), Some(c));
        }
    }

    #[test]
    fn ledger_monotonicity() {
        let mut l = ResourceLedger::new();
        l.record("a", unit());
        l.record("b", amplify_cost(unit(), 3));
        assert!(l.is_monotone());
        l.record("c", Cost::default());
        assert!(!l.is_monotone());
    }
}
