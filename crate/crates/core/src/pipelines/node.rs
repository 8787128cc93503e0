//! Backend-generic encoding nodes. Every operation computes its cost with
//! the same functions in both backends, so ledger runs report the counters
//! a dense run would.

use crate::block_encoding::{
    self, be_amplify, be_density_from_purification, be_lcu, be_rescale, be_swap_permute, be_tensor, dilate,
    transposition_count, BlockEncoding,
};
use crate::error::Result;
use crate::linalg::{next_pow2, CMatrix, C64};
use crate::qsvt::{apply_poly, poly_error, ChebPoly};
use crate::resources::{self, Cost};

/// Unitaries above this dimension are re-dilated onto one qubit between stages.
pub const COMPACTION_THRESHOLD: usize = 256;

/// How a pipeline is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Explicit unitaries.
    Dense,
    /// Costs and declared errors only.
    Ledger,
}

#[derive(Debug, Clone)]
pub(crate) enum Node {
    Dense(BlockEncoding),
    Ledger { cost: Cost, err: f64 },
}

impl Node {
    pub fn cost(&self) -> Cost {
        match self {
            Node::Dense(u) => u.cost,
            Node::Ledger { cost, .. } => *cost,
        }
    }

    pub fn err(&self) -> f64 {
        match self {
            Node::Dense(u) => u.err,
            Node::Ledger { err, .. } => *err,
        }
    }

    pub fn dense(&self) -> Option<&BlockEncoding> {
        match self {
            Node::Dense(u) => Some(u),
            Node::Ledger { .. } => None,
        }
    }

    pub fn with_cost(self, cost: Cost) -> Node {
        match self {
            Node::Dense(u) => Node::Dense(u.with_cost(cost)),
            Node::Ledger { err, .. } => Node::Ledger { cost, err },
        }
    }

    pub fn with_err(self, err: f64) -> Node {
        match self {
            Node::Dense(mut u) => {
                u.err = err;
                Node::Dense(u)
            }
            Node::Ledger { cost, .. } => Node::Ledger { cost, err },
        }
    }
}

/// Encoding of `Tr_traced |Φ⟩⟨Φ|` for `|Φ⟩ = prep |0⟩`.
pub(crate) fn density(
    backend: Backend,
    prep: impl FnOnce() -> Result<CMatrix>,
    traced_dim: usize,
    system_dim: usize,
    prep_cost: Cost,
) -> Result<Node> {
    let cost = resources::density_cost(prep_cost, system_dim, traced_dim);
    Ok(match backend {
        Backend::Dense => Node::Dense(be_density_from_purification(&prep()?, traced_dim)?.with_cost(cost)),
        Backend::Ledger => Node::Ledger { cost, err: 0.0 },
    })
}

pub(crate) fn negate(node: Node) -> Node {
    match node {
        Node::Dense(u) => Node::Dense(u.negated()),
        other => other,
    }
}

pub(crate) fn lcu(nodes: Vec<Node>, weights: &[f64]) -> Result<Node> {
    if let Some(Node::Ledger { .. }) = nodes.first() {
        let costs: Vec<Cost> = nodes.iter().map(Node::cost).collect();
        let err = nodes.iter().zip(weights).map(|(n, w)| w * n.err()).sum();
        return Ok(Node::Ledger { cost: resources::lcu_cost(&costs, next_pow2(nodes.len())), err });
    }
    let encodings: Vec<BlockEncoding> = nodes
        .into_iter()
        .map(|n| match n {
            Node::Dense(u) => u,
            Node::Ledger { .. } => unreachable!("mixed backends"),
        })
        .collect();
    Ok(Node::Dense(be_lcu(&encodings, weights)?))
}

/// Tensors `node` with an identity of dimension `idle_dim` on the right.
pub(crate) fn pad_identity(node: Node, idle_dim: usize) -> Result<Node> {
    if idle_dim <= 1 {
        return Ok(node);
    }
    Ok(match node {
        Node::Dense(u) => Node::Dense(be_tensor(&[u, BlockEncoding::identity(idle_dim)])?),
        Node::Ledger { cost, err } => Node::Ledger { cost: resources::product_cost(&[cost, Cost::default()]), err },
    })
}

/// Tensors a scalar encoding on the left of `node`.
pub(crate) fn scalar_times(node: Node, value: f64, scalar_cost: Cost) -> Result<Node> {
    Ok(match node {
        Node::Dense(u) => {
            let s = dilate(&CMatrix::diagonal(&[C64::new(value, 0.0)]), 1.0)?.with_cost(scalar_cost);
            Node::Dense(be_tensor(&[s, u])?)
        }
        Node::Ledger { cost, err } => Node::Ledger { cost: resources::product_cost(&[scalar_cost, cost]), err },
    })
}

pub(crate) fn swap(node: Node, perm: &[usize], d: usize) -> Result<Node> {
    if perm.iter().enumerate().all(|(k, &p)| k == p) {
        return Ok(node);
    }
    Ok(match node {
        Node::Dense(u) => Node::Dense(be_swap_permute(&u, perm, d)?),
        Node::Ledger { cost, err } => {
            Node::Ledger { cost: resources::swap_cost(cost, transposition_count(perm) as u64, d), err }
        }
    })
}

pub(crate) fn compact(node: Node) -> Result<Node> {
    Ok(match node {
        Node::Dense(u) => Node::Dense(u.compacted(COMPACTION_THRESHOLD)?),
        other => other,
    })
}

/// Multiplies the encoded block by `factor`, amplifying when it exceeds one
/// and rescaling when it is below one.
pub(crate) fn scale_block(node: Node, factor: f64, delta_amp: f64, eps_amp: f64) -> Result<Node> {
    if factor > 1.0 {
        Ok(match node {
            Node::Dense(u) => Node::Dense(be_amplify(&u, factor, delta_amp, eps_amp)?),
            Node::Ledger { cost, err } => Node::Ledger {
                cost: block_encoding::amplify_cost(cost, factor, delta_amp, eps_amp)?,
                err: factor * err,
            },
        })
    } else if factor < 1.0 {
        Ok(match node {
            Node::Dense(u) => Node::Dense(be_rescale(&u, 1.0 / factor)?),
            Node::Ledger { cost, err } => {
                Node::Ledger { cost: resources::lcu_cost(&[cost, Cost::default()], 2), err: factor * err }
            }
        })
    } else {
        Ok(node)
    }
}

pub(crate) fn poly(node: Node, pr: &ChebPoly, pi: &ChebPoly) -> Result<Node> {
    Ok(match node {
        Node::Dense(u) => Node::Dense(apply_poly(&u, pr, pi)?),
        Node::Ledger { cost, err } => {
            let degree = pr.degree().max(pi.degree());
            Node::Ledger {
                cost: resources::poly_cost(cost, degree as u64),
                err: poly_error(degree, err, 1.0) + pr.sup_err + pi.sup_err,
            }
        }
    })
}
