//! Block-encodings as explicit unitaries, with the usual calculus:
//! dilation, product, tensor product, linear combination, rescaling,
//! amplification, density operators from purifications and slot
//! permutations.
//!
//! A unitary `U` on `ancilla ⊗ system` encodes `A` with scale `α` and error
//! `ε` when `‖α (⟨0| ⊗ I) U (|0⟩ ⊗ I) − A‖ ≤ ε`. The ancilla index is the
//! leading one, so the encoded block is the top-left `system_dim` square.

use crate::error::{Error, Result};
use crate::linalg::{complete_unitary, kron, next_pow2, op_norm, permutation_matrix, CMatrix, CVector, C64, ONE, ZERO};
use crate::resources::{self, Cost};

/// Largest dense unitary the emulator builds.
pub const DENSE_DIM_CAP: usize = 2048;

/// Tolerance on `‖A / α‖ ≤ 1` for dilation.
pub const DILATION_TOL: f64 = 1e-9;

/// Tolerance on the Hermiticity of an encoded block.
pub const BLOCK_HERMITIAN_TOL: f64 = 1e-9;

/// Unitarity tolerance for state-preparation inputs.
pub const UNITARY_TOL: f64 = 1e-10;

/// An `(α, a, ε)` block-encoding.
#[derive(Debug, Clone)]
pub struct BlockEncoding {
    unitary: CMatrix,
    system_dim: usize,
    ancilla_dim: usize,
    pub scale: f64,
    pub err: f64,
    pub ledger_tag: String,
    pub cost: Cost,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim > DENSE_DIM_CAP {
        Err(Error::DenseLimitExceeded { dim, cap: DENSE_DIM_CAP })
    } else {
        Ok(())
    }
}

impl BlockEncoding {
    pub fn new(
        unitary: CMatrix,
        system_dim: usize,
        scale: f64,
        err: f64,
        tag: impl Into<String>,
        cost: Cost,
    ) -> Result<Self> {
        let dim = unitary.require_square()?;
        if system_dim == 0 || dim % system_dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "unitary of dimension {dim} over system of dimension {system_dim}"
            )));
        }
        Ok(BlockEncoding {
            ancilla_dim: dim / system_dim,
            unitary,
            system_dim,
            scale,
            err,
            ledger_tag: tag.into(),
            cost,
        })
    }

    /// A unitary viewed as an encoding of itself with a trivial ancilla.
    pub fn from_unitary(u: CMatrix, tag: impl Into<String>) -> Result<Self> {
        let n = u.require_square()?;
        Self::new(u, n, 1.0, 0.0, tag, Cost::default())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_unitary(CMatrix::identity(n), "identity").expect("square")
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_dim
    }

    pub fn dim(&self) -> usize {
        self.unitary.rows()
    }

    /// Top-left `system_dim` block, without the scale.
    pub fn block(&self) -> CMatrix {
        self.unitary.top_left(self.system_dim, self.system_dim)
    }

    /// `α · block`, the operator this encoding approximates.
    pub fn encoded(&self) -> CMatrix {
        self.block().scale_real(self.scale)
    }

    /// Frobenius norm of `U^dagger U − I`.
    pub fn unitarity_defect(&self) -> f64 {
        self.unitary.unitarity_defect()
    }

    /// `‖α · block − target‖` in operator norm.
    pub fn discrepancy(&self, target: &CMatrix) -> f64 {
        op_norm(&(&self.encoded() - target))
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.ledger_tag = tag.into();
        self
    }

    pub fn with_cost(mut self, cost: Cost) -> Self {
        self.cost = cost;
        self
    }

    /// Encoding of `−A` (the unitary negated).
    pub fn negated(mut self) -> Self {
        self.unitary = self.unitary.scale(-ONE);
        self
    }

    /// Re-dilates the encoded block onto a single qubit ancilla when the
    /// unitary is larger than `threshold`. Scale, error and cost carry over.
    pub fn compacted(self, threshold: usize) -> Result<Self> {
        if self.dim() <= threshold {
            return Ok(self);
        }
        let mut out = dilate(&self.block(), 1.0)?;
        out.scale = self.scale;
        out.err = self.err;
        out.cost = self.cost;
        out.ledger_tag = self.ledger_tag;
        Ok(out)
    }

    /// Same unitary padded to a larger ancilla as `U ⊕ I`.
    fn padded(&self, ancilla_dim: usize) -> CMatrix {
        if ancilla_dim == self.ancilla_dim {
            return self.unitary.clone();
        }
        let big = ancilla_dim * self.system_dim;
        let mut out = CMatrix::identity(big);
        out.set_block(0, 0, &self.unitary);
        out
    }
}

/// Unitary dilation `[[B, √(I−BB†)], [√(I−B†B), −B†]]` of `B = A/α`.
///
/// The square roots come from the singular value decomposition
/// `B = W Σ V†`, which keeps the result unitary to rounding even when
/// singular values sit at 1.
pub fn dilate(a: &CMatrix, scale: f64) -> Result<BlockEncoding> {
    let n = a.require_square()?;
    check_dim(2 * n)?;
    if !(scale > 0.0) {
        return Err(Error::InvalidConfig(format!("encoding scale must be positive, got {scale}")));
    }
    let b = a.scale_real(1.0 / scale);
    let svd = nalgebra::SVD::new(b.to_nalgebra(), true, true);
    let w = CMatrix::from_nalgebra(svd.u.as_ref().expect("requested"));
    let v = CMatrix::from_nalgebra(&svd.v_t.as_ref().expect("requested").adjoint());
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let largest = sigma.iter().copied().fold(0.0, f64::max);
    if largest > 1.0 + DILATION_TOL {
        return Err(Error::NormExceedsScale { norm: largest * scale, scale });
    }
    let sig: Vec<C64> = sigma.iter().map(|&s| C64::new(s.min(1.0), 0.0)).collect();
    let cos: Vec<C64> = sigma.iter().map(|&s| C64::new((1.0 - s.min(1.0).powi(2)).max(0.0).sqrt(), 0.0)).collect();
    let scaled_cols = |m: &CMatrix, d: &[C64]| CMatrix::from_fn(n, n, |i, k| m[(i, k)] * d[k]);
    let (wh, vh) = (w.adjoint(), v.adjoint());
    let top_right = &scaled_cols(&w, &cos) * &wh;
    let bottom_left = &scaled_cols(&v, &cos) * &vh;
    let bottom_right = (&scaled_cols(&v, &sig) * &wh).scale(-ONE);
    let mut u = CMatrix::zeros(2 * n, 2 * n);
    u.set_block(0, 0, &b);
    u.set_block(0, n, &top_right);
    u.set_block(n, 0, &bottom_left);
    u.set_block(n, n, &bottom_right);
    BlockEncoding::new(u, n, scale, 0.0, "dilate", Cost::default())
}

/// Applies `u` (on `anc_u ⊗ sys`) inside `anc_left ⊗ anc_u ⊗ anc_right ⊗ sys`.
fn embed(u: &CMatrix, anc_left: usize, anc_u: usize, anc_right: usize, sys: usize) -> CMatrix {
    let dim = anc_left * anc_u * anc_right * sys;
    let mut out = CMatrix::zeros(dim, dim);
    for l in 0..anc_left {
        for r in 0..anc_right {
            for a in 0..anc_u {
                for x in 0..sys {
                    let row = ((l * anc_u + a) * anc_right + r) * sys + x;
                    for b in 0..anc_u {
                        for y in 0..sys {
                            let val = u[(a * sys + x, b * sys + y)];
                            if val != ZERO {
                                let col = ((l * anc_u + b) * anc_right + r) * sys + y;
                                out[(row, col)] = val;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Encoding of `A₁ A₂` with ancilla `anc₁ ⊗ anc₂`.
pub fn be_product(u1: &BlockEncoding, u2: &BlockEncoding) -> Result<BlockEncoding> {
    if u1.system_dim != u2.system_dim {
        return Err(Error::DimensionMismatch(format!(
            "product of encodings over systems of dimension {} and {}",
            u1.system_dim, u2.system_dim
        )));
    }
    let (a1, a2, n) = (u1.ancilla_dim, u2.ancilla_dim, u1.system_dim);
    check_dim(a1 * a2 * n)?;
    let left = embed(&u1.unitary, 1, a1, a2, n);
    let right = embed(&u2.unitary, a1, a2, 1, n);
    BlockEncoding::new(
        left.matmul(&right)?,
        n,
        u1.scale * u2.scale,
        u1.scale * u2.err + u2.scale * u1.err,
        format!("({})*({})", u1.ledger_tag, u2.ledger_tag),
        resources::product_cost(&[u1.cost, u2.cost]),
    )
}

/// Encoding of `⊗_i A_i` with ancilla `anc₁ ⊗ anc₂ ⊗ …` and system `sys₁ ⊗ sys₂ ⊗ …`.
pub fn be_tensor(us: &[BlockEncoding]) -> Result<BlockEncoding> {
    let first = us.first().ok_or_else(|| Error::InvalidConfig("tensor product of an empty list".into()))?;
    if us.len() == 1 {
        return Ok(first.clone());
    }
    let ancs: Vec<usize> = us.iter().map(|u| u.ancilla_dim).collect();
    let syss: Vec<usize> = us.iter().map(|u| u.system_dim).collect();
    let anc_total: usize = ancs.iter().product();
    let sys_total: usize = syss.iter().product();
    let dim = anc_total * sys_total;
    check_dim(dim)?;
    let raw = crate::linalg::kron_all(us.iter().map(|u| &u.unitary));
    // Index of (a⃗, x⃗) in the interleaved layout (a₁, x₁, a₂, x₂, …).
    let old_index: Vec<usize> = (0..dim)
        .map(|new| {
            let (mut anc_idx, mut sys_idx) = (new / sys_total, new % sys_total);
            let mut digits = vec![(0usize, 0usize); us.len()];
            for k in (0..us.len()).rev() {
                digits[k] = (anc_idx % ancs[k], sys_idx % syss[k]);
                anc_idx /= ancs[k];
                sys_idx /= syss[k];
            }
            digits.iter().enumerate().fold(0, |acc, (k, &(a, x))| acc * ancs[k] * syss[k] + a * syss[k] + x)
        })
        .collect();
    let unitary = CMatrix::from_fn(dim, dim, |i, j| raw[(old_index[i], old_index[j])]);
    let scales: Vec<f64> = us.iter().map(|u| u.scale).collect();
    let err = us
        .iter()
        .enumerate()
        .map(|(i, u)| u.err * scales.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, s)| s).product::<f64>())
        .sum();
    let tag = us.iter().map(|u| u.ledger_tag.as_str()).collect::<Vec<_>>().join(" ⊗ ");
    let costs: Vec<Cost> = us.iter().map(|u| u.cost).collect();
    BlockEncoding::new(unitary, sys_total, scales.iter().product(), err, tag, resources::product_cost(&costs))
}

/// Encoding of `Σ_i w_i A_i` by prepare–select–unprepare.
///
/// Weights are nonnegative and sum to one; all inputs share one scale. The
/// select register has `next_pow2(m)` states and sits leftmost.
pub fn be_lcu(us: &[BlockEncoding], weights: &[f64]) -> Result<BlockEncoding> {
    if us.is_empty() || us.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!("{} encodings with {} weights", us.len(), weights.len())));
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
        return Err(Error::WeightsNotNormalized { sum });
    }
    let scale = us[0].scale;
    let n = us[0].system_dim;
    for u in us {
        if u.system_dim != n {
            return Err(Error::DimensionMismatch(format!("LCU over systems of dimension {n} and {}", u.system_dim)));
        }
        if (u.scale - scale).abs() > 1e-12 * scale.abs().max(1.0) {
            return Err(Error::MixedScales(scale, u.scale));
        }
    }
    let m = us.len();
    let s_dim = next_pow2(m);
    let anc = us.iter().map(|u| u.ancilla_dim).max().expect("nonempty");
    let sub = anc * n;
    check_dim(s_dim * sub)?;

    let mut column: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    column.resize(s_dim, 0.0);
    let norm = column.iter().map(|c| c * c).sum::<f64>().sqrt();
    let prep = complete_unitary(&CVector::from_real(&column.iter().map(|c| c / norm).collect::<Vec<_>>()))?;
    let padded: Vec<CMatrix> = us.iter().map(|u| u.padded(anc)).collect();

    let mut unitary = CMatrix::zeros(s_dim * sub, s_dim * sub);
    for s in 0..s_dim {
        for sp in 0..s_dim {
            // Block (s, s') = Σ_i conj(P[i,s]) P[i,s'] Ũ_i, with Ũ_i = I for unused select states.
            let mut idle = ZERO;
            let mut coeffs = Vec::with_capacity(m);
            for i in 0..s_dim {
                let c = prep[(i, s)].conj() * prep[(i, sp)];
                if i < m {
                    coeffs.push(c);
                } else {
                    idle += c;
                }
            }
            let (r0, c0) = (s * sub, sp * sub);
            for (i, c) in coeffs.iter().enumerate() {
                if c.norm() == 0.0 {
                    continue;
                }
                let u = &padded[i];
                for x in 0..sub {
                    for y in 0..sub {
                        unitary[(r0 + x, c0 + y)] += c * u[(x, y)];
                    }
                }
            }
            if idle.norm() != 0.0 {
                for x in 0..sub {
                    unitary[(r0 + x, c0 + x)] += idle;
                }
            }
        }
    }
    let err = us.iter().zip(weights).map(|(u, w)| w * u.err).sum();
    let costs: Vec<Cost> = us.iter().map(|u| u.cost).collect();
    BlockEncoding::new(unitary, n, scale, err, format!("lcu[{m}]"), resources::lcu_cost(&costs, s_dim))
}

/// Encoding of `A / p` for `p > 1`, as an LCU with a zero block.
pub fn be_rescale(u: &BlockEncoding, p: f64) -> Result<BlockEncoding> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidFactor(p));
    }
    let n = u.system_dim;
    let mut swap = CMatrix::zeros(2 * n, 2 * n);
    swap.set_block(0, n, &CMatrix::identity(n));
    swap.set_block(n, 0, &CMatrix::identity(n));
    let zero = BlockEncoding::new(swap, n, u.scale, 0.0, "zero", Cost::default())?;
    let out = be_lcu(&[u.clone(), zero], &[1.0 / p, 1.0 - 1.0 / p])?;
    Ok(out.with_tag(format!("({})/{p}", u.ledger_tag)))
}

/// `⌈(γ/δ) ln(γ/ε)⌉` rounds of the amplification sequence.
pub fn amplification_rounds(gamma: f64, delta: f64, eps: f64) -> u64 {
    ((gamma / delta) * (gamma / eps).ln()).ceil().max(1.0) as u64
}

fn check_amplify_args(gamma: f64, delta: f64, eps: f64) -> Result<()> {
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(Error::InvalidFactor(gamma));
    }
    if !(delta > 0.0 && delta < 1.0) || !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "amplification needs 0 < delta < 1 and eps > 0 (got {delta}, {eps})"
        )));
    }
    Ok(())
}

/// Cost of amplifying an encoding with cost `inner` by `gamma`.
pub fn amplify_cost(inner: Cost, gamma: f64, delta: f64, eps: f64) -> Result<Cost> {
    check_amplify_args(gamma, delta, eps)?;
    Ok(resources::amplify_cost(inner, amplification_rounds(gamma, delta, eps)))
}

/// Multiplies the encoded block by `gamma > 1`.
///
/// The dense result is an exact dilation of `γ · block`, keeping the scale;
/// the output therefore encodes `γ A` with error `γ ε`. The ledger charges
/// the round count of the amplification sequence.
pub fn be_amplify(u: &BlockEncoding, gamma: f64, delta: f64, eps: f64) -> Result<BlockEncoding> {
    let cost = amplify_cost(u.cost, gamma, delta, eps)?;
    let block = u.block().scale_real(gamma);
    let value = op_norm(&block);
    if value > 1.0 - delta {
        return Err(Error::AmplificationOverflow { value, limit: 1.0 - delta });
    }
    let mut out = dilate(&block, 1.0)?;
    out.scale = u.scale;
    out.err = gamma * u.err;
    out.cost = cost;
    out.ledger_tag = format!("amp[{gamma}]({})", u.ledger_tag);
    Ok(out)
}

/// Exact encoding of `ρ = Tr_traced |Φ⟩⟨Φ|` where `|Φ⟩ = prep |0⟩` lives on
/// `traced ⊗ system`.
///
/// The unitary is `(G† ⊗ I)(I ⊗ SWAP)(G ⊗ I)` on `traced ⊗ copy ⊗ system`,
/// with `traced ⊗ copy` as the ancilla.
pub fn be_density_from_purification(prep: &CMatrix, traced_dim: usize) -> Result<BlockEncoding> {
    let total = prep.require_square()?;
    if traced_dim == 0 || total % traced_dim != 0 {
        return Err(Error::DimensionMismatch(format!(
            "preparation of dimension {total} over traced dimension {traced_dim}"
        )));
    }
    let defect = prep.unitarity_defect();
    if defect > UNITARY_TOL * (total as f64).sqrt().max(1.0) {
        return Err(Error::NotUnitary { defect });
    }
    let n = total / traced_dim;
    let dim = total * n;
    check_dim(dim)?;
    let g = kron(prep, &CMatrix::identity(n));
    // Row (a, b', b) of (I ⊗ SWAP) G̃ is row (a, b, b') of G̃.
    let swapped = CMatrix::from_fn(dim, dim, |row, col| {
        let (a, rest) = (row / (n * n), row % (n * n));
        let (bp, b) = (rest / n, rest % n);
        g[(a * n * n + b * n + bp, col)]
    });
    let unitary = g.adjoint().matmul(&swapped)?;
    let cost = resources::density_cost(Cost::default(), n, traced_dim);
    BlockEncoding::new(unitary, n, 1.0, 0.0, "density", cost)
}

/// Checks that `perm` is a permutation of `0..m`.
fn validate_permutation(perm: &[usize]) -> Result<()> {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return Err(Error::BadPermutation(format!("{perm:?} is not a permutation of 0..{}", perm.len())));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Minimal number of transpositions realising `perm`.
pub fn transposition_count(perm: &[usize]) -> usize {
    let mut seen = vec![false; perm.len()];
    let mut cycles = 0;
    for start in 0..perm.len() {
        if !seen[start] {
            cycles += 1;
            let mut k = start;
            while !seen[k] {
                seen[k] = true;
                k = perm[k];
            }
        }
    }
    perm.len() - cycles
}

/// Unitary moving the factor in slot `k` to slot `perm[k]` on `(C^d)^{⊗M}`.
pub fn slot_permutation_unitary(perm: &[usize], d: usize) -> Result<CMatrix> {
    validate_permutation(perm)?;
    let m = perm.len();
    let dim = d.pow(m as u32);
    let targets: Vec<usize> = (0..dim)
        .map(|idx| {
            let mut out = vec![0usize; m];
            for (k, &slot) in perm.iter().enumerate() {
                out[slot] = (idx / d.pow((m - 1 - k) as u32)) % d;
            }
            out.iter().fold(0, |acc, &digit| acc * d + digit)
        })
        .collect();
    Ok(permutation_matrix(&targets))
}

/// Encoding of `P A P†`, where `P` moves the factor in slot `k` to slot `perm[k]`.
pub fn be_swap_permute(u: &BlockEncoding, perm: &[usize], d: usize) -> Result<BlockEncoding> {
    validate_permutation(perm)?;
    let m = perm.len();
    if d < 2 || d.checked_pow(m as u32) != Some(u.system_dim) {
        return Err(Error::BadPermutation(format!(
            "permutation of {m} slots of dimension {d} does not match system dimension {}",
            u.system_dim
        )));
    }
    let swaps = transposition_count(perm) as u64;
    let p = slot_permutation_unitary(perm, d)?;
    let p_enc = BlockEncoding::from_unitary(p.clone(), "perm")?;
    let p_inv = BlockEncoding::from_unitary(p.adjoint(), "perm^-1")?;
    let out = be_product(&be_product(&p_enc, u)?, &p_inv)?;
    Ok(out.with_cost(resources::swap_cost(u.cost, swaps, d)).with_tag(format!("swap{perm:?}({})", u.ledger_tag)))
}
