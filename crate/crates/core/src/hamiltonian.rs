//! Tensor-factor Hamiltonians `H = Σ_i ⊗_j F_ij`, their spectral
//! preprocessing, and the HAMSPEC text format.
//!
//! ```text
//! # three-qubit transverse-field Ising chain
//! dims 5 3 2
//! flags rescale=3
//! term 1: Z , Z , I
//! term 2: I , Z , Z
//! term 3: X , I , I
//! term 4: I , X , I
//! term 5: I , I , X
//! coeff 3: cosine 1 2 0
//! ```
//!
//! Terms are numbered from 1. A factor is `I`, one of the Pauli names
//! `X`, `Y`, `Z` (qubits only), or a row-major literal such as
//! `[ 0.5 0.1-0.2i ; 0.1+0.2i -0.5 ]`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, kron_all, CMatrix, SpectralData, C64, ONE, ZERO};

/// Tolerance for recognising an identity factor, in max-entry norm.
pub const IDENTITY_TOL: f64 = 1e-12;

/// Slack on the `‖H_i‖ ≤ 1/2` premise.
pub const NORM_PREMISE_TOL: f64 = 1e-9;

/// Closed-form time dependence of a term's coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientKind {
    /// `c`
    Constant,
    /// `Σ_k a_k s^k`
    Polynomial,
    /// `A cos(ω s + φ)`
    Cosine,
    /// `A sin(ω s + φ)`
    Sine,
    /// `A exp(-λ s)`
    ExponentialDecay,
}

/// A coefficient `α(s)` together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeCoefficient {
    pub kind: CoefficientKind,
    pub params: Vec<f64>,
}

/// One product term `⊗_j F_j` with its spectral data.
#[derive(Debug, Clone)]
pub struct TensorTerm {
    pub factors: Vec<CMatrix>,
    /// Slots whose factor is not the identity, ascending.
    pub nontrivial_set: Vec<usize>,
    pub spectral: Vec<SpectralData>,
    /// `Π_j Σ_k |λ_jk|` over all slots.
    pub gamma: f64,
    /// Same product restricted to `nontrivial_set`.
    pub gamma_prime: f64,
    pub term_rank: usize,
    /// Factor applied to the first nontrivial slot by rescaling (1 if untouched).
    pub rescale_factor: f64,
}

/// `H = Σ_i H_i` with optional time-dependent coefficients.
#[derive(Debug, Clone)]
pub struct TensorFactorHamiltonian {
    pub k: usize,
    pub m: usize,
    pub d: usize,
    pub terms: Vec<TensorTerm>,
    pub coefficients: Option<Vec<TimeCoefficient>>,
    /// User factor `c` when the rescale flag is set.
    pub rescale: Option<f64>,
    pub time_dependent: bool,
}

/// Result of a pairwise commutation check.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutationCheck {
    pub commuting: bool,
    /// Largest commutator norm over all pairs.
    pub max_norm: f64,
    /// The pair attaining `max_norm` when it exceeds the tolerance.
    pub witness: Option<(usize, usize, f64)>,
}

impl fmt::Display for CoefficientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoefficientKind::Constant => "constant",
            CoefficientKind::Polynomial => "polynomial",
            CoefficientKind::Cosine => "cosine",
            CoefficientKind::Sine => "sine",
            CoefficientKind::ExponentialDecay => "exponential-decay",
        })
    }
}

impl FromStr for CoefficientKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "constant" => Ok(CoefficientKind::Constant),
            "polynomial" => Ok(CoefficientKind::Polynomial),
            "cosine" => Ok(CoefficientKind::Cosine),
            "sine" => Ok(CoefficientKind::Sine),
            "exponential-decay" => Ok(CoefficientKind::ExponentialDecay),
            other => Err(format!("unknown coefficient kind `{other}`")),
        }
    }
}

impl TimeCoefficient {
    /// Builds a coefficient, filling omitted trailing parameters with defaults.
    pub fn new(kind: CoefficientKind, params: &[f64]) -> Result<Self> {
        let defaults: &[f64] = match kind {
            CoefficientKind::Constant => &[1.0],
            CoefficientKind::Polynomial => &[0.0],
            CoefficientKind::Cosine | CoefficientKind::Sine => &[1.0, 1.0, 0.0],
            CoefficientKind::ExponentialDecay => &[1.0, 1.0],
        };
        if kind != CoefficientKind::Polynomial && params.len() > defaults.len() {
            return Err(Error::InvalidConfig(format!(
                "{kind} takes at most {} parameters, got {}",
                defaults.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite parameter for {kind}")));
        }
        let mut full = params.to_vec();
        if full.len() < defaults.len() {
            full.extend_from_slice(&defaults[full.len()..]);
        }
        Ok(TimeCoefficient { kind, params: full })
    }

    pub fn constant(c: f64) -> Self {
        TimeCoefficient { kind: CoefficientKind::Constant, params: vec![c] }
    }

    pub fn polynomial(coeffs: &[f64]) -> Self {
        TimeCoefficient { kind: CoefficientKind::Polynomial, params: coeffs.to_vec() }
    }

    pub fn cosine(amplitude: f64, omega: f64, phase: f64) -> Self {
        TimeCoefficient { kind: CoefficientKind::Cosine, params: vec![amplitude, omega, phase] }
    }

    pub fn sine(amplitude: f64, omega: f64, phase: f64) -> Self {
        TimeCoefficient { kind: CoefficientKind::Sine, params: vec![amplitude, omega, phase] }
    }

    pub fn exponential_decay(amplitude: f64, rate: f64) -> Self {
        TimeCoefficient { kind: CoefficientKind::ExponentialDecay, params: vec![amplitude, rate] }
    }

    /// `α(s)`.
    pub fn eval(&self, s: f64) -> f64 {
        let p = &self.params;
        match self.kind {
            CoefficientKind::Constant => p[0],
            CoefficientKind::Polynomial => p.iter().rev().fold(0.0, |acc, a| acc * s + a),
            CoefficientKind::Cosine => p[0] * (p[1] * s + p[2]).cos(),
            CoefficientKind::Sine => p[0] * (p[1] * s + p[2]).sin(),
            CoefficientKind::ExponentialDecay => p[0] * (-p[1] * s).exp(),
        }
    }

    /// `β(t) = ∫_0^t α(s) ds` in closed form.
    pub fn integrate(&self, t: f64) -> f64 {
        let p = &self.params;
        match self.kind {
            CoefficientKind::Constant => p[0] * t,
            CoefficientKind::Polynomial => {
                p.iter().enumerate().rev().fold(0.0, |acc, (k, a)| acc * t + a / (k + 1) as f64) * t
            }
            CoefficientKind::Cosine => {
                let (a, w, phi) = (p[0], p[1], p[2]);
                if w == 0.0 {
                    a * phi.cos() * t
                } else {
                    // sin(wt + φ) - sin(φ), written to avoid cancellation at small wt.
                    2.0 * a * (0.5 * w * t + phi).cos() * (0.5 * w * t).sin() / w
                }
            }
            CoefficientKind::Sine => {
                let (a, w, phi) = (p[0], p[1], p[2]);
                if w == 0.0 {
                    a * phi.sin() * t
                } else {
                    2.0 * a * (0.5 * w * t + phi).sin() * (0.5 * w * t).sin() / w
                }
            }
            CoefficientKind::ExponentialDecay => {
                let (a, rate) = (p[0], p[1]);
                if rate == 0.0 {
                    a * t
                } else {
                    -a * (-rate * t).exp_m1() / rate
                }
            }
        }
    }

    /// Polynomial degree of `β` when `α` is a polynomial.
    pub fn antiderivative_degree(&self) -> Option<usize> {
        match self.kind {
            CoefficientKind::Constant => Some(1),
            CoefficientKind::Polynomial => Some(self.params.len()),
            _ => None,
        }
    }
}

/// `β(t)` for a coefficient.
pub fn integrate_coefficient(c: &TimeCoefficient, t: f64) -> f64 {
    c.integrate(t)
}

fn is_identity(f: &CMatrix) -> bool {
    let n = f.rows();
    (f - &CMatrix::identity(n)).max_abs() < IDENTITY_TOL
}

impl TensorTerm {
    /// Diagonalises each factor and derives the bookkeeping fields.
    pub fn new(factors: Vec<CMatrix>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::DimensionMismatch("a term needs at least one factor".into()));
        }
        let d = factors[0].rows();
        let mut spectral = Vec::with_capacity(factors.len());
        for (j, f) in factors.iter().enumerate() {
            if f.rows() != d || f.cols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "factor {j} is {}x{}, expected {d}x{d}",
                    f.rows(),
                    f.cols()
                )));
            }
            let s = eig_hermitian(f).map_err(|e| match e {
                Error::NotHermitian { max_dev, .. } => {
                    Error::NotHermitian { max_dev, context: Some(format!("factor {j}")) }
                }
                other => other,
            })?;
            spectral.push(s);
        }
        let nontrivial_set = (0..factors.len()).filter(|&j| !is_identity(&factors[j])).collect();
        let mut term = TensorTerm {
            factors,
            nontrivial_set,
            spectral,
            gamma: 0.0,
            gamma_prime: 0.0,
            term_rank: 0,
            rescale_factor: 1.0,
        };
        let (gamma, gamma_prime) = compute_gamma(&term);
        term.gamma = gamma;
        term.gamma_prime = gamma_prime;
        term.term_rank = term.spectral.iter().map(|s| s.rank).product();
        Ok(term)
    }

    /// Factor dimension.
    pub fn d(&self) -> usize {
        self.factors[0].rows()
    }

    /// Number of tensor slots.
    pub fn m(&self) -> usize {
        self.factors.len()
    }

    /// Operator norm, as the product of the factor norms.
    pub fn norm(&self) -> f64 {
        self.spectral.iter().map(|s| s.eigenvalues.first().map_or(0.0, |l| l.abs())).product()
    }

    /// Dense `d^M x d^M` matrix of the term.
    pub fn assemble(&self) -> CMatrix {
        kron_all(&self.factors)
    }

    /// Multiplies the first nontrivial factor (or slot 0) by `factor`.
    fn rescaled(self, factor: f64) -> Result<Self> {
        if factor == 1.0 {
            return Ok(self);
        }
        let slot = self.nontrivial_set.first().copied().unwrap_or(0);
        let mut factors = self.factors;
        factors[slot] = factors[slot].scale_real(factor);
        let mut term = TensorTerm::new(factors)?;
        term.rescale_factor = factor;
        Ok(term)
    }
}

/// `(γ, γ')`: products of per-factor absolute eigenvalue sums over all
/// slots and over the nontrivial slots.
pub fn compute_gamma(term: &TensorTerm) -> (f64, f64) {
    let sums: Vec<f64> = term.spectral.iter().map(SpectralData::abs_sum).collect();
    let gamma = sums.iter().product();
    let gamma_prime = term.nontrivial_set.iter().map(|&j| sums[j]).product();
    (gamma, gamma_prime)
}

impl TensorFactorHamiltonian {
    /// Builds a Hamiltonian from factor lists.
    ///
    /// With `rescale = Some(c)`, term `i` has its first nontrivial factor
    /// multiplied by `1 / (c · max(1, 2‖H_i‖))`; otherwise every term must
    /// satisfy `‖H_i‖ ≤ 1/2`.
    pub fn new(factor_lists: Vec<Vec<CMatrix>>, rescale: Option<f64>) -> Result<Self> {
        if factor_lists.is_empty() {
            return Err(Error::DimensionMismatch("at least one term is required".into()));
        }
        if let Some(c) = rescale {
            if !(c.is_finite() && c >= 1.0) {
                return Err(Error::InvalidConfig(format!("rescale factor must be >= 1, got {c}")));
            }
        }
        let m = factor_lists[0].len();
        let d = factor_lists[0].first().map_or(0, CMatrix::rows);
        if m == 0 || d < 2 {
            return Err(Error::DimensionMismatch(format!("need M >= 1 and d >= 2, got M={m}, d={d}")));
        }
        let mut terms = Vec::with_capacity(factor_lists.len());
        for (i, factors) in factor_lists.into_iter().enumerate() {
            if factors.len() != m {
                return Err(Error::DimensionMismatch(format!("term {i} has {} factors, expected {m}", factors.len())));
            }
            let term = TensorTerm::new(factors).map_err(|e| match e {
                Error::NotHermitian { max_dev, context } => {
                    Error::NotHermitian { max_dev, context: Some(format!("term {i} {}", context.unwrap_or_default())) }
                }
                Error::DimensionMismatch(msg) => Error::DimensionMismatch(format!("term {i}: {msg}")),
                other => other,
            })?;
            if term.d() != d {
                return Err(Error::DimensionMismatch(format!(
                    "term {i} has factor dimension {}, expected {d}",
                    term.d()
                )));
            }
            let term = match rescale {
                Some(c) => {
                    let factor = 1.0 / (c * (2.0 * term.norm()).max(1.0));
                    term.rescaled(factor)?
                }
                None => {
                    let norm = term.norm();
                    if norm > 0.5 + NORM_PREMISE_TOL {
                        return Err(Error::NormPremiseViolated { term: i, norm });
                    }
                    term
                }
            };
            terms.push(term);
        }
        Ok(TensorFactorHamiltonian { k: terms.len(), m, d, terms, coefficients: None, rescale, time_dependent: false })
    }

    /// Attaches one coefficient per term.
    pub fn with_coefficients(mut self, coefficients: Vec<TimeCoefficient>) -> Result<Self> {
        if coefficients.len() != self.k {
            return Err(Error::DimensionMismatch(format!("{} coefficients for {} terms", coefficients.len(), self.k)));
        }
        self.coefficients = Some(coefficients);
        self.time_dependent = true;
        Ok(self)
    }

    /// Hilbert-space dimension `d^M`.
    pub fn dim(&self) -> usize {
        self.d.pow(self.m as u32)
    }

    /// Largest `|R_i|` over terms.
    pub fn max_nontrivial(&self) -> usize {
        self.terms.iter().map(|t| t.nontrivial_set.len()).max().unwrap_or(0)
    }

    /// `Σ_i γ_i` or `Σ_i γ'_i`.
    pub fn gamma_total(&self, simplified: bool) -> f64 {
        self.terms.iter().map(|t| if simplified { t.gamma_prime } else { t.gamma }).sum()
    }

    /// Keeps the first `k` terms (and their coefficients).
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k {
            return Err(Error::InvalidConfig(format!("cannot keep {k} of {} terms", self.k)));
        }
        let mut h = self.clone();
        h.terms.truncate(k);
        h.k = k;
        if let Some(c) = h.coefficients.as_mut() {
            c.truncate(k);
        }
        Ok(h)
    }

    /// Repeats the term list cyclically until it holds `k` terms.
    pub fn cycled(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("cannot build a Hamiltonian with 0 terms".into()));
        }
        let mut h = self.clone();
        h.terms = (0..k).map(|i| self.terms[i % self.k].clone()).collect();
        h.coefficients = self.coefficients.as_ref().map(|c| (0..k).map(|i| c[i % self.k].clone()).collect());
        h.k = k;
        Ok(h)
    }

    /// `Σ_i w_i H_i` for explicit real weights.
    pub fn assemble_weighted(&self, weights: &[f64]) -> CMatrix {
        let n = self.dim();
        let mut acc = CMatrix::zeros(n, n);
        for (term, &w) in self.terms.iter().zip(weights) {
            if w != 0.0 {
                acc = &acc + &term.assemble().scale_real(w);
            }
        }
        acc
    }

    /// `β_i(t)` for every term.
    pub fn integrated_coefficients(&self, t: f64) -> Result<Vec<f64>> {
        let coeffs = self.coefficients.as_ref().ok_or(Error::CoefficientsMissing)?;
        Ok(coeffs.iter().map(|c| c.integrate(t)).collect())
    }
}

/// Dense `H`, or `H(t) = Σ_i α_i(t) H_i` when `t` is given.
pub fn assemble_dense(h: &TensorFactorHamiltonian, t: Option<f64>) -> Result<CMatrix> {
    let weights: Vec<f64> = match t {
        None => vec![1.0; h.k],
        Some(t) => {
            let coeffs = h.coefficients.as_ref().ok_or(Error::CoefficientsMissing)?;
            coeffs.iter().map(|c| c.eval(t)).collect()
        }
    };
    Ok(h.assemble_weighted(&weights))
}

/// Checks `‖H_i H_j − H_j H_i‖ ≤ tol` for every pair of terms.
pub fn check_pairwise_commuting(h: &TensorFactorHamiltonian, tol: f64) -> CommutationCheck {
    let dense: Vec<CMatrix> = h.terms.iter().map(TensorTerm::assemble).collect();
    let mut max_norm: f64 = 0.0;
    let mut worst = None;
    for i in 0..dense.len() {
        for j in i + 1..dense.len() {
            let comm = &(&dense[i] * &dense[j]) - &(&dense[j] * &dense[i]);
            let norm = crate::linalg::op_norm(&comm);
            if norm > max_norm {
                max_norm = norm;
                worst = Some((i, j, norm));
            }
        }
    }
    let commuting = max_norm <= tol;
    CommutationCheck { commuting, max_norm, witness: if commuting { None } else { worst } }
}

fn pauli(name: char) -> CMatrix {
    let i = C64::new(0.0, 1.0);
    match name {
        'X' => CMatrix::from_vec(2, 2, vec![ZERO, ONE, ONE, ZERO]),
        'Y' => CMatrix::from_vec(2, 2, vec![ZERO, -i, i, ZERO]),
        _ => CMatrix::from_vec(2, 2, vec![ONE, ZERO, ZERO, -ONE]),
    }
    .expect("2x2 literal")
}

/// Parses a complex literal: `1.5`, `-2i`, `i`, `0.5-1e-3i`.
pub fn parse_complex(token: &str) -> std::result::Result<C64, String> {
    let s = token.trim();
    let bad = || format!("invalid complex number `{token}`");
    if s.is_empty() {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&p| (bytes[p] == b'+' || bytes[p] == b'-') && !matches!(bytes[p - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(p) => (&body[..p], &body[p..]),
        None => ("0", body),
    };
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other.parse().map_err(|_| bad())?,
    };
    if !(re.is_finite() && im.is_finite()) {
        return Err(bad());
    }
    Ok(C64::new(re, im))
}

fn parse_literal(text: &str, line: usize) -> Result<CMatrix> {
    let inner = text
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| Error::Parse { line, msg: format!("malformed matrix literal `{text}`") })?;
    let rows: Vec<Vec<C64>> = inner
        .split(';')
        .map(|row| row.split_whitespace().map(parse_complex).collect::<std::result::Result<Vec<_>, _>>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|msg| Error::Parse { line, msg })?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch(format!("line {line}: matrix literal is not square")));
    }
    CMatrix::from_vec(n, n, rows.into_iter().flatten().collect())
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(s[start..].trim());
    parts
}

fn parse_index(token: &str, k: usize, line: usize) -> Result<usize> {
    let i: usize = token
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("invalid term index `{}`", token.trim()) })?;
    if i == 0 || i > k {
        return Err(Error::Parse { line, msg: format!("term index {i} outside 1..={k}") });
    }
    Ok(i - 1)
}

/// Parses a HAMSPEC document into a validated Hamiltonian.
pub fn parse_hamiltonian(text: &str) -> Result<TensorFactorHamiltonian> {
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut rescale: Option<f64> = None;
    let mut timedep = false;
    let mut terms: Vec<Option<(usize, Vec<String>)>> = Vec::new();
    let mut coeffs: Vec<Option<TimeCoefficient>> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (keyword, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        match keyword {
            "dims" => {
                if dims.is_some() {
                    return Err(Error::Parse { line, msg: "duplicate `dims` line".into() });
                }
                let nums: Vec<usize> =
                    rest.split_whitespace()
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::Parse { line, msg: "`dims` expects three integers K M d".into() })?;
                let [k, m, d] = nums[..] else {
                    return Err(Error::Parse { line, msg: "`dims` expects three integers K M d".into() });
                };
                if k == 0 || m == 0 || d < 2 {
                    return Err(Error::Parse { line, msg: format!("need K >= 1, M >= 1, d >= 2 (got {k} {m} {d})") });
                }
                dims = Some((k, m, d));
                terms = vec![None; k];
                coeffs = vec![None; k];
            }
            "flags" => {
                for flag in rest.split_whitespace() {
                    match flag.split_once('=') {
                        None if flag == "rescale" => rescale = Some(1.0),
                        None if flag == "timedep" => timedep = true,
                        Some(("rescale", v)) => {
                            let c: f64 = v
                                .parse()
                                .map_err(|_| Error::Parse { line, msg: format!("invalid rescale factor `{v}`") })?;
                            if !(c.is_finite() && c >= 1.0) {
                                return Err(Error::Parse {
                                    line,
                                    msg: format!("rescale factor must be >= 1, got {c}"),
                                });
                            }
                            rescale = Some(c);
                        }
                        _ => return Err(Error::Parse { line, msg: format!("unknown flag `{flag}`") }),
                    }
                }
            }
            "term" | "coeff" => {
                let (k, m, _) = dims.ok_or(Error::Parse { line, msg: "`dims` must come first".into() })?;
                let (index, body) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::Parse { line, msg: format!("expected `{keyword} i: ...`") })?;
                let i = parse_index(index, k, line)?;
                if keyword == "term" {
                    if terms[i].is_some() {
                        return Err(Error::Parse { line, msg: format!("term {} defined twice", i + 1) });
                    }
                    let factors: Vec<String> = split_top_level(body).into_iter().map(str::to_owned).collect();
                    if factors.len() != m {
                        return Err(Error::DimensionMismatch(format!(
                            "line {line}: term {} has {} factors, expected {m}",
                            i + 1,
                            factors.len()
                        )));
                    }
                    terms[i] = Some((line, factors));
                } else {
                    if coeffs[i].is_some() {
                        return Err(Error::Parse { line, msg: format!("coefficient {} defined twice", i + 1) });
                    }
                    let mut tokens = body.split_whitespace();
                    let kind: CoefficientKind = tokens
                        .next()
                        .ok_or_else(|| Error::Parse { line, msg: "missing coefficient kind".into() })?
                        .parse()
                        .map_err(|msg| Error::Parse { line, msg })?;
                    let params: Vec<f64> = tokens
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::Parse { line, msg: "invalid coefficient parameter".into() })?;
                    let c =
                        TimeCoefficient::new(kind, &params).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
                    coeffs[i] = Some(c);
                }
            }
            other => return Err(Error::Parse { line, msg: format!("unknown keyword `{other}`") }),
        }
    }

    let (_, _, d) = dims.ok_or(Error::Parse { line: 0, msg: "missing `dims` line".into() })?;
    let mut factor_lists = Vec::with_capacity(terms.len());
    for (i, entry) in terms.iter().enumerate() {
        let (line, names) =
            entry.as_ref().ok_or_else(|| Error::Parse { line: 0, msg: format!("term {} is missing", i + 1) })?;
        let mut factors = Vec::with_capacity(names.len());
        for name in names {
            let f = match name.as_str() {
                "I" => CMatrix::identity(d),
                "X" | "Y" | "Z" => {
                    if d != 2 {
                        return Err(Error::Parse { line: *line, msg: format!("Pauli `{name}` requires d = 2") });
                    }
                    let p = pauli(name.chars().next().expect("nonempty"));
                    if rescale.is_some() {
                        p.scale_real(0.5)
                    } else {
                        p
                    }
                }
                lit if lit.starts_with('[') => {
                    let mat = parse_literal(lit, *line)?;
                    if mat.rows() != d {
                        return Err(Error::DimensionMismatch(format!(
                            "line {line}: literal is {0}x{0}, expected {d}x{d}",
                            mat.rows()
                        )));
                    }
                    mat
                }
                other => return Err(Error::Parse { line: *line, msg: format!("unknown factor `{other}`") }),
            };
            factors.push(f);
        }
        factor_lists.push(factors);
    }

    let h = TensorFactorHamiltonian::new(factor_lists, rescale)?;
    let any_coeff = coeffs.iter().any(Option::is_some);
    let mut h = if any_coeff {
        let full = coeffs.into_iter().map(|c| c.unwrap_or(TimeCoefficient::constant(1.0))).collect();
        h.with_coefficients(full)?
    } else {
        h
    };
    h.time_dependent = timedep || any_coeff;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testing::*;
    use crate::linalg::{kron, op_norm};
    use proptest::prelude::*;

    const TFIM3: &str = "\
# transverse-field Ising chain on three qubits
dims 5 3 2
flags rescale=3
term 1: Z , Z , I
term 2: I , Z , Z
term 3: X , I , I
term 4: I , X , I
term 5: I , I , X
";

    fn z() -> CMatrix {
        CMatrix::real_diagonal(&[1.0, -1.0])
    }

    fn x() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    /// Adaptive Simpson quadrature.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    /// Dense assembly by digit arithmetic, independent of `kron`.
    fn assemble_by_index(h: &TensorFactorHamiltonian) -> CMatrix {
        let (d, m) = (h.d, h.m);
        let n = h.dim();
        CMatrix::from_fn(n, n, |row, col| {
            h.terms
                .iter()
                .map(|term| {
                    let mut prod = ONE;
                    for j in 0..m {
                        let shift = d.pow((m - 1 - j) as u32);
                        prod *= term.factors[j][((row / shift) % d, (col / shift) % d)];
                    }
                    prod
                })
                .sum()
        })
    }

    #[test]
    fn two_term_example() {
        let text = "dims 2 2 2\nflags rescale\nterm 1: Z , Z\nterm 2: X , I\n";
        let h = parse_hamiltonian(text).unwrap();
        assert_eq!((h.k, h.m, h.d), (2, 2, 2));
        assert_eq!(h.terms[0].nontrivial_set, vec![0, 1]);
        assert_eq!(h.terms[1].nontrivial_set, vec![0]);
        assert!(!h.time_dependent);
        assert!(h.coefficients.is_none());
    }

    #[test]
    fn all_identity_term_has_unit_gamma_prime() {
        let term = TensorTerm::new(vec![CMatrix::identity(2), CMatrix::identity(2)]).unwrap();
        assert!(term.nontrivial_set.is_empty());
        assert_eq!(term.gamma_prime, 1.0);
        assert!((term.gamma - 4.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_identity_is_not_trivial() {
        let term = TensorTerm::new(vec![CMatrix::identity(2).scale_real(0.5), CMatrix::identity(2)]).unwrap();
        assert_eq!(term.nontrivial_set, vec![0]);
    }

    #[test]
    fn gamma_examples() {
        let zz = TensorTerm::new(vec![z(), z()]).unwrap();
        assert!((compute_gamma(&zz).0 - 4.0).abs() < 1e-12);
        let zi = TensorTerm::new(vec![z().scale_real(0.5), CMatrix::identity(2)]).unwrap();
        let (g, gp) = compute_gamma(&zi);
        assert!((gp - 1.0).abs() < 1e-12 && (g - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_matches_brute_force_products() {
        let mut r = rng(11);
        let a = random_hermitian(&mut r, 3);
        let b = random_hermitian(&mut r, 3);
        let term = TensorTerm::new(vec![a.clone(), b.clone()]).unwrap();
        // Eigenvalues of the assembled term are exactly the pairwise products.
        let dense = kron(&a, &b);
        let brute: f64 = eig_hermitian(&dense).unwrap().eigenvalues.iter().map(|l| l.abs()).sum();
        assert!((term.gamma - brute).abs() < 1e-10 * brute);
        let ea = eig_hermitian(&a).unwrap().eigenvalues;
        let eb = eig_hermitian(&b).unwrap().eigenvalues;
        let mut loop_sum = 0.0;
        for la in &ea {
            for lb in &eb {
                loop_sum += (la * lb).abs();
            }
        }
        assert!((term.gamma - loop_sum).abs() < 1e-12 * loop_sum);
    }

    #[test]
    fn tfim_gamma_totals() {
        let h = parse_hamiltonian(TFIM3).unwrap();
        assert_eq!(h.k, 5);
        // Each term ends up with factors of spectrum ±1/6 or ±1/2 on its nontrivial
        // slots: ZZ terms give (1/3)(1) and field terms give 1/3.
        assert!((h.gamma_total(true) - 5.0 / 3.0).abs() < 1e-12);
        // ZZ terms have one idle slot (γ = 2γ'), field terms two (γ = 4γ').
        assert!((h.gamma_total(false) - (2.0 * 2.0 / 3.0 + 3.0 * 4.0 / 3.0)).abs() < 1e-12);
        for term in &h.terms {
            assert!((term.rescale_factor - 1.0 / 3.0).abs() < 1e-15);
        }
        let dense = assemble_dense(&h, None).unwrap();
        assert!(op_norm(&dense) < 0.9);
    }

    #[test]
    fn tfim_assembly_matches_index_oracle() {
        let h = parse_hamiltonian(TFIM3).unwrap();
        let dense = assemble_dense(&h, None).unwrap();
        assert!(dist(&dense, &assemble_by_index(&h)) < 1e-15);
        assert!(dense.is_hermitian(1e-12));
        let sum = h.terms.iter().fold(CMatrix::zeros(8, 8), |acc, t| &acc + &t.assemble());
        assert!(dist(&dense, &sum) < 1e-15);
    }

    #[test]
    fn single_term_assembly() {
        let h = TensorFactorHamiltonian::new(vec![vec![z().scale_real(0.5), z()]], None).unwrap();
        let dense = assemble_dense(&h, None).unwrap();
        assert!(dist(&dense, &CMatrix::real_diagonal(&[0.5, -0.5, -0.5, 0.5])) < 1e-15);
    }

    #[test]
    fn zero_coefficients_give_zero_matrix() {
        let h = TensorFactorHamiltonian::new(vec![vec![z().scale_real(0.5)], vec![x().scale_real(0.5)]], None)
            .unwrap()
            .with_coefficients(vec![TimeCoefficient::constant(0.0), TimeCoefficient::polynomial(&[0.0])])
            .unwrap();
        assert_eq!(assemble_dense(&h, Some(1.3)).unwrap().max_abs(), 0.0);
        let bare = TensorFactorHamiltonian::new(vec![vec![z().scale_real(0.5)]], None).unwrap();
        assert_eq!(assemble_dense(&bare, Some(1.0)), Err(Error::CoefficientsMissing));
    }

    #[test]
    fn norm_premise_is_enforced() {
        let err = parse_hamiltonian("dims 1 2 2\nterm 1: Z , Z\n").unwrap_err();
        assert!(matches!(err, Error::NormPremiseViolated { term: 0, .. }));
        let h = parse_hamiltonian("dims 1 2 2\nterm 1: [0.5 0 ; 0 -0.5] , I\n").unwrap();
        assert!((h.terms[0].norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("dims 1 1 2\nterm 1: Q\n", 2),
            ("term 1: Z\n", 1),
            ("dims 1 1 2\nflags turbo\n", 2),
            ("dims 1 1 2\nterm 3: I\n", 2),
            ("dims 1 1 2\n\n# note\nterm 1: [1 0 ; 0 x]\n", 4),
            ("dims 1 1 2\nterm 1: I\ncoeff 1: wobble 1\n", 3),
        ];
        for (text, expected) in cases {
            match parse_hamiltonian(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, expected, "{text}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn non_hermitian_factor_is_identified() {
        let err = parse_hamiltonian("dims 1 2 2\nterm 1: I , [0 0.3 ; 0 0]\n").unwrap_err();
        match err {
            Error::NotHermitian { context: Some(ctx), .. } => assert!(ctx.contains("factor 1"), "{ctx}"),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_hamiltonian("dims 1 2 2\nterm 1: I , [0 0.3 0 ; 0.3 0 0 ; 0 0 0]\n").unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("1.5").unwrap(), C64::new(1.5, 0.0));
        assert_eq!(parse_complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("i").unwrap(), C64::new(0.0, 1.0));
        assert_eq!(parse_complex("0.5-2i").unwrap(), C64::new(0.5, -2.0));
        assert_eq!(parse_complex("1e-3+2.5e-1i").unwrap(), C64::new(1e-3, 0.25));
        assert_eq!(parse_complex("-3e+2i").unwrap(), C64::new(0.0, -300.0));
        assert!(parse_complex("1+").is_err());
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn pauli_y_literal_and_coefficients() {
        let text = "dims 2 1 2\nflags rescale timedep\nterm 1: Y\nterm 2: [0.25 0.1-0.2i ; 0.1+0.2i -0.25]\ncoeff 2: sine 2 0.5\n";
        let h = parse_hamiltonian(text).unwrap();
        assert!(h.time_dependent);
        let coeffs = h.coefficients.as_ref().unwrap();
        assert_eq!(coeffs[0], TimeCoefficient::constant(1.0));
        assert_eq!(coeffs[1], TimeCoefficient::sine(2.0, 0.5, 0.0));
        let y = &h.terms[0].factors[0];
        assert!((y[(0, 1)] - C64::new(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn timedep_flag_without_coefficients() {
        let h = parse_hamiltonian("dims 1 1 2\nflags rescale timedep\nterm 1: Z\n").unwrap();
        assert!(h.time_dependent && h.coefficients.is_none());
        assert_eq!(h.integrated_coefficients(1.0), Err(Error::CoefficientsMissing));
    }

    #[test]
    fn commutation_examples() {
        let i2 = CMatrix::identity(2);
        let half = |m: CMatrix| m.scale_real(0.5);
        let diag =
            TensorFactorHamiltonian::new(vec![vec![half(z()), i2.clone()], vec![i2.clone(), half(z())]], None).unwrap();
        assert!(check_pairwise_commuting(&diag, 1e-9).commuting);

        let clash =
            TensorFactorHamiltonian::new(vec![vec![half(x()), i2.clone()], vec![half(z()), i2.clone()]], None).unwrap();
        let check = check_pairwise_commuting(&clash, 1e-9);
        assert!(!check.commuting);
        // [X/2, Z/2] = -iY/2 has norm 1/2.
        let (i, j, norm) = check.witness.unwrap();
        assert_eq!((i, j), (0, 1));
        assert!((norm - 0.5).abs() < 1e-12);

        // ZZ and XX on the same pair of qubits commute; both act trivially on the rest.
        let stab = TensorFactorHamiltonian::new(
            vec![vec![half(z()), z(), i2.clone(), i2.clone()], vec![half(x()), x(), i2.clone(), i2.clone()]],
            None,
        )
        .unwrap();
        assert!(check_pairwise_commuting(&stab, 1e-9).commuting);
    }

    #[test]
    fn integral_examples() {
        assert_eq!(integrate_coefficient(&TimeCoefficient::constant(1.0), 2.0), 2.0);
        let c = TimeCoefficient::cosine(1.0, 1.0, 0.0);
        assert!((integrate_coefficient(&c, std::f64::consts::FRAC_PI_2) - 1.0).abs() < 1e-15);
        let p = TimeCoefficient::polynomial(&[0.0, 0.0, 3.0]);
        assert!((integrate_coefficient(&p, 1.5) - 3.375).abs() < 1e-14);
        let oracle = simpson(&|s| p.eval(s), 0.0, 1.5, 1e-13);
        assert!((oracle - 3.375).abs() < 1e-10);
    }

    #[test]
    fn degenerate_rates() {
        assert!((TimeCoefficient::cosine(2.0, 0.0, 0.5).integrate(3.0) - 6.0 * 0.5f64.cos()).abs() < 1e-14);
        assert!((TimeCoefficient::sine(2.0, 0.0, 0.5).integrate(3.0) - 6.0 * 0.5f64.sin()).abs() < 1e-14);
        assert_eq!(TimeCoefficient::exponential_decay(2.0, 0.0).integrate(3.0), 6.0);
    }

    #[test]
    fn term_rank_matches_dense_rank() {
        let mut r = rng(21);
        let low = {
            let v = random_unit(&mut r, 3);
            v.projector().scale_real(0.4)
        };
        let full = random_hermitian(&mut r, 3).scale_real(0.2);
        let term = TensorTerm::new(vec![low.clone(), full.clone(), CMatrix::identity(3)]).unwrap();
        let dense_rank = eig_hermitian(&term.assemble()).unwrap().rank;
        assert_eq!(term.term_rank, dense_rank);
        assert_eq!(term.term_rank, 9);
    }

    fn arb_coefficient() -> impl Strategy<Value = TimeCoefficient> {
        prop_oneof![
            (-3.0f64..3.0).prop_map(TimeCoefficient::constant),
            prop::collection::vec(-2.0f64..2.0, 1..5).prop_map(|c| TimeCoefficient::polynomial(&c)),
            (-2.0f64..2.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, w, p)| TimeCoefficient::cosine(a, w, p)),
            (-2.0f64..2.0, -3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, w, p)| TimeCoefficient::sine(a, w, p)),
            (-2.0f64..2.0, -1.0f64..2.0).prop_map(|(a, l)| TimeCoefficient::exponential_decay(a, l)),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn antiderivative_matches_quadrature(c in arb_coefficient(), t in 0.0f64..10.0) {
            let quad = simpson(&|s| c.eval(s), 0.0, t, 1e-12);
            let exact = c.integrate(t);
            prop_assert!((quad - exact).abs() < 1e-8 * exact.abs().max(1.0), "{:?} t={} {} vs {}", c, t, quad, exact);
        }

        #[test]
        fn gamma_relation_holds(seed in any::<u64>(), mask in 0u8..16) {
            let mut r = rng(seed);
            let factors: Vec<CMatrix> = (0..4)
                .map(|j| if mask & (1 << j) != 0 { random_hermitian(&mut r, 2) } else { CMatrix::identity(2) })
                .collect();
            let term = TensorTerm::new(factors).unwrap();
            let idle = 4 - term.nontrivial_set.len();
            let expected = 2f64.powi(idle as i32) * term.gamma_prime;
            prop_assert!((term.gamma - expected).abs() <= 1e-10 * term.gamma.max(1e-300));
            prop_assert_eq!(term.nontrivial_set.len(), mask.count_ones() as usize);
        }

        #[test]
        fn gamma_prime_bounded_under_premise(seed in any::<u64>(), c in 1.0f64..4.0) {
            let mut r = rng(seed);
            let factors = vec![random_hermitian(&mut r, 3), CMatrix::identity(3), random_hermitian(&mut r, 3)];
            let h = TensorFactorHamiltonian::new(vec![factors], Some(c)).unwrap();
            let term = &h.terms[0];
            prop_assert!(term.norm() <= 0.5 + 1e-9);
            prop_assert!(term.gamma_prime <= 3f64.powi(term.nontrivial_set.len() as i32) + 1e-9);
            prop_assert!(op_norm(&term.assemble()) <= 0.5 + 1e-9);
        }
    }
}
