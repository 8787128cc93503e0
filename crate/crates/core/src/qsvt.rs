//! Polynomial eigenvalue transforms of Hermitian block-encodings, and the
//! Jacobi-Anger expansion of `exp(-ixt)` in the Chebyshev basis.

use crate::block_encoding::{dilate, BlockEncoding, BLOCK_HERMITIAN_TOL};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_function, C64};
use crate::resources;

/// Default cap on the Jacobi-Anger degree.
pub const DEFAULT_DEGREE_CAP: usize = 10_000;

/// Number of Chebyshev points used to measure sup-norm errors.
pub const GRID_POINTS: usize = 2001;

/// Bessel arguments up to this magnitude use the ascending series.
const SERIES_LIMIT: f64 = 12.0;

/// Real polynomial `Σ_k c_k T_k(x)` with its measured approximation error.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebPoly {
    pub coefficients: Vec<f64>,
    pub sup_err: f64,
}

/// Chebyshev approximation of `½ exp(-ixt)` split into real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiAnger {
    /// Approximates `½ cos(xt)`; even.
    pub re: ChebPoly,
    /// Approximates `-½ sin(xt)`; odd.
    pub im: ChebPoly,
    pub degree: usize,
    /// `max_x |2 (re(x) + i im(x)) − exp(-ixt)|` on the grid.
    pub sup_err: f64,
    /// Factor (≤ 1) applied to keep `|re + i im| ≤ ½` on the grid.
    pub normalization: f64,
}

impl ChebPoly {
    pub fn new(coefficients: Vec<f64>, sup_err: f64) -> Self {
        ChebPoly { coefficients, sup_err }
    }

    /// `T_1(x) = x`.
    pub fn identity() -> Self {
        ChebPoly::new(vec![0.0, 1.0], 0.0)
    }

    pub fn zero() -> Self {
        ChebPoly::new(vec![0.0], 0.0)
    }

    /// Degree ignoring trailing zero coefficients.
    pub fn degree(&self) -> usize {
        self.coefficients.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coefficients.iter().skip(1).rev() {
            let b0 = 2.0 * x * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        self.coefficients.first().copied().unwrap_or(0.0) + x * b1 - b2
    }
}

/// Chebyshev points `cos(π j / (n − 1))` on `[-1, 1]`.
pub fn chebyshev_grid(n: usize) -> Vec<f64> {
    let last = (n.max(2) - 1) as f64;
    (0..n.max(2)).map(|j| (std::f64::consts::PI * j as f64 / last).cos()).collect()
}

/// Unevaluated sum `hi + lo` carrying about 32 significant digits.
#[derive(Debug, Clone, Copy)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    fn renormalized(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        DoubleDouble { hi: s, lo: lo - (s - hi) }
    }

    fn add(self, other: Self) -> Self {
        let s = self.hi + other.hi;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (other.hi - bb);
        Self::renormalized(s, err + self.lo + other.lo)
    }

    fn mul(self, other: Self) -> Self {
        let p = self.hi * other.hi;
        let err = self.hi.mul_add(other.hi, -p);
        Self::renormalized(p, err + self.hi * other.lo + self.lo * other.hi)
    }

    fn div_f64(self, d: f64) -> Self {
        let q = self.hi / d;
        let p = q * d;
        let err = q.mul_add(d, -p);
        Self::renormalized(q, (self.hi - p - err + self.lo) / d)
    }

    fn neg(self) -> Self {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }
}

/// Ascending series `Σ_m (-1)^m (t/2)^{2m+k} / (m! (m+k)!)` in double-double.
fn bessel_series(k: usize, t: f64) -> f64 {
    let half = DoubleDouble::from_f64(0.5 * t);
    let mut term = DoubleDouble::from_f64(1.0);
    for j in 1..=k {
        term = term.mul(half).div_f64(j as f64);
        if term.hi == 0.0 {
            return 0.0;
        }
    }
    let minus_sq = half.mul(half).neg();
    let mut sum = term;
    for m in 1..400usize {
        term = term.mul(minus_sq).div_f64((m * (m + k)) as f64);
        sum = sum.add(term);
        if (m as f64) > 0.5 * t.abs() && term.hi.abs() <= 1e-34 * sum.hi.abs().max(1e-300) {
            break;
        }
    }
    sum.hi + sum.lo
}

/// `J_0(t) … J_max(t)` by Miller's backward recurrence, for `t > 0`.
fn bessel_miller(max_order: usize, t: f64) -> Vec<f64> {
    let top = max_order.max(t.ceil() as usize);
    let mut start = top + (160.0 * top as f64).sqrt() as usize + 30;
    start += start % 2;
    let mut values = vec![0.0; max_order + 1];
    let (mut next, mut current) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    for n in (0..=start).rev() {
        // current = j_n, next = j_{n+1}
        if n <= max_order {
            values[n] = current;
        }
        if n % 2 == 0 {
            norm += if n == 0 { current } else { 2.0 * current };
        }
        if n == 0 {
            break;
        }
        let prev = 2.0 * n as f64 / t * current - next;
        next = current;
        current = prev;
        if current.abs() > 1e250 {
            let s = 1e-250;
            current *= s;
            next *= s;
            norm *= s;
            for v in values.iter_mut() {
                *v *= s;
            }
        }
    }
    values.iter().map(|v| v / norm).collect()
}

/// Bessel function of the first kind `J_k(t)`.
pub fn bessel_j(k: usize, t: f64) -> f64 {
    bessel_j_all(k, t)[k]
}

/// `J_0(t) … J_max(t)`.
pub fn bessel_j_all(max_order: usize, t: f64) -> Vec<f64> {
    if t == 0.0 {
        let mut v = vec![0.0; max_order + 1];
        v[0] = 1.0;
        return v;
    }
    let a = t.abs();
    let values = if a <= SERIES_LIMIT {
        (0..=max_order).map(|k| bessel_series(k, a)).collect::<Vec<_>>()
    } else {
        bessel_miller(max_order, a)
    };
    if t < 0.0 {
        // J_k(-t) = (-1)^k J_k(t)
        values.into_iter().enumerate().map(|(k, v)| if k % 2 == 1 { -v } else { v }).collect()
    } else {
        values
    }
}

/// Coefficients of `½ cos(xt)` and `-½ sin(xt)` truncated at `degree`.
fn jacobi_anger_coefficients(t: f64, degree: usize) -> (Vec<f64>, Vec<f64>) {
    let j = bessel_j_all(degree, t);
    let mut re = vec![0.0; degree + 1];
    let mut im = vec![0.0; degree + 1];
    re[0] = 0.5 * j[0];
    for k in 1..=degree {
        if k % 2 == 0 {
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            re[k] = sign * j[k];
        } else {
            let sign = if ((k - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            im[k] = -sign * j[k];
        }
    }
    (re, im)
}

fn build_jacobi_anger(t: f64, degree: usize, grid: &[f64]) -> JacobiAnger {
    let (mut re, mut im) = jacobi_anger_coefficients(t, degree);
    let (pre, pim) = (ChebPoly::new(re.clone(), 0.0), ChebPoly::new(im.clone(), 0.0));
    let peak = grid.iter().map(|&x| C64::new(pre.eval(x), pim.eval(x)).norm()).fold(0.0, f64::max);
    let normalization = if peak > 0.5 { 0.5 / peak } else { 1.0 };
    if normalization < 1.0 {
        re.iter_mut().chain(im.iter_mut()).for_each(|c| *c *= normalization);
    }
    let (mut re_err, mut im_err, mut total): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let (pre, pim) = (ChebPoly::new(re, 0.0), ChebPoly::new(im, 0.0));
    for &x in grid {
        let (r, i) = (pre.eval(x), pim.eval(x));
        let (c, s) = ((x * t).cos(), (x * t).sin());
        re_err = re_err.max((r - 0.5 * c).abs());
        im_err = im_err.max((i + 0.5 * s).abs());
        total = total.max((C64::new(2.0 * r, 2.0 * i) - C64::new(c, -s)).norm());
    }
    JacobiAnger {
        re: ChebPoly::new(pre.coefficients, re_err),
        im: ChebPoly::new(pim.coefficients, im_err),
        degree,
        sup_err: total,
        normalization,
    }
}

/// Jacobi-Anger approximation of `½ exp(-ixt)` with combined grid error
/// at most `delta`, using the default degree cap.
pub fn jacobi_anger(t: f64, delta: f64) -> Result<JacobiAnger> {
    jacobi_anger_with_cap(t, delta, DEFAULT_DEGREE_CAP)
}

/// Jacobi-Anger approximation with the smallest degree found by bracketing
/// from `⌈|t|⌉ + 4` and bisecting.
pub fn jacobi_anger_with_cap(t: f64, delta: f64, cap: usize) -> Result<JacobiAnger> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidConfig(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    if !t.is_finite() {
        return Err(Error::InvalidConfig(format!("evolution time must be finite, got {t}")));
    }
    let grid = chebyshev_grid(GRID_POINTS);
    let passes = |p: usize| {
        let ja = build_jacobi_anger(t, p, &grid);
        (ja.sup_err <= delta, ja)
    };
    if let (true, ja) = passes(0) {
        return Ok(ja);
    }
    let mut lo = 0;
    let mut hi = (t.abs().ceil() as usize + 4).min(cap);
    let mut best = loop {
        let (ok, ja) = passes(hi);
        if ok {
            break ja;
        }
        if hi >= cap {
            return Err(Error::DegreeOverflow { cap });
        }
        lo = hi;
        hi = ((hi as f64 * 1.5).ceil() as usize + 1).min(cap);
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let (ok, ja) = passes(mid);
        if ok {
            hi = mid;
            best = ja;
        } else {
            lo = mid;
        }
    }
    Ok(best)
}

/// Transforms a Hermitian block `A/α` into `P(A/α)` with
/// `P = pr + i·pi`, returning a scale-1 encoding.
///
/// The declared error is `4p√(ε/α)` plus the polynomials' own sup errors.
pub fn apply_poly(u: &BlockEncoding, pr: &ChebPoly, pi: &ChebPoly) -> Result<BlockEncoding> {
    let block = u.block();
    let max_dev = block.hermitian_defect();
    if max_dev > BLOCK_HERMITIAN_TOL {
        return Err(Error::NotHermitianBlock { max_dev });
    }
    let transformed = hermitian_function(&block, |x| C64::new(pr.eval(x), pi.eval(x)));
    let degree = pr.degree().max(pi.degree());
    let mut out = dilate(&transformed, 1.0)?;
    out.err = poly_error(degree, u.err, u.scale) + pr.sup_err + pi.sup_err;
    out.cost = resources::poly_cost(u.cost, degree as u64);
    out.ledger_tag = format!("poly[{degree}]({})", u.ledger_tag);
    Ok(out)
}

/// `4p√(ε/α)`, the propagated error of a degree-`p` transform.
pub fn poly_error(degree: usize, err: f64, scale: f64) -> f64 {
    4.0 * degree as f64 * (err / scale).sqrt()
}
