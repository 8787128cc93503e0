//! Brute-force oracles, error comparison and resource scaling sweeps.

use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonian::{check_pairwise_commuting, TensorFactorHamiltonian, TensorTerm};
use crate::linalg::{expm_hermitian, op_norm, CMatrix};
use crate::pipelines::{
    estimate_resources, monte_carlo_error, LedgerEstimate, PipelineConfig, PipelineResult, COMMUTATION_TOL,
};
use crate::qsvt::jacobi_anger;
use crate::resources::Counter;
use crate::truncation::randomized_truncate_with_groups;

/// `exp(-iHt)`, or `exp(-i Σ_i β_i(t) H_i)` for commuting time-dependent terms.
pub fn oracle_evolution(h: &TensorFactorHamiltonian, t: f64, time_dep: bool) -> Result<CMatrix> {
    if time_dep {
        let betas = h.integrated_coefficients(t)?;
        if let Some((i, j, norm)) = check_pairwise_commuting(h, COMMUTATION_TOL).witness {
            return Err(Error::NotCommuting { i, j, norm });
        }
        expm_hermitian(&h.assemble_weighted(&betas), 1.0)
    } else {
        expm_hermitian(&h.assemble_weighted(&vec![1.0; h.k]), t)
    }
}

/// Operator-norm distance between the result block and the oracle, stored
/// as the result's measured error. Global phases are not quotiented.
pub fn compare(result: &mut PipelineResult, oracle: &CMatrix) -> Result<f64> {
    let block = &result.evolution_block;
    if block.rows() != oracle.rows() || block.cols() != oracle.cols() {
        return Err(Error::DimensionMismatch(format!(
            "block is {}x{}, oracle is {}x{}",
            block.rows(),
            block.cols(),
            oracle.rows(),
            oracle.cols()
        )));
    }
    let err = op_norm(&(block - oracle));
    result.measured_err = Some(err);
    Ok(err)
}

/// Least-squares line `y ≈ intercept + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Largest `|y − ŷ| / |y|`.
    pub max_rel_residual: f64,
}

/// Least-squares fit of `y` against several features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    pub r2: f64,
}

/// Solves `min ‖X c − y‖₂` for rows of features.
pub fn fit_linear_model(rows: &[Vec<f64>], y: &[f64]) -> Result<LinearFit> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if n != y.len() || n < p || p == 0 || rows.iter().any(|r| r.len() != p) {
        return Err(Error::DimensionMismatch(format!("{n} rows of {p} features for {} observations", y.len())));
    }
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let yv = DVector::from_column_slice(y);
    let coeffs = x
        .clone()
        .svd(true, true)
        .solve(&yv, 1e-12)
        .map_err(|e| Error::InvalidConfig(format!("least squares failed: {e}")))?;
    let fitted = &x * &coeffs;
    let mean = yv.mean();
    let ss_tot: f64 = yv.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = yv.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LinearFit { coefficients: coeffs.iter().copied().collect(), r2 })
}

fn fit_line(x: &[f64], y: &[f64]) -> Result<Fit> {
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![1.0, v]).collect();
    let lf = fit_linear_model(&rows, y)?;
    let (intercept, slope) = (lf.coefficients[0], lf.coefficients[1]);
    let max_rel_residual = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| ((yi - intercept - slope * xi) / yi.abs().max(f64::MIN_POSITIVE)).abs())
        .fold(0.0, f64::max);
    Ok(Fit { slope, intercept, r2: lf.r2, max_rel_residual })
}

/// Law expected of a swept counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpectedLaw {
    /// `y ∝ x^exponent`, accepted when the log-log slope is within `tolerance`.
    Power { exponent: f64, tolerance: f64 },
    /// `y ≈ a + b x` with `b > 0`, accepted when every relative residual is below the bound.
    Affine { max_rel_residual: f64 },
    /// `y ≈ a + b ln(1/x)` with `b > 0`, accepted when `R²` reaches the bound.
    LogAffine { min_r2: f64 },
    /// Log-log slope within `[lo, hi]`.
    SlopeRange { lo: f64, hi: f64 },
    /// No value exceeds its predecessor.
    NonIncreasing,
}

impl fmt::Display for ExpectedLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpectedLaw::Power { exponent, tolerance } => write!(f, "x^{exponent}±{tolerance}"),
            ExpectedLaw::Affine { max_rel_residual } => write!(f, "a+b*x(rel<={max_rel_residual})"),
            ExpectedLaw::LogAffine { min_r2 } => write!(f, "a+b*ln(1/x)(r2>={min_r2})"),
            ExpectedLaw::SlopeRange { lo, hi } => write!(f, "x^[{lo};{hi}]"),
            ExpectedLaw::NonIncreasing => f.write_str("non-increasing"),
        }
    }
}

impl ExpectedLaw {
    /// Fits `measured` against `values` and returns the fit and the verdict.
    pub fn assess(&self, values: &[f64], measured: &[f64]) -> Result<(Fit, bool)> {
        let logs = |v: &[f64]| v.iter().map(|x| x.ln()).collect::<Vec<_>>();
        match *self {
            ExpectedLaw::Power { exponent, tolerance } => {
                let fit = fit_line(&logs(values), &logs(measured))?;
                Ok((fit, (fit.slope - exponent).abs() <= tolerance))
            }
            ExpectedLaw::SlopeRange { lo, hi } => {
                let fit = fit_line(&logs(values), &logs(measured))?;
                Ok((fit, fit.slope >= lo && fit.slope <= hi))
            }
            ExpectedLaw::Affine { max_rel_residual } => {
                let fit = fit_line(values, measured)?;
                Ok((fit, fit.slope > 0.0 && fit.max_rel_residual <= max_rel_residual))
            }
            ExpectedLaw::LogAffine { min_r2 } => {
                let inv: Vec<f64> = values.iter().map(|x| (1.0 / x).ln()).collect();
                let fit = fit_line(&inv, measured)?;
                Ok((fit, fit.slope > 0.0 && fit.r2 >= min_r2))
            }
            ExpectedLaw::NonIncreasing => {
                let fit = fit_line(values, measured)?;
                Ok((fit, measured.windows(2).all(|w| w[1] <= w[0] + 1e-12)))
            }
        }
    }
}

/// Swept parameter of a scaling study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    K,
    D,
    R,
    T,
    Delta,
    Samples,
    Sparsity,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K => "K",
            SweepParam::D => "d",
            SweepParam::R => "R",
            SweepParam::T => "t",
            SweepParam::Delta => "delta",
            SweepParam::Samples => "samples",
            SweepParam::Sparsity => "sparsity",
        }
    }
}

/// Result of one sweep with its fitted law.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub counter: String,
    pub measured: Vec<f64>,
    pub expected_law: ExpectedLaw,
    pub fit: Fit,
    pub verdict: bool,
}

impl ScalingReport {
    pub fn new(
        param: SweepParam,
        values: Vec<f64>,
        counter: impl Into<String>,
        measured: Vec<f64>,
        law: ExpectedLaw,
    ) -> Result<Self> {
        let (fit, verdict) = law.assess(&values, &measured)?;
        Ok(ScalingReport { param, values, counter: counter.into(), measured, expected_law: law, fit, verdict })
    }

    /// Rows `param,value,counter,measured,expected_law,fit`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,value,counter,measured,expected_law,fit\n");
        let fit = format!(
            "slope={:.6};intercept={:.6};r2={:.6};verdict={}",
            self.fit.slope,
            self.fit.intercept,
            self.fit.r2,
            if self.verdict { "pass" } else { "fail" }
        );
        for (v, m) in self.values.iter().zip(&self.measured) {
            let _ = writeln!(out, "{},{v},{},{m},{},{fit}", self.param.name(), self.counter, self.expected_law);
        }
        out
    }
}

/// Runs the ledger backend at every value in parallel and fits `metric`.
pub fn scaling_sweep_with<G, F>(
    generator: G,
    param: SweepParam,
    values: &[f64],
    metric_name: &str,
    metric: F,
    law: ExpectedLaw,
) -> Result<ScalingReport>
where
    G: Fn(f64) -> Result<(TensorFactorHamiltonian, PipelineConfig)> + Sync,
    F: Fn(&LedgerEstimate) -> f64 + Sync,
{
    let measured = values
        .par_iter()
        .map(|&v| {
            let (h, cfg) = generator(v)?;
            Ok(metric(&estimate_resources(&h, &cfg)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    ScalingReport::new(param, values.to_vec(), metric_name, measured, law)
}

/// Sweeps one ledger counter.
pub fn scaling_sweep<G>(
    generator: G,
    param: SweepParam,
    values: &[f64],
    counter: Counter,
    law: ExpectedLaw,
) -> Result<ScalingReport>
where
    G: Fn(f64) -> Result<(TensorFactorHamiltonian, PipelineConfig)> + Sync,
{
    scaling_sweep_with(generator, param, values, counter.name(), |e| e.ledger.get(counter) as f64, law)
}

/// Mean Monte-Carlo error of one term over `seeds` seeds at each sample count.
pub fn monte_carlo_sweep(term: &TensorTerm, slots: &[usize], samples: &[usize], seeds: u64) -> Result<ScalingReport> {
    let measured = samples
        .par_iter()
        .map(|&n| {
            let errs = (0..seeds).map(|seed| monte_carlo_error(term, slots, n, seed)).collect::<Result<Vec<_>>>()?;
            Ok(errs.iter().sum::<f64>() / seeds as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let values = samples.iter().map(|&n| n as f64).collect();
    ScalingReport::new(
        SweepParam::Samples,
        values,
        "mc_error",
        measured,
        ExpectedLaw::SlopeRange { lo: -0.6, hi: -0.4 },
    )
}

/// Largest ensemble trace distance over every eigenvector of every factor.
pub fn truncation_sweep(h: &TensorFactorHamiltonian, sparsities: &[usize], groups: usize) -> Result<ScalingReport> {
    let measured = sparsities
        .par_iter()
        .map(|&s| {
            let mut worst: f64 = 0.0;
            for term in &h.terms {
                for spec in &term.spectral {
                    for k in spec.nonzero() {
                        let e = randomized_truncate_with_groups(&spec.eigenvector(k), s, groups)?;
                        worst = worst.max(e.measured_trace_dist);
                    }
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    let values = sparsities.iter().map(|&s| s as f64).collect();
    ScalingReport::new(SweepParam::Sparsity, values, "truncation_delta", measured, ExpectedLaw::NonIncreasing)
}

/// Jacobi-Anger degree at one `(t, δ)` point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeSample {
    pub t: f64,
    pub delta: f64,
    pub degree: usize,
}

/// Fits the Jacobi-Anger degree as `a + b t + c ln(1/δ)`.
pub fn degree_law(times: &[f64], deltas: &[f64]) -> Result<(LinearFit, Vec<DegreeSample>)> {
    let grid: Vec<(f64, f64)> = times.iter().flat_map(|&t| deltas.iter().map(move |&d| (t, d))).collect();
    let samples = grid
        .par_iter()
        .map(|&(t, delta)| Ok(DegreeSample { t, delta, degree: jacobi_anger(t, delta)?.degree }))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| vec![1.0, s.t, (1.0 / s.delta).ln()]).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.degree as f64).collect();
    Ok((fit_linear_model(&rows, &y)?, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{parse_hamiltonian, TimeCoefficient};
    use crate::linalg::{kron, CMatrix, C64};
    use crate::pipelines::{run_approach1, Approach};

    const TFIM3: &str = "\
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

    /// `Σ_k (−iHt)^k / k!` with enough terms for `‖Ht‖ < 1`.
    fn taylor_exp(h: &CMatrix, t: f64) -> CMatrix {
        let n = h.rows();
        let step = h.scale(C64::new(0.0, -t));
        let mut term = CMatrix::identity(n);
        let mut sum = CMatrix::identity(n);
        for k in 1..40 {
            term = (&term * &step).scale_real(1.0 / k as f64);
            sum = &sum + &term;
        }
        sum
    }

    #[test]
    fn oracle_at_zero_time_is_identity() {
        let h = parse_hamiltonian(TFIM3).unwrap();
        let u = oracle_evolution(&h, 0.0, false).unwrap();
        assert!((&u - &CMatrix::identity(8)).max_abs() < 1e-14);
    }

    #[test]
    fn oracle_single_pauli_rotation() {
        let h = TensorFactorHamiltonian::new(vec![vec![z().scale_real(0.5)]], None).unwrap();
        let u = oracle_evolution(&h, 0.8, false).unwrap();
        let expected = CMatrix::diagonal(&[C64::from_polar(1.0, -0.4), C64::from_polar(1.0, 0.4)]);
        assert!((&u - &expected).max_abs() < 1e-14);
    }

    #[test]
    fn oracle_matches_taylor_series() {
        let h = parse_hamiltonian(TFIM3).unwrap();
        let dense = h.assemble_weighted(&[1.0; 5]);
        let u = oracle_evolution(&h, 1.0, false).unwrap();
        assert!((&u - &taylor_exp(&dense, 1.0)).max_abs() < 1e-10);
    }

    #[test]
    fn time_dependent_oracle_uses_integrated_weights() {
        let h = TensorFactorHamiltonian::new(vec![vec![z().scale_real(0.5), z()]], None)
            .unwrap()
            .with_coefficients(vec![TimeCoefficient::cosine(1.0, 1.0, 0.0)])
            .unwrap();
        let u = oracle_evolution(&h, std::f64::consts::FRAC_PI_2, true).unwrap();
        let zz = kron(&z(), &z()).scale_real(0.5);
        assert!((&u - &taylor_exp(&zz, 1.0)).max_abs() < 1e-10);
    }

    #[test]
    fn compare_identical_and_phase_shifted() {
        let h = parse_hamiltonian(TFIM3).unwrap();
        let mut res = run_approach1(&h, &PipelineConfig::new(Approach::A1, 1.0, 1e-6)).unwrap();
        let block = res.evolution_block.clone();
        assert_eq!(compare(&mut res, &block).unwrap(), 0.0);
        let phi = 0.3;
        let shifted = block.scale(C64::from_polar(1.0, phi));
        let d = compare(&mut res, &shifted).unwrap();
        assert!((d - (C64::new(1.0, 0.0) - C64::from_polar(1.0, phi)).norm()).abs() < 1e-5);
        let oracle = oracle_evolution(&h, 1.0, false).unwrap();
        assert!(compare(&mut res, &oracle).unwrap() <= 1e-5);
        assert!(matches!(compare(&mut res, &CMatrix::identity(4)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn line_fits_recover_exact_laws() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        let (fit, ok) = ExpectedLaw::Power { exponent: 2.0, tolerance: 0.01 }.assess(&x, &y).unwrap();
        assert!(ok && (fit.slope - 2.0).abs() < 1e-10 && (fit.r2 - 1.0).abs() < 1e-12);
        let y: Vec<f64> = x.iter().map(|v| 5.0 + 2.0 * v).collect();
        assert!(ExpectedLaw::Affine { max_rel_residual: 1e-9 }.assess(&x, &y).unwrap().1);
        let lf = fit_linear_model(
            &[vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0], vec![1.0, 2.0, 3.0], vec![1.0, 5.0, 1.0]],
            &[3.0, 3.0, 11.0, 13.0],
        )
        .unwrap();
        for (c, e) in lf.coefficients.iter().zip([1.0, 2.0, 2.0]) {
            assert!((c - e).abs() < 1e-10);
        }
    }

    #[test]
    fn t_sweep_is_affine() {
        let h = parse_hamiltonian(TFIM3).unwrap();
        let gen = |t: f64| Ok((h.clone(), PipelineConfig::new(Approach::A1, t, 1e-6)));
        let rep = scaling_sweep(
            gen,
            SweepParam::T,
            &[1.0, 2.0, 4.0, 8.0],
            Counter::PolyDegree,
            ExpectedLaw::Affine { max_rel_residual: 0.2 },
        )
        .unwrap();
        assert!(rep.verdict, "{rep:?}");
        let csv = rep.to_csv();
        assert!(csv.starts_with("param,value,counter,measured,expected_law,fit\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn delta_sweep_is_log_affine() {
        let h = parse_hamiltonian(TFIM3).unwrap();
        let gen = |d: f64| Ok((h.clone(), PipelineConfig::new(Approach::A1, 1.0, d)));
        let rep = scaling_sweep(
            gen,
            SweepParam::Delta,
            &[1e-2, 1e-4, 1e-8],
            Counter::PolyDegree,
            ExpectedLaw::LogAffine { min_r2: 0.9 },
        )
        .unwrap();
        assert!(rep.verdict, "{rep:?}");
    }

    #[test]
    fn truncation_sweep_is_non_increasing() {
        let mut r = crate::linalg::testing::rng(9);
        let a = crate::linalg::testing::random_hermitian(&mut r, 8);
        let a = a.scale_real(0.5 / op_norm(&a));
        let h = TensorFactorHamiltonian::new(vec![vec![a]], None).unwrap();
        let rep = truncation_sweep(&h, &[1, 2, 4, 8], 8).unwrap();
        assert!(rep.verdict);
        assert_eq!(*rep.measured.last().unwrap(), 0.0);
    }
}
