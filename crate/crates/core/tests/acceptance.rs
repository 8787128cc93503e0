//! Acceptance suite: one PASS/FAIL line per criterion.

use std::time::Instant;

use hamsim_core::block_encoding::{be_amplify, be_lcu, be_product, be_rescale, be_tensor, dilate, BlockEncoding};
use hamsim_core::hamiltonian::{parse_hamiltonian, TensorFactorHamiltonian, TimeCoefficient};
use hamsim_core::linalg::{kron, op_norm, CMatrix, CVector, C64};
use hamsim_core::pipelines::{
    estimate_resources, run_approach1, run_approach3, run_time_dependent, Approach, PipelineConfig,
};
use hamsim_core::resources::Counter;
use hamsim_core::truncation::{check_amplitude_bound, ensemble_prepare, randomized_truncate, EnsemblePreparation};
use hamsim_core::verify::{
    compare, degree_law, monte_carlo_sweep, oracle_evolution, scaling_sweep, ExpectedLaw, SweepParam,
};
use hamsim_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TFIM3: &str = include_str!("../../../docs/tfim3.ham");

type Outcome = Result<String, String>;

fn z() -> CMatrix {
    CMatrix::real_diagonal(&[1.0, -1.0])
}

fn x() -> CMatrix {
    CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

fn id(n: usize) -> CMatrix {
    CMatrix::identity(n)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, norm: f64) -> CMatrix {
    let a = random_matrix(rng, n);
    let p = &a * &a.adjoint();
    p.scale_real(norm / op_norm(&p))
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector((0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()).normalized()
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn core<T>(r: hamsim_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| format!("{}: {e}", e.kind()))
}

fn approach1_end_to_end() -> Outcome {
    let start = Instant::now();
    let h = core(parse_hamiltonian(TFIM3))?;
    let mut res = core(run_approach1(&h, &PipelineConfig::new(Approach::A1, 1.0, 1e-6)))?;
    let oracle = core(oracle_evolution(&h, 1.0, false))?;
    let err = core(compare(&mut res, &oracle))?;
    let secs = start.elapsed().as_secs_f64();
    check(err <= 1e-5 && secs < 10.0, format!("measured_err={err:.3e} (<= 1e-5), runtime={secs:.2}s (< 10s)"))
}

fn simplification_equivalence() -> Outcome {
    let h = core(parse_hamiltonian(TFIM3))?;
    let cfg = PipelineConfig::new(Approach::A1, 1.0, 1e-6);
    let on = core(run_approach1(&h, &cfg))?;
    let off = core(run_approach1(&h, &cfg.clone().with_simplification(false)))?;
    let dist = op_norm(&(&on.evolution_block - &off.evolution_block));
    let swaps_ok = on.term_reports.iter().all(|t| t.swaps as usize <= h.terms[t.term].nontrivial_set.len());
    let (q_on, q_off) = (on.ledger.get(Counter::PrepUnitaryQueries), off.ledger.get(Counter::PrepUnitaryQueries));
    check(
        dist <= 1e-9 && swaps_ok && q_on < q_off,
        format!("distance={dist:.3e} (<= 1e-9), swaps<=|R_i|: {swaps_ok}, prep queries {q_on} < {q_off}"),
    )
}

fn monte_carlo_convergence() -> Outcome {
    let h = core(TensorFactorHamiltonian::new(vec![vec![x().scale_real(0.5), x()]], None))?;
    let term = &h.terms[0];
    let samples: Vec<usize> = (6..=12).map(|e| 1usize << e).collect();
    let rep = core(monte_carlo_sweep(term, &term.nontrivial_set, &samples, 20))?;
    check(rep.verdict, format!("log-log slope={:.4} (in [-0.6, -0.4])", rep.fit.slope))
}

fn purification_and_truncation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let a = random_psd(&mut rng, 4, 0.4);
    let b = random_psd(&mut rng, 4, 0.4);
    let h = core(TensorFactorHamiltonian::new(vec![vec![a, id(4)], vec![id(4), b]], None))?;
    let cfg = PipelineConfig::new(Approach::A3, 1.0, 1e-8);
    let exact = core(run_approach3(&h, &cfg))?;
    let a1 = core(run_approach1(&h, &cfg))?;
    let dist = op_norm(&(&exact.evolution_block - &a1.evolution_block));

    let truncated = core(run_approach3(&h, &cfg.clone().with_truncation(2)))?;
    let delta = truncated.truncation_delta.ok_or("no truncation delta recorded")?;
    let per_factor =
        truncated.term_reports.iter().flat_map(|r| r.factor_trace_dists.iter().copied()).fold(0.0, f64::max);
    let worst_defect = truncated.term_reports.iter().filter_map(|r| r.trace_defect).fold(0.0, f64::max);
    check(
        dist <= 1e-9 && worst_defect <= delta && (delta - per_factor).abs() <= 1e-10,
        format!(
            "exact vs a1={dist:.3e} (<= 1e-9), max defect={worst_defect:.4e} <= delta={delta:.4e}, |delta - max factor dist|={:.1e}",
            (delta - per_factor).abs()
        ),
    )
}

/// Random ensembles shared by the amplitude and preparation criteria.
fn random_ensembles() -> Result<Vec<(CVector, hamsim_core::truncation::SparseEnsemble)>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut out = Vec::new();
    for _ in 0..100 {
        let d = rng.random_range(2..=32);
        let v = random_unit(&mut rng, d);
        for s in 1..=d {
            let e = core(randomized_truncate(&v, s))?;
            out.push((v.clone(), e));
        }
    }
    Ok(out)
}

fn amplitude_bound(ensembles: &[(CVector, hamsim_core::truncation::SparseEnsemble)]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for (v, e) in ensembles {
        let c = check_amplitude_bound(v, e);
        worst = worst.max(c.lhs - (e.measured_trace_dist.sqrt() + 1e-9));
    }
    check(worst <= 0.0, format!("{} cases, max(lhs - sqrt(eps) - 1e-9)={worst:.3e}", ensembles.len()))
}

fn preparation_probability(ensembles: &[(CVector, hamsim_core::truncation::SparseEnsemble)]) -> Outcome {
    let mut worst: f64 = 0.0;
    for (_, e) in ensembles {
        let prep = core(ensemble_prepare(e))?;
        worst = worst.max((prep.success_prob - EnsemblePreparation::formula_success_prob(e)).abs());
    }
    check(worst <= 1e-10, format!("{} ensembles, max deviation={worst:.3e} (<= 1e-10)", ensembles.len()))
}

fn degree_fit() -> Outcome {
    let start = Instant::now();
    let times: Vec<f64> = (1..=16).map(f64::from).collect();
    let deltas: Vec<f64> = (2..=10).map(|k| 10f64.powi(-k)).collect();
    let (fit, _) = core(degree_law(&times, &deltas))?;
    let secs = start.elapsed().as_secs_f64();
    let c = &fit.coefficients;
    check(
        fit.r2 >= 0.95 && secs < 30.0,
        format!(
            "p = {:.2} + {:.3} t + {:.3} ln(1/delta), R^2={:.4} (>= 0.95), runtime={secs:.2}s",
            c[0], c[1], c[2], fit.r2
        ),
    )
}

/// `K` terms `Z/2 ⊗ Z` on neighbouring slots of an eight-slot chain.
fn zz_chain(k: usize) -> hamsim_core::Result<TensorFactorHamiltonian> {
    const M: usize = 8;
    let terms = (0..k)
        .map(|i| {
            let slot = i % (M - 1);
            (0..M)
                .map(|j| match j {
                    _ if j == slot => z().scale_real(0.5),
                    _ if j == slot + 1 => z(),
                    _ => id(2),
                })
                .collect()
        })
        .collect();
    TensorFactorHamiltonian::new(terms, None)
}

fn resource_sweeps() -> Outcome {
    let cfg = PipelineConfig::new(Approach::A1, 1.0, 1e-6);
    let k_rep = core(scaling_sweep(
        |k| Ok((zz_chain(k as usize)?, cfg.clone())),
        SweepParam::K,
        &[4.0, 8.0, 16.0, 32.0, 64.0],
        Counter::PrepUnitaryQueries,
        ExpectedLaw::Power { exponent: 2.0, tolerance: 0.5 },
    ))?;
    let h = core(zz_chain(8))?;
    let t_rep = core(scaling_sweep(
        |t| {
            let mut c = cfg.clone();
            c.t = t;
            Ok((h.clone(), c))
        },
        SweepParam::T,
        &[1.0, 2.0, 4.0, 8.0, 16.0],
        Counter::PrepUnitaryQueries,
        ExpectedLaw::Affine { max_rel_residual: 0.2 },
    ))?;
    let dense_free = core(estimate_resources(&core(zz_chain(64))?, &cfg)).is_ok();
    check(
        k_rep.verdict && t_rep.verdict && dense_free,
        format!(
            "K exponent={:.3} (2 +/- 0.5), t affine max rel residual={:.3} (<= 0.2)",
            k_rep.fit.slope, t_rep.fit.max_rel_residual
        ),
    )
}

fn time_dependent_commuting() -> Outcome {
    let half_z = z().scale_real(0.5);
    let h = core(TensorFactorHamiltonian::new(vec![vec![half_z.clone(), id(2)], vec![id(2), half_z.clone()]], None))?;
    let h = core(h.with_coefficients(vec![TimeCoefficient::cosine(1.0, 1.0, 0.0), TimeCoefficient::constant(1.0)]))?;
    let t = std::f64::consts::FRAC_PI_2;
    let mut res = core(run_time_dependent(&h, &PipelineConfig::new(Approach::TimeDependent, t, 1e-6)))?;
    let err = core(compare(&mut res, &core(oracle_evolution(&h, t, true))?))?;

    let nc = core(TensorFactorHamiltonian::new(vec![vec![half_z, id(2)], vec![x().scale_real(0.5), id(2)]], None))?;
    let nc = core(nc.with_coefficients(vec![TimeCoefficient::constant(1.0), TimeCoefficient::constant(1.0)]))?;
    let rejected = matches!(
        run_time_dependent(&nc, &PipelineConfig::new(Approach::TimeDependent, t, 1e-6)),
        Err(Error::NotCommuting { i: 0, j: 1, norm }) if norm > 0.0
    );
    check(
        err <= 1e-5 && rejected,
        format!("measured_err={err:.3e} (<= 1e-5), noncommuting rejected with witness: {rejected}"),
    )
}

/// Random operator with norm `norm`.
fn random_op(rng: &mut ChaCha8Rng, n: usize, norm: f64) -> CMatrix {
    let a = random_matrix(rng, n);
    a.scale_real(norm / op_norm(&a))
}

fn encoding_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_defect: f64 = 0.0;
    let enc = |a: &CMatrix, s: f64| dilate(a, s);
    for i in 0..200 {
        let n = [1, 2, 4][rng.random_range(0..3)];
        let scale = rng.random_range(1.0..3.0);
        let (na, nb) = (rng.random_range(0.1..0.9) * scale, rng.random_range(0.1..0.9) * scale);
        let a = random_op(&mut rng, n, na);
        let b = random_op(&mut rng, n, nb);
        let (out, target): (BlockEncoding, CMatrix) = match i % 5 {
            0 => (core(be_product(&core(enc(&a, scale))?, &core(enc(&b, scale))?))?, &a * &b),
            1 => (core(be_tensor(&[core(enc(&a, scale))?, core(enc(&b, 1.0 + scale))?]))?, kron(&a, &b)),
            2 => {
                let w = rng.random_range(0.05..0.95);
                let u = core(be_lcu(&[core(enc(&a, scale))?, core(enc(&b, scale))?], &[w, 1.0 - w]))?;
                (u, &a.scale_real(w) + &b.scale_real(1.0 - w))
            }
            3 => {
                let p = rng.random_range(1.1..4.0);
                (core(be_rescale(&core(enc(&a, scale))?, p))?, a.scale_real(1.0 / p))
            }
            _ => {
                // Rescale then amplify back by the same factor.
                let p = rng.random_range(1.1..4.0);
                let down = core(be_rescale(&core(enc(&a, scale))?, p))?;
                (core(be_amplify(&down, p, 0.05, 1e-6))?, a.clone())
            }
        };
        worst_excess = worst_excess.max(out.discrepancy(&target) - out.err - 1e-9);
        worst_defect = worst_defect.max(out.unitarity_defect());
    }
    check(
        worst_excess <= 0.0 && worst_defect <= 1e-10,
        format!("200 instances, max(dist - err - 1e-9)={worst_excess:.3e}, max unitarity defect={worst_defect:.3e}"),
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {n:>2}. {name}: {detail}");
    };
    report(1, "approach 1 end-to-end", approach1_end_to_end());
    report(2, "simplification equivalence", simplification_equivalence());
    report(3, "Monte-Carlo convergence law", monte_carlo_convergence());
    report(4, "purification and truncation", purification_and_truncation());
    match random_ensembles() {
        Ok(ens) => {
            report(5, "sparse amplitude bound", amplitude_bound(&ens));
            report(6, "ensemble preparation probability", preparation_probability(&ens));
        }
        Err(e) => {
            report(5, "sparse amplitude bound", Err(e.clone()));
            report(6, "ensemble preparation probability", Err(e));
        }
    }
    report(7, "Jacobi-Anger degree law", degree_fit());
    report(8, "resource scaling sweeps", resource_sweeps());
    report(9, "time-dependent commuting case", time_dependent_commuting());
    report(10, "block-encoding algebra", encoding_algebra());
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
