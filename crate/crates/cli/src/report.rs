//! CSV and text report formatting.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use hamsim_core::hamiltonian::TensorFactorHamiltonian;
use hamsim_core::pipelines::{PipelineConfig, PipelineResult};
use hamsim_core::resources::Counter;
use hamsim_core::truncation::{AmplitudeBoundCheck, EnsemblePreparation, SparseEnsemble};

/// Leading comment carrying everything that varies between identical runs.
pub fn comment_line(seed: u64) -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    format!("# generated_unix={secs} seed={seed}\n")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn simulate_csv(h: &TensorFactorHamiltonian, cfg: &PipelineConfig, r: &PipelineResult) -> String {
    let mut out = String::from("approach,K,M,d,|R|,t,delta,declared_err,measured_err,wall_ms");
    for c in Counter::ALL {
        let _ = write!(out, ",{c}");
    }
    let _ = write!(
        out,
        "\n{},{},{},{},{},{},{},{},{},{:.3}",
        r.approach,
        h.k,
        h.m,
        h.d,
        h.max_nontrivial(),
        cfg.t,
        cfg.delta,
        r.declared_err,
        opt(r.measured_err),
        r.wall_ms()
    );
    for c in Counter::ALL {
        let _ = write!(out, ",{}", r.ledger.get(c));
    }
    out.push('\n');
    out
}

pub fn simulate_summary(h: &TensorFactorHamiltonian, cfg: &PipelineConfig, r: &PipelineResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "approach {}  K={} M={} d={} |R|={}", r.approach, h.k, h.m, h.d, h.max_nontrivial());
    let _ = writeln!(s, "t={} delta={} simplification={}", cfg.t, cfg.delta, cfg.use_simplification);
    let _ = writeln!(
        s,
        "poly degree {}  effective time {:.6}  block factor {:.6}",
        r.poly_degree, r.effective_time, r.block_factor
    );
    let _ = writeln!(s, "declared error  {:.6e}", r.declared_err);
    match r.measured_err {
        Some(m) => {
            let _ =
                writeln!(s, "measured error  {m:.6e}{}", if m <= r.declared_err { "" } else { "  (exceeds declared)" });
        }
        None => s.push_str("measured error  (oracle off)\n"),
    }
    let _ = writeln!(s, "unitarity defect {:.3e}", r.unitarity_defect);
    if let Some(delta) = r.truncation_delta {
        let _ = writeln!(s, "truncation delta {delta:.6e}");
    }
    s.push_str("terms:\n");
    for t in &r.term_reports {
        let _ = write!(
            s,
            "  {}: slots {:?} gamma {:.6} tuples {} swaps {} declared {:.3e}",
            t.term, t.slots, t.gamma, t.tuples, t.swaps, t.declared_err
        );
        if let Some(e) = t.mc_error {
            let _ = write!(s, " mc_error {e:.3e}");
        }
        if let Some(e) = t.trace_defect {
            let _ = write!(s, " trace_defect {e:.3e}");
        }
        s.push('\n');
    }
    s.push_str("ledger:\n");
    for stage in r.ledger.stages() {
        let _ = write!(s, "  {}:", stage.stage);
        for c in Counter::ALL {
            let _ = write!(s, " {c}={}", stage.cost.get(c));
        }
        s.push('\n');
    }
    for timing in &r.timings {
        let _ = writeln!(s, "  time {} {:.3} ms", timing.stage, timing.wall_ms);
    }
    s
}

/// One row per stored amplitude: `member,probability,index,re,im`.
pub fn ensemble_csv(e: &SparseEnsemble) -> String {
    let mut out = String::from("member,probability,index,re,im\n");
    for (j, m) in e.members.iter().enumerate() {
        for &i in &m.support {
            let z = m.vector.0[i];
            let _ = writeln!(out, "{j},{},{i},{},{}", m.probability, z.re, z.im);
        }
    }
    out
}

pub fn truncate_summary(e: &SparseEnsemble, check: &AmplitudeBoundCheck, prep: &EnsemblePreparation) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "members {}  sparsity {}  dim {}", e.len(), e.sparsity, e.source_dim);
    let _ = writeln!(s, "epsilon {:.12e}", e.measured_trace_dist);
    let _ = writeln!(s, "amplitude bound lhs {:.12e} rhs {:.12e} holds {}", check.lhs, check.rhs, check.holds);
    let _ = writeln!(
        s,
        "success_prob {:.12e} formula {:.12e}",
        prep.success_prob,
        EnsemblePreparation::formula_success_prob(e)
    );
    for (j, m) in e.members.iter().enumerate() {
        let _ = writeln!(s, "  member {j}: p={:.12e} support {:?}", m.probability, m.support);
    }
    s
}
