//! `hamsim`: runs simulation pipelines on HAMSPEC files and writes CSV reports.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hamsim_core::hamiltonian::{parse_complex, parse_hamiltonian, TensorFactorHamiltonian};
use hamsim_core::linalg::CVector;
use hamsim_core::pipelines::{run_pipeline, Approach, PipelineConfig};
use hamsim_core::resources::Counter;
use hamsim_core::truncation::{
    check_amplitude_bound, ensemble_prepare, randomized_truncate_with_groups, DEFAULT_TAIL_GROUPS,
};
use hamsim_core::verify::{
    compare, monte_carlo_sweep, oracle_evolution, scaling_sweep, truncation_sweep, ExpectedLaw, ScalingReport,
    SweepParam,
};

const DEFAULT_SAMPLES: usize = 4096;
/// Seeds averaged per point of a samples sweep.
const SWEEP_SEEDS: u64 = 20;

#[derive(Parser)]
#[command(name = "hamsim", version, about = "Block-encoding Hamiltonian simulation emulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one pipeline and write report.csv and summary.txt.
    Simulate(SimulateArgs),
    /// Sweep one parameter in ledger mode and fit the expected law.
    Sweep(SweepArgs),
    /// Truncate a state vector to a sparse ensemble.
    Truncate(TruncateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ApproachArg {
    A1,
    A2,
    A3,
    Td,
}

impl From<ApproachArg> for Approach {
    fn from(a: ApproachArg) -> Approach {
        match a {
            ApproachArg::A1 => Approach::A1,
            ApproachArg::A2 => Approach::A2,
            ApproachArg::A3 => Approach::A3,
            ApproachArg::Td => Approach::TimeDependent,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    T,
    Delta,
    #[value(name = "K")]
    K,
    Samples,
    Sparsity,
}

#[derive(Args)]
struct RunArgs {
    /// HAMSPEC input file.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "a1")]
    approach: ApproachArg,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    /// Monte-Carlo sample count for a2.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Truncation sparsity for a3.
    #[arg(long)]
    sparsity: Option<usize>,
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long)]
    no_simplify: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> PipelineConfig {
        let approach = Approach::from(self.approach);
        let mut cfg = PipelineConfig::new(approach, self.t, self.delta).with_simplification(!self.no_simplify);
        if approach == Approach::A2 || self.samples.is_some() {
            cfg = cfg.with_samples(self.samples.unwrap_or(DEFAULT_SAMPLES), self.seed);
        }
        if let Some(s) = self.sparsity {
            cfg = cfg.with_truncation(s);
        }
        cfg.tail_groups = self.groups;
        cfg
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Compare against the dense matrix exponential.
    #[arg(long, value_enum, default_value = "on")]
    oracle: Toggle,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(value_enum)]
    param: SweepKind,
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated sweep values; defaults depend on the parameter.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
}

#[derive(Args)]
struct TruncateArgs {
    /// File of whitespace-separated complex amplitudes.
    input: PathBuf,
    #[arg(long)]
    sparsity: usize,
    #[arg(long, default_value_t = DEFAULT_TAIL_GROUPS)]
    groups: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{}: {source} (stage: {stage})", source.kind())]
    Core { stage: &'static str, source: hamsim_core::Error },
    #[error("Io: {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("VerdictFailed: {0}")]
    Verdict(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core { source, .. } if source.is_validation() => 2,
            CliError::Core { .. } => 3,
            CliError::Io { .. } => 2,
            CliError::Verdict(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn at<T>(stage: &'static str, r: hamsim_core::Result<T>) -> CliResult<T> {
    r.map_err(|source| CliError::Core { stage, source })
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn write(dir: &Path, name: &str, body: &str) -> CliResult<PathBuf> {
    let io = |source| CliError::Io { path: dir.to_owned(), source };
    fs::create_dir_all(dir).map_err(io)?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path)
}

fn load(path: &Path) -> CliResult<TensorFactorHamiltonian> {
    at("parse", parse_hamiltonian(&read(path)?))
}

fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let h = load(&args.run.input)?;
    let cfg = args.run.config();
    let mut result = at("pipeline", run_pipeline(&h, &cfg))?;
    if args.oracle == Toggle::On {
        let oracle = at("oracle", oracle_evolution(&h, cfg.t, cfg.approach == Approach::TimeDependent))?;
        at("compare", compare(&mut result, &oracle))?;
    }
    let header = report::comment_line(args.run.seed);
    let csv = write(&args.run.out, "report.csv", &format!("{header}{}", report::simulate_csv(&h, &cfg, &result)))?;
    let summary = report::simulate_summary(&h, &cfg, &result);
    write(&args.run.out, "summary.txt", &format!("{header}{summary}"))?;
    print!("{summary}");
    println!("wrote {}", csv.display());
    Ok(())
}

fn sweep(args: &SweepArgs) -> CliResult<()> {
    let h = load(&args.run.input)?;
    let base = args.run.config();
    let with = |f: &dyn Fn(&mut PipelineConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    let report: ScalingReport = match args.param {
        SweepKind::T => {
            let values = args.values.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0, 16.0]);
            let gen = |t: f64| Ok((h.clone(), with(&|c| c.t = t)));
            at(
                "sweep",
                scaling_sweep(
                    gen,
                    SweepParam::T,
                    &values,
                    Counter::PolyDegree,
                    ExpectedLaw::Affine { max_rel_residual: 0.2 },
                ),
            )?
        }
        SweepKind::Delta => {
            let values = args.values.clone().unwrap_or_else(|| vec![1e-2, 1e-4, 1e-6, 1e-8, 1e-10]);
            let gen = |d: f64| Ok((h.clone(), with(&|c| c.delta = d)));
            at(
                "sweep",
                scaling_sweep(
                    gen,
                    SweepParam::Delta,
                    &values,
                    Counter::PolyDegree,
                    ExpectedLaw::LogAffine { min_r2: 0.95 },
                ),
            )?
        }
        SweepKind::K => {
            let values = args.values.clone().unwrap_or_else(|| [1, 2, 4, 8].map(|r| (r * h.k) as f64).to_vec());
            let gen = |k: f64| Ok((h.cycled(k as usize)?, base.clone()));
            at(
                "sweep",
                scaling_sweep(
                    gen,
                    SweepParam::K,
                    &values,
                    Counter::PrepUnitaryQueries,
                    ExpectedLaw::Power { exponent: 2.0, tolerance: 0.5 },
                ),
            )?
        }
        SweepKind::Samples => {
            let values = args.values.clone().unwrap_or_else(|| (6..=12).map(|e| f64::from(1u32 << e)).collect());
            let samples: Vec<usize> = values.iter().map(|&n| n as usize).collect();
            let (idx, term) =
                h.terms.iter().enumerate().find(|(_, t)| !t.nontrivial_set.is_empty()).ok_or_else(|| {
                    CliError::Core {
                        stage: "sweep",
                        source: hamsim_core::Error::InvalidConfig("every term is the identity".into()),
                    }
                })?;
            let slots = term.nontrivial_set.clone();
            println!("sampling term {idx} on slots {slots:?}");
            at("sweep", monte_carlo_sweep(term, &slots, &samples, SWEEP_SEEDS))?
        }
        SweepKind::Sparsity => {
            let values = args.values.clone().unwrap_or_else(|| (1..=h.d).map(|s| s as f64).collect());
            let sparsities: Vec<usize> = values.iter().map(|&s| s as usize).collect();
            let groups = args.run.groups.unwrap_or(DEFAULT_TAIL_GROUPS);
            at("sweep", truncation_sweep(&h, &sparsities, groups))?
        }
    };
    let name = format!("sweep_{}.csv", report.param.name());
    let path = write(&args.run.out, &name, &format!("{}{}", report::comment_line(args.run.seed), report.to_csv()))?;
    println!(
        "{} vs {}: slope={:.4} intercept={:.4} r2={:.4} law={} verdict={}",
        report.counter,
        report.param.name(),
        report.fit.slope,
        report.fit.intercept,
        report.fit.r2,
        report.expected_law,
        if report.verdict { "pass" } else { "fail" }
    );
    println!("wrote {}", path.display());
    if report.verdict {
        Ok(())
    } else {
        Err(CliError::Verdict(format!("{} does not follow {}", report.counter, report.expected_law)))
    }
}

fn parse_vector(text: &str) -> CliResult<CVector> {
    let mut amps = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        for token in content.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()) {
            let z = parse_complex(token).map_err(|msg| CliError::Core {
                stage: "parse",
                source: hamsim_core::Error::Parse { line: n + 1, msg },
            })?;
            amps.push(z);
        }
    }
    Ok(CVector(amps))
}

fn truncate(args: &TruncateArgs) -> CliResult<()> {
    let v = parse_vector(&read(&args.input)?)?;
    let ensemble = at("truncate", randomized_truncate_with_groups(&v, args.sparsity, args.groups))?;
    let check = check_amplitude_bound(&v, &ensemble);
    let prep = at("prepare", ensemble_prepare(&ensemble))?;
    let header = report::comment_line(0);
    let path = write(&args.out, "ensemble.csv", &format!("{header}{}", report::ensemble_csv(&ensemble)))?;
    let summary = report::truncate_summary(&ensemble, &check, &prep);
    write(&args.out, "truncate.txt", &format!("{header}{summary}"))?;
    print!("{summary}");
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Truncate(a) => truncate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
