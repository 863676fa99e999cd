use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use majorana_jm::archive::{load_ensemble, load_hamiltonian, load_state, save_ensemble};
use majorana_jm::baselines::{comparison_rows, write_comparison_csv};
use majorana_jm::gaussian::orthogonality_residual;
use majorana_jm::matching::{degree2_ensemble, degree2k_ensemble, MeasurementEnsemble};
use majorana_jm::povm::{validate_parent, SharpnessTable, PARENT_MODE_LIMIT};
use majorana_jm::robustness::{robustness_report, DEFAULT_BUDGET};
use majorana_jm::sampler::{
    estimate_expectations, estimate_hamiltonian, exact_expectations, predicted_variance, simulate_shots, substream,
    write_shot_log, EstimationRecord, FermionicState, Hamiltonian, HamiltonianEstimate,
};
use majorana_jm::subsets::{format_subset, parse_subset};
use majorana_jm::Error;
use serde::Serialize;

mod config;

const EXIT_IO: u8 = 2;
const EXIT_COVERAGE: u8 = 3;
const EXIT_INVALID: u8 = 4;
const EXIT_UNCOVERED: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "majorana-jm", version, about = "Joint measurements of Majorana observables")]
#[command(args_override_self = true)]
struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file, or directory for `construct`. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON object of flag values; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a measurement ensemble and write it as an archive directory.
    Construct(ConstructArgs),
    /// Check orthogonality, coverage and parent POVMs of an archive.
    Validate(EnsembleArgs),
    /// Sharpness table of an archive as CSV.
    Sharpness(EnsembleArgs),
    /// Incompatibility robustness of all degree-k observables.
    Robustness(RobustnessArgs),
    /// Sample measurement shots and write the shot log.
    Simulate(SimulateArgs),
    /// Estimate expectations or an energy from simulated shots.
    Estimate(EstimateArgs),
    /// Baseline comparison table as CSV.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct ConstructArgs {
    #[arg(long)]
    n: usize,
    /// Half-degree: observables of degree 2k are covered.
    #[arg(long)]
    k: usize,
    /// Ensemble size; defaults to 4k + 1 for the randomized construction.
    #[arg(long = "count", visible_alias = "N")]
    count: Option<usize>,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    #[arg(long)]
    ensemble: PathBuf,
}

#[derive(Args, Debug)]
struct RobustnessArgs {
    #[arg(long)]
    n: usize,
    /// Degree of the observables.
    #[arg(long)]
    k: usize,
    /// Largest number of sign sections to enumerate.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    ensemble: PathBuf,
    #[arg(long)]
    shots: usize,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    ensemble: PathBuf,
    /// Target support such as `1,2`; repeatable. Defaults to all covered observables.
    #[arg(long = "target", conflicts_with = "hamiltonian")]
    targets: Vec<String>,
    /// Hamiltonian JSON file.
    #[arg(long)]
    hamiltonian: Option<PathBuf>,
    /// Number of shots; 0 reports exact values without sampling.
    #[arg(long)]
    shots: usize,
    /// Where to write the shot log CSV.
    #[arg(long)]
    shot_log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    n_min: usize,
    #[arg(long)]
    n_max: usize,
    /// Half-degree of the observables.
    #[arg(long)]
    k: usize,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => EXIT_IO,
            Error::CoverageFailed { .. } => EXIT_COVERAGE,
            Error::UncoveredTarget(_) => EXIT_UNCOVERED,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

type Outcome = Result<(), Failure>;

fn emit(out: Option<&Path>, bytes: &[u8]) -> Outcome {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| io_failure(path, e)),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure {
                    code: EXIT_IO,
                    message: e.to_string(),
                })
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Outcome {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| invalid(e.to_string()))?;
    text.push('\n');
    emit(out, text.as_bytes())
}

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64, Failure> {
    seed.ok_or_else(|| invalid(format!("{command} needs --seed")))
}

fn open_ensemble(path: &Path) -> Result<MeasurementEnsemble, Failure> {
    load_ensemble(path).map_err(|e| match e {
        Error::Io(io) => io_failure(path, io),
        other => other.into(),
    })
}

fn construct(args: &ConstructArgs, seed: Option<u64>, out: Option<&Path>) -> Outcome {
    let dir = out.ok_or_else(|| invalid("construct needs --out DIR"))?;
    let ensemble = if args.k == 1 && args.count.is_none() {
        degree2_ensemble(args.n)?
    } else {
        degree2k_ensemble(args.n, args.k, args.count, require_seed(seed, "construct")?)?
    };
    save_ensemble(&ensemble, dir)?;
    eprintln!(
        "{} matrices cover {} observables, min sharpness {:.6}",
        ensemble.len(),
        ensemble.coverage.entries.len(),
        ensemble.coverage.min_eta()
    );
    Ok(())
}

#[derive(Serialize)]
struct MatrixCheck {
    r: usize,
    determinant: f64,
    orthogonality_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_eigenvalue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    completeness_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    marginal_residual: Option<f64>,
}

#[derive(Serialize)]
struct ValidationReport {
    n: usize,
    k: usize,
    #[serde(rename = "N")]
    count: usize,
    observables: usize,
    uncovered: Vec<String>,
    min_eta: f64,
    min_eta_effective: f64,
    /// Whether the dense parent checks ran.
    parents_checked: bool,
    matrices: Vec<MatrixCheck>,
}

fn validate(args: &EnsembleArgs, out: Option<&Path>) -> Outcome {
    let ensemble = open_ensemble(&args.ensemble)?;
    let dense = ensemble.n_modes <= PARENT_MODE_LIMIT;
    let mut matrices = Vec::with_capacity(ensemble.len());
    for (r, o) in ensemble.matrices.iter().enumerate() {
        let parent = if dense {
            Some(validate_parent(o, &[ensemble.half_degree])?)
        } else {
            None
        };
        matrices.push(MatrixCheck {
            r: r + 1,
            determinant: o.determinant(),
            orthogonality_residual: orthogonality_residual(o.matrix()),
            min_eigenvalue: parent.as_ref().map(|p| p.povm.min_eigenvalue),
            completeness_residual: parent.as_ref().map(|p| p.povm.completeness_residual),
            marginal_residual: parent.as_ref().map(|p| p.marginal_residual),
        });
    }
    let uncovered: Vec<String> = ensemble.coverage.uncovered().into_iter().map(format_subset).collect();
    let table = SharpnessTable::for_ensemble(&ensemble);
    let report = ValidationReport {
        n: ensemble.n_modes,
        k: ensemble.half_degree,
        count: ensemble.len(),
        observables: ensemble.coverage.entries.len(),
        min_eta: table.min_eta(),
        min_eta_effective: table.min_eta_effective(),
        parents_checked: dense,
        matrices,
        uncovered,
    };
    emit_json(out, &report)?;
    if !report.uncovered.is_empty() {
        return Err(Failure {
            code: EXIT_COVERAGE,
            message: format!("{} observables uncovered", report.uncovered.len()),
        });
    }
    Ok(())
}

fn sharpness(args: &EnsembleArgs, out: Option<&Path>) -> Outcome {
    let ensemble = open_ensemble(&args.ensemble)?;
    let mut buf = Vec::new();
    SharpnessTable::for_ensemble(&ensemble).write_csv(&mut buf)?;
    emit(out, &buf)
}

fn robustness(args: &RobustnessArgs, seed: Option<u64>, out: Option<&Path>) -> Outcome {
    let report = robustness_report(args.n, args.k, args.budget, seed.unwrap_or(0))?;
    emit_json(out, &report)
}

fn check_modes(state: &FermionicState, ensemble: &MeasurementEnsemble) -> Outcome {
    if state.n_modes() != ensemble.n_modes {
        return Err(Error::ModeMismatch {
            expected: ensemble.n_modes,
            got: state.n_modes(),
        }
        .into());
    }
    Ok(())
}

fn simulate(args: &SimulateArgs, seed: Option<u64>, out: Option<&Path>) -> Outcome {
    let seed = require_seed(seed, "simulate")?;
    let state = load_state(&args.state)?;
    let ensemble = open_ensemble(&args.ensemble)?;
    check_modes(&state, &ensemble)?;
    let shots = simulate_shots(&state, &ensemble, args.shots, substream(seed, "shots"))?;
    let mut buf = Vec::new();
    write_shot_log(&shots, &mut buf)?;
    emit(out, &buf)
}

#[derive(Serialize)]
struct EstimateReport {
    n: usize,
    shots: usize,
    seed: Option<u64>,
    mode: &'static str,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    targets: Vec<EstimationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hamiltonian: Option<HamiltonianEstimate>,
}

fn estimate(args: &EstimateArgs, seed: Option<u64>, out: Option<&Path>) -> Outcome {
    let state = load_state(&args.state)?;
    let ensemble = open_ensemble(&args.ensemble)?;
    check_modes(&state, &ensemble)?;
    let universe = 2 * ensemble.n_modes;
    let hamiltonian: Option<Hamiltonian> = args.hamiltonian.as_deref().map(load_hamiltonian).transpose()?;
    if let Some(h) = &hamiltonian {
        if h.n_modes != ensemble.n_modes {
            return Err(Error::ModeMismatch {
                expected: ensemble.n_modes,
                got: h.n_modes,
            }
            .into());
        }
    }
    let supports: Vec<u64> = match &hamiltonian {
        Some(h) => h.supports(),
        None if args.targets.is_empty() => ensemble.coverage.entries.iter().map(|e| e.support).collect(),
        None => args
            .targets
            .iter()
            .map(|t| parse_subset(t, universe))
            .collect::<Result<_, _>>()?,
    };
    let table = SharpnessTable::for_supports(&ensemble, &supports)?;
    let uncovered: Vec<String> = table
        .rows
        .iter()
        .filter(|r| !r.is_covered())
        .map(|r| format_subset(r.support))
        .collect();
    if !uncovered.is_empty() {
        return Err(Failure {
            code: EXIT_UNCOVERED,
            message: format!("uncovered targets: {}", uncovered.join(" ")),
        });
    }

    let mut report = EstimateReport {
        n: ensemble.n_modes,
        shots: args.shots,
        seed,
        mode: if args.shots == 0 { "exact" } else { "sampled" },
        targets: Vec::new(),
        hamiltonian: None,
    };
    if args.shots == 0 {
        match &hamiltonian {
            Some(h) => {
                let exact = h.expectation(&state)?;
                let variance = predicted_variance(h, &ensemble.matrices, &table, &state)?;
                report.hamiltonian = Some(HamiltonianEstimate {
                    estimate: exact,
                    std_error: 0.0,
                    variance,
                    variance_std_error: 0.0,
                    shots: 0,
                    predicted_variance: Some(variance),
                    exact: Some(exact),
                });
            }
            None => report.targets = exact_expectations(&state, &table, &supports)?,
        }
        return emit_json(out, &report);
    }

    let seed = require_seed(seed, "estimate")?;
    let shots = simulate_shots(&state, &ensemble, args.shots, substream(seed, "shots"))?;
    let coin_seed = substream(seed, "coins");
    match &hamiltonian {
        Some(h) => {
            let mut est = estimate_hamiltonian(&shots, &table, h, coin_seed)?;
            est.exact = Some(h.expectation(&state)?);
            est.predicted_variance = Some(predicted_variance(h, &ensemble.matrices, &table, &state)?);
            report.hamiltonian = Some(est);
        }
        None => {
            let mut records = estimate_expectations(&shots, &table, &supports, coin_seed)?;
            for (rec, &s) in records.iter_mut().zip(&supports) {
                rec.exact = Some(state.expectation(s)?);
            }
            report.targets = records;
        }
    }
    let log_path = args
        .shot_log
        .clone()
        .or_else(|| out.map(|p| p.with_extension("shots.csv")));
    if let Some(path) = log_path {
        let mut buf = Vec::new();
        write_shot_log(&shots, &mut buf)?;
        fs::write(&path, buf).map_err(|e| io_failure(&path, e))?;
    }
    emit_json(out, &report)
}

fn compare(args: &CompareArgs, seed: Option<u64>, out: Option<&Path>) -> Outcome {
    if args.n_min == 0 || args.n_min > args.n_max {
        return Err(invalid(format!("empty range {}..={}", args.n_min, args.n_max)));
    }
    let n_values: Vec<usize> = (args.n_min..=args.n_max).collect();
    let rows = comparison_rows(&n_values, args.k, seed.unwrap_or(0))?;
    let mut buf = Vec::new();
    write_comparison_csv(&rows, &mut buf)?;
    emit(out, &buf)
}

fn run(cli: Cli) -> Outcome {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(invalid("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| invalid(e.to_string()))?;
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Construct(a) => construct(a, cli.seed, out),
        Command::Validate(a) => validate(a, out),
        Command::Sharpness(a) => sharpness(a, out),
        Command::Robustness(a) => robustness(a, cli.seed, out),
        Command::Simulate(a) => simulate(a, cli.seed, out),
        Command::Estimate(a) => estimate(a, cli.seed, out),
        Command::Compare(a) => compare(a, cli.seed, out),
    }
}

fn main() -> ExitCode {
    let argv = match config::expand_args(std::env::args_os().collect()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {}", e.message);
            return ExitCode::from(if e.io { EXIT_IO } else { EXIT_INVALID });
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
