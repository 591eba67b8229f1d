//! `ncl`: batch runs, sweeps and plot-ready exports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ncl::designer::{
    coherence_levels, evaluate_amplitude, initial_phase, optimize_amplitude, profile_for_target, sweep_amplitude,
    Objective,
};
use ncl::elimination::{reduced_generator, second_order_generator, verify_against};
use ncl::evolution::{evolve_matrix, EvolutionSettings};
use ncl::fock::{coherent_density_matrix, default_cutoff, CoherentAmplitude, LossProfile, TargetState};
use ncl::io::{self, Provenance};
use ncl::stationary::stationary_matrix;
use ncl::validation::{run_selected, CRITERIA};
use ncl::C;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_SELFTEST: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "ncl", version, about = "Nonlinear coherent loss: simulation, stationary states and profile design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the master equation from a coherent state.
    Simulate(SimulateArgs),
    /// Stationary state reached from a coherent state.
    Stationary(StationaryArgs),
    /// Emit the canonical loss profile for a target.
    Design(DesignArgs),
    /// Find the coherent amplitude that maximizes a figure of merit.
    Optimize(OptimizeArgs),
    /// Stationary figures of merit over a grid of amplitudes.
    Sweep(SweepArgs),
    /// Compare a two-mode model with its reduced single-mode equation.
    VerifyElimination(EliminationArgs),
    /// Run the acceptance checks.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
struct Source {
    /// Loss profile JSON file.
    #[arg(long, conflicts_with = "target", required_unless_present = "target")]
    profile: Option<PathBuf>,
    /// Inline target: `fock:N`, `pair:N,M[,PHASE]` or `comb:N,N0`.
    #[arg(long)]
    target: Option<String>,
}

#[derive(Args, Debug)]
struct Initial {
    /// Modulus of the coherent amplitude.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Phase of the coherent amplitude; defaults to the phase matching the target.
    #[arg(long)]
    phase: Option<f64>,
    /// Fock cutoff; defaults to |α|² + 10|α| + 20 plus the target's reach.
    #[arg(long)]
    n_max: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    initial: Initial,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// End time.
    #[arg(long = "t")]
    t_end: f64,
    /// Evenly spaced snapshots recorded in the trajectory.
    #[arg(long, default_value_t = 10)]
    snapshots: usize,
    /// Final density matrix CSV (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Full trajectory CSV `t,n,m,re,im`.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Diagnostics CSV `t,trace_error,min_xi,herm_error`.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StationaryArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    initial: Initial,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DesignArgs {
    /// Inline target: `fock:N`, `pair:N,M[,PHASE]` or `comb:N,N0`.
    #[arg(long)]
    target: String,
    /// Last tabulated level.
    #[arg(long, default_value_t = 40)]
    n_max: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ObjectiveArg {
    Coherence,
    Fidelity,
    Purity,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = 0.1)]
    r_min: f64,
    #[arg(long, default_value_t = 4.0)]
    r_max: f64,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Coherence)]
    objective: ObjectiveArg,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    target: String,
    /// `START:STOP:STEP`, both ends inclusive.
    #[arg(long)]
    alpha_grid: String,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GeneratorArg {
    /// Jumps `F_{0,n}` at rate `n!/((n+1)γ)`.
    Literal,
    /// Jumps `F_{n,0}` at rate `(n−1)!/γ`.
    SecondOrder,
}

#[derive(Args, Debug)]
struct EliminationArgs {
    /// Expansion JSON file.
    #[arg(long)]
    expansion: PathBuf,
    /// Coherent amplitude of the kept mode (real).
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long = "t")]
    t_end: f64,
    #[arg(long, default_value_t = 60)]
    snapshots: usize,
    #[arg(long, value_enum, default_value_t = GeneratorArg::Literal)]
    generator: GeneratorArg,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Comma-separated criterion numbers; all when omitted.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Core(ncl::Error),
    Selftest(usize),
}

impl From<ncl::Error> for Failure {
    fn from(e: ncl::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(ncl::Error::Io(e))
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn config<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Config(msg.into()))
}

fn parse_target(spec: &str) -> Outcome<TargetState<f64>> {
    let (kind, rest) = spec.split_once(':').ok_or_else(|| Failure::Config(format!("target `{spec}` needs the form kind:args")))?;
    let nums: Vec<&str> = rest.split(',').map(str::trim).collect();
    let int = |s: &str| s.parse::<usize>().map_err(|_| Failure::Config(format!("`{s}` in target `{spec}` is not a level")));
    let target = match (kind, nums.as_slice()) {
        ("fock", [n]) => TargetState::Fock { n: int(n)? },
        ("pair", [n, m]) => TargetState::Pair { n: int(n)?, m: int(m)?, phase: 0.0 },
        ("pair", [n, m, p]) => {
            let phase = p.parse().map_err(|_| Failure::Config(format!("`{p}` in target `{spec}` is not a phase")))?;
            TargetState::Pair { n: int(n)?, m: int(m)?, phase }
        }
        ("comb", [n, n0]) => TargetState::Comb { spacing: int(n)?, offset: int(n0)?, reference: C::new(1.0, 0.0) },
        _ => return config(format!("unrecognized target `{spec}`; use fock:N, pair:N,M[,PHASE] or comb:N,N0")),
    };
    target.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(target)
}

fn parse_grid(spec: &str) -> Outcome<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Failure::Config(format!("grid `{spec}` must be START:STOP:STEP")))?;
    let [start, stop, step] = parts[..] else {
        return config(format!("grid `{spec}` must be START:STOP:STEP"));
    };
    if !(step > 0.0) || stop < start || start < 0.0 {
        return config(format!("grid `{spec}` needs 0 <= START <= STOP and STEP > 0"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

/// Canonical configuration text: the parsed command plus the contents of
/// every input file.
fn config_text(cli: &Cli, inputs: &[&Path]) -> Outcome<String> {
    let mut text = format!("{:?}", cli.command);
    for path in inputs {
        text.push('\n');
        text.push_str(&std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?);
    }
    Ok(text)
}

fn sink(path: Option<&Path>) -> Outcome<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Config(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn read_profile(path: &Path) -> Outcome<LossProfile<f64>> {
    let file = File::open(path).map_err(|e| Failure::Config(format!("cannot open {}: {e}", path.display())))?;
    io::read_profile(file).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

struct Setup {
    profile: LossProfile<f64>,
    target: Option<TargetState<f64>>,
    rho0: ncl::DensityMatrix<f64>,
}

fn setup(source: &Source, initial: &Initial) -> Outcome<Setup> {
    if !(initial.alpha >= 0.0 && initial.alpha.is_finite()) {
        return config(format!("--alpha must be finite and non-negative, got {}", initial.alpha));
    }
    let target = source.target.as_deref().map(parse_target).transpose()?;
    let reach = target.as_ref().map_or(0, |t| t.reach());
    let n_max = initial.n_max.unwrap_or_else(|| default_cutoff(initial.alpha, reach));
    if n_max < reach {
        return config(format!("--n-max {n_max} is below the level {reach} the target needs"));
    }
    let profile = match (&source.profile, &target) {
        (Some(path), _) => read_profile(path)?,
        (None, Some(t)) => profile_for_target(t, n_max).map_err(|e| Failure::Config(e.to_string()))?,
        (None, None) => return config("give --profile or --target"),
    };
    let phase = initial.phase.unwrap_or_else(|| target.as_ref().map_or(0.0, initial_phase));
    let prep = coherent_density_matrix(CoherentAmplitude::polar(initial.alpha, phase), n_max);
    if prep.truncated {
        eprintln!("warning: cutoff n_max = {n_max} drops {:.2e} of the coherent state", prep.tail);
    }
    Ok(Setup { profile, target, rho0: prep.rho })
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Outcome<()> {
    let inputs: Vec<&Path> = args.source.profile.iter().map(PathBuf::as_path).collect();
    let prov = Provenance::new(&config_text(cli, &inputs)?);
    let s = setup(&args.source, &args.initial)?;
    let settings = EvolutionSettings::new(args.gamma, args.t_end).with_uniform_snapshots(args.snapshots.max(1));
    settings.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let traj = evolve_matrix(&s.profile, &s.rho0, &settings)?;
    if let Some(path) = &args.trajectory {
        io::write_matrix_trajectory_csv(sink(Some(path))?, &traj, Some(&prov))?;
    }
    if let Some(path) = &args.diagnostics {
        io::write_diagnostics_csv(sink(Some(path))?, &traj, Some(&prov))?;
    }
    let last = traj.states.last().expect("trajectory has a final state");
    io::write_density_csv(sink(args.output.as_deref())?, last, Some(&prov.with_note("t", args.t_end.to_string())))?;
    Ok(())
}

fn stationary(cli: &Cli, args: &StationaryArgs) -> Outcome<()> {
    let inputs: Vec<&Path> = args.source.profile.iter().map(PathBuf::as_path).collect();
    let mut prov = Provenance::new(&config_text(cli, &inputs)?);
    let s = setup(&args.source, &args.initial)?;
    let report = stationary_matrix(&s.profile, &s.rho0)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(t) = &s.target {
        let (p, q) = coherence_levels(t);
        if q <= report.rho.n_max() {
            prov = prov.with_note("target_coherence", format!("{p},{q}"));
        }
    }
    let mut out = sink(args.output.as_deref())?;
    match args.format {
        Format::Json => io::write_stationary_report(&mut out, &report, Some(&prov))?,
        Format::Csv => io::write_density_csv(&mut out, &report.rho, Some(&prov))?,
    }
    out.flush()?;
    Ok(())
}

fn design(cli: &Cli, args: &DesignArgs) -> Outcome<()> {
    let target = parse_target(&args.target)?;
    let profile = profile_for_target(&target, args.n_max).map_err(|e| Failure::Config(e.to_string()))?;
    let conditions = match target {
        TargetState::Fock { n } => format!("f({n}) = 0"),
        TargetState::Pair { n, m, .. } => format!("F zero exactly at 0, {n}, {m}; F(k) = F(k + {}) for k = {n}..{}", m - n, m - 1),
        TargetState::Comb { spacing, offset, .. } => format!("F zero at 0 and n = {offset} mod {spacing}, periodic tail"),
    };
    let prov = Provenance::new(&config_text(cli, &[])?)
        .with_note("target", args.target.clone())
        .with_note("conditions", conditions)
        .with_note("off_zero_value", "F = 1 away from the required zeros (any positive value gives the same stationary state)");
    let mut out = sink(args.output.as_deref())?;
    io::write_profile(&mut out, &profile, Some(&prov))?;
    out.flush()?;
    Ok(())
}

fn optimize(cli: &Cli, args: &OptimizeArgs) -> Outcome<()> {
    let target = parse_target(&args.target)?;
    let objective = match args.objective {
        ObjectiveArg::Coherence => Objective::Coherence,
        ObjectiveArg::Fidelity => Objective::Fidelity,
        ObjectiveArg::Purity => Objective::Purity,
    };
    if !(args.r_min >= 0.0 && args.r_min < args.r_max) {
        return config(format!("need 0 <= --r-min < --r-max, got {} and {}", args.r_min, args.r_max));
    }
    let result = optimize_amplitude(&target, (args.r_min, args.r_max), objective)?;
    for w in &result.meta.warnings {
        eprintln!("warning: {w}");
    }
    let best = evaluate_amplitude(&target, result.r_opt)?;
    let prov = Provenance::new(&config_text(cli, &[])?);
    let doc = json!({
        "target": args.target,
        "objective": objective,
        "r_opt": result.r_opt,
        "value": result.objective,
        "coherence": best.coherence,
        "fidelity": best.fidelity,
        "purity": best.purity,
        "meta": result.meta,
        "trace": result.trace,
        "provenance": prov,
    });
    let mut out = sink(args.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &doc).map_err(ncl::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn sweep(cli: &Cli, args: &SweepArgs) -> Outcome<()> {
    let target = parse_target(&args.target)?;
    let grid = parse_grid(&args.alpha_grid)?;
    let rows = sweep_amplitude(&target, &grid)?;
    let prov = Provenance::new(&config_text(cli, &[])?).with_note("target", args.target.clone());
    io::write_sweep_csv(sink(args.output.as_deref())?, &rows, Some(&prov))?;
    Ok(())
}

fn verify_elimination(cli: &Cli, args: &EliminationArgs) -> Outcome<()> {
    let file = File::open(&args.expansion)
        .map_err(|e| Failure::Config(format!("cannot open {}: {e}", args.expansion.display())))?;
    let expansion = io::read_expansion::<f64>(file).map_err(|e| Failure::Config(format!("{}: {e}", args.expansion.display())))?;
    let prov = Provenance::new(&config_text(cli, &[args.expansion.as_path()])?);
    let reduced = match args.generator {
        GeneratorArg::Literal => reduced_generator(&expansion)?,
        GeneratorArg::SecondOrder => second_order_generator(&expansion)?,
    };
    let rho0 = coherent_density_matrix(CoherentAmplitude::real(args.alpha), expansion.kept_dim - 1).rho;
    let settings = EvolutionSettings::new(expansion.gamma, args.t_end)
        .with_uniform_snapshots(args.snapshots.max(1))
        .with_tolerances(1e-9, 1e-12);
    settings.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let report = verify_against(&expansion, &reduced, &rho0, &settings)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("max trace distance {:.6e}", report.max_trace_distance);
    let mut out = sink(args.output.as_deref())?;
    match args.format {
        Format::Csv => io::write_reduction_csv(&mut out, &report, Some(&prov))?,
        Format::Json => {
            let mut doc = serde_json::to_value(&report).map_err(ncl::Error::from)?;
            doc["provenance"] = serde_json::to_value(&prov).map_err(ncl::Error::from)?;
            serde_json::to_writer_pretty(&mut out, &doc).map_err(ncl::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn selftest(args: &SelftestArgs) -> Outcome<()> {
    let ids: Vec<u8> = if args.only.is_empty() { CRITERIA.collect() } else { args.only.clone() };
    if let Some(bad) = ids.iter().find(|id| !CRITERIA.contains(id)) {
        return config(format!("no criterion {bad}; choose from 1 to 12"));
    }
    let outcomes = run_selected(&ids);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        return Err(Failure::Selftest(failed));
    }
    Ok(())
}

fn init_threads() -> Outcome<()> {
    let Ok(value) = std::env::var("NCL_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("NCL_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("cannot size the worker pool: {e}")))
}

fn run(cli: &Cli) -> Outcome<()> {
    init_threads()?;
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Stationary(a) => stationary(cli, a),
        Command::Design(a) => design(cli, a),
        Command::Optimize(a) => optimize(cli, a),
        Command::Sweep(a) => sweep(cli, a),
        Command::VerifyElimination(a) => verify_elimination(cli, a),
        Command::Selftest(a) => selftest(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        // a closed downstream pipe (e.g. `| head`) is not an error
        Err(Failure::Core(ncl::Error::Io(e))) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG })
        }
        Err(Failure::Selftest(n)) => {
            eprintln!("{n} acceptance criteria failed");
            ExitCode::from(EXIT_SELFTEST)
        }
    }
}
