//! Command-line front end: solve a scenario, cross-check the solvers,
//! run timing sweeps, and generate seeded scenario files.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use exactmdp::{
    bench, exact, value_iteration, GenSpec, OutputFormat, Scenario, SolveError, SplitMix64,
    SweepSpec, ViConfig, ViError,
};

/// Failure buckets, one per scripting exit code: 1 input, 2 solver,
/// 3 verification.
enum CliError {
    Input(String),
    Solver(String),
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Solver(m) | CliError::Verification(m) => {
                f.write_str(m)
            }
        }
    }
}

#[derive(Parser)]
#[command(
    name = "exactmdp",
    version,
    about = "Exact and iterative solvers for deterministic continuing MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario file and print values, a policy, or a summary.
    Solve(SolveArgs),
    /// Cross-check the exact solver against value iteration on seeded scenarios.
    Verify(VerifyArgs),
    /// Time both solvers across a swept variable and write the records.
    Bench(BenchArgs),
    /// Generate a random scenario file from a seed.
    Gen(GenArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverChoice {
    Exact,
    Vi,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputKind {
    /// JSON object with one value per state.
    ValuesJson,
    /// JSON object with one greedy action id per state.
    PolicyJson,
    /// Human-readable solve statistics.
    Summary,
}

#[derive(Args)]
struct SolveArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Solver to run.
    #[arg(long, value_enum, default_value_t = SolverChoice::Exact)]
    solver: SolverChoice,
    /// Residual threshold for value iteration.
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
    /// What to emit.
    #[arg(long, value_enum, default_value_t = OutputKind::Summary)]
    output: OutputKind,
    /// Include the exact solver's audit trail (selected peaks in order).
    #[arg(long)]
    audit: bool,
    /// Write the output here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["scenario", "grid"])))]
struct VerifyArgs {
    /// Verify one existing scenario file instead of generating cases.
    #[arg(long, conflicts_with_all = ["count", "rewards", "gamma", "values", "seed"])]
    scenario: Option<PathBuf>,
    /// Grid dimensions WxH for generated cases.
    #[arg(long, value_parser = parse_dims)]
    grid: Option<(usize, usize)>,
    /// Reward count per case: a number or an inclusive range LO..HI.
    #[arg(long, default_value = "5", value_parser = parse_usize_range)]
    rewards: (usize, usize),
    /// Number of seeded cases to run.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    /// Discount factor for generated cases.
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Reward values: a number or an inclusive range LO..HI.
    #[arg(long, default_value = "1..10", value_parser = parse_f64_range)]
    values: (f64, f64),
    /// Base seed; case i runs with seed base+i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum allowed sup-norm deviation. Default: epsilon*gamma/(1-gamma).
    #[arg(long)]
    tolerance: Option<f64>,
    /// Residual threshold for the value-iteration oracle.
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariableChoice {
    Rewards,
    States,
    Discount,
}

impl VariableChoice {
    fn name(self) -> &'static str {
        match self {
            VariableChoice::Rewards => "rewards",
            VariableChoice::States => "states",
            VariableChoice::Discount => "discount",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatChoice {
    Csv,
    Json,
}

#[derive(Args)]
#[command(group(ArgGroup::new("sweep_source").required(true).args(["sweep", "variable"])))]
struct BenchArgs {
    /// Sweep specification JSON file.
    #[arg(long, conflicts_with_all = ["variable", "points"])]
    sweep: Option<PathBuf>,
    /// Swept variable for an inline specification.
    #[arg(long, value_enum, requires = "points")]
    variable: Option<VariableChoice>,
    /// Comma-separated sweep points, e.g. 1,10,50.
    #[arg(long, value_delimiter = ',')]
    points: Option<Vec<f64>>,
    /// Scenarios per sweep point.
    #[arg(long)]
    trials: Option<usize>,
    /// Timed repetitions per solve; the minimum is recorded.
    #[arg(long)]
    repetitions: Option<usize>,
    /// Base seed for scenario generation.
    #[arg(long)]
    seed: Option<u64>,
    /// Grid width where the sweep does not fix it.
    #[arg(long)]
    width: Option<usize>,
    /// Grid height where the sweep does not fix it.
    #[arg(long)]
    height: Option<usize>,
    /// Reward count where the sweep does not fix it.
    #[arg(long)]
    rewards: Option<usize>,
    /// Discount factor where the sweep does not fix it.
    #[arg(long)]
    gamma: Option<f64>,
    /// Record format.
    #[arg(long, value_enum, default_value_t = FormatChoice::Csv)]
    format: FormatChoice,
    /// Write the records here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Grid dimensions WxH.
    #[arg(long, value_parser = parse_dims)]
    grid: (usize, usize),
    /// Number of rewards to place.
    #[arg(long)]
    rewards: usize,
    /// Discount factor.
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Placement and value seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reward values: a number or an inclusive range LO..HI.
    #[arg(long, default_value = "1..10", value_parser = parse_f64_range)]
    values: (f64, f64),
    /// Output file; stdout if omitted.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH (e.g. 10x10), got '{s}'"))?;
    let w = w.trim().parse().map_err(|e| format!("bad width '{w}': {e}"))?;
    let h = h.trim().parse().map_err(|e| format!("bad height '{h}': {e}"))?;
    Ok((w, h))
}

fn parse_usize_range(s: &str) -> Result<(usize, usize), String> {
    match s.split_once("..") {
        Some((lo, hi)) => {
            let lo = lo.trim().parse().map_err(|e| format!("bad range start '{lo}': {e}"))?;
            let hi = hi.trim().parse().map_err(|e| format!("bad range end '{hi}': {e}"))?;
            if lo > hi {
                return Err(format!("empty range {lo}..{hi}"));
            }
            Ok((lo, hi))
        }
        None => {
            let n = s.trim().parse().map_err(|e| format!("bad count '{s}': {e}"))?;
            Ok((n, n))
        }
    }
}

fn parse_f64_range(s: &str) -> Result<(f64, f64), String> {
    match s.split_once("..") {
        Some((lo, hi)) => {
            let lo: f64 = lo.trim().parse().map_err(|e| format!("bad range start '{lo}': {e}"))?;
            let hi: f64 = hi.trim().parse().map_err(|e| format!("bad range end '{hi}': {e}"))?;
            if lo > hi {
                return Err(format!("empty range {lo}..{hi}"));
            }
            Ok((lo, hi))
        }
        None => {
            let v: f64 = s.trim().parse().map_err(|e| format!("bad value '{s}': {e}"))?;
            Ok((v, v))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is an
            // input error under the exit-code contract.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gen(args) => cmd_gen(args),
    }
}

/// Residual cap generous enough for any valid discount at the default
/// thresholds.
const VI_MAX_ITERATIONS: usize = 5_000_000;

fn load_scenario(path: &PathBuf) -> Result<Scenario, CliError> {
    Scenario::load(path)
        .map_err(|e| CliError::Input(format!("cannot load scenario {}: {e}", path.display())))
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn audit_json(solution: &exact::ExactSolution) -> serde_json::Value {
    serde_json::Value::Array(
        solution
            .processed
            .iter()
            .map(|p| {
                serde_json::json!({
                    "kind": p.peak.kind.name(),
                    "anchor": p.peak.anchor,
                    "value": p.peak.value,
                    "iteration": p.iteration,
                })
            })
            .collect(),
    )
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    if args.audit && args.solver != SolverChoice::Exact {
        return Err(CliError::Input(
            "the audit trail exists only for --solver exact".into(),
        ));
    }
    let scenario = load_scenario(&args.scenario)?;
    let (values, solver_name, stats, audit) = match args.solver {
        SolverChoice::Exact => {
            let solution = exact::solve(&scenario).map_err(|e| match e {
                SolveError::Invalid(_) => CliError::Input(format!("invalid scenario: {e}")),
                other => CliError::Solver(format!("exact solver failed: {other}")),
            })?;
            let stats = format!(
                "iterations: {}\ncandidate evaluations: {}\n",
                solution.iterations, solution.candidate_evaluations
            );
            let audit = args.audit.then(|| audit_json(&solution));
            (solution.values, "exact", stats, audit)
        }
        SolverChoice::Vi => {
            let cfg = ViConfig { epsilon: args.epsilon, max_iterations: VI_MAX_ITERATIONS };
            let solution = value_iteration::solve(&scenario, &cfg).map_err(|e| match e {
                ViError::Invalid(_) => CliError::Input(format!("invalid scenario: {e}")),
                other => CliError::Solver(format!("value iteration failed: {other}")),
            })?;
            let stats = format!(
                "iterations: {}\nfinal residual: {:e}\n",
                solution.iterations,
                solution.final_residual()
            );
            (solution.values, "value_iteration", stats, None)
        }
    };
    let text = match args.output {
        OutputKind::ValuesJson => {
            let mut doc = serde_json::json!({
                "solver": solver_name,
                "values": values.as_slice(),
            });
            if let Some(audit) = audit {
                doc["audit"] = audit;
            }
            pretty(&doc)
        }
        OutputKind::PolicyJson => {
            let policy = value_iteration::extract_policy(&values, &scenario);
            let mut doc = serde_json::json!({
                "solver": solver_name,
                "policy": policy.actions,
            });
            if let Some(audit) = audit {
                doc["audit"] = audit;
            }
            pretty(&doc)
        }
        OutputKind::Summary => {
            let mut text = format!(
                "solver: {solver_name}\nstates: {}\nmax value: {:.12}\nvalue checksum: {:.12}\n{stats}",
                values.len(),
                values.max_value(),
                values.sum(),
            );
            if let Some(serde_json::Value::Array(entries)) = audit {
                text.push_str("audit trail:\n");
                for e in entries {
                    text.push_str(&format!(
                        "  {} {} @ state {} value {:.12}\n",
                        e["iteration"], e["kind"].as_str().unwrap_or("?"), e["anchor"], e["value"]
                    ));
                }
            }
            text
        }
    };
    write_output(&args.out, &text)
}

fn pretty(doc: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("json serialization");
    s.push('\n');
    s
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    if let Some(path) = &args.scenario {
        let scenario = load_scenario(path)?;
        let tolerance = args
            .tolerance
            .unwrap_or(args.epsilon * scenario.gamma / (1.0 - scenario.gamma));
        let deviation = check_one(&scenario, args.epsilon, &format!("{}", path.display()))?;
        println!("[verify] scenario {}: max deviation {deviation:.3e} (tolerance {tolerance:.3e})", path.display());
        if deviation > tolerance {
            return Err(CliError::Verification(format!(
                "scenario {} deviates by {deviation:.3e} > {tolerance:.3e}; replay with: solve --scenario {}",
                path.display(),
                path.display()
            )));
        }
        return Ok(());
    }

    let (width, height) = args.grid.expect("clap guarantees a case source");
    let tolerance = args
        .tolerance
        .unwrap_or(args.epsilon * args.gamma / (1.0 - args.gamma));
    let (reward_lo, reward_hi) = args.rewards;
    let mut worst: Option<(f64, u64, usize)> = None;
    let mut failures = 0usize;
    for i in 0..args.count {
        let seed = args.seed + i;
        let mut rng = SplitMix64::new(seed);
        let reward_count = reward_lo + rng.next_below((reward_hi - reward_lo + 1) as u64) as usize;
        let spec = GenSpec {
            width,
            height,
            reward_count,
            value_range: args.values,
            gamma: args.gamma,
            seed,
        };
        let scenario = exactmdp::random_scenario(&spec)
            .map_err(|e| CliError::Input(format!("seed {seed}: cannot generate case: {e}")))?;
        let label = format!(
            "seed {seed} (grid {width}x{height}, {reward_count} rewards, gamma {})",
            args.gamma
        );
        let deviation = check_one(&scenario, args.epsilon, &label)?;
        if worst.map_or(true, |(w, _, _)| deviation > w) {
            worst = Some((deviation, seed, reward_count));
        }
        if deviation > tolerance {
            failures += 1;
            println!("[verify] FAILED {label}: deviation {deviation:.3e} > {tolerance:.3e}");
        }
    }
    let (max_dev, max_seed, max_rewards) = worst.expect("count is at least one");
    println!(
        "[verify] {}/{} cases within tolerance {tolerance:.3e}; max deviation {max_dev:.3e} (seed {max_seed})",
        args.count as usize - failures,
        args.count
    );
    if failures > 0 {
        return Err(CliError::Verification(format!(
            "{failures} case(s) deviate beyond {tolerance:.3e}; worst seed {max_seed}; replay with: gen --grid {width}x{height} --rewards {max_rewards} --gamma {} --seed {max_seed}",
            args.gamma
        )));
    }
    Ok(())
}

/// Solves `scenario` both ways and returns the sup-norm deviation.
fn check_one(scenario: &Scenario, epsilon: f64, label: &str) -> Result<f64, CliError> {
    let exact_solution = exact::solve(scenario).map_err(|e| match e {
        SolveError::Invalid(_) => CliError::Input(format!("{label}: invalid scenario: {e}")),
        other => CliError::Solver(format!("{label}: exact solver failed: {other}")),
    })?;
    let cfg = ViConfig { epsilon, max_iterations: VI_MAX_ITERATIONS };
    let vi_solution = value_iteration::solve(scenario, &cfg).map_err(|e| match e {
        ViError::Invalid(_) => CliError::Input(format!("{label}: invalid scenario: {e}")),
        other => CliError::Solver(format!("{label}: value iteration failed: {other}")),
    })?;
    exact_solution
        .values
        .linf_diff(&vi_solution.values)
        .map_err(|e| CliError::Solver(format!("{label}: {e}")))
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let mut spec: SweepSpec = match &args.sweep {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Input(format!("cannot read sweep spec {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::Input(format!(
                    "sweep spec parse error at line {}, column {}: {e}",
                    e.line(),
                    e.column()
                ))
            })?
        }
        None => {
            let variable = args.variable.expect("clap guarantees a sweep source");
            let points = args.points.clone().unwrap_or_default();
            serde_json::from_value(serde_json::json!({
                "variable": variable.name(),
                "points": points,
            }))
            .map_err(|e| CliError::Input(format!("cannot build sweep spec: {e}")))?
        }
    };
    if let Some(trials) = args.trials {
        spec.trials = trials;
    }
    if let Some(repetitions) = args.repetitions {
        spec.repetitions = repetitions;
    }
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
    }
    if let Some(width) = args.width {
        spec.width = width;
    }
    if let Some(height) = args.height {
        spec.height = height;
    }
    if let Some(rewards) = args.rewards {
        spec.reward_count = rewards;
    }
    if let Some(gamma) = args.gamma {
        spec.gamma = gamma;
    }

    let outcome = bench::run_sweep(&spec).map_err(|e| match e {
        bench::BenchError::InvalidSweep(_) | bench::BenchError::ZeroRepetitions => {
            CliError::Input(format!("invalid sweep: {e}"))
        }
        other => CliError::Solver(format!("sweep failed: {other}")),
    })?;

    let format = match args.format {
        FormatChoice::Csv => OutputFormat::Csv,
        FormatChoice::Json => OutputFormat::Json,
    };
    let mut bytes = Vec::new();
    bench::emit_results(&outcome.records, format, &mut bytes)
        .map_err(|e| CliError::Solver(format!("cannot emit records: {e}")))?;
    let text = String::from_utf8(bytes).expect("records are utf-8");
    write_output(&args.out, &text)?;

    // The summary goes to stderr so that stdout stays machine-readable.
    eprintln!(
        "{:<16} {:>10} {:>8} {:>12} {:>12} {:>12}",
        "solver", "point", "samples", "mean_s", "std_s", "min_s"
    );
    for row in bench::summarize(&outcome.records, spec.variable) {
        eprintln!(
            "{:<16} {:>10} {:>8} {:>12.6} {:>12.6} {:>12.6}",
            row.solver.name(),
            row.point,
            row.samples,
            row.mean_s,
            row.std_s,
            row.min_s
        );
    }

    if !outcome.failures.is_empty() {
        for f in &outcome.failures {
            let solver = f.solver.map_or("generation", |s| s.name());
            eprintln!(
                "[bench] FAILED point {} seed {} ({solver}): {}",
                f.point, f.seed, f.message
            );
        }
        return Err(CliError::Solver(format!(
            "{} trial(s) failed; records for the remaining trials were written",
            outcome.failures.len()
        )));
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let (width, height) = args.grid;
    let spec = GenSpec {
        width,
        height,
        reward_count: args.rewards,
        value_range: args.values,
        gamma: args.gamma,
        seed: args.seed,
    };
    let scenario = exactmdp::random_scenario(&spec)
        .map_err(|e| CliError::Input(format!("seed {}: cannot generate scenario: {e}", args.seed)))?;
    write_output(&args.out, &scenario.to_json_string())
}
