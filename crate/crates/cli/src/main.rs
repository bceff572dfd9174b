//! `bilift`: blind identification of ARX models with an input known to lie in
//! a given subspace.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

const CONVENTIONS: &str = "\
Conventions:
  Time is 1-based: the series CSV has columns t,y[,u] with t = 1..N, and
  samples before t = 1 are taken as zero. The lifted equations use
  t = n..N with n = max(n_a, n_k + n_b) + 1.

  The input u and the coefficients b are identified only up to a common
  scale c: (c u, b / c) explains the data equally well. Estimates are
  normalized so that ||b|| = 1 and the first nonzero entry of b is
  positive; u carries the remaining scale.

Exit codes: 0 success, 1 usage or input error, 2 solver failure,
3 infeasible data.";

#[derive(Debug, Parser)]
#[command(name = "bilift", version, about, after_long_help = CONVENTIONS)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate an ARX model driven by an input from a subspace.
    Simulate(SimulateArgs),
    /// Estimate u, a and b from an output series and a basis.
    Identify(IdentifyArgs),
    /// Print the smallest penalty for which the lifted matrix can be nonzero.
    LambdaMin(LambdaMinArgs),
    /// Report whether the lifted linear system has full column rank.
    CheckRecovery(ProblemArgs),
    /// Run a noise sweep from a scenario file.
    Montecarlo(MonteCarloArgs),
    /// Simulate the worked example: a = (-0.3), b = (3, 2, 1), input held
    /// for six samples, N = 60, uniform noise.
    PaperExample(PaperExampleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BasisKind {
    Zoh,
    Dft,
    Gaussian,
    File,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NoiseKind {
    None,
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Exact,
    Bounded,
    Penalized,
    Search,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Output lag order; must match the length of --a when given.
    #[arg(long)]
    na: Option<usize>,
    /// Input lag order; must match the length of --b when given.
    #[arg(long)]
    nb: Option<usize>,
    /// Input delay.
    #[arg(long, default_value_t = 0)]
    nk: usize,
    /// Output coefficients a_1..a_na, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    a: Vec<f64>,
    /// Input coefficients b_1..b_nb, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        required = true
    )]
    b: Vec<f64>,
    #[arg(long, value_enum)]
    basis: BasisKind,
    /// Hold length for the zoh basis.
    #[arg(long)]
    hold: Option<usize>,
    /// Subspace dimension for the dft and gaussian bases.
    #[arg(long)]
    m: Option<usize>,
    /// Seed of the gaussian basis (defaults to --seed).
    #[arg(long)]
    basis_seed: Option<u64>,
    /// Basis CSV for --basis file (N rows, m columns, no header).
    #[arg(long)]
    basis_file: Option<PathBuf>,
    /// Number of samples.
    #[arg(long = "N")]
    samples: usize,
    #[arg(long, value_enum, default_value = "none")]
    noise: NoiseKind,
    /// Width of uniform noise on [-eps/2, eps/2], or the standard deviation
    /// of gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Series CSV to write (t,y,u).
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth JSON (defaults to <out stem>.truth.json).
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Series CSV with columns t,y (a u column is ignored).
    #[arg(long = "in")]
    input: PathBuf,
    /// Basis CSV (N rows, m columns, no header).
    #[arg(
        long,
        conflicts_with = "basis_spec",
        required_unless_present = "basis_spec"
    )]
    basis_file: Option<PathBuf>,
    /// Inline basis: zoh:hold=H, dft:m=M or gaussian:m=M,seed=S.
    #[arg(long)]
    basis_spec: Option<String>,
    #[arg(long)]
    na: usize,
    #[arg(long)]
    nb: usize,
    #[arg(long, default_value_t = 0)]
    nk: usize,
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Noise bound |e(t)| <= eps-box for the bounded mode.
    #[arg(long)]
    eps_box: Option<f64>,
    /// Penalty weight for the penalized mode.
    #[arg(long)]
    lambda: Option<f64>,
    /// Growth factor of the lambda sweep in search mode.
    #[arg(long, default_value_t = 1.5)]
    growth: f64,
    /// Solver configuration JSON; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Estimate JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Iteration trace CSV to write.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LambdaMinArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Print a JSON object instead of a bare number.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct MonteCarloArgs {
    /// Scenario JSON.
    #[arg(long)]
    scenario: PathBuf,
    /// Noise levels, comma separated (defaults to the scenario's level).
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Master seed (defaults to the scenario's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Per-level summary CSV.
    #[arg(long)]
    out_summary: PathBuf,
    /// Per-trial CSV.
    #[arg(long)]
    out_trials: Option<PathBuf>,
    /// Worker threads; results do not depend on this value.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Debug, Args)]
struct PaperExampleArgs {
    /// Noise width: e(t) uniform on [-eps/2, eps/2].
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Series CSV to write (t,y,u).
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth JSON (defaults to <out stem>.truth.json).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Also write the scenario JSON, usable with `montecarlo`.
    #[arg(long)]
    scenario_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
