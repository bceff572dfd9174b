use std::fmt;
use std::path::{Path, PathBuf};

use bilift_core::arx::{ArxModel, ModelOrders, NoiseSpec, OutputSeries};
use bilift_core::experiments::{
    export_plot_data, export_trials, monte_carlo, paper_example, realize, BasisSpec, Scenario,
};
use bilift_core::io::{read_series_csv, write_json, write_series_csv};
use bilift_core::lifting::{build_lifted_problem, check_recoverability, LiftedProblem};
use bilift_core::solver::{
    lambda_min, lambda_search, solve_bounded, solve_noise_free, solve_penalized, SolverConfig,
    SolverStatus,
};
use bilift_core::subspace::load_basis;
use bilift_core::Error;
use serde::Serialize;

use crate::{
    BasisKind, Command, IdentifyArgs, LambdaMinArgs, Mode, MonteCarloArgs, NoiseKind,
    PaperExampleArgs, ProblemArgs, SimulateArgs,
};

/// A command failure, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or malformed input (exit 1).
    Usage(String),
    /// The solver could not produce an answer (exit 2).
    Solver(String),
    /// The data admit no solution under the chosen model (exit 3).
    Infeasible(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Solver(_) => 2,
            Failure::Infeasible(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Solver(m) | Failure::Infeasible(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Infeasible { .. } => Failure::Infeasible(msg),
            Error::NotRecoverable { .. } | Error::SearchFailed { .. } | Error::UndefinedMetric => {
                Failure::Solver(msg)
            }
            Error::InvalidDimension(_)
            | Error::InvalidInput(_)
            | Error::InvalidArgument(_)
            | Error::Format { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => Failure::Usage(msg),
        }
    }
}

type CmdResult = Result<(), Failure>;

pub fn run(command: Command) -> CmdResult {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Identify(args) => identify(args),
        Command::LambdaMin(args) => lambda_min_cmd(args),
        Command::CheckRecovery(args) => check_recovery(args),
        Command::Montecarlo(args) => montecarlo(args),
        Command::PaperExample(args) => paper_example_cmd(args),
    }
}

/// Ground truth written next to simulated series.
#[derive(Debug, Serialize)]
struct Truth<'a> {
    model: &'a ArxModel,
    basis: &'a BasisSpec,
    samples: usize,
    noise: NoiseSpec,
    seed: u64,
    x: &'a [f64],
    u: &'a [f64],
}

fn truth_path(out: &Path, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let stem = out.file_stem().unwrap_or_default().to_string_lossy();
        out.with_file_name(format!("{stem}.truth.json"))
    })
}

fn write_simulation(
    scenario: &Scenario,
    seed: u64,
    out: &Path,
    truth: Option<PathBuf>,
) -> CmdResult {
    scenario.validate()?;
    let basis = scenario.basis.build(scenario.samples)?;
    let draw = realize(&scenario.model, &basis, scenario.noise, seed)?;
    write_series_csv(&draw.y, Some(&draw.u), out)?;
    let record = Truth {
        model: &scenario.model,
        basis: &scenario.basis,
        samples: scenario.samples,
        noise: scenario.noise,
        seed,
        x: &draw.x,
        u: &draw.u,
    };
    write_json(&record, truth_path(out, truth))?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> CmdResult {
    let na = args.na.unwrap_or(args.a.len());
    let nb = args.nb.unwrap_or(args.b.len());
    if na != args.a.len() {
        return Err(Failure::Usage(format!(
            "--na {na} does not match {} coefficients in --a",
            args.a.len()
        )));
    }
    if nb != args.b.len() {
        return Err(Failure::Usage(format!(
            "--nb {nb} does not match {} coefficients in --b",
            args.b.len()
        )));
    }
    let orders = ModelOrders::new(na, nb, args.nk)?;
    let model = ArxModel::new(orders, args.a, args.b)?;

    let need = |flag: Option<usize>, name: &str| {
        flag.ok_or_else(|| Failure::Usage(format!("--basis {name} requires --{}", flag_for(name))))
    };
    let forbid = |present: bool, flag: &str, kind: &str| {
        if present {
            Err(Failure::Usage(format!(
                "--{flag} does not apply to --basis {kind}"
            )))
        } else {
            Ok(())
        }
    };
    let basis = match args.basis {
        BasisKind::Zoh => {
            forbid(args.m.is_some(), "m", "zoh")?;
            BasisSpec::Zoh {
                hold: need(args.hold, "zoh")?,
            }
        }
        BasisKind::Dft => {
            forbid(args.hold.is_some(), "hold", "dft")?;
            BasisSpec::Dft {
                m: need(args.m, "dft")?,
            }
        }
        BasisKind::Gaussian => {
            forbid(args.hold.is_some(), "hold", "gaussian")?;
            BasisSpec::Gaussian {
                m: need(args.m, "gaussian")?,
                seed: args.basis_seed.unwrap_or(args.seed),
            }
        }
        BasisKind::File => {
            forbid(args.hold.is_some() || args.m.is_some(), "hold/--m", "file")?;
            BasisSpec::File {
                path: args
                    .basis_file
                    .clone()
                    .ok_or_else(|| Failure::Usage("--basis file requires --basis-file".into()))?,
            }
        }
    };
    if args.basis_file.is_some() && !matches!(args.basis, BasisKind::File) {
        return Err(Failure::Usage("--basis-file requires --basis file".into()));
    }
    if !(args.eps.is_finite() && args.eps >= 0.0) {
        return Err(Failure::Usage(format!(
            "--eps must be >= 0, got {}",
            args.eps
        )));
    }
    let noise = match args.noise {
        NoiseKind::None => {
            if args.eps != 0.0 {
                return Err(Failure::Usage(
                    "--eps requires --noise uniform or gaussian".into(),
                ));
            }
            NoiseSpec::None
        }
        NoiseKind::Uniform => NoiseSpec::Uniform { eps: args.eps },
        NoiseKind::Gaussian => NoiseSpec::Gaussian { sigma: args.eps },
    };
    let scenario = Scenario {
        model,
        basis,
        samples: args.samples,
        noise,
        solver: bilift_core::experiments::SolverMode::Exact,
        config: SolverConfig::default(),
        seed: args.seed,
    };
    write_simulation(&scenario, args.seed, &args.out, args.truth)
}

fn flag_for(kind: &str) -> &'static str {
    match kind {
        "zoh" => "hold",
        _ => "m",
    }
}

fn paper_example_cmd(args: PaperExampleArgs) -> CmdResult {
    if !(args.eps.is_finite() && args.eps >= 0.0) {
        return Err(Failure::Usage(format!(
            "--eps must be >= 0, got {}",
            args.eps
        )));
    }
    let mut scenario = paper_example(args.eps);
    scenario.seed = args.seed;
    if let Some(path) = &args.scenario_out {
        write_json(&scenario, path)?;
    }
    write_simulation(&scenario, args.seed, &args.out, args.truth)
}

/// Parses `kind:key=value,...`.
fn parse_basis_spec(spec: &str) -> Result<BasisSpec, Failure> {
    let bad = |msg: String| Failure::Usage(format!("invalid --basis-spec '{spec}': {msg}"));
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut hold = None;
    let mut m = None;
    let mut seed = None;
    for pair in rest.split(',').filter(|p| !p.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, found '{pair}'")))?;
        let slot = match key.trim() {
            "hold" => &mut hold,
            "m" => &mut m,
            "seed" => &mut seed,
            other => return Err(bad(format!("unknown key '{other}'"))),
        };
        *slot = Some(
            value
                .trim()
                .parse::<u64>()
                .map_err(|_| bad(format!("'{value}' is not a non-negative integer")))?,
        );
    }
    let req = |v: Option<u64>, key: &str| v.ok_or_else(|| bad(format!("missing {key}=")));
    let spec = match kind.trim() {
        "zoh" if m.is_none() && seed.is_none() => BasisSpec::Zoh {
            hold: req(hold, "hold")? as usize,
        },
        "dft" if hold.is_none() && seed.is_none() => BasisSpec::Dft {
            m: req(m, "m")? as usize,
        },
        "gaussian" if hold.is_none() => BasisSpec::Gaussian {
            m: req(m, "m")? as usize,
            seed: req(seed, "seed")?,
        },
        "zoh" | "dft" | "gaussian" => return Err(bad("key does not apply to this basis".into())),
        other => return Err(bad(format!("unknown basis kind '{other}'"))),
    };
    Ok(spec)
}

fn load_problem(args: &ProblemArgs) -> Result<LiftedProblem, Failure> {
    let series = read_series_csv(&args.input)?;
    let y: OutputSeries = series.y;
    let basis = match (&args.basis_file, &args.basis_spec) {
        (Some(path), None) => load_basis(path)?,
        (None, Some(spec)) => parse_basis_spec(spec)?.build(y.len())?,
        _ => {
            return Err(Failure::Usage(
                "exactly one of --basis-file and --basis-spec is required".into(),
            ))
        }
    };
    let orders = ModelOrders::new(args.na, args.nb, args.nk)?;
    Ok(build_lifted_problem(&y, &basis, orders)?)
}

fn identify(args: IdentifyArgs) -> CmdResult {
    match args.mode {
        Mode::Bounded if args.eps_box.is_none() => {
            return Err(Failure::Usage("--mode bounded requires --eps-box".into()))
        }
        Mode::Penalized if args.lambda.is_none() => {
            return Err(Failure::Usage("--mode penalized requires --lambda".into()))
        }
        _ => {}
    }
    if args.eps_box.is_some() && args.mode != Mode::Bounded {
        return Err(Failure::Usage(
            "--eps-box applies only to --mode bounded".into(),
        ));
    }
    if args.lambda.is_some() && args.mode != Mode::Penalized {
        return Err(Failure::Usage(
            "--lambda applies only to --mode penalized".into(),
        ));
    }
    let config = match &args.config {
        Some(path) => SolverConfig::from_json_file(path)?,
        None if args.mode == Mode::Search => SolverConfig::noisy(),
        None => SolverConfig::default(),
    };
    let problem = load_problem(&args.problem)?;

    let estimate = match args.mode {
        Mode::Exact => solve_noise_free(&problem, &config)?,
        Mode::Bounded => solve_bounded(&problem, args.eps_box.unwrap_or_default(), &config)?,
        Mode::Penalized => {
            let lambda = args.lambda.unwrap_or_default();
            let mut est = solve_penalized(&problem, lambda, &config)?;
            let lmin = lambda_min(&problem)?;
            if lambda < lmin {
                est.warnings.push(format!(
                    "lambda {lambda} is below lambda_min {lmin}: the lifted matrix is zero"
                ));
            }
            est
        }
        Mode::Search => {
            let search = lambda_search(&problem, &config, args.growth)?;
            let mut est = search.estimate;
            est.lambda = Some(search.lambda_star);
            est
        }
    };
    for w in &estimate.warnings {
        log::warn!("{w}");
    }
    write_json(&estimate.summary(), &args.out)?;
    if let Some(path) = &args.trace {
        estimate.report.write_trace_csv(path)?;
    }
    if estimate.report.status == SolverStatus::Infeasible {
        return Err(Failure::Infeasible(
            "no solution satisfies the noise bound; estimate written with status infeasible".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct LambdaMinOutput {
    /// `null` when infinite.
    lambda_min: Option<f64>,
    infinite: bool,
}

fn format_lambda(value: f64) -> String {
    if value.is_infinite() {
        "inf".into()
    } else {
        format!("{value:.11e}")
    }
}

fn lambda_min_cmd(args: LambdaMinArgs) -> CmdResult {
    let problem = load_problem(&args.problem)?;
    let value = lambda_min(&problem)?;
    if args.json {
        let out = LambdaMinOutput {
            lambda_min: value.is_finite().then_some(value),
            infinite: value.is_infinite(),
        };
        println!("{}", to_json(&out)?);
    } else {
        println!("{}", format_lambda(value));
    }
    Ok(())
}

fn check_recovery(args: ProblemArgs) -> CmdResult {
    let problem = load_problem(&args)?;
    println!("{}", to_json(&check_recoverability(&problem))?);
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))
}

fn montecarlo(args: MonteCarloArgs) -> CmdResult {
    let scenario = Scenario::from_json_file(&args.scenario)?;
    if args.trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    if args.parallel == 0 {
        return Err(Failure::Usage("--parallel must be at least 1".into()));
    }
    let levels = args
        .levels
        .clone()
        .unwrap_or_else(|| vec![scenario.noise.parameter()]);
    if levels.is_empty() || levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Failure::Usage(
            "--levels must be non-negative numbers".into(),
        ));
    }
    let seed = args.seed.unwrap_or(scenario.seed);
    let sweep = monte_carlo(&scenario, &levels, args.trials, seed, args.parallel)?;
    export_plot_data(&sweep.summary, &args.out_summary)?;
    if let Some(path) = &args.out_trials {
        export_trials(&sweep, path)?;
    }
    let dead: Vec<String> = sweep
        .summary
        .levels
        .iter()
        .filter(|l| l.trials == 0)
        .map(|l| l.eps.to_string())
        .collect();
    if !dead.is_empty() {
        return Err(Failure::Solver(format!(
            "every trial failed at noise level(s) {}",
            dead.join(", ")
        )));
    }
    Ok(())
}
