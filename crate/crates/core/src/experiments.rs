//! Monte Carlo harness: single trials, noise sweeps and plot-ready CSVs.
//!
//! A trial draws `x ~ N(0, I)`, forms `u = D x`, simulates the outputs, runs
//! the configured blind solver and, for comparison, the known-input
//! least-squares fit. Every random stream is derived from
//! `(master_seed, level, trial)`, so results do not depend on execution order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arx::{arx_least_squares, simulate, ArxModel, ModelOrders, NoiseSpec, OutputSeries};
use crate::error::{Error, Result};
use crate::lifting::{build_lifted_problem, scale_invariant_error, LiftedEstimate};
use crate::solver::{
    lambda_search, solve_bounded, solve_noise_free, solve_penalized, SolverConfig, SolverStatus,
};
use crate::subspace::{dft_basis, gaussian_basis, load_basis, zoh_basis, SubspaceBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BasisSpec {
    Zoh { hold: usize },
    Dft { m: usize },
    Gaussian { m: usize, seed: u64 },
    File { path: PathBuf },
}

impl BasisSpec {
    pub fn build(&self, samples: usize) -> Result<SubspaceBasis> {
        let basis = match self {
            BasisSpec::Zoh { hold } => zoh_basis(samples, *hold)?,
            BasisSpec::Dft { m } => dft_basis(samples, *m)?,
            BasisSpec::Gaussian { m, seed } => gaussian_basis(samples, *m, *seed)?,
            BasisSpec::File { path } => load_basis(path)?,
        };
        if basis.samples() != samples {
            return Err(Error::InvalidDimension(format!(
                "basis has {} rows, scenario has N = {samples}",
                basis.samples()
            )));
        }
        Ok(basis)
    }
}

/// Which lifted program a scenario runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SolverMode {
    Exact,
    /// `eps_box = None` uses the half-width implied by the noise model:
    /// `eps/2` for uniform noise, `2 sigma` for Gaussian noise.
    Bounded {
        #[serde(default)]
        eps_box: Option<f64>,
    },
    Penalized {
        lambda: f64,
    },
    Search {
        #[serde(default = "default_growth")]
        growth: f64,
    },
}

fn default_growth() -> f64 {
    1.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: ArxModel,
    pub basis: BasisSpec,
    /// Sample count `N`.
    pub samples: usize,
    pub noise: NoiseSpec,
    pub solver: SolverMode,
    #[serde(default)]
    pub config: SolverConfig,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn orders(&self) -> ModelOrders {
        self.model.orders
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let s: Self = crate::io::read_json(path)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        ArxModel::new(
            self.model.orders,
            self.model.a.clone(),
            self.model.b.clone(),
        )?;
        if self.samples < self.model.orders.first_index() {
            return Err(Error::InvalidDimension(format!(
                "N = {} is below the first usable index {}",
                self.samples,
                self.model.orders.first_index()
            )));
        }
        self.config.validate()
    }

    /// Copy with the noise parameter replaced; `none` noise becomes uniform.
    pub fn at_noise_level(&self, eps: f64) -> Self {
        let noise = match self.noise {
            NoiseSpec::None => NoiseSpec::Uniform { eps },
            other => other.with_parameter(eps),
        };
        Self {
            noise,
            ..self.clone()
        }
    }

    fn box_half_width(&self, explicit: Option<f64>) -> f64 {
        explicit.unwrap_or(match self.noise {
            NoiseSpec::None => 0.0,
            NoiseSpec::Uniform { eps } => eps / 2.0,
            NoiseSpec::Gaussian { sigma } => 2.0 * sigma,
        })
    }
}

/// The worked example: `a = (-0.3)`, `b = (3, 2, 1)`, input held for six
/// samples, `N = 60`, uniform noise of width `eps`, bounded solver.
pub fn paper_example(eps: f64) -> Scenario {
    let orders = ModelOrders {
        n_a: 1,
        n_b: 3,
        n_k: 0,
    };
    Scenario {
        model: ArxModel {
            orders,
            a: vec![-0.3],
            b: vec![3.0, 2.0, 1.0],
        },
        basis: BasisSpec::Zoh { hold: 6 },
        samples: 60,
        noise: NoiseSpec::Uniform { eps },
        solver: SolverMode::Bounded { eps_box: None },
        config: SolverConfig::default(),
        seed: 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Converged,
    MaxIter,
    Failed,
}

impl TrialStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrialStatus::Converged => "converged",
            TrialStatus::MaxIter => "max_iter",
            TrialStatus::Failed => "failed",
        }
    }
}

/// Metrics of one trial. Solver metrics are `NaN` when the solve failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub err_u: f64,
    pub err_b: f64,
    pub err_a: f64,
    pub baseline_err_b: f64,
    pub baseline_err_a: f64,
    pub rank_gap: f64,
    pub lambda_used: Option<f64>,
    pub status: TrialStatus,
    pub failure: Option<String>,
}

impl TrialResult {
    pub fn failed(&self) -> bool {
        self.status == TrialStatus::Failed
    }
}

/// `||a_hat - a|| / ||a||`, or the absolute error when `a = 0`.
pub fn coefficient_error(a: &[f64], a_hat: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(a_hat)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}

fn solve_scenario(
    scenario: &Scenario,
    problem: &crate::lifting::LiftedProblem,
) -> Result<LiftedEstimate> {
    let config = &scenario.config;
    match &scenario.solver {
        SolverMode::Exact => solve_noise_free(problem, config),
        SolverMode::Bounded { eps_box } => {
            solve_bounded(problem, scenario.box_half_width(*eps_box), config)
        }
        SolverMode::Penalized { lambda } => solve_penalized(problem, *lambda, config),
        SolverMode::Search { growth } => {
            let search = lambda_search(problem, config, *growth)?;
            let mut est = search.estimate;
            est.lambda = Some(search.lambda_star);
            Ok(est)
        }
    }
}

/// Runs one trial with its own random stream.
pub fn run_trial(scenario: &Scenario, trial_seed: u64) -> Result<TrialResult> {
    let basis = scenario.basis.build(scenario.samples)?;
    run_trial_with_basis(scenario, &basis, trial_seed)
}

/// One draw of `x`, the input `u = D x` and the noisy outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub y: OutputSeries,
}

/// Draws `x ~ N(0, I)` and then a noise seed from one stream seeded by `seed`.
pub fn realize(
    model: &ArxModel,
    basis: &SubspaceBasis,
    noise: NoiseSpec,
    seed: u64,
) -> Result<Realization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..basis.dim())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let noise_seed = rng.next_u64();
    let u = basis.synthesize(&x)?;
    let y = simulate(model, &u, noise, noise_seed)?;
    Ok(Realization { x, u, y })
}

pub(crate) fn run_trial_with_basis(
    scenario: &Scenario,
    basis: &SubspaceBasis,
    trial_seed: u64,
) -> Result<TrialResult> {
    let Realization { u, y, .. } = realize(&scenario.model, basis, scenario.noise, trial_seed)?;

    let truth = &scenario.model;
    let baseline = arx_least_squares(&y, &u, truth.orders)?;
    let baseline_err_b = scale_invariant_error(&truth.b, &baseline.model.b)?;
    let baseline_err_a = coefficient_error(&truth.a, &baseline.model.a);

    let problem = build_lifted_problem(&y, basis, truth.orders)?;
    let outcome = solve_scenario(scenario, &problem);
    let failed = |reason: String| TrialResult {
        err_u: f64::NAN,
        err_b: f64::NAN,
        err_a: f64::NAN,
        baseline_err_b,
        baseline_err_a,
        rank_gap: f64::NAN,
        lambda_used: None,
        status: TrialStatus::Failed,
        failure: Some(reason),
    };
    let est = match outcome {
        Ok(est) if est.report.status == SolverStatus::Infeasible => {
            log::warn!("trial seed {trial_seed}: solver reported infeasibility");
            return Ok(failed("infeasible".into()));
        }
        Ok(est) => est,
        Err(e) => {
            log::warn!("trial seed {trial_seed}: {e}");
            return Ok(failed(e.to_string()));
        }
    };
    let u_ref = if u.iter().all(|&v| v == 0.0) {
        None
    } else {
        Some(&u)
    };
    Ok(TrialResult {
        err_u: match u_ref {
            Some(u) => scale_invariant_error(u, est.u_hat.as_slice())?,
            None => 0.0,
        },
        err_b: scale_invariant_error(&truth.b, est.b_hat.as_slice())?,
        err_a: coefficient_error(&truth.a, &est.a_hat),
        baseline_err_b,
        baseline_err_a,
        rank_gap: est.rank_gap,
        lambda_used: est.lambda,
        status: match est.report.status {
            SolverStatus::Converged => TrialStatus::Converged,
            _ => TrialStatus::MaxIter,
        },
        failure: None,
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at noise level `level`.
pub fn trial_seed(master_seed: u64, level: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ level as u64) ^ trial as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator, 0 for one sample).
    pub std: f64,
    pub count: usize,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let count = v.len();
        if count == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                count,
            };
        }
        let mean = v.iter().sum::<f64>() / count as f64;
        let std = if count > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, count }
    }

    /// Half a standard deviation, the error-bar convention of the plots.
    pub fn half_std(&self) -> f64 {
        0.5 * self.std
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub eps: f64,
    /// Trials that produced an estimate; statistics cover only these.
    pub trials: usize,
    pub failures: usize,
    pub err_u: Stats,
    pub err_b: Stats,
    pub err_a: Stats,
    pub baseline_err_b: Stats,
    pub baseline_err_a: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub trials_per_level: usize,
    pub levels: Vec<LevelSummary>,
}

impl SweepSummary {
    pub fn noise_levels(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.eps).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub level: usize,
    pub eps: f64,
    pub trial: usize,
    pub seed: u64,
    pub result: TrialResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub summary: SweepSummary,
    pub trials: Vec<TrialRecord>,
}

/// Noise sweep over `levels` with `trials` trials each. `threads = 1` runs
/// serially; any thread count yields identical results.
pub fn monte_carlo(
    template: &Scenario,
    levels: &[f64],
    trials: usize,
    master_seed: u64,
    threads: usize,
) -> Result<Sweep> {
    monte_carlo_with(
        template,
        levels,
        trials,
        master_seed,
        threads,
        run_trial_with_basis,
    )
}

pub(crate) fn monte_carlo_with<F>(
    template: &Scenario,
    levels: &[f64],
    trials: usize,
    master_seed: u64,
    threads: usize,
    trial_fn: F,
) -> Result<Sweep>
where
    F: Fn(&Scenario, &SubspaceBasis, u64) -> Result<TrialResult> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if let Some(bad) = levels.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
        return Err(Error::InvalidArgument(format!("invalid noise level {bad}")));
    }
    template.validate()?;
    let basis = template.basis.build(template.samples)?;
    let scenarios: Vec<Scenario> = levels.iter().map(|&e| template.at_noise_level(e)).collect();

    let jobs: Vec<(usize, usize)> = (0..levels.len())
        .flat_map(|l| (0..trials).map(move |t| (l, t)))
        .collect();
    let run = |&(level, trial): &(usize, usize)| -> Result<TrialRecord> {
        let seed = trial_seed(master_seed, level, trial);
        let result = trial_fn(&scenarios[level], &basis, seed).unwrap_or_else(|e| TrialResult {
            err_u: f64::NAN,
            err_b: f64::NAN,
            err_a: f64::NAN,
            baseline_err_b: f64::NAN,
            baseline_err_a: f64::NAN,
            rank_gap: f64::NAN,
            lambda_used: None,
            status: TrialStatus::Failed,
            failure: Some(e.to_string()),
        });
        Ok(TrialRecord {
            level,
            eps: levels[level],
            trial,
            seed,
            result,
        })
    };

    let records: Vec<TrialRecord> = if threads <= 1 {
        jobs.iter().map(run).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run).collect::<Result<_>>())?
    };

    let summary = SweepSummary {
        trials_per_level: trials,
        levels: levels
            .iter()
            .enumerate()
            .map(|(l, &eps)| summarize_level(l, eps, &records))
            .collect(),
    };
    Ok(Sweep {
        summary,
        trials: records,
    })
}

fn summarize_level(level: usize, eps: f64, records: &[TrialRecord]) -> LevelSummary {
    let at_level: Vec<&TrialResult> = records
        .iter()
        .filter(|r| r.level == level)
        .map(|r| &r.result)
        .collect();
    let ok: Vec<&TrialResult> = at_level.iter().copied().filter(|r| !r.failed()).collect();
    let failures = at_level.len() - ok.len();
    let stats = |f: fn(&TrialResult) -> f64| Stats::of(ok.iter().map(|r| f(r)));
    LevelSummary {
        eps,
        trials: ok.len(),
        failures,
        err_u: stats(|r| r.err_u),
        err_b: stats(|r| r.err_b),
        err_a: stats(|r| r.err_a),
        baseline_err_b: Stats::of(
            at_level
                .iter()
                .map(|r| r.baseline_err_b)
                .filter(|v| v.is_finite()),
        ),
        baseline_err_a: Stats::of(
            at_level
                .iter()
                .map(|r| r.baseline_err_a)
                .filter(|v| v.is_finite()),
        ),
    }
}

pub const PLOT_HEADER: &str =
    "eps,mean_err_u,halfstd_err_u,mean_err_b,halfstd_err_b,mean_err_a,halfstd_err_a,failures";

pub const TRIALS_HEADER: &str =
    "eps,trial,err_u,err_b,err_a,baseline_err_b,baseline_err_a,rank_gap,status";

/// Writes one row per noise level with means and half standard deviations.
pub fn export_plot_data(summary: &SweepSummary, path: impl AsRef<Path>) -> Result<()> {
    if summary.levels.is_empty() {
        return Err(Error::InvalidArgument("summary has no noise levels".into()));
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{PLOT_HEADER}")?;
    for l in &summary.levels {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            l.eps,
            l.err_u.mean,
            l.err_u.half_std(),
            l.err_b.mean,
            l.err_b.half_std(),
            l.err_a.mean,
            l.err_a.half_std(),
            l.failures
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_trials(sweep: &Sweep, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{TRIALS_HEADER}")?;
    for rec in &sweep.trials {
        let r = &rec.result;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            rec.eps,
            rec.trial,
            r.err_u,
            r.err_b,
            r.err_a,
            r.baseline_err_b,
            r.baseline_err_a,
            r.rank_gap,
            r.status.as_str()
        )?;
    }
    out.flush()?;
    Ok(())
}

/// One parsed row of a plot CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotRow {
    pub eps: f64,
    pub mean_err_u: f64,
    pub halfstd_err_u: f64,
    pub mean_err_b: f64,
    pub halfstd_err_b: f64,
    pub mean_err_a: f64,
    pub halfstd_err_a: f64,
    pub failures: usize,
}

pub fn read_plot_data(path: impl AsRef<Path>) -> Result<Vec<PlotRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let num = |c: usize| -> Result<f64> {
            record
                .get(c)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Format {
                    row: i + 2,
                    column: c + 1,
                    message: "expected a number".into(),
                })
        };
        rows.push(PlotRow {
            eps: num(0)?,
            mean_err_u: num(1)?,
            halfstd_err_u: num(2)?,
            mean_err_b: num(3)?,
            halfstd_err_b: num(4)?,
            mean_err_a: num(5)?,
            halfstd_err_a: num(6)?,
            failures: num(7)? as usize,
        });
    }
    Ok(rows)
}
