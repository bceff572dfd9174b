//! Nuclear-norm programs over the lifted constraints, solved by ADMM with
//! singular value thresholding, plus the closed-form `lambda_min` and the
//! full-rank linear fast path.

mod admm;
mod lambda;
mod svt;

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::{assemble_estimate, check_recoverability, LiftedEstimate, LiftedProblem};
use crate::linalg;

pub use lambda::{lambda_min, lambda_search, LambdaSearch, RankClass, SweepStep};
pub use svt::svt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Initial ADMM penalty.
    pub rho: f64,
    pub max_iter: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// `sigma_2 / sigma_1` at or below which a solution counts as rank 1.
    pub rank1_gap_tol: f64,
    /// Ridge weight on the AR block of the theta update.
    pub tikhonov_a: f64,
    /// Residual-balancing penalty adaptation.
    pub adaptive_rho: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iter: 5000,
            tol_abs: 1e-8,
            tol_rel: 1e-6,
            rank1_gap_tol: 1e-6,
            tikhonov_a: 1e-10,
            adaptive_rho: true,
        }
    }
}

impl SolverConfig {
    /// Defaults with the looser rank-1 classification used for noisy data.
    pub fn noisy() -> Self {
        Self {
            rank1_gap_tol: 1e-3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("tol_abs", self.tol_abs),
            ("tol_rel", self.tol_rel),
            ("rank1_gap_tol", self.rank1_gap_tol),
            ("tikhonov_a", self.tikhonov_a),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = crate::io::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `sqrt(rho (||r||^2 + ||z_k - z_{k-1}||^2))` over both constraint blocks.
    pub combined_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub primal_threshold: f64,
    pub dual_threshold: f64,
    /// `||rhs - A theta||_inf` of the internal iterate.
    pub constraint_residual: f64,
    pub final_rho: f64,
    pub trace: Vec<TraceEntry>,
}

impl SolverReport {
    pub(crate) fn direct(constraint_residual: f64) -> Self {
        Self {
            status: SolverStatus::Converged,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            primal_threshold: 0.0,
            dual_threshold: 0.0,
            constraint_residual,
            final_rho: 0.0,
            trace: Vec::new(),
        }
    }

    pub fn objective_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|e| e.objective).collect()
    }

    /// Writes `iteration,objective,primal_residual,dual_residual`.
    pub fn write_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            out,
            "iteration,objective,primal_residual,dual_residual,combined_residual"
        )?;
        for e in &self.trace {
            writeln!(
                out,
                "{},{},{},{},{}",
                e.iteration, e.objective, e.primal_residual, e.dual_residual, e.combined_residual
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Minimizes `||X||_*` subject to `A theta = rhs`.
///
/// Returns [`Error::Infeasible`] when `rhs` is not in the range of `A`.
pub fn solve_noise_free(problem: &LiftedProblem, config: &SolverConfig) -> Result<LiftedEstimate> {
    config.validate()?;
    let ls = linalg::lstsq(problem.matrix(), problem.rhs());
    let residual = problem.residual(&ls.solution).norm();
    let threshold = feasibility_threshold(problem, config);
    if residual > threshold {
        return Err(Error::Infeasible {
            residual,
            threshold,
        });
    }
    admm::solve(
        problem,
        config,
        admm::Variant::Equality {
            theta0: ls.solution,
        },
    )
}

fn feasibility_threshold(problem: &LiftedProblem, config: &SolverConfig) -> f64 {
    (problem.rows() as f64).sqrt() * config.tol_abs + config.tol_rel * problem.rhs().norm()
}

/// Minimizes `||X||_*` subject to `|rhs - A theta| <= eps` elementwise.
pub fn solve_bounded(
    problem: &LiftedProblem,
    eps: f64,
    config: &SolverConfig,
) -> Result<LiftedEstimate> {
    config.validate()?;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "box half-width must be finite and non-negative, got {eps}"
        )));
    }
    if eps == 0.0 {
        return match solve_noise_free(problem, config) {
            Err(Error::Infeasible { residual, .. }) => {
                let ls = linalg::lstsq(problem.matrix(), problem.rhs());
                let (x, a) = problem.unpack(&ls.solution);
                let mut report = SolverReport::direct(residual);
                report.status = SolverStatus::Infeasible;
                let mut est = assemble_estimate(x, a, problem, report)?;
                est.warnings
                    .push("zero-width box is infeasible for these data".into());
                Ok(est)
            }
            other => other,
        };
    }
    admm::solve(problem, config, admm::Variant::Box { eps })
}

/// Minimizes `||X||_* + lambda ||rhs - A theta||_2^2`.
pub fn solve_penalized(
    problem: &LiftedProblem,
    lambda: f64,
    config: &SolverConfig,
) -> Result<LiftedEstimate> {
    config.validate()?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    let mut est = admm::solve(problem, config, admm::Variant::Penalized { lambda })?;
    est.lambda = Some(lambda);
    Ok(est)
}

/// Solves `A theta = rhs` directly. Requires `A` to have full column rank,
/// in which case the noise-free solution is unique and no optimization is
/// needed.
pub fn oracle_linear_solve(problem: &LiftedProblem) -> Result<LiftedEstimate> {
    let report = check_recoverability(problem);
    if !report.full_column_rank {
        return Err(Error::NotRecoverable {
            rank: report.rank,
            columns: report.columns,
        });
    }
    let ls = linalg::lstsq(problem.matrix(), problem.rhs());
    let (x, a) = problem.unpack(&ls.solution);
    let residual = linalg::max_abs(&problem.residual(&ls.solution));
    assemble_estimate(x, a, problem, SolverReport::direct(residual))
}

/// `||X||_F <= 1e-6 ||rhs||_2`.
pub fn is_rank_zero(x: &DMatrix<f64>, problem: &LiftedProblem) -> bool {
    x.norm() <= 1e-6 * problem.rhs().norm()
}
