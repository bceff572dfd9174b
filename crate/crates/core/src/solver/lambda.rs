use nalgebra::DMatrix;
use serde::Serialize;

use super::{is_rank_zero, solve_penalized, SolverConfig, SolverReport, SolverStatus};
use crate::arx::ar_least_squares;
use crate::error::{Error, Result};
use crate::lifting::{assemble_estimate, LiftedEstimate, LiftedProblem};
use crate::linalg;

/// Largest `lambda` for which the penalized program returns `X = 0`.
///
/// With `a_hat` the AR least-squares fit over `t = n..N` and `r` its
/// residual, `V(i, j) = 2 sum_t r(t) D(t - n_k - j, i)` and the threshold is
/// `1 / ||V||_op`. Returns `f64::INFINITY` when `V` vanishes (pure AR data).
pub fn lambda_min(problem: &LiftedProblem) -> Result<f64> {
    let orders = problem.orders();
    let n = orders.first_index();
    let fit = ar_least_squares(problem.series(), orders.n_a, n)?;
    let d = problem.basis().matrix();
    let m = problem.basis().dim();

    let mut v = DMatrix::zeros(m, orders.n_b);
    for (offset, r) in fit.residuals.iter().enumerate() {
        let t = n + offset;
        for j in 1..=orders.n_b {
            let row = t - orders.n_k - j - 1;
            for i in 0..m {
                v[(i, j - 1)] += 2.0 * r * d[(row, i)];
            }
        }
    }
    // V is zero up to rounding when the AR residual has no component along
    // the lifted input columns.
    let scale = 2.0 * problem.rhs().norm() * problem.input_block().norm();
    if v.norm() <= 1e-12 * scale {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / linalg::operator_norm(&v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankClass {
    Zero,
    One,
    Higher,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepStep {
    pub lambda: f64,
    pub class: RankClass,
    pub rank_gap: f64,
    pub status: SolverStatus,
}

#[derive(Debug, Clone)]
pub struct LambdaSearch {
    /// Largest rank-1 lambda found; infinite when `lambda_min` is.
    pub lambda_star: f64,
    pub lambda_min: f64,
    pub estimate: LiftedEstimate,
    pub trace: Vec<SweepStep>,
}

const MAX_SWEEP_STEPS: usize = 40;

/// Geometric sweep `lambda_min * growth^k`, `k = 1..=40`, returning the
/// largest lambda whose solution is rank 1. The whole range is swept: a
/// higher-rank band can sit between two rank-1 bands.
pub fn lambda_search(
    problem: &LiftedProblem,
    config: &SolverConfig,
    growth: f64,
) -> Result<LambdaSearch> {
    if !(growth.is_finite() && growth > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "growth factor must exceed 1, got {growth}"
        )));
    }
    let lmin = lambda_min(problem)?;
    if lmin.is_infinite() {
        let orders = problem.orders();
        let fit = ar_least_squares(problem.series(), orders.n_a, orders.first_index())?;
        let x = DMatrix::zeros(problem.basis().dim(), orders.n_b);
        let mut estimate = assemble_estimate(x, fit.a_hat, problem, SolverReport::direct(0.0))?;
        estimate.lambda = Some(f64::INFINITY);
        estimate
            .warnings
            .push("lambda_min is infinite: the output is explained by the AR part alone".into());
        return Ok(LambdaSearch {
            lambda_star: f64::INFINITY,
            lambda_min: lmin,
            estimate,
            trace: Vec::new(),
        });
    }

    let mut trace = Vec::new();
    let mut best: Option<(f64, LiftedEstimate)> = None;
    let mut lambda = lmin;
    for _ in 0..MAX_SWEEP_STEPS {
        lambda *= growth;
        let est = solve_penalized(problem, lambda, config)?;
        let class = if is_rank_zero(&est.x_matrix, problem) {
            RankClass::Zero
        } else if est.rank_gap <= config.rank1_gap_tol {
            RankClass::One
        } else {
            RankClass::Higher
        };
        log::debug!("lambda {lambda:.6e}: {class:?} (gap {:.3e})", est.rank_gap);
        trace.push(SweepStep {
            lambda,
            class,
            rank_gap: est.rank_gap,
            status: est.report.status,
        });
        match class {
            RankClass::One => best = Some((lambda, est)),
            RankClass::Zero | RankClass::Higher => {}
        }
    }
    match best {
        Some((lambda_star, estimate)) => Ok(LambdaSearch {
            lambda_star,
            lambda_min: lmin,
            estimate,
            trace,
        }),
        None => Err(Error::SearchFailed {
            steps: trace.len(),
            trace,
        }),
    }
}
