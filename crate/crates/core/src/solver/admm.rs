//! Two-block ADMM shared by the three nuclear-norm programs.
//!
//! The lifted block of `theta` is duplicated into `z` (carrying the nuclear
//! norm through its prox), with scaled dual `w` on `P theta = z`:
//!
//! * equality: `theta` is restricted to `{A theta = rhs}` by working in null
//!   space coordinates `theta = theta0 + N xi`;
//! * box: an extra block `eta` with `A theta + eta = rhs`, `|eta| <= eps`,
//!   and scaled dual `v`;
//! * penalized: the quadratic `lambda ||rhs - A theta||^2` sits in the
//!   `theta` update.

use nalgebra::{DMatrix, DVector};

use super::{svt, SolverConfig, SolverReport, SolverStatus, TraceEntry};
use crate::error::Result;
use crate::lifting::{assemble_estimate, LiftedEstimate, LiftedProblem};
use crate::linalg;

pub(super) enum Variant {
    Equality { theta0: DVector<f64> },
    Box { eps: f64 },
    Penalized { lambda: f64 },
}

/// Residual-balancing factors.
const BALANCE_RATIO: f64 = 10.0;
const RHO_SCALE: f64 = 2.0;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e8;
/// Iterations between rho updates, and the cap on updates per solve.
const RHO_INTERVAL: usize = 25;
const RHO_MAX_UPDATES: usize = 20;

/// Linear solve for the `theta` (or `xi`) update, rebuilt whenever rho moves.
enum Factor {
    Empty,
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn new(h: DMatrix<f64>) -> Self {
        if h.is_empty() {
            return Factor::Empty;
        }
        match h.clone().cholesky() {
            Some(c) => Factor::Cholesky(c),
            None => Factor::Lu(h.lu()),
        }
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            Factor::Empty => DVector::zeros(0),
            Factor::Cholesky(c) => c.solve(b),
            Factor::Lu(lu) => lu.solve(b).unwrap_or_else(|| DVector::zeros(b.len())),
        }
    }
}

struct Workspace<'a> {
    problem: &'a LiftedProblem,
    config: &'a SolverConfig,
    variant: &'a Variant,
    a: &'a DMatrix<f64>,
    at: DMatrix<f64>,
    ata: DMatrix<f64>,
    null_basis: DMatrix<f64>,
    lifted: usize,
    factor: Factor,
}

impl<'a> Workspace<'a> {
    fn new(problem: &'a LiftedProblem, config: &'a SolverConfig, variant: &'a Variant) -> Self {
        let a = problem.matrix();
        let at = a.transpose();
        let ata = &at * a;
        let null_basis = match variant {
            Variant::Equality { .. } => linalg::null_space(a, 1e-12),
            _ => DMatrix::zeros(0, 0),
        };
        Self {
            problem,
            config,
            variant,
            a,
            at,
            ata,
            null_basis,
            lifted: problem.lifted_len(),
            factor: Factor::Empty,
        }
    }

    /// Diagonal weights `rho` on the lifted block, `tikhonov_a` on the AR block.
    fn block_weights(&self, rho: f64) -> DVector<f64> {
        DVector::from_fn(self.problem.unknowns(), |i, _| {
            if i < self.lifted {
                rho
            } else {
                self.config.tikhonov_a
            }
        })
    }

    fn refactor(&mut self, rho: f64) {
        let weights = self.block_weights(rho);
        let h = match self.variant {
            Variant::Equality { .. } => {
                let nb = &self.null_basis;
                if nb.ncols() == 0 {
                    DMatrix::zeros(0, 0)
                } else {
                    let weighted = DMatrix::from_diagonal(&weights) * nb;
                    nb.transpose() * weighted
                }
            }
            Variant::Box { .. } => {
                let mut h = &self.ata * rho;
                for i in 0..h.nrows() {
                    h[(i, i)] += weights[i];
                }
                h
            }
            Variant::Penalized { lambda } => {
                let mut h = &self.ata * (2.0 * lambda);
                for i in 0..h.nrows() {
                    h[(i, i)] += weights[i];
                }
                h
            }
        };
        self.factor = Factor::new(h);
    }

    fn lift(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.problem.unknowns());
        out.rows_mut(0, self.lifted).copy_from(v);
        out
    }

    fn theta_update(
        &self,
        rho: f64,
        target: &DVector<f64>,
        eta: &DVector<f64>,
        v: &DVector<f64>,
    ) -> DVector<f64> {
        let rhs = self.problem.rhs();
        match self.variant {
            Variant::Equality { theta0 } => {
                if self.null_basis.ncols() == 0 {
                    return theta0.clone();
                }
                let weights = self.block_weights(rho);
                let g = self.lift(target) * rho - weights.component_mul(theta0);
                let xi = self.factor.solve(&(self.null_basis.transpose() * g));
                theta0 + &self.null_basis * xi
            }
            Variant::Box { .. } => {
                let g = (self.lift(target) + &self.at * (rhs - eta - v)) * rho;
                self.factor.solve(&g)
            }
            Variant::Penalized { lambda } => {
                let g = &self.at * rhs * (2.0 * lambda) + self.lift(target) * rho;
                self.factor.solve(&g)
            }
        }
    }
}

fn to_matrix(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

pub(super) fn solve(
    problem: &LiftedProblem,
    config: &SolverConfig,
    variant: Variant,
) -> Result<LiftedEstimate> {
    let mut ws = Workspace::new(problem, config, &variant);
    let m = problem.basis().dim();
    let n_b = problem.orders().n_b;
    let lifted = ws.lifted;
    let rows = problem.rows();
    let rhs = problem.rhs();

    let mut rho = config.rho;
    let mut rho_updates = 0usize;
    ws.refactor(rho);

    let mut theta = match &variant {
        Variant::Equality { theta0 } => theta0.clone(),
        _ => DVector::zeros(problem.unknowns()),
    };
    let mut z: DVector<f64> = theta.rows(0, lifted).into_owned();
    let mut w = DVector::zeros(lifted);
    let mut eta = DVector::zeros(rows);
    let mut v = DVector::zeros(rows);
    let is_box = matches!(variant, Variant::Box { .. });
    let box_eps = match variant {
        Variant::Box { eps } => eps,
        _ => 0.0,
    };

    let n_constraints = lifted + if is_box { rows } else { 0 };
    let sqrt_cons = (n_constraints as f64).sqrt();
    let sqrt_vars = (problem.unknowns() as f64).sqrt();

    let mut trace = Vec::new();
    let mut status = SolverStatus::MaxIter;
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut eps_pri = 0.0;
    let mut eps_dual = 0.0;
    let mut iterations = 0;

    for iter in 1..=config.max_iter {
        iterations = iter;
        let target = &z - &w;
        theta = ws.theta_update(rho, &target, &eta, &v);
        let p_theta: DVector<f64> = theta.rows(0, lifted).into_owned();
        let a_theta = ws.a * &theta;

        let z_prev = z.clone();
        let zmat = svt(&to_matrix(&(&p_theta + &w), m, n_b), 1.0 / rho);
        z = DVector::from_column_slice(zmat.as_slice());

        let eta_prev = eta.clone();
        if is_box {
            eta = (rhs - &a_theta - &v).map(|e| e.clamp(-box_eps, box_eps));
        }

        let r_lift = &p_theta - &z;
        w += &r_lift;
        let r_eta = &a_theta + &eta - rhs;
        if is_box {
            v += &r_eta;
        }

        let dz = &z - &z_prev;
        primal = (r_lift.norm_squared() + if is_box { r_eta.norm_squared() } else { 0.0 }).sqrt();
        dual = if is_box {
            (ws.lift(&dz) - &ws.at * (&eta - &eta_prev)).norm() * rho
        } else {
            dz.norm() * rho
        };

        let pri_scale = if is_box {
            (p_theta.norm_squared() + a_theta.norm_squared())
                .sqrt()
                .max((z.norm_squared() + eta.norm_squared()).sqrt())
                .max(rhs.norm())
        } else {
            p_theta.norm().max(z.norm())
        };
        let dual_vec = if is_box {
            ws.lift(&w) + &ws.at * &v
        } else {
            ws.lift(&w)
        };
        eps_pri = sqrt_cons * config.tol_abs + config.tol_rel * pri_scale;
        eps_dual = sqrt_vars * config.tol_abs + config.tol_rel * rho * dual_vec.norm();

        let mut objective = linalg::nuclear_norm(&zmat);
        if let Variant::Penalized { lambda } = variant {
            objective += lambda * (rhs - &a_theta).norm_squared();
        }
        // Non-increasing for fixed rho.
        let combined = (rho
            * (primal * primal + dz.norm_squared() + (&eta - &eta_prev).norm_squared()))
        .sqrt();
        trace.push(TraceEntry {
            iteration: iter,
            objective,
            primal_residual: primal,
            dual_residual: dual,
            combined_residual: combined,
        });

        if primal <= eps_pri && dual <= eps_dual {
            status = SolverStatus::Converged;
            break;
        }

        if config.adaptive_rho
            && iter < config.max_iter / 2
            && iter % RHO_INTERVAL == 0
            && rho_updates < RHO_MAX_UPDATES
        {
            let scale = if primal > BALANCE_RATIO * dual && rho < RHO_MAX {
                RHO_SCALE
            } else if dual > BALANCE_RATIO * primal && rho > RHO_MIN {
                1.0 / RHO_SCALE
            } else {
                1.0
            };
            if scale != 1.0 {
                rho *= scale;
                rho_updates += 1;
                w /= scale;
                v /= scale;
                ws.refactor(rho);
            }
        }
    }

    // max |r| >= ||r||_2 / sqrt(rows) >= ||r_ls||_2 / sqrt(rows) for every theta.
    if is_box && status == SolverStatus::MaxIter {
        let ls = linalg::lstsq(problem.matrix(), rhs);
        let floor = problem.residual(&ls.solution).norm() / (rows as f64).sqrt();
        if floor > box_eps * (1.0 + config.tol_rel) + config.tol_abs {
            status = SolverStatus::Infeasible;
        }
    }

    let x = to_matrix(&z, m, n_b);
    let a_hat = match variant {
        Variant::Box { .. } => problem.unpack(&theta).1,
        _ => refit_ar(problem, &x),
    };

    let report = SolverReport {
        status,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        primal_threshold: eps_pri,
        dual_threshold: eps_dual,
        constraint_residual: linalg::max_abs(&problem.residual(&theta)),
        final_rho: rho,
        trace,
    };
    let mut est = assemble_estimate(x, a_hat, problem, report)?;
    if status != SolverStatus::Converged {
        est.warnings.push(format!(
            "solver stopped with status {status:?} after {iterations} iterations"
        ));
    }
    Ok(est)
}

/// Least-squares AR coefficients for a fixed lifted matrix.
fn refit_ar(problem: &LiftedProblem, x: &DMatrix<f64>) -> Vec<f64> {
    let n_a = problem.orders().n_a;
    if n_a == 0 {
        return Vec::new();
    }
    let input = problem.input_block() * DVector::from_column_slice(x.as_slice());
    let target = problem.rhs() - input;
    // The output block multiplies -a.
    let ls = linalg::lstsq(&problem.output_block(), &target);
    ls.solution.iter().map(|v| -v).collect()
}
