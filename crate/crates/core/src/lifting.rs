//! The lifted linear system.
//!
//! Replacing the bilinear products `x b^T` by one matrix `X` (m x n_b) makes
//! every ARX equation linear in the unknown vector
//!
//! ```text
//! theta = [X(:,1); X(:,2); ...; X(:,n_b); -a]
//! ```
//!
//! Row `t = n..N` of `A` holds `d_{t-n_k-j}` in column block `j` and the
//! negated output lags `-y(t-1), ..., -y(t-n_a)` in the trailing block, so that
//! `A theta = [y(n), ..., y(N)]^T` is exactly the ARX relation.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::arx::{ModelOrders, OutputSeries};
use crate::error::{Error, Result};
use crate::linalg;
use crate::solver::SolverReport;
use crate::subspace::SubspaceBasis;

#[derive(Debug, Clone)]
pub struct LiftedProblem {
    y: OutputSeries,
    basis: SubspaceBasis,
    orders: ModelOrders,
    a: DMatrix<f64>,
    rhs: DVector<f64>,
}

pub fn build_lifted_problem(
    y: &OutputSeries,
    basis: &SubspaceBasis,
    orders: ModelOrders,
) -> Result<LiftedProblem> {
    orders.validate()?;
    if basis.samples() != y.len() {
        return Err(Error::InvalidDimension(format!(
            "basis has {} rows but the series has {} samples",
            basis.samples(),
            y.len()
        )));
    }
    y.check_len(&orders)?;
    let n = orders.first_index();
    let rows = orders.equation_count(y.len());
    let m = basis.dim();
    let input_cols = m * orders.n_b;
    let d = basis.matrix();

    let mut a = DMatrix::zeros(rows, input_cols + orders.n_a);
    for r in 0..rows {
        let t = n + r;
        for j in 1..=orders.n_b {
            let src = t - orders.n_k - j - 1;
            for i in 0..m {
                a[(r, (j - 1) * m + i)] = d[(src, i)];
            }
        }
        for k in 1..=orders.n_a {
            a[(r, input_cols + k - 1)] = -y.at(t - k);
        }
    }
    let rhs = DVector::from_iterator(rows, (n..=y.len()).map(|t| y.at(t)));
    Ok(LiftedProblem {
        y: y.clone(),
        basis: basis.clone(),
        orders,
        a,
        rhs,
    })
}

impl LiftedProblem {
    pub fn series(&self) -> &OutputSeries {
        &self.y
    }

    pub fn basis(&self) -> &SubspaceBasis {
        &self.basis
    }

    pub fn orders(&self) -> ModelOrders {
        self.orders
    }

    /// The constraint matrix `A`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// `[y(n), ..., y(N)]`.
    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    /// Number of lifted input unknowns `m * n_b`.
    pub fn lifted_len(&self) -> usize {
        self.basis.dim() * self.orders.n_b
    }

    /// Length of `theta`.
    pub fn unknowns(&self) -> usize {
        self.a.ncols()
    }

    /// Columns of `A` multiplying `vec(X)`.
    pub fn input_block(&self) -> DMatrix<f64> {
        self.a.columns(0, self.lifted_len()).into_owned()
    }

    /// Columns of `A` multiplying `-a`.
    pub fn output_block(&self) -> DMatrix<f64> {
        self.a
            .columns(self.lifted_len(), self.orders.n_a)
            .into_owned()
    }

    /// Packs `[vec(X); -a]`.
    pub fn pack(&self, x: &DMatrix<f64>, a_coef: &[f64]) -> Result<DVector<f64>> {
        let m = self.basis.dim();
        if x.shape() != (m, self.orders.n_b) || a_coef.len() != self.orders.n_a {
            return Err(Error::InvalidDimension(format!(
                "expected X {}x{} and {} AR coefficients, got X {}x{} and {}",
                m,
                self.orders.n_b,
                self.orders.n_a,
                x.nrows(),
                x.ncols(),
                a_coef.len()
            )));
        }
        let mut theta = DVector::zeros(self.unknowns());
        theta
            .rows_mut(0, self.lifted_len())
            .copy_from_slice(x.as_slice());
        for (k, a) in a_coef.iter().enumerate() {
            theta[self.lifted_len() + k] = -a;
        }
        Ok(theta)
    }

    /// Splits `theta` back into `X` and `a`.
    pub fn unpack(&self, theta: &DVector<f64>) -> (DMatrix<f64>, Vec<f64>) {
        let m = self.basis.dim();
        let x =
            DMatrix::from_column_slice(m, self.orders.n_b, &theta.as_slice()[..self.lifted_len()]);
        let a = theta.as_slice()[self.lifted_len()..]
            .iter()
            .map(|v| -v)
            .collect();
        (x, a)
    }

    /// `rhs - A theta`.
    pub fn residual(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.rhs - &self.a * theta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub full_column_rank: bool,
    pub rank: usize,
    pub rows: usize,
    pub columns: usize,
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
    pub condition: f64,
}

/// Tests whether `A` has full column rank, in which case the noise-free
/// problem is solved uniquely by the linear system alone.
pub fn check_recoverability(problem: &LiftedProblem) -> RecoveryReport {
    let a = problem.matrix();
    let (rows, columns) = a.shape();
    let svd = linalg::sorted_svd(a);
    let s = &svd.singular_values;
    let largest = s.iter().cloned().fold(0.0, f64::max);
    let threshold = linalg::rank_threshold(rows, columns, largest, 1e-12);
    let rank = if largest == 0.0 {
        0
    } else {
        linalg::numerical_rank(s, threshold)
    };
    let smallest = if rows < columns {
        0.0
    } else {
        s.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let condition = if smallest > 0.0 {
        largest / smallest
    } else {
        f64::INFINITY
    };
    RecoveryReport {
        full_column_rank: rank == columns,
        rank,
        rows,
        columns,
        smallest_singular_value: smallest,
        largest_singular_value: largest,
        condition,
    }
}

/// Rank-1 factors of a lifted matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Factors {
    pub x_hat: DVector<f64>,
    /// Unit norm, first nonzero entry positive.
    pub b_hat: DVector<f64>,
    /// `sigma_2 / sigma_1`, zero for rank-0 and single-column matrices.
    pub rank_gap: f64,
    pub zero_matrix: bool,
}

pub fn extract_rank1(x: &DMatrix<f64>) -> Rank1Factors {
    let (m, n_b) = x.shape();
    let zero = || Rank1Factors {
        x_hat: DVector::zeros(m),
        b_hat: DVector::zeros(n_b),
        rank_gap: 0.0,
        zero_matrix: true,
    };
    if x.is_empty() || x.iter().all(|&v| v == 0.0) {
        return zero();
    }
    let svd = linalg::sorted_svd(x);
    let s1 = svd.singular_values[0];
    if s1 == 0.0 {
        return zero();
    }
    let s2 = svd.singular_values.get(1).copied().unwrap_or(0.0);
    let mut b_hat: DVector<f64> = svd.v_t.row(0).transpose();
    let mut x_hat: DVector<f64> = svd.u.column(0) * s1;
    let sign = b_hat
        .iter()
        .find(|v| v.abs() > 1e-12)
        .map(|v| v.signum())
        .unwrap_or(1.0);
    b_hat *= sign;
    x_hat *= sign;
    Rank1Factors {
        x_hat,
        b_hat,
        rank_gap: s2 / s1,
        zero_matrix: false,
    }
}

/// `min_s ||v - s v_hat|| / ||v||`, i.e. the sine of the angle between the
/// two vectors. Lies in `[0, 1]`; equals 1 when `v_hat` is zero.
pub fn scale_invariant_error(v: &[f64], v_hat: &[f64]) -> Result<f64> {
    if v.len() != v_hat.len() {
        return Err(Error::InvalidDimension(format!(
            "vectors have lengths {} and {}",
            v.len(),
            v_hat.len()
        )));
    }
    let vv: f64 = v.iter().map(|x| x * x).sum();
    if vv == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    let hh: f64 = v_hat.iter().map(|x| x * x).sum();
    if hh == 0.0 {
        return Ok(1.0);
    }
    let vh: f64 = v.iter().zip(v_hat).map(|(a, b)| a * b).sum();
    let cos2 = (vh * vh / (vv * hh)).min(1.0);
    Ok((1.0 - cos2).max(0.0).sqrt())
}

/// Output of any of the lifted solvers.
#[derive(Debug, Clone)]
pub struct LiftedEstimate {
    pub x_matrix: DMatrix<f64>,
    pub a_hat: Vec<f64>,
    pub x_hat: DVector<f64>,
    pub b_hat: DVector<f64>,
    pub u_hat: DVector<f64>,
    /// `rhs - A theta` for `t = n..N`.
    pub eta: DVector<f64>,
    pub rank_gap: f64,
    pub zero_matrix: bool,
    pub lambda: Option<f64>,
    pub warnings: Vec<String>,
    pub report: SolverReport,
}

impl LiftedEstimate {
    pub fn theta(&self, problem: &LiftedProblem) -> DVector<f64> {
        problem
            .pack(&self.x_matrix, &self.a_hat)
            .expect("estimate dimensions match its problem")
    }

    pub fn summary(&self) -> EstimateSummary {
        EstimateSummary {
            a: self.a_hat.clone(),
            b: self.b_hat.iter().copied().collect(),
            x: self.x_hat.iter().copied().collect(),
            u: self.u_hat.iter().copied().collect(),
            lifted: self
                .x_matrix
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            rank_gap: self.rank_gap,
            zero_matrix: self.zero_matrix,
            eta_norm: self.eta.norm(),
            eta_max: linalg::max_abs(&self.eta),
            lambda_used: self.lambda,
            iterations: self.report.iterations,
            status: self.report.status,
            primal_residual: self.report.primal_residual,
            dual_residual: self.report.dual_residual,
            warnings: self.warnings.clone(),
        }
    }
}

/// JSON view of a [`LiftedEstimate`].
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct EstimateSummary {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// Rows of the lifted matrix `X`.
    pub lifted: Vec<Vec<f64>>,
    pub rank_gap: f64,
    pub zero_matrix: bool,
    pub eta_norm: f64,
    pub eta_max: f64,
    pub lambda_used: Option<f64>,
    pub iterations: usize,
    pub status: crate::solver::SolverStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub warnings: Vec<String>,
}

pub fn assemble_estimate(
    x: DMatrix<f64>,
    a_hat: Vec<f64>,
    problem: &LiftedProblem,
    report: SolverReport,
) -> Result<LiftedEstimate> {
    let theta = problem.pack(&x, &a_hat)?;
    let eta = problem.residual(&theta);
    let factors = extract_rank1(&x);
    let u_hat = problem.basis().matrix() * &factors.x_hat;
    let mut warnings = Vec::new();
    if factors.zero_matrix {
        warnings.push("lifted matrix is zero; input and b are not identified".to_string());
    }
    Ok(LiftedEstimate {
        x_matrix: x,
        a_hat,
        x_hat: factors.x_hat,
        b_hat: factors.b_hat,
        u_hat,
        eta,
        rank_gap: factors.rank_gap,
        zero_matrix: factors.zero_matrix,
        lambda: None,
        warnings,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arx::{simulate, ArxModel, NoiseSpec};
    use crate::subspace::{gaussian_basis, zoh_basis};

    #[test]
    fn paper_orders_give_expected_shape() {
        let orders = ModelOrders::new(1, 3, 0).unwrap();
        let basis = zoh_basis(60, 6).unwrap();
        let y = OutputSeries::new(vec![1.0; 60]).unwrap();
        let p = build_lifted_problem(&y, &basis, orders).unwrap();
        assert_eq!(orders.first_index(), 4);
        assert_eq!(p.matrix().shape(), (57, 31));
    }

    #[test]
    fn single_block_input_columns_are_constant() {
        let orders = ModelOrders::new(1, 2, 1).unwrap();
        let basis = zoh_basis(10, 10).unwrap();
        let y = OutputSeries::new((1..=10).map(|v| v as f64).collect()).unwrap();
        let p = build_lifted_problem(&y, &basis, orders).unwrap();
        for r in 0..p.rows() {
            assert_eq!(p.matrix()[(r, 0)], 1.0);
            assert_eq!(p.matrix()[(r, 1)], 1.0);
        }
    }

    #[test]
    fn true_theta_satisfies_constraints() {
        let orders = ModelOrders::new(1, 3, 0).unwrap();
        let model = ArxModel::new(orders, vec![-0.3], vec![3.0, 2.0, 1.0]).unwrap();
        let basis = gaussian_basis(40, 5, 3).unwrap();
        let x = [0.3, -1.2, 0.8, 2.0, -0.5];
        let u = basis.synthesize(&x).unwrap();
        let y = simulate(&model, &u, NoiseSpec::None, 0).unwrap();
        let p = build_lifted_problem(&y, &basis, orders).unwrap();
        let lifted = DMatrix::from_column_slice(5, 1, &x) * DMatrix::from_row_slice(1, 3, &model.b);
        let theta = p.pack(&lifted, &model.a).unwrap();
        assert!(linalg::max_abs(&p.residual(&theta)) <= 1e-10);
        let (x_back, a_back) = p.unpack(&theta);
        assert_eq!(x_back, lifted);
        assert_eq!(a_back, model.a);
    }

    #[test]
    fn extract_exact_outer_product() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 6.0, 8.0]);
        let f = extract_rank1(&x);
        assert!((f.b_hat[0] - 0.6).abs() < 1e-14);
        assert!((f.b_hat[1] - 0.8).abs() < 1e-14);
        assert!((f.x_hat[0] - 5.0).abs() < 1e-13);
        assert!((f.x_hat[1] - 10.0).abs() < 1e-13);
        assert!(f.rank_gap < 1e-15);
    }

    #[test]
    fn extract_identity_is_maximally_ambiguous() {
        let f = extract_rank1(&DMatrix::identity(2, 2));
        assert!((f.rank_gap - 1.0).abs() < 1e-15);
        assert!((f.b_hat.norm() - 1.0).abs() < 1e-14);
        assert!((f.x_hat.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn extract_zero_matrix() {
        let f = extract_rank1(&DMatrix::zeros(3, 2));
        assert!(f.zero_matrix);
        assert_eq!(f.rank_gap, 0.0);
        assert_eq!(f.x_hat, DVector::zeros(3));
    }

    #[test]
    fn extract_perturbed_rank1() {
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let b = DVector::from_vec(vec![-0.4, 1.0, 2.0]);
        let pert = DMatrix::from_fn(4, 3, |r, c| ((r * 3 + c) as f64).sin());
        let m = &x * b.transpose() + pert * 1e-8;
        let f = extract_rank1(&m);
        assert!(f.rank_gap <= 1e-6);
        let ex = scale_invariant_error(x.as_slice(), f.x_hat.as_slice()).unwrap();
        let eb = scale_invariant_error(b.as_slice(), f.b_hat.as_slice()).unwrap();
        assert!(ex <= 1e-6 && eb <= 1e-6);
        // b's first entry is negative, so normalization flips the sign.
        assert!(f.b_hat[0] > 0.0);
    }

    #[test]
    fn scale_invariant_error_cases() {
        assert_eq!(
            scale_invariant_error(&[1.0, 2.0], &[-3.0, -6.0]).unwrap(),
            0.0
        );
        assert!((scale_invariant_error(&[1.0, 0.0], &[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        let e = scale_invariant_error(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((e - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(scale_invariant_error(&[1.0], &[0.0]).unwrap(), 1.0);
        assert!(matches!(
            scale_invariant_error(&[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::UndefinedMetric)
        ));
    }

    #[test]
    fn duplicated_column_is_not_full_rank() {
        let orders = ModelOrders::new(0, 2, 0).unwrap();
        // Identical basis columns duplicate columns of A.
        let d = DMatrix::from_fn(20, 2, |r, _| ((r * r) % 7) as f64);
        let basis = SubspaceBasis::new(d, crate::subspace::Provenance::Dft).unwrap();
        let y = OutputSeries::new((0..20).map(|v| v as f64).collect()).unwrap();
        let p = build_lifted_problem(&y, &basis, orders).unwrap();
        let report = check_recoverability(&p);
        assert!(!report.full_column_rank);
        assert!(report.rank < report.columns);
    }

    #[test]
    fn short_problem_is_never_full_rank() {
        let orders = ModelOrders::new(1, 3, 0).unwrap();
        let basis = gaussian_basis(12, 6, 1).unwrap();
        let y = OutputSeries::new((0..12).map(|v| (v as f64).sin()).collect()).unwrap();
        let p = build_lifted_problem(&y, &basis, orders).unwrap();
        let report = check_recoverability(&p);
        assert!(p.rows() < p.unknowns());
        assert!(!report.full_column_rank);
        assert_eq!(report.smallest_singular_value, 0.0);
    }
}
