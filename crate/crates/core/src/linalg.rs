//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Thin SVD with singular values sorted in descending order.
///
/// Columns of `u` and rows of `v_t` are permuted to match.
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

/// Reconstruction tolerance, relative to the largest entry, for accepting
/// the bidiagonal QR result.
const SVD_CHECK_REL: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;

/// The bidiagonal QR SVD is tried first; if its factors do not reproduce
/// `m`, a one-sided Jacobi SVD is used instead.
pub fn sorted_svd(m: &DMatrix<f64>) -> SortedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested u");
    let v_t = svd.v_t.expect("requested v_t");
    let s = svd.singular_values;
    let recon = &u * DMatrix::from_diagonal(&s) * &v_t;
    let scale = m.amax();
    let (u, s, v_t) = if (recon - m).amax() <= SVD_CHECK_REL * scale.max(f64::MIN_POSITIVE) {
        (u, s, v_t)
    } else {
        log::debug!(
            "svd reconstruction check failed on {}x{}; using Jacobi",
            m.nrows(),
            m.ncols()
        );
        jacobi_svd(m)
    };
    sort_svd(u, s, v_t)
}

fn sort_svd(u: DMatrix<f64>, s: DVector<f64>, v_t: DMatrix<f64>) -> SortedSvd {
    let k = s.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));

    let mut u_sorted = DMatrix::zeros(u.nrows(), k);
    let mut vt_sorted = DMatrix::zeros(k, v_t.ncols());
    let mut s_sorted = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        vt_sorted.set_row(dst, &v_t.row(src));
        s_sorted[dst] = s[src];
    }
    SortedSvd {
        u: u_sorted,
        singular_values: s_sorted,
        v_t: vt_sorted,
    }
}

/// One-sided (Hestenes) Jacobi SVD, thin, unsorted.
fn jacobi_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    if m.nrows() < m.ncols() {
        let (u, s, v_t) = jacobi_svd(&m.transpose());
        return (v_t.transpose(), s, u.transpose());
    }
    let (rows, cols) = m.shape();
    let mut w = m.clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for mat in [&mut w, &mut v] {
                    for r in 0..mat.nrows() {
                        let (a, b) = (mat[(r, p)], mat[(r, q)]);
                        mat[(r, p)] = c * a - sn * b;
                        mat[(r, q)] = sn * a + c * b;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s = DVector::from_fn(cols, |k, _| w.column(k).norm());
    let smax = s.max();
    let mut u = DMatrix::zeros(rows, cols);
    let mut missing = Vec::new();
    for k in 0..cols {
        if s[k] > f64::EPSILON * smax * rows as f64 && s[k] > 0.0 {
            u.set_column(k, &(w.column(k) / s[k]));
        } else {
            missing.push(k);
        }
    }
    // Complete U for (numerically) zero singular values by Gram-Schmidt on unit vectors.
    let mut e = 0;
    for k in missing {
        while e < rows {
            let mut cand = DVector::zeros(rows);
            cand[e] = 1.0;
            e += 1;
            for _ in 0..2 {
                for j in 0..cols {
                    let proj = u.column(j).dot(&cand);
                    cand -= u.column(j) * proj;
                }
            }
            let n = cand.norm();
            if n > 1e-8 {
                u.set_column(k, &(cand / n));
                break;
            }
        }
    }
    (u, s, v.transpose())
}

/// Rank cutoff `max(rows, cols) * sigma_1 * rel`.
pub fn rank_threshold(rows: usize, cols: usize, sigma_max: f64, rel: f64) -> f64 {
    rows.max(cols) as f64 * sigma_max * rel
}

pub fn numerical_rank(singular_values: &DVector<f64>, threshold: f64) -> usize {
    singular_values.iter().filter(|&&s| s > threshold).count()
}

/// Minimum-norm least-squares solution of `a x = b`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: DVector<f64>,
    pub rank: usize,
    pub rank_deficient: bool,
}

pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> LeastSquares {
    let cols = a.ncols();
    if cols == 0 {
        return LeastSquares {
            solution: DVector::zeros(0),
            rank: 0,
            rank_deficient: false,
        };
    }
    let svd = sorted_svd(a);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = rank_threshold(a.nrows(), cols, sigma_max, 1e-12);
    let rank = numerical_rank(&svd.singular_values, tol);

    let utb = svd.u.transpose() * b;
    let mut coeffs = DVector::zeros(svd.singular_values.len());
    for i in 0..rank {
        coeffs[i] = utb[i] / svd.singular_values[i];
    }
    LeastSquares {
        solution: svd.v_t.transpose() * coeffs,
        rank,
        rank_deficient: rank < cols,
    }
}

/// Orthonormal basis of the null space of `a`, one basis vector per column.
pub fn null_space(a: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Pad short matrices so the thin SVD exposes the full right singular basis.
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = sorted_svd(&padded);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = rank_threshold(rows, cols, sigma_max, rel);
    let rank = if sigma_max == 0.0 {
        0
    } else {
        numerical_rank(&svd.singular_values, tol)
    };
    let nullity = cols - rank;
    let mut basis = DMatrix::zeros(cols, nullity);
    for k in 0..nullity {
        basis.set_column(k, &svd.v_t.row(rank + k).transpose());
    }
    basis
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    sorted_svd(m).singular_values[0]
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    sorted_svd(m).singular_values.iter().sum()
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}
