use nalgebra::DMatrix;

use crate::linalg;

/// Singular value thresholding: `U max(S - tau, 0) V^T`, the proximal
/// operator of `tau * ||.||_*`.
///
/// Components whose singular value does not exceed `tau` are dropped, so the
/// result is exactly low rank (and exactly zero when every singular value is
/// at most `tau`).
pub fn svt(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    assert!(tau >= 0.0, "threshold must be non-negative");
    if m.is_empty() {
        return m.clone();
    }
    if tau == 0.0 {
        return m.clone();
    }
    let svd = linalg::sorted_svd(m);
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let shrunk = s - tau;
        if shrunk <= 0.0 {
            break;
        }
        out += svd.u.column(k) * svd.v_t.row(k) * shrunk;
    }
    out
}
