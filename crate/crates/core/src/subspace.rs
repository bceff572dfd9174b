//! Known input subspaces `u = D x`.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a basis was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Zoh { hold: usize },
    Dft,
    Gaussian { seed: u64 },
    File { path: PathBuf },
}

/// An `N x m` basis matrix with `m <= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    d: DMatrix<f64>,
    provenance: Provenance,
}

impl SubspaceBasis {
    pub fn new(d: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        let (n, m) = d.shape();
        if n == 0 || m == 0 {
            return Err(Error::InvalidDimension(format!("basis is {n}x{m}")));
        }
        if m > n {
            return Err(Error::InvalidDimension(format!(
                "basis has m = {m} columns but only N = {n} rows"
            )));
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("basis has non-finite entries".into()));
        }
        Ok(Self { d, provenance })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Number of samples `N`.
    pub fn samples(&self) -> usize {
        self.d.nrows()
    }

    /// Subspace dimension `m`.
    pub fn dim(&self) -> usize {
        self.d.ncols()
    }

    pub fn synthesize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::InvalidDimension(format!(
                "x has length {}, basis has {} columns",
                x.len(),
                self.dim()
            )));
        }
        let u = &self.d * DVector::from_column_slice(x);
        Ok(u.iter().copied().collect())
    }
}

/// Zero-order-hold basis: column `j` is one on the `j`-th block of `hold`
/// consecutive samples. A trailing short block is kept when `hold` does not
/// divide `n`.
pub fn zoh_basis(n: usize, hold: usize) -> Result<SubspaceBasis> {
    if n == 0 || hold == 0 {
        return Err(Error::InvalidArgument(format!(
            "zoh basis needs N >= 1 and hold >= 1 (got N={n}, hold={hold})"
        )));
    }
    let m = n.div_ceil(hold);
    let d = DMatrix::from_fn(n, m, |r, c| if r / hold == c { 1.0 } else { 0.0 });
    SubspaceBasis::new(d, Provenance::Zoh { hold })
}

/// First `m` vectors of the real orthonormal trigonometric basis:
/// the constant vector, then `cos`/`sin` pairs of increasing frequency.
pub fn dft_basis(n: usize, m: usize) -> Result<SubspaceBasis> {
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "dft basis needs 1 <= m <= N (got N={n}, m={m})"
        )));
    }
    let nf = n as f64;
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(m);
    columns.push(DVector::from_element(n, 1.0 / nf.sqrt()));
    let mut k = 1;
    while columns.len() < m {
        let omega = 2.0 * std::f64::consts::PI * k as f64 / nf;
        if 2 * k == n {
            // Nyquist: the cosine is (-1)^t and the sine vanishes.
            columns.push(DVector::from_fn(n, |r, _| {
                (omega * (r + 1) as f64).cos() / nf.sqrt()
            }));
        } else {
            let scale = (2.0 / nf).sqrt();
            columns.push(DVector::from_fn(n, |r, _| {
                scale * (omega * (r + 1) as f64).cos()
            }));
            if columns.len() < m {
                columns.push(DVector::from_fn(n, |r, _| {
                    scale * (omega * (r + 1) as f64).sin()
                }));
            }
        }
        k += 1;
    }
    SubspaceBasis::new(DMatrix::from_columns(&columns), Provenance::Dft)
}

/// i.i.d. standard normal entries, row-major draw order.
pub fn gaussian_basis(n: usize, m: usize, seed: u64) -> Result<SubspaceBasis> {
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "gaussian basis needs 1 <= m <= N (got N={n}, m={m})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..n * m)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    SubspaceBasis::new(
        DMatrix::from_row_slice(n, m, &values),
        Provenance::Gaussian { seed },
    )
}

/// Reads a header-less CSV with `N` rows and `m` columns.
pub fn load_basis(path: impl AsRef<Path>) -> Result<SubspaceBasis> {
    let path = path.as_ref();
    let d = crate::io::read_matrix_csv(path)?;
    if d.ncols() > d.nrows() {
        return Err(Error::Format {
            row: d.nrows(),
            column: d.ncols(),
            message: format!(
                "basis has m = {} columns but only N = {} rows",
                d.ncols(),
                d.nrows()
            ),
        });
    }
    SubspaceBasis::new(
        d,
        Provenance::File {
            path: path.to_path_buf(),
        },
    )
}

pub fn save_basis(basis: &SubspaceBasis, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_matrix_csv(basis.matrix(), path)
}
