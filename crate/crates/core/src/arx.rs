//! ARX model representation, simulation and the classical least-squares fits.
//!
//! Time indices in public APIs follow the 1-based convention
//! `y(1), ..., y(N)`; sample `t` lives at storage index `t - 1`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Structural orders of an ARX model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOrders {
    pub n_a: usize,
    pub n_b: usize,
    pub n_k: usize,
}

impl ModelOrders {
    pub fn new(n_a: usize, n_b: usize, n_k: usize) -> Result<Self> {
        let orders = Self { n_a, n_b, n_k };
        orders.validate()?;
        Ok(orders)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_b == 0 {
            return Err(Error::InvalidArgument("n_b must be at least 1".into()));
        }
        Ok(())
    }

    /// First usable (1-based) time index, `max(n_a, n_k + n_b) + 1`.
    pub fn first_index(&self) -> usize {
        self.n_a.max(self.n_k + self.n_b) + 1
    }

    /// Number of equations `N - n + 1` available from `len` samples.
    pub fn equation_count(&self, len: usize) -> usize {
        (len + 1).saturating_sub(self.first_index())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArxModel {
    pub orders: ModelOrders,
    /// AR coefficients `a_1..a_{n_a}`.
    pub a: Vec<f64>,
    /// Input coefficients `b_1..b_{n_b}`.
    pub b: Vec<f64>,
}

impl ArxModel {
    pub fn new(orders: ModelOrders, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        orders.validate()?;
        if a.len() != orders.n_a || b.len() != orders.n_b {
            return Err(Error::InvalidDimension(format!(
                "coefficient lengths ({}, {}) do not match orders (n_a={}, n_b={})",
                a.len(),
                b.len(),
                orders.n_a,
                orders.n_b
            )));
        }
        Ok(Self { orders, a, b })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSeries {
    pub y: Vec<f64>,
}

impl OutputSeries {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("y({}) is not finite", i + 1)));
        }
        Ok(Self { y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Sample at 1-based time `t`.
    pub fn at(&self, t: usize) -> f64 {
        self.y[t - 1]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            y: self.y.iter().map(|v| v * c).collect(),
        }
    }

    pub(crate) fn check_len(&self, orders: &ModelOrders) -> Result<()> {
        let n = orders.first_index();
        if self.len() < n {
            return Err(Error::InvalidDimension(format!(
                "series has {} samples but the model needs at least n = {}",
                self.len(),
                n
            )));
        }
        Ok(())
    }
}

/// Additive equation-error noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseSpec {
    None,
    /// i.i.d. uniform on `[-eps/2, eps/2]`.
    Uniform {
        eps: f64,
    },
    Gaussian {
        sigma: f64,
    },
}

impl NoiseSpec {
    pub fn parameter(&self) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Uniform { eps } => eps,
            NoiseSpec::Gaussian { sigma } => sigma,
        }
    }

    pub fn with_parameter(&self, p: f64) -> Self {
        match self {
            NoiseSpec::None => NoiseSpec::None,
            NoiseSpec::Uniform { .. } => NoiseSpec::Uniform { eps: p },
            NoiseSpec::Gaussian { .. } => NoiseSpec::Gaussian { sigma: p },
        }
    }

    fn validate(&self) -> Result<()> {
        let p = self.parameter();
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise parameter must be finite and non-negative, got {p}"
            )));
        }
        Ok(())
    }

    /// Draws `len` noise samples; all zeros when the parameter is zero.
    pub fn sample(&self, len: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = match *self {
            NoiseSpec::Uniform { eps } if eps > 0.0 => {
                let dist = Uniform::new_inclusive(-eps / 2.0, eps / 2.0);
                (0..len).map(|_| dist.sample(&mut rng)).collect()
            }
            NoiseSpec::Gaussian { sigma } if sigma > 0.0 => {
                let dist = Normal::new(0.0, sigma).expect("sigma validated");
                (0..len).map(|_| dist.sample(&mut rng)).collect()
            }
            _ => vec![0.0; len],
        };
        Ok(out)
    }
}

/// Runs the ARX recursion for `t = 1..N` with zero pre-sample history.
pub fn simulate(model: &ArxModel, u: &[f64], noise: NoiseSpec, seed: u64) -> Result<OutputSeries> {
    let orders = model.orders;
    let len = u.len();
    if len < orders.first_index() {
        return Err(Error::InvalidDimension(format!(
            "input has {} samples but the model needs at least n = {}",
            len,
            orders.first_index()
        )));
    }
    if let Some(i) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("u({}) is not finite", i + 1)));
    }
    let e = noise.sample(len, seed)?;

    let mut y = vec![0.0; len];
    for i in 0..len {
        let mut acc = e[i];
        for (k, a) in model.a.iter().enumerate() {
            let lag = k + 1;
            if i >= lag {
                acc += a * y[i - lag];
            }
        }
        for (j, b) in model.b.iter().enumerate() {
            let lag = orders.n_k + j + 1;
            if i >= lag {
                acc += b * u[i - lag];
            }
        }
        y[i] = acc;
    }
    Ok(OutputSeries { y })
}

/// Regression matrix of past outputs: row for time `t = start..N` holds
/// `y(t-1), ..., y(t-n_a)`.
pub(crate) fn output_lag_matrix(y: &OutputSeries, n_a: usize, start: usize) -> DMatrix<f64> {
    let rows = (y.len() + 1).saturating_sub(start);
    DMatrix::from_fn(rows, n_a, |r, k| y.at(start + r - (k + 1)))
}

/// Result of the pure autoregressive least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ArFit {
    pub a_hat: Vec<f64>,
    /// Residuals for `t = start..N`.
    pub residuals: Vec<f64>,
    pub start: usize,
    pub rank_deficient: bool,
}

/// Fits `y(t) = sum_k a_k y(t-k)` over the window `t = start..N`.
///
/// `start` must be at least `n_a + 1`; pass the full problem's `n` to align
/// the residual window with the lifted constraints.
pub fn ar_least_squares(y: &OutputSeries, n_a: usize, start: usize) -> Result<ArFit> {
    if start < n_a + 1 || start < 1 {
        return Err(Error::InvalidArgument(format!(
            "start index {start} is below n_a + 1 = {}",
            n_a + 1
        )));
    }
    if y.len() < start {
        return Err(Error::InvalidDimension(format!(
            "series has {} samples, window starts at {start}",
            y.len()
        )));
    }
    let rows = y.len() + 1 - start;
    if rows < n_a {
        return Err(Error::InvalidDimension(format!(
            "{rows} equations are not enough for {n_a} AR coefficients"
        )));
    }
    let phi = output_lag_matrix(y, n_a, start);
    let target = DVector::from_iterator(rows, (start..=y.len()).map(|t| y.at(t)));
    let ls = linalg::lstsq(&phi, &target);
    let residuals = &target - &phi * &ls.solution;
    if ls.rank_deficient {
        log::warn!("AR regression matrix is rank deficient; using minimum-norm solution");
    }
    Ok(ArFit {
        a_hat: ls.solution.iter().copied().collect(),
        residuals: residuals.iter().copied().collect(),
        start,
        rank_deficient: ls.rank_deficient,
    })
}

/// Known-input least-squares fit of a full ARX model.
#[derive(Debug, Clone, PartialEq)]
pub struct ArxFit {
    pub model: ArxModel,
    pub rank_deficient: bool,
}

pub fn arx_least_squares(y: &OutputSeries, u: &[f64], orders: ModelOrders) -> Result<ArxFit> {
    orders.validate()?;
    if u.len() != y.len() {
        return Err(Error::InvalidDimension(format!(
            "y has {} samples, u has {}",
            y.len(),
            u.len()
        )));
    }
    y.check_len(&orders)?;
    let n = orders.first_index();
    let rows = orders.equation_count(y.len());
    let params = orders.n_a + orders.n_b;
    if rows < params {
        return Err(Error::InvalidDimension(format!(
            "{rows} equations are not enough for {params} coefficients"
        )));
    }
    let phi = DMatrix::from_fn(rows, params, |r, c| {
        let t = n + r;
        if c < orders.n_a {
            y.at(t - (c + 1))
        } else {
            let j = c - orders.n_a + 1;
            u[t - orders.n_k - j - 1]
        }
    });
    let target = DVector::from_iterator(rows, (n..=y.len()).map(|t| y.at(t)));
    let ls = linalg::lstsq(&phi, &target);
    if ls.rank_deficient {
        log::warn!("ARX regression matrix is rank deficient; using minimum-norm solution");
    }
    let theta = ls.solution;
    let model = ArxModel {
        orders,
        a: theta.rows(0, orders.n_a).iter().copied().collect(),
        b: theta.rows(orders.n_a, orders.n_b).iter().copied().collect(),
    };
    Ok(ArxFit {
        model,
        rank_deficient: ls.rank_deficient,
    })
}

/// Equation error `y(t) - sum a_k y(t-k) - sum b_j u(t-n_k-j)` for `t = n..N`.
pub fn residuals(model: &ArxModel, y: &OutputSeries, u: &[f64]) -> Result<Vec<f64>> {
    let orders = model.orders;
    if u.len() != y.len() {
        return Err(Error::InvalidDimension(format!(
            "y has {} samples, u has {}",
            y.len(),
            u.len()
        )));
    }
    if model.a.len() != orders.n_a || model.b.len() != orders.n_b {
        return Err(Error::InvalidDimension(
            "coefficient lengths do not match orders".into(),
        ));
    }
    y.check_len(&orders)?;
    let n = orders.first_index();
    Ok((n..=y.len())
        .map(|t| {
            let ar: f64 = model
                .a
                .iter()
                .enumerate()
                .map(|(k, a)| a * y.at(t - k - 1))
                .sum();
            let input: f64 = model
                .b
                .iter()
                .enumerate()
                .map(|(j, b)| b * u[t - orders.n_k - j - 2])
                .sum();
            y.at(t) - ar - input
        })
        .collect())
}
