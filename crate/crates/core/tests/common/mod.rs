#![allow(dead_code)]

use bilift_core::arx::{simulate, ArxModel, ModelOrders, NoiseSpec, OutputSeries};
use bilift_core::lifting::{build_lifted_problem, LiftedProblem};
use bilift_core::subspace::{gaussian_basis, zoh_basis, SubspaceBasis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn paper_model() -> ArxModel {
    ArxModel::new(
        ModelOrders::new(1, 3, 0).unwrap(),
        vec![-0.3],
        vec![3.0, 2.0, 1.0],
    )
    .unwrap()
}

pub fn gaussian_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub struct Instance {
    pub model: ArxModel,
    pub basis: SubspaceBasis,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub y: OutputSeries,
    pub problem: LiftedProblem,
}

pub fn instance(model: ArxModel, basis: SubspaceBasis, eps: f64, seed: u64) -> Instance {
    let x = gaussian_vec(basis.dim(), seed);
    let u = basis.synthesize(&x).unwrap();
    let noise = if eps > 0.0 {
        NoiseSpec::Uniform { eps }
    } else {
        NoiseSpec::None
    };
    let y = simulate(&model, &u, noise, seed.wrapping_add(1000)).unwrap();
    let problem = build_lifted_problem(&y, &basis, model.orders).unwrap();
    Instance {
        model,
        basis,
        x,
        u,
        y,
        problem,
    }
}

pub fn gaussian_instance(eps: f64, seed: u64) -> Instance {
    instance(
        paper_model(),
        gaussian_basis(60, 10, seed + 500).unwrap(),
        eps,
        seed,
    )
}

pub fn zoh_instance(eps: f64, seed: u64) -> Instance {
    instance(paper_model(), zoh_basis(60, 6).unwrap(), eps, seed)
}

/// Residual of the lifted ARX relation evaluated term by term, without `A`.
pub fn direct_residual(
    y: &OutputSeries,
    basis: &SubspaceBasis,
    orders: ModelOrders,
    x: &nalgebra::DMatrix<f64>,
    a: &[f64],
) -> Vec<f64> {
    let dx = basis.matrix() * x;
    let n = orders.first_index();
    (n..=y.len())
        .map(|t| {
            let mut r = y.y[t - 1];
            for (k, ak) in a.iter().enumerate() {
                r -= ak * y.y[t - 1 - (k + 1)];
            }
            for j in 1..=orders.n_b {
                r -= dx[(t - orders.n_k - j - 1, j - 1)];
            }
            r
        })
        .collect()
}
