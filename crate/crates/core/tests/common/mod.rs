//! Independent reference computations shared by the integration tests and
//! the acceptance report.
#![allow(dead_code)]

use compound_bo::gp::{KernelHyperparams, ScalingSpec};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn unit_scaling(d: usize) -> ScalingSpec<f64> {
    ScalingSpec::new(vec![0.0; d], vec![1.0; d], 0.0, 1.0).unwrap()
}

/// A random GP problem with `n ≤ 20` training points in `d ≤ 11`
/// dimensions and up to six query points.
pub struct Instance {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub q: Array2<f64>,
    pub hp: KernelHyperparams<f64>,
}

pub fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(1..=20);
    let d = rng.random_range(1..=11);
    let m = rng.random_range(1..=6);
    let x = Array2::from_shape_fn((n, d), |_| rng.random::<f64>());
    let y = Array1::from_shape_fn(n, |_| rng.sample::<f64, _>(StandardNormal));
    let q = Array2::from_shape_fn((m, d), |_| rng.random::<f64>());
    let lengthscales = (0..d).map(|_| 10f64.powf(rng.random_range(-0.7..0.5))).collect();
    let hp = KernelHyperparams::new(
        lengthscales,
        10f64.powf(rng.random_range(-0.5..0.5)),
        10f64.powf(rng.random_range(-3.0..-1.0)),
    )
    .unwrap();
    Instance { x, y, q, hp }
}

fn se(hp: &KernelHyperparams<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b.iter())
        .zip(&hp.lengthscales)
        .map(|((u, v), l)| ((u - v) / l).powi(2))
        .sum();
    hp.signal_variance * (-0.5 * r2).exp()
}

/// Posterior by explicit inversion of the noisy Gram matrix.
pub fn dense_posterior(inst: &Instance) -> (DVector<f64>, DMatrix<f64>) {
    let (n, m) = (inst.x.nrows(), inst.q.nrows());
    let k = DMatrix::from_fn(n, n, |i, j| {
        se(&inst.hp, inst.x.row(i), inst.x.row(j)) + if i == j { inst.hp.noise_variance } else { 0.0 }
    });
    let kinv = k.try_inverse().expect("positive definite");
    let ks = DMatrix::from_fn(n, m, |i, j| se(&inst.hp, inst.x.row(i), inst.q.row(j)));
    let kss = DMatrix::from_fn(m, m, |i, j| se(&inst.hp, inst.q.row(i), inst.q.row(j)));
    let y = DVector::from_iterator(n, inst.y.iter().copied());
    let mean = ks.transpose() * &kinv * y;
    let cov = kss - ks.transpose() * &kinv * &ks;
    (mean, cov)
}

pub const EI_SAMPLES: usize = 10_000_000;

/// `(mean, std, incumbent)` triples; `(0, 1, 8)` is the `z = −8` tail case.
pub const EI_CASES: [(f64, f64, f64); 10] = [
    (0.0, 1.0, 0.0),
    (1.0, 1.0, 0.0),
    (0.0, 1.0, 1.0),
    (2.0, 0.5, 0.0),
    (0.0, 2.0, 3.0),
    (5.0, 0.1, 5.3),
    (0.0, 1.0, 5.0),
    (0.0, 1.0, 8.0),
    (10.0, 3.0, -5.0),
    (-1.0, 0.01, -1.02),
];

/// Monte Carlo estimate of `E[max(f − τ, 0)]` and its standard error. For
/// deep-tail cases the draws come from `N(τ + σ, σ²)` with likelihood-ratio
/// weights.
pub fn ei_mc(mean: f64, std: f64, incumbent: f64, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z0 = (mean - incumbent) / std;
    let shift = if z0 < -3.0 { incumbent + std - mean } else { 0.0 };
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..EI_SAMPLES {
        let e: f64 = StandardNormal.sample(&mut rng);
        let f = mean + shift + std * e;
        let gain = (f - incumbent).max(0.0);
        // p(f) / q(f) for q = N(mean + shift, std²)
        let w = if shift == 0.0 {
            1.0
        } else {
            let u = (f - mean) / std;
            (-0.5 * u * u + 0.5 * e * e).exp()
        };
        let v = gain * w;
        s += v;
        s2 += v * v;
    }
    let n = EI_SAMPLES as f64;
    let m = s / n;
    (m, ((s2 / n - m * m).max(0.0) / n).sqrt())
}

/// A GP whose posterior at any point away from the origin is the prior
/// `N(mean, std²)`.
pub fn flat_model(mean: f64, std: f64) -> compound_bo::gp::GpModel<f64> {
    let x = ndarray::arr2(&[[0.0]]);
    let y = ndarray::arr1(&[mean]);
    let scaling = ScalingSpec::new(vec![0.0], vec![1.0], mean, std).unwrap();
    let hp = KernelHyperparams::new(vec![1e-3], 1.0, 1e-6).unwrap();
    compound_bo::gp::GpModel::from_parts(hp, scaling, &x.view(), &y.view()).unwrap()
}

/// Fifteen synthetic-oracle rows with impact values far below the
/// threshold.
pub fn low_impact_history() -> Vec<compound_bo::experiment::Experiment> {
    use compound_bo::experiment::{Experiment, Provenance};
    use compound_bo::metrics::QualityMetrics;
    use compound_bo::mixture::DomainSpec;
    use compound_bo::oracle::Oracle;

    let oracle = Oracle::synthetic_default();
    let domain = DomainSpec::plain(DomainSpec::DEFAULT_UPPER_BOUNDS).unwrap();
    let recipes = domain.sample_dirichlet_rejection(15, [1.0; 4], 11).unwrap().recipes;
    recipes
        .into_iter()
        .enumerate()
        .map(|(i, recipe)| {
            let m = oracle.query_noiseless(&recipe).unwrap();
            Experiment {
                id: i as u64 + 1,
                batch_index: 0,
                recipe,
                measured: Some(QualityMetrics::new(m.mfr, m.youngs_modulus, 2.0 + 0.1 * (i % 3) as f64).unwrap()),
                provenance: Provenance::ManualEntry,
            }
        })
        .collect()
}
