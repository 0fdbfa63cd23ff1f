//! MAP hyperparameter fitting: multi-start projected BFGS on the penalized
//! log marginal likelihood, in log-parameter space.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FitWarning, GpError, GpModel, KernelHyperparams, ScalingSpec, TrainingSet};
use crate::linalg;
use crate::scalar::Scalar;

/// Prior on the log-lengthscales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LengthscalePriorSpec {
    /// `log ℓ ~ N(loc_offset + ½·ln d, scale²)`: the median lengthscale grows
    /// like `√d`, which keeps the prior from over-fitting as `d` grows.
    DimensionScaled { loc_offset: f64, scale: f64 },
    /// No prior; plain marginal-likelihood maximization within the bounds.
    Flat,
}

impl Default for LengthscalePriorSpec {
    fn default() -> Self {
        LengthscalePriorSpec::DimensionScaled {
            loc_offset: std::f64::consts::SQRT_2,
            scale: 3f64.sqrt(),
        }
    }
}

impl LengthscalePriorSpec {
    fn validate(&self) -> Result<(), GpError> {
        match *self {
            LengthscalePriorSpec::DimensionScaled { loc_offset, scale } => {
                if !loc_offset.is_finite() || !(scale > 0.0) || !scale.is_finite() {
                    return Err(GpError::InvalidOptions(format!(
                        "prior loc {loc_offset} / scale {scale} invalid"
                    )));
                }
                Ok(())
            }
            LengthscalePriorSpec::Flat => Ok(()),
        }
    }

    /// Log density and its gradient with respect to each log-lengthscale.
    fn log_density<T: Scalar>(&self, log_lengthscales: &[T]) -> (T, Vec<T>) {
        match *self {
            LengthscalePriorSpec::Flat => (T::zero(), vec![T::zero(); log_lengthscales.len()]),
            LengthscalePriorSpec::DimensionScaled { loc_offset, scale } => {
                let d = log_lengthscales.len() as f64;
                let mu = T::lit(loc_offset + 0.5 * d.ln());
                let s = T::lit(scale);
                let norm = -(s * (T::lit(2.0) * T::PI()).sqrt()).ln();
                let mut total = T::zero();
                let mut grad = Vec::with_capacity(log_lengthscales.len());
                for &u in log_lengthscales {
                    let z = (u - mu) / s;
                    total += norm - T::lit(0.5) * z * z;
                    grad.push(-z / s);
                }
                (total, grad)
            }
        }
    }
}

/// Box constraints on the hyperparameters, in natural (not log) units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperparamBounds {
    pub lengthscale: (f64, f64),
    pub signal_variance: (f64, f64),
    pub noise_variance: (f64, f64),
}

impl Default for HyperparamBounds {
    fn default() -> Self {
        HyperparamBounds {
            lengthscale: (1e-2, 1e3),
            signal_variance: (1e-3, 1e2),
            noise_variance: (1e-6, 2.0),
        }
    }
}

impl HyperparamBounds {
    fn log_box(&self, dim: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![self.lengthscale.0.ln(); dim];
        let mut hi = vec![self.lengthscale.1.ln(); dim];
        lo.push(self.signal_variance.0.ln());
        hi.push(self.signal_variance.1.ln());
        lo.push(self.noise_variance.0.ln());
        hi.push(self.noise_variance.1.ln());
        (lo, hi)
    }

    fn validate(&self) -> Result<(), GpError> {
        for (name, (lo, hi)) in [
            ("lengthscale", self.lengthscale),
            ("signal_variance", self.signal_variance),
            ("noise_variance", self.noise_variance),
        ] {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(GpError::InvalidOptions(format!("{name} bounds ({lo}, {hi}) invalid")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub prior: LengthscalePriorSpec,
    pub bounds: HyperparamBounds,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 8,
            seed: 0,
            max_iterations: 200,
            prior: LengthscalePriorSpec::default(),
            bounds: HyperparamBounds::default(),
        }
    }
}

struct Evaluation<T> {
    mll: T,
    grad: Vec<T>,
}

/// MLL and (optionally) its gradient with respect to
/// `[log ℓ_1…log ℓ_d, log σ_f², log σ_n²]`.
fn evaluate<T: Scalar>(data: &TrainingSet<T>, hp: &KernelHyperparams<T>, with_grad: bool) -> Result<Evaluation<T>, GpError> {
    let n = data.len();
    let d = hp.dim();
    let x = &data.inputs;
    let k_se = hp.gram(&x.view());
    let mut k_y = k_se.clone();
    for i in 0..n {
        k_y[[i, i]] += hp.noise_variance;
    }
    let (l, _) = linalg::cholesky_jittered(&k_y.view()).ok_or(GpError::SingularKernel)?;
    let alpha = linalg::cho_solve(&l.view(), &data.targets.view());
    let nf = T::from_usize(n).unwrap();
    let logdet: T = l.diag().iter().map(|v| v.ln()).sum();
    let mll = -T::lit(0.5) * data.targets.dot(&alpha) - logdet - T::lit(0.5) * nf * (T::lit(2.0) * T::PI()).ln();
    if !with_grad {
        return Ok(Evaluation { mll, grad: Vec::new() });
    }
    // W = ααᵀ − K⁻¹; ∂MLL/∂θ = ½ tr(W ∂K/∂θ)
    let kinv = linalg::cho_inverse(&l.view());
    let mut w = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            w[[i, j]] = alpha[i] * alpha[j] - kinv[[i, j]];
        }
    }
    let half = T::lit(0.5);
    let mut grad = vec![T::zero(); d + 2];
    for i in 0..n {
        for j in 0..i {
            let wk = w[[i, j]] * k_se[[i, j]];
            if wk == T::zero() {
                continue;
            }
            for (dim, g) in grad.iter_mut().take(d).enumerate() {
                let diff = (x[[i, dim]] - x[[j, dim]]) / hp.lengthscales[dim];
                // symmetric pair counted twice, times ½
                *g += wk * diff * diff;
            }
            grad[d] += wk;
        }
        grad[d] += half * w[[i, i]] * k_se[[i, i]];
        grad[d + 1] += half * w[[i, i]] * hp.noise_variance;
    }
    Ok(Evaluation { mll, grad })
}

/// Log marginal likelihood of the scaled training set.
pub fn log_marginal_likelihood<T: Scalar>(data: &TrainingSet<T>, hp: &KernelHyperparams<T>) -> Result<T, GpError> {
    hp.validate()?;
    Ok(evaluate(data, hp, false)?.mll)
}

/// Gradient of the log marginal likelihood in log-parameter space.
pub fn mll_gradient<T: Scalar>(data: &TrainingSet<T>, hp: &KernelHyperparams<T>) -> Result<Vec<T>, GpError> {
    hp.validate()?;
    Ok(evaluate(data, hp, true)?.grad)
}

/// MLL plus log prior density at the log-parameter vector `theta`, and its
/// gradient.
pub fn penalized_objective<T: Scalar>(
    data: &TrainingSet<T>,
    theta: &[T],
    prior: &LengthscalePriorSpec,
) -> Result<(T, Vec<T>), GpError> {
    let hp = KernelHyperparams::from_log_vector(theta);
    let eval = evaluate(data, &hp, true)?;
    let d = hp.dim();
    let (lp, lp_grad) = prior.log_density(&theta[..d]);
    let mut grad = eval.grad;
    for (g, p) in grad.iter_mut().zip(lp_grad) {
        *g += p;
    }
    Ok((eval.mll + lp, grad))
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Inf-norm of the projected gradient step `x − P(x + g)` (ascent).
fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((xi, gi), (l, h))| ((xi + gi).clamp(*l, *h) - xi).abs())
        .fold(0.0, f64::max)
}

struct AscentResult {
    theta: Vec<f64>,
    value: f64,
}

/// Projected quasi-Newton ascent with Armijo backtracking.
fn ascend<T: Scalar>(
    data: &TrainingSet<T>,
    prior: &LengthscalePriorSpec,
    start: Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    max_iterations: usize,
) -> Option<AscentResult> {
    let p = start.len();
    let eval = |theta: &[f64]| -> Option<(f64, Vec<f64>)> {
        let t: Vec<T> = theta.iter().map(|v| T::lit(*v)).collect();
        let (v, g) = penalized_objective(data, &t, prior).ok()?;
        let v = v.to_f64_lossy();
        let g: Vec<f64> = g.iter().map(|x| x.to_f64_lossy()).collect();
        if v.is_finite() && g.iter().all(|x| x.is_finite()) {
            Some((v, g))
        } else {
            None
        }
    };
    let mut x = start;
    project(&mut x, lo, hi);
    let (mut fx, mut gx) = eval(&x)?;
    let mut h = Array2::<f64>::eye(p);
    for _ in 0..max_iterations {
        if projected_gradient_norm(&x, &gx, lo, hi) < 1e-7 {
            break;
        }
        let bound_eps = 1e-12;
        let active: Vec<bool> = (0..p)
            .map(|i| (x[i] <= lo[i] + bound_eps && gx[i] < 0.0) || (x[i] >= hi[i] - bound_eps && gx[i] > 0.0))
            .collect();
        let mut dir = vec![0.0; p];
        for i in 0..p {
            if active[i] {
                continue;
            }
            dir[i] = (0..p).filter(|j| !active[*j]).map(|j| h[[i, j]] * gx[j]).sum();
        }
        let mut slope: f64 = dir.iter().zip(&gx).map(|(a, b)| a * b).sum();
        if !(slope > 0.0) {
            h = Array2::eye(p);
            for i in 0..p {
                dir[i] = if active[i] { 0.0 } else { gx[i] };
            }
            slope = dir.iter().zip(&gx).map(|(a, b)| a * b).sum();
            if !(slope > 0.0) {
                break;
            }
        }
        // cap the first trial step so one iteration moves at most 2 log-units
        let max_dir = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut step = if max_dir > 2.0 { 2.0 / max_dir } else { 1.0 };
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            project(&mut trial, lo, hi);
            let moved: f64 = trial.iter().zip(&x).zip(&gx).map(|((t, a), g)| (t - a) * g).sum();
            if let Some((ft, gt)) = eval(&trial) {
                if ft >= fx + 1e-4 * moved.max(0.0) && ft >= fx {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        // ascent: curvature pair uses the negated gradient difference
        let y: Vec<f64> = gx.iter().zip(&gnew).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let improvement = fnew - fx;
        x = xn;
        fx = fnew;
        gx = gnew;
        if sy > 1e-10 {
            let hy: Vec<f64> = (0..p).map(|i| (0..p).map(|j| h[[i, j]] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for i in 0..p {
                for j in 0..p {
                    h[[i, j]] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        let step_size = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if step_size < 1e-12 && improvement < 1e-14 * (1.0 + fx.abs()) {
            break;
        }
    }
    Some(AscentResult { theta: x, value: fx })
}

/// Fits a GP by maximizing MLL plus the lengthscale log prior.
///
/// Input bounds come from `scaling`; output mean and standard deviation are
/// recomputed from `raw_targets`. Starts are drawn from a seeded stream, so
/// the result is a deterministic function of the data and `options`.
pub fn fit<T: Scalar>(
    raw_inputs: &ArrayView2<T>,
    raw_targets: &ArrayView1<T>,
    scaling: &ScalingSpec<T>,
    options: &FitOptions,
) -> Result<GpModel<T>, GpError> {
    if options.restarts == 0 {
        return Err(GpError::InvalidOptions("restarts must be at least 1".into()));
    }
    options.prior.validate()?;
    options.bounds.validate()?;
    let n = raw_targets.len();
    if n < 2 {
        return Err(GpError::InsufficientData { needed: 2, got: n });
    }
    let (scaling, degenerate) = scaling.restandardized(raw_targets)?;
    let data = TrainingSet::new(raw_inputs, raw_targets, &scaling)?;
    let d = scaling.dim();
    let (lo, hi) = options.bounds.log_box(d);

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let sqrt_d = (d as f64).sqrt();
    let mut best: Option<AscentResult> = None;
    for r in 0..options.restarts {
        let start: Vec<f64> = if r == 0 {
            let mut s = vec![sqrt_d.ln(); d];
            s.push(0.0);
            s.push(1e-2f64.ln());
            s
        } else {
            let mut s: Vec<f64> = (0..d).map(|_| rng.random_range(0.05f64.ln()..(5.0 * sqrt_d).ln())).collect();
            s.push(rng.random_range(0.2f64.ln()..5f64.ln()));
            s.push(rng.random_range(1e-5f64.ln()..0.3f64.ln()));
            s
        };
        if let Some(res) = ascend(&data, &options.prior, start, &lo, &hi, options.max_iterations) {
            if best.as_ref().is_none_or(|b| res.value > b.value) {
                best = Some(res);
            }
        }
    }
    let best = best.ok_or(GpError::SingularKernel)?;
    let theta: Vec<T> = best.theta.iter().map(|v| T::lit(*v)).collect();
    let hp = KernelHyperparams::from_log_vector(&theta);
    let mut model = GpModel::from_training_set(hp, scaling, data)?;
    if degenerate {
        log::warn!("all {n} targets identical; fitting with unit output scale");
        model.push_warning(FitWarning::DegenerateData);
    }
    Ok(model)
}
