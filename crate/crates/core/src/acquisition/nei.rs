//! Monte-Carlo log noisy expected improvement.
//!
//! Latent values at the observed points and the candidates are sampled
//! jointly from the objective model's posterior. Each sample carries its own
//! incumbent, the best observed utility in that sample, so noisy observations
//! are never trusted as exact. With constraints, only observed points that
//! are feasible in a sample compete for that sample's incumbent.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AcquisitionError, AcquisitionSpec, ConstraintSpec, ObjectiveSpec};
use crate::gp::GpModel;
use crate::linalg::{self, PivotedCholesky};
use crate::scalar::Scalar;
use crate::special::{log_mean_exp, log_softplus, norm_ppf};

/// Relative tolerance for the rank-revealing factorizations, times σ_f².
const PIVOT_TOL: f64 = 1e-10;

const OBSERVED_STREAM: u64 = 0;
const CANDIDATE_STREAM: u64 = 1;
const CONSTRAINT_STREAM: u64 = 2;

/// Log of an MC estimate together with the delta-method standard error of
/// that log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeiEstimate {
    pub log_value: f64,
    pub log_std_error: f64,
}

/// Stratified standard-normal draws: one Latin-hypercube column of `m`
/// uniforms mapped through the normal quantile function.
fn normal_column<T: Scalar>(seed: u64, stream: u64, column: u64, m: usize) -> Array1<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 32) | column);
    let mut strata: Vec<usize> = (0..m).collect();
    strata.shuffle(&mut rng);
    let mf = m as f64;
    Array1::from_iter(strata.into_iter().map(|k| {
        let u = (k as f64 + rng.random::<f64>()) / mf;
        // keep away from 0 and 1 so the quantile stays finite
        let u = u.clamp(1e-300, 1.0 - f64::EPSILON / 2.0);
        T::lit(norm_ppf(u))
    }))
}

/// Base-sample matrix `m × cols` for one stream.
fn base_samples<T: Scalar>(seed: u64, stream: u64, m: usize, cols: usize) -> Array2<T> {
    let mut out = Array2::<T>::zeros((m, cols));
    for c in 0..cols {
        out.column_mut(c).assign(&normal_column::<T>(seed, stream, c as u64, m));
    }
    out
}

fn observed_factor<T: Scalar>(
    model: &GpModel<T>,
    observed: &Array2<T>,
    v_obs: &Array2<T>,
) -> PivotedCholesky<T> {
    let hp = model.hyperparams();
    let cov_obs = hp.gram(&observed.view()) - v_obs.t().dot(v_obs);
    PivotedCholesky::new(&cov_obs.view(), T::lit(PIVOT_TOL) * hp.signal_variance)
}

/// Joint posterior samples at the observed points in raw units, `m × n`.
fn raw_samples<T: Scalar>(
    model: &GpModel<T>,
    k_xo: &Array2<T>,
    factor: &PivotedCholesky<T>,
    z: &Array2<T>,
) -> Result<Array2<f64>, AcquisitionError> {
    let mean = k_xo.t().dot(model.alpha());
    let f = z.slice(ndarray::s![.., ..factor.rank]).dot(&factor.factor.t());
    let scaling = model.scaling();
    let mut out = Array2::<f64>::zeros(f.dim());
    for ((s, i), v) in f.indexed_iter() {
        let raw = scaling.unstandardize(mean[i] + *v).to_f64_lossy();
        if raw.is_nan() {
            return Err(AcquisitionError::NonFiniteSample);
        }
        out[[s, i]] = raw;
    }
    Ok(out)
}

/// Everything about the observed set that does not depend on the candidate
/// batch. Build once per optimization round; evaluation reuses the same base
/// samples, so the estimate is a deterministic, smooth function of the batch.
pub struct NeiContext<'a, T> {
    model: &'a GpModel<T>,
    objective: ObjectiveSpec,
    temperature: f64,
    mc_samples: usize,
    observed: Array2<T>,
    /// `L⁻¹ k(X_train, O)`.
    v_obs: Array2<T>,
    factor: PivotedCholesky<T>,
    z_obs: Array2<T>,
    z_cand: Array2<T>,
    incumbents: Vec<f64>,
}

impl<'a, T: Scalar> NeiContext<'a, T> {
    /// `observed_raw` are the points whose latent values define the
    /// incumbent; `max_batch` bounds the batch size later evaluated.
    pub fn new(
        model: &'a GpModel<T>,
        observed_raw: &ArrayView2<T>,
        spec: &AcquisitionSpec,
        max_batch: usize,
    ) -> Result<Self, AcquisitionError> {
        Self::with_feasibility(model, observed_raw, spec, max_batch, &[])
    }

    /// As [`NeiContext::new`], but the incumbent of each sample is the best
    /// utility among observed points whose jointly sampled constraint
    /// values are all satisfied in that sample. Samples where no observed
    /// point is feasible use the worst observed utility.
    pub fn with_feasibility(
        model: &'a GpModel<T>,
        observed_raw: &ArrayView2<T>,
        spec: &AcquisitionSpec,
        max_batch: usize,
        constraints: &[(&GpModel<T>, ConstraintSpec)],
    ) -> Result<Self, AcquisitionError> {
        spec.validate()?;
        if observed_raw.nrows() == 0 {
            return Err(AcquisitionError::InvalidSpec("noisy EI needs at least one observed point".into()));
        }
        if observed_raw.ncols() != model.dim() {
            return Err(crate::gp::GpError::DimensionMismatch {
                expected: model.dim(),
                got: observed_raw.ncols(),
            }
            .into());
        }
        let observed = model.scaling().scale_inputs(observed_raw);
        let hp = model.hyperparams();
        let k_xo = hp.cross_covariance(&model.train_inputs().view(), &observed.view());
        let v_obs = linalg::solve_lower_matrix(&model.cholesky_factor().view(), &k_xo.view());
        let factor = observed_factor(model, &observed, &v_obs);

        let m = spec.mc_samples;
        let n = observed.nrows();
        let z_obs = base_samples::<T>(spec.base_sample_seed, OBSERVED_STREAM, m, n);
        let z_cand = base_samples::<T>(spec.base_sample_seed, CANDIDATE_STREAM, m, max_batch.max(1));

        let values = raw_samples(model, &k_xo, &factor, &z_obs)?;
        let mut feasible = vec![vec![true; n]; m];
        for (k, (cmodel, constraint)) in constraints.iter().enumerate() {
            let cobs = cmodel.scaling().scale_inputs(observed_raw);
            let ck = cmodel.hyperparams().cross_covariance(&cmodel.train_inputs().view(), &cobs.view());
            let cv = linalg::solve_lower_matrix(&cmodel.cholesky_factor().view(), &ck.view());
            let cf = observed_factor(cmodel, &cobs, &cv);
            let cz = base_samples::<T>(spec.base_sample_seed, CONSTRAINT_STREAM + k as u64, m, n);
            let cvals = raw_samples(cmodel, &ck, &cf, &cz)?;
            for s in 0..m {
                for i in 0..n {
                    feasible[s][i] &= constraint.is_satisfied(cvals[[s, i]]);
                }
            }
        }
        let mut incumbents = Vec::with_capacity(m);
        for s in 0..m {
            let utilities = values.row(s).mapv(|f| spec.objective.utility(f));
            let best_feasible = (0..n)
                .filter(|&i| feasible[s][i])
                .map(|i| utilities[i])
                .fold(f64::NEG_INFINITY, f64::max);
            incumbents.push(if best_feasible > f64::NEG_INFINITY {
                best_feasible
            } else if constraints.is_empty() {
                utilities.fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            } else {
                // nothing feasible in this sample: any gain over the worst
                // observed point counts
                utilities.fold(f64::INFINITY, |a, &b| a.min(b))
            });
        }

        Ok(NeiContext {
            model,
            objective: spec.objective,
            temperature: spec.smoothing_temperature,
            mc_samples: m,
            observed,
            v_obs,
            factor,
            z_obs,
            z_cand,
            incumbents,
        })
    }

    pub fn max_batch(&self) -> usize {
        self.z_cand.ncols()
    }

    /// Per-sample incumbent utilities.
    pub fn incumbents(&self) -> &[f64] {
        &self.incumbents
    }

    /// Log softplus-smoothed noisy EI at a raw candidate batch.
    pub fn evaluate(&self, candidates_raw: &ArrayView2<T>) -> Result<NeiEstimate, AcquisitionError> {
        let q = candidates_raw.nrows();
        if q == 0 || q > self.max_batch() {
            return Err(AcquisitionError::InvalidSpec(format!(
                "batch of {q} outside 1..={}",
                self.max_batch()
            )));
        }
        let model = self.model;
        if candidates_raw.ncols() != model.dim() {
            return Err(crate::gp::GpError::DimensionMismatch {
                expected: model.dim(),
                got: candidates_raw.ncols(),
            }
            .into());
        }
        let hp = model.hyperparams();
        let cand = model.scaling().scale_inputs(candidates_raw);
        let k_xc = hp.cross_covariance(&model.train_inputs().view(), &cand.view());
        let mean_c = k_xc.t().dot(model.alpha());
        let v_c = linalg::solve_lower_matrix(&model.cholesky_factor().view(), &k_xc.view());
        let cov_oc = hp.cross_covariance(&self.observed.view(), &cand.view()) - self.v_obs.t().dot(&v_c);
        let rank = self.factor.rank;
        let mut w = Array2::<T>::zeros((rank, q));
        for j in 0..q {
            w.column_mut(j).assign(&self.factor.solve_leading(&cov_oc.column(j)));
        }
        let cov_cc = hp.gram(&cand.view()) - v_c.t().dot(&v_c) - w.t().dot(&w);
        let tol = T::lit(PIVOT_TOL) * hp.signal_variance;
        let cond = PivotedCholesky::new(&cov_cc.view(), tol);

        // f_c = μ_c + Wᵀ z_o + L_c z_c, one row per sample
        let mut f = self.z_obs.slice(ndarray::s![.., ..rank]).dot(&w);
        if cond.rank > 0 {
            f = f + self.z_cand.slice(ndarray::s![.., ..cond.rank]).dot(&cond.factor.t());
        }

        let scaling = model.scaling();
        let tau = self.temperature;
        let mut logs = Vec::with_capacity(self.mc_samples);
        for (s, row) in f.rows().into_iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for j in 0..q {
                let value = scaling.unstandardize(mean_c[j] + row[j]).to_f64_lossy();
                if value.is_nan() {
                    return Err(AcquisitionError::NonFiniteSample);
                }
                best = best.max(self.objective.utility(value));
            }
            logs.push(log_softplus(best - self.incumbents[s], tau));
        }
        Ok(summarize(&logs))
    }
}

/// Log-mean-exp of per-sample logs plus the delta-method standard error.
fn summarize(logs: &[f64]) -> NeiEstimate {
    let m = logs.len() as f64;
    let log_value = log_mean_exp(logs);
    let ratios: Vec<f64> = logs.iter().map(|l| (l - log_value).exp()).collect();
    let var = ratios.iter().map(|r| (r - 1.0) * (r - 1.0)).sum::<f64>() / (m - 1.0);
    NeiEstimate {
        log_value,
        log_std_error: (var / m).sqrt(),
    }
}

/// One-shot convenience wrapper around [`NeiContext`].
pub fn log_nei_mc<T: Scalar>(
    model: &GpModel<T>,
    candidates_raw: &ArrayView2<T>,
    observed_raw: &ArrayView2<T>,
    spec: &AcquisitionSpec,
) -> Result<NeiEstimate, AcquisitionError> {
    NeiContext::new(model, observed_raw, spec, candidates_raw.nrows())?.evaluate(candidates_raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_columns_are_stratified_and_reproducible() {
        let a = normal_column::<f64>(3, 0, 2, 64);
        let b = normal_column::<f64>(3, 0, 2, 64);
        assert_eq!(a, b);
        let c = normal_column::<f64>(3, 1, 2, 64);
        assert_ne!(a, c);
        // one draw per stratum of the uniform
        let mut strata: Vec<usize> = a
            .iter()
            .map(|z| (crate::special::norm_cdf(*z) * 64.0).floor() as usize)
            .collect();
        strata.sort_unstable();
        assert_eq!(strata, (0..64).collect::<Vec<_>>());
    }
}
