//! Gaussian-process regression with an ARD squared-exponential kernel, zero
//! prior mean in standardized output space, and Gaussian observation noise.
//!
//! Raw inputs are mapped to the unit box and raw targets are standardized
//! through a [`ScalingSpec`]; every quantity stored on a [`GpModel`] lives in
//! that scaled space. Multi-output models are plain collections of
//! independent single-output models.

mod cv;
mod fit;
mod kernel;
mod scaling;

pub use cv::{loo_cv, LooFold, LooReport};
pub use fit::{
    fit, log_marginal_likelihood, mll_gradient, penalized_objective, FitOptions, HyperparamBounds, LengthscalePriorSpec,
};
pub use kernel::KernelHyperparams;
pub use scaling::ScalingSpec;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::scalar::Scalar;

/// Negative posterior variances above this are clamped to zero.
const VARIANCE_CLAMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("kernel matrix is not positive definite even with 1e-4 jitter")]
    SingularKernel,
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {needed} training points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("invalid scaling: {0}")]
    InvalidScaling(String),
    #[error("invalid fit options: {0}")]
    InvalidOptions(String),
    #[error("posterior variance {0:e} is negative beyond tolerance")]
    NegativeVariance(f64),
    #[error("malformed model document: {0}")]
    Document(String),
}

/// Non-fatal conditions noticed while fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWarning {
    /// All targets were identical; the output scale fell back to one and the
    /// model predicts a flat mean.
    DegenerateData,
    /// The kernel needed diagonal jitter to factorize.
    JitterApplied,
}

/// Training data already mapped into scaled space.
#[derive(Debug, Clone)]
pub struct TrainingSet<T> {
    pub inputs: Array2<T>,
    pub targets: Array1<T>,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn new(raw_inputs: &ArrayView2<T>, raw_targets: &ArrayView1<T>, scaling: &ScalingSpec<T>) -> Result<Self, GpError> {
        if raw_inputs.ncols() != scaling.dim() {
            return Err(GpError::DimensionMismatch {
                expected: scaling.dim(),
                got: raw_inputs.ncols(),
            });
        }
        if raw_inputs.nrows() != raw_targets.len() {
            return Err(GpError::InvalidOptions(format!(
                "{} input rows but {} targets",
                raw_inputs.nrows(),
                raw_targets.len()
            )));
        }
        Ok(TrainingSet {
            inputs: scaling.scale_inputs(raw_inputs),
            targets: scaling.standardize(raw_targets),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Posterior covariance, either full (joint query) or diagonal.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance<T> {
    Joint(Array2<T>),
    Marginal(Array1<T>),
}

/// Gaussian posterior over latent function values, standardized space.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGaussian<T> {
    pub mean: Array1<T>,
    pub covariance: Covariance<T>,
    /// Number of variances that came out slightly negative and were set to 0.
    pub clamped: usize,
}

impl<T: Scalar> PosteriorGaussian<T> {
    pub fn variances(&self) -> Array1<T> {
        match &self.covariance {
            Covariance::Joint(c) => c.diag().to_owned(),
            Covariance::Marginal(v) => v.clone(),
        }
    }

    pub fn raw_means(&self, scaling: &ScalingSpec<T>) -> Array1<T> {
        self.mean.mapv(|m| scaling.unstandardize(m))
    }

    pub fn raw_stds(&self, scaling: &ScalingSpec<T>) -> Array1<T> {
        self.variances().mapv(|v| scaling.unstandardize_std(v.sqrt()))
    }
}

/// A factorized single-output GP.
#[derive(Debug, Clone)]
pub struct GpModel<T> {
    hyperparams: KernelHyperparams<T>,
    scaling: ScalingSpec<T>,
    data: TrainingSet<T>,
    cholesky: Array2<T>,
    alpha: Array1<T>,
    jitter: T,
    warnings: Vec<FitWarning>,
}

impl<T: Scalar> GpModel<T> {
    /// Factorizes `K + σ_n² I` for fixed hyperparameters. This is the path for
    /// conditioning on new data without refitting.
    pub fn from_parts(
        hyperparams: KernelHyperparams<T>,
        scaling: ScalingSpec<T>,
        raw_inputs: &ArrayView2<T>,
        raw_targets: &ArrayView1<T>,
    ) -> Result<Self, GpError> {
        hyperparams.validate()?;
        if hyperparams.dim() != scaling.dim() {
            return Err(GpError::DimensionMismatch {
                expected: scaling.dim(),
                got: hyperparams.dim(),
            });
        }
        let data = TrainingSet::new(raw_inputs, raw_targets, &scaling)?;
        if data.is_empty() {
            return Err(GpError::InsufficientData { needed: 1, got: 0 });
        }
        Self::from_training_set(hyperparams, scaling, data)
    }

    pub(crate) fn from_training_set(
        hyperparams: KernelHyperparams<T>,
        scaling: ScalingSpec<T>,
        data: TrainingSet<T>,
    ) -> Result<Self, GpError> {
        let mut k = hyperparams.gram(&data.inputs.view());
        for i in 0..k.nrows() {
            k[[i, i]] += hyperparams.noise_variance;
        }
        let (cholesky, jitter) = linalg::cholesky_jittered(&k.view()).ok_or(GpError::SingularKernel)?;
        let alpha = linalg::cho_solve(&cholesky.view(), &data.targets.view());
        let mut warnings = Vec::new();
        if jitter > T::zero() {
            warnings.push(FitWarning::JitterApplied);
        }
        Ok(GpModel {
            hyperparams,
            scaling,
            data,
            cholesky,
            alpha,
            jitter,
            warnings,
        })
    }

    pub fn hyperparams(&self) -> &KernelHyperparams<T> {
        &self.hyperparams
    }

    pub fn scaling(&self) -> &ScalingSpec<T> {
        &self.scaling
    }

    /// Training inputs in scaled space.
    pub fn train_inputs(&self) -> &Array2<T> {
        &self.data.inputs
    }

    /// Training targets in standardized space.
    pub fn train_targets(&self) -> &Array1<T> {
        &self.data.targets
    }

    pub fn raw_train_inputs(&self) -> Array2<T> {
        self.scaling.unscale_inputs(&self.data.inputs.view())
    }

    pub fn raw_train_targets(&self) -> Array1<T> {
        self.data.targets.mapv(|y| self.scaling.unstandardize(y))
    }

    pub fn cholesky_factor(&self) -> &Array2<T> {
        &self.cholesky
    }

    pub fn alpha(&self) -> &Array1<T> {
        &self.alpha
    }

    /// Diagonal jitter that was needed on top of the noise variance.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn warnings(&self) -> &[FitWarning] {
        &self.warnings
    }

    pub(crate) fn push_warning(&mut self, w: FitWarning) {
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }

    pub fn dim(&self) -> usize {
        self.scaling.dim()
    }

    pub fn n_train(&self) -> usize {
        self.data.len()
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> T {
        let n = T::from_usize(self.n_train()).unwrap();
        let fit_term = -T::lit(0.5) * self.data.targets.dot(&self.alpha);
        let logdet: T = self.cholesky.diag().iter().map(|l| l.ln()).sum();
        fit_term - logdet - T::lit(0.5) * n * (T::lit(2.0) * T::PI()).ln()
    }

    fn check_dim(&self, query: &ArrayView2<T>) -> Result<(), GpError> {
        if query.ncols() != self.dim() {
            return Err(GpError::DimensionMismatch {
                expected: self.dim(),
                got: query.ncols(),
            });
        }
        Ok(())
    }

    /// `k(X_train, x)` for one scaled query point.
    pub(crate) fn kernel_column(&self, scaled: &ArrayView1<T>) -> Array1<T> {
        Array1::from_iter(
            self.data
                .inputs
                .rows()
                .into_iter()
                .map(|row| self.hyperparams.covariance(&row, scaled)),
        )
    }

    /// Posterior of the latent function at raw query points.
    pub fn predict(&self, raw_query: &ArrayView2<T>, joint: bool) -> Result<PosteriorGaussian<T>, GpError> {
        self.check_dim(raw_query)?;
        let scaled = self.scaling.scale_inputs(raw_query);
        self.predict_scaled(&scaled.view(), joint)
    }

    pub(crate) fn predict_scaled(&self, scaled: &ArrayView2<T>, joint: bool) -> Result<PosteriorGaussian<T>, GpError> {
        let k_star = self.hyperparams.cross_covariance(&self.data.inputs.view(), scaled);
        let mean = k_star.t().dot(&self.alpha);
        let v = linalg::solve_lower_matrix(&self.cholesky.view(), &k_star.view());
        let mut clamped = 0;
        let mut clamp = |x: T| -> Result<T, GpError> {
            if x >= T::zero() {
                Ok(x)
            } else if x > -T::lit(VARIANCE_CLAMP_TOL) {
                clamped += 1;
                Ok(T::zero())
            } else {
                Err(GpError::NegativeVariance(x.to_f64_lossy()))
            }
        };
        let covariance = if joint {
            let mut cov = self.hyperparams.gram(scaled) - v.t().dot(&v);
            let m = cov.nrows();
            for i in 0..m {
                for j in 0..i {
                    let s = T::lit(0.5) * (cov[[i, j]] + cov[[j, i]]);
                    cov[[i, j]] = s;
                    cov[[j, i]] = s;
                }
                cov[[i, i]] = clamp(cov[[i, i]])?;
            }
            Covariance::Joint(cov)
        } else {
            let mut var = Array1::<T>::zeros(scaled.nrows());
            for (i, col) in v.axis_iter(Axis(1)).enumerate() {
                var[i] = clamp(self.hyperparams.signal_variance - col.dot(&col))?;
            }
            Covariance::Marginal(var)
        };
        Ok(PosteriorGaussian {
            mean,
            covariance,
            clamped,
        })
    }

    /// Marginal mean and variance at a single scaled point, standardized space.
    pub(crate) fn predict_point_scaled(&self, scaled: &ArrayView1<T>) -> (T, T) {
        let k = self.kernel_column(scaled);
        let mean = k.dot(&self.alpha);
        let v = linalg::solve_lower(&self.cholesky.view(), &k.view());
        let var = (self.hyperparams.signal_variance - v.dot(&v)).max(T::zero());
        (mean, var)
    }

    /// Raw-unit predictive mean and standard deviation at one raw point.
    pub fn predict_raw(&self, raw_point: &ArrayView1<T>) -> Result<(T, T), GpError> {
        if raw_point.len() != self.dim() {
            return Err(GpError::DimensionMismatch {
                expected: self.dim(),
                got: raw_point.len(),
            });
        }
        let (m, v) = self.predict_point_scaled(&self.scaling.scale_point(raw_point).view());
        Ok((self.scaling.unstandardize(m), self.scaling.unstandardize_std(v.sqrt())))
    }

    /// New model with extra observations appended, hyperparameters and
    /// scaling frozen.
    pub fn condition_on(&self, raw_inputs: &ArrayView2<T>, raw_targets: &ArrayView1<T>) -> Result<Self, GpError> {
        self.check_dim(raw_inputs)?;
        let extra = TrainingSet::new(raw_inputs, raw_targets, &self.scaling)?;
        let inputs = ndarray::concatenate(Axis(0), &[self.data.inputs.view(), extra.inputs.view()])
            .expect("matching columns");
        let targets = ndarray::concatenate(Axis(0), &[self.data.targets.view(), extra.targets.view()])
            .expect("vectors concatenate");
        let mut model = Self::from_training_set(
            self.hyperparams.clone(),
            self.scaling.clone(),
            TrainingSet { inputs, targets },
        )?;
        for w in &self.warnings {
            if *w == FitWarning::DegenerateData {
                model.push_warning(*w);
            }
        }
        Ok(model)
    }

    pub fn to_document(&self) -> GpModelDocument {
        let to64 = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
        GpModelDocument {
            format: GpModelDocument::FORMAT.to_string(),
            hyperparams: KernelHyperparams {
                lengthscales: to64(&self.hyperparams.lengthscales),
                signal_variance: self.hyperparams.signal_variance.to_f64_lossy(),
                noise_variance: self.hyperparams.noise_variance.to_f64_lossy(),
            },
            scaling: ScalingSpec {
                input_lower: to64(&self.scaling.input_lower),
                input_upper: to64(&self.scaling.input_upper),
                output_mean: self.scaling.output_mean.to_f64_lossy(),
                output_std: self.scaling.output_std.to_f64_lossy(),
            },
            inputs: self
                .raw_train_inputs()
                .rows()
                .into_iter()
                .map(|r| to64(r.as_slice().expect("row-major")))
                .collect(),
            targets: to64(self.raw_train_targets().as_slice().expect("contiguous")),
        }
    }

    /// Rebuilds a model from its document; the factorization is recomputed.
    pub fn from_document(doc: &GpModelDocument) -> Result<Self, GpError> {
        if doc.format != GpModelDocument::FORMAT {
            return Err(GpError::Document(format!("unknown format {:?}", doc.format)));
        }
        let cv = |v: &[f64]| -> Vec<T> { v.iter().map(|x| T::lit(*x)).collect() };
        let hyperparams = KernelHyperparams::new(
            cv(&doc.hyperparams.lengthscales),
            T::lit(doc.hyperparams.signal_variance),
            T::lit(doc.hyperparams.noise_variance),
        )?;
        let scaling = ScalingSpec::new(
            cv(&doc.scaling.input_lower),
            cv(&doc.scaling.input_upper),
            T::lit(doc.scaling.output_mean),
            T::lit(doc.scaling.output_std),
        )?;
        let d = scaling.dim();
        if doc.inputs.iter().any(|r| r.len() != d) {
            return Err(GpError::Document("ragged input rows".into()));
        }
        let flat: Vec<T> = doc.inputs.iter().flat_map(|r| cv(r)).collect();
        let inputs = Array2::from_shape_vec((doc.inputs.len(), d), flat).map_err(|e| GpError::Document(e.to_string()))?;
        let targets = Array1::from(cv(&doc.targets));
        Self::from_parts(hyperparams, scaling, &inputs.view(), &targets.view())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("document serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, GpError> {
        let doc: GpModelDocument = serde_json::from_str(s).map_err(|e| GpError::Document(e.to_string()))?;
        Self::from_document(&doc)
    }
}

/// JSON form of a [`GpModel`]: hyperparameters, scaling and raw training
/// data. The Cholesky factor is not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModelDocument {
    pub format: String,
    pub hyperparams: KernelHyperparams<f64>,
    pub scaling: ScalingSpec<f64>,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl GpModelDocument {
    pub const FORMAT: &'static str = "gp_model_v1";
}
