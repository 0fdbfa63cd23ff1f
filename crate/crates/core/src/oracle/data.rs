//! Oracles backed by GPs fitted to measured experiments.

use ndarray::{Array1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::acquisition::MetricModels;
use crate::experiment::Experiment;
use crate::gp::{loo_cv, FitOptions, ScalingSpec};
use crate::metrics::{Metric, QualityMetrics};
use crate::mixture::{DomainSpec, MixtureRecipe};
use crate::modeling::{experiment_training_data, fit_metric_models, TrainingData};

/// Fewest measured rows accepted for a data-trained oracle.
pub const MIN_ROWS: usize = 5;
/// Predictive means below this are reported as this value, since quality
/// metrics are strictly positive.
pub const METRIC_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ValidationMethod {
    Loo,
    Holdout { train_fraction: f64 },
}

impl Default for ValidationMethod {
    fn default() -> Self {
        ValidationMethod::Holdout { train_fraction: 0.85 }
    }
}

/// Predicted versus true value for one validation point, raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub index: usize,
    pub truth: f64,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValidation {
    pub metric: Metric,
    pub rmse: Option<f64>,
    pub points: Vec<ValidationPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub method: ValidationMethod,
    pub rows: usize,
    pub per_metric: Vec<MetricValidation>,
}

#[derive(Debug, Clone)]
pub struct DataOracle {
    domain: DomainSpec,
    models: MetricModels<f64>,
}

impl DataOracle {
    pub fn models(&self) -> &MetricModels<f64> {
        &self.models
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    /// Posterior means, floored at [`METRIC_FLOOR`].
    pub fn metrics(&self, recipe: &MixtureRecipe) -> Result<QualityMetrics, OracleError> {
        let x = Array1::from(self.domain.features(recipe));
        let mut out = [0.0; 3];
        for metric in Metric::ALL {
            let (mean, _) = self.models.get(metric).predict_raw(&x.view())?;
            out[metric as usize] = mean.max(METRIC_FLOOR);
        }
        Ok(QualityMetrics {
            mfr: out[0],
            youngs_modulus: out[1],
            impact_strength: out[2],
        })
    }
}

fn rmse(points: &[ValidationPoint]) -> Option<f64> {
    let errs: Vec<f64> = points.iter().filter_map(|p| p.mean.map(|m| m - p.truth)).collect();
    (!errs.is_empty()).then(|| (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt())
}

fn subset(data: &TrainingData, idx: &[usize]) -> TrainingData {
    TrainingData {
        features: data.features.select(Axis(0), idx),
        targets: [
            data.targets[0].select(Axis(0), idx),
            data.targets[1].select(Axis(0), idx),
            data.targets[2].select(Axis(0), idx),
        ],
    }
}

/// Fits one GP per metric on every measured row and validates the fit.
///
/// Holdout shuffles rows with `seed` and trains on the first
/// `ceil(train_fraction · n)`; LOO refits per fold.
pub fn build_data_oracle(
    experiments: &[Experiment],
    domain: &DomainSpec,
    validation: ValidationMethod,
    options: &FitOptions,
    seed: u64,
) -> Result<(DataOracle, ValidationReport), OracleError> {
    let data = experiment_training_data(domain, experiments);
    let n = data.len();
    if n < MIN_ROWS {
        return Err(OracleError::Schema(format!("{n} measured rows, need at least {MIN_ROWS}")));
    }
    let per_metric = match validation {
        ValidationMethod::Loo => {
            let (lo, hi) = domain.feature_bounds();
            let scaling = ScalingSpec::new(lo, hi, 0.0, 1.0)?;
            let mut out = Vec::new();
            for metric in Metric::ALL {
                let report = loo_cv(&data.features.view(), &data.target(metric).view(), &scaling, options)?;
                let points = report
                    .folds
                    .iter()
                    .map(|f| ValidationPoint {
                        index: f.index,
                        truth: f.target,
                        mean: f.mean,
                        std: f.std,
                    })
                    .collect();
                out.push(MetricValidation {
                    metric,
                    rmse: report.rmse,
                    points,
                });
            }
            out
        }
        ValidationMethod::Holdout { train_fraction } => {
            if !(train_fraction > 0.0 && train_fraction < 1.0) {
                return Err(OracleError::Schema(format!("train fraction {train_fraction} outside (0, 1)")));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let n_train = ((train_fraction * n as f64).ceil() as usize).clamp(2, n - 1);
            let (train, test) = order.split_at(n_train);
            let models = fit_metric_models(domain, &subset(&data, train), options)?;
            let mut out = Vec::new();
            for metric in Metric::ALL {
                let model = models.get(metric);
                let mut points = Vec::with_capacity(test.len());
                for &i in test {
                    let (mean, std) = model.predict_raw(&data.features.row(i))?;
                    points.push(ValidationPoint {
                        index: i,
                        truth: data.target(metric)[i],
                        mean: Some(mean),
                        std: Some(std),
                    });
                }
                out.push(MetricValidation {
                    metric,
                    rmse: rmse(&points),
                    points,
                });
            }
            out
        }
    };
    let models = fit_metric_models(domain, &data, options)?;
    Ok((
        DataOracle {
            domain: domain.clone(),
            models,
        },
        ValidationReport {
            method: validation,
            rows: n,
            per_metric,
        },
    ))
}
