//! Fitting the three per-metric GPs from experiment records.

use ndarray::{Array1, Array2};

use crate::acquisition::MetricModels;
use crate::experiment::Experiment;
use crate::gp::{self, FitOptions, GpError, GpModel, ScalingSpec};
use crate::metrics::{Metric, QualityMetrics};
use crate::mixture::{DomainSpec, MixtureRecipe};
use crate::seeds::derive_seed;

/// Feature matrix and one target vector per metric, in [`Metric::ALL`]
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub features: Array2<f64>,
    pub targets: [Array1<f64>; 3],
}

impl TrainingData {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn target(&self, metric: Metric) -> &Array1<f64> {
        &self.targets[metric as usize]
    }
}

/// Builds features for measured `(recipe, metrics)` pairs.
pub fn training_data<'a>(
    domain: &DomainSpec,
    rows: impl IntoIterator<Item = (&'a MixtureRecipe, &'a QualityMetrics)>,
) -> TrainingData {
    let d = domain.feature_map().dim();
    let mut flat = Vec::new();
    let mut targets: [Vec<f64>; 3] = Default::default();
    let mut n = 0;
    for (recipe, m) in rows {
        flat.extend(domain.features(recipe));
        for metric in Metric::ALL {
            targets[metric as usize].push(m.get(metric));
        }
        n += 1;
    }
    TrainingData {
        features: Array2::from_shape_vec((n, d), flat).expect("rows have the feature dimension"),
        targets: targets.map(Array1::from),
    }
}

/// Measured experiments only.
pub fn experiment_training_data<'a>(
    domain: &DomainSpec,
    experiments: impl IntoIterator<Item = &'a Experiment>,
) -> TrainingData {
    training_data(
        domain,
        experiments
            .into_iter()
            .filter_map(|e| e.measured.as_ref().map(|m| (&e.recipe, m))),
    )
}

/// Independent MAP fits, one per metric, with inputs scaled to the feature
/// bounding box of `domain`.
pub fn fit_metric_models(domain: &DomainSpec, data: &TrainingData, options: &FitOptions) -> Result<MetricModels<f64>, GpError> {
    let (lo, hi) = domain.feature_bounds();
    let scaling = ScalingSpec::new(lo, hi, 0.0, 1.0)?;
    let fit_one = |metric: Metric| -> Result<GpModel<f64>, GpError> {
        let opts = FitOptions {
            seed: derive_seed(options.seed, metric as u64),
            ..options.clone()
        };
        gp::fit(&data.features.view(), &data.target(metric).view(), &scaling, &opts)
    };
    Ok(MetricModels {
        mfr: fit_one(Metric::Mfr)?,
        youngs_modulus: fit_one(Metric::YoungsModulus)?,
        impact_strength: fit_one(Metric::ImpactStrength)?,
    })
}

/// Appends `data` to each model, keeping hyperparameters and scaling.
pub fn condition_metric_models(models: &MetricModels<f64>, data: &TrainingData) -> Result<MetricModels<f64>, GpError> {
    if data.is_empty() {
        return Ok(models.clone());
    }
    let x = data.features.view();
    Ok(MetricModels {
        mfr: models.mfr.condition_on(&x, &data.target(Metric::Mfr).view())?,
        youngs_modulus: models
            .youngs_modulus
            .condition_on(&x, &data.target(Metric::YoungsModulus).view())?,
        impact_strength: models
            .impact_strength
            .condition_on(&x, &data.target(Metric::ImpactStrength).view())?,
    })
}
